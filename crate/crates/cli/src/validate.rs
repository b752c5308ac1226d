//! Validation suites run by `coalrates validate`.

use std::io::Write;

use anyhow::Result;
use clap::ValueEnum;
use coalrates::estimators::MethodId;
use coalrates::montecarlo::{
    domination_test, equivalence_suite, exact_glass_failure, exact_rstar_failure, run_experiment,
    ExperimentConfig, EQUIVALENT_PAIRS, Z99,
};
use coalrates::rates::{
    alpha_rstar, alpha_steac, chernoff_rate, rstar_mgf, sigma_star_equation, solve_sigma_star,
    steac_fixed_point_map, steac_log_derivative, steac_mgf,
};
use coalrates::records::fmt_real;
use coalrates::SpeciesTree;

pub const REPORT_HEADER: &str = "suite,check,passed,value,threshold,detail";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Equivalences,
    Oracles,
    Rates,
    Domination,
    All,
}

impl Suite {
    fn name(self) -> &'static str {
        match self {
            Suite::Equivalences => "equivalences",
            Suite::Oracles => "oracles",
            Suite::Rates => "rates",
            Suite::Domination => "domination",
            Suite::All => "all",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

/// Replicate counts used when `--replicates` is not given.
const ORACLE_REPLICATES: u64 = 200_000;
const DOMINATION_REPLICATES: u64 = 100_000;

pub fn run(suite: Suite, seed: u64, replicates: Option<u64>) -> Result<Vec<Check>> {
    let suites = match suite {
        Suite::All => vec![Suite::Equivalences, Suite::Oracles, Suite::Rates, Suite::Domination],
        s => vec![s],
    };
    let mut checks = Vec::new();
    for s in suites {
        match s {
            Suite::Equivalences => equivalences(seed, &mut checks)?,
            Suite::Oracles => oracles(seed, replicates.unwrap_or(ORACLE_REPLICATES), &mut checks)?,
            Suite::Rates => rates(&mut checks)?,
            Suite::Domination => {
                domination(seed, replicates.unwrap_or(DOMINATION_REPLICATES), &mut checks)?
            }
            Suite::All => unreachable!(),
        }
    }
    Ok(checks)
}

fn equivalences(seed: u64, out: &mut Vec<Check>) -> Result<()> {
    let r = equivalence_suite(1000, 2.0, 200, seed)?;
    for ((a, b), d) in EQUIVALENT_PAIRS.iter().zip(r.disagreements) {
        out.push(Check {
            suite: Suite::Equivalences.name(),
            name: format!("{a}={b}"),
            passed: d == 0,
            value: d as f64,
            threshold: 0.0,
            detail: format!("{d} disagreements over {} datasets", r.datasets),
        });
    }
    Ok(())
}

fn oracles(seed: u64, replicates: u64, out: &mut Vec<Check>) -> Result<()> {
    let cases = [
        (MethodId::GlassMt, 0.05, exact_glass_failure(0.05, 20)?),
        (MethodId::Rstar, 0.3, exact_rstar_failure(0.3, 20)?),
    ];
    for (method, t, exact) in cases {
        let cfg = ExperimentConfig {
            species: SpeciesTree::from_branch_length(t)?,
            loci: 20,
            replicates,
            methods: vec![method],
            master_seed: seed,
        };
        let r = run_experiment(&cfg)?.remove(0);
        let (lo, hi) = r.wilson(Z99);
        out.push(Check {
            suite: Suite::Oracles.name(),
            name: format!("{method}_t{t}_L20"),
            passed: lo <= exact && exact <= hi,
            value: r.p_hat,
            threshold: exact,
            detail: format!("exact {exact:.6} vs 99% interval [{lo:.6}, {hi:.6}] from {replicates} replicates"),
        });
    }
    Ok(())
}

fn rates(out: &mut Vec<Check>) -> Result<()> {
    let suite = Suite::Rates.name();
    let (mut fixed, mut steac_stat, mut rstar_stat) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..30 {
        let t = 10f64.powf(-3.0 + 5.0 * k as f64 / 29.0);
        let s = alpha_steac(t)?.s_star;
        fixed = fixed.max((steac_fixed_point_map(t, s) - s).abs());
        steac_stat = steac_stat.max(steac_log_derivative(t, s).abs());
        let mgf = rstar_mgf(t);
        let s = alpha_rstar(t)?.s_star;
        rstar_stat = rstar_stat.max((mgf.log_derivative(s) - mgf.threshold).abs());
    }
    let grid = "30-point log grid on [1e-3, 1e2]";
    out.push(Check {
        suite,
        name: "steac_fixed_point".into(),
        passed: fixed < 1e-10,
        value: fixed,
        threshold: 1e-10,
        detail: format!("max |F_t(s*) - s*| on {grid}"),
    });
    out.push(Check {
        suite,
        name: "steac_stationarity".into(),
        passed: steac_stat < 1e-9,
        value: steac_stat,
        threshold: 1e-9,
        detail: format!("max |phi'/phi| at s* on {grid}"),
    });
    out.push(Check {
        suite,
        name: "rstar_stationarity".into(),
        passed: rstar_stat < 1e-9,
        value: rstar_stat,
        threshold: 1e-9,
        detail: format!("max |phi'/phi - 1| at s* on {grid}"),
    });

    let mut engine = 0.0f64;
    for t in [0.1, 0.5, 1.0] {
        engine = engine
            .max((chernoff_rate(&rstar_mgf(t))?.rate - alpha_rstar(t)?.rate).abs())
            .max((chernoff_rate(&steac_mgf(t))?.rate - alpha_steac(t)?.rate).abs());
    }
    out.push(Check {
        suite,
        name: "chernoff_engine".into(),
        passed: engine < 1e-9,
        value: engine,
        threshold: 1e-9,
        detail: "max |generic - closed form| at t = 0.1, 0.5, 1".into(),
    });

    let sigma = solve_sigma_star();
    let g = sigma_star_equation(sigma).abs();
    out.push(Check {
        suite,
        name: "sigma_star".into(),
        passed: g < 1e-12 && (sigma - std::f64::consts::LN_2 - 0.1656).abs() <= 5e-4,
        value: sigma,
        threshold: 1e-12,
        detail: format!("|G(sigma*)| = {g:.1e}, sigma* - ln 2 = {:.6}", sigma - std::f64::consts::LN_2),
    });

    for (name, ratio, centre) in [
        ("rstar_small_t", alpha_rstar(0.01)?.rate / 1e-4, 0.75),
        ("steac_small_t", alpha_steac(0.01)?.rate / 1e-4, 0.375),
    ] {
        out.push(Check {
            suite,
            name: name.into(),
            passed: (ratio / centre - 1.0).abs() <= 0.05,
            value: ratio,
            threshold: centre,
            detail: format!("rate(0.01)/t^2 within 5% of {centre}"),
        });
    }
    Ok(())
}

fn domination(seed: u64, replicates: u64, out: &mut Vec<Check>) -> Result<()> {
    let suite = Suite::Domination.name();
    let r = domination_test(0.2, 30, replicates, seed)?;
    for (name, d) in [("glass_vs_rstar", r.glass_vs_rstar), ("glass_vs_steac", r.glass_vs_steac)] {
        out.push(Check {
            suite,
            name: name.into(),
            passed: d.non_negative_within(3.0),
            value: d.mean,
            threshold: -3.0 * d.std_error,
            detail: format!("paired success difference at t = 0.2, L = 30 (se {:.2e})", d.std_error),
        });
    }
    out.push(Check {
        suite,
        name: "successful_locus_implies_glass".into(),
        passed: r.sub_event_violations == 0,
        value: r.sub_event_violations as f64,
        threshold: 0.0,
        detail: format!("violations among {} replicates with a successful locus", r.with_successful_locus),
    });
    Ok(())
}

pub fn write_report<W: Write>(mut w: W, checks: &[Check]) -> std::io::Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for c in checks {
        writeln!(
            w,
            "{},{},{},{},{},\"{}\"",
            c.suite,
            c.name,
            c.passed,
            fmt_real(c.value),
            fmt_real(c.threshold),
            c.detail.replace('"', "\"\"")
        )?;
    }
    Ok(())
}
