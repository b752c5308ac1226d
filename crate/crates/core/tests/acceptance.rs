//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! nonzero status if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use coalrates::estimators::MethodId;
use coalrates::montecarlo::{
    domination_test, empirical_rate_trend, equivalence_suite, exact_glass_failure,
    exact_rstar_failure, run_experiment, ExperimentConfig, Z99,
};
use coalrates::rates::{
    alpha_glass, alpha_rstar, alpha_steac, chernoff_rate, locate_crossover, rate_curve,
    rstar_mgf, solve_sigma_star, steac_fixed_point_map, steac_log_derivative, steac_mgf,
};
use coalrates::SpeciesTree;

const SEED: u64 = 20_240_611;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

type Check = fn() -> Outcome;

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(move |k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64))
}

fn c01_glass_exact() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let t = 100.0 * k as f64 / 999.0;
        worst = worst.max((alpha_glass(t).unwrap() - t).abs());
    }
    outcome(worst == 0.0, format!("max |alpha_glass(t) - t| = {worst:e} on 1000 points"))
}

fn c02_rstar_small() -> Outcome {
    let ratio = alpha_rstar(0.01).unwrap().rate / 1e-4;
    outcome(
        (0.75 * 0.95..=0.75 * 1.05).contains(&ratio),
        format!("alpha_rstar(0.01)/t^2 = {ratio:.6}, want [0.7125, 0.7875]"),
    )
}

fn c03_rstar_large() -> Outcome {
    let gap = alpha_rstar(20.0).unwrap().rate - (10.0 - 0.5 * (4.0f64 / 3.0).ln());
    outcome(gap.abs() < 1e-6, format!("alpha_rstar(20) - (10 - ln(4/3)/2) = {gap:.6e}, want |.| < 1e-6"))
}

fn c04_steac_small() -> Outcome {
    let ratio = alpha_steac(0.01).unwrap().rate / 1e-4;
    outcome(
        (0.375 * 0.95..=0.375 * 1.05).contains(&ratio),
        format!("alpha_steac(0.01)/t^2 = {ratio:.6}, want [0.35625, 0.39375]"),
    )
}

fn c05_steac_large() -> Outcome {
    let gap = alpha_steac(50.0).unwrap().rate - (50.0 - 50f64.ln());
    let beta = solve_sigma_star() - std::f64::consts::LN_2;
    let gap_ok = (gap + 0.1656).abs() <= 0.005;
    let beta_ok = (beta - 0.1656).abs() <= 0.0005;
    outcome(
        gap_ok && beta_ok,
        format!(
            "alpha_steac(50) - (50 - ln 50) = {gap:.5} (want -0.1656 +- 0.005: {}); \
             sigma* - ln 2 = {beta:.6} (want 0.1656 +- 0.0005: {})",
            verdict(gap_ok),
            verdict(beta_ok)
        ),
    )
}

fn c06_solver_residuals() -> Outcome {
    let (mut fixed, mut steac_stat, mut rstar_stat) = (0.0f64, 0.0f64, 0.0f64);
    for t in log_grid(1e-3, 1e2, 30) {
        let s = alpha_steac(t).unwrap().s_star;
        fixed = fixed.max((steac_fixed_point_map(t, s) - s).abs());
        steac_stat = steac_stat.max(steac_log_derivative(t, s).abs());
        let mgf = rstar_mgf(t);
        let s = alpha_rstar(t).unwrap().s_star;
        rstar_stat = rstar_stat.max((mgf.log_derivative(s) - mgf.threshold).abs());
    }
    outcome(
        fixed < 1e-10 && steac_stat < 1e-9 && rstar_stat < 1e-9,
        format!(
            "max |F_t(s*) - s*| = {fixed:.2e}; max |phi'/phi - y|: STEAC {steac_stat:.2e}, R* {rstar_stat:.2e}"
        ),
    )
}

fn c07_chernoff_engine() -> Outcome {
    let mut worst = 0.0f64;
    for t in [0.1, 0.5, 1.0] {
        let r = chernoff_rate(&rstar_mgf(t)).unwrap().rate - alpha_rstar(t).unwrap().rate;
        let s = chernoff_rate(&steac_mgf(t)).unwrap().rate - alpha_steac(t).unwrap().rate;
        worst = worst.max(r.abs()).max(s.abs());
    }
    outcome(worst < 1e-9, format!("max |chernoff - closed form| = {worst:.2e}"))
}

fn c08_discussion_numbers() -> Outcome {
    let rstar = (-500.0 * alpha_rstar(0.1).unwrap().rate).exp();
    let steac = (-500.0 * alpha_steac(0.1).unwrap().rate).exp();
    let glass_exact = exact_glass_failure(0.1, 500).unwrap();
    let glass_rate = (-500.0 * alpha_glass(0.1).unwrap()).exp();
    let ok = (rstar - 0.038).abs() <= 0.002
        && (0.14..=0.17).contains(&steac)
        && (1.2e-22..=1.4e-22).contains(&glass_exact)
        && (glass_rate / 1.9e-22 - 1.0).abs() < 0.05;
    outcome(
        ok,
        format!(
            "R* {rstar:.4}, STEAC {steac:.4}, GLASS exact {glass_exact:.3e}, GLASS rate-only {glass_rate:.3e}"
        ),
    )
}

fn oracle_check(method: MethodId, t: f64, exact: f64) -> (bool, String) {
    let cfg = ExperimentConfig {
        species: SpeciesTree::from_branch_length(t).unwrap(),
        loci: 20,
        replicates: 1_000_000,
        methods: vec![method],
        master_seed: SEED,
    };
    let r = run_experiment(&cfg).unwrap().remove(0);
    let (lo, hi) = r.wilson(Z99);
    let ok = lo <= exact && exact <= hi;
    (ok, format!("{method} t={t}: p_hat {:.6} 99% [{lo:.6}, {hi:.6}] exact {exact:.6}", r.p_hat))
}

fn c09_oracles() -> Outcome {
    let (a, da) = oracle_check(MethodId::GlassMt, 0.05, exact_glass_failure(0.05, 20).unwrap());
    let (b, db) = oracle_check(MethodId::Rstar, 0.3, exact_rstar_failure(0.3, 20).unwrap());
    outcome(a && b, format!("{da}; {db}"))
}

fn c10_equivalences() -> Outcome {
    let r = equivalence_suite(1000, 2.0, 200, SEED).unwrap();
    outcome(
        r.passed(),
        format!(
            "{} datasets; disagreements star/rstar {}, mdc/rstar {}, ml/glass_mt {}, sc/steac {}",
            r.datasets, r.disagreements[0], r.disagreements[1], r.disagreements[2], r.disagreements[3]
        ),
    )
}

fn c11_domination() -> Outcome {
    let r = domination_test(0.2, 30, 100_000, SEED).unwrap();
    outcome(
        r.passed(),
        format!(
            "success GLASS {:.4}, R* {:.4}, STEAC {:.4}; GLASS-R* {:.4} (se {:.1e}), GLASS-STEAC {:.4} (se {:.1e}); \
             sub-event violations {} of {}",
            r.success_glass,
            r.success_rstar,
            r.success_steac,
            r.glass_vs_rstar.mean,
            r.glass_vs_rstar.std_error,
            r.glass_vs_steac.mean,
            r.glass_vs_steac.std_error,
            r.sub_event_violations,
            r.with_successful_locus
        ),
    )
}

fn c12_ordering_and_crossover() -> Outcome {
    let mut crossings = Vec::new();
    let mut ordered = true;
    let mut sides = true;
    for steps in [2001, 3001] {
        let curve = rate_curve(0.0, 10.0, steps).unwrap();
        ordered &= curve
            .iter()
            .filter(|p| p.t > 0.0)
            .all(|p| p.alpha_glass > p.alpha_rstar && p.alpha_glass > p.alpha_steac);
        let tx = locate_crossover(&curve).unwrap();
        sides &= curve.iter().filter(|p| p.t > 0.0).all(|p| {
            if p.t < tx {
                p.alpha_rstar > p.alpha_steac
            } else if p.t > tx {
                p.alpha_steac > p.alpha_rstar
            } else {
                true
            }
        });
        crossings.push(tx);
    }
    let spread = (crossings[0] - crossings[1]).abs();
    outcome(
        ordered && sides && spread < 1e-6,
        format!(
            "GLASS dominates: {}; sign change at t_x = {:.12} (two grids differ by {spread:.1e}); sides consistent: {}",
            ordered, crossings[1], sides
        ),
    )
}

fn c13_rate_trend() -> Outcome {
    let loci = [10, 20, 40];
    let mut ok = true;
    let mut parts = Vec::new();
    for (method, analytic) in [
        (MethodId::Rstar, alpha_rstar(0.3).unwrap().rate),
        (MethodId::Steac, alpha_steac(0.3).unwrap().rate),
    ] {
        let trend = empirical_rate_trend(method, 0.3, &loci, 1_000_000, SEED).unwrap();
        let rates: Vec<f64> = trend.iter().map(|p| p.empirical_rate.unwrap_or(f64::NAN)).collect();
        let gaps: Vec<f64> = rates.iter().map(|r| (r - analytic).abs()).collect();
        let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
        let rel = gaps[2] / analytic;
        let close = rel <= 0.25;
        ok &= monotone && close;
        parts.push(format!(
            "{method}: analytic {analytic:.5}, empirical {:.5}/{:.5}/{:.5} at L=10/20/40, \
             monotone {monotone}, rel. gap at L=40 {:.1}% (want <= 25%)",
            rates[0],
            rates[1],
            rates[2],
            100.0 * rel
        ));
    }
    outcome(ok, parts.join("; "))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, Check); 13] = [
        ("glass rate is exact", Duration::from_secs(1), c01_glass_exact),
        ("R* small-t form", Duration::from_secs(1), c02_rstar_small),
        ("R* large-t form", Duration::from_secs(1), c03_rstar_large),
        ("STEAC small-t form", Duration::from_secs(1), c04_steac_small),
        ("STEAC large-t constant", Duration::from_secs(1), c05_steac_large),
        ("solver residuals", Duration::from_secs(1), c06_solver_residuals),
        ("Chernoff engine equivalence", Duration::from_secs(1), c07_chernoff_engine),
        ("t=0.1, L=500 failure probabilities", Duration::from_secs(1), c08_discussion_numbers),
        ("Monte Carlo vs exact oracles", Duration::from_secs(120), c09_oracles),
        ("method equivalences", Duration::from_secs(60), c10_equivalences),
        ("GLASS domination", Duration::from_secs(60), c11_domination),
        ("curve ordering and crossover", Duration::from_secs(1), c12_ordering_and_crossover),
        ("empirical rate trend", Duration::from_secs(300), c13_rate_trend),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let passed = o.passed && in_time;
        if !passed {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {} [{:.3}s, limit {}s{}]",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", too slow" }
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
