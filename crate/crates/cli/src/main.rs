//! `coalrates`: decay-rate figures, simulation experiments and validation
//! suites for three-taxon species-tree estimation.

mod svg;
mod validate;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use coalrates::estimators::{MethodGroup, MethodId};
use coalrates::montecarlo::{run_experiment, ExperimentConfig, SEED_SCHEME};
use coalrates::rates::{asymptote, rate_point, RatePoint, Regime};
use coalrates::records::{write_experiment_report, write_rate_curve};
use coalrates::SpeciesTree;
use serde::Serialize;
use serde_json::json;

use svg::{Chart, Scale, Series};
use validate::Suite;

const THREADS_ENV: &str = "COALRATES_THREADS";

#[derive(Parser, Debug)]
#[command(name = "coalrates", version, about = "Decay rates of species-tree estimators on three taxa")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate and plot the decay rates on a grid of branch lengths.
    Rates {
        #[arg(long = "t-min", default_value_t = 0.0)]
        t_min: f64,
        #[arg(long = "t-max", default_value_t = 1.0)]
        t_max: f64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Output path stem; writes STEM.csv, STEM.svg and STEM.manifest.json.
        #[arg(long, default_value = "rates")]
        out: PathBuf,
        /// Overlay the small-t and/or large-t asymptotes as dotted lines.
        #[arg(long = "with-asymptotes")]
        with_asymptotes: bool,
    },
    /// Reproduce one of the three decay-rate figures.
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        number: u8,
        #[arg(long = "t-min")]
        t_min: Option<f64>,
        #[arg(long = "t-max")]
        t_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Output path stem [default: figureN].
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "with-asymptotes")]
        with_asymptotes: bool,
    },
    /// Monte Carlo failure probabilities of the selected methods.
    Simulate {
        /// Internal branch length of the species tree.
        #[arg(long)]
        t: f64,
        /// Number of loci.
        #[arg(long = "L")]
        loci: usize,
        #[arg(long, default_value_t = 10_000)]
        replicates: u64,
        /// Comma-separated method names.
        #[arg(long, value_delimiter = ',', default_values = ["ml", "glass_mt", "rstar", "star", "mdc", "steac", "sc"])]
        methods: Vec<MethodId>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output path stem; writes STEM.csv and STEM.manifest.json.
        #[arg(long, default_value = "experiment")]
        out: PathBuf,
    },
    /// Run a validation suite; exits with status 1 if any check fails.
    Validate {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Replicates for the Monte Carlo suites.
        #[arg(long)]
        replicates: Option<u64>,
        /// Write the CSV report to STEM.csv and a manifest next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct RunManifest {
    command_line: Vec<String>,
    version: &'static str,
    seed: Option<u64>,
    seed_scheme: Option<&'static str>,
    parameters: serde_json::Value,
    outputs: Vec<String>,
    timestamp: String,
}

/// Errors that should be reported as usage errors (exit status 2).
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| dispatch(cli.command)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let is_usage = e.downcast_ref::<UsageError>().is_some()
                || matches!(
                    e.downcast_ref::<coalrates::Error>(),
                    Some(
                        coalrates::Error::InvalidConfig(_)
                            | coalrates::Error::InvalidBranchLength(_)
                            | coalrates::Error::InvalidSpeciesTree(_)
                    )
                );
            ExitCode::from(if is_usage { 2 } else { 1 })
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Rates { t_min, t_max, steps, out, with_asymptotes } => {
            let spec = FigureSpec {
                title: "Decay rates".into(),
                t_min,
                t_max,
                steps,
                regimes: if with_asymptotes { regimes_for(t_min, t_max) } else { vec![] },
                log_axes: false,
            };
            cmd_rates(&spec, &out, json!({ "subcommand": "rates" }))?;
        }
        Command::Figure { number, t_min, t_max, steps, out, with_asymptotes } => {
            let (lo, hi, regimes, log_axes) = match number {
                1 => (0.0, 1.0, vec![], false),
                2 => (0.0, 0.1, vec![Regime::Small], true),
                _ => (1.0, 100.0, vec![Regime::Large], false),
            };
            let (t_min, t_max) = (t_min.unwrap_or(lo), t_max.unwrap_or(hi));
            let regimes = if regimes.is_empty() && with_asymptotes {
                regimes_for(t_min, t_max)
            } else {
                regimes
            };
            let spec = FigureSpec {
                title: format!("Figure {number}: decay rates"),
                t_min,
                t_max,
                steps: steps.unwrap_or(200),
                regimes,
                log_axes,
            };
            let out = out.unwrap_or_else(|| PathBuf::from(format!("figure{number}")));
            cmd_rates(&spec, &out, json!({ "subcommand": "figure", "figure": number }))?;
        }
        Command::Simulate { t, loci, replicates, methods, seed, out } => {
            cmd_simulate(t, loci, replicates, methods, seed, &out)?;
        }
        Command::Validate { suite, seed, replicates, out } => {
            return cmd_validate(suite, seed, replicates, out.as_deref());
        }
    }
    Ok(true)
}

struct FigureSpec {
    title: String,
    t_min: f64,
    t_max: f64,
    steps: usize,
    regimes: Vec<Regime>,
    log_axes: bool,
}

fn regimes_for(t_min: f64, t_max: f64) -> Vec<Regime> {
    if t_max <= 1.0 {
        vec![Regime::Small]
    } else if t_min >= 1.0 {
        vec![Regime::Large]
    } else {
        vec![Regime::Small, Regime::Large]
    }
}

/// `steps` uniform points on `(0, t_max]` when `t_min = 0`, otherwise on
/// `[t_min, t_max]`.
fn grid(t_min: f64, t_max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t_min >= 0.0 && t_min < t_max && t_max.is_finite()) {
        return Err(usage(format!("grid needs 0 <= t-min < t-max, got [{t_min}, {t_max}]")));
    }
    if steps < 2 {
        return Err(usage(format!("--steps must be at least 2, got {steps}")));
    }
    let ts = if t_min == 0.0 {
        (1..=steps).map(|k| t_max * k as f64 / steps as f64).collect()
    } else {
        let h = (t_max - t_min) / (steps - 1) as f64;
        (0..steps).map(|k| if k + 1 == steps { t_max } else { t_min + h * k as f64 }).collect()
    };
    Ok(ts)
}

fn with_extension(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    write(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().with_context(|| format!("writing {}", path.display()))
}

fn write_manifest(
    stem: &Path,
    seed: Option<u64>,
    parameters: serde_json::Value,
    outputs: &[&Path],
) -> Result<PathBuf> {
    let manifest = RunManifest {
        command_line: std::env::args().collect(),
        version: env!("CARGO_PKG_VERSION"),
        seed,
        seed_scheme: seed.map(|_| SEED_SCHEME),
        parameters,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    let path = with_extension(stem, "manifest.json");
    write_file(&path, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        writeln!(w)?;
        Ok(())
    })?;
    Ok(path)
}

const GLASS_COLOR: &str = "#1b9e77";
const RSTAR_COLOR: &str = "#d95f02";
const STEAC_COLOR: &str = "#7570b3";

fn chart(spec: &FigureSpec, curve: &[RatePoint]) -> Chart {
    let line = |label: &str, color, f: fn(&RatePoint) -> f64| Series {
        label: label.into(),
        color,
        dotted: false,
        points: curve.iter().map(|p| (p.t, f(p))).collect(),
    };
    let mut series = vec![
        line("GLASS / ML / MT", GLASS_COLOR, |p| p.alpha_glass),
        line("R* / STAR / MDC", RSTAR_COLOR, |p| p.alpha_rstar),
        line("STEAC / SC", STEAC_COLOR, |p| p.alpha_steac),
    ];
    for &regime in &spec.regimes {
        let which = match regime {
            Regime::Small => "small t",
            Regime::Large => "large t",
        };
        for (group, name, color) in
            [(MethodGroup::Rstar, "R*", RSTAR_COLOR), (MethodGroup::Steac, "STEAC", STEAC_COLOR)]
        {
            series.push(Series {
                label: format!("{name}, {which}"),
                color,
                dotted: true,
                points: curve.iter().map(|p| (p.t, asymptote(group, p.t, regime))).collect(),
            });
        }
    }
    let scale = if spec.log_axes { Scale::Log } else { Scale::Linear };
    Chart {
        title: spec.title.clone(),
        x_label: "internal branch length t (coalescent units)".into(),
        y_label: "decay rate".into(),
        x_scale: scale,
        y_scale: scale,
        series,
    }
}

fn cmd_rates(spec: &FigureSpec, out: &Path, mut parameters: serde_json::Value) -> Result<()> {
    let ts = grid(spec.t_min, spec.t_max, spec.steps)?;
    let curve = ts.iter().map(|&t| rate_point(t)).collect::<coalrates::Result<Vec<_>>>()?;
    let csv = with_extension(out, "csv");
    let svg = with_extension(out, "svg");
    write_file(&csv, |w| Ok(write_rate_curve(w, &curve)?))?;
    let rendered = chart(spec, &curve).render();
    write_file(&svg, |w| Ok(w.write_all(rendered.as_bytes())?))?;
    parameters["t_min"] = json!(spec.t_min);
    parameters["t_max"] = json!(spec.t_max);
    parameters["steps"] = json!(spec.steps);
    parameters["asymptotes"] = json!(spec
        .regimes
        .iter()
        .map(|r| if *r == Regime::Small { "small" } else { "large" })
        .collect::<Vec<_>>());
    parameters["log_axes"] = json!(spec.log_axes);
    let manifest = write_manifest(out, None, parameters, &[&csv, &svg])?;
    println!("wrote {}, {}, {}", csv.display(), svg.display(), manifest.display());
    Ok(())
}

fn cmd_simulate(
    t: f64,
    loci: usize,
    replicates: u64,
    methods: Vec<MethodId>,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let species = SpeciesTree::from_branch_length(t)?;
    let cfg = ExperimentConfig { species, loci, replicates, methods, master_seed: seed };
    let results = run_experiment(&cfg)?;
    let csv = with_extension(out, "csv");
    write_file(&csv, |w| Ok(write_experiment_report(w, t, seed, &results)?))?;
    let parameters = json!({
        "subcommand": "simulate",
        "t": t,
        "L": loci,
        "replicates": replicates,
        "methods": cfg.methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
    });
    let manifest = write_manifest(out, Some(seed), parameters, &[&csv])?;
    println!("{:<10} {:>10} {:>12} {:>25}", "method", "failures", "p_hat", "95% interval");
    for r in &results {
        println!(
            "{:<10} {:>10} {:>12.6} {:>25}",
            r.method.name(),
            r.failures,
            r.p_hat,
            format!("[{:.6}, {:.6}]", r.ci_low, r.ci_high)
        );
    }
    println!("wrote {}, {}", csv.display(), manifest.display());
    Ok(())
}

fn cmd_validate(suite: Suite, seed: u64, replicates: Option<u64>, out: Option<&Path>) -> Result<bool> {
    if replicates == Some(0) {
        return Err(usage("--replicates must be positive"));
    }
    let checks = validate::run(suite, seed, replicates)?;
    for c in &checks {
        println!(
            "{} {}/{}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.suite,
            c.name,
            c.detail
        );
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", checks.len());
    if let Some(out) = out {
        let csv = with_extension(out, "csv");
        write_file(&csv, |w| Ok(validate::write_report(w, &checks)?))?;
        let parameters = json!({
            "subcommand": "validate",
            "suite": format!("{suite:?}").to_lowercase(),
            "replicates": replicates,
        });
        write_manifest(out, Some(seed), parameters, &[&csv])?;
    }
    Ok(failed == 0)
}
