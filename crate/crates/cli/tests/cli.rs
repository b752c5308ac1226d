use std::path::Path;
use std::process::{Command, Output};

fn coalrates(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coalrates"))
        .args(args)
        .current_dir(dir)
        .env_remove("COALRATES_THREADS")
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

fn check_svg(svg: &str) {
    let doc = roxmltree::Document::parse(svg).expect("well-formed SVG");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    assert!(!svg.contains("href"), "no external references");
    assert!(!svg.contains("<style") || !svg.contains("@import"));
    assert!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count() >= 3);
}

#[test]
fn figure_one_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = coalrates(dir.path(), &["figure", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "figure1.csv");
    assert!(csv.starts_with(
        "t,alpha_glass,alpha_rstar,alpha_steac,s_star_rstar,s_star_steac,\
         asym_rstar_small,asym_rstar_large,asym_steac_small,asym_steac_large\n"
    ));
    assert!(!csv.contains('\r'));
    let rows = rows(&csv);
    assert_eq!(rows.len(), 200);
    assert!(rows[0][0] > 0.0);
    assert_eq!(rows[199][0], 1.0);
    for r in &rows {
        assert!(r[1] > r[2] && r[1] > r[3], "GLASS on top at t = {}", r[0]);
    }
    check_svg(&read(dir.path(), "figure1.svg"));
    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "figure1.manifest.json")).unwrap();
    assert_eq!(manifest["parameters"]["steps"], 200);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert!(manifest["command_line"].as_array().unwrap().len() >= 3);
    assert!(manifest["timestamp"].as_str().is_some());
}

#[test]
fn figure_two_has_dotted_asymptotes() {
    let dir = tempfile::tempdir().unwrap();
    assert!(coalrates(dir.path(), &["figure", "2", "--out", "f2"]).status.success());
    let svg = read(dir.path(), "f2.svg");
    check_svg(&svg);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let dotted = doc
        .descendants()
        .filter(|n| n.has_tag_name("polyline") && n.attribute("stroke-dasharray").is_some())
        .count();
    assert_eq!(dotted, 2);
    let rows = rows(&read(dir.path(), "f2.csv"));
    assert!((rows.last().unwrap()[0] - 0.1).abs() < 1e-15);
}

#[test]
fn figure_three_steac_ends_above_rstar() {
    let dir = tempfile::tempdir().unwrap();
    assert!(coalrates(dir.path(), &["figure", "3", "--steps", "50"]).status.success());
    let rows = rows(&read(dir.path(), "figure3.csv"));
    assert_eq!((rows[0][0], rows[49][0]), (1.0, 100.0));
    let last = rows.last().unwrap();
    assert!(last[3] > last[2]);
    check_svg(&read(dir.path(), "figure3.svg"));
}

#[test]
fn outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["rates", "--t-min", "0.5", "--t-max", "3", "--steps", "40", "--with-asymptotes"];
    assert!(coalrates(a.path(), &args).status.success());
    assert!(coalrates(b.path(), &args).status.success());
    assert_eq!(read(a.path(), "rates.csv"), read(b.path(), "rates.csv"));
    assert_eq!(read(a.path(), "rates.svg"), read(b.path(), "rates.svg"));

    let sim = ["simulate", "--t", "0.2", "--L", "15", "--replicates", "3000", "--seed", "9"];
    assert!(coalrates(a.path(), &sim).status.success());
    let threaded = Command::new(env!("CARGO_BIN_EXE_coalrates"))
        .args(sim)
        .current_dir(b.path())
        .env("COALRATES_THREADS", "3")
        .output()
        .unwrap();
    assert!(threaded.status.success());
    assert_eq!(read(a.path(), "experiment.csv"), read(b.path(), "experiment.csv"));
}

#[test]
fn simulate_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = coalrates(
        dir.path(),
        &["simulate", "--t", "0", "--L", "5", "--methods", "glass", "--replicates", "5000", "--out", "sim/zero"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "sim/zero.csv");
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,t,L,replicates,failures,p_hat,ci_low,ci_high,empirical_rate,analytic_rate,seed"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "glass_mt");
    let p: f64 = row[5].parse().unwrap();
    assert!((p - 2.0 / 3.0).abs() < 0.03, "{p}");
    let manifest: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "sim/zero.manifest.json")).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["parameters"]["methods"][0], "glass_mt");
}

#[test]
fn validate_suites() {
    let dir = tempfile::tempdir().unwrap();
    let out = coalrates(dir.path(), &["validate", "--suite", "rates", "--out", "report"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let report = read(dir.path(), "report.csv");
    assert!(report.starts_with("suite,check,passed,value,threshold,detail\n"));
    assert!(report.lines().skip(1).all(|l| l.contains(",true,")));
    let out = coalrates(dir.path(), &["validate", "--suite", "equivalences", "--seed", "1"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 failed"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 6] = [
        &["simulate", "--t", "0.1", "--L", "5", "--methods", "nj"],
        &["validate", "--suite", "everything"],
        &["figure", "4"],
        &["simulate", "--t", "-1", "--L", "5"],
        &["rates", "--t-min", "2", "--t-max", "1"],
        &["simulate", "--t", "0.1", "--L", "0"],
    ];
    for args in cases {
        let out = coalrates(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = coalrates(dir.path(), &["simulate", "--t", "0.1", "--L", "5", "--methods", "nj"]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("glass_mt") && err.contains("steac"), "{err}");

    let out = Command::new(env!("CARGO_BIN_EXE_coalrates"))
        .args(["rates", "--steps", "5"])
        .current_dir(dir.path())
        .env("COALRATES_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn io_errors_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let out = coalrates(dir.path(), &["rates", "--steps", "5", "--out", "blocker/x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("blocker"));
}
