//! Replicated simulation experiments and exact failure-probability oracles.
//!
//! Every replicate draws its own dataset and tie-breaking stream from a
//! counter-based generator keyed by `(master_seed, replicate index)`, so
//! results do not depend on how replicates are scheduled across threads.
//! All requested methods see the same dataset and start from the same
//! tie-breaker state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coalescent::{GeneTree, SpeciesTree};
use crate::error::{Error, Result};
use crate::estimators::{estimate, glass_mt, rstar, steac, MethodId, TieBreaker};

/// Identity of the per-replicate seeding scheme, recorded in run manifests.
pub const SEED_SCHEME: &str =
    "ChaCha8Rng::seed_from_u64(master_seed); data stream 2i, tie-break stream 2i+1";

/// Largest locus count accepted by [`exact_rstar_failure`].
pub const MAX_EXACT_LOCI: usize = 30;

pub const Z95: f64 = 1.959_963_984_540_054;
pub const Z99: f64 = 2.575_829_303_548_901;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub species: SpeciesTree,
    pub loci: usize,
    pub replicates: u64,
    pub methods: Vec<MethodId>,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.loci == 0 {
            return Err(Error::InvalidConfig("at least one locus per replicate is required".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("at least one replicate is required".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods requested".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McResult {
    pub method: MethodId,
    pub loci: usize,
    pub failures: u64,
    pub replicates: u64,
    pub p_hat: f64,
    /// Wilson 95% interval.
    pub ci_low: f64,
    pub ci_high: f64,
    /// `-ln(p_hat) / L`; `None` when no failure was observed.
    pub empirical_rate: Option<f64>,
}

impl McResult {
    pub fn new(method: MethodId, loci: usize, failures: u64, replicates: u64) -> Self {
        let p_hat = failures as f64 / replicates as f64;
        let (ci_low, ci_high) = wilson_interval(failures, replicates, Z95);
        McResult {
            method,
            loci,
            failures,
            replicates,
            p_hat,
            ci_low,
            ci_high,
            empirical_rate: empirical_rate(p_hat, loci),
        }
    }

    pub fn wilson(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.failures, self.replicates, z)
    }
}

fn empirical_rate(p_hat: f64, loci: usize) -> Option<f64> {
    (p_hat > 0.0).then(|| -p_hat.ln() / loci as f64)
}

/// Wilson score interval for `successes` out of `n`, clamped to `[0, 1]`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    let low = if successes == 0 { 0.0 } else { (centre - half).clamp(0.0, p) };
    let high = if successes == n { 1.0 } else { (centre + half).clamp(p, 1.0) };
    (low, high)
}

/// Data and tie-break generators of one replicate.
pub fn replicate_streams(master_seed: u64, replicate: u64) -> (ChaCha8Rng, TieBreaker) {
    let mut data = ChaCha8Rng::seed_from_u64(master_seed);
    let mut ties = data.clone();
    data.set_stream(2 * replicate);
    ties.set_stream(2 * replicate + 1);
    (data, TieBreaker::from_rng(ties))
}

fn sample_into(species: &SpeciesTree, loci: usize, rng: &mut ChaCha8Rng, out: &mut Vec<GeneTree>) {
    out.clear();
    out.extend((0..loci).map(|_| species.sample_gene_tree(rng)));
}

/// Failure counts per method, in the order of `cfg.methods`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<McResult>> {
    cfg.validate()?;
    let target = cfg.species.topology();
    let m = cfg.methods.len();
    let failures = (0..cfg.replicates)
        .into_par_iter()
        .fold(
            || (vec![0u64; m], Vec::with_capacity(cfg.loci)),
            |(mut counts, mut data), i| {
                let (mut rng, ties) = replicate_streams(cfg.master_seed, i);
                sample_into(&cfg.species, cfg.loci, &mut rng, &mut data);
                for (k, &method) in cfg.methods.iter().enumerate() {
                    let e = estimate(method, &data, &mut ties.clone())
                        .expect("datasets are non-empty");
                    if e.topology != target {
                        counts[k] += 1;
                    }
                }
                (counts, data)
            },
        )
        .map(|(counts, _)| counts)
        .reduce(
            || vec![0u64; m],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(cfg
        .methods
        .iter()
        .zip(failures)
        .map(|(&method, f)| McResult::new(method, cfg.loci, f, cfg.replicates))
        .collect())
}

fn check_oracle_args(t: f64, loci: usize) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidBranchLength(t));
    }
    if loci == 0 {
        return Err(Error::InvalidConfig("at least one locus is required".into()));
    }
    Ok(())
}

/// ML / GLASS / MT fail only when no locus coalesces in the internal branch,
/// and then with probability 2/3: `(2/3) exp(-t L)`.
pub fn exact_glass_failure(t: f64, loci: usize) -> Result<f64> {
    check_oracle_args(t, loci)?;
    Ok(2.0 / 3.0 * (-t * loci as f64).exp())
}

/// Exact R* failure probability by enumerating topology counts
/// `(n_AB, n_AC, n_BC)` with per-locus probabilities `(p + W, W, W)`.
///
/// A tie for the plurality is broken uniformly, so a two-way tie that includes
/// AB|C fails with probability 1/2 and a three-way tie with probability 2/3.
pub fn exact_rstar_failure(t: f64, loci: usize) -> Result<f64> {
    check_oracle_args(t, loci)?;
    if loci > MAX_EXACT_LOCI {
        return Err(Error::TooManyLoci { loci, max: MAX_EXACT_LOCI });
    }
    let w = (-t).exp() / 3.0;
    let q = [1.0 - 2.0 * w, w, w];
    let mut factorial = vec![1.0f64; loci + 1];
    for k in 1..=loci {
        factorial[k] = factorial[k - 1] * k as f64;
    }
    let mut total = 0.0;
    for ab in 0..=loci {
        for ac in 0..=loci - ab {
            let bc = loci - ab - ac;
            let weight = match ab.cmp(&ac.max(bc)) {
                std::cmp::Ordering::Less => 1.0,
                std::cmp::Ordering::Equal if ac == bc => 2.0 / 3.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Greater => 0.0,
            };
            if weight == 0.0 {
                continue;
            }
            let coef = factorial[loci] / (factorial[ab] * factorial[ac] * factorial[bc]);
            let prob =
                coef * q[0].powi(ab as i32) * q[1].powi(ac as i32) * q[2].powi(bc as i32);
            total += weight * prob;
        }
    }
    Ok(total)
}

/// Paired difference in success indicators between two methods.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedDifference {
    pub mean: f64,
    pub std_error: f64,
}

impl PairedDifference {
    fn from_counts(plus: u64, minus: u64, n: u64) -> Self {
        let n_f = n as f64;
        let mean = (plus as f64 - minus as f64) / n_f;
        let second = (plus + minus) as f64 / n_f;
        let var = (second - mean * mean).max(0.0);
        PairedDifference { mean, std_error: (var / n_f).sqrt() }
    }

    /// True unless the difference is negative by more than `k` standard errors.
    pub fn non_negative_within(&self, k: f64) -> bool {
        self.mean >= -k * self.std_error
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DominationReport {
    pub t: f64,
    pub loci: usize,
    pub replicates: u64,
    pub success_glass: f64,
    pub success_rstar: f64,
    pub success_steac: f64,
    /// GLASS minus R*.
    pub glass_vs_rstar: PairedDifference,
    /// GLASS minus STEAC.
    pub glass_vs_steac: PairedDifference,
    /// Replicates in which at least one locus coalesced in the internal branch.
    pub with_successful_locus: u64,
    /// Of those, replicates where GLASS was wrong. Always zero in exact
    /// arithmetic.
    pub sub_event_violations: u64,
}

impl DominationReport {
    pub fn passed(&self) -> bool {
        self.glass_vs_rstar.non_negative_within(3.0)
            && self.glass_vs_steac.non_negative_within(3.0)
            && self.sub_event_violations == 0
    }
}

#[derive(Clone, Copy, Default)]
struct DominationCounts {
    glass: u64,
    rstar: u64,
    steac: u64,
    rstar_plus: u64,
    rstar_minus: u64,
    steac_plus: u64,
    steac_minus: u64,
    with_success: u64,
    violations: u64,
}

impl DominationCounts {
    fn merge(mut self, o: Self) -> Self {
        self.glass += o.glass;
        self.rstar += o.rstar;
        self.steac += o.steac;
        self.rstar_plus += o.rstar_plus;
        self.rstar_minus += o.rstar_minus;
        self.steac_plus += o.steac_plus;
        self.steac_minus += o.steac_minus;
        self.with_success += o.with_success;
        self.violations += o.violations;
        self
    }
}

/// Paired comparison of GLASS against R* and STEAC on common datasets.
pub fn domination_test(t: f64, loci: usize, replicates: u64, seed: u64) -> Result<DominationReport> {
    let species = SpeciesTree::from_branch_length(t)?;
    ExperimentConfig {
        species,
        loci,
        replicates,
        methods: vec![MethodId::GlassMt],
        master_seed: seed,
    }
    .validate()?;
    let target = species.topology();
    let counts = (0..replicates)
        .into_par_iter()
        .fold(
            || (DominationCounts::default(), Vec::with_capacity(loci)),
            |(mut c, mut data), i| {
                let (mut rng, ties) = replicate_streams(seed, i);
                sample_into(&species, loci, &mut rng, &mut data);
                let g = glass_mt(&data, &mut ties.clone()).expect("non-empty").topology == target;
                let r = rstar(&data, &mut ties.clone()).expect("non-empty").topology == target;
                let s = steac(&data, &mut ties.clone()).expect("non-empty").topology == target;
                c.glass += g as u64;
                c.rstar += r as u64;
                c.steac += s as u64;
                c.rstar_plus += (g && !r) as u64;
                c.rstar_minus += (!g && r) as u64;
                c.steac_plus += (g && !s) as u64;
                c.steac_minus += (!g && s) as u64;
                if data.iter().any(|locus| !locus.failed()) {
                    c.with_success += 1;
                    c.violations += (!g) as u64;
                }
                (c, data)
            },
        )
        .map(|(c, _)| c)
        .reduce(DominationCounts::default, DominationCounts::merge);
    let n = replicates as f64;
    Ok(DominationReport {
        t,
        loci,
        replicates,
        success_glass: counts.glass as f64 / n,
        success_rstar: counts.rstar as f64 / n,
        success_steac: counts.steac as f64 / n,
        glass_vs_rstar: PairedDifference::from_counts(counts.rstar_plus, counts.rstar_minus, replicates),
        glass_vs_steac: PairedDifference::from_counts(counts.steac_plus, counts.steac_minus, replicates),
        with_successful_locus: counts.with_success,
        sub_event_violations: counts.violations,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrendPoint {
    pub loci: usize,
    pub failures: u64,
    pub replicates: u64,
    pub p_hat: f64,
    /// `None` flags a cell without failures; nothing is extrapolated.
    pub empirical_rate: Option<f64>,
}

/// Empirical decay rate `-ln(p_hat) / L` for each locus count. Each `L` uses
/// its own seed derived from `seed`.
pub fn empirical_rate_trend(
    method: MethodId,
    t: f64,
    loci: &[usize],
    replicates: u64,
    seed: u64,
) -> Result<Vec<TrendPoint>> {
    let species = SpeciesTree::from_branch_length(t)?;
    loci.iter()
        .map(|&l| {
            let cfg = ExperimentConfig {
                species,
                loci: l,
                replicates,
                methods: vec![method],
                master_seed: seed ^ (l as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            };
            let r = run_experiment(&cfg)?.remove(0);
            Ok(TrendPoint {
                loci: l,
                failures: r.failures,
                replicates: r.replicates,
                p_hat: r.p_hat,
                empirical_rate: r.empirical_rate,
            })
        })
        .collect()
}

/// Method pairs that must return the same topology on every dataset when
/// given the same tie-break stream.
pub const EQUIVALENT_PAIRS: [(MethodId, MethodId); 4] = [
    (MethodId::Star, MethodId::Rstar),
    (MethodId::Mdc, MethodId::Rstar),
    (MethodId::Ml, MethodId::GlassMt),
    (MethodId::Sc, MethodId::Steac),
];

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub datasets: u64,
    /// Disagreement count per entry of [`EQUIVALENT_PAIRS`].
    pub disagreements: [u64; 4],
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.disagreements.iter().all(|&d| d == 0)
    }
}

/// Runs every pair of [`EQUIVALENT_PAIRS`] on `datasets` random datasets with
/// branch length uniform on `(0, t_max]` and locus count uniform on
/// `1..=max_loci`.
pub fn equivalence_suite(
    datasets: u64,
    t_max: f64,
    max_loci: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidBranchLength(t_max));
    }
    if max_loci == 0 {
        return Err(Error::InvalidConfig("at least one locus is required".into()));
    }
    let disagreements = (0..datasets)
        .into_par_iter()
        .map(|i| -> Result<[u64; 4]> {
            let (mut rng, ties) = replicate_streams(seed, i);
            let t = t_max * (1.0 - rng.random::<f64>());
            let loci = rng.random_range(1..=max_loci);
            let species = SpeciesTree::from_branch_length(t)?;
            let data = species.sample_gene_trees(loci, &mut rng);
            let mut out = [0u64; 4];
            for (k, &(a, b)) in EQUIVALENT_PAIRS.iter().enumerate() {
                let x = estimate(a, &data, &mut ties.clone())?;
                let y = estimate(b, &data, &mut ties.clone())?;
                if x.topology != y.topology {
                    out[k] += 1;
                }
            }
            Ok(out)
        })
        .try_reduce(
            || [0u64; 4],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(EquivalenceReport { datasets, disagreements })
}
