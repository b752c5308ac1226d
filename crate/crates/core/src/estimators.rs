//! Multilocus species-tree estimators on three taxa.
//!
//! Each method is implemented on its own terms (minima, likelihood, counts,
//! rank averages, deep-coalescence costs, average coalescence times) so that
//! the equivalences between them can be checked rather than assumed.
//!
//! Ties are resolved uniformly at random by a [`TieBreaker`]. A tie set is
//! always listed in [`Topology::ALL`] order and resolving it consumes exactly
//! one draw, so two methods that see the same tie set and start from the same
//! tie-breaker state pick the same topology.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coalescent::{log_likelihood, GeneTree, Pair, SpeciesTree, Topology};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodId {
    Ml,
    GlassMt,
    Rstar,
    Star,
    Mdc,
    Steac,
    Sc,
}

/// Methods that coincide on three taxa.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MethodGroup {
    /// ML / GLASS / MT
    Glass,
    /// R* / STAR / MDC
    Rstar,
    /// STEAC / SC
    Steac,
}

impl MethodId {
    pub const ALL: [MethodId; 7] = [
        MethodId::Ml,
        MethodId::GlassMt,
        MethodId::Rstar,
        MethodId::Star,
        MethodId::Mdc,
        MethodId::Steac,
        MethodId::Sc,
    ];

    pub fn group(self) -> MethodGroup {
        match self {
            MethodId::Ml | MethodId::GlassMt => MethodGroup::Glass,
            MethodId::Rstar | MethodId::Star | MethodId::Mdc => MethodGroup::Rstar,
            MethodId::Steac | MethodId::Sc => MethodGroup::Steac,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MethodId::Ml => "ml",
            MethodId::GlassMt => "glass_mt",
            MethodId::Rstar => "rstar",
            MethodId::Star => "star",
            MethodId::Mdc => "mdc",
            MethodId::Steac => "steac",
            MethodId::Sc => "sc",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ml" => Ok(MethodId::Ml),
            "glass_mt" | "glass" | "mt" => Ok(MethodId::GlassMt),
            "rstar" | "r*" => Ok(MethodId::Rstar),
            "star" => Ok(MethodId::Star),
            "mdc" => Ok(MethodId::Mdc),
            "steac" => Ok(MethodId::Steac),
            "sc" => Ok(MethodId::Sc),
            other => {
                let valid: Vec<&str> = MethodId::ALL.iter().map(|m| m.name()).collect();
                Err(Error::InvalidConfig(format!(
                    "unknown method `{other}`; valid methods: {}",
                    valid.join(", ")
                )))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub method: MethodId,
    pub topology: Topology,
    /// `(tau_cherry, tau_root)` for the methods that estimate divergence times.
    pub divergence_times: Option<(f64, f64)>,
    /// Set when the decision rule had to break a tie.
    pub tie: bool,
}

/// Uniform tie resolution from a dedicated random stream.
#[derive(Clone, Debug)]
pub struct TieBreaker {
    rng: ChaCha8Rng,
}

impl TieBreaker {
    pub fn new(seed: u64) -> Self {
        TieBreaker { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn from_rng(rng: ChaCha8Rng) -> Self {
        TieBreaker { rng }
    }

    /// Picks uniformly among `candidates`. A single candidate consumes no
    /// randomness.
    pub fn resolve(&mut self, candidates: &[Topology]) -> Topology {
        match candidates.len() {
            0 => panic!("empty tie set"),
            1 => candidates[0],
            n => candidates[self.rng.random_range(0..n)],
        }
    }

    /// Raw draw, exposed for callers that derive sub-streams.
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Min,
    Max,
}

/// Scores are indexed by `Topology::index`. Equality is exact.
fn select(scores: [f64; 3], direction: Direction, tie: &mut TieBreaker) -> (Topology, bool) {
    let best = match direction {
        Direction::Min => scores.iter().copied().fold(f64::INFINITY, f64::min),
        Direction::Max => scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    let mut candidates = [Topology::AbC; 3];
    let mut n = 0;
    for topology in Topology::ALL {
        if scores[topology.index()] == best {
            candidates[n] = topology;
            n += 1;
        }
    }
    assert!(n > 0, "scores must not be NaN: {scores:?}");
    (tie.resolve(&candidates[..n]), n > 1)
}

fn non_empty(gene_trees: &[GeneTree]) -> Result<()> {
    if gene_trees.is_empty() {
        Err(Error::EmptyDataset)
    } else {
        Ok(())
    }
}

fn topology_counts(gene_trees: &[GeneTree]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    for g in gene_trees {
        counts[g.topology().index()] += 1;
    }
    counts
}

/// Minimum pairwise coalescence time across loci, indexed by `Pair::index`.
pub fn min_pairwise_times(gene_trees: &[GeneTree]) -> [f64; 3] {
    let mut d = [f64::INFINITY; 3];
    for g in gene_trees {
        for pair in Pair::ALL {
            d[pair.index()] = d[pair.index()].min(g.pairwise_time(pair));
        }
    }
    d
}

/// GLASS / Maximum Tree: the pair with the smallest minimum coalescence time
/// forms the cherry.
pub fn glass_mt(gene_trees: &[GeneTree], tie: &mut TieBreaker) -> Result<Estimate> {
    non_empty(gene_trees)?;
    let d = min_pairwise_times(gene_trees);
    let scores = Topology::ALL.map(|t| d[t.cherry().index()]);
    let (topology, tied) = select(scores, Direction::Min, tie);
    let cherry = topology.cherry();
    let tau_cherry = d[cherry.index()];
    let tau_root = Pair::ALL
        .iter()
        .filter(|&&p| p != cherry)
        .map(|&p| d[p.index()])
        .fold(f64::INFINITY, f64::min);
    Ok(Estimate {
        method: MethodId::GlassMt,
        topology,
        divergence_times: Some((tau_cherry, tau_root)),
        tie: tied,
    })
}

/// Largest divergence times for `topology` that every locus is consistent
/// with.
pub fn maximum_tree_times(gene_trees: &[GeneTree], topology: Topology) -> (f64, f64) {
    let d = min_pairwise_times(gene_trees);
    let cherry = topology.cherry();
    let tau_root = Pair::ALL
        .iter()
        .filter(|&&p| p != cherry)
        .map(|&p| d[p.index()])
        .fold(f64::INFINITY, f64::min);
    (d[cherry.index()].min(tau_root), tau_root)
}

/// Optional brute-force refinement for [`ml`]: each candidate topology is also
/// scored on a `steps x steps` grid of divergence times at or below its
/// maximum-tree times, spanning `span` times those values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MlGrid {
    pub steps: usize,
    pub span: f64,
}

impl Default for MlGrid {
    fn default() -> Self {
        MlGrid { steps: 8, span: 0.5 }
    }
}

/// Maximum likelihood over the three topologies, each at its maximum-tree
/// divergence times.
pub fn ml(gene_trees: &[GeneTree], grid: Option<MlGrid>, tie: &mut TieBreaker) -> Result<Estimate> {
    non_empty(gene_trees)?;
    let mut scores = [f64::NEG_INFINITY; 3];
    let mut times = [(0.0, 0.0); 3];
    for topology in Topology::ALL {
        let (tc, tr) = maximum_tree_times(gene_trees, topology);
        let species = SpeciesTree::with_topology(topology, tc, tr)?;
        let mut best = (log_likelihood(gene_trees, &species), (tc, tr));
        if let Some(grid) = grid {
            for i in 0..=grid.steps {
                for j in 0..=grid.steps {
                    let root = tr * (1.0 - grid.span * j as f64 / grid.steps as f64);
                    let cherry = (tc * (1.0 - grid.span * i as f64 / grid.steps as f64)).min(root);
                    let candidate = SpeciesTree::with_topology(topology, cherry, root)?;
                    let ll = log_likelihood(gene_trees, &candidate);
                    if ll > best.0 {
                        best = (ll, (cherry, root));
                    }
                }
            }
        }
        scores[topology.index()] = best.0;
        times[topology.index()] = best.1;
    }
    let (topology, tied) = select(scores, Direction::Max, tie);
    Ok(Estimate {
        method: MethodId::Ml,
        topology,
        divergence_times: Some(times[topology.index()]),
        tie: tied,
    })
}

/// R* consensus: the most frequent gene-tree topology.
pub fn rstar(gene_trees: &[GeneTree], tie: &mut TieBreaker) -> Result<Estimate> {
    non_empty(gene_trees)?;
    let counts = topology_counts(gene_trees);
    let (topology, tied) = select(counts.map(|c| c as f64), Direction::Max, tie);
    Ok(Estimate { method: MethodId::Rstar, topology, divergence_times: None, tie: tied })
}

/// STAR: average rank distance, where a pair whose MRCA has rank `r` (1 for
/// the shallower node, 2 for the root) is at distance `2r`.
pub fn star(gene_trees: &[GeneTree], tie: &mut TieBreaker) -> Result<Estimate> {
    non_empty(gene_trees)?;
    let mut sums = [0.0f64; 3];
    for g in gene_trees {
        for pair in Pair::ALL {
            let rank = if pair == g.topology().cherry() { 1.0 } else { 2.0 };
            sums[pair.index()] += 2.0 * rank;
        }
    }
    let n = gene_trees.len() as f64;
    let scores = Topology::ALL.map(|t| sums[t.cherry().index()] / n);
    let (topology, tied) = select(scores, Direction::Min, tie);
    Ok(Estimate { method: MethodId::Star, topology, divergence_times: None, tie: tied })
}

/// Minimize deep coalescences. On three taxa, a locus whose topology differs
/// from the candidate species topology carries exactly one extra lineage
/// through the internal branch.
pub fn mdc(gene_trees: &[GeneTree], tie: &mut TieBreaker) -> Result<Estimate> {
    non_empty(gene_trees)?;
    let mut cost = [0usize; 3];
    for candidate in Topology::ALL {
        cost[candidate.index()] =
            gene_trees.iter().filter(|g| g.topology() != candidate).count();
    }
    let (topology, tied) = select(cost.map(|c| c as f64), Direction::Min, tie);
    Ok(Estimate { method: MethodId::Mdc, topology, divergence_times: None, tie: tied })
}

/// Average pairwise coalescence time across loci, indexed by `Pair::index`.
/// Accumulated in locus order.
pub fn average_pairwise_times(gene_trees: &[GeneTree]) -> [f64; 3] {
    let mut sums = [0.0f64; 3];
    for g in gene_trees {
        for pair in Pair::ALL {
            sums[pair.index()] += g.pairwise_time(pair);
        }
    }
    let n = gene_trees.len() as f64;
    sums.map(|s| s / n)
}

fn average_time_method(
    gene_trees: &[GeneTree],
    tie: &mut TieBreaker,
    method: MethodId,
) -> Result<Estimate> {
    non_empty(gene_trees)?;
    let avg = average_pairwise_times(gene_trees);
    let scores = Topology::ALL.map(|t| avg[t.cherry().index()]);
    let (topology, tied) = select(scores, Direction::Min, tie);
    Ok(Estimate { method, topology, divergence_times: None, tie: tied })
}

/// STEAC: the pair with the smallest average coalescence time.
pub fn steac(gene_trees: &[GeneTree], tie: &mut TieBreaker) -> Result<Estimate> {
    average_time_method(gene_trees, tie, MethodId::Steac)
}

/// Shallowest coalescences. With one allele per population it reduces to
/// STEAC.
pub fn sc(gene_trees: &[GeneTree], tie: &mut TieBreaker) -> Result<Estimate> {
    average_time_method(gene_trees, tie, MethodId::Sc)
}

pub fn estimate(method: MethodId, gene_trees: &[GeneTree], tie: &mut TieBreaker) -> Result<Estimate> {
    match method {
        MethodId::Ml => ml(gene_trees, None, tie),
        MethodId::GlassMt => glass_mt(gene_trees, tie),
        MethodId::Rstar => rstar(gene_trees, tie),
        MethodId::Star => star(gene_trees, tie),
        MethodId::Mdc => mdc(gene_trees, tie),
        MethodId::Steac => steac(gene_trees, tie),
        MethodId::Sc => sc(gene_trees, tie),
    }
}
