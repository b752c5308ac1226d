//! The three-taxon multispecies coalescent.
//!
//! All times are absolute, measured backwards from the present in coalescent
//! units (population size normalized to one). A species tree has a cherry
//! divergence at `tau_cherry` and a root divergence at `tau_root`; every locus
//! carries one lineage per extant population.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Taxon {
    A,
    B,
    C,
}

impl Taxon {
    pub const ALL: [Taxon; 3] = [Taxon::A, Taxon::B, Taxon::C];

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Taxon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Taxon::A => "A",
            Taxon::B => "B",
            Taxon::C => "C",
        };
        f.write_str(s)
    }
}

/// An unordered pair of distinct taxa.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pair {
    AB,
    AC,
    BC,
}

impl Pair {
    pub const ALL: [Pair; 3] = [Pair::AB, Pair::AC, Pair::BC];

    /// Returns `None` when both taxa are the same.
    pub fn new(x: Taxon, y: Taxon) -> Option<Pair> {
        match (x.min(y), x.max(y)) {
            (Taxon::A, Taxon::B) => Some(Pair::AB),
            (Taxon::A, Taxon::C) => Some(Pair::AC),
            (Taxon::B, Taxon::C) => Some(Pair::BC),
            _ => None,
        }
    }

    pub fn taxa(self) -> (Taxon, Taxon) {
        match self {
            Pair::AB => (Taxon::A, Taxon::B),
            Pair::AC => (Taxon::A, Taxon::C),
            Pair::BC => (Taxon::B, Taxon::C),
        }
    }

    /// The taxon not in the pair.
    pub fn complement(self) -> Taxon {
        match self {
            Pair::AB => Taxon::C,
            Pair::AC => Taxon::B,
            Pair::BC => Taxon::A,
        }
    }

    pub fn contains(self, taxon: Taxon) -> bool {
        self.complement() != taxon
    }

    pub fn relabel(self, perm: &TaxonPermutation) -> Pair {
        let (x, y) = self.taxa();
        Pair::new(perm.apply(x), perm.apply(y)).expect("permutation is a bijection")
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A rooted triple, named by its cherry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Topology {
    AbC,
    AcB,
    BcA,
}

impl Topology {
    /// Canonical order, used for serialization and for tie sets.
    pub const ALL: [Topology; 3] = [Topology::AbC, Topology::AcB, Topology::BcA];

    pub fn cherry(self) -> Pair {
        match self {
            Topology::AbC => Pair::AB,
            Topology::AcB => Pair::AC,
            Topology::BcA => Pair::BC,
        }
    }

    pub fn from_cherry(pair: Pair) -> Topology {
        match pair {
            Pair::AB => Topology::AbC,
            Pair::AC => Topology::AcB,
            Pair::BC => Topology::BcA,
        }
    }

    pub fn outgroup(self) -> Taxon {
        self.cherry().complement()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn relabel(self, perm: &TaxonPermutation) -> Topology {
        Topology::from_cherry(self.cherry().relabel(perm))
    }

    /// Token used in CSV files: `AB_C`, `AC_B`, `BC_A`.
    pub fn token(self) -> &'static str {
        match self {
            Topology::AbC => "AB_C",
            Topology::AcB => "AC_B",
            Topology::BcA => "BC_A",
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Topology::AbC => "AB|C",
            Topology::AcB => "AC|B",
            Topology::BcA => "BC|A",
        };
        f.write_str(s)
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "AB_C" | "AB|C" => Ok(Topology::AbC),
            "AC_B" | "AC|B" => Ok(Topology::AcB),
            "BC_A" | "BC|A" => Ok(Topology::BcA),
            other => Err(Error::InvalidGeneTree(format!("unknown topology `{other}`"))),
        }
    }
}

/// A relabeling of the three taxa.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TaxonPermutation([Taxon; 3]);

impl TaxonPermutation {
    /// `images[i]` is the image of `Taxon::ALL[i]`.
    pub fn new(images: [Taxon; 3]) -> Option<Self> {
        let mut seen = [false; 3];
        for t in images {
            seen[t.index()] = true;
        }
        seen.iter().all(|&s| s).then_some(TaxonPermutation(images))
    }

    pub fn identity() -> Self {
        TaxonPermutation(Taxon::ALL)
    }

    /// All six permutations.
    pub fn all() -> Vec<TaxonPermutation> {
        use Taxon::*;
        [
            [A, B, C],
            [A, C, B],
            [B, A, C],
            [B, C, A],
            [C, A, B],
            [C, B, A],
        ]
        .into_iter()
        .map(TaxonPermutation)
        .collect()
    }

    pub fn apply(&self, taxon: Taxon) -> Taxon {
        self.0[taxon.index()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeciesTree {
    topology: Topology,
    tau_cherry: f64,
    tau_root: f64,
}

impl SpeciesTree {
    /// Species tree with topology AB|C.
    pub fn new(tau_ab: f64, tau_abc: f64) -> Result<Self> {
        Self::with_topology(Topology::AbC, tau_ab, tau_abc)
    }

    pub fn with_topology(topology: Topology, tau_cherry: f64, tau_root: f64) -> Result<Self> {
        if !(tau_cherry.is_finite() && tau_root.is_finite()) {
            return Err(Error::InvalidSpeciesTree("divergence times must be finite".into()));
        }
        if tau_cherry < 0.0 {
            return Err(Error::InvalidSpeciesTree(format!(
                "cherry divergence time {tau_cherry} is negative"
            )));
        }
        if tau_root < tau_cherry {
            return Err(Error::InvalidSpeciesTree(format!(
                "root divergence time {tau_root} precedes cherry divergence time {tau_cherry}"
            )));
        }
        Ok(SpeciesTree { topology, tau_cherry, tau_root })
    }

    /// AB|C species tree with the cherry divergence at time zero.
    pub fn from_branch_length(t: f64) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidBranchLength(t));
        }
        Self::new(0.0, t)
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn tau_cherry(&self) -> f64 {
        self.tau_cherry
    }

    pub fn tau_root(&self) -> f64 {
        self.tau_root
    }

    /// Internal branch length `t`.
    pub fn branch_length(&self) -> f64 {
        self.tau_root - self.tau_cherry
    }

    /// Probability that the cherry lineages coalesce inside the internal branch,
    /// `1 - exp(-t)`.
    pub fn coalescence_probability(&self) -> f64 {
        -(-self.branch_length()).exp_m1()
    }

    /// Draws one locus.
    pub fn sample_gene_tree<R: Rng + ?Sized>(&self, rng: &mut R) -> GeneTree {
        let p = self.coalescence_probability();
        let u: f64 = rng.random();
        if u < p {
            // Exponential conditioned below t, by inverse CDF.
            let v: f64 = rng.random();
            let x = -(-v * p).ln_1p();
            let t1 = (self.tau_cherry + x).min(self.tau_root.next_down());
            let e0: f64 = rng.sample(Exp1);
            GeneTree {
                topology: self.topology,
                t1,
                t2: self.tau_root + e0,
                failed: false,
            }
        } else {
            let topology = Topology::ALL[rng.random_range(0..3)];
            let e1_min: f64 = rng.sample::<f64, _>(Exp1) / 3.0;
            let e1: f64 = rng.sample(Exp1);
            let t1 = self.tau_root + e1_min;
            GeneTree { topology, t1, t2: t1 + e1, failed: true }
        }
    }

    pub fn sample_gene_trees<R: Rng + ?Sized>(&self, loci: usize, rng: &mut R) -> Vec<GeneTree> {
        (0..loci).map(|_| self.sample_gene_tree(rng)).collect()
    }
}

/// One sampled locus: a rooted triple with its two coalescence times.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneTree {
    topology: Topology,
    t1: f64,
    t2: f64,
    failed: bool,
}

impl GeneTree {
    pub fn new(topology: Topology, t1: f64, t2: f64, failed: bool) -> Result<Self> {
        if !(t1.is_finite() && t2.is_finite()) {
            return Err(Error::InvalidGeneTree("coalescence times must be finite".into()));
        }
        if t1 < 0.0 || t2 < t1 {
            return Err(Error::InvalidGeneTree(format!(
                "coalescence times must satisfy 0 <= t1 <= t2, got t1 = {t1}, t2 = {t2}"
            )));
        }
        Ok(GeneTree { topology, t1, t2, failed })
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    /// Time of the more recent coalescence.
    pub fn t1(&self) -> f64 {
        self.t1
    }

    /// Time of the root coalescence.
    pub fn t2(&self) -> f64 {
        self.t2
    }

    /// True iff the cherry lineages of the generating species tree did not
    /// coalesce in the internal branch.
    pub fn failed(&self) -> bool {
        self.failed
    }

    /// Time to the most recent common ancestor of the pair.
    pub fn pairwise_time(&self, pair: Pair) -> f64 {
        if pair == self.topology.cherry() {
            self.t1
        } else {
            self.t2
        }
    }

    pub fn relabel(&self, perm: &TaxonPermutation) -> GeneTree {
        GeneTree { topology: self.topology.relabel(perm), ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Population {
    Leaf(Taxon),
    /// Ancestor of the species cherry.
    Cherry,
    Root,
}

/// Lineage bookkeeping of one locus inside one population.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationRecord {
    pub population: Population,
    /// Divergence time at which the population begins (backwards in time).
    pub start: f64,
    /// Divergence time of the parent population; `None` for the root.
    pub end: Option<f64>,
    pub entering: usize,
    pub exiting: usize,
    /// Coalescence times inside the population, ascending.
    pub coalescences: Vec<f64>,
}

impl PopulationRecord {
    /// `-sum binom(k, 2) * duration` over the intervals with `k` lineages.
    pub fn exponent(&self) -> f64 {
        let mut k = self.entering;
        let mut prev = self.start;
        let mut acc = 0.0;
        for &c in &self.coalescences {
            acc -= pairs(k) * (c - prev);
            prev = c;
            k -= 1;
        }
        if let Some(end) = self.end {
            acc -= pairs(k) * (end - prev);
        }
        acc
    }
}

fn pairs(k: usize) -> f64 {
    (k * k.saturating_sub(1) / 2) as f64
}

/// Per-population bookkeeping of one locus, in the order A, B, C, cherry, root.
#[derive(Clone, Debug, PartialEq)]
pub struct LineageSchedule {
    pub populations: Vec<PopulationRecord>,
}

impl LineageSchedule {
    pub fn exponent(&self) -> f64 {
        self.populations.iter().map(PopulationRecord::exponent).sum()
    }

    pub fn get(&self, population: Population) -> Option<&PopulationRecord> {
        self.populations.iter().find(|r| r.population == population)
    }
}

/// Assigns each coalescence of `g` to the population of `species` whose time
/// interval contains it.
pub fn build_schedule(g: &GeneTree, species: &SpeciesTree) -> Result<LineageSchedule> {
    let (tc, tr) = (species.tau_cherry, species.tau_root);
    let cherry = species.topology.cherry();
    if g.t1 < tc {
        return Err(Error::Inconsistent(format!(
            "first coalescence at {} precedes the cherry divergence at {tc}",
            g.t1
        )));
    }
    let coalesced_in_cherry = g.t1 < tr;
    if coalesced_in_cherry {
        if g.topology != species.topology {
            return Err(Error::Inconsistent(format!(
                "gene tree {} coalesces below the root divergence but the species cherry is {}",
                g.topology, species.topology
            )));
        }
        if g.t2 < tr {
            return Err(Error::Inconsistent(format!(
                "root coalescence at {} precedes the root divergence at {tr}",
                g.t2
            )));
        }
    }

    let mut populations = Vec::with_capacity(5);
    for taxon in Taxon::ALL {
        let end = if cherry.contains(taxon) { tc } else { tr };
        populations.push(PopulationRecord {
            population: Population::Leaf(taxon),
            start: 0.0,
            end: Some(end),
            entering: 1,
            exiting: 1,
            coalescences: Vec::new(),
        });
    }
    if coalesced_in_cherry {
        populations.push(PopulationRecord {
            population: Population::Cherry,
            start: tc,
            end: Some(tr),
            entering: 2,
            exiting: 1,
            coalescences: vec![g.t1],
        });
        populations.push(PopulationRecord {
            population: Population::Root,
            start: tr,
            end: None,
            entering: 2,
            exiting: 1,
            coalescences: vec![g.t2],
        });
    } else {
        populations.push(PopulationRecord {
            population: Population::Cherry,
            start: tc,
            end: Some(tr),
            entering: 2,
            exiting: 2,
            coalescences: Vec::new(),
        });
        populations.push(PopulationRecord {
            population: Population::Root,
            start: tr,
            end: None,
            entering: 3,
            exiting: 1,
            coalescences: vec![g.t1, g.t2],
        });
    }
    Ok(LineageSchedule { populations })
}

/// Log-likelihood of the loci under `species`, up to the constant coalescence
/// rate terms. Returns negative infinity when any locus is inconsistent with
/// the species tree.
pub fn log_likelihood(gene_trees: &[GeneTree], species: &SpeciesTree) -> f64 {
    let mut total = 0.0;
    for g in gene_trees {
        match build_schedule(g, species) {
            Ok(schedule) => total += schedule.exponent(),
            Err(_) => return f64::NEG_INFINITY,
        }
    }
    total
}
