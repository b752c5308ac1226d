//! Three-taxon multispecies coalescent, the multilocus species-tree methods
//! that are consistent on it, and the exponential decay rates of their
//! failure probabilities.
//!
//! - [`coalescent`]: species and gene trees, sampling, likelihood
//! - [`estimators`]: ML, GLASS/MT, R*, STAR, MDC, STEAC, SC
//! - [`rates`]: analytic decay rates, asymptotics and a generic Chernoff solver
//! - [`montecarlo`]: replicated experiments and exact oracles
//! - [`records`]: CSV formats

// `!(a < b)` comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coalescent;
pub mod error;
pub mod estimators;
pub mod montecarlo;
pub mod rates;
pub mod records;
pub mod solve;

pub use coalescent::{GeneTree, Pair, SpeciesTree, Taxon, TaxonPermutation, Topology};
pub use error::{Error, Result};
pub use estimators::{Estimate, MethodGroup, MethodId, TieBreaker};
pub use montecarlo::{ExperimentConfig, McResult};
pub use rates::{RatePoint, RateSolution};
