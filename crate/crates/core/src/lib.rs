//! Simultaneous false discovery rate control over several, possibly
//! overlapping and incomplete, partitions of a set of hypotheses.
//!
//! The main entry point is [`engine::pfilter`], which takes a [`Problem`]
//! (base p-values plus one [`Layer`] per partition) and returns the
//! elementary and group rejections at the maximum feasible vector of
//! weighted discovery counts.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adapt;
pub mod cli;
pub mod combine;
pub mod engine;
pub mod error;
pub mod extensions;
pub mod model;
pub mod montecarlo;
pub mod reshape;

pub use combine::CombinerSpec;
pub use engine::{pfilter, EngineOptions, Selector};
pub use error::{Error, Result, Violation};
pub use model::{
    dotfrac, DependenceLabel, Dotfraction, IcMode, KVector, Layer, PValues, Problem,
    RejectionResult,
};
pub use reshape::ReshapeSpec;
