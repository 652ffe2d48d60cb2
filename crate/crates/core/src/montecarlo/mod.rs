//! Simulation models, error-rate estimation and stochastic property checks.
//!
//! Every replication draws from its own ChaCha stream keyed by the model
//! seed and the replication index, so results do not depend on how the
//! replications are scheduled across threads.

mod estimate;
pub mod instances;
pub mod lemmas;
pub mod reference;

pub use estimate::{estimate_fdr, LayerEstimate, SimReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::combine::normal_sf;
use crate::error::{Error, Result};
use crate::model::PValues;

/// Smallest replication count accepted by the estimators and checkers.
pub const MIN_REPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimDependence {
    Independent,
    /// Gaussian scores with common pairwise correlation `ρ ∈ [0, 1)`.
    GaussianEquicorrelated(f64),
    /// Consecutive blocks of this size share one underlying score.
    DuplicateBlocks(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimModel {
    pub n: usize,
    /// `nulls[i]` is true for true null hypotheses.
    pub nulls: Vec<bool>,
    pub dependence: SimDependence,
    /// Mean shift of the non-null scores.
    pub mu: f64,
    pub seed: u64,
}

impl SimModel {
    pub fn new(nulls: Vec<bool>, dependence: SimDependence, mu: f64, seed: u64) -> Self {
        Self {
            n: nulls.len(),
            nulls,
            dependence,
            mu,
            seed,
        }
    }

    pub fn all_null(n: usize, dependence: SimDependence, seed: u64) -> Self {
        Self::new(vec![true; n], dependence, 0.0, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.nulls.len() != self.n {
            return Err(Error::Config(format!(
                "model has n = {} but {} null flags",
                self.n,
                self.nulls.len()
            )));
        }
        match self.dependence {
            SimDependence::GaussianEquicorrelated(rho) if !(0.0..1.0).contains(&rho) => {
                Err(Error::Config(format!("correlation {rho} outside [0, 1)")))
            }
            SimDependence::DuplicateBlocks(0) => Err(Error::Config("block size must be positive".into())),
            _ if !self.mu.is_finite() => Err(Error::Config(format!("mean shift {} is not finite", self.mu))),
            _ => Ok(()),
        }
    }

    fn shift(&self, i: usize) -> f64 {
        if self.nulls[i] {
            0.0
        } else {
            self.mu
        }
    }
}

/// RNG for replication `rep` of a run seeded with `seed`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Draws one p-value vector for replication `rep`.
pub fn gen_pvalues(model: &SimModel, rep: u64) -> Result<PValues> {
    model.validate()?;
    let mut rng = replication_rng(model.seed, rep);
    PValues::new(draw(model, &mut rng))
}

/// Draws one p-value vector from `rng`. The model must be valid.
pub(crate) fn draw<R: Rng>(model: &SimModel, rng: &mut R) -> Vec<f64> {
    let n = model.n;
    match model.dependence {
        SimDependence::Independent => (0..n)
            .map(|i| {
                if model.nulls[i] {
                    rng.random::<f64>()
                } else {
                    let z: f64 = rng.sample(StandardNormal);
                    normal_sf(z + model.mu)
                }
            })
            .collect(),
        SimDependence::GaussianEquicorrelated(rho) => {
            let shared: f64 = rng.sample(StandardNormal);
            let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
            (0..n)
                .map(|i| {
                    let e: f64 = rng.sample(StandardNormal);
                    normal_sf(a * shared + b * e + model.shift(i))
                })
                .collect()
        }
        SimDependence::DuplicateBlocks(size) => {
            let mut out = Vec::with_capacity(n);
            let mut z = 0.0;
            for i in 0..n {
                if i % size == 0 {
                    z = rng.sample(StandardNormal);
                }
                out.push(normal_sf(z + model.shift(i)));
            }
            out
        }
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub reps: usize,
}

impl Estimate {
    /// Mean and `sample std / √reps` of `values`, summed pairwise.
    pub fn from_values(values: &[f64]) -> Self {
        let reps = values.len();
        if reps == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                reps,
            };
        }
        let mean = pairwise_sum(values) / reps as f64;
        let se = if reps > 1 {
            let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
            (pairwise_sum(&dev) / (reps - 1) as f64).sqrt() / (reps as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, reps }
    }

    pub fn upper(&self, sigmas: f64) -> f64 {
        self.mean + sigmas * self.se
    }

    pub fn lower(&self, sigmas: f64) -> f64 {
        self.mean - sigmas * self.se
    }
}

/// Pairwise (cascade) summation; the result only depends on the order of
/// `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

pub(crate) fn check_reps(reps: usize) -> Result<()> {
    if reps < MIN_REPS {
        Err(Error::InvalidArgument(format!(
            "at least {MIN_REPS} replications are required, got {reps}"
        )))
    } else {
        Ok(())
    }
}
