//! Domain types shared by every stage of the procedure.
//!
//! Indices are 0-based throughout: hypotheses live in `0..n` and groups of a
//! layer in `0..G`.

mod dotfrac;

pub use dotfrac::{dotfrac, Dotfraction};

use serde::{Deserialize, Serialize};

use crate::combine::CombinerSpec;
use crate::error::{Error, Result, Violation};
use crate::reshape::ReshapeSpec;

/// Relative tolerance for the `Σ u·w = G` normalization.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Base p-values, one per elementary hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PValues(Vec<f64>);

impl PValues {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("at least one p-value is required".into()));
        }
        if let Some((i, p)) = values
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::InvalidArgument(format!(
                "p-value {i} is {p}, outside [0, 1]"
            )));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for PValues {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        PValues::new(v)
    }
}

impl From<PValues> for Vec<f64> {
    fn from(p: PValues) -> Self {
        p.0
    }
}

/// Dependence regime a layer's user claims for its p-values. Only used for
/// documentation and sanity warnings; nothing is checked against data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DependenceLabel {
    #[default]
    Independent,
    Prds,
    Arbitrary,
}

/// Which internal consistency rule ties elementary and group rejections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IcMode {
    /// Reject `i` iff every layer has a rejected group containing `i`
    /// (or leaves `i` out).
    #[default]
    Weak,
    /// Reject `i` iff every group containing `i` is rejected in every layer
    /// that covers `i`.
    Strong,
}

/// One partition (possibly overlapping, possibly incomplete) of the
/// hypotheses with its own error target and tuning.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub groups: Vec<Vec<usize>>,
    pub prior_weights: Vec<f64>,
    pub penalty_weights: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
    pub adaptive: bool,
    pub reshape: ReshapeSpec,
    pub combiner: CombinerSpec,
    pub dependence: DependenceLabel,
}

impl Layer {
    /// A layer with unit weights, no adaptivity, no reshaping and Simes
    /// group p-values.
    pub fn new(groups: Vec<Vec<usize>>, alpha: f64) -> Self {
        let g = groups.len();
        Self {
            groups,
            prior_weights: vec![1.0; g],
            penalty_weights: vec![1.0; g],
            alpha,
            lambda: 1.0,
            adaptive: false,
            reshape: ReshapeSpec::Identity,
            combiner: CombinerSpec::Simes,
            dependence: DependenceLabel::Independent,
        }
    }

    /// Every hypothesis in its own group.
    pub fn finest(n: usize, alpha: f64) -> Self {
        Self::new((0..n).map(|i| vec![i]).collect(), alpha)
    }

    /// All hypotheses in a single group.
    pub fn coarsest(n: usize, alpha: f64) -> Self {
        Self::new(vec![(0..n).collect()], alpha)
    }

    pub fn with_weights(mut self, prior: Vec<f64>, penalty: Vec<f64>) -> Self {
        self.prior_weights = prior;
        self.penalty_weights = penalty;
        self
    }

    pub fn with_adaptivity(mut self, lambda: f64) -> Self {
        self.adaptive = true;
        self.lambda = lambda;
        self
    }

    pub fn with_reshape(mut self, reshape: ReshapeSpec) -> Self {
        self.reshape = reshape;
        self
    }

    pub fn with_combiner(mut self, combiner: CombinerSpec) -> Self {
        self.combiner = combiner;
        self
    }

    pub fn with_dependence(mut self, dependence: DependenceLabel) -> Self {
        self.dependence = dependence;
        self
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// `max_g u_g w_g`.
    pub fn max_norm(&self) -> f64 {
        self.penalty_weights
            .iter()
            .zip(&self.prior_weights)
            .map(|(u, w)| u * w)
            .fold(0.0, f64::max)
    }

    /// Rescales the prior weights so that `Σ u_g w_g = G`.
    pub fn normalize(&mut self) {
        let total: f64 = self
            .penalty_weights
            .iter()
            .zip(&self.prior_weights)
            .map(|(u, w)| u * w)
            .sum();
        if total > 0.0 && total.is_finite() {
            let scale = self.groups.len() as f64 / total;
            for w in &mut self.prior_weights {
                *w *= scale;
            }
        }
    }

    /// Hypotheses covered by no group of this layer.
    pub fn leftover(&self, n: usize) -> Vec<usize> {
        let mut covered = vec![false; n];
        for &i in self.groups.iter().flatten() {
            if i < n {
                covered[i] = true;
            }
        }
        (0..n).filter(|&i| !covered[i]).collect()
    }

    /// Groups that contain hypothesis `i`; empty exactly when `i` is a
    /// leftover hypothesis.
    pub fn group_membership(&self, i: usize, n: usize) -> Result<Vec<usize>> {
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "hypothesis index {i} out of range for n = {n}"
            )));
        }
        Ok(self
            .groups
            .iter()
            .enumerate()
            .filter(|(_, members)| members.contains(&i))
            .map(|(g, _)| g)
            .collect())
    }

    /// Hypothesis-to-groups lookup table for all `i < n`.
    pub fn membership_table(&self, n: usize) -> Vec<Vec<usize>> {
        let mut table = vec![Vec::new(); n];
        for (g, members) in self.groups.iter().enumerate() {
            for &i in members {
                if i < n && table[i].last() != Some(&g) {
                    table[i].push(g);
                }
            }
        }
        table
    }

    /// Invariant violations for this layer, tagged with `index`.
    pub fn violations(&self, index: usize, n: usize) -> Vec<Violation> {
        let mut out = Vec::new();
        let g_count = self.groups.len();
        if g_count == 0 {
            out.push(Violation::layer(index, "layer has no groups"));
            return out;
        }
        for (g, members) in self.groups.iter().enumerate() {
            if members.is_empty() {
                out.push(Violation::group(index, g, "group is empty"));
            }
            if let Some(&i) = members.iter().find(|&&i| i >= n) {
                out.push(Violation::group(
                    index,
                    g,
                    format!("index out of range: {i} >= n = {n}"),
                ));
            }
        }
        if self.prior_weights.len() != g_count {
            out.push(Violation::layer(
                index,
                format!(
                    "prior weight count {} != group count {g_count}",
                    self.prior_weights.len()
                ),
            ));
        }
        if self.penalty_weights.len() != g_count {
            out.push(Violation::layer(
                index,
                format!(
                    "penalty weight count {} != group count {g_count}",
                    self.penalty_weights.len()
                ),
            ));
        }
        for (g, &w) in self.prior_weights.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                out.push(Violation::group(index, g, format!("prior weight {w} is not positive")));
            }
        }
        for (g, &u) in self.penalty_weights.iter().enumerate() {
            if !(u > 0.0 && u.is_finite()) {
                out.push(Violation::group(index, g, format!("penalty weight {u} is not positive")));
            }
        }
        if self.prior_weights.len() == g_count && self.penalty_weights.len() == g_count {
            let total: f64 = self
                .penalty_weights
                .iter()
                .zip(&self.prior_weights)
                .map(|(u, w)| u * w)
                .sum();
            let target = g_count as f64;
            if !((total - target).abs() <= WEIGHT_TOLERANCE * target) {
                out.push(Violation::layer(
                    index,
                    format!("weight normalization: {total} ≠ {target}"),
                ));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            out.push(Violation::layer(index, format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if self.adaptive {
            if !(self.lambda > 0.0 && self.lambda < 1.0) {
                out.push(Violation::layer(
                    index,
                    format!("lambda {} outside (0, 1) for an adaptive layer", self.lambda),
                ));
            }
        } else if self.lambda != 1.0 {
            out.push(Violation::layer(
                index,
                format!("lambda must be 1 when adaptivity is off, got {}", self.lambda),
            ));
        }
        for msg in self.reshape.violations() {
            out.push(Violation::layer(index, format!("reshape: {msg}")));
        }
        for (g, msg) in self.combiner.violations(&self.groups) {
            match g {
                Some(g) => out.push(Violation::group(index, g, format!("combiner: {msg}"))),
                None => out.push(Violation::layer(index, format!("combiner: {msg}"))),
            }
        }
        out
    }
}

/// Base p-values together with the layers to control simultaneously.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub pvalues: PValues,
    pub layers: Vec<Layer>,
    pub ic_mode: IcMode,
}

impl Problem {
    pub fn new(pvalues: PValues, layers: Vec<Layer>, ic_mode: IcMode) -> Self {
        Self {
            pvalues,
            layers,
            ic_mode,
        }
    }

    pub fn n(&self) -> usize {
        self.pvalues.len()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// All invariant violations. An empty list means the problem is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.n();
        let mut out = Vec::new();
        if self.layers.is_empty() {
            out.push(Violation::problem("at least one layer is required"));
        }
        for (m, layer) in self.layers.iter().enumerate() {
            out.extend(layer.violations(m, n));
        }
        if out.is_empty() {
            // Hypotheses outside every layer would be rejected unconditionally.
            let mut covered = vec![false; n];
            for &i in self.layers.iter().flat_map(|l| l.groups.iter().flatten()) {
                covered[i] = true;
            }
            if let Some(i) = covered.iter().position(|c| !c) {
                out.push(Violation::problem(format!(
                    "hypothesis {i} belongs to no group in any layer"
                )));
            }
        }
        out
    }

    /// `Ok(())` when valid, otherwise [`Error::Invalid`] with every violation.
    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }
}

/// Weighted discovery counts, one real coordinate per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KVector(pub Vec<f64>);

impl KVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    /// `k^(m) = G^(m)` for every layer, the starting point of the search.
    pub fn top(problem: &Problem) -> Self {
        Self(problem.layers.iter().map(|l| l.groups.len() as f64).collect())
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks `0 ≤ k^(m) ≤ G^(m)` and the dimension.
    pub fn check_bounds(&self, problem: &Problem) -> Result<()> {
        if self.0.len() != problem.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "k has {} coordinates, problem has {} layers",
                self.0.len(),
                problem.layers.len()
            )));
        }
        for (m, (&k, layer)) in self.0.iter().zip(&problem.layers).enumerate() {
            let g = layer.groups.len() as f64;
            if !(0.0..=g).contains(&k) {
                return Err(Error::InvalidArgument(format!(
                    "k[{m}] = {k} outside [0, {g}]"
                )));
            }
        }
        Ok(())
    }
}

/// Output of the selection procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionResult {
    /// Rejected elementary hypotheses, ascending.
    pub elementary: Vec<usize>,
    /// Rejected groups per layer, ascending.
    pub per_layer: Vec<Vec<usize>>,
    pub k_hat: KVector,
    pub pi_hat: Vec<f64>,
    pub group_pvalues: Vec<Vec<f64>>,
}

impl RejectionResult {
    pub fn num_rejections(&self) -> usize {
        self.elementary.len()
    }
}
