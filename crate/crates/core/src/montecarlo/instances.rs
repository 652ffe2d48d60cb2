//! Random small problems for oracle and property checks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{IcMode, Layer, PValues, Problem};
use crate::reshape::ReshapeSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceConfig {
    pub max_n: usize,
    pub max_layers: usize,
    /// Probability that a layer gets extra overlapping memberships.
    pub overlap: f64,
    /// Probability that a layer leaves some hypotheses out.
    pub incomplete: f64,
    pub fractional_penalties: bool,
    pub random_priors: bool,
    pub allow_adaptive: bool,
    pub allow_reshape: bool,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self {
            max_n: 12,
            max_layers: 3,
            overlap: 0.5,
            incomplete: 0.4,
            fractional_penalties: true,
            random_priors: true,
            allow_adaptive: true,
            allow_reshape: true,
        }
    }
}

/// Mixture of uniform nulls and signals concentrated near zero.
pub fn random_pvalues<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            if rng.random_bool(0.4) {
                u.powi(4) * 0.2
            } else {
                u
            }
        })
        .collect()
}

fn random_groups<R: Rng>(rng: &mut R, n: usize, config: &InstanceConfig) -> Vec<Vec<usize>> {
    let num_groups = rng.random_range(1..=n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut groups = vec![Vec::new(); num_groups];
    // every group gets at least one member
    for (g, &i) in order.iter().take(num_groups).enumerate() {
        groups[g].push(i);
    }
    let drop_some = rng.random_bool(config.incomplete);
    for &i in order.iter().skip(num_groups) {
        if drop_some && rng.random_bool(0.3) {
            continue;
        }
        let g = rng.random_range(0..num_groups);
        groups[g].push(i);
    }
    if rng.random_bool(config.overlap) {
        let extra = rng.random_range(1..=n.div_ceil(2));
        for _ in 0..extra {
            let g = rng.random_range(0..num_groups);
            let i = rng.random_range(0..n);
            if !groups[g].contains(&i) {
                groups[g].push(i);
            }
        }
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    groups
}

fn random_reshape<R: Rng>(rng: &mut R, g: usize) -> ReshapeSpec {
    match rng.random_range(0..3) {
        0 => ReshapeSpec::Identity,
        1 => ReshapeSpec::by(g),
        _ => {
            let atoms = rng.random_range(1..=3);
            let raw: Vec<(f64, f64)> = (0..atoms)
                .map(|_| (rng.random_range(0.2..g as f64 + 0.5), rng.random_range(0.1..1.0)))
                .collect();
            let total: f64 = raw.iter().map(|a| a.1).sum();
            ReshapeSpec::measure(raw.into_iter().map(|(x, m)| (x, m / total)).collect())
                .expect("generated measure is valid")
        }
    }
}

/// A random layer over `n` hypotheses.
pub fn random_layer<R: Rng>(rng: &mut R, n: usize, config: &InstanceConfig) -> Layer {
    let groups = random_groups(rng, n, config);
    let g = groups.len();
    let alpha = rng.random_range(0.05..0.6);
    let penalty: Vec<f64> = if config.fractional_penalties {
        (0..g).map(|_| rng.random_range(0.25..2.0)).collect()
    } else {
        vec![1.0; g]
    };
    let prior: Vec<f64> = if config.random_priors {
        (0..g).map(|_| rng.random_range(0.5..2.0)).collect()
    } else {
        vec![1.0; g]
    };
    let mut layer = Layer::new(groups, alpha).with_weights(prior, penalty);
    layer.normalize();
    if config.allow_adaptive && rng.random_bool(0.3) {
        layer = layer.with_adaptivity(rng.random_range(0.3..0.8));
    }
    if config.allow_reshape && rng.random_bool(0.4) {
        layer = layer.with_reshape(random_reshape(rng, g));
    }
    layer
}

/// A random multi-layer problem; every hypothesis is covered by at least
/// one layer.
pub fn random_problem<R: Rng>(rng: &mut R, config: &InstanceConfig) -> Problem {
    let n = rng.random_range(2..=config.max_n.max(2));
    let num_layers = rng.random_range(1..=config.max_layers.max(1));
    let mut layers: Vec<Layer> = (0..num_layers).map(|_| random_layer(rng, n, config)).collect();
    let mut covered = vec![false; n];
    for &i in layers.iter().flat_map(|l| l.groups.iter().flatten()) {
        covered[i] = true;
    }
    for i in (0..n).filter(|&i| !covered[i]) {
        let g = rng.random_range(0..layers[0].groups.len());
        let group = &mut layers[0].groups[g];
        group.push(i);
        group.sort_unstable();
    }
    let ic = if rng.random_bool(0.5) {
        IcMode::Weak
    } else {
        IcMode::Strong
    };
    let p = PValues::new(random_pvalues(rng, n)).expect("generated p-values are valid");
    Problem::new(p, layers, ic)
}
