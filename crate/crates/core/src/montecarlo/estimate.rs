use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_reps, draw, replication_rng, Estimate, SimModel};
use crate::combine::CombinerSpec;
use crate::engine::{fdp_layer, pfilter, power_layer, EngineOptions, Truth};
use crate::error::{Error, Result};
use crate::model::{PValues, Problem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerEstimate {
    pub layer: usize,
    pub alpha: f64,
    pub fdr: Estimate,
    pub power: Estimate,
    /// `Σ_{g null} u_g w_g / G`, the factor in the dependent-case bound.
    pub null_weight_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub layers: Vec<LayerEstimate>,
    pub reps: usize,
    pub seed: u64,
}

/// Estimates the penalty-weighted FDR and power of every layer of
/// `template` (whose p-values are replaced in each replication) under
/// `model`.
pub fn estimate_fdr(
    template: &Problem,
    model: &SimModel,
    reps: usize,
    options: &EngineOptions,
) -> Result<SimReport> {
    check_reps(reps)?;
    model.validate()?;
    if model.n != template.n() {
        return Err(Error::Config(format!(
            "model has {} hypotheses, problem has {}",
            model.n,
            template.n()
        )));
    }
    if template
        .layers
        .iter()
        .any(|l| matches!(l.combiner, CombinerSpec::External(_)))
    {
        return Err(Error::Config(
            "external group p-values cannot be simulated".into(),
        ));
    }
    template.ensure_valid()?;
    let truth = Truth::from_null_hypotheses(template, &model.nulls);
    let num_layers = template.layers.len();

    let per_rep: Vec<Vec<(f64, f64)>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(model.seed, rep);
            let mut problem = template.clone();
            problem.pvalues = PValues::new(draw(model, &mut rng))?;
            let result = pfilter(&problem, options)?;
            (0..num_layers)
                .map(|m| {
                    let fdp = fdp_layer(&problem, &result, &truth, m)
                        .value()
                        .ok_or(Error::UndefinedFdp { layer: m })?;
                    let power = power_layer(&problem, &result, &truth, m).value().unwrap_or(0.0);
                    Ok((fdp, power))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let layers = (0..num_layers)
        .map(|m| {
            let layer = &template.layers[m];
            let fdp: Vec<f64> = per_rep.iter().map(|r| r[m].0).collect();
            let power: Vec<f64> = per_rep.iter().map(|r| r[m].1).collect();
            let null_mass: f64 = layer
                .penalty_weights
                .iter()
                .zip(&layer.prior_weights)
                .zip(&truth.null_groups[m])
                .filter(|(_, &null)| null)
                .map(|((u, w), _)| u * w)
                .sum();
            LayerEstimate {
                layer: m,
                alpha: layer.alpha,
                fdr: Estimate::from_values(&fdp),
                power: Estimate::from_values(&power),
                null_weight_fraction: null_mass / layer.groups.len() as f64,
            }
        })
        .collect();
    Ok(SimReport {
        layers,
        reps,
        seed: model.seed,
    })
}
