//! Weighted null-proportion estimates `π̂^(m)`.

use crate::error::{Error, Result};
use crate::model::Layer;

fn check(layer: &Layer, group_p: &[f64]) -> Result<()> {
    if group_p.len() != layer.groups.len() {
        return Err(Error::InvalidArgument(format!(
            "{} group p-values for {} groups",
            group_p.len(),
            layer.groups.len()
        )));
    }
    if !(layer.lambda < 1.0) {
        return Err(Error::Config(format!(
            "adaptive layer needs lambda < 1, got {}",
            layer.lambda
        )));
    }
    Ok(())
}

fn estimate(layer: &Layer, group_p: &[f64], skip: Option<usize>) -> f64 {
    let lambda = layer.lambda;
    let exceed: f64 = layer
        .penalty_weights
        .iter()
        .zip(&layer.prior_weights)
        .zip(group_p)
        .enumerate()
        .filter(|&(g, (_, &p))| Some(g) != skip && p > lambda)
        .map(|(_, ((u, w), _))| u * w)
        .sum();
    (layer.max_norm() + exceed) / (layer.groups.len() as f64 * (1.0 - lambda))
}

/// `π̂ = (max_g u_g w_g + Σ_g u_g w_g 1{P_g > λ}) / (G (1 − λ))`, or exactly
/// 1 when the layer is not adaptive.
pub fn pi_hat(layer: &Layer, group_p: &[f64]) -> Result<f64> {
    if !layer.adaptive {
        return Ok(1.0);
    }
    check(layer, group_p)?;
    Ok(estimate(layer, group_p, None))
}

/// Same as [`pi_hat`] with group `g` left out of the exceedance sum.
pub fn pi_hat_loo(layer: &Layer, group_p: &[f64], g: usize) -> Result<f64> {
    if !layer.adaptive {
        return Ok(1.0);
    }
    check(layer, group_p)?;
    if g >= group_p.len() {
        return Err(Error::InvalidArgument(format!("group {g} out of range")));
    }
    Ok(estimate(layer, group_p, Some(g)))
}
