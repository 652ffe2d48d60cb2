//! Exhaustive search for the maximum feasible corner on small problems.
//!
//! Along each coordinate the screened set only changes at the counts where a
//! group first passes its threshold, so `k^(m)` can be restricted to those
//! breakpoints (plus zero). Each lattice point is the cheapest vector of its
//! cell; when it is feasible, the rejected mass of layer `m` (capped at
//! `G^(m)`) is a feasible value for that coordinate, and the largest such
//! value over all lattice points is the maximum feasible coordinate.

use super::{EngineOptions, Selector};
use crate::error::{Error, Result};
use crate::model::{KVector, Problem};

/// Bound on lattice points times hypotheses, the oracle's work estimate.
pub const DEFAULT_LATTICE_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    /// Per-layer maxima of feasible coordinates.
    pub corner: KVector,
    /// Whether the corner itself is feasible.
    pub corner_feasible: bool,
    pub lattice_size: usize,
}

pub fn oracle_max_corner(problem: &Problem, options: &EngineOptions) -> Result<OracleReport> {
    oracle_max_corner_with_limit(problem, options, DEFAULT_LATTICE_LIMIT)
}

pub fn oracle_max_corner_with_limit(
    problem: &Problem,
    options: &EngineOptions,
    limit: f64,
) -> Result<OracleReport> {
    let selector = Selector::new(problem, options)?;
    let candidates: Vec<Vec<f64>> = (0..problem.layers.len())
        .map(|m| breakpoints(&selector, m))
        .collect();
    let size: f64 = candidates.iter().map(|c| c.len() as f64).product::<f64>() * problem.n() as f64;
    if size > limit {
        return Err(Error::LatticeTooLarge { size, limit });
    }

    let num_layers = candidates.len();
    let caps: Vec<f64> = problem.layers.iter().map(|l| l.groups.len() as f64).collect();
    let mut best = vec![0.0f64; num_layers];
    let mut digits = vec![0usize; num_layers];
    let mut point = vec![0.0; num_layers];
    let mut visited = 0usize;
    loop {
        for m in 0..num_layers {
            point[m] = candidates[m][digits[m]];
        }
        visited += 1;
        let masses = selector.masses(&point);
        let feasible = masses
            .iter()
            .zip(&point)
            .all(|(&mass, &k)| mass >= k - selector.tolerance());
        if feasible {
            for m in 0..num_layers {
                best[m] = best[m].max(masses[m].min(caps[m]));
            }
        }
        // mixed-radix increment
        let mut m = 0;
        while m < num_layers {
            digits[m] += 1;
            if digits[m] < candidates[m].len() {
                break;
            }
            digits[m] = 0;
            m += 1;
        }
        if m == num_layers {
            break;
        }
    }

    let corner_feasible = selector.feasible_raw(&best);
    Ok(OracleReport {
        corner: KVector(best),
        corner_feasible,
        lattice_size: visited,
    })
}

/// Zero plus, for every group that can ever pass screening, the smallest
/// count at which it does.
fn breakpoints(selector: &Selector<'_>, m: usize) -> Vec<f64> {
    let problem = selector.problem();
    let layer = &problem.layers[m];
    let cap = layer.groups.len() as f64;
    let pi = selector.pi_hat()[m];
    let mut out = vec![0.0];
    for (g, &p) in selector.group_pvalues()[m].iter().enumerate() {
        if p > layer.lambda {
            continue;
        }
        let needed = p * pi * cap / (layer.prior_weights[g] * layer.alpha);
        let mut k = layer.reshape.inverse(needed, cap);
        // Step past rounding at the boundary until the group is screened in.
        for _ in 0..64 {
            if !k.is_finite() || k > cap {
                break;
            }
            if selector.screens(m, g, k) {
                out.push(k);
                break;
            }
            let beta = layer.reshape.apply(k);
            k = layer.reshape.inverse(beta.next_up().max(needed), cap).max(k.next_up());
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}
