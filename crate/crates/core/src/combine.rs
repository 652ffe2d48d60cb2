//! Group p-values built from the base p-values of each group's members.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::Problem;
use crate::reshape::ReshapeSpec;

/// How a layer turns member p-values into one p-value per group.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum CombinerSpec {
    #[default]
    Simes,
    /// Per-group within weights; `None` means unit weights.
    WeightedSimes { weights: Option<Vec<Vec<f64>>> },
    /// Per-group within weights and a within-group reshape. A `None`
    /// reshape means BY sized to each group.
    ReshapedWeightedSimes {
        weights: Option<Vec<Vec<f64>>>,
        reshape: Option<ReshapeSpec>,
    },
    Fisher,
    Stouffer,
    Bonferroni,
    Ruschendorf,
    Ruger(usize),
    /// Precomputed group p-values, one per group.
    External(Vec<f64>),
}

impl CombinerSpec {
    pub(crate) fn violations(&self, groups: &[Vec<usize>]) -> Vec<(Option<usize>, String)> {
        let mut out = Vec::new();
        let check_weights = |weights: &Option<Vec<Vec<f64>>>, out: &mut Vec<(Option<usize>, String)>| {
            if let Some(ws) = weights {
                if ws.len() != groups.len() {
                    out.push((None, format!("{} weight vectors for {} groups", ws.len(), groups.len())));
                    return;
                }
                for (g, (w, members)) in ws.iter().zip(groups).enumerate() {
                    if w.len() != members.len() {
                        out.push((Some(g), format!("{} within weights for {} members", w.len(), members.len())));
                    }
                    if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                        out.push((Some(g), "within weights must be positive".to_string()));
                    }
                }
            }
        };
        match self {
            CombinerSpec::WeightedSimes { weights } => check_weights(weights, &mut out),
            CombinerSpec::ReshapedWeightedSimes { weights, reshape } => {
                check_weights(weights, &mut out);
                if let Some(r) = reshape {
                    out.extend(r.violations().into_iter().map(|m| (None, m)));
                }
            }
            CombinerSpec::Ruger(k) => {
                for (g, members) in groups.iter().enumerate() {
                    if *k == 0 || *k > members.len() {
                        out.push((Some(g), format!("Ruger k = {k} outside 1..={}", members.len())));
                    }
                }
            }
            CombinerSpec::External(values) => {
                if values.len() != groups.len() {
                    out.push((None, format!("{} external p-values for {} groups", values.len(), groups.len())));
                }
                if let Some(p) = values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    out.push((None, format!("external p-value {p} outside [0, 1]")));
                }
            }
            _ => {}
        }
        out
    }

    /// Group p-value for group `g` whose member p-values are `p`.
    pub fn combine(&self, g: usize, p: &[f64]) -> Result<f64> {
        match self {
            CombinerSpec::Simes => simes(p),
            CombinerSpec::WeightedSimes { weights } => match weights {
                Some(w) => weighted_simes(p, &w[g]),
                None => simes(p),
            },
            CombinerSpec::ReshapedWeightedSimes { weights, reshape } => {
                let unit;
                let w = match weights {
                    Some(w) => &w[g][..],
                    None => {
                        unit = vec![1.0; p.len()];
                        &unit[..]
                    }
                };
                match reshape {
                    Some(r) => reshaped_weighted_simes(p, w, r),
                    None => reshaped_weighted_simes(p, w, &ReshapeSpec::by(p.len())),
                }
            }
            CombinerSpec::Fisher => fisher(p),
            CombinerSpec::Stouffer => stouffer(p),
            CombinerSpec::Bonferroni => bonferroni(p),
            CombinerSpec::Ruschendorf => ruschendorf(p),
            CombinerSpec::Ruger(k) => ruger(p, *k),
            CombinerSpec::External(values) => values
                .get(g)
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("no external p-value for group {g}"))),
        }
    }
}

fn nonempty(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        Err(Error::InvalidArgument("cannot combine an empty set of p-values".into()))
    } else {
        Ok(())
    }
}

fn sorted(p: &[f64]) -> Vec<f64> {
    let mut v = p.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `min_k P_(k) · m / k`.
pub fn simes(p: &[f64]) -> Result<f64> {
    nonempty(p)?;
    let m = p.len() as f64;
    let best = sorted(p)
        .iter()
        .enumerate()
        .map(|(j, &x)| x * m / (j + 1) as f64)
        .fold(f64::INFINITY, f64::min);
    Ok(best.clamp(0.0, 1.0))
}

/// Simes applied to `Q_i = P_i / w_i`.
pub fn weighted_simes(p: &[f64], w: &[f64]) -> Result<f64> {
    reshaped_weighted_simes(p, w, &ReshapeSpec::Identity)
}

/// `min_k Q_(k) · m / β̃(k)` over `k` with `β̃(k) > 0`.
pub fn reshaped_weighted_simes(p: &[f64], w: &[f64], reshape: &ReshapeSpec) -> Result<f64> {
    nonempty(p)?;
    if p.len() != w.len() {
        return Err(Error::InvalidArgument(format!(
            "{} p-values but {} weights",
            p.len(),
            w.len()
        )));
    }
    if let Some(x) = w.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument(format!("nonpositive weight {x}")));
    }
    let q: Vec<f64> = p.iter().zip(w).map(|(p, w)| p / w).collect();
    let m = p.len() as f64;
    let mut best = f64::INFINITY;
    let mut any = false;
    for (j, &x) in sorted(&q).iter().enumerate() {
        let b = reshape.apply((j + 1) as f64);
        if b > 0.0 {
            any = true;
            best = best.min(x * m / b);
        }
    }
    if !any {
        return Err(Error::InvalidArgument(
            "within-group reshape vanishes on 1..=m".into(),
        ));
    }
    Ok(best.clamp(0.0, 1.0))
}

/// Fisher's combination, `−2 Σ ln P_i` referred to χ² with `2m` degrees of
/// freedom. Any zero p-value gives zero.
pub fn fisher(p: &[f64]) -> Result<f64> {
    nonempty(p)?;
    if p.contains(&0.0) {
        return Ok(0.0);
    }
    let stat: f64 = -2.0 * p.iter().map(|x| x.ln()).sum::<f64>();
    Ok(chi2_sf_even(stat, p.len()).clamp(0.0, 1.0))
}

/// Upper tail of χ² with `2m` degrees of freedom:
/// `e^{−x/2} Σ_{j<m} (x/2)^j / j!`.
pub fn chi2_sf_even(x: f64, m: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..m {
        term *= half / j as f64;
        sum += term;
    }
    // Work in logs so large statistics do not overflow the partial sum.
    (sum.ln() - half).exp()
}

fn std_normal() -> Normal {
    Normal::standard()
}

pub fn normal_cdf(z: f64) -> f64 {
    if z == f64::NEG_INFINITY {
        0.0
    } else if z == f64::INFINITY {
        1.0
    } else {
        std_normal().cdf(z)
    }
}

/// Upper tail `1 − Φ(z)`, accurate for large `z`.
pub fn normal_sf(z: f64) -> f64 {
    if z == f64::NEG_INFINITY {
        1.0
    } else if z == f64::INFINITY {
        0.0
    } else {
        std_normal().sf(z)
    }
}

pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        std_normal().inverse_cdf(p)
    }
}

/// `Φ(Σ Φ⁻¹(P_i) / √m)`. A zero p-value saturates to 0 before a one
/// saturates to 1.
pub fn stouffer(p: &[f64]) -> Result<f64> {
    nonempty(p)?;
    if p.contains(&0.0) {
        return Ok(0.0);
    }
    if p.contains(&1.0) {
        return Ok(1.0);
    }
    let z: f64 = p.iter().map(|&x| normal_quantile(x)).sum::<f64>() / (p.len() as f64).sqrt();
    Ok(normal_cdf(z).clamp(0.0, 1.0))
}

/// `min(1, m · min_i P_i)`.
pub fn bonferroni(p: &[f64]) -> Result<f64> {
    nonempty(p)?;
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((p.len() as f64 * min).min(1.0))
}

/// `min(1, 2 Σ P_i / m)`.
pub fn ruschendorf(p: &[f64]) -> Result<f64> {
    nonempty(p)?;
    Ok((2.0 * p.iter().sum::<f64>() / p.len() as f64).min(1.0))
}

/// `min(1, P_(k) · m / k)`.
pub fn ruger(p: &[f64], k: usize) -> Result<f64> {
    nonempty(p)?;
    if k == 0 || k > p.len() {
        return Err(Error::InvalidArgument(format!(
            "Ruger k = {k} outside 1..={}",
            p.len()
        )));
    }
    let s = sorted(p);
    Ok((s[k - 1] * p.len() as f64 / k as f64).min(1.0))
}

/// Group p-values `P^(m)_g` for layer `layer`.
pub fn group_pvalues(problem: &Problem, layer: usize) -> Result<Vec<f64>> {
    let l = problem.layers.get(layer).ok_or_else(|| {
        Error::InvalidArgument(format!("layer {layer} out of range"))
    })?;
    let p = problem.pvalues.as_slice();
    let mut buf = Vec::new();
    l.groups
        .iter()
        .enumerate()
        .map(|(g, members)| {
            buf.clear();
            buf.extend(members.iter().map(|&i| p[i]));
            l.combiner.combine(g, &buf)
        })
        .collect()
}
