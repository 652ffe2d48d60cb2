//! Single-layer step-up reference, the structured BH procedure and
//! post-selection BH.

use crate::error::{Error, Result};
use crate::reshape::ReshapeSpec;

/// Parameters of a single-layer step-up over the finest partition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepUp {
    pub prior: Vec<f64>,
    pub penalty: Vec<f64>,
    pub alpha: f64,
    pub reshape: ReshapeSpec,
    pub lambda: f64,
    pub adaptive: bool,
}

impl StepUp {
    /// Plain BH at level `alpha` over `n` hypotheses.
    pub fn bh(n: usize, alpha: f64) -> Self {
        Self {
            prior: vec![1.0; n],
            penalty: vec![1.0; n],
            alpha,
            reshape: ReshapeSpec::Identity,
            lambda: 1.0,
            adaptive: false,
        }
    }
}

/// Step-up rejection set computed directly from sorted entry points.
///
/// Each hypothesis enters the selection at the smallest count `k` for which
/// its threshold `min(w_i α β(k) / (π̂ n), λ)` reaches `P_i`. Sorting by entry
/// point, the first `j` hypotheses are selected for counts between the
/// `j`-th and `(j+1)`-th entry points, so the largest self-consistent count
/// is the largest capped cumulative penalty mass that is at least its own
/// entry point.
pub fn reference_stepup(p: &[f64], params: &StepUp) -> Result<Vec<usize>> {
    let n = p.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if params.prior.len() != n || params.penalty.len() != n {
        return Err(Error::InvalidArgument("weight vectors must match the p-values".into()));
    }
    let nf = n as f64;
    let total: f64 = params.prior.iter().zip(&params.penalty).map(|(w, u)| w * u).sum();
    if (total - nf).abs() > 1e-9 * nf {
        return Err(Error::InvalidArgument(format!("weights sum to {total}, expected {n}")));
    }
    let lambda = if params.adaptive { params.lambda } else { 1.0 };
    let pi = if params.adaptive {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Config(format!("lambda {lambda} outside (0, 1)")));
        }
        let max_norm = params
            .prior
            .iter()
            .zip(&params.penalty)
            .map(|(w, u)| w * u)
            .fold(0.0, f64::max);
        let exceed: f64 = (0..n)
            .filter(|&i| p[i] > lambda)
            .map(|i| params.prior[i] * params.penalty[i])
            .sum();
        (max_norm + exceed) / (nf * (1.0 - lambda))
    } else {
        1.0
    };

    let threshold = |i: usize, k: f64| -> f64 {
        (params.prior[i] * params.alpha * params.reshape.apply(k) / (pi * nf)).min(lambda)
    };

    // entry point of each hypothesis that can ever be selected
    let mut entries: Vec<(f64, usize)> = (0..n)
        .filter(|&i| p[i] <= lambda)
        .filter_map(|i| {
            let needed = p[i] * pi * nf / (params.prior[i] * params.alpha);
            let mut k = params.reshape.inverse(needed, nf);
            for _ in 0..64 {
                if !k.is_finite() {
                    return None;
                }
                if p[i] <= threshold(i, k) {
                    return Some((k, i));
                }
                k = k.next_up();
            }
            None
        })
        .collect();
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut best = 0.0f64;
    let mut mass = 0.0;
    let mut j = 0;
    while j < entries.len() {
        // hypotheses sharing an entry point join together
        let start = entries[j].0;
        while j < entries.len() && entries[j].0 == start {
            mass += params.penalty[entries[j].1];
            j += 1;
        }
        let candidate = mass.min(nf);
        if candidate >= start - 1e-9 {
            best = best.max(candidate);
        }
    }
    Ok((0..n).filter(|&i| p[i] <= threshold(i, best)).collect())
}

/// `n · max_{i∈S} P_i / |S|`, zero for the empty set.
pub fn fdp_hat(p: &[f64], set: &[usize]) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let max = set.iter().map(|&i| p[i]).fold(0.0, f64::max);
    p.len() as f64 * max / set.len() as f64
}

/// Largest member of `family` whose estimated FDP is at most `alpha`.
///
/// Ties on size go to the smaller estimated FDP, then to the
/// lexicographically smallest sorted index list. Returns the empty set when
/// nothing qualifies.
pub fn structured_bh(p: &[f64], family: &[Vec<usize>], alpha: f64) -> Vec<usize> {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for set in family {
        let mut sorted = set.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.is_empty() {
            continue;
        }
        let max = sorted.iter().map(|&i| p[i]).fold(0.0, f64::max);
        // compare in the threshold form to avoid dividing
        if max > alpha * sorted.len() as f64 / p.len() as f64 {
            continue;
        }
        let score = fdp_hat(p, &sorted);
        let better = match &best {
            None => true,
            Some((b, bs)) => {
                sorted.len() > b.len()
                    || (sorted.len() == b.len() && (score < *bs || (score == *bs && sorted < *b)))
            }
        };
        if better {
            best = Some((sorted, score));
        }
    }
    best.map(|(s, _)| s).unwrap_or_default()
}

/// BH on the selected indices at level `alpha |S| / n`.
pub fn post_selection_bh(p: &[f64], selected: &[usize], alpha: f64) -> Vec<usize> {
    if selected.is_empty() {
        return Vec::new();
    }
    let mut sel = selected.to_vec();
    sel.sort_unstable();
    sel.dedup();
    let level = alpha * sel.len() as f64 / p.len() as f64;
    let sub: Vec<f64> = sel.iter().map(|&i| p[i]).collect();
    bh(&sub, level).into_iter().map(|j| sel[j]).collect()
}

/// Classical BH: reject the `k` smallest p-values for the largest `k` with
/// `P_(k) ≤ α k / n`.
pub fn bh(p: &[f64], alpha: f64) -> Vec<usize> {
    let n = p.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let k = (1..=n)
        .rev()
        .find(|&k| p[order[k - 1]] <= alpha * k as f64 / n as f64)
        .unwrap_or(0);
    let mut out: Vec<usize> = order[..k].to_vec();
    out.sort_unstable();
    out
}
