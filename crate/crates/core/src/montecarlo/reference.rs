//! Textbook single-layer step-up procedures written over sorted p-values.
//! They share no code with the engine and serve as test oracles.

use crate::reshape::harmonic;

fn ascending(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    order
}

fn reject_below(keys: &[f64], cut: f64) -> Vec<usize> {
    (0..keys.len()).filter(|&i| keys[i] <= cut).collect()
}

/// Benjamini–Hochberg.
pub fn bh(p: &[f64], alpha: f64) -> Vec<usize> {
    let n = p.len() as f64;
    let order = ascending(p);
    let k = (1..=p.len())
        .rev()
        .find(|&k| p[order[k - 1]] <= alpha * k as f64 / n)
        .unwrap_or(0);
    reject_below(p, alpha * k as f64 / n)
}

/// Benjamini–Yekutieli: BH at `α / H_n`.
pub fn by(p: &[f64], alpha: f64) -> Vec<usize> {
    let n = p.len() as f64;
    let h = harmonic(p.len());
    let order = ascending(p);
    let k = (1..=p.len())
        .rev()
        .find(|&k| p[order[k - 1]] <= alpha * k as f64 / (n * h))
        .unwrap_or(0);
    reject_below(p, alpha * k as f64 / (n * h))
}

/// Storey-BH with estimate `(1 + #{P > λ}) / (n (1 − λ))`, thresholds capped at `λ`.
pub fn storey_bh(p: &[f64], alpha: f64, lambda: f64) -> Vec<usize> {
    let n = p.len() as f64;
    let above = p.iter().filter(|&&x| x > lambda).count() as f64;
    let pi0 = (1.0 + above) / (n * (1.0 - lambda));
    let order = ascending(p);
    let cut = |k: usize| (alpha * k as f64 / (n * pi0)).min(lambda);
    let k = (1..=p.len())
        .rev()
        .find(|&k| p[order[k - 1]] <= cut(k))
        .unwrap_or(0);
    if k == 0 {
        Vec::new()
    } else {
        reject_below(p, cut(k))
    }
}

/// Prior-weighted BH on `Q_i = P_i / w_i`.
pub fn weighted_bh(p: &[f64], w: &[f64], alpha: f64) -> Vec<usize> {
    let q: Vec<f64> = p.iter().zip(w).map(|(p, w)| p / w).collect();
    bh(&q, alpha)
}

/// Penalty-weighted BH: the largest prefix (in p-value order) whose
/// cumulative penalty `C` satisfies `P ≤ α min(C, n) / n`.
pub fn penalty_bh(p: &[f64], u: &[f64], alpha: f64) -> Vec<usize> {
    let n = p.len() as f64;
    let order = ascending(p);
    let mut cumulative = 0.0;
    let mut k_hat = 0.0f64;
    for &i in &order {
        cumulative += u[i];
        let k = cumulative.min(n);
        if p[i] <= alpha * k / n {
            k_hat = k_hat.max(k);
        }
    }
    if k_hat == 0.0 {
        Vec::new()
    } else {
        reject_below(p, alpha * k_hat / n)
    }
}
