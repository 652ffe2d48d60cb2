//! Stochastic checks of the super-uniformity inequalities, the inverse
//! binomial sandwich and the distribution of (weighted) Simes p-values.
//!
//! Every check returns a [`CheckReport`]; a check passes when its estimate
//! respects the target within three standard errors.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_reps, draw, replication_rng, Estimate, SimDependence, SimModel};
use crate::combine::{fisher, reshaped_weighted_simes, simes, weighted_simes};
use crate::error::{Error, Result};
use crate::model::dotfrac;
use crate::reshape::ReshapeSpec;

/// A threshold map `f(P)`, nonincreasing in every p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdFn {
    Constant(f64),
    /// `α k̂(P) / n` with `k̂` the BH rejection count.
    BhThreshold { alpha: f64 },
    /// The BH rejection count `k̂(P)` itself.
    BhCount { alpha: f64 },
}

impl ThresholdFn {
    pub fn eval(&self, p: &[f64]) -> f64 {
        match *self {
            ThresholdFn::Constant(t) => t,
            ThresholdFn::BhThreshold { alpha } => alpha * bh_count(p, alpha) as f64 / p.len() as f64,
            ThresholdFn::BhCount { alpha } => bh_count(p, alpha) as f64,
        }
    }
}

fn bh_count(p: &[f64], alpha: f64) -> usize {
    let n = p.len() as f64;
    let mut s = p.to_vec();
    s.sort_by(f64::total_cmp);
    (1..=s.len())
        .rev()
        .find(|&k| s[k - 1] <= alpha * k as f64 / n)
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Estimate at most one.
    Leq,
    /// Estimate equal to one.
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
}

impl CheckReport {
    fn within(name: impl Into<String>, e: Estimate, lower: Option<f64>, upper: Option<f64>) -> Self {
        let passed = lower.is_none_or(|l| e.upper(3.0) >= l) && upper.is_none_or(|u| e.lower(3.0) <= u);
        Self {
            name: name.into(),
            estimate: e.mean,
            se: e.se,
            lower,
            upper,
            passed,
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bounds = match (self.lower, self.upper) {
            (Some(l), Some(u)) => format!("[{l:.6}, {u:.6}]"),
            (Some(l), None) => format!(">= {l:.6}"),
            (None, Some(u)) => format!("<= {u:.6}"),
            (None, None) => String::new(),
        };
        write!(
            f,
            "{} {}: {:.6} (se {:.6}) target {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.estimate,
            self.se,
            bounds
        )
    }
}

fn simulate<F>(model: &SimModel, reps: usize, stat: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(model.seed, rep);
            stat(&draw(model, &mut rng))
        })
        .collect()
}

fn ratio(hit: bool, f: f64) -> f64 {
    dotfrac(if hit { 1.0 } else { 0.0 }, f).value().unwrap_or(0.0)
}

/// Estimates `E[1{P_i ≤ f(P)} / f(P)]` for the null hypothesis `i`.
pub fn check_superuniformity(
    model: &SimModel,
    i: usize,
    f: ThresholdFn,
    mode: Mode,
    reps: usize,
) -> Result<CheckReport> {
    check_reps(reps)?;
    model.validate()?;
    if i >= model.n || !model.nulls[i] {
        return Err(Error::InvalidArgument(format!("hypothesis {i} is not a null of the model")));
    }
    let values = simulate(model, reps, |p| {
        let t = f.eval(p);
        ratio(p[i] <= t, t)
    });
    let lower = (mode == Mode::Eq).then_some(1.0);
    Ok(CheckReport::within(
        format!("superuniformity {f:?} under {:?}", model.dependence),
        Estimate::from_values(&values),
        lower,
        Some(1.0),
    ))
}

/// Group statistic used by [`check_group_superuniformity`].
#[derive(Debug, Clone, PartialEq)]
pub enum GroupVariant {
    /// Weighted Simes of the group; `None` means unit weights.
    Simes(Option<Vec<f64>>),
    /// Simes of the Simes p-values of disjoint subgroups (positions within
    /// the group).
    NestedSimes(Vec<Vec<usize>>),
    /// `E[1{T(P_A) ≤ c β(f(P))} / (c f(P))]` with `T` Fisher.
    ReshapedFisher { c: f64, beta: ReshapeSpec },
}

/// Estimates the group-level super-uniformity quantity for the null group
/// `group`.
pub fn check_group_superuniformity(
    model: &SimModel,
    group: &[usize],
    f: ThresholdFn,
    variant: &GroupVariant,
    reps: usize,
) -> Result<CheckReport> {
    check_reps(reps)?;
    model.validate()?;
    if group.is_empty() || group.iter().any(|&i| i >= model.n || !model.nulls[i]) {
        return Err(Error::InvalidArgument("group must be a nonempty set of nulls".into()));
    }
    match variant {
        GroupVariant::Simes(Some(w)) if w.len() != group.len() => {
            return Err(Error::InvalidArgument("one weight per group member is required".into()))
        }
        GroupVariant::NestedSimes(parts)
            if parts.iter().any(|s| s.is_empty() || s.iter().any(|&j| j >= group.len())) =>
        {
            return Err(Error::InvalidArgument("subgroups must index into the group".into()))
        }
        _ => {}
    }
    let stat = |p: &[f64]| -> f64 {
        let pa: Vec<f64> = group.iter().map(|&i| p[i]).collect();
        let t = f.eval(p);
        match variant {
            GroupVariant::Simes(None) => ratio(simes(&pa).unwrap_or(1.0) <= t, t),
            GroupVariant::Simes(Some(w)) => ratio(weighted_simes(&pa, w).unwrap_or(1.0) <= t, t),
            GroupVariant::NestedSimes(parts) => {
                let inner: Vec<f64> = parts
                    .iter()
                    .map(|s| simes(&s.iter().map(|&j| pa[j]).collect::<Vec<_>>()).unwrap_or(1.0))
                    .collect();
                ratio(simes(&inner).unwrap_or(1.0) <= t, t)
            }
            GroupVariant::ReshapedFisher { c, beta } => {
                ratio(fisher(&pa).unwrap_or(1.0) <= c * beta.apply(t), c * t)
            }
        }
    };
    let values = simulate(model, reps, stat);
    let kind = match variant {
        GroupVariant::Simes(_) => "simes",
        GroupVariant::NestedSimes(_) => "nested simes",
        GroupVariant::ReshapedFisher { .. } => "reshaped fisher",
    };
    Ok(CheckReport::within(
        format!("group superuniformity ({kind}) {f:?} under {:?}", model.dependence),
        Estimate::from_values(&values),
        None,
        Some(1.0),
    ))
}

/// Lemma bounds `[1 / (1 + bΣa), 1 / (b(1 + Σa))]` for `E[1/Z]`.
pub fn inverse_binomial_bounds(a: &[f64], b: f64) -> (f64, f64) {
    let s: f64 = a.iter().sum();
    (1.0 / (1.0 + b * s), 1.0 / (b * (1.0 + s)))
}

/// Exact `E[1 / (1 + Σ a_i Z_i)]` for `Z_i` i.i.d. Bernoulli(`b`), by
/// enumerating all `2^d` outcomes.
pub fn inverse_binomial_exact(a: &[f64], b: f64) -> Result<f64> {
    let d = a.len();
    if d > 20 {
        return Err(Error::InvalidArgument(format!("exact enumeration needs d <= 20, got {d}")));
    }
    let mut total = 0.0;
    for mask in 0u32..(1 << d) {
        let mut prob = 1.0;
        let mut s = 0.0;
        for (i, &ai) in a.iter().enumerate() {
            if mask >> i & 1 == 1 {
                prob *= b;
                s += ai;
            } else {
                prob *= 1.0 - b;
            }
        }
        if prob > 0.0 {
            total += prob / (1.0 + s);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseBinomialReport {
    pub monte_carlo: CheckReport,
    /// Exact expectation when `d ≤ 20`.
    pub exact: Option<f64>,
    /// Whether the exact expectation lies in the bounds with no tolerance.
    pub exact_within: Option<bool>,
}

impl InverseBinomialReport {
    pub fn passed(&self) -> bool {
        self.monte_carlo.passed && self.exact_within != Some(false)
    }
}

pub fn check_inverse_binomial(a: &[f64], b: f64, reps: usize, seed: u64) -> Result<InverseBinomialReport> {
    check_reps(reps)?;
    if a.is_empty() || a.iter().any(|x| !(0.0..=1.0).contains(x)) || !(b > 0.0 && b <= 1.0) {
        return Err(Error::InvalidArgument("need a in [0,1]^d, d >= 1, and b in (0, 1]".into()));
    }
    let values: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            use rand::Rng;
            let mut rng = replication_rng(seed, rep);
            let s: f64 = a.iter().filter(|_| rng.random_bool(b)).sum();
            1.0 / (1.0 + s)
        })
        .collect();
    let (lo, hi) = inverse_binomial_bounds(a, b);
    let exact = if a.len() <= 20 {
        Some(inverse_binomial_exact(a, b)?)
    } else {
        None
    };
    Ok(InverseBinomialReport {
        monte_carlo: CheckReport::within(
            format!("inverse binomial d={} b={b}", a.len()),
            Estimate::from_values(&values),
            Some(lo),
            Some(hi),
        ),
        exact,
        exact_within: exact.map(|e| lo <= e && e <= hi),
    })
}

fn ks_uniform(mut v: Vec<f64>, upto: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut worst: f64 = 0.0;
    for (j, &x) in v.iter().enumerate() {
        if x > upto {
            // the empirical CDF just below `upto` still counts
            worst = worst.max((j as f64 / n - upto).abs());
            return worst;
        }
        worst = worst.max(((j + 1) as f64 / n - x).max(x - j as f64 / n));
    }
    worst
}

/// Kolmogorov–Smirnov distance between weighted Simes draws of the first
/// `m` hypotheses and the uniform law, over `t ≤ 1 / max w` where the law
/// is exactly uniform. `weights` must sum to `m`.
pub fn check_simes_uniform(model: &SimModel, m: usize, weights: Option<&[f64]>, reps: usize) -> Result<CheckReport> {
    check_reps(reps)?;
    model.validate()?;
    if m == 0 || m > model.n || weights.is_some_and(|w| w.len() != m) {
        return Err(Error::InvalidArgument("bad group size or weights".into()));
    }
    let upto = weights.map_or(1.0, |w| 1.0 / w.iter().cloned().fold(0.0, f64::max));
    let draws = simulate(model, reps, |p| match weights {
        Some(w) => weighted_simes(&p[..m], w).unwrap_or(1.0),
        None => simes(&p[..m]).unwrap_or(1.0),
    });
    let ks = ks_uniform(draws, upto);
    let critical = 0.01f64.max(1.95 / (reps as f64).sqrt());
    Ok(CheckReport {
        name: format!("simes uniformity m={m} weighted={}", weights.is_some()),
        estimate: ks,
        se: 0.0,
        lower: None,
        upper: Some(critical),
        passed: ks < critical,
    })
}

pub const DOMINANCE_GRID: [f64; 9] = [0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 0.8];

/// Checks `P(T ≤ t) ≤ t + 3 SE` on [`DOMINANCE_GRID`] for the reshaped
/// weighted Simes statistic of the first `m` hypotheses. The report holds
/// the grid point with the largest excess `CDF(t) − t`.
pub fn check_simes_dominance(model: &SimModel, m: usize, reshape: &ReshapeSpec, reps: usize) -> Result<CheckReport> {
    check_reps(reps)?;
    model.validate()?;
    if m == 0 || m > model.n {
        return Err(Error::InvalidArgument("bad group size".into()));
    }
    let w = vec![1.0; m];
    let draws = simulate(model, reps, |p| reshaped_weighted_simes(&p[..m], &w, reshape).unwrap_or(1.0));
    let mut worst: Option<(f64, Estimate, f64)> = None;
    let mut passed = true;
    for &t in &DOMINANCE_GRID {
        let hits: Vec<f64> = draws.iter().map(|&x| if x <= t { 1.0 } else { 0.0 }).collect();
        let e = Estimate::from_values(&hits);
        // binomial standard error at the target keeps the bound meaningful
        // when no draw falls below t
        let se = e.se.max((t * (1.0 - t) / reps as f64).sqrt());
        if e.mean > t + 3.0 * se {
            passed = false;
        }
        if worst.as_ref().is_none_or(|(x, _, _)| e.mean - t > *x) {
            worst = Some((e.mean - t, Estimate { se, ..e }, t));
        }
    }
    let (_, e, t) = worst.expect("grid is nonempty");
    Ok(CheckReport {
        name: format!("simes dominance m={m} {reshape:?} under {:?} (worst t={t})", model.dependence),
        estimate: e.mean,
        se: e.se,
        lower: None,
        upper: Some(t),
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Superuniformity,
    Group,
    InverseBinomial,
    SimesDist,
    All,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "superuniformity" => Ok(Suite::Superuniformity),
            "group" => Ok(Suite::Group),
            "inverse-binomial" => Ok(Suite::InverseBinomial),
            "simes-dist" => Ok(Suite::SimesDist),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidArgument(format!(
                "unknown suite {other:?}; expected superuniformity, group, inverse-binomial, simes-dist or all"
            ))),
        }
    }
}

/// Default replication count of the batteries.
pub const DEFAULT_REPS: usize = 100_000;

fn mixed(n: usize, signals: &[usize], dependence: SimDependence, seed: u64) -> SimModel {
    let mut nulls = vec![true; n];
    for &i in signals {
        nulls[i] = false;
    }
    SimModel::new(nulls, dependence, 3.0, seed)
}

fn superuniformity_battery(reps: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let ind = mixed(10, &[7, 8, 9], SimDependence::Independent, seed);
    let prds = mixed(10, &[7, 8, 9], SimDependence::GaussianEquicorrelated(0.5), seed.wrapping_add(1));
    let bh = ThresholdFn::BhThreshold { alpha: 0.2 };
    Ok(vec![
        check_superuniformity(&ind, 0, ThresholdFn::Constant(0.3), Mode::Eq, reps)?,
        check_superuniformity(&ind, 0, bh, Mode::Eq, reps)?,
        check_superuniformity(&prds, 0, bh, Mode::Leq, reps)?,
    ])
}

fn group_battery(reps: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let ind = mixed(10, &[7, 8, 9], SimDependence::Independent, seed.wrapping_add(10));
    let prds = mixed(10, &[7, 8, 9], SimDependence::GaussianEquicorrelated(0.5), seed.wrapping_add(11));
    let dup = mixed(8, &[], SimDependence::DuplicateBlocks(2), seed.wrapping_add(12));
    let group: Vec<usize> = (0..6).collect();
    let bh = ThresholdFn::BhThreshold { alpha: 0.2 };
    Ok(vec![
        check_group_superuniformity(&ind, &group, ThresholdFn::Constant(0.1), &GroupVariant::Simes(None), reps)?,
        check_group_superuniformity(
            &ind,
            &group,
            ThresholdFn::Constant(0.1),
            &GroupVariant::Simes(Some(vec![2.0, 1.0, 1.0, 0.5, 0.5, 1.0])),
            reps,
        )?,
        check_group_superuniformity(&ind, &group, bh, &GroupVariant::Simes(None), reps)?,
        check_group_superuniformity(&prds, &group, bh, &GroupVariant::Simes(None), reps)?,
        check_group_superuniformity(
            &ind,
            &group,
            ThresholdFn::Constant(0.1),
            &GroupVariant::NestedSimes(vec![vec![0, 1], vec![2, 3, 4], vec![5]]),
            reps,
        )?,
        // members come from different duplicate blocks, so Fisher is valid
        // for the group while the threshold sees the full dependence
        check_group_superuniformity(
            &dup,
            &[0, 2, 4, 6],
            ThresholdFn::BhCount { alpha: 0.2 },
            &GroupVariant::ReshapedFisher {
                c: 0.2 / 8.0,
                beta: ReshapeSpec::by(8),
            },
            reps,
        )?,
    ])
}

fn inverse_binomial_battery(reps: usize, seed: u64) -> Result<Vec<InverseBinomialReport>> {
    let cases: Vec<(Vec<f64>, f64)> = vec![
        (vec![1.0], 0.5),
        (vec![0.5, 0.5], 0.5),
        (vec![0.3, 0.9, 1.0], 1.0),
        (vec![1.0; 10], 0.2),
        ((0..20).map(|i| (i as f64 + 1.0) / 20.0).collect(), 0.35),
        (vec![0.0, 0.0], 0.7),
    ];
    cases
        .iter()
        .enumerate()
        .map(|(j, (a, b))| check_inverse_binomial(a, *b, reps, seed.wrapping_add(20 + j as u64)))
        .collect()
}

fn simes_battery(reps: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let ind = SimModel::all_null(10, SimDependence::Independent, seed.wrapping_add(30));
    let prds = SimModel::all_null(10, SimDependence::GaussianEquicorrelated(0.5), seed.wrapping_add(31));
    let dup = SimModel::all_null(10, SimDependence::DuplicateBlocks(2), seed.wrapping_add(32));
    let w = [2.0, 1.5, 1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.75, 0.75];
    Ok(vec![
        check_simes_uniform(&ind, 10, None, reps)?,
        check_simes_uniform(&ind, 10, Some(&w), reps)?,
        check_simes_dominance(&prds, 10, &ReshapeSpec::Identity, reps)?,
        check_simes_dominance(&dup, 10, &ReshapeSpec::by(10), reps)?,
    ])
}

/// Runs a battery and returns one report per check. Inverse binomial checks
/// fold the exact-enumeration verdict into `passed`.
pub fn run_suite(suite: Suite, reps: usize, seed: u64) -> Result<Vec<CheckReport>> {
    check_reps(reps)?;
    let mut out = Vec::new();
    if matches!(suite, Suite::Superuniformity | Suite::All) {
        out.extend(superuniformity_battery(reps, seed)?);
    }
    if matches!(suite, Suite::Group | Suite::All) {
        out.extend(group_battery(reps, seed)?);
    }
    if matches!(suite, Suite::InverseBinomial | Suite::All) {
        for r in inverse_binomial_battery(reps, seed)? {
            let passed = r.passed();
            let mut report = r.monte_carlo;
            if let Some(e) = r.exact {
                report.name = format!("{} exact={e:.6}", report.name);
            }
            report.passed = passed;
            out.push(report);
        }
    }
    if matches!(suite, Suite::SimesDist | Suite::All) {
        out.extend(simes_battery(reps, seed)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_binomial_examples() {
        assert_eq!(inverse_binomial_exact(&[1.0], 0.5).unwrap(), 0.75);
        let e = inverse_binomial_exact(&[0.5, 0.5], 0.5).unwrap();
        assert!((e - 0.25 * (1.0 + 2.0 / 1.5 + 0.5)).abs() < 1e-15);
        let (lo, hi) = inverse_binomial_bounds(&[0.5, 0.5], 0.5);
        assert!((lo - 1.0 / 1.5).abs() < 1e-15 && hi == 1.0);
        // b = 1 is degenerate and both bounds are attained exactly
        let a = [0.3, 0.9, 1.0];
        let (lo, hi) = inverse_binomial_bounds(&a, 1.0);
        let e = inverse_binomial_exact(&a, 1.0).unwrap();
        assert_eq!((lo, hi), (e, e));
    }

    #[test]
    fn constant_threshold_is_exact() {
        let model = SimModel::all_null(3, SimDependence::Independent, 5);
        let r = check_superuniformity(&model, 0, ThresholdFn::Constant(0.3), Mode::Eq, 20_000).unwrap();
        assert!(r.passed, "{r}");
    }

    #[test]
    fn bh_count_matches_reference() {
        let p = [0.01, 0.02, 0.03, 0.9];
        assert_eq!(bh_count(&p, 0.1), super::super::reference::bh(&p, 0.1).len());
    }

    #[test]
    fn suites_parse() {
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert_eq!("simes-dist".parse::<Suite>().unwrap(), Suite::SimesDist);
        assert!("lemma4".parse::<Suite>().is_err());
    }

    #[test]
    fn batteries_pass_at_reduced_reps() {
        for r in run_suite(Suite::All, 20_000, 17).unwrap() {
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn rejects_low_reps_and_non_null() {
        let model = mixed(4, &[1], SimDependence::Independent, 0);
        assert!(check_superuniformity(&model, 0, ThresholdFn::Constant(0.1), Mode::Leq, 10).is_err());
        assert!(check_superuniformity(&model, 1, ThresholdFn::Constant(0.1), Mode::Leq, 1000).is_err());
    }
}
