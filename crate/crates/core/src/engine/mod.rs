//! The multi-layer selection procedure.
//!
//! For a vector `k` of weighted discovery counts each layer first screens its
//! groups against thresholds `min(w_g α β(k) / (π̂ G), λ)`. Elementary
//! rejections are the hypotheses that survive the screening in every layer
//! under the configured internal consistency rule, and a layer rejects the
//! screened groups that still contain an elementary rejection. A vector `k`
//! is feasible when every layer rejects at least `k^(m)` penalty weight. The
//! procedure returns the componentwise maximum feasible vector, found by
//! cyclic coordinate updates.

mod metrics;
mod oracle;

pub use metrics::{check_ic, fdp_layer, null_groups, power_layer, Truth};
pub use oracle::{oracle_max_corner, oracle_max_corner_with_limit, OracleReport, DEFAULT_LATTICE_LIMIT};

use crate::adapt::pi_hat;
use crate::combine::group_pvalues;
use crate::error::{Error, Result};
use crate::model::{IcMode, KVector, Problem, RejectionResult};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    /// Overrides the problem's internal consistency mode when set.
    pub ic_mode: Option<IcMode>,
    /// Defaults to `10 · M · max_m G^(m)`.
    pub max_cycles: Option<usize>,
    pub tolerance: f64,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            ic_mode: None,
            max_cycles: None,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl EngineOptions {
    pub fn with_ic(mut self, mode: IcMode) -> Self {
        self.ic_mode = Some(mode);
        self
    }
}

/// Precomputed state for evaluating selections at arbitrary `k`.
#[derive(Debug, Clone)]
pub struct Selector<'a> {
    problem: &'a Problem,
    ic_mode: IcMode,
    tolerance: f64,
    group_p: Vec<Vec<f64>>,
    pi_hat: Vec<f64>,
    /// `membership[m][i]` lists the groups of layer `m` containing `i`.
    membership: Vec<Vec<Vec<usize>>>,
}

impl<'a> Selector<'a> {
    /// Validates the problem and computes group p-values and `π̂` per layer.
    pub fn new(problem: &'a Problem, options: &EngineOptions) -> Result<Self> {
        problem.ensure_valid()?;
        if !(options.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                options.tolerance
            )));
        }
        let n = problem.n();
        let group_p = (0..problem.layers.len())
            .map(|m| group_pvalues(problem, m))
            .collect::<Result<Vec<_>>>()?;
        let pi_hat = problem
            .layers
            .iter()
            .zip(&group_p)
            .map(|(layer, gp)| pi_hat(layer, gp))
            .collect::<Result<Vec<_>>>()?;
        let membership = problem.layers.iter().map(|l| l.membership_table(n)).collect();
        Ok(Self {
            problem,
            ic_mode: options.ic_mode.unwrap_or(problem.ic_mode),
            tolerance: options.tolerance,
            group_p,
            pi_hat,
            membership,
        })
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    pub fn ic_mode(&self) -> IcMode {
        self.ic_mode
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn group_pvalues(&self) -> &[Vec<f64>] {
        &self.group_p
    }

    pub fn pi_hat(&self) -> &[f64] {
        &self.pi_hat
    }

    /// Screening threshold of group `g` in layer `m` at count `k`.
    pub fn threshold(&self, m: usize, g: usize, k: f64) -> f64 {
        let layer = &self.problem.layers[m];
        let scaled = layer.prior_weights[g] * layer.alpha * layer.reshape.apply(k)
            / (self.pi_hat[m] * layer.groups.len() as f64);
        scaled.min(layer.lambda)
    }

    pub(crate) fn screens(&self, m: usize, g: usize, k: f64) -> bool {
        self.group_p[m][g] <= self.threshold(m, g, k)
    }

    fn screen_layer(&self, m: usize, k: f64) -> Vec<bool> {
        (0..self.problem.layers[m].groups.len())
            .map(|g| self.screens(m, g, k))
            .collect()
    }

    fn screen_all(&self, k: &[f64]) -> Vec<Vec<bool>> {
        k.iter().enumerate().map(|(m, &km)| self.screen_layer(m, km)).collect()
    }

    fn elementary_mask(&self, init: &[Vec<bool>]) -> Vec<bool> {
        (0..self.problem.n())
            .map(|i| {
                self.membership.iter().zip(init).all(|(table, sel)| {
                    let groups = &table[i];
                    groups.is_empty()
                        || match self.ic_mode {
                            IcMode::Weak => groups.iter().any(|&g| sel[g]),
                            IcMode::Strong => groups.iter().all(|&g| sel[g]),
                        }
                })
            })
            .collect()
    }

    fn rejection_mask(&self, m: usize, elementary: &[bool], init: &[bool]) -> Vec<bool> {
        self.problem.layers[m]
            .groups
            .iter()
            .zip(init)
            .map(|(members, &screened)| screened && members.iter().any(|&i| elementary[i]))
            .collect()
    }

    /// Penalty weight of the rejected groups of layer `m`, summed in group order.
    fn rejected_mass(&self, m: usize, rejected: &[bool]) -> f64 {
        self.problem.layers[m]
            .penalty_weights
            .iter()
            .zip(rejected)
            .filter(|(_, &r)| r)
            .map(|(u, _)| u)
            .sum()
    }

    /// Rejected penalty mass of every layer at `k`.
    pub(crate) fn masses(&self, k: &[f64]) -> Vec<f64> {
        let init = self.screen_all(k);
        let elementary = self.elementary_mask(&init);
        (0..k.len())
            .map(|m| self.rejected_mass(m, &self.rejection_mask(m, &elementary, &init[m])))
            .collect()
    }

    /// `S_init^(m)(k)` for every layer.
    pub fn initial_selection(&self, k: &KVector) -> Result<Vec<Vec<usize>>> {
        k.check_bounds(self.problem)?;
        Ok(self.screen_all(k.as_slice()).iter().map(|s| indices(s)).collect())
    }

    /// Elementary rejections implied by per-layer screened groups.
    pub fn elementary_set(&self, init: &[Vec<usize>]) -> Vec<usize> {
        indices(&self.elementary_mask(&self.to_masks(init)))
    }

    /// `Ŝ^(m)`: screened groups that intersect the elementary rejections.
    pub fn layer_rejections(&self, elementary: &[usize], init: &[Vec<usize>]) -> Vec<Vec<usize>> {
        let mut mask = vec![false; self.problem.n()];
        for &i in elementary {
            mask[i] = true;
        }
        let masks = self.to_masks(init);
        (0..masks.len())
            .map(|m| indices(&self.rejection_mask(m, &mask, &masks[m])))
            .collect()
    }

    fn to_masks(&self, sets: &[Vec<usize>]) -> Vec<Vec<bool>> {
        self.problem
            .layers
            .iter()
            .zip(sets)
            .map(|(layer, set)| {
                let mut mask = vec![false; layer.groups.len()];
                for &g in set {
                    mask[g] = true;
                }
                mask
            })
            .collect()
    }

    /// Whether every layer rejects at least `k^(m)` penalty weight.
    pub fn is_feasible(&self, k: &KVector) -> Result<bool> {
        k.check_bounds(self.problem)?;
        Ok(self.feasible_raw(k.as_slice()))
    }

    pub(crate) fn feasible_raw(&self, k: &[f64]) -> bool {
        self.masses(k)
            .iter()
            .zip(k)
            .all(|(&mass, &km)| mass >= km - self.tolerance)
    }

    /// Largest `k' ∈ [0, G^(m)]` such that layer `m` rejects at least `k'`
    /// penalty weight when its coordinate of `k` is replaced by `k'`.
    pub fn inner_max(&self, m: usize, k: &KVector) -> Result<f64> {
        k.check_bounds(self.problem)?;
        if m >= k.len() {
            return Err(Error::InvalidArgument(format!("layer {m} out of range")));
        }
        Ok(self.inner_max_raw(m, k.as_slice()))
    }

    fn inner_max_raw(&self, m: usize, k: &[f64]) -> f64 {
        let others: Vec<Vec<bool>> = k
            .iter()
            .enumerate()
            .map(|(l, &kl)| if l == m { Vec::new() } else { self.screen_layer(l, kl) })
            .collect();
        let mut init = others;
        // Descend from the top: each iterate bounds every feasible k' from
        // above because the rejected mass is nondecreasing in k'.
        let mut current = self.problem.layers[m].groups.len() as f64;
        loop {
            init[m] = self.screen_layer(m, current);
            let elementary = self.elementary_mask(&init);
            let mass = self.rejected_mass(m, &self.rejection_mask(m, &elementary, &init[m]));
            if mass >= current - self.tolerance {
                return current;
            }
            current = mass;
        }
    }

    fn result_at(&self, k: Vec<f64>) -> RejectionResult {
        let init = self.screen_all(&k);
        let elementary = self.elementary_mask(&init);
        let per_layer = (0..k.len())
            .map(|m| indices(&self.rejection_mask(m, &elementary, &init[m])))
            .collect();
        RejectionResult {
            elementary: indices(&elementary),
            per_layer,
            k_hat: KVector(k),
            pi_hat: self.pi_hat.clone(),
            group_pvalues: self.group_p.clone(),
        }
    }
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i)
        .collect()
}

/// Runs the cyclic coordinate search and returns the rejections at the
/// maximum feasible corner.
pub fn pfilter(problem: &Problem, options: &EngineOptions) -> Result<RejectionResult> {
    let selector = Selector::new(problem, options)?;
    let num_layers = problem.layers.len();
    let max_groups = problem.layers.iter().map(|l| l.groups.len()).max().unwrap_or(1);
    let budget = options
        .max_cycles
        .unwrap_or(10 * num_layers * max_groups)
        .max(2);
    let mut k = KVector::top(problem).0;
    for _ in 0..budget {
        let mut changed = false;
        for m in 0..num_layers {
            let next = selector.inner_max_raw(m, &k);
            if (next - k[m]).abs() > selector.tolerance {
                changed = true;
            }
            k[m] = next;
        }
        if !changed {
            return Ok(selector.result_at(k));
        }
    }
    Err(Error::CycleBudget { budget, last_k: k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combine::simes;
    use crate::model::{Layer, PValues};

    fn problem(p: &[f64], layers: Vec<Layer>, ic: IcMode) -> Problem {
        Problem::new(PValues::new(p.to_vec()).unwrap(), layers, ic)
    }

    fn bh_example() -> Problem {
        problem(&[0.01, 0.02, 0.03, 0.9], vec![Layer::finest(4, 0.1)], IcMode::Weak)
    }

    #[test]
    fn zero_count_screens_nothing_positive() {
        let p = bh_example();
        let s = Selector::new(&p, &EngineOptions::default()).unwrap();
        assert!(s.initial_selection(&KVector::new(vec![0.0])).unwrap()[0].is_empty());
        let zero = problem(&[0.0, 0.5], vec![Layer::finest(2, 0.1)], IcMode::Weak);
        let s = Selector::new(&zero, &EngineOptions::default()).unwrap();
        assert_eq!(s.initial_selection(&KVector::new(vec![0.0])).unwrap()[0], vec![0]);
    }

    #[test]
    fn finest_threshold_is_alpha_k_over_g() {
        let p = problem(&[0.01, 0.05, 0.051, 0.9], vec![Layer::finest(4, 0.1)], IcMode::Weak);
        let s = Selector::new(&p, &EngineOptions::default()).unwrap();
        assert_eq!(s.initial_selection(&KVector::new(vec![2.0])).unwrap()[0], vec![0, 1]);
        assert_eq!(s.threshold(0, 0, 4.0), 0.1);
    }

    #[test]
    fn weak_and_strong_on_overlapping_groups() {
        let layers = vec![Layer::new(vec![vec![0, 1], vec![1, 2]], 0.5), Layer::finest(3, 0.5)];
        let p = problem(&[0.1, 0.1, 0.1], layers.clone(), IcMode::Weak);
        let init = vec![vec![0], vec![0, 1, 2]];
        let weak = Selector::new(&p, &EngineOptions::default()).unwrap();
        assert_eq!(weak.elementary_set(&init), vec![0, 1]);
        let strong = Selector::new(&p, &EngineOptions::default().with_ic(IcMode::Strong)).unwrap();
        assert_eq!(strong.elementary_set(&init), vec![0]);

        let rej = weak.layer_rejections(&[0, 1], &init);
        assert_eq!(rej[0], vec![0]);
        assert_eq!(rej[1], vec![0, 1]);
        let rej = weak.layer_rejections(&[2], &[vec![0], vec![2]]);
        assert!(rej[0].is_empty());
        assert!(weak.layer_rejections(&[], &init).iter().all(|r| r.is_empty()));
    }

    #[test]
    fn disjoint_groups_make_modes_coincide() {
        let layers = vec![Layer::new(vec![vec![0, 1], vec![2, 3]], 0.3), Layer::finest(4, 0.3)];
        let p = problem(&[0.01, 0.2, 0.03, 0.6], layers, IcMode::Weak);
        let weak = pfilter(&p, &EngineOptions::default()).unwrap();
        let strong = pfilter(&p, &EngineOptions::default().with_ic(IcMode::Strong)).unwrap();
        assert_eq!(weak, strong);
    }

    #[test]
    fn bh_feasibility_and_inner_max() {
        let p = bh_example();
        let s = Selector::new(&p, &EngineOptions::default()).unwrap();
        assert!(s.is_feasible(&KVector::new(vec![0.0])).unwrap());
        assert!(s.is_feasible(&KVector::new(vec![3.0])).unwrap());
        assert!(!s.is_feasible(&KVector::new(vec![4.0])).unwrap());
        assert_eq!(s.inner_max(0, &KVector::new(vec![4.0])).unwrap(), 3.0);
    }

    #[test]
    fn inner_max_is_zero_without_signal() {
        let p = problem(&[0.9, 0.95, 1.0], vec![Layer::finest(3, 0.1)], IcMode::Weak);
        let s = Selector::new(&p, &EngineOptions::default()).unwrap();
        assert_eq!(s.inner_max(0, &KVector::new(vec![3.0])).unwrap(), 0.0);
    }

    #[test]
    fn inner_max_with_fractional_penalties() {
        let layer = Layer::new(vec![vec![0], vec![1]], 0.4)
            .with_weights(vec![1.0, 1.0], vec![0.5, 1.5])
            .with_combiner(crate::combine::CombinerSpec::External(vec![0.01, 0.9]));
        let p = problem(&[0.01, 0.9], vec![layer], IcMode::Weak);
        let s = Selector::new(&p, &EngineOptions::default()).unwrap();
        assert_eq!(s.inner_max(0, &KVector::new(vec![2.0])).unwrap(), 0.5);
    }

    #[test]
    fn pfilter_recovers_bh_example() {
        let r = pfilter(&bh_example(), &EngineOptions::default()).unwrap();
        assert_eq!(r.elementary, vec![0, 1, 2]);
        assert_eq!(r.k_hat.0, vec![3.0]);
        assert_eq!(r.per_layer[0], vec![0, 1, 2]);
        assert_eq!(r.pi_hat, vec![1.0]);
    }

    #[test]
    fn coarsest_layer_is_simes_test() {
        let pv = [0.012, 0.3, 0.04, 0.7, 0.2];
        for alpha in [0.03, 0.05, 0.06, 0.1] {
            let p = problem(&pv, vec![Layer::coarsest(5, alpha)], IcMode::Weak);
            let r = pfilter(&p, &EngineOptions::default()).unwrap();
            assert_eq!(r.per_layer[0].len() == 1, simes(&pv).unwrap() <= alpha, "alpha {alpha}");
        }
    }

    #[test]
    fn all_ones_reject_nothing() {
        let layers = vec![Layer::finest(4, 0.2), Layer::new(vec![vec![0, 1], vec![2, 3]], 0.2)];
        let r = pfilter(&problem(&[1.0; 4], layers, IcMode::Weak), &EngineOptions::default()).unwrap();
        assert!(r.elementary.is_empty());
        assert_eq!(r.k_hat.0, vec![0.0, 0.0]);
    }

    #[test]
    fn invalid_problem_is_rejected() {
        let layer = Layer::new(vec![vec![0], vec![1]], 0.1).with_weights(vec![2.0, 2.0], vec![1.0, 1.0]);
        let p = problem(&[0.1, 0.2], vec![layer], IcMode::Weak);
        assert!(matches!(pfilter(&p, &EngineOptions::default()), Err(Error::Invalid(_))));
    }

    #[test]
    fn k_bounds_are_checked() {
        let p = bh_example();
        let s = Selector::new(&p, &EngineOptions::default()).unwrap();
        assert!(s.is_feasible(&KVector::new(vec![5.0])).is_err());
        assert!(s.is_feasible(&KVector::new(vec![1.0, 1.0])).is_err());
    }
}
