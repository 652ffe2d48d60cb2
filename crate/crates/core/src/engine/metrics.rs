//! Realized error and power per layer, and internal consistency checks.

use crate::error::Violation;
use crate::model::{dotfrac, Dotfraction, IcMode, Layer, Problem, RejectionResult};

/// Which groups of each layer are null.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub null_groups: Vec<Vec<bool>>,
}

/// A group is null when every member hypothesis is null.
pub fn null_groups(layer: &Layer, null_hypotheses: &[bool]) -> Vec<bool> {
    layer
        .groups
        .iter()
        .map(|members| members.iter().all(|&i| null_hypotheses[i]))
        .collect()
}

impl Truth {
    pub fn from_null_hypotheses(problem: &Problem, null_hypotheses: &[bool]) -> Self {
        Self {
            null_groups: problem
                .layers
                .iter()
                .map(|l| null_groups(l, null_hypotheses))
                .collect(),
        }
    }
}

fn rejected_mask(layer: &Layer, rejected: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; layer.groups.len()];
    for &g in rejected {
        mask[g] = true;
    }
    mask
}

/// Penalty-weighted false discovery proportion of layer `m`.
pub fn fdp_layer(problem: &Problem, result: &RejectionResult, truth: &Truth, m: usize) -> Dotfraction {
    let layer = &problem.layers[m];
    let rejected = rejected_mask(layer, &result.per_layer[m]);
    let mut false_mass = 0.0;
    let mut total = 0.0;
    for ((&u, &r), &null) in layer.penalty_weights.iter().zip(&rejected).zip(&truth.null_groups[m]) {
        if r {
            total += u;
            if null {
                false_mass += u;
            }
        }
    }
    dotfrac(false_mass, total)
}

/// Penalty-weighted fraction of non-null groups of layer `m` that are rejected.
pub fn power_layer(problem: &Problem, result: &RejectionResult, truth: &Truth, m: usize) -> Dotfraction {
    let layer = &problem.layers[m];
    let rejected = rejected_mask(layer, &result.per_layer[m]);
    let mut hit = 0.0;
    let mut total = 0.0;
    for ((&u, &r), &null) in layer.penalty_weights.iter().zip(&rejected).zip(&truth.null_groups[m]) {
        if !null {
            total += u;
            if r {
                hit += u;
            }
        }
    }
    dotfrac(hit, total)
}

/// Checks that `result` obeys the internal consistency rule `mode`, and that
/// every rejected group contains a rejected hypothesis.
pub fn check_ic(problem: &Problem, result: &RejectionResult, mode: IcMode) -> Vec<Violation> {
    let n = problem.n();
    let mut out = Vec::new();
    if result.per_layer.len() != problem.layers.len() {
        out.push(Violation::problem(format!(
            "{} layer rejection sets for {} layers",
            result.per_layer.len(),
            problem.layers.len()
        )));
        return out;
    }
    let mut elementary = vec![false; n];
    for &i in &result.elementary {
        if i >= n {
            out.push(Violation::problem(format!("rejected hypothesis {i} out of range")));
            return out;
        }
        elementary[i] = true;
    }
    let mut masks = Vec::with_capacity(problem.layers.len());
    for (m, (layer, rejected)) in problem.layers.iter().zip(&result.per_layer).enumerate() {
        if let Some(&g) = rejected.iter().find(|&&g| g >= layer.groups.len()) {
            out.push(Violation::layer(m, format!("rejected group {g} out of range")));
            return out;
        }
        for &g in rejected {
            if !layer.groups[g].iter().any(|&i| elementary[i]) {
                out.push(Violation::group(m, g, "rejected group contains no rejected hypothesis"));
            }
        }
        masks.push(rejected_mask(layer, rejected));
    }
    let tables: Vec<_> = problem.layers.iter().map(|l| l.membership_table(n)).collect();
    for i in 0..n {
        let implied = tables.iter().zip(&masks).all(|(table, mask)| {
            let groups = &table[i];
            groups.is_empty()
                || match mode {
                    IcMode::Weak => groups.iter().any(|&g| mask[g]),
                    IcMode::Strong => groups.iter().all(|&g| mask[g]),
                }
        });
        if implied != elementary[i] {
            let what = if elementary[i] {
                "is rejected but the layer rejections do not support it"
            } else {
                "is not rejected although every layer supports it"
            };
            out.push(Violation::problem(format!("hypothesis {i} {what} ({mode:?} consistency)")));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{pfilter, EngineOptions};
    use crate::model::{KVector, Layer, PValues};

    fn result(elementary: Vec<usize>, per_layer: Vec<Vec<usize>>) -> RejectionResult {
        let m = per_layer.len();
        RejectionResult {
            elementary,
            per_layer,
            k_hat: KVector::zeros(m),
            pi_hat: vec![1.0; m],
            group_pvalues: vec![],
        }
    }

    fn overlap_problem() -> Problem {
        Problem::new(
            PValues::new(vec![0.01, 0.02, 0.5]).unwrap(),
            vec![Layer::new(vec![vec![0, 1], vec![1, 2]], 0.2), Layer::finest(3, 0.2)],
            IcMode::Weak,
        )
    }

    #[test]
    fn fdp_and_power_conventions() {
        let p = overlap_problem();
        let truth = Truth::from_null_hypotheses(&p, &[false, true, true]);
        let empty = result(vec![], vec![vec![], vec![]]);
        assert_eq!(fdp_layer(&p, &empty, &truth, 0), Dotfraction::Zero);
        assert_eq!(power_layer(&p, &empty, &truth, 1).value(), Some(0.0));
        let all_null = result(vec![1, 2], vec![vec![1], vec![1, 2]]);
        assert_eq!(fdp_layer(&p, &all_null, &truth, 1).value(), Some(1.0));
        let all_hit = result(vec![0], vec![vec![0], vec![0]]);
        assert_eq!(power_layer(&p, &all_hit, &truth, 1).value(), Some(1.0));
        assert_eq!(power_layer(&p, &all_hit, &truth, 0).value(), Some(1.0));
    }

    #[test]
    fn pfilter_output_is_consistent() {
        let p = overlap_problem();
        for mode in [IcMode::Weak, IcMode::Strong] {
            let r = pfilter(&p, &EngineOptions::default().with_ic(mode)).unwrap();
            assert!(check_ic(&p, &r, mode).is_empty());
        }
    }

    #[test]
    fn group_without_rejected_member_is_flagged() {
        let p = overlap_problem();
        let r = result(vec![0], vec![vec![0, 1], vec![0]]);
        let v = check_ic(&p, &r, IcMode::Weak);
        assert!(v.iter().any(|v| v.layer == Some(0) && v.group == Some(1)));
    }

    #[test]
    fn weak_violation_is_flagged() {
        let p = overlap_problem();
        // index 2 is rejected but its only finest-layer group is not
        let r = result(vec![1, 2], vec![vec![0, 1], vec![1]]);
        let v = check_ic(&p, &r, IcMode::Weak);
        assert!(v.iter().any(|v| v.message.contains("hypothesis 2")));
    }
}
