//! Reshaping functions `β(k) = ∫₀^k x dν(x)` that undercount rejections to
//! guard against arbitrary dependence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One point mass of a discrete reshaping measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReshapeSpec {
    Identity,
    /// `β(k) = k / H` with `H = Σ_{i ≤ domain_size} 1/i`.
    By { domain_size: usize, harmonic: f64 },
    /// Atoms sorted by location; masses sum to one.
    Measure(Vec<Atom>),
}

pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

impl ReshapeSpec {
    pub fn by(domain_size: usize) -> Self {
        ReshapeSpec::By {
            domain_size,
            harmonic: harmonic(domain_size),
        }
    }

    /// A discrete measure; atoms are sorted by location.
    pub fn measure(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let mut atoms: Vec<Atom> = atoms.into_iter().map(|(x, mass)| Atom { x, mass }).collect();
        atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
        let spec = ReshapeSpec::Measure(atoms);
        let v = spec.violations();
        if v.is_empty() {
            Ok(spec)
        } else {
            Err(Error::InvalidArgument(v.join("; ")))
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, ReshapeSpec::Identity)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            ReshapeSpec::Identity => {}
            ReshapeSpec::By {
                domain_size,
                harmonic: h,
            } => {
                if *domain_size == 0 {
                    out.push("BY domain size must be positive".to_string());
                } else if (h - harmonic(*domain_size)).abs() > 1e-12 * h.abs().max(1.0) {
                    out.push(format!("BY harmonic constant {h} does not match domain {domain_size}"));
                }
            }
            ReshapeSpec::Measure(atoms) => {
                if atoms.is_empty() {
                    out.push("measure has no atoms".to_string());
                }
                for (j, a) in atoms.iter().enumerate() {
                    if !(a.x > 0.0 && a.x.is_finite()) {
                        out.push(format!("atom {j} location {} is not positive", a.x));
                    }
                    if !(a.mass > 0.0 && a.mass <= 1.0) {
                        out.push(format!("atom {j} mass {} outside (0, 1]", a.mass));
                    }
                }
                if atoms.windows(2).any(|w| w[0].x > w[1].x) {
                    out.push("atoms are not sorted by location".to_string());
                }
                let total: f64 = atoms.iter().map(|a| a.mass).sum();
                if !atoms.is_empty() && (total - 1.0).abs() > 1e-9 {
                    out.push(format!("atom masses sum to {total}, not 1"));
                }
            }
        }
        out
    }

    /// `β(k)`; rejects negative `k`.
    pub fn eval(&self, k: f64) -> Result<f64> {
        if !(k >= 0.0) {
            return Err(Error::InvalidArgument(format!("reshape argument {k} is negative")));
        }
        Ok(self.apply(k))
    }

    /// `β(k)` for `k ≥ 0`, unchecked.
    pub(crate) fn apply(&self, k: f64) -> f64 {
        match self {
            ReshapeSpec::Identity => k,
            ReshapeSpec::By { harmonic, .. } => k / harmonic,
            ReshapeSpec::Measure(atoms) => atoms
                .iter()
                .take_while(|a| a.x <= k)
                .map(|a| a.x * a.mass)
                .sum(),
        }
    }

    /// Smallest `k ∈ [0, upper]` with `β(k) ≥ t`, or `+∞` if none exists.
    pub fn inverse(&self, t: f64, upper: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k = match self {
            ReshapeSpec::Identity => t,
            ReshapeSpec::By { harmonic, .. } => {
                let mut k = t * harmonic;
                // Rounding can leave k / H a hair below t.
                while k / harmonic < t {
                    k = k.next_up();
                }
                k
            }
            ReshapeSpec::Measure(atoms) => {
                let mut acc = 0.0;
                let mut found = f64::INFINITY;
                for a in atoms {
                    acc += a.x * a.mass;
                    if acc >= t {
                        found = a.x;
                        break;
                    }
                }
                found
            }
        };
        if k <= upper {
            k
        } else {
            f64::INFINITY
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_atoms() -> ReshapeSpec {
        ReshapeSpec::measure(vec![(1.0, 0.5), (2.0, 0.5)]).unwrap()
    }

    #[test]
    fn identity_eval_and_inverse() {
        assert_eq!(ReshapeSpec::Identity.eval(3.5).unwrap(), 3.5);
        assert_eq!(ReshapeSpec::Identity.inverse(0.3, 10.0), 0.3);
    }

    #[test]
    fn by_eval_matches_harmonic_constant() {
        // H_4 = 25/12, so β(2) = 24/25.
        let by = ReshapeSpec::by(4);
        assert!((by.eval(2.0).unwrap() - 0.96).abs() < 1e-15);
        let k = by.inverse(0.96, 4.0);
        assert!((k - 2.0).abs() < 1e-12);
        assert!(by.eval(k).unwrap() >= 0.96);
    }

    #[test]
    fn discrete_measure_is_truncated_first_moment() {
        let spec = two_atoms();
        assert_eq!(spec.eval(1.5).unwrap(), 0.5);
        assert_eq!(spec.eval(2.0).unwrap(), 1.5);
        assert_eq!(spec.eval(0.99).unwrap(), 0.0);
        assert_eq!(spec.inverse(0.6, 4.0), 2.0);
        assert_eq!(spec.inverse(0.5, 4.0), 1.0);
        assert_eq!(spec.inverse(1.6, 4.0), f64::INFINITY);
    }

    #[test]
    fn single_unit_atom_is_bonferroni_like() {
        let spec = ReshapeSpec::measure(vec![(1.0, 1.0)]).unwrap();
        for k in 1..6 {
            assert_eq!(spec.eval(k as f64).unwrap(), 1.0);
        }
        assert_eq!(spec.eval(0.999).unwrap(), 0.0);
        assert_eq!(spec.eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn inverse_respects_domain() {
        assert_eq!(ReshapeSpec::Identity.inverse(5.0, 4.0), f64::INFINITY);
        assert_eq!(ReshapeSpec::by(4).inverse(0.0, 4.0), 0.0);
    }

    #[test]
    fn negative_argument_is_rejected() {
        assert!(ReshapeSpec::Identity.eval(-1.0).is_err());
    }

    #[test]
    fn invalid_measures_are_rejected() {
        assert!(ReshapeSpec::measure(vec![(1.0, 0.5)]).is_err());
        assert!(ReshapeSpec::measure(vec![(0.0, 1.0)]).is_err());
        assert!(ReshapeSpec::measure(vec![]).is_err());
    }

    fn arb_spec() -> impl Strategy<Value = ReshapeSpec> {
        prop_oneof![
            Just(ReshapeSpec::Identity),
            (1usize..60).prop_map(ReshapeSpec::by),
            proptest::collection::vec((0.05f64..20.0, 0.01f64..1.0), 1..6).prop_map(|atoms| {
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                ReshapeSpec::measure(atoms.into_iter().map(|(x, m)| (x, m / total)).collect())
                    .unwrap()
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn bounded_and_monotone(spec in arb_spec(), a in 0.0f64..50.0, b in 0.0f64..50.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let blo = spec.eval(lo).unwrap();
            let bhi = spec.eval(hi).unwrap();
            prop_assert!(blo >= 0.0);
            prop_assert!(blo <= lo * (1.0 + 1e-12));
            prop_assert!(blo <= bhi);
            prop_assert_eq!(spec.eval(0.0).unwrap(), 0.0);
        }

        #[test]
        fn galois_connection(spec in arb_spec(), t in 0.0f64..30.0) {
            let k = spec.inverse(t, 50.0);
            if k.is_finite() {
                prop_assert!(spec.eval(k).unwrap() >= t);
            }
        }
    }
}
