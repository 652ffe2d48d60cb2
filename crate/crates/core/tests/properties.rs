use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pfilter::cli::{parse_problem, write_problem};
use pfilter::engine::check_ic;
use pfilter::montecarlo::instances::{random_problem, InstanceConfig};
use pfilter::{pfilter, EngineOptions, Problem, Selector};

fn instance(seed: u64) -> Problem {
    random_problem(&mut ChaCha8Rng::seed_from_u64(seed), &InstanceConfig::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn generated_instances_validate(seed in any::<u64>()) {
        let p = instance(seed);
        prop_assert!(p.validate().is_empty());
    }

    #[test]
    fn membership_is_empty_exactly_on_leftovers(seed in any::<u64>()) {
        let p = instance(seed);
        for layer in &p.layers {
            let leftover = layer.leftover(p.n());
            for i in 0..p.n() {
                let groups = layer.group_membership(i, p.n()).unwrap();
                prop_assert_eq!(groups.is_empty(), leftover.contains(&i));
            }
        }
    }

    #[test]
    fn result_is_consistent_and_feasible(seed in any::<u64>()) {
        let p = instance(seed);
        let r = pfilter(&p, &EngineOptions::default()).unwrap();
        prop_assert!(check_ic(&p, &r, p.ic_mode).is_empty());
        let selector = Selector::new(&p, &EngineOptions::default()).unwrap();
        prop_assert!(selector.is_feasible(&r.k_hat).unwrap());
        for (m, &k) in r.k_hat.0.iter().enumerate() {
            prop_assert!(k >= 0.0 && k <= p.layers[m].groups.len() as f64);
        }
    }

    #[test]
    fn result_is_a_coordinatewise_fixed_point(seed in any::<u64>()) {
        // with the other coordinates at k̂, the largest feasible value of
        // each coordinate is k̂ itself
        let p = instance(seed);
        let r = pfilter(&p, &EngineOptions::default()).unwrap();
        let selector = Selector::new(&p, &EngineOptions::default()).unwrap();
        for m in 0..p.num_layers() {
            let k = selector.inner_max(m, &r.k_hat).unwrap();
            prop_assert!((k - r.k_hat.0[m]).abs() <= 1e-9, "layer {}: {} vs {}", m, k, r.k_hat.0[m]);
        }
    }

    #[test]
    fn canonical_serialization_round_trips(seed in any::<u64>()) {
        let p = instance(seed);
        let text = write_problem(&p).unwrap();
        prop_assert_eq!(&parse_problem(&text).unwrap(), &p);
    }

    #[test]
    fn strong_never_rejects_more_than_weak(seed in any::<u64>()) {
        let p = instance(seed);
        let weak = pfilter(&p, &EngineOptions::default().with_ic(pfilter::IcMode::Weak)).unwrap();
        let strong = pfilter(&p, &EngineOptions::default().with_ic(pfilter::IcMode::Strong)).unwrap();
        for i in &strong.elementary {
            prop_assert!(weak.elementary.contains(i));
        }
    }
}
