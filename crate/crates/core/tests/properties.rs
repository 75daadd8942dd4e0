#[path = "support/oracle.rs"]
mod oracle;

use nalgebra::DVector;
use proptest::prelude::*;
use psrlab::lemmas::{elliptical_potential_check, tv_hellinger_check};
use psrlab::numeric::{median, wilson_upper};
use psrlab::planning::plan_values;
use psrlab::pomdp::random_revealing;
use psrlab::seeding::{child_rng, child_seed};
use psrlab::{DeterministicTree, History, Policy};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn psr_probabilities_match_path_sums(seed in 0u64..1000, s in 2usize..4, o in 2usize..4) {
        let env = random_revealing(seed, s, o.max(s), 2, 2, 1.0).unwrap();
        let model = env.to_psr().unwrap();
        for steps in oracle::all_sequences(&env, 2) {
            let p = model.seq_prob(&History::new(steps.clone())).unwrap();
            prop_assert!((p - oracle::path_prob(&env, &steps)).abs() < 1e-8);
        }
    }

    #[test]
    fn every_policy_sees_a_distribution(seed in 0u64..1000, policy_seed in 0u64..1000) {
        let env = random_revealing(seed, 2, 3, 2, 2, 1.0).unwrap();
        let space = env.space();
        let model = env.to_psr_decodable(1).unwrap();
        let mut rng = child_rng(policy_seed, "policy", 0);
        let policy = Policy::DeterministicTree(DeterministicTree::random(space, &mut rng));
        let w = policy.leaf_weights(&space).unwrap();
        let total: f64 = w.iter().zip(model.leaf_probs().unwrap()).map(|(w, p)| w * p).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn planner_dominates_random_policies(seed in 0u64..1000, policy_seed in 0u64..1000) {
        let env = random_revealing(seed, 2, 3, 2, 2, 1.0).unwrap();
        let space = env.space();
        let leaves: Vec<f64> = oracle::leaf_probs(&env)
            .iter()
            .zip(oracle::reward_leaves(&env))
            .map(|(p, r)| p * r)
            .collect();
        let plan = plan_values(&space, &leaves).unwrap();
        let mut rng = child_rng(policy_seed, "policy", 0);
        let other = DeterministicTree::random(space, &mut rng);
        let v = oracle::policy_value(&env, &leaves, oracle::table_rule(&env, &other.actions));
        prop_assert!(v <= plan.value + 1e-12);
        prop_assert!((plan.value - oracle::best_value(&env, &leaves)).abs() < 1e-12);
    }

    #[test]
    fn tv_hellinger_holds_for_unnormalized_measures(
        p in prop::collection::vec(0.0f64..3.0, 1..10),
        q in prop::collection::vec(0.0f64..3.0, 1..10),
    ) {
        let n = p.len().min(q.len());
        prop_assert!(tv_hellinger_check(&p[..n], &q[..n]).holds());
    }

    #[test]
    fn elliptical_potential_holds_in_the_unit_ball(
        raw in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..60),
        lambda in 0.1f64..4.0,
        b in 0.1f64..3.0,
    ) {
        let xs: Vec<DVector<f64>> = raw
            .into_iter()
            .map(|v| {
                let v = DVector::from_vec(v);
                let n = v.norm();
                if n > 1.0 { v / n } else { v }
            })
            .collect();
        prop_assert!(elliptical_potential_check(&xs, lambda, b).holds());
    }

    #[test]
    fn wilson_upper_bounds_the_rate(p in 0.0f64..1.0, n in 1usize..5000) {
        let u = wilson_upper(p, n, 1.96);
        prop_assert!(u >= p - 1e-12 && u <= 1.0 + 1e-12);
        prop_assert!(wilson_upper(p, n * 4, 1.96) <= u + 1e-12);
    }

    #[test]
    fn median_ignores_order(mut v in prop::collection::vec(-5.0f64..5.0, 1..30), rot in 0usize..30) {
        let m = median(&v);
        let k = rot % v.len();
        v.rotate_left(k);
        prop_assert_eq!(median(&v), m);
    }

    #[test]
    fn child_seeds_are_stable_and_separate(master in any::<u64>(), i in 0u64..1000) {
        prop_assert_eq!(child_seed(master, "episode", i), child_seed(master, "episode", i));
        prop_assert_ne!(child_seed(master, "episode", i), child_seed(master, "split", i));
        prop_assert_ne!(child_seed(master, "episode", i), child_seed(master, "episode", i + 1));
    }
}
