#[path = "support/oracle.rs"]
mod oracle;

use nalgebra::{DMatrix, DVector};
use psrlab::bonus::BonusEvaluator;
use psrlab::estimation::{DataEntry, DatasetFamily};
use psrlab::planning::plan_values;
use psrlab::pomdp::{random_revealing, reference_instance};
use psrlab::seeding::child_rng;
use psrlab::verify::builtin_small_environments;
use psrlab::{History, Policy, TabularPomdp};

fn max_prob_error(env: &TabularPomdp, model: &psrlab::PsrModel) -> f64 {
    let mut worst: f64 = 0.0;
    for h in 0..=env.horizon {
        for steps in oracle::all_sequences(env, h) {
            let p = model.seq_prob(&History::new(steps.clone())).unwrap();
            worst = worst.max((p - oracle::path_prob(env, &steps)).abs());
        }
    }
    worst
}

#[test]
fn psr_routes_reproduce_path_sums() {
    for (name, env) in builtin_small_environments().unwrap() {
        let generic = env.to_psr().unwrap();
        let err = max_prob_error(&env, &generic);
        assert!(err <= 1e-8, "{name} generic: {err:e}");
        assert!(generic.check_self_consistency() <= 1e-9, "{name}");
        if let Ok(decodable) = env.to_psr_decodable(1) {
            let err = max_prob_error(&env, &decodable);
            assert!(err <= 1e-8, "{name} decodable: {err:e}");
            assert!(decodable.check_self_consistency() <= 1e-9, "{name}");
        }
    }
}

#[test]
fn leaf_tables_match_path_sums() {
    for (name, env) in builtin_small_environments().unwrap() {
        let lib = env.leaf_probs().unwrap();
        let ours = oracle::leaf_probs(&env);
        for (a, b) in lib.iter().zip(&ours) {
            assert!((a - b).abs() < 1e-12, "{name}");
        }
        let lib = env.reward_leaves().unwrap();
        assert_eq!(lib.len(), ours.len());
        for (a, b) in lib.iter().zip(oracle::reward_leaves(&env)) {
            assert!((a - b).abs() < 1e-12, "{name}");
        }
    }
}

#[test]
fn prediction_feature_is_the_conditional_test_probability() {
    let env = reference_instance();
    for model in [env.to_psr().unwrap(), env.to_psr_decodable(1).unwrap()] {
        for h in 0..env.horizon {
            for steps in oracle::all_sequences(&env, h) {
                let p = oracle::path_prob(&env, &steps);
                if p <= 1e-12 {
                    continue;
                }
                let feature = model.prediction_feature(&History::new(steps.clone())).unwrap();
                for (l, test) in model.core_tests.tests[h].iter().enumerate() {
                    let mut joint = steps.clone();
                    joint.extend_from_slice(&test.steps);
                    let expected = oracle::path_prob(&env, &joint) / p;
                    assert!((feature[l] - expected).abs() <= 1e-9, "h={h} {steps:?} test {l}");
                }
            }
        }
    }
}

fn small_dataset(env: &TabularPomdp, seed: u64, n: usize) -> DatasetFamily {
    let space = env.space();
    let behavior = Policy::uniform(space.n_actions);
    let mut data = DatasetFamily::new(space);
    let id = data.register_policy(behavior.clone()).unwrap();
    let mut rng = child_rng(seed, "oracle-data", 0);
    for i in 0..n {
        let trajectory = env.sample_episode_with(&behavior, &mut rng);
        data.push(DataEntry {
            split_step: i % space.horizon,
            policy_id: id,
            trajectory,
        })
        .unwrap();
    }
    data
}

#[test]
fn bonus_matches_hand_built_grams() {
    let env = reference_instance();
    let model = env.to_psr().unwrap();
    let data = small_dataset(&env, 11, 9);
    let (lambda, alpha) = (0.7, 0.3);
    let eval = BonusEvaluator::build(&model, &data, lambda, alpha, None).unwrap();

    // Features from path sums: [ψ̄(τ_h)]_ℓ = P(τ_h, test_ℓ) / P(τ_h).
    let feature = |h: usize, prefix: &[(usize, usize)]| -> DVector<f64> {
        let tests = &model.core_tests.tests[h];
        let p = oracle::path_prob(&env, prefix);
        DVector::from_iterator(
            tests.len(),
            tests.iter().map(|t| {
                let mut joint = prefix.to_vec();
                joint.extend_from_slice(&t.steps);
                oracle::path_prob(&env, &joint) / p
            }),
        )
    };
    let grams: Vec<DMatrix<f64>> = (0..env.horizon)
        .map(|h| {
            let dim = model.core_tests.tests[h].len();
            let mut u = DMatrix::identity(dim, dim) * lambda;
            for e in data.bucket(h) {
                let x = feature(h, &e.trajectory.steps[..h]);
                u += &x * x.transpose();
            }
            u
        })
        .collect();
    let leaves = eval.bonus_leaves(&model).unwrap();
    for (i, steps) in oracle::all_sequences(&env, env.horizon).iter().enumerate() {
        if oracle::path_prob(&env, &steps[..env.horizon - 1]) <= 1e-12 {
            continue;
        }
        let total: f64 = (0..env.horizon)
            .map(|h| {
                let x = feature(h, &steps[..h]);
                x.dot(&(grams[h].clone().try_inverse().unwrap() * &x))
            })
            .sum();
        let expected = (alpha * total.sqrt()).min(1.0);
        assert!((leaves[i] - expected).abs() < 1e-10, "leaf {i}: {} vs {expected}", leaves[i]);
    }
}

fn table_from_code(env: &TabularPomdp, mut code: usize) -> Vec<Vec<usize>> {
    (0..env.horizon)
        .map(|t| {
            let slots = oracle::n_pairs(env).pow(t as u32) * env.n_obs;
            (0..slots)
                .map(|_| {
                    let a = code % env.n_actions;
                    code /= env.n_actions;
                    a
                })
                .collect()
        })
        .collect()
}

#[test]
fn planner_matches_exhaustive_policy_search() {
    for seed in 0..5u64 {
        let env = random_revealing(seed, 2, 2, 2, 2, 1.0).unwrap();
        let space = env.space();
        let model = env.to_psr().unwrap();
        let p = oracle::leaf_probs(&env);
        let r = oracle::reward_leaves(&env);
        let data = small_dataset(&env, seed, 6);
        let b = BonusEvaluator::build(&model, &data, 0.5, 0.7, None)
            .unwrap()
            .bonus_leaves(&model)
            .unwrap();
        let other = oracle::leaf_probs(&random_revealing(seed + 100, 2, 2, 2, 2, 1.0).unwrap());
        let sets: Vec<(&str, Vec<f64>)> = vec![
            ("R", p.iter().zip(&r).map(|(p, r)| p * r).collect()),
            ("b", p.iter().zip(&b).map(|(p, b)| p * b).collect()),
            ("R-b", p.iter().zip(r.iter().zip(&b)).map(|(p, (r, b))| p * (r - b)).collect()),
            ("|dp|", p.iter().zip(&other).map(|(a, b)| (a - b).abs()).collect()),
        ];
        let slots: u32 = (0..env.horizon).map(|t| (oracle::n_pairs(&env).pow(t as u32) * env.n_obs) as u32).sum();
        assert_eq!(slots, 10);
        for (label, leaves) in sets {
            let best = (0..env.n_actions.pow(slots))
                .map(|code| {
                    let table = table_from_code(&env, code);
                    oracle::policy_value(&env, &leaves, oracle::table_rule(&env, &table))
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((oracle::best_value(&env, &leaves) - best).abs() <= 1e-12);
            let plan = plan_values(&space, &leaves).unwrap();
            assert!((plan.value - best).abs() <= 1e-12, "seed {seed} {label}");
            let achieved = oracle::policy_value(&env, &leaves, oracle::table_rule(&env, &plan.policy.actions));
            assert!((achieved - best).abs() <= 1e-12, "seed {seed} {label} argmax");
        }
    }
}
