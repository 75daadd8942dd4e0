//! Brute-force reference computations over hidden-state paths.
//!
//! Nothing here goes through the library's forward recursions or planner;
//! the library is only used for its data types.

#![allow(dead_code)]

use psrlab::{Reward, TabularPomdp};

/// `P(o_1..o_n | a_1..a_n)` for steps starting at step 1, summed over every
/// hidden-state path.
pub fn path_prob(env: &TabularPomdp, steps: &[(usize, usize)]) -> f64 {
    fn go(env: &TabularPomdp, steps: &[(usize, usize)], t: usize, s: usize) -> f64 {
        if t == steps.len() {
            return 1.0;
        }
        let (o, a) = steps[t];
        let emit = env.emission[t][s][o];
        if emit == 0.0 {
            return 0.0;
        }
        if t + 1 == steps.len() {
            return emit;
        }
        let mut total = 0.0;
        for next in 0..env.n_states {
            let p = env.transition[t][a][s][next];
            if p > 0.0 {
                total += p * go(env, steps, t + 1, next);
            }
        }
        emit * total
    }
    go(env, steps, 0, env.initial_state)
}

pub fn n_pairs(env: &TabularPomdp) -> usize {
    env.n_obs * env.n_actions
}

/// Sequence with lexicographic index `index` among sequences of `len` pairs,
/// the first pair most significant; pair index is `o * A + a`.
pub fn decode(env: &TabularPomdp, len: usize, mut index: usize) -> Vec<(usize, usize)> {
    let p = n_pairs(env);
    let mut out = vec![(0, 0); len];
    for t in (0..len).rev() {
        let pair = index % p;
        index /= p;
        out[t] = (pair / env.n_actions, pair % env.n_actions);
    }
    out
}

pub fn encode(env: &TabularPomdp, steps: &[(usize, usize)]) -> usize {
    steps.iter().fold(0, |acc, &(o, a)| acc * n_pairs(env) + o * env.n_actions + a)
}

pub fn all_sequences(env: &TabularPomdp, len: usize) -> Vec<Vec<(usize, usize)>> {
    (0..n_pairs(env).pow(len as u32)).map(|i| decode(env, len, i)).collect()
}

/// Full-trajectory probabilities in leaf order.
pub fn leaf_probs(env: &TabularPomdp) -> Vec<f64> {
    all_sequences(env, env.horizon).iter().map(|s| path_prob(env, s)).collect()
}

pub fn reward_leaves(env: &TabularPomdp) -> Vec<f64> {
    match &env.reward {
        Reward::PerStepTable { table } => all_sequences(env, env.horizon)
            .iter()
            .map(|s| s.iter().enumerate().map(|(t, &(o, a))| table[t][o][a]).sum())
            .collect(),
        Reward::TrajectoryFn { values } => values.clone(),
    }
}

/// `max_π Σ_τ π(τ) leaves[τ]` over deterministic history-dependent policies.
pub fn best_value(env: &TabularPomdp, leaves: &[f64]) -> f64 {
    fn go(env: &TabularPomdp, leaves: &[f64], prefix: usize, depth: usize) -> f64 {
        if depth == env.horizon {
            return leaves[prefix];
        }
        let mut total = 0.0;
        for o in 0..env.n_obs {
            let mut best = f64::NEG_INFINITY;
            for a in 0..env.n_actions {
                let child = prefix * n_pairs(env) + o * env.n_actions + a;
                best = best.max(go(env, leaves, child, depth + 1));
            }
            total += best;
        }
        total
    }
    go(env, leaves, 0, 0)
}

/// `Σ_τ π(τ) leaves[τ]` for a deterministic rule `act(step, history, obs)`.
pub fn policy_value<F>(env: &TabularPomdp, leaves: &[f64], act: F) -> f64
where
    F: Fn(usize, &[(usize, usize)], usize) -> usize,
{
    all_sequences(env, env.horizon)
        .iter()
        .enumerate()
        .filter(|(_, seq)| seq.iter().enumerate().all(|(t, &(o, a))| act(t, &seq[..t], o) == a))
        .map(|(i, _)| leaves[i])
        .sum()
}

/// Action rule of a dense decision table `actions[t][history_index * O + o]`.
pub fn table_rule<'a>(
    env: &'a TabularPomdp,
    actions: &'a [Vec<usize>],
) -> impl Fn(usize, &[(usize, usize)], usize) -> usize + 'a {
    move |t, history, o| actions[t][encode(env, history) * env.n_obs + o]
}
