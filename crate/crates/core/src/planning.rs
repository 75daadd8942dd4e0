//! Exact planning on the history tree.
//!
//! Every trajectory functional `Σ_τ π(τ) f(τ)` decomposes over the tree, so a
//! single backward pass serves reward maximization, optimistic and pessimistic
//! objectives, max-policy TV and the inner maximum of the conditioning
//! constant. Callers fold model probabilities into the leaf values.

use crate::error::{PsrError, Result};
use crate::numeric::compensated_sum;
use crate::policy::DeterministicTree;
use crate::space::{History, ObsActSpace};

#[derive(Debug, Clone)]
pub struct Plan {
    pub policy: DeterministicTree,
    pub value: f64,
}

/// Backward induction over a tree of `depth` (observation, action) steps.
///
/// `leaves` is indexed lexicographically over `(n_obs * n_actions)^depth`
/// sequences. Returns the argmax table `actions[t][node * n_obs + o]` and the
/// root value. Ties go to the lowest action.
pub fn backward_induction(
    n_obs: usize,
    n_actions: usize,
    depth: usize,
    leaves: &[f64],
) -> (Vec<Vec<usize>>, f64) {
    let pairs = n_obs * n_actions;
    assert_eq!(leaves.len(), pairs.pow(depth as u32), "leaf count mismatch");
    let mut actions = vec![Vec::new(); depth];
    let mut values = leaves.to_vec();
    for t in (0..depth).rev() {
        let nodes = values.len() / pairs;
        let mut level_actions = vec![0usize; nodes * n_obs];
        let mut next = vec![0.0; nodes];
        for node in 0..nodes {
            let base = node * pairs;
            let branch = (0..n_obs).map(|o| {
                let row = &values[base + o * n_actions..base + (o + 1) * n_actions];
                let mut best = 0;
                for a in 1..n_actions {
                    if row[a] > row[best] {
                        best = a;
                    }
                }
                level_actions[node * n_obs + o] = best;
                row[best]
            });
            next[node] = compensated_sum(branch.collect::<Vec<_>>());
        }
        actions[t] = level_actions;
        values = next;
    }
    (actions, values[0])
}

/// Maximizes `Σ_τ π(τ) leaves[τ]` over deterministic history-dependent policies.
pub fn plan_values(space: &ObsActSpace, leaves: &[f64]) -> Result<Plan> {
    space.check_enumerable()?;
    if leaves.len() != space.histories_at(space.horizon) {
        return Err(PsrError::Structural(format!(
            "{} leaf values for {} trajectories",
            leaves.len(),
            space.histories_at(space.horizon)
        )));
    }
    let (actions, value) = backward_induction(space.n_obs, space.n_actions, space.horizon, leaves);
    Ok(Plan {
        policy: DeterministicTree {
            space: *space,
            actions,
        },
        value,
    })
}

/// As [`plan_values`], evaluating `leaf_fn` on every full trajectory.
pub fn plan<F>(space: &ObsActSpace, leaf_fn: F) -> Result<Plan>
where
    F: Fn(&History) -> f64,
{
    space.check_enumerable()?;
    let leaves: Vec<f64> = History::all(space, space.horizon)
        .iter()
        .map(&leaf_fn)
        .collect();
    plan_values(space, &leaves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Policy;

    #[test]
    fn constant_leaves_count_observation_paths() {
        let space = ObsActSpace::new(2, 3, 1).unwrap();
        let plan = plan(&space, |_| 0.25).unwrap();
        assert!((plan.value - 0.5).abs() < 1e-15);
        assert!(plan.policy.actions[0].iter().all(|&a| a == 0));
    }

    #[test]
    fn bandit_argmax() {
        let space = ObsActSpace::new(1, 2, 1).unwrap();
        let rewards = [0.3, 0.7];
        let plan = plan(&space, |h| rewards[h.steps[0].1]).unwrap();
        assert_eq!(plan.policy.action(0, 0, 0), 1);
        assert!((plan.value - 0.7).abs() < 1e-15);
    }

    #[test]
    fn planned_value_matches_policy_weighting() {
        let space = ObsActSpace::new(2, 2, 3).unwrap();
        let leaves: Vec<f64> = (0..space.histories_at(3))
            .map(|i| ((i * 37 + 11) % 17) as f64 / 17.0)
            .collect();
        let plan = plan_values(&space, &leaves).unwrap();
        let weights = Policy::DeterministicTree(plan.policy.clone())
            .leaf_weights(&space)
            .unwrap();
        let direct: f64 = weights.iter().zip(&leaves).map(|(w, l)| w * l).sum();
        assert!((direct - plan.value).abs() < 1e-12);
    }
}
