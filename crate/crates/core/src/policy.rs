//! History-dependent policies.
//!
//! Steps are 1-based: the action at step `t` is chosen after observing `o_t`
//! with the history `τ_{t-1}` in hand.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PsrError, Result};
use crate::space::{History, ObsActSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    DeterministicTree(DeterministicTree),
    UniformActionSeq(UniformActionSeq),
    Composite(Composite),
}

/// Deterministic decision rule stored densely over every `(τ_{h}, o_{h+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicTree {
    pub space: ObsActSpace,
    /// `actions[h][history_index * n_obs + o]` is the action at step `h + 1`.
    pub actions: Vec<Vec<usize>>,
}

/// Uniform mixture over action sequences started at `start_step`.
///
/// Once a sequence runs out before the horizon, the remaining actions are
/// drawn uniformly. Before `start_step` the rule is uniform as well; it is
/// meant to be used as the suffix of a [`Composite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformActionSeq {
    pub start_step: usize,
    pub n_actions: usize,
    pub sequences: Vec<Vec<usize>>,
}

/// `ν_h(π, π')`: `prefix` at steps `< switch_step`, `suffix` from `switch_step` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composite {
    pub switch_step: usize,
    pub prefix: Box<Policy>,
    pub suffix: Box<Policy>,
}

impl DeterministicTree {
    pub fn new(space: ObsActSpace, actions: Vec<Vec<usize>>) -> Result<Self> {
        if actions.len() != space.horizon {
            return Err(PsrError::Structural(format!(
                "tree has {} levels for horizon {}",
                actions.len(),
                space.horizon
            )));
        }
        for (h, level) in actions.iter().enumerate() {
            let expected = space.histories_at(h) * space.n_obs;
            if level.len() != expected {
                return Err(PsrError::Structural(format!(
                    "tree level {h} has {} entries, expected {expected}",
                    level.len()
                )));
            }
            if let Some(&bad) = level.iter().find(|&&a| a >= space.n_actions) {
                return Err(PsrError::Structural(format!("action {bad} out of range")));
            }
        }
        Ok(Self { space, actions })
    }

    /// Tree that plays `action` everywhere.
    pub fn constant(space: ObsActSpace, action: usize) -> Self {
        let actions = (0..space.horizon)
            .map(|h| vec![action; space.histories_at(h) * space.n_obs])
            .collect();
        Self { space, actions }
    }

    /// Uniformly random deterministic tree.
    pub fn random<R: Rng + ?Sized>(space: ObsActSpace, rng: &mut R) -> Self {
        let actions = (0..space.horizon)
            .map(|h| {
                (0..space.histories_at(h) * space.n_obs)
                    .map(|_| rng.random_range(0..space.n_actions))
                    .collect()
            })
            .collect();
        Self { space, actions }
    }

    pub fn action(&self, h: usize, history_index: usize, obs: usize) -> usize {
        self.actions[h][history_index * self.space.n_obs + obs]
    }
}

impl UniformActionSeq {
    pub fn new(start_step: usize, n_actions: usize, sequences: Vec<Vec<usize>>) -> Result<Self> {
        if start_step == 0 {
            return Err(PsrError::InvalidParameter("start_step is 1-based".into()));
        }
        if sequences.is_empty() {
            return Err(PsrError::InvalidParameter(
                "uniform mixture needs at least one action sequence".into(),
            ));
        }
        if sequences.iter().flatten().any(|&a| a >= n_actions) {
            return Err(PsrError::InvalidParameter("action out of range".into()));
        }
        Ok(Self {
            start_step,
            n_actions,
            sequences,
        })
    }

    /// The uniform-over-actions rule (a single empty sequence, all padding).
    pub fn uniform(n_actions: usize) -> Self {
        Self {
            start_step: 1,
            n_actions,
            sequences: vec![Vec::new()],
        }
    }

    fn factor(&self, seq: &[usize], offset: usize, action: usize) -> f64 {
        match seq.get(offset) {
            Some(&a) => {
                if a == action {
                    1.0
                } else {
                    0.0
                }
            }
            None => 1.0 / self.n_actions as f64,
        }
    }

    fn action_probs(&self, history: &History) -> Vec<f64> {
        let step = history.len() + 1;
        let uniform = vec![1.0 / self.n_actions as f64; self.n_actions];
        if step < self.start_step {
            return uniform;
        }
        let played: Vec<usize> = history.steps[self.start_step - 1..]
            .iter()
            .map(|&(_, a)| a)
            .collect();
        let offset = played.len();
        let weights: Vec<f64> = self
            .sequences
            .iter()
            .map(|seq| {
                played
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| self.factor(seq, i, a))
                    .product()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return uniform;
        }
        (0..self.n_actions)
            .map(|a| {
                self.sequences
                    .iter()
                    .zip(&weights)
                    .map(|(seq, w)| w * self.factor(seq, offset, a))
                    .sum::<f64>()
                    / total
            })
            .collect()
    }
}

impl Policy {
    pub fn uniform(n_actions: usize) -> Self {
        Policy::UniformActionSeq(UniformActionSeq::uniform(n_actions))
    }

    pub fn composite(switch_step: usize, prefix: Policy, suffix: Policy) -> Self {
        Policy::Composite(Composite {
            switch_step,
            prefix: Box::new(prefix),
            suffix: Box::new(suffix),
        })
    }

    /// `π(· | τ_{t-1}, o_t)` for `t = history.len() + 1`.
    pub fn action_probs(&self, space: &ObsActSpace, history: &History, obs: usize) -> Vec<f64> {
        match self {
            Policy::DeterministicTree(tree) => {
                let h = history.len();
                let action = tree.action(h, history.index(space), obs);
                let mut probs = vec![0.0; space.n_actions];
                probs[action] = 1.0;
                probs
            }
            Policy::UniformActionSeq(mix) => mix.action_probs(history),
            Policy::Composite(c) => {
                if history.len() + 1 < c.switch_step {
                    c.prefix.action_probs(space, history, obs)
                } else {
                    c.suffix.action_probs(space, history, obs)
                }
            }
        }
    }

    /// `π(τ_h)`: product of the per-step action probabilities along `history`.
    pub fn weight(&self, space: &ObsActSpace, history: &History) -> f64 {
        let mut prefix = History::empty();
        let mut weight = 1.0;
        for &(o, a) in &history.steps {
            weight *= self.action_probs(space, &prefix, o)[a];
            if weight == 0.0 {
                return 0.0;
            }
            prefix.push(o, a);
        }
        weight
    }

    /// `π(τ_h)` for every history of every length `0..=H`, in index order.
    pub fn weights_by_depth(&self, space: &ObsActSpace) -> Result<Vec<Vec<f64>>> {
        space.check_enumerable()?;
        let mut layers = vec![vec![1.0]];
        for h in 0..space.horizon {
            let prev = &layers[h];
            let mut next = vec![0.0; prev.len() * space.n_pairs()];
            for (idx, &w) in prev.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let history = History::from_index(space, h, idx);
                for o in 0..space.n_obs {
                    let probs = self.action_probs(space, &history, o);
                    for (a, p) in probs.iter().enumerate() {
                        next[idx * space.n_pairs() + space.pair_index(o, a)] = w * p;
                    }
                }
            }
            layers.push(next);
        }
        Ok(layers)
    }

    /// `π(τ_H)` for every full trajectory in index order.
    pub fn leaf_weights(&self, space: &ObsActSpace) -> Result<Vec<f64>> {
        let mut layers = self.weights_by_depth(space)?;
        Ok(layers.pop().expect("horizon >= 1"))
    }

    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        space: &ObsActSpace,
        history: &History,
        obs: usize,
        rng: &mut R,
    ) -> usize {
        let probs = self.action_probs(space, history, obs);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (a, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space() -> ObsActSpace {
        ObsActSpace::new(2, 3, 2).unwrap()
    }

    #[test]
    fn deterministic_tree_match_and_mismatch() {
        let space = space();
        let tree = DeterministicTree::constant(space, 1);
        let policy = Policy::DeterministicTree(tree);
        assert_eq!(policy.weight(&space, &History::new(vec![(0, 1), (1, 1)])), 1.0);
        assert_eq!(policy.weight(&space, &History::new(vec![(0, 1), (1, 2)])), 0.0);
    }

    #[test]
    fn uniform_over_three_sequences() {
        let space = space();
        let mix = UniformActionSeq::new(1, 3, vec![vec![0, 1], vec![1, 1], vec![2, 0]]).unwrap();
        let policy = Policy::UniformActionSeq(mix);
        let w = policy.weight(&space, &History::new(vec![(1, 1), (0, 1)]));
        assert!((w - 1.0 / 3.0).abs() < 1e-15);
        let off = policy.weight(&space, &History::new(vec![(1, 1), (0, 2)]));
        assert_eq!(off, 0.0);
    }

    #[test]
    fn padding_is_uniform() {
        let space = space();
        let mix = UniformActionSeq::new(1, 3, vec![vec![2]]).unwrap();
        let policy = Policy::UniformActionSeq(mix);
        let w = policy.weight(&space, &History::new(vec![(0, 2), (1, 0)]));
        assert!((w - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn composite_switches_at_step() {
        let space = space();
        let prefix = Policy::DeterministicTree(DeterministicTree::constant(space, 0));
        let suffix = Policy::UniformActionSeq(UniformActionSeq::new(2, 3, vec![vec![1], vec![2]]).unwrap());
        let policy = Policy::composite(2, prefix, suffix);
        let w = policy.weight(&space, &History::new(vec![(1, 0), (0, 2)]));
        assert!((w - 0.5).abs() < 1e-15);
        assert_eq!(policy.weight(&space, &History::new(vec![(1, 1), (0, 2)])), 0.0);
    }

    #[test]
    fn leaf_weights_sum_to_observation_branches() {
        let space = space();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let policy = Policy::DeterministicTree(DeterministicTree::random(space, &mut rng));
        let total: f64 = policy.leaf_weights(&space).unwrap().iter().sum();
        assert!((total - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_actions_follow_probabilities() {
        let space = space();
        let policy = Policy::uniform(3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[policy.sample_action(&space, &History::empty(), 0, &mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / 30_000.0 - 1.0 / 3.0).abs() < 0.02);
        }
    }
}
