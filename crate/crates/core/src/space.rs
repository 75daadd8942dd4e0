//! Observation/action spaces, histories and futures.
//!
//! Histories of length `h` are indexed lexicographically: the pair
//! `(o, a)` has index `o * n_actions + a`, and a history's index is its pair
//! sequence read as a base-`n_obs * n_actions` number, first step most
//! significant. The same convention indexes futures. Every exact routine in the
//! crate enumerates in this order.

use serde::{Deserialize, Serialize};

use crate::error::{PsrError, Result};

/// Default cap on the number of full trajectories an exact routine enumerates.
pub const DEFAULT_ENUM_CAP: u128 = 10_000_000;

/// Environment variable overriding [`DEFAULT_ENUM_CAP`].
pub const ENUM_CAP_VAR: &str = "PSRLAB_ENUM_CAP";

/// Effective enumeration cap, honouring `PSRLAB_ENUM_CAP`.
pub fn enumeration_cap() -> u128 {
    std::env::var(ENUM_CAP_VAR)
        .ok()
        .and_then(|v| v.trim().parse::<u128>().ok())
        .unwrap_or(DEFAULT_ENUM_CAP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsActSpace {
    pub n_obs: usize,
    pub n_actions: usize,
    pub horizon: usize,
}

impl ObsActSpace {
    pub fn new(n_obs: usize, n_actions: usize, horizon: usize) -> Result<Self> {
        let space = Self {
            n_obs,
            n_actions,
            horizon,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_obs == 0 || self.n_actions == 0 || self.horizon == 0 {
            return Err(PsrError::InvalidSpace(format!(
                "n_obs={}, n_actions={}, horizon={} must all be positive",
                self.n_obs, self.n_actions, self.horizon
            )));
        }
        Ok(())
    }

    /// Number of (observation, action) pairs.
    pub fn n_pairs(&self) -> usize {
        self.n_obs * self.n_actions
    }

    pub fn pair_index(&self, obs: usize, action: usize) -> usize {
        obs * self.n_actions + action
    }

    pub fn pair_of(&self, index: usize) -> (usize, usize) {
        (index / self.n_actions, index % self.n_actions)
    }

    /// `(n_obs * n_actions)^len`, saturating at `u128::MAX`.
    pub fn sequence_count(&self, len: usize) -> u128 {
        let base = self.n_pairs() as u128;
        let mut total: u128 = 1;
        for _ in 0..len {
            total = total.saturating_mul(base);
        }
        total
    }

    /// Number of full trajectories `(n_obs * n_actions)^H`.
    pub fn trajectory_count(&self) -> u128 {
        self.sequence_count(self.horizon)
    }

    /// Rejects spaces whose trajectory tree exceeds `cap` leaves.
    pub fn check_enumerable_with(&self, cap: u128) -> Result<()> {
        let leaves = self.trajectory_count();
        if leaves > cap {
            return Err(PsrError::EnumerationCap { leaves, cap });
        }
        Ok(())
    }

    /// Rejects spaces whose trajectory tree exceeds [`enumeration_cap`].
    pub fn check_enumerable(&self) -> Result<()> {
        self.check_enumerable_with(enumeration_cap())
    }

    /// Number of histories of length `h`, as a `usize` (callers check the cap first).
    pub fn histories_at(&self, h: usize) -> usize {
        self.n_pairs().pow(h as u32)
    }

    fn check_pair(&self, obs: usize, action: usize) -> Result<()> {
        if obs >= self.n_obs || action >= self.n_actions {
            return Err(PsrError::Structural(format!(
                "pair ({obs}, {action}) outside {} observations x {} actions",
                self.n_obs, self.n_actions
            )));
        }
        Ok(())
    }
}

/// A historical trajectory `(o_1, a_1, ..., o_h, a_h)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct History {
    pub steps: Vec<(usize, usize)>,
}

impl History {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(steps: Vec<(usize, usize)>) -> Self {
        Self { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn validate(&self, space: &ObsActSpace) -> Result<()> {
        if self.len() > space.horizon {
            return Err(PsrError::Structural(format!(
                "history of length {} exceeds horizon {}",
                self.len(),
                space.horizon
            )));
        }
        for &(o, a) in &self.steps {
            space.check_pair(o, a)?;
        }
        Ok(())
    }

    /// Prefix `τ_h` of this history.
    pub fn prefix(&self, h: usize) -> History {
        History::new(self.steps[..h].to_vec())
    }

    pub fn push(&mut self, obs: usize, action: usize) {
        self.steps.push((obs, action));
    }

    pub fn extended(&self, obs: usize, action: usize) -> History {
        let mut next = self.clone();
        next.push(obs, action);
        next
    }

    /// Concatenation with a future that starts right after this history.
    pub fn concat(&self, future: &Future) -> History {
        let mut steps = self.steps.clone();
        steps.extend_from_slice(&future.steps);
        History::new(steps)
    }

    pub fn actions(&self) -> Vec<usize> {
        self.steps.iter().map(|&(_, a)| a).collect()
    }

    pub fn observations(&self) -> Vec<usize> {
        self.steps.iter().map(|&(o, _)| o).collect()
    }

    /// Lexicographic index among histories of the same length.
    pub fn index(&self, space: &ObsActSpace) -> usize {
        sequence_index(space, &self.steps)
    }

    pub fn from_index(space: &ObsActSpace, len: usize, index: usize) -> History {
        History::new(sequence_from_index(space, len, index))
    }

    /// All histories of length `h` in index order.
    pub fn all(space: &ObsActSpace, h: usize) -> Vec<History> {
        (0..space.histories_at(h))
            .map(|i| History::from_index(space, h, i))
            .collect()
    }
}

/// A future trajectory `(o_{h+1}, a_{h+1}, ...)` starting after step `start_step`.
///
/// Futures selected from a dynamics matrix run to the horizon. Window tests of
/// the decodable construction may stop earlier; the final action of such a
/// window does not influence any observation in it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Future {
    pub start_step: usize,
    pub steps: Vec<(usize, usize)>,
}

impl Future {
    pub fn new(start_step: usize, steps: Vec<(usize, usize)>) -> Self {
        Self { start_step, steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_full_length(&self, space: &ObsActSpace) -> bool {
        self.start_step + self.steps.len() == space.horizon
    }

    pub fn validate(&self, space: &ObsActSpace) -> Result<()> {
        if self.start_step + self.steps.len() > space.horizon {
            return Err(PsrError::Structural(format!(
                "future starting after step {} with {} steps overruns horizon {}",
                self.start_step,
                self.steps.len(),
                space.horizon
            )));
        }
        for &(o, a) in &self.steps {
            space.check_pair(o, a)?;
        }
        Ok(())
    }

    pub fn actions(&self) -> Vec<usize> {
        self.steps.iter().map(|&(_, a)| a).collect()
    }

    pub fn observations(&self) -> Vec<usize> {
        self.steps.iter().map(|&(o, _)| o).collect()
    }

    pub fn index(&self, space: &ObsActSpace) -> usize {
        sequence_index(space, &self.steps)
    }

    pub fn from_index(space: &ObsActSpace, start_step: usize, len: usize, index: usize) -> Future {
        Future::new(start_step, sequence_from_index(space, len, index))
    }
}

fn sequence_index(space: &ObsActSpace, steps: &[(usize, usize)]) -> usize {
    let base = space.n_pairs();
    steps
        .iter()
        .fold(0usize, |acc, &(o, a)| acc * base + space.pair_index(o, a))
}

fn sequence_from_index(space: &ObsActSpace, len: usize, mut index: usize) -> Vec<(usize, usize)> {
    let base = space.n_pairs();
    let mut steps = vec![(0, 0); len];
    for slot in steps.iter_mut().rev() {
        *slot = space.pair_of(index % base);
        index /= base;
    }
    steps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_dimensions() {
        assert!(ObsActSpace::new(0, 2, 2).is_err());
        assert!(ObsActSpace::new(2, 0, 2).is_err());
        assert!(ObsActSpace::new(2, 2, 0).is_err());
    }

    #[test]
    fn enumeration_cap_guard() {
        let space = ObsActSpace::new(10, 10, 4).unwrap();
        assert!(space.check_enumerable_with(100_000_000).is_ok());
        assert!(matches!(
            space.check_enumerable_with(1000),
            Err(PsrError::EnumerationCap { leaves: 100_000_000, cap: 1000 })
        ));
    }

    #[test]
    fn history_index_round_trips() {
        let space = ObsActSpace::new(3, 2, 3).unwrap();
        for i in 0..space.histories_at(3) {
            let h = History::from_index(&space, 3, i);
            assert_eq!(h.index(&space), i);
        }
        let h = History::new(vec![(0, 1), (2, 0)]);
        assert_eq!(h.index(&space), 1 * 6 + 4);
    }

    #[test]
    fn history_bounds_checked() {
        let space = ObsActSpace::new(2, 2, 2).unwrap();
        assert!(History::new(vec![(2, 0)]).validate(&space).is_err());
        assert!(History::new(vec![(0, 0); 3]).validate(&space).is_err());
        assert!(History::empty().validate(&space).is_ok());
    }
}
