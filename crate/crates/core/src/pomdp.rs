//! Tabular finite-horizon POMDPs and their conversion to PSRs.
//!
//! Step convention: at step `t` (1-based) the hidden state `s_t` emits `o_t`
//! through `Obs[t-1]`, the agent picks `a_t`, and for `t < H` the state moves
//! to `s_{t+1}` through `T[t-1][a_t]`. `s_1` is fixed. There are `H` emission
//! layers and `H − 1` transition layers.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::error::{PsrError, Result};
use crate::linalg::{
    column_condition_number, max_abs_diff, numeric_rank, pivoted_columns, pseudo_inverse,
    singular_values, RANK_TOL,
};
use crate::policy::Policy;
use crate::psr::{CoreTestSet, PsrModel};
use crate::space::{Future, History, ObsActSpace};

/// Rows must sum to one within this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Pseudo-inverses with a larger condition number are refused.
pub const MAX_CONDITION: f64 = 1e10;

/// Tolerance on the linear reconstruction of the dynamics matrix from its core tests.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

/// `random_revealing` keeps drawing until one-step decodability reaches this.
pub const REVEALING_ALPHA: f64 = 0.1;

/// Draw budget for `random_revealing`.
pub const REVEALING_BUDGET: usize = 1000;

/// Seed of the reference instance used across tests and experiments.
pub const REFERENCE_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reward {
    /// `table[h][o][a]`, summed along the trajectory.
    PerStepTable { table: Vec<Vec<Vec<f64>>> },
    /// One value per full trajectory in index order.
    TrajectoryFn { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPomdp {
    #[serde(rename = "S")]
    pub n_states: usize,
    #[serde(rename = "O")]
    pub n_obs: usize,
    #[serde(rename = "A")]
    pub n_actions: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    /// `transition[t][a][s][s']`, `t = 0..H-1`.
    #[serde(rename = "T")]
    pub transition: Vec<Vec<Vec<Vec<f64>>>>,
    /// `emission[t][s][o]`, `t = 0..H`.
    #[serde(rename = "Obs")]
    pub emission: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "s1")]
    pub initial_state: usize,
    pub reward: Reward,
}

/// `G_j` for `j = 1..=H`, stored at index `j − 1`.
///
/// Rows of `G_j` are indexed by an action sequence of length `L − 1`
/// (major) and an observation sequence of length `L` (minor), where
/// `L = min(m, H − j + 1)`. Columns are hidden states `s_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GMatrices {
    pub m: usize,
    pub g: Vec<DMatrix<f64>>,
}

fn check_row(row: &[f64], width: usize, what: &str) -> Result<()> {
    if row.len() != width {
        return Err(PsrError::InvalidEnvironment(format!("{what} has {} entries", row.len())));
    }
    if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(PsrError::InvalidEnvironment(format!("{what} has a negative entry")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(PsrError::InvalidEnvironment(format!("{what} sums to {total}")));
    }
    Ok(())
}

impl TabularPomdp {
    pub fn space(&self) -> ObsActSpace {
        ObsActSpace {
            n_obs: self.n_obs,
            n_actions: self.n_actions,
            horizon: self.horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.space().validate()?;
        let (s, h) = (self.n_states, self.horizon);
        if s == 0 || self.initial_state >= s {
            return Err(PsrError::InvalidEnvironment("bad state count or initial state".into()));
        }
        if self.transition.len() != h - 1 || self.emission.len() != h {
            return Err(PsrError::InvalidEnvironment(format!(
                "expected {} transition and {h} emission layers",
                h - 1
            )));
        }
        for (t, layer) in self.transition.iter().enumerate() {
            if layer.len() != self.n_actions {
                return Err(PsrError::InvalidEnvironment(format!("T[{t}] action count")));
            }
            for (a, mat) in layer.iter().enumerate() {
                if mat.len() != s {
                    return Err(PsrError::InvalidEnvironment(format!("T[{t}][{a}] row count")));
                }
                for (i, row) in mat.iter().enumerate() {
                    check_row(row, s, &format!("T[{t}][{a}][{i}]"))?;
                }
            }
        }
        for (t, mat) in self.emission.iter().enumerate() {
            if mat.len() != s {
                return Err(PsrError::InvalidEnvironment(format!("Obs[{t}] row count")));
            }
            for (i, row) in mat.iter().enumerate() {
                check_row(row, self.n_obs, &format!("Obs[{t}][{i}]"))?;
            }
        }
        match &self.reward {
            Reward::PerStepTable { table } => {
                if table.len() != h
                    || table.iter().any(|l| {
                        l.len() != self.n_obs || l.iter().any(|r| r.len() != self.n_actions)
                    })
                {
                    return Err(PsrError::InvalidEnvironment("reward table shape".into()));
                }
                if table.iter().flatten().flatten().any(|&r| !(r >= 0.0)) {
                    return Err(PsrError::InvalidEnvironment("negative reward".into()));
                }
                let worst: f64 = table
                    .iter()
                    .map(|l| l.iter().flatten().fold(0.0f64, |m, &r| m.max(r)))
                    .sum();
                if worst > 1.0 + 1e-12 {
                    return Err(PsrError::InvalidEnvironment(format!(
                        "per-step rewards can sum to {worst} > 1"
                    )));
                }
            }
            Reward::TrajectoryFn { values } => {
                if values.len() as u128 != self.space().trajectory_count() {
                    return Err(PsrError::InvalidEnvironment("reward function size".into()));
                }
                if values.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
                    return Err(PsrError::InvalidEnvironment("trajectory reward outside [0,1]".into()));
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: TabularPomdp = serde_json::from_str(text)?;
        env.validate()?;
        Ok(env)
    }

    /// Column `O_t(o | ·)` for step index `t` (0-based).
    fn emission_col(&self, t: usize, obs: usize) -> DVector<f64> {
        DVector::from_fn(self.n_states, |s, _| self.emission[t][s][obs])
    }

    /// `T[t][a]` as an `S × S` matrix with rows `s` and columns `s'`.
    fn transition_mat(&self, t: usize, action: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_states, self.n_states, |i, j| self.transition[t][action][i][j])
    }

    fn initial(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_states);
        x[self.initial_state] = 1.0;
        x
    }

    /// `R(τ_H)`.
    pub fn reward_of(&self, history: &History) -> f64 {
        match &self.reward {
            Reward::PerStepTable { table } => history
                .steps
                .iter()
                .enumerate()
                .map(|(t, &(o, a))| table[t][o][a])
                .sum(),
            Reward::TrajectoryFn { values } => values[history.index(&self.space())],
        }
    }

    /// `R(τ_H)` for every full trajectory in index order.
    pub fn reward_leaves(&self) -> Result<Vec<f64>> {
        let space = self.space();
        space.check_enumerable()?;
        Ok(History::all(&space, space.horizon)
            .iter()
            .map(|h| self.reward_of(h))
            .collect())
    }

    /// Draws one episode under `policy`; deterministic in `seed`.
    pub fn sample_episode(&self, policy: &Policy, seed: u64) -> History {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_episode_with(policy, &mut rng)
    }

    pub fn sample_episode_with<R: Rng + ?Sized>(&self, policy: &Policy, rng: &mut R) -> History {
        let space = self.space();
        let mut state = self.initial_state;
        let mut history = History::empty();
        for t in 0..self.horizon {
            let obs = WeightedIndex::new(&self.emission[t][state])
                .expect("emission rows are distributions")
                .sample(rng);
            let action = policy.sample_action(&space, &history, obs, rng);
            history.push(obs, action);
            if t + 1 < self.horizon {
                state = WeightedIndex::new(&self.transition[t][action][state])
                    .expect("transition rows are distributions")
                    .sample(rng);
            }
        }
        history
    }

    /// Joint weights `P(τ_h^o, s_{h+1} = · | τ_h^a)` for `h < H`.
    pub fn forward_states(&self, history: &History) -> Result<DVector<f64>> {
        history.validate(&self.space())?;
        if history.len() >= self.horizon {
            return Err(PsrError::Structural("no state follows the final step".into()));
        }
        let mut x = self.initial();
        for (t, &(o, a)) in history.steps.iter().enumerate() {
            let emitted = x.component_mul(&self.emission_col(t, o));
            x = self.transition_mat(t, a).transpose() * emitted;
        }
        Ok(x)
    }

    /// `P(τ^o | τ^a)` by the forward recursion over hidden states.
    pub fn exact_traj_prob(&self, history: &History) -> Result<f64> {
        history.validate(&self.space())?;
        let mut x = self.initial();
        for (t, &(o, a)) in history.steps.iter().enumerate() {
            x = x.component_mul(&self.emission_col(t, o));
            if t + 1 < self.horizon && t + 1 < history.len() {
                x = self.transition_mat(t, a).transpose() * x;
            }
        }
        Ok(x.sum())
    }

    /// Forward state vectors `x(τ_h)` for every history of length `h < H`.
    fn state_layer(&self, h: usize) -> Vec<DVector<f64>> {
        let space = self.space();
        let mut layer = vec![self.initial()];
        for t in 0..h {
            let emit: Vec<DVector<f64>> = (0..self.n_obs).map(|o| self.emission_col(t, o)).collect();
            let trans: Vec<DMatrix<f64>> = (0..self.n_actions)
                .map(|a| self.transition_mat(t, a).transpose())
                .collect();
            let mut next = Vec::with_capacity(layer.len() * space.n_pairs());
            for x in &layer {
                for o in 0..self.n_obs {
                    let emitted = x.component_mul(&emit[o]);
                    for tr in &trans {
                        next.push(tr * &emitted);
                    }
                }
            }
            layer = next;
        }
        layer
    }

    /// `P(ω^o | s_{h+1} = s, ω^a)` for every future of length `H − h`; rows are
    /// futures in index order, columns states.
    fn future_likelihoods(&self, h: usize) -> DMatrix<f64> {
        let mut rows: Vec<DVector<f64>> = vec![DVector::from_element(self.n_states, 1.0)];
        for t in (h..self.horizon).rev() {
            let mut next = Vec::with_capacity(rows.len() * self.n_obs * self.n_actions);
            for o in 0..self.n_obs {
                let emit = self.emission_col(t, o);
                for a in 0..self.n_actions {
                    for rest in &rows {
                        let carried = if t + 1 < self.horizon {
                            self.transition_mat(t, a) * rest
                        } else {
                            rest.clone()
                        };
                        next.push(emit.component_mul(&carried));
                    }
                }
            }
            rows = next;
        }
        let cols = self.n_states;
        DMatrix::from_fn(rows.len(), cols, |i, s| rows[i][s])
    }

    /// `P(τ_H^o | τ_H^a)` for every full trajectory in index order.
    pub fn leaf_probs(&self) -> Result<Vec<f64>> {
        self.space().check_enumerable()?;
        let last = self.horizon - 1;
        let layer = self.state_layer(last);
        let mut probs = Vec::with_capacity(layer.len() * self.n_obs * self.n_actions);
        for x in &layer {
            for o in 0..self.n_obs {
                let p = x.dot(&self.emission_col(last, o));
                probs.extend(std::iter::repeat(p).take(self.n_actions));
            }
        }
        Ok(probs)
    }

    /// `D_h`: rows are histories `τ_h`, columns futures `ω_h`, both in index order.
    pub fn dynamics_matrix(&self, h: usize) -> Result<DMatrix<f64>> {
        if h >= self.horizon {
            return Err(PsrError::Structural(format!("dynamics matrix needs h < H, got {h}")));
        }
        self.space().check_enumerable()?;
        let layer = self.state_layer(h);
        let x = DMatrix::from_fn(layer.len(), self.n_states, |i, s| layer[i][s]);
        Ok(x * self.future_likelihoods(h).transpose())
    }

    /// `max_h rank(D_h)`.
    pub fn rank(&self) -> Result<usize> {
        let mut r = 0;
        for h in 0..self.horizon {
            r = r.max(psr_rank(&self.dynamics_matrix(h)?, RANK_TOL));
        }
        Ok(r)
    }

    /// Greedy pivoted selection of `rank(D_h)` columns of `D_h`.
    pub fn select_core_tests(&self, h: usize) -> Result<Vec<Future>> {
        let d = self.dynamics_matrix(h)?;
        let r = psr_rank(&d, RANK_TOL);
        let cols = pivoted_columns(&d, r);
        let len = self.horizon - h;
        let tests: Vec<Future> = cols
            .iter()
            .map(|&c| Future::from_index(&self.space(), h, len, c))
            .collect();
        let chosen = d.select_columns(cols.iter());
        if psr_rank(&chosen, RANK_TOL) != r {
            return Err(PsrError::InsufficientCoreTests {
                step: h,
                error: f64::NAN,
            });
        }
        Ok(tests)
    }

    /// Generic construction from core tests selected on the dynamics matrices.
    pub fn to_psr(&self) -> Result<PsrModel> {
        let tests = (0..self.horizon)
            .map(|h| self.select_core_tests(h))
            .collect::<Result<Vec<_>>>()?;
        self.to_psr_with_tests(tests)
    }

    /// Generic construction from full-length core tests `Q_h`, `h = 0..H-1`.
    ///
    /// `M_h(o,a)ᵀ = Ψ_{h−1}^† X_{oa}` where `Ψ_h = D_h[:, Q_h]` and
    /// `X_{oa}[τ, ℓ] = D_{h−1}[τ, (o,a) ∘ q_h^ℓ]`.
    pub fn to_psr_with_tests(&self, tests: Vec<Vec<Future>>) -> Result<PsrModel> {
        self.validate()?;
        let space = self.space();
        for q in &tests {
            if let Some(bad) = q.iter().find(|f| !f.is_full_length(&space)) {
                return Err(PsrError::Structural(format!(
                    "core test {bad:?} does not run to the horizon"
                )));
            }
        }
        let core = CoreTestSet::new(&space, tests)?;
        let dmats = (0..self.horizon)
            .map(|h| self.dynamics_matrix(h))
            .collect::<Result<Vec<_>>>()?;
        let psi_mats: Vec<DMatrix<f64>> = dmats
            .iter()
            .zip(&core.tests)
            .map(|(d, q)| d.select_columns(q.iter().map(|f| f.index(&space)).collect::<Vec<_>>().iter()))
            .collect();
        let psi0 = psi_mats[0].row(0).transpose();
        let pairs = space.n_pairs();
        let mut m = Vec::with_capacity(self.horizon);
        for h in 1..=self.horizon {
            let base = &psi_mats[h - 1];
            let condition = column_condition_number(base);
            if condition > MAX_CONDITION {
                return Err(PsrError::SingularCoreTests {
                    step: h - 1,
                    condition,
                });
            }
            let pinv = pseudo_inverse(base);
            let d_prev = &dmats[h - 1];
            let mut layer = Vec::with_capacity(pairs);
            for pair in 0..pairs {
                let columns: Vec<usize> = if h < self.horizon {
                    let tail = space.histories_at(self.horizon - h);
                    core.tests[h].iter().map(|f| pair * tail + f.index(&space)).collect()
                } else {
                    vec![pair]
                };
                let x = d_prev.select_columns(columns.iter());
                let w = &pinv * &x;
                let error = max_abs_diff(&(base * &w), &x);
                if error > RECONSTRUCTION_TOL {
                    return Err(PsrError::InsufficientCoreTests { step: h - 1, error });
                }
                layer.push(w.transpose());
            }
            m.push(layer);
        }
        let dims = core.dims();
        let mut phi = vec![DVector::zeros(0); self.horizon + 1];
        phi[self.horizon] = DVector::from_element(1, 1.0);
        for h in (0..self.horizon).rev() {
            let mut row = DVector::zeros(dims[h]);
            for o in 0..self.n_obs {
                row += m[h][space.pair_index(o, 0)].transpose() * &phi[h + 1];
            }
            phi[h] = row;
        }
        PsrModel::new(space, core, psi0, m, phi)
    }

    /// `G_j` matrices for windows of at most `m` observations.
    pub fn g_matrices(&self, m: usize) -> Result<GMatrices> {
        if m == 0 {
            return Err(PsrError::InvalidParameter("window length m must be positive".into()));
        }
        let mut g = Vec::with_capacity(self.horizon);
        for j in 1..=self.horizon {
            let len = m.min(self.horizon - j + 1);
            let n_act = self.n_actions.pow(len as u32 - 1);
            let n_obs = self.n_obs.pow(len as u32);
            let mut mat = DMatrix::zeros(n_act * n_obs, self.n_states);
            for ai in 0..n_act {
                let actions = digits(ai, self.n_actions, len - 1);
                for oi in 0..n_obs {
                    let obs = digits(oi, self.n_obs, len);
                    let mut v = DVector::from_element(self.n_states, 1.0);
                    for k in (0..len).rev() {
                        let t = j - 1 + k;
                        if k + 1 < len {
                            v = self.transition_mat(t, actions[k]) * v;
                        }
                        v = v.component_mul(&self.emission_col(t, obs[k]));
                    }
                    mat.row_mut(ai * n_obs + oi).copy_from(&v.transpose());
                }
            }
            g.push(mat);
        }
        Ok(GMatrices { m, g })
    }

    /// Decodable construction: `M_h(o,a) = G_{h+1} T_{h,a}ᵀ diag(O_h(o|·)) G_h^†`
    /// for `h < H`, `M_H(o,a) = 1ᵀ diag(O_H(o|·)) G_H^†`, and `φ_h = (G_{h+1}^†)ᵀ 1`.
    pub fn to_psr_decodable(&self, m: usize) -> Result<PsrModel> {
        self.validate()?;
        let space = self.space();
        let gm = self.g_matrices(m)?;
        let mut pinvs = Vec::with_capacity(self.horizon);
        for (j, g) in gm.g.iter().enumerate() {
            let condition = column_condition_number(g);
            if condition > MAX_CONDITION {
                return Err(PsrError::SingularCoreTests { step: j, condition });
            }
            pinvs.push(pseudo_inverse(g));
        }
        let tests = (0..self.horizon)
            .map(|h| window_tests(&space, h, m.min(self.horizon - h)))
            .collect();
        let core = CoreTestSet::new(&space, tests)?;
        let psi0 = &gm.g[0] * self.initial();
        let ones = DVector::from_element(self.n_states, 1.0);
        let mut mats = Vec::with_capacity(self.horizon);
        for h in 1..=self.horizon {
            let mut layer = Vec::with_capacity(space.n_pairs());
            for o in 0..self.n_obs {
                let emit = DMatrix::from_diagonal(&self.emission_col(h - 1, o));
                for a in 0..self.n_actions {
                    let mat = if h < self.horizon {
                        &gm.g[h] * self.transition_mat(h - 1, a).transpose() * &emit * &pinvs[h - 1]
                    } else {
                        DMatrix::from_element(1, self.n_states, 1.0) * &emit * &pinvs[h - 1]
                    };
                    layer.push(mat);
                }
            }
            mats.push(layer);
        }
        let mut phi: Vec<DVector<f64>> = pinvs.iter().map(|p| p.transpose() * &ones).collect();
        phi.push(DVector::from_element(1, 1.0));
        PsrModel::new(space, core, psi0, mats, phi)
    }
}

fn digits(mut index: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = index % base;
        index /= base;
    }
    out
}

/// Window tests matching the row order of `G_{h+1}`: `len` observations,
/// `len − 1` free actions, final action fixed to 0.
fn window_tests(space: &ObsActSpace, h: usize, len: usize) -> Vec<Future> {
    let n_act = space.n_actions.pow(len as u32 - 1);
    let n_obs = space.n_obs.pow(len as u32);
    let mut tests = Vec::with_capacity(n_act * n_obs);
    for ai in 0..n_act {
        let mut actions = digits(ai, space.n_actions, len - 1);
        actions.push(0);
        for oi in 0..n_obs {
            let obs = digits(oi, space.n_obs, len);
            tests.push(Future::new(h, obs.into_iter().zip(actions.iter().copied()).collect()));
        }
    }
    tests
}

/// Number of singular values above `tol · σ_max`.
pub fn psr_rank(matrix: &DMatrix<f64>, tol: f64) -> usize {
    numeric_rank(matrix, tol)
}

/// `min_j σ_S(G_j)`; zero when some `G_j` has fewer rows than states.
pub fn decodability_alpha(g: &GMatrices) -> f64 {
    g.g.iter()
        .map(|mat| {
            let s = mat.ncols();
            singular_values(mat).get(s - 1).copied().unwrap_or(0.0)
        })
        .fold(f64::INFINITY, f64::min)
}

fn dirichlet_row<R: Rng + ?Sized>(rng: &mut R, width: usize, conc: f64) -> Vec<f64> {
    let gamma = Gamma::new(conc, 1.0).expect("positive concentration");
    loop {
        let draws: Vec<f64> = (0..width).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            let mut row: Vec<f64> = draws.iter().map(|x| x / total).collect();
            fix_sum(&mut row);
            return row;
        }
    }
}

/// Pushes the rounding residue of a normalized row into its largest entry.
pub(crate) fn fix_sum(row: &mut [f64]) {
    let total: f64 = row.iter().sum();
    let (imax, _) = row
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    row[imax] += 1.0 - total;
}

fn per_step_uniform<R: Rng + ?Sized>(rng: &mut R, space: &ObsActSpace) -> Reward {
    let scale = 1.0 / space.horizon as f64;
    let table = (0..space.horizon)
        .map(|_| {
            (0..space.n_obs)
                .map(|_| (0..space.n_actions).map(|_| rng.random::<f64>() * scale).collect())
                .collect()
        })
        .collect();
    Reward::PerStepTable { table }
}

/// Random POMDP with Dirichlet rows, redrawn until one-step decodability
/// reaches [`REVEALING_ALPHA`]. Rewards are `U[0,1]/H` per step.
pub fn random_revealing(
    seed: u64,
    n_states: usize,
    n_obs: usize,
    n_actions: usize,
    horizon: usize,
    conc: f64,
) -> Result<TabularPomdp> {
    let space = ObsActSpace::new(n_obs, n_actions, horizon)?;
    if n_states == 0 || !(conc > 0.0) {
        return Err(PsrError::InvalidParameter("need S >= 1 and a positive concentration".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..REVEALING_BUDGET {
        let transition = (0..horizon - 1)
            .map(|_| {
                (0..n_actions)
                    .map(|_| (0..n_states).map(|_| dirichlet_row(&mut rng, n_states, conc)).collect())
                    .collect()
            })
            .collect();
        let emission = (0..horizon)
            .map(|_| (0..n_states).map(|_| dirichlet_row(&mut rng, n_obs, conc)).collect())
            .collect();
        let reward = per_step_uniform(&mut rng, &space);
        let env = TabularPomdp {
            n_states,
            n_obs,
            n_actions,
            horizon,
            transition,
            emission,
            initial_state: 0,
            reward,
        };
        if decodability_alpha(&env.g_matrices(1)?) >= REVEALING_ALPHA {
            env.validate()?;
            return Ok(env);
        }
    }
    Err(PsrError::RejectionBudget(REVEALING_BUDGET))
}

/// The reference instance: `random_revealing(REFERENCE_SEED, 2, 3, 2, 2, 1.0)`.
pub fn reference_instance() -> TabularPomdp {
    random_revealing(REFERENCE_SEED, 2, 3, 2, 2, 1.0).expect("reference instance is revealing")
}

/// Two-door tiger problem.
///
/// States: tiger behind the left (0) or right (1) door; the tiger starts on
/// the left. Observations: hear-left (0) or hear-right (1), correct with
/// probability 0.85. Actions: listen (0), open-left (1), open-right (2).
/// Listening keeps the state; opening a door resets the tiger uniformly.
/// Per-step reward: opening the door opposite to where the tiger was heard
/// pays `1/H`, opening the other pays 0, listening pays `0.2/H`.
pub fn tiger(horizon: usize) -> Result<TabularPomdp> {
    ObsActSpace::new(2, 3, horizon)?;
    let emission = vec![vec![vec![0.85, 0.15], vec![0.15, 0.85]]; horizon];
    let stay = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let reset = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
    let transition = vec![vec![stay, reset.clone(), reset]; horizon - 1];
    let scale = 1.0 / horizon as f64;
    let step = vec![vec![0.2 * scale, 0.0, scale], vec![0.2 * scale, scale, 0.0]];
    let env = TabularPomdp {
        n_states: 2,
        n_obs: 2,
        n_actions: 3,
        horizon,
        transition,
        emission,
        initial_state: 0,
        reward: Reward::PerStepTable {
            table: vec![step; horizon],
        },
    };
    env.validate()?;
    Ok(env)
}

/// Fully observed MDP (identity emission) with Dirichlet(1) transitions.
pub fn random_mdp(seed: u64, n_states: usize, n_actions: usize, horizon: usize) -> Result<TabularPomdp> {
    let space = ObsActSpace::new(n_states, n_actions, horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let transition = (0..horizon - 1)
        .map(|_| {
            (0..n_actions)
                .map(|_| (0..n_states).map(|_| dirichlet_row(&mut rng, n_states, 1.0)).collect())
                .collect()
        })
        .collect();
    let identity: Vec<Vec<f64>> = (0..n_states)
        .map(|s| (0..n_states).map(|o| if o == s { 1.0 } else { 0.0 }).collect())
        .collect();
    let env = TabularPomdp {
        n_states,
        n_obs: n_states,
        n_actions,
        horizon,
        transition,
        emission: vec![identity; horizon],
        initial_state: 0,
        reward: per_step_uniform(&mut rng, &space),
    };
    env.validate()?;
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_prob(env: &TabularPomdp, history: &History) -> f64 {
        let h = history.len();
        if h == 0 {
            return 1.0;
        }
        let mut total = 0.0;
        for code in 0..env.n_states.pow(h as u32 - 1) {
            let mut states = vec![env.initial_state];
            states.extend(digits(code, env.n_states, h - 1));
            let mut p = 1.0;
            for (t, &(o, a)) in history.steps.iter().enumerate() {
                p *= env.emission[t][states[t]][o];
                if t + 1 < h {
                    p *= env.transition[t][a][states[t]][states[t + 1]];
                }
            }
            total += p;
        }
        total
    }

    #[test]
    fn forward_matches_state_sequence_sum() {
        let env = random_revealing(3, 2, 2, 2, 3, 1.0).unwrap();
        let space = env.space();
        for h in 0..=3 {
            for history in History::all(&space, h) {
                let exact = env.exact_traj_prob(&history).unwrap();
                assert!((exact - naive_prob(&env, &history)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dynamics_entries_are_joint_probabilities() {
        let env = random_revealing(5, 2, 2, 2, 3, 1.0).unwrap();
        let space = env.space();
        for h in 0..3 {
            let d = env.dynamics_matrix(h).unwrap();
            for (i, tau) in History::all(&space, h).iter().enumerate() {
                for j in 0..d.ncols() {
                    let omega = Future::from_index(&space, h, 3 - h, j);
                    let p = env.exact_traj_prob(&tau.concat(&omega)).unwrap();
                    assert!((d[(i, j)] - p).abs() < 1e-12);
                }
            }
            assert!(psr_rank(&d, RANK_TOL) <= env.n_states);
        }
    }

    #[test]
    fn leaf_probs_match_forward() {
        let env = tiger(3).unwrap();
        let space = env.space();
        let leaves = env.leaf_probs().unwrap();
        for (i, tau) in History::all(&space, 3).iter().enumerate() {
            assert!((leaves[i] - env.exact_traj_prob(tau).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn single_state_has_rank_one() {
        let env = TabularPomdp {
            n_states: 1,
            n_obs: 2,
            n_actions: 2,
            horizon: 2,
            transition: vec![vec![vec![vec![1.0]]; 2]],
            emission: vec![vec![vec![0.3, 0.7]]; 2],
            initial_state: 0,
            reward: Reward::PerStepTable {
                table: vec![vec![vec![0.0; 2]; 2]; 2],
            },
        };
        for h in 0..2 {
            assert_eq!(psr_rank(&env.dynamics_matrix(h).unwrap(), RANK_TOL), 1);
        }
        let p = env.exact_traj_prob(&History::new(vec![(0, 1), (1, 0)])).unwrap();
        assert!((p - 0.21).abs() < 1e-15);
        let tests = env.select_core_tests(1).unwrap();
        assert_eq!(tests.len(), 1);
    }

    #[test]
    fn indistinguishable_states_have_zero_alpha() {
        let env = TabularPomdp {
            n_states: 2,
            n_obs: 2,
            n_actions: 1,
            horizon: 2,
            transition: vec![vec![vec![vec![0.5, 0.5]; 2]]],
            emission: vec![vec![vec![0.4, 0.6]; 2]; 2],
            initial_state: 0,
            reward: Reward::PerStepTable {
                table: vec![vec![vec![0.0]; 2]; 2],
            },
        };
        let alpha = decodability_alpha(&env.g_matrices(1).unwrap());
        assert!(alpha < 1e-12);
    }

    #[test]
    fn revealing_alpha_is_emission_sigma_min() {
        let env = random_revealing(1, 2, 3, 2, 3, 1.0).unwrap();
        let alpha = decodability_alpha(&env.g_matrices(1).unwrap());
        assert!(alpha >= REVEALING_ALPHA);
        let direct = (0..3)
            .map(|t| {
                let o = DMatrix::from_fn(3, 2, |i, s| env.emission[t][s][i]);
                singular_values(&o)[1]
            })
            .fold(f64::INFINITY, f64::min);
        assert!((alpha - direct).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let env = tiger(3).unwrap();
        let policy = Policy::uniform(3);
        assert_eq!(env.sample_episode(&policy, 42), env.sample_episode(&policy, 42));
    }

    #[test]
    fn json_round_trip() {
        let env = random_mdp(2, 2, 2, 2).unwrap();
        let text = serde_json::to_string(&env).unwrap();
        assert!(text.contains("\"Obs\""));
        assert_eq!(TabularPomdp::from_json(&text).unwrap(), env);
    }
}
