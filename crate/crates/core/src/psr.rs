//! Predictive state representations `θ = {ψ_0, M_h(o,a), φ_h}`.
//!
//! Dimensions: `d_h` is the number of core tests at step `h` for `h < H` and
//! `d_H = 1`. `M_h(o,a)` maps `R^{d_{h-1}}` to `R^{d_h}`. `φ_h` is stored for
//! every `h ∈ 0..=H`, which makes the prediction feature of the empty
//! history well defined.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PsrError, Result};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::planning::backward_induction;
use crate::policy::Policy;
use crate::space::{Future, History, ObsActSpace};

/// Guard on `φ_hᵀψ(τ_h)` below which a history counts as impossible.
pub const PSI_GUARD: f64 = 1e-12;

/// Core tests `Q_h` for `h = 0..H-1` with their derived action sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreTestSet {
    pub tests: Vec<Vec<Future>>,
    pub core_action_seqs: Vec<Vec<Vec<usize>>>,
    pub exploration_seqs: Vec<Vec<Vec<usize>>>,
}

fn push_unique(list: &mut Vec<Vec<usize>>, item: Vec<usize>) {
    if !list.contains(&item) {
        list.push(item);
    }
}

impl CoreTestSet {
    /// Builds `Q_h^A` and `Q_h^exp = (A × Q_{h+1}^A) ∪ Q_h^A` from the tests.
    pub fn new(space: &ObsActSpace, tests: Vec<Vec<Future>>) -> Result<Self> {
        if tests.len() != space.horizon {
            return Err(PsrError::Structural(format!(
                "{} core-test steps for horizon {}",
                tests.len(),
                space.horizon
            )));
        }
        for (h, q) in tests.iter().enumerate() {
            if q.is_empty() {
                return Err(PsrError::Structural(format!("no core tests at step {h}")));
            }
            for f in q {
                f.validate(space)?;
                if f.start_step != h {
                    return Err(PsrError::Structural(format!(
                        "core test at step {h} starts after step {}",
                        f.start_step
                    )));
                }
            }
        }
        let core_action_seqs: Vec<Vec<Vec<usize>>> = tests
            .iter()
            .map(|q| {
                let mut seqs = Vec::new();
                for f in q {
                    push_unique(&mut seqs, f.actions());
                }
                seqs
            })
            .collect();
        let exploration_seqs = (0..space.horizon)
            .map(|h| {
                let next: Vec<Vec<usize>> = if h + 1 < space.horizon {
                    core_action_seqs[h + 1].clone()
                } else {
                    vec![Vec::new()]
                };
                let mut seqs = Vec::new();
                for a in 0..space.n_actions {
                    for rest in &next {
                        let mut seq = vec![a];
                        seq.extend_from_slice(rest);
                        push_unique(&mut seqs, seq);
                    }
                }
                for seq in &core_action_seqs[h] {
                    push_unique(&mut seqs, seq.clone());
                }
                seqs
            })
            .collect();
        Ok(Self {
            tests,
            core_action_seqs,
            exploration_seqs,
        })
    }

    /// `d_h` for `h = 0..=H` (with `d_H = 1`).
    pub fn dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.tests.iter().map(Vec::len).collect();
        dims.push(1);
        dims
    }

    /// `Q_A = max_h |Q_h^A|`.
    pub fn q_a(&self) -> usize {
        self.core_action_seqs.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `d = max_h d_h`.
    pub fn max_dim(&self) -> usize {
        self.tests.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Re-derives the action sets and compares them element-wise.
    pub fn validate(&self, space: &ObsActSpace) -> Result<()> {
        let rebuilt = CoreTestSet::new(space, self.tests.clone())?;
        if rebuilt != *self {
            return Err(PsrError::Structural(
                "core action sets disagree with the core tests".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDocument", into = "ModelDocument")]
pub struct PsrModel {
    pub space: ObsActSpace,
    pub core_tests: CoreTestSet,
    pub psi0: DVector<f64>,
    /// `m[h-1][pair_index(o, a)]` is `M_h(o, a)`.
    pub m: Vec<Vec<DMatrix<f64>>>,
    /// `phi[h]` for `h = 0..=H`.
    pub phi: Vec<DVector<f64>>,
}

/// On-disk layout: `M[h][o][a][row][col]` for `h = 1..=H` and `phi[h]` for `h = 0..=H`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDocument {
    space: ObsActSpace,
    core_tests: CoreTestSet,
    psi0: Vec<f64>,
    #[serde(rename = "M")]
    m: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
    phi: Vec<Vec<f64>>,
}

impl From<PsrModel> for ModelDocument {
    fn from(model: PsrModel) -> Self {
        let space = model.space;
        let m = model
            .m
            .iter()
            .map(|layer| {
                (0..space.n_obs)
                    .map(|o| {
                        (0..space.n_actions)
                            .map(|a| {
                                let mat = &layer[space.pair_index(o, a)];
                                (0..mat.nrows())
                                    .map(|r| mat.row(r).iter().copied().collect())
                                    .collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        ModelDocument {
            space,
            psi0: model.psi0.iter().copied().collect(),
            m,
            phi: model.phi.iter().map(|p| p.iter().copied().collect()).collect(),
            core_tests: model.core_tests,
        }
    }
}

impl TryFrom<ModelDocument> for PsrModel {
    type Error = PsrError;

    fn try_from(doc: ModelDocument) -> Result<Self> {
        let space = doc.space;
        space.validate()?;
        let dims = doc.core_tests.dims();
        let mut m = Vec::with_capacity(doc.m.len());
        for (h, by_obs) in doc.m.iter().enumerate() {
            let rows = dims.get(h + 1).copied().unwrap_or(0);
            let cols = dims[h.min(dims.len() - 1)];
            let mut layer = vec![DMatrix::zeros(0, 0); space.n_pairs()];
            if by_obs.len() != space.n_obs {
                return Err(PsrError::Structural(format!("M[{h}] has wrong observation count")));
            }
            for (o, by_action) in by_obs.iter().enumerate() {
                if by_action.len() != space.n_actions {
                    return Err(PsrError::Structural(format!("M[{h}][{o}] has wrong action count")));
                }
                for (a, entries) in by_action.iter().enumerate() {
                    if entries.len() != rows || entries.iter().any(|r| r.len() != cols) {
                        return Err(PsrError::Structural(format!(
                            "M[{h}][{o}][{a}] is not {rows}x{cols}"
                        )));
                    }
                    layer[space.pair_index(o, a)] =
                        DMatrix::from_fn(rows, cols, |r, c| entries[r][c]);
                }
            }
            m.push(layer);
        }
        let model = PsrModel {
            space,
            psi0: DVector::from_vec(doc.psi0),
            m,
            phi: doc.phi.into_iter().map(DVector::from_vec).collect(),
            core_tests: doc.core_tests,
        };
        model.validate()?;
        model.core_tests.validate(&model.space)?;
        Ok(model)
    }
}

impl PsrModel {
    pub fn new(
        space: ObsActSpace,
        core_tests: CoreTestSet,
        psi0: DVector<f64>,
        m: Vec<Vec<DMatrix<f64>>>,
        phi: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let model = Self {
            space,
            core_tests,
            psi0,
            m,
            phi,
        };
        model.validate()?;
        Ok(model)
    }

    /// Shape checks on every stored matrix and vector.
    pub fn validate(&self) -> Result<()> {
        let space = &self.space;
        let dims = self.core_tests.dims();
        let mismatch = |what: String| Err(PsrError::Structural(what));
        if self.m.len() != space.horizon || self.phi.len() != space.horizon + 1 {
            return mismatch(format!(
                "{} M layers and {} phi vectors for horizon {}",
                self.m.len(),
                self.phi.len(),
                space.horizon
            ));
        }
        if self.psi0.len() != dims[0] {
            return mismatch(format!("psi0 has dimension {}, expected {}", self.psi0.len(), dims[0]));
        }
        for (h, p) in self.phi.iter().enumerate() {
            if p.len() != dims[h] {
                return mismatch(format!("phi_{h} has dimension {}, expected {}", p.len(), dims[h]));
            }
        }
        for (i, layer) in self.m.iter().enumerate() {
            if layer.len() != space.n_pairs() {
                return mismatch(format!("M_{} has {} entries", i + 1, layer.len()));
            }
            for mat in layer {
                if mat.shape() != (dims[i + 1], dims[i]) {
                    return mismatch(format!(
                        "M_{} is {:?}, expected {:?}",
                        i + 1,
                        mat.shape(),
                        (dims[i + 1], dims[i])
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.core_tests.dims()
    }

    /// `M_h(o, a)` for `h ∈ 1..=H`.
    pub fn matrix(&self, h: usize, obs: usize, action: usize) -> &DMatrix<f64> {
        &self.m[h - 1][self.space.pair_index(obs, action)]
    }

    /// Unnormalized prediction vector `ψ(τ_h) = M_h ··· M_1 ψ_0`.
    pub fn psi(&self, history: &History) -> Result<DVector<f64>> {
        history.validate(&self.space)?;
        let mut psi = self.psi0.clone();
        for (t, &(o, a)) in history.steps.iter().enumerate() {
            psi = self.matrix(t + 1, o, a) * psi;
        }
        Ok(psi)
    }

    /// `P(τ^o | τ^a) = φ_hᵀ ψ(τ_h)`; the empty history gives `φ_0ᵀψ_0`.
    pub fn seq_prob(&self, history: &History) -> Result<f64> {
        let psi = self.psi(history)?;
        Ok(self.phi[history.len()].dot(&psi))
    }

    /// `ψ̄(τ_h) = ψ(τ_h) / φ_hᵀψ(τ_h)`.
    pub fn prediction_feature(&self, history: &History) -> Result<DVector<f64>> {
        let psi = self.psi(history)?;
        normalize(&self.phi[history.len()], psi)
    }

    /// `ψ(τ_h)` for every history of every length, in index order.
    pub fn psi_layers(&self) -> Result<Vec<Vec<DVector<f64>>>> {
        self.space.check_enumerable()?;
        let pairs = self.space.n_pairs();
        let mut layers = vec![vec![self.psi0.clone()]];
        for h in 1..=self.space.horizon {
            let prev = &layers[h - 1];
            let mut next = Vec::with_capacity(prev.len() * pairs);
            for psi in prev {
                for pair in 0..pairs {
                    next.push(&self.m[h - 1][pair] * psi);
                }
            }
            layers.push(next);
        }
        Ok(layers)
    }

    /// `P(τ_h^o | τ_h^a)` for every history of every length, in index order.
    pub fn prob_layers(&self) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .psi_layers()?
            .iter()
            .enumerate()
            .map(|(h, layer)| layer.iter().map(|psi| self.phi[h].dot(psi)).collect())
            .collect())
    }

    /// `P(τ_H^o | τ_H^a)` for every full trajectory in index order.
    pub fn leaf_probs(&self) -> Result<Vec<f64>> {
        self.space.check_enumerable()?;
        let pairs = self.space.n_pairs();
        let mut layer = vec![self.psi0.clone()];
        for h in 1..=self.space.horizon {
            let mut next = Vec::with_capacity(layer.len() * pairs);
            for psi in &layer {
                for pair in 0..pairs {
                    next.push(&self.m[h - 1][pair] * psi);
                }
            }
            layer = next;
        }
        let phi = &self.phi[self.space.horizon];
        Ok(layer.iter().map(|psi| phi.dot(psi)).collect())
    }

    /// Max over `h, a` and coordinates of `|Σ_o φ_{h+1}ᵀ M_{h+1}(o,a) − φ_hᵀ|`.
    pub fn check_self_consistency(&self) -> f64 {
        let space = &self.space;
        let mut worst = 0.0f64;
        for h in 0..space.horizon {
            for a in 0..space.n_actions {
                let mut row = DVector::zeros(self.phi[h].len());
                for o in 0..space.n_obs {
                    row += self.matrix(h + 1, o, a).transpose() * &self.phi[h + 1];
                }
                worst = worst.max((row - &self.phi[h]).amax());
            }
        }
        worst
    }

    /// `max |φ_Hᵀ M_H(o,a) − e_{(o,a)}|`, defined only when `Q_{H-1}` is the full
    /// set of single-step tests in index order.
    pub fn terminal_anchoring(&self) -> Option<f64> {
        let space = &self.space;
        let last = &self.core_tests.tests[space.horizon - 1];
        let full = last.len() == space.n_pairs()
            && last
                .iter()
                .enumerate()
                .all(|(i, f)| f.len() == 1 && f.index(space) == i);
        if !full {
            return None;
        }
        let phi = &self.phi[space.horizon];
        let mut worst = 0.0f64;
        for pair in 0..space.n_pairs() {
            let row = self.m[space.horizon - 1][pair].transpose() * phi;
            for (j, v) in row.iter().enumerate() {
                let target = if j == pair { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        Some(worst)
    }

    /// Smallest realized probability over all enumerated histories.
    pub fn min_seq_prob(&self) -> Result<f64> {
        Ok(self
            .prob_layers()?
            .iter()
            .flatten()
            .fold(f64::INFINITY, |acc, &p| acc.min(p)))
    }

    /// Largest excursion of `ψ̄(τ_h)` outside `[0, 1]` over positive-probability histories.
    pub fn feature_range_violation(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for (h, layer) in self.psi_layers()?.into_iter().enumerate() {
            for psi in layer {
                if let Ok(feature) = normalize(&self.phi[h], psi) {
                    for v in feature.iter() {
                        worst = worst.max(-v).max(v - 1.0);
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Row vectors `m(ω_h)ᵀ = φ_Hᵀ M_H ··· M_{h+1}` for every future of length `H − h`.
    pub fn future_rows(&self, h: usize) -> Vec<DVector<f64>> {
        let pairs = self.space.n_pairs();
        let mut rows = vec![self.phi[self.space.horizon].clone()];
        for t in (h + 1..=self.space.horizon).rev() {
            let mut next = Vec::with_capacity(rows.len() * pairs);
            for pair in 0..pairs {
                let mt = self.m[t - 1][pair].transpose();
                for rest in &rows {
                    next.push(&mt * rest);
                }
            }
            rows = next;
        }
        rows
    }

    /// Inner supremum of the well-conditioning constant:
    /// `max_h max_i max_π Σ_ω π(ω) |m(ω)ᵀ e_i|`.
    pub fn gamma_sup(&self) -> Result<f64> {
        self.space.check_enumerable()?;
        let mut sup = 0.0f64;
        for h in 0..self.space.horizon {
            let rows = self.future_rows(h);
            let depth = self.space.horizon - h;
            for i in 0..self.dims()[h] {
                let leaves: Vec<f64> = rows.iter().map(|r| r[i].abs()).collect();
                let (_, v) = backward_induction(self.space.n_obs, self.space.n_actions, depth, &leaves);
                sup = sup.max(v);
            }
        }
        Ok(sup)
    }

    /// `γ = 1 / sup`; see [`PsrModel::gamma_sup`].
    pub fn gamma(&self) -> Result<f64> {
        Ok(1.0 / self.gamma_sup()?)
    }

    /// One-step form of the well-conditioned `M` bound:
    /// `max_{h,i} Σ_o max_a ‖M_{h+1}(o,a) e_i‖_1`. Compare against `Q_A / γ`.
    pub fn one_step_m_bound(&self) -> f64 {
        let space = &self.space;
        let mut worst = 0.0f64;
        for h in 0..space.horizon {
            for i in 0..self.dims()[h] {
                let total: f64 = (0..space.n_obs)
                    .map(|o| {
                        (0..space.n_actions)
                            .map(|a| self.matrix(h + 1, o, a).column(i).lp_norm(1))
                            .fold(0.0, f64::max)
                    })
                    .sum();
                worst = worst.max(total);
            }
        }
        worst
    }

    fn check_same_space(&self, other: &PsrModel) -> Result<()> {
        if self.space != other.space {
            return Err(PsrError::Structural("models live on different spaces".into()));
        }
        Ok(())
    }
}

fn normalize(phi: &DVector<f64>, psi: DVector<f64>) -> Result<DVector<f64>> {
    let prob = phi.dot(&psi);
    if prob <= PSI_GUARD {
        return Err(PsrError::DegenerateHistory { prob });
    }
    Ok(psi / prob)
}

/// `Σ_τ π(τ) |P_a(τ) − P_b(τ)|` (no ½).
pub fn tv_distance(a: &PsrModel, b: &PsrModel, policy: &Policy) -> Result<f64> {
    a.check_same_space(b)?;
    let w = policy.leaf_weights(&a.space)?;
    let (pa, pb) = (a.leaf_probs()?, b.leaf_probs()?);
    Ok(compensated_sum(
        w.iter().zip(pa.iter().zip(&pb)).map(|(w, (x, y))| w * (x - y).abs()),
    ))
}

/// `½ Σ_τ (√(π P_a) − √(π P_b))²`.
pub fn hellinger_sq(a: &PsrModel, b: &PsrModel, policy: &Policy) -> Result<f64> {
    a.check_same_space(b)?;
    let w = policy.leaf_weights(&a.space)?;
    let (pa, pb) = (a.leaf_probs()?, b.leaf_probs()?);
    Ok(0.5
        * compensated_sum(w.iter().zip(pa.iter().zip(&pb)).map(|(w, (x, y))| {
            let d = (w * x.max(0.0)).sqrt() - (w * y.max(0.0)).sqrt();
            d * d
        })))
}

/// `max_π Σ_τ π(τ) |P_a(τ) − P_b(τ)|` over deterministic policies.
pub fn max_policy_tv(a: &PsrModel, b: &PsrModel) -> Result<f64> {
    a.check_same_space(b)?;
    let (pa, pb) = (a.leaf_probs()?, b.leaf_probs()?);
    let leaves: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).collect();
    let (_, v) = backward_induction(a.space.n_obs, a.space.n_actions, a.space.horizon, &leaves);
    Ok(v)
}

/// `Σ_τ π(τ) P(τ) f(τ)` by enumeration.
pub fn value<F>(model: &PsrModel, policy: &Policy, leaf_fn: F) -> Result<f64>
where
    F: Fn(&History) -> f64,
{
    let space = model.space;
    let w = policy.leaf_weights(&space)?;
    let p = model.leaf_probs()?;
    let mut acc = CompensatedSum::new();
    for (idx, (w, p)) in w.iter().zip(&p).enumerate() {
        if *w != 0.0 {
            acc.add(w * p * leaf_fn(&History::from_index(&space, space.horizon, idx)));
        }
    }
    Ok(acc.value())
}

/// `Σ_τ π(τ) P(τ) f(τ)` with leaf values supplied in index order.
pub fn value_from_leaves(model: &PsrModel, policy: &Policy, leaves: &[f64]) -> Result<f64> {
    let w = policy.leaf_weights(&model.space)?;
    let p = model.leaf_probs()?;
    Ok(compensated_sum(
        w.iter().zip(&p).zip(leaves).map(|((w, p), f)| w * p * f),
    ))
}

/// Right-hand side of the TV-versus-estimation-error bound:
/// `Σ_h Σ_τ π(τ_H) |m̂(ω_h)ᵀ (M̂_h − M_h)(o_h,a_h) ψ(τ_{h−1})|`,
/// with `m̂` from `hat` and `ψ` from `truth`.
pub fn estimation_error_bound(hat: &PsrModel, truth: &PsrModel, policy: &Policy) -> Result<f64> {
    hat.check_same_space(truth)?;
    if hat.dims() != truth.dims() {
        return Err(PsrError::Structural("models have different core-test dimensions".into()));
    }
    let space = hat.space;
    let pairs = space.n_pairs();
    let w = policy.leaf_weights(&space)?;
    let psi = truth.psi_layers()?;
    let mut acc = CompensatedSum::new();
    for h in 1..=space.horizon {
        let rows = hat.future_rows(h);
        let tail = space.histories_at(space.horizon - h);
        for (leaf, &weight) in w.iter().enumerate() {
            if weight == 0.0 {
                continue;
            }
            let prefix = leaf / (tail * pairs);
            let pair = (leaf / tail) % pairs;
            let rest = leaf % tail;
            let diff = &hat.m[h - 1][pair] - &truth.m[h - 1][pair];
            let term = rows[rest].dot(&(diff * &psi[h - 1][prefix]));
            acc.add(weight * term.abs());
        }
    }
    Ok(acc.value())
}
