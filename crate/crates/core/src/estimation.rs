//! Datasets, finite candidate classes and constrained maximum likelihood.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PsrError, Result};
use crate::numeric::CompensatedSum;
use crate::policy::Policy;
use crate::pomdp::{fix_sum, TabularPomdp};
use crate::psr::{PsrModel, PSI_GUARD};
use crate::space::{Future, History, ObsActSpace};

/// Candidate families larger than this are refused.
pub const MAX_CANDIDATES: u128 = 100_000;

/// Entries of dithered rows are floored here before renormalizing.
pub const DITHER_FLOOR: f64 = 1e-3;

/// One collected trajectory and the policy that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataEntry {
    #[serde(rename = "h")]
    pub split_step: usize,
    pub policy_id: usize,
    pub trajectory: History,
}

/// Buckets `D_0, …, D_{H−1}` plus the policy registry.
#[derive(Debug, Clone)]
pub struct DatasetFamily {
    space: ObsActSpace,
    buckets: Vec<Vec<DataEntry>>,
    policies: Vec<Policy>,
    leaf_weights: Vec<Vec<f64>>,
    /// `(π(τ_H), π(τ_h))` per entry, parallel to `buckets`.
    weights: Vec<Vec<(f64, f64)>>,
}

impl DatasetFamily {
    pub fn new(space: ObsActSpace) -> Self {
        Self {
            space,
            buckets: vec![Vec::new(); space.horizon],
            policies: Vec::new(),
            leaf_weights: Vec::new(),
            weights: vec![Vec::new(); space.horizon],
        }
    }

    pub fn space(&self) -> &ObsActSpace {
        &self.space
    }

    pub fn register_policy(&mut self, policy: Policy) -> Result<usize> {
        let leaves = policy.leaf_weights(&self.space)?;
        self.policies.push(policy);
        self.leaf_weights.push(leaves);
        Ok(self.policies.len() - 1)
    }

    pub fn policy(&self, id: usize) -> &Policy {
        &self.policies[id]
    }

    pub fn policies(&self) -> &[Policy] {
        &self.policies
    }

    /// `π(τ_H)` for every full trajectory under policy `id`.
    pub fn policy_leaf_weights(&self, id: usize) -> &[f64] {
        &self.leaf_weights[id]
    }

    pub fn push(&mut self, entry: DataEntry) -> Result<()> {
        if entry.trajectory.len() != self.space.horizon {
            return Err(PsrError::Structural(format!(
                "trajectory of length {} in a horizon-{} dataset",
                entry.trajectory.len(),
                self.space.horizon
            )));
        }
        entry.trajectory.validate(&self.space)?;
        if entry.split_step >= self.space.horizon {
            return Err(PsrError::Structural(format!("split step {} out of range", entry.split_step)));
        }
        let policy = self.policies.get(entry.policy_id).ok_or_else(|| {
            PsrError::Structural(format!("unknown policy id {}", entry.policy_id))
        })?;
        let full = self.leaf_weights[entry.policy_id][entry.trajectory.index(&self.space)];
        let prefix = policy.weight(&self.space, &entry.trajectory.prefix(entry.split_step));
        self.weights[entry.split_step].push((full, prefix));
        self.buckets[entry.split_step].push(entry);
        Ok(())
    }

    pub fn bucket(&self, h: usize) -> &[DataEntry] {
        &self.buckets[h]
    }

    pub fn bucket_sizes(&self) -> Vec<usize> {
        self.buckets.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> impl Iterator<Item = &DataEntry> {
        self.buckets.iter().flatten()
    }

    fn entries_with_weights(&self) -> impl Iterator<Item = (&DataEntry, (f64, f64))> {
        self.buckets
            .iter()
            .zip(&self.weights)
            .flat_map(|(b, w)| b.iter().zip(w.iter().copied()))
    }

    /// One JSON record per line, buckets in order.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for entry in self.entries() {
            out.push_str(&serde_json::to_string(entry)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(space: ObsActSpace, policies: Vec<Policy>, text: &str) -> Result<Self> {
        let mut data = DatasetFamily::new(space);
        for policy in policies {
            data.register_policy(policy)?;
        }
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            data.push(serde_json::from_str(line)?)?;
        }
        Ok(data)
    }
}

/// Log-likelihood with an explicit `−∞` ordered below every real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogLik {
    NegInfinity,
    Finite(f64),
}

impl LogLik {
    pub fn finite(self) -> Option<f64> {
        match self {
            LogLik::Finite(v) => Some(v),
            LogLik::NegInfinity => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, LogLik::Finite(_))
    }
}

impl Eq for LogLik {}

impl PartialOrd for LogLik {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LogLik {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (LogLik::NegInfinity, LogLik::NegInfinity) => Ordering::Equal,
            (LogLik::NegInfinity, _) => Ordering::Less,
            (_, LogLik::NegInfinity) => Ordering::Greater,
            (LogLik::Finite(a), LogLik::Finite(b)) => a.total_cmp(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogLikScope {
    Full,
    Bucket(usize),
}

/// Sequence probabilities of every history of every length, in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelProbs {
    space: ObsActSpace,
    layers: Vec<Vec<f64>>,
}

impl ModelProbs {
    pub fn new(model: &PsrModel) -> Result<Self> {
        Ok(Self {
            space: model.space,
            layers: model.prob_layers()?,
        })
    }

    pub fn prob(&self, history: &History) -> f64 {
        self.layers[history.len()][history.index(&self.space)]
    }

    pub fn layer(&self, h: usize) -> &[f64] {
        &self.layers[h]
    }

    pub fn leaves(&self) -> &[f64] {
        &self.layers[self.space.horizon]
    }
}

fn log_term(policy_weight: f64, prob: f64) -> Option<f64> {
    let p = policy_weight * prob;
    if p > 0.0 {
        Some(p.ln())
    } else {
        None
    }
}

/// `Σ log P_θ^π(τ_H)` over the requested scope.
pub fn log_likelihood(probs: &ModelProbs, data: &DatasetFamily, scope: LogLikScope) -> LogLik {
    let buckets: Vec<usize> = match scope {
        LogLikScope::Full => (0..data.space.horizon).collect(),
        LogLikScope::Bucket(h) => vec![h],
    };
    let mut acc = CompensatedSum::new();
    for h in buckets {
        for (entry, &(w, _)) in data.buckets[h].iter().zip(&data.weights[h]) {
            match log_term(w, probs.prob(&entry.trajectory)) {
                Some(v) => acc.add(v),
                None => return LogLik::NegInfinity,
            }
        }
    }
    LogLik::Finite(acc.value())
}

/// `Σ_h Σ_{D_h} log P_θ^π(τ_h)` over the bucket prefixes.
pub fn prefix_log_likelihood(probs: &ModelProbs, data: &DatasetFamily) -> LogLik {
    let mut acc = CompensatedSum::new();
    for h in 0..data.space.horizon {
        for (entry, &(_, w)) in data.buckets[h].iter().zip(&data.weights[h]) {
            match log_term(w, probs.prob(&entry.trajectory.prefix(h))) {
                Some(v) => acc.add(v),
                None => return LogLik::NegInfinity,
            }
        }
    }
    LogLik::Finite(acc.value())
}

/// `min_h min_{(τ_h,π) ∈ D_h} P_θ^π(τ_h)`; `+∞` for an empty dataset.
pub fn min_prefix_prob(probs: &ModelProbs, data: &DatasetFamily) -> f64 {
    let mut worst = f64::INFINITY;
    for h in 0..data.space.horizon {
        for (entry, &(_, w)) in data.buckets[h].iter().zip(&data.weights[h]) {
            worst = worst.min(w * probs.prob(&entry.trajectory.prefix(h)));
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowRef {
    Emission { step: usize, state: usize },
    Transition { step: usize, action: usize, state: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateFamily {
    None,
    /// Each listed row ranges over the simplex lattice of the given resolution.
    Grid { rows: Vec<RowRef>, resolution: f64 },
    /// Every stochastic row receives additive Gaussian noise of the given scale.
    Dithered { n: usize, scale: f64, seed: u64 },
}

/// How a candidate POMDP becomes a PSR. All members share core tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Construction {
    /// `G`-matrix route with windows of `m` observations.
    Decodable { m: usize },
    /// Dynamics-matrix route with the true environment's selected core tests.
    Generic,
}

impl Construction {
    pub fn build(&self, env: &TabularPomdp, tests: Option<&[Vec<Future>]>) -> Result<PsrModel> {
        match self {
            Construction::Decodable { m } => env.to_psr_decodable(*m),
            Construction::Generic => match tests {
                Some(t) => env.to_psr_with_tests(t.to_vec()),
                None => env.to_psr(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSpec {
    pub include_true: bool,
    pub family: CandidateFamily,
    pub construction: Construction,
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub label: String,
    pub pomdp: TabularPomdp,
    pub model: PsrModel,
    pub probs: ModelProbs,
}

impl Candidate {
    pub fn new(label: String, pomdp: TabularPomdp, model: PsrModel) -> Result<Self> {
        let probs = ModelProbs::new(&model)?;
        Ok(Self {
            label,
            pomdp,
            model,
            probs,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub members: Vec<Candidate>,
    /// Family members dropped because their PSR conversion failed.
    pub skipped: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.members.iter().map(|c| c.label.clone()).collect()
    }

    /// Serialized as `[{label, model}]` in the model format.
    pub fn to_json(&self) -> Result<String> {
        let docs: Vec<serde_json::Value> = self
            .members
            .iter()
            .map(|c| Ok(serde_json::json!({ "label": c.label, "model": serde_json::to_value(&c.model)? })))
            .collect::<Result<_>>()?;
        Ok(serde_json::to_string_pretty(&docs)?)
    }
}

fn lattice(width: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(width: usize, remaining: usize, steps: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if prefix.len() + 1 == width {
            prefix.push(remaining);
            out.push(prefix.iter().map(|&k| k as f64 / steps as f64).collect());
            prefix.pop();
            return;
        }
        for k in 0..=remaining {
            prefix.push(k);
            rec(width, remaining - k, steps, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(width, steps, steps, &mut Vec::new(), &mut out);
    out
}

fn binomial(n: u128, k: u128) -> u128 {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

fn row_mut<'a>(env: &'a mut TabularPomdp, row: &RowRef) -> Result<&'a mut Vec<f64>> {
    let bad = || PsrError::InvalidParameter(format!("row {row:?} outside the environment"));
    match *row {
        RowRef::Emission { step, state } => env
            .emission
            .get_mut(step)
            .and_then(|l| l.get_mut(state))
            .ok_or_else(bad),
        RowRef::Transition { step, action, state } => env
            .transition
            .get_mut(step)
            .and_then(|l| l.get_mut(action))
            .and_then(|l| l.get_mut(state))
            .ok_or_else(bad),
    }
}

fn dither<R: Rng + ?Sized>(row: &mut [f64], noise: &Normal<f64>, rng: &mut R) {
    for v in row.iter_mut() {
        *v = (*v + noise.sample(rng)).max(DITHER_FLOOR);
    }
    let total: f64 = row.iter().sum();
    for v in row.iter_mut() {
        *v /= total;
    }
    fix_sum(row);
}

/// Builds a finite candidate class around `env`. The true model comes first
/// when requested; all members share the core tests of the true model.
pub fn make_candidates(env: &TabularPomdp, spec: &CandidateSpec) -> Result<CandidateSet> {
    let truth = spec.construction.build(env, None)?;
    let tests = truth.core_tests.tests.clone();
    let mut members = Vec::new();
    let mut skipped = 0;
    if spec.include_true {
        members.push(Candidate::new("true".into(), env.clone(), truth)?);
    }
    let mut admit = |label: String, pomdp: TabularPomdp, members: &mut Vec<Candidate>| -> Result<bool> {
        if pomdp.validate().is_err() {
            skipped += 1;
            return Ok(false);
        }
        match spec.construction.build(&pomdp, Some(&tests)) {
            Ok(model) => {
                members.push(Candidate::new(label, pomdp, model)?);
                Ok(true)
            }
            Err(PsrError::SingularCoreTests { .. }) | Err(PsrError::InsufficientCoreTests { .. }) => {
                skipped += 1;
                Ok(false)
            }
            Err(e) => Err(e),
        }
    };
    match &spec.family {
        CandidateFamily::None => {}
        CandidateFamily::Grid { rows, resolution } => {
            if !(*resolution > 0.0 && *resolution <= 1.0) {
                return Err(PsrError::InvalidParameter("grid resolution must lie in (0, 1]".into()));
            }
            let steps = (1.0 / resolution).round() as usize;
            if ((steps as f64) * resolution - 1.0).abs() > 1e-9 {
                return Err(PsrError::InvalidParameter("1 / resolution must be an integer".into()));
            }
            let mut probe = env.clone();
            let mut lattices = Vec::with_capacity(rows.len());
            let mut total: u128 = 1;
            for row in rows {
                let width = row_mut(&mut probe, row)?.len();
                total = total.saturating_mul(binomial((steps + width - 1) as u128, (width - 1) as u128));
                if total > MAX_CANDIDATES {
                    return Err(PsrError::CandidateBlowUp(total));
                }
                lattices.push(lattice(width, steps));
            }
            let mut choice = vec![0usize; rows.len()];
            'outer: loop {
                let mut pomdp = env.clone();
                for (r, row) in rows.iter().enumerate() {
                    *row_mut(&mut pomdp, row)? = lattices[r][choice[r]].clone();
                }
                let label = format!(
                    "grid({})",
                    choice.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
                );
                admit(label, pomdp, &mut members)?;
                for r in (0..rows.len()).rev() {
                    choice[r] += 1;
                    if choice[r] < lattices[r].len() {
                        continue 'outer;
                    }
                    choice[r] = 0;
                }
                break;
            }
        }
        CandidateFamily::Dithered { n, scale, seed } => {
            if (*n as u128) > MAX_CANDIDATES {
                return Err(PsrError::CandidateBlowUp(*n as u128));
            }
            let noise = Normal::new(0.0, *scale)
                .map_err(|e| PsrError::InvalidParameter(format!("dither scale: {e}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut made = 0;
            let mut draws = 0;
            while made < *n {
                if draws >= 100 * n.max(&1) {
                    return Err(PsrError::RejectionBudget(draws));
                }
                let mut pomdp = env.clone();
                for layer in pomdp.transition.iter_mut() {
                    for mat in layer.iter_mut() {
                        for row in mat.iter_mut() {
                            dither(row, &noise, &mut rng);
                        }
                    }
                }
                for mat in pomdp.emission.iter_mut() {
                    for row in mat.iter_mut() {
                        dither(row, &noise, &mut rng);
                    }
                }
                if admit(format!("perturbed({seed},{draws})"), pomdp, &mut members)? {
                    made += 1;
                }
                draws += 1;
            }
        }
    }
    if members.is_empty() {
        return Err(PsrError::InvalidParameter("candidate class is empty".into()));
    }
    Ok(CandidateSet { members, skipped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub selected: usize,
    /// Indices passing the `p_min` filter.
    pub feasible: Vec<usize>,
    /// Feasible indices within `β` of the best log-likelihood.
    pub confidence_set: Vec<usize>,
    pub log_likelihoods: Vec<LogLik>,
}

/// `Θ_min` filter on bucket prefixes, then the likelihood maximizer among the
/// survivors (ties to the lowest index).
pub fn constrained_mle(
    candidates: &CandidateSet,
    data: &DatasetFamily,
    p_min: f64,
    beta: f64,
) -> Result<MleResult> {
    if candidates.is_empty() {
        return Err(PsrError::InvalidParameter("no candidates".into()));
    }
    let scored: Vec<(bool, LogLik)> = candidates
        .members
        .par_iter()
        .map(|c| {
            (
                min_prefix_prob(&c.probs, data) >= p_min,
                log_likelihood(&c.probs, data, LogLikScope::Full),
            )
        })
        .collect();
    let feasible: Vec<usize> = (0..scored.len()).filter(|&i| scored[i].0).collect();
    let Some(&first) = feasible.first() else {
        return Err(PsrError::EmptyFeasibleSet {
            context: String::new(),
        });
    };
    let mut selected = first;
    for &i in &feasible {
        if scored[i].1 > scored[selected].1 {
            selected = i;
        }
    }
    let best = scored[selected].1;
    let confidence_set = feasible
        .iter()
        .copied()
        .filter(|&i| match (scored[i].1, best) {
            (LogLik::Finite(v), LogLik::Finite(b)) => v >= b - beta,
            (LogLik::NegInfinity, LogLik::NegInfinity) => true,
            _ => false,
        })
        .collect();
    Ok(MleResult {
        selected,
        feasible,
        confidence_set,
        log_likelihoods: scored.into_iter().map(|s| s.1).collect(),
    })
}

fn conditional_tv(
    weights: &[f64],
    a: &ModelProbs,
    b: &ModelProbs,
    h: usize,
    prefix: &History,
    prefix_weight: f64,
) -> Result<f64> {
    let space = a.space;
    let pa = a.prob(prefix);
    let pb = b.prob(prefix);
    for p in [pa, pb] {
        if p <= PSI_GUARD {
            return Err(PsrError::DegenerateHistory { prob: p });
        }
    }
    let tail = space.histories_at(space.horizon - h);
    let start = prefix.index(&space) * tail;
    let mut acc = CompensatedSum::new();
    for leaf in start..start + tail {
        let w = weights[leaf] / prefix_weight;
        if w != 0.0 {
            acc.add(w * (a.leaves()[leaf] / pa - b.leaves()[leaf] / pb).abs());
        }
    }
    Ok(acc.value())
}

/// `Σ_h Σ_{(τ_h,π) ∈ D_h} D_TV²(P_a^π(ω_h|τ_h), P_b^π(ω_h|τ_h))`.
pub fn conditional_tv_diagnostic(a: &ModelProbs, b: &ModelProbs, data: &DatasetFamily) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for (entry, (_, prefix_weight)) in data.entries_with_weights() {
        let h = entry.split_step;
        let prefix = entry.trajectory.prefix(h);
        let tv = conditional_tv(
            data.policy_leaf_weights(entry.policy_id),
            a,
            b,
            h,
            &prefix,
            prefix_weight,
        )?;
        acc.add(tv * tv);
    }
    Ok(acc.value())
}

/// `Σ_{(τ_H,π) ∈ D} D_H²(P_a^π, P_b^π)` over full trajectories.
pub fn hellinger_diagnostic(a: &ModelProbs, b: &ModelProbs, data: &DatasetFamily) -> f64 {
    let mut per_policy: Vec<Option<f64>> = vec![None; data.policies.len()];
    let mut acc = CompensatedSum::new();
    for entry in data.entries() {
        let id = entry.policy_id;
        let value = *per_policy[id].get_or_insert_with(|| {
            let w = &data.leaf_weights[id];
            let mut s = CompensatedSum::new();
            for ((w, x), y) in w.iter().zip(a.leaves()).zip(b.leaves()) {
                let d = (w * x.max(0.0)).sqrt() - (w * y.max(0.0)).sqrt();
                s.add(d * d);
            }
            0.5 * s.value()
        });
        acc.add(value);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::reference_instance;

    fn spec(family: CandidateFamily) -> CandidateSpec {
        CandidateSpec {
            include_true: true,
            family,
            construction: Construction::Decodable { m: 1 },
        }
    }

    #[test]
    fn neg_infinity_orders_below_reals() {
        assert!(LogLik::NegInfinity < LogLik::Finite(-1e300));
        assert!(LogLik::Finite(-1.0) < LogLik::Finite(0.0));
    }

    #[test]
    fn empty_dataset_has_zero_likelihood() {
        let env = reference_instance();
        let model = env.to_psr_decodable(1).unwrap();
        let probs = ModelProbs::new(&model).unwrap();
        let data = DatasetFamily::new(env.space());
        assert_eq!(log_likelihood(&probs, &data, LogLikScope::Full), LogLik::Finite(0.0));
    }

    #[test]
    fn single_entry_likelihood_is_log_prob() {
        let env = reference_instance();
        let model = env.to_psr_decodable(1).unwrap();
        let probs = ModelProbs::new(&model).unwrap();
        let mut data = DatasetFamily::new(env.space());
        let id = data
            .register_policy(Policy::DeterministicTree(crate::policy::DeterministicTree::constant(
                env.space(),
                1,
            )))
            .unwrap();
        let traj = History::new(vec![(2, 1), (0, 1)]);
        data.push(DataEntry {
            split_step: 1,
            policy_id: id,
            trajectory: traj.clone(),
        })
        .unwrap();
        let p = env.exact_traj_prob(&traj).unwrap();
        let ll = log_likelihood(&probs, &data, LogLikScope::Full).finite().unwrap();
        assert!((ll - p.ln()).abs() < 1e-10);
        assert_eq!(log_likelihood(&probs, &data, LogLikScope::Bucket(0)), LogLik::Finite(0.0));
    }

    #[test]
    fn grid_over_one_bernoulli_row() {
        let env = crate::pomdp::random_mdp(1, 2, 2, 2).unwrap();
        let rows = vec![RowRef::Transition {
            step: 0,
            action: 0,
            state: 0,
        }];
        let mut s = spec(CandidateFamily::Grid { rows, resolution: 0.25 });
        s.include_true = false;
        let set = make_candidates(&env, &s).unwrap();
        assert_eq!(set.len() + set.skipped, 5);
        assert_eq!(set.len(), 5);
    }

    #[test]
    fn grid_blow_up_is_refused() {
        let env = reference_instance();
        let rows = vec![
            RowRef::Emission { step: 0, state: 0 },
            RowRef::Emission { step: 0, state: 1 },
            RowRef::Emission { step: 1, state: 0 },
            RowRef::Emission { step: 1, state: 1 },
        ];
        let err = make_candidates(&env, &spec(CandidateFamily::Grid { rows, resolution: 0.01 })).unwrap_err();
        assert!(matches!(err, PsrError::CandidateBlowUp(_)));
    }

    #[test]
    fn dithered_members_are_valid() {
        let env = reference_instance();
        let set = make_candidates(
            &env,
            &spec(CandidateFamily::Dithered {
                n: 50,
                scale: 0.05,
                seed: 9,
            }),
        )
        .unwrap();
        assert_eq!(set.len(), 51);
        assert_eq!(set.members[0].label, "true");
        for c in &set.members {
            assert!(c.model.check_self_consistency() <= 1e-9);
        }
    }
}
