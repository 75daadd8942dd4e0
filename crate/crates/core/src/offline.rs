//! The pessimistic offline pipeline: collect under a behavior policy, split
//! evenly into `D_0, …, D_{H−1}`, fit the constrained MLE and plan on
//! `P_θ̂ · (R − b̂)`.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bonus::{decodable_transform, BonusEvaluator};
use crate::error::{PsrError, Result};
use crate::estimation::{
    constrained_mle, make_candidates, CandidateSet, CandidateSpec, Construction, DataEntry, DatasetFamily,
    MleResult,
};
use crate::numeric::compensated_sum;
use crate::online::evaluate_output;
use crate::params::{resolve_offline, EnvSummary, OfflineParams};
use crate::planning::{plan_values, Plan};
use crate::policy::{DeterministicTree, Policy, UniformActionSeq};
use crate::pomdp::TabularPomdp;
use crate::psr::{CoreTestSet, PsrModel};
use crate::seeding::child_rng;
use crate::space::{History, ObsActSpace};

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineConfig {
    pub episodes: usize,
    /// Defaults to a uniform mixture over every exploration sequence.
    #[serde(default)]
    pub behavior: Option<Policy>,
    /// Accept behavior policies that are not observation-independent mixtures.
    #[serde(default)]
    pub allow_general_behavior: bool,
    pub delta: f64,
    #[serde(default = "default_true")]
    pub auto_params: bool,
    #[serde(default)]
    pub c_theory: f64,
    #[serde(default)]
    pub p_min: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Coverage constant in `λ̂`; defaults to `C_∞` of the optimal policy.
    #[serde(default)]
    pub c_target: Option<f64>,
    pub candidates: CandidateSpec,
    #[serde(default)]
    pub decodable_transform: bool,
    pub seed: u64,
}

impl OfflineConfig {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(PsrError::InvalidParameter(format!("delta = {} outside (0, 1)", self.delta)));
        }
        if self.episodes < horizon {
            return Err(PsrError::InvalidParameter(format!(
                "{} episodes cannot fill {horizon} buckets",
                self.episodes
            )));
        }
        if let Some(b) = &self.behavior {
            if !self.allow_general_behavior && !matches!(b, Policy::UniformActionSeq(_)) {
                return Err(PsrError::InvalidParameter(
                    "behavior policy must be an action-sequence mixture unless allow_general_behavior is set".into(),
                ));
            }
        }
        if !self.auto_params {
            for (name, v) in [
                ("p_min", self.p_min),
                ("beta", self.beta),
                ("lambda", self.lambda),
                ("alpha", self.alpha),
            ] {
                match v {
                    Some(v) if v > 0.0 && v.is_finite() => {}
                    _ => {
                        return Err(PsrError::InvalidParameter(format!(
                            "{name} must be given and positive when auto_params is off"
                        )))
                    }
                }
            }
        }
        if self.decodable_transform && !matches!(self.candidates.construction, Construction::Decodable { .. }) {
            return Err(PsrError::InvalidParameter(
                "decodable_transform needs the decodable construction".into(),
            ));
        }
        Ok(())
    }
}

/// Uniform mixture over all of `∪_h Q_h^exp`, each sequence played from step 1
/// and padded with uniform actions.
pub fn default_behavior(space: &ObsActSpace, core_tests: &CoreTestSet) -> Result<Policy> {
    let mut seqs: Vec<Vec<usize>> = Vec::new();
    for h in 0..space.horizon {
        for s in &core_tests.exploration_seqs[h] {
            // Prefix positions before step h+1 are free, so pad them with every action.
            let mut heads: Vec<Vec<usize>> = vec![Vec::new()];
            for _ in 0..h {
                heads = heads
                    .into_iter()
                    .flat_map(|p| {
                        (0..space.n_actions).map(move |a| {
                            let mut q = p.clone();
                            q.push(a);
                            q
                        })
                    })
                    .collect();
            }
            for mut head in heads {
                head.extend_from_slice(s);
                if !seqs.contains(&head) {
                    seqs.push(head);
                }
            }
        }
    }
    Ok(Policy::UniformActionSeq(UniformActionSeq::new(1, space.n_actions, seqs)?))
}

/// `K` i.i.d. episodes under `behavior`; a seeded permutation assigns
/// `split_step = position mod H`, so bucket sizes differ by at most one.
pub fn collect_offline(env: &TabularPomdp, behavior: &Policy, k: usize, seed: u64) -> Result<DatasetFamily> {
    let space = env.space();
    if k < space.horizon {
        return Err(PsrError::InvalidParameter(format!(
            "{k} episodes cannot fill {} buckets",
            space.horizon
        )));
    }
    let episodes: Vec<History> = (0..k)
        .into_par_iter()
        .map(|i| env.sample_episode_with(behavior, &mut child_rng(seed, "offline-episode", i as u64)))
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut child_rng(seed, "split", 0));
    let mut split = vec![0; k];
    for (pos, &i) in order.iter().enumerate() {
        split[i] = pos % space.horizon;
    }
    let mut data = DatasetFamily::new(space);
    let id = data.register_policy(behavior.clone())?;
    for (i, trajectory) in episodes.into_iter().enumerate() {
        data.push(DataEntry {
            split_step: split[i],
            policy_id: id,
            trajectory,
        })?;
    }
    Ok(data)
}

/// `ι`: the smallest probability with which `behavior` plays any sequence of
/// `Q_h^exp` from step `h+1`, minimized over reachable histories and over the
/// observations seen along the way.
pub fn min_exploration_prob(behavior: &Policy, space: &ObsActSpace, core_tests: &CoreTestSet) -> Result<f64> {
    let depths = behavior.weights_by_depth(space)?;
    let mut iota = f64::INFINITY;
    for h in 0..space.horizon {
        for (idx, &w) in depths[h].iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let history = History::from_index(space, h, idx);
            for seq in &core_tests.exploration_seqs[h] {
                iota = iota.min(min_sequence_prob(behavior, space, &history, seq));
            }
        }
    }
    Ok(iota)
}

fn min_sequence_prob(behavior: &Policy, space: &ObsActSpace, history: &History, seq: &[usize]) -> f64 {
    let Some((&a, rest)) = seq.split_first() else {
        return 1.0;
    };
    (0..space.n_obs)
        .map(|o| {
            let p = behavior.action_probs(space, history, o)[a];
            if p == 0.0 {
                0.0
            } else {
                p * min_sequence_prob(behavior, space, &history.extended(o, a), rest)
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// `C_∞ = max_h max_{τ_h} P^π(τ_h) / P^{π^b}(τ_h)`; `+∞` when `π` reaches a
/// prefix the behavior policy never does.
pub fn coverage_coefficient(env: &TabularPomdp, target: &Policy, behavior: &Policy) -> Result<f64> {
    let space = env.space();
    let wt = target.weights_by_depth(&space)?;
    let wb = behavior.weights_by_depth(&space)?;
    let mut worst: f64 = 1.0;
    for h in 1..=space.horizon {
        for (idx, (&t, &b)) in wt[h].iter().zip(&wb[h]).enumerate() {
            if t == 0.0 {
                continue;
            }
            let p = env.exact_traj_prob(&History::from_index(&space, h, idx))?;
            if p == 0.0 {
                continue;
            }
            if b == 0.0 {
                return Ok(f64::INFINITY);
            }
            worst = worst.max(t / b);
        }
    }
    Ok(worst)
}

/// Exact optimal policy of `env` under its reward.
pub fn optimal_policy(env: &TabularPomdp) -> Result<Plan> {
    let p = env.leaf_probs()?;
    let r = env.reward_leaves()?;
    let leaves: Vec<f64> = p.iter().zip(&r).map(|(p, r)| p * r).collect();
    plan_values(&env.space(), &leaves)
}

#[derive(Debug, Clone)]
pub struct LcbOutcome {
    pub params: OfflineParams,
    pub summary: EnvSummary,
    pub mle: MleResult,
    pub candidate_label: String,
    pub model: PsrModel,
    pub evaluator: BonusEvaluator,
    /// `π̂`.
    pub policy: DeterministicTree,
    /// `V_{θ̂,R}^{π̂} − V_{θ̂,b̂}^{π̂}`.
    pub lcb_value: f64,
    pub condition_numbers: Vec<f64>,
}

/// Parameters, MLE, bonus and the pessimistic plan for a fixed dataset.
pub fn run_psr_lcb(
    env: &TabularPomdp,
    data: &DatasetFamily,
    config: &OfflineConfig,
    candidates: &CandidateSet,
    iota: f64,
    c_target: f64,
) -> Result<LcbOutcome> {
    config.validate(env.horizon)?;
    if data.is_empty() {
        return Err(PsrError::InvalidParameter("empty offline dataset".into()));
    }
    let truth = config.candidates.construction.build(env, None)?;
    let summary = EnvSummary::from_env(env, &truth)?;
    let params = if config.auto_params {
        resolve_offline(&summary, data.len(), candidates.len(), config.delta, config.c_theory, iota, c_target)?
    } else {
        OfflineParams {
            p_min: config.p_min.unwrap_or_default(),
            beta: config.beta.unwrap_or_default(),
            lambda: config.lambda.unwrap_or_default(),
            alpha: config.alpha.unwrap_or_default(),
            c_theory: config.c_theory,
            iota,
            c_target,
        }
    };
    let mle = constrained_mle(candidates, data, params.p_min, params.beta).map_err(|e| match e {
        PsrError::EmptyFeasibleSet { .. } => PsrError::EmptyFeasibleSet {
            context: format!("offline estimation over {} episodes", data.len()),
        },
        e => e,
    })?;
    let chosen = &candidates.members[mle.selected];
    let transform = match (config.decodable_transform, config.candidates.construction) {
        (true, Construction::Decodable { m }) => Some(decodable_transform(&chosen.pomdp.g_matrices(m)?)?),
        _ => None,
    };
    let evaluator = BonusEvaluator::build(&chosen.model, data, params.lambda, params.alpha, transform)?;
    let bonus = evaluator.bonus_leaves(&chosen.model)?;
    let rewards = env.reward_leaves()?;
    let leaves: Vec<f64> = chosen
        .probs
        .leaves()
        .iter()
        .zip(rewards.iter().zip(&bonus))
        .map(|(p, (r, b))| p * (r - b))
        .collect();
    let plan = plan_values(&env.space(), &leaves)?;
    Ok(LcbOutcome {
        params,
        summary,
        condition_numbers: evaluator.condition_numbers(),
        candidate_label: chosen.label.clone(),
        model: chosen.model.clone(),
        evaluator,
        mle,
        policy: plan.policy,
        lcb_value: plan.value,
    })
}

/// `V_{θ*,R}^{target} − V_{θ*,R}^{π̂}`, exact. May be negative.
pub fn offline_gap(env: &TabularPomdp, target: &Policy, estimate: &Policy) -> Result<f64> {
    let space = env.space();
    let p = env.leaf_probs()?;
    let r = env.reward_leaves()?;
    let v = |pi: &Policy| -> Result<f64> {
        let w = pi.leaf_weights(&space)?;
        Ok(compensated_sum(w.iter().zip(p.iter().zip(&r)).map(|(w, (p, r))| w * p * r)))
    };
    Ok(v(target)? - v(estimate)?)
}

/// One row of an offline sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineReport {
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
    pub gap: f64,
    pub lcb_value: f64,
    pub iota: f64,
    pub c_infinity: f64,
}

#[derive(Debug, Clone)]
pub struct OfflineRun {
    pub report: OfflineReport,
    pub outcome: LcbOutcome,
    pub data: DatasetFamily,
    pub max_tv: f64,
}

/// Candidate class, collection, estimation and gap against the optimal policy.
pub fn run_offline(env: &TabularPomdp, config: &OfflineConfig) -> Result<OfflineRun> {
    let candidates = make_candidates(env, &config.candidates)?;
    run_offline_with(env, config, &candidates)
}

pub fn run_offline_with(env: &TabularPomdp, config: &OfflineConfig, candidates: &CandidateSet) -> Result<OfflineRun> {
    config.validate(env.horizon)?;
    let space = env.space();
    let core_tests = &candidates.members[0].model.core_tests;
    let behavior = match &config.behavior {
        Some(b) => b.clone(),
        None => default_behavior(&space, core_tests)?,
    };
    let iota = min_exploration_prob(&behavior, &space, core_tests)?;
    if !(iota > 0.0) {
        return Err(PsrError::InvalidParameter(
            "behavior policy never plays some exploration sequence".into(),
        ));
    }
    let optimal = Policy::DeterministicTree(optimal_policy(env)?.policy);
    let c_infinity = coverage_coefficient(env, &optimal, &behavior)?;
    let c_target = match config.c_target {
        Some(c) => c,
        None if c_infinity.is_finite() => c_infinity,
        None => {
            return Err(PsrError::InvalidParameter(
                "optimal policy is not covered; set c_target explicitly".into(),
            ))
        }
    };
    let data = collect_offline(env, &behavior, config.episodes, config.seed)?;
    let outcome = run_psr_lcb(env, &data, config, candidates, iota, c_target)?;
    let estimate = Policy::DeterministicTree(outcome.policy.clone());
    let gap = offline_gap(env, &optimal, &estimate)?;
    let (_, max_tv) = evaluate_output(env, &outcome.model, &estimate)?;
    Ok(OfflineRun {
        report: OfflineReport {
            k: config.episodes,
            seed: config.seed,
            gap,
            lcb_value: outcome.lcb_value,
            iota,
            c_infinity,
        },
        outcome,
        data,
        max_tv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomdp::{reference_instance, tiger};

    #[test]
    fn even_split_sizes() {
        let env = tiger(3).unwrap();
        let data = collect_offline(&env, &Policy::uniform(3), 10, 4).unwrap();
        let mut sizes = data.bucket_sizes();
        sizes.sort();
        assert_eq!(sizes, vec![3, 3, 4]);
        assert_eq!(data.bucket_sizes(), collect_offline(&env, &Policy::uniform(3), 10, 4).unwrap().bucket_sizes());
    }

    #[test]
    fn uniform_behavior_iota() {
        let env = reference_instance();
        let tests = CoreTestSet::new(
            &env.space(),
            vec![
                vec![crate::space::Future::new(0, vec![(0, 0), (0, 1)])],
                vec![crate::space::Future::new(1, vec![(0, 0)])],
            ],
        )
        .unwrap();
        let iota = min_exploration_prob(&Policy::uniform(2), &env.space(), &tests).unwrap();
        assert!((iota - 0.25).abs() < 1e-15);
    }

    #[test]
    fn self_coverage_is_one() {
        let env = reference_instance();
        let b = Policy::uniform(2);
        assert_eq!(coverage_coefficient(&env, &b, &b).unwrap(), 1.0);
    }

    #[test]
    fn uncovered_target_is_infinite() {
        let env = reference_instance();
        let space = env.space();
        let b = Policy::DeterministicTree(DeterministicTree::constant(space, 0));
        let t = Policy::DeterministicTree(DeterministicTree::constant(space, 1));
        assert_eq!(coverage_coefficient(&env, &t, &b).unwrap(), f64::INFINITY);
    }

    #[test]
    fn identical_policies_have_zero_gap() {
        let env = reference_instance();
        let p = Policy::DeterministicTree(optimal_policy(&env).unwrap().policy);
        assert_eq!(offline_gap(&env, &p, &p).unwrap(), 0.0);
    }
}
