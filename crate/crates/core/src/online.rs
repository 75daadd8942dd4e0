//! The optimistic exploration loop.
//!
//! Each iteration collects one episode per step `h` under
//! `ν_h(π^{k−1}, u_{Q_{h−1}^exp})`, refits the constrained MLE, rebuilds the
//! bonus and plans optimistically on `P_θ̂ · b̂`. The loop body only sees a
//! trajectory sampler, never the reward; the reward enters once, when the
//! final policy is extracted.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bonus::{decodable_transform, BonusEvaluator};
use crate::error::{PsrError, Result};
use crate::estimation::{
    constrained_mle, make_candidates, CandidateSet, CandidateSpec, Construction, DataEntry, DatasetFamily,
    MleResult,
};
use crate::numeric::compensated_sum;
use crate::params::{resolve_online, EnvSummary, OnlineParams};
use crate::planning::{backward_induction, plan_values};
use crate::policy::{DeterministicTree, Policy, UniformActionSeq};
use crate::pomdp::TabularPomdp;
use crate::psr::{CoreTestSet, PsrModel};
use crate::seeding::child_rng;
use crate::space::History;

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub max_iterations: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Derive `p_min`, `β`, `λ`, `α` from the theory formulas scaled by `c_theory`.
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
    pub candidates: CandidateSpec,
    /// Map features through `G†` (decodable construction only).
    #[serde(default)]
    pub decodable_transform: bool,
    pub seed: u64,
}

impl OnlineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("epsilon", self.epsilon), ("delta", self.delta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(PsrError::InvalidParameter(format!("{name} = {v} outside (0, 1)")));
            }
        }
        if self.max_iterations == 0 {
            return Err(PsrError::InvalidParameter("max_iterations must be positive".into()));
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

    /// Resolved parameters for a class of `n_candidates` models.
    pub fn resolve(&self, summary: &EnvSummary, n_candidates: usize) -> Result<OnlineParams> {
        if self.auto_params {
            return resolve_online(summary, self.max_iterations, n_candidates, self.delta, self.c_theory);
        }
        let params = OnlineParams {
            p_min: self.p_min.unwrap_or_default(),
            beta: self.beta.unwrap_or_default(),
            lambda: self.lambda.unwrap_or_default(),
            alpha: self.alpha.unwrap_or_default(),
            c_theory: self.c_theory,
        };
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub k: usize,
    pub candidate_id: usize,
    pub feasible_size: usize,
    pub ucb_value: f64,
    pub dataset_sizes: Vec<usize>,
    pub terminated: bool,
}

/// State exposed to observers after each iteration's planning step.
pub struct IterationView<'a> {
    pub k: usize,
    pub data: &'a DatasetFamily,
    pub candidates: &'a CandidateSet,
    pub mle: &'a MleResult,
    pub evaluator: &'a BonusEvaluator,
    pub policy: &'a DeterministicTree,
    pub ucb_value: f64,
    pub params: &'a OnlineParams,
}

#[derive(Debug, Clone)]
pub struct OnlineOutcome {
    pub params: OnlineParams,
    pub summary: EnvSummary,
    pub logs: Vec<IterationLog>,
    pub terminated: bool,
    /// `θ^ε`, the estimate at termination.
    pub model: Option<PsrModel>,
    pub candidate_label: Option<String>,
    /// `π̄`, greedy under the reward on `θ^ε`.
    pub policy: Option<DeterministicTree>,
    pub data: DatasetFamily,
}

/// `ν_h(prefix, u_{Q_{h−1}^exp})`: `prefix` before step `h`, then a uniform
/// mixture over the exploration sequences padded with uniform actions.
pub fn exploration_policy(prefix: &Policy, h: usize, core_tests: &CoreTestSet) -> Result<Policy> {
    let n_steps = core_tests.exploration_seqs.len();
    if h == 0 || h > n_steps {
        return Err(PsrError::InvalidParameter(format!("exploration step {h} outside 1..={n_steps}")));
    }
    let n_actions = match prefix {
        Policy::DeterministicTree(t) => t.space.n_actions,
        Policy::UniformActionSeq(u) => u.n_actions,
        Policy::Composite(_) => {
            return Err(PsrError::InvalidParameter("prefix must not itself be composite".into()))
        }
    };
    let suffix = Policy::UniformActionSeq(UniformActionSeq::new(
        h,
        n_actions,
        core_tests.exploration_seqs[h - 1].clone(),
    )?);
    if h == 1 {
        return Ok(suffix);
    }
    Ok(Policy::composite(h, prefix.clone(), suffix))
}

/// Builds the candidate class, resolves parameters and runs the loop.
pub fn run_psr_ucb(env: &TabularPomdp, config: &OnlineConfig) -> Result<OnlineOutcome> {
    let candidates = make_candidates(env, &config.candidates)?;
    run_with_candidates(env, config, &candidates, &mut |_| Ok(()))
}

/// As [`run_psr_ucb`] with a prepared class and a per-iteration observer.
pub fn run_with_candidates(
    env: &TabularPomdp,
    config: &OnlineConfig,
    candidates: &CandidateSet,
    observer: &mut dyn FnMut(&IterationView) -> Result<()>,
) -> Result<OnlineOutcome> {
    config.validate()?;
    let truth = config.candidates.construction.build(env, None)?;
    let summary = EnvSummary::from_env(env, &truth)?;
    let params = config.resolve(&summary, candidates.len())?;
    let sampler = |policy: &Policy, rng: &mut ChaCha8Rng| env.sample_episode_with(policy, rng);
    let (logs, data, selected) = explore(config, candidates, &params, &sampler, observer)?;
    let terminated = selected.is_some();
    let (model, candidate_label, policy) = match selected {
        Some(i) => {
            let c = &candidates.members[i];
            let rewards = env.reward_leaves()?;
            let leaves: Vec<f64> = c.probs.leaves().iter().zip(&rewards).map(|(p, r)| p * r).collect();
            let plan = plan_values(&c.model.space, &leaves)?;
            (Some(c.model.clone()), Some(c.label.clone()), Some(plan.policy))
        }
        None => (None, None, None),
    };
    Ok(OnlineOutcome {
        params,
        summary,
        logs,
        terminated,
        model,
        candidate_label,
        policy,
        data,
    })
}

type Explored = (Vec<IterationLog>, DatasetFamily, Option<usize>);

fn explore(
    config: &OnlineConfig,
    candidates: &CandidateSet,
    params: &OnlineParams,
    sampler: &dyn Fn(&Policy, &mut ChaCha8Rng) -> History,
    observer: &mut dyn FnMut(&IterationView) -> Result<()>,
) -> Result<Explored> {
    let first = &candidates.members[0].model;
    let space = first.space;
    let core_tests = &first.core_tests;
    let horizon = space.horizon;
    let mut data = DatasetFamily::new(space);
    let mut prefix = Policy::uniform(space.n_actions);
    let mut logs = Vec::with_capacity(config.max_iterations);
    for k in 1..=config.max_iterations {
        for h in 1..=horizon {
            let policy = exploration_policy(&prefix, h, core_tests)?;
            let mut rng = child_rng(config.seed, "episode", ((k - 1) * horizon + h - 1) as u64);
            let trajectory = sampler(&policy, &mut rng);
            let policy_id = data.register_policy(policy)?;
            data.push(DataEntry {
                split_step: h - 1,
                policy_id,
                trajectory,
            })?;
        }
        let mle = constrained_mle(candidates, &data, params.p_min, params.beta).map_err(|e| match e {
            PsrError::EmptyFeasibleSet { .. } => PsrError::EmptyFeasibleSet {
                context: format!("online iteration {k}"),
            },
            e => e,
        })?;
        let chosen = &candidates.members[mle.selected];
        let transform = match (config.decodable_transform, config.candidates.construction) {
            (true, Construction::Decodable { m }) => Some(decodable_transform(&chosen.pomdp.g_matrices(m)?)?),
            _ => None,
        };
        let evaluator = BonusEvaluator::build(&chosen.model, &data, params.lambda, params.alpha, transform)?;
        let bonus = evaluator.bonus_leaves(&chosen.model)?;
        let leaves: Vec<f64> = chosen.probs.leaves().iter().zip(&bonus).map(|(p, b)| p * b).collect();
        let plan = plan_values(&space, &leaves)?;
        let ucb_value = plan.value.clamp(0.0, 1.0);
        let terminated = ucb_value <= config.epsilon / 2.0;
        observer(&IterationView {
            k,
            data: &data,
            candidates,
            mle: &mle,
            evaluator: &evaluator,
            policy: &plan.policy,
            ucb_value,
            params,
        })?;
        logs.push(IterationLog {
            k,
            candidate_id: mle.selected,
            feasible_size: mle.feasible.len(),
            ucb_value,
            dataset_sizes: data.bucket_sizes(),
            terminated,
        });
        if terminated {
            return Ok((logs, data, Some(mle.selected)));
        }
        prefix = Policy::DeterministicTree(plan.policy);
    }
    Ok((logs, data, None))
}

/// Exact suboptimality of `policy` on `env` and `max_π Σ_τ π(τ)|P_θ(τ) − P*(τ)|`.
pub fn evaluate_output(env: &TabularPomdp, model: &PsrModel, policy: &Policy) -> Result<(f64, f64)> {
    let space = env.space();
    let truth = env.leaf_probs()?;
    let rewards = env.reward_leaves()?;
    let weighted: Vec<f64> = truth.iter().zip(&rewards).map(|(p, r)| p * r).collect();
    let (_, optimum) = backward_induction(space.n_obs, space.n_actions, space.horizon, &weighted);
    let w = policy.leaf_weights(&space)?;
    let achieved = compensated_sum(w.iter().zip(&weighted).map(|(w, v)| w * v));
    let diff: Vec<f64> = model
        .leaf_probs()?
        .iter()
        .zip(&truth)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let (_, max_tv) = backward_induction(space.n_obs, space.n_actions, space.horizon, &diff);
    Ok((optimum - achieved, max_tv))
}

/// CSV with columns `k,ucb_value,feasible_size,candidate_id`.
pub fn logs_to_csv(logs: &[IterationLog]) -> String {
    let mut out = String::from("k,ucb_value,feasible_size,candidate_id\n");
    for l in logs {
        out.push_str(&format!("{},{},{},{}\n", l.k, l.ucb_value, l.feasible_size, l.candidate_id));
    }
    out
}
