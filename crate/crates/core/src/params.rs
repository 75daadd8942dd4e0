//! Theory-scaled parameter sets.
//!
//! The theorem statements fix `p_min`, `β`, `λ`, `α` only up to absolute
//! constants. Each big-O is replaced by the knob `c_theory`; `λ` has an
//! explicit formula and inherits the knob through `β`.

use serde::{Deserialize, Serialize};

use crate::bonus::MIN_LAMBDA;
use crate::error::{PsrError, Result};
use crate::pomdp::TabularPomdp;
use crate::psr::PsrModel;

/// Problem constants the formulas depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSummary {
    pub rank: usize,
    pub d: usize,
    pub q_a: usize,
    pub gamma: f64,
    pub n_obs: usize,
    pub n_actions: usize,
    pub horizon: usize,
}

impl EnvSummary {
    pub fn from_env(env: &TabularPomdp, model: &PsrModel) -> Result<Self> {
        Ok(Self {
            rank: env.rank()?,
            d: model.core_tests.max_dim(),
            q_a: model.core_tests.q_a(),
            gamma: model.gamma()?,
            n_obs: env.n_obs,
            n_actions: env.n_actions,
            horizon: env.horizon,
        })
    }

    /// `max{√r, Q_A √H / γ}`.
    fn spread(&self) -> f64 {
        (self.rank as f64)
            .sqrt()
            .max(self.q_a as f64 * (self.horizon as f64).sqrt() / self.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnlineParams {
    pub p_min: f64,
    pub beta: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub c_theory: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfflineParams {
    pub p_min: f64,
    pub beta: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub c_theory: f64,
    pub iota: f64,
    pub c_target: f64,
}

fn check_common(delta: f64, c_theory: f64, k: usize, n_candidates: usize) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PsrError::InvalidParameter(format!("delta = {delta} outside (0, 1)")));
    }
    if !(c_theory >= 0.0) || !c_theory.is_finite() {
        return Err(PsrError::InvalidParameter(format!("c_theory = {c_theory} must be finite and nonnegative")));
    }
    if k == 0 || n_candidates == 0 {
        return Err(PsrError::InvalidParameter("K and the candidate count must be positive".into()));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > MIN_LAMBDA) {
        return Err(PsrError::InvalidParameter(format!(
            "resolved lambda = {lambda} is not positive; raise c_theory"
        )));
    }
    Ok(())
}

/// `(|O||A|)^H`.
fn tree_size(s: &EnvSummary) -> f64 {
    ((s.n_obs * s.n_actions) as f64).powi(s.horizon as i32)
}

/// Online parameters:
/// `p_min = c δ / (K H |O|^H |A|^H)`, `β = 31 c log(K N / δ)`,
/// `λ = γ|A|²Q_A β max{√r, Q_A√H/γ} / √(dH)`,
/// `α = c (Q_A √(Hd) √λ / γ² + |A| Q_A √β / γ)`.
pub fn resolve_online(
    s: &EnvSummary,
    k: usize,
    n_candidates: usize,
    delta: f64,
    c_theory: f64,
) -> Result<OnlineParams> {
    check_common(delta, c_theory, k, n_candidates)?;
    let (h, a, q_a, d) = (s.horizon as f64, s.n_actions as f64, s.q_a as f64, s.d as f64);
    let kf = k as f64;
    let p_min = c_theory * delta / (kf * h * tree_size(s));
    let beta = c_theory * 31.0 * (kf * n_candidates as f64 / delta).ln();
    let lambda = s.gamma * a * a * q_a * beta * s.spread() / (d * h).sqrt();
    check_lambda(lambda)?;
    let alpha = c_theory
        * (q_a * (h * d).sqrt() / (s.gamma * s.gamma) * lambda.sqrt() + a * q_a * beta.sqrt() / s.gamma);
    Ok(OnlineParams {
        p_min,
        beta,
        lambda,
        alpha,
        c_theory,
    })
}

/// Offline parameters:
/// `p_min = c δ / (K H (|O||A|)^H)`, `β̂ = 31 c log(K N / δ)`,
/// `λ̂ = γ C β̂ max{√r, Q_A√H/γ} / (ι² Q_A √(dH))`,
/// `α̂ = c (Q_A √(dH) √λ̂ / γ² + √β̂ / (ι γ))`.
pub fn resolve_offline(
    s: &EnvSummary,
    k: usize,
    n_candidates: usize,
    delta: f64,
    c_theory: f64,
    iota: f64,
    c_target: f64,
) -> Result<OfflineParams> {
    check_common(delta, c_theory, k, n_candidates)?;
    if !(iota > 0.0) {
        return Err(PsrError::InvalidParameter(format!("iota = {iota} must be positive")));
    }
    if !(c_target >= 1.0) || !c_target.is_finite() {
        return Err(PsrError::InvalidParameter(format!("coverage {c_target} must be finite and at least 1")));
    }
    let (h, q_a, d) = (s.horizon as f64, s.q_a as f64, s.d as f64);
    let kf = k as f64;
    let p_min = c_theory * delta / (kf * h * tree_size(s));
    let beta = c_theory * 31.0 * (kf * n_candidates as f64 / delta).ln();
    let lambda = s.gamma * c_target * beta * s.spread() / (iota * iota * q_a * (d * h).sqrt());
    check_lambda(lambda)?;
    let alpha = c_theory
        * (q_a * (d * h).sqrt() / (s.gamma * s.gamma) * lambda.sqrt() + beta.sqrt() / (iota * s.gamma));
    Ok(OfflineParams {
        p_min,
        beta,
        lambda,
        alpha,
        c_theory,
        iota,
        c_target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary() -> EnvSummary {
        EnvSummary {
            rank: 2,
            d: 4,
            q_a: 2,
            gamma: 0.5,
            n_obs: 3,
            n_actions: 2,
            horizon: 2,
        }
    }

    #[test]
    fn zero_knob_is_rejected() {
        assert!(resolve_online(&summary(), 10, 5, 0.1, 0.0).is_err());
    }

    #[test]
    fn doubling_knob_doubles_beta_and_p_min() {
        let a = resolve_online(&summary(), 10, 5, 0.1, 0.3).unwrap();
        let b = resolve_online(&summary(), 10, 5, 0.1, 0.6).unwrap();
        assert!((b.beta / a.beta - 2.0).abs() < 1e-12);
        assert!((b.p_min / a.p_min - 2.0).abs() < 1e-12);
        assert!((b.lambda / a.lambda - 2.0).abs() < 1e-12);
        assert!((b.alpha / a.alpha - 2f64.powf(1.5)).abs() < 1e-12);
    }
}
