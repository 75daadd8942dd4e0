//! Prediction-feature Gram matrices and the optimistic/pessimistic bonus.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{PsrError, Result};
use crate::estimation::DatasetFamily;
use crate::linalg::{column_condition_number, pseudo_inverse};
use crate::pomdp::{GMatrices, MAX_CONDITION};
use crate::psr::{PsrModel, PSI_GUARD};
use crate::space::History;

/// Regularizers at or below this are refused.
pub const MIN_LAMBDA: f64 = 1e-12;

/// `Û_h = λI + Σ_j x_j x_jᵀ` with a Cholesky factor kept in sync.
#[derive(Debug, Clone)]
pub struct FeatureGram {
    pub step: usize,
    pub lambda: f64,
    matrix: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    count: usize,
}

impl FeatureGram {
    pub fn new(step: usize, dim: usize, lambda: f64) -> Result<Self> {
        if !(lambda > MIN_LAMBDA) {
            return Err(PsrError::InvalidParameter(format!("lambda = {lambda} must exceed {MIN_LAMBDA}")));
        }
        let matrix = DMatrix::identity(dim, dim) * lambda;
        let factor = Cholesky::new(matrix.clone()).expect("λI is positive definite");
        Ok(Self {
            step,
            lambda,
            matrix,
            factor,
            count: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Rank-one update `Û ← Û + x xᵀ`; the factor is rebuilt.
    pub fn accumulate(&mut self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(PsrError::Structural(format!(
                "feature of dimension {} for a {}-dimensional gram",
                x.len(),
                self.dim()
            )));
        }
        self.matrix += x * x.transpose();
        self.factor = Cholesky::new(self.matrix.clone()).ok_or_else(|| {
            PsrError::Structural("gram lost positive definiteness".into())
        })?;
        self.count += 1;
        Ok(())
    }

    /// `‖x‖²_{Û⁻¹}` through the Cholesky factor.
    pub fn score(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.factor.solve(x))
    }

    pub fn condition_number(&self) -> f64 {
        column_condition_number(&self.matrix)
    }
}

/// Per-step grams, the coefficient `α` and the optional feature transform.
#[derive(Debug, Clone)]
pub struct BonusEvaluator {
    pub grams: Vec<FeatureGram>,
    pub alpha: f64,
    pub transform: Option<Vec<DMatrix<f64>>>,
    /// Data prefixes whose feature was degenerate under the feature model.
    pub skipped: usize,
}

/// Serializable snapshot of a [`BonusEvaluator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorSnapshot {
    pub lambda: f64,
    pub alpha: f64,
    pub grams: Vec<Vec<Vec<f64>>>,
    pub transform: Option<Vec<Vec<Vec<f64>>>>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

impl BonusEvaluator {
    /// Builds `Û_h` from the feature model's `ψ̄(τ_h)` over every `(τ_h, π) ∈ D_h`.
    pub fn build(
        model: &PsrModel,
        data: &DatasetFamily,
        lambda: f64,
        alpha: f64,
        transform: Option<Vec<DMatrix<f64>>>,
    ) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(PsrError::InvalidParameter(format!("alpha = {alpha} must be nonnegative")));
        }
        let dims = model.dims();
        let mut grams = Vec::with_capacity(model.space.horizon);
        for h in 0..model.space.horizon {
            let dim = match &transform {
                Some(t) => t[h].nrows(),
                None => dims[h],
            };
            grams.push(FeatureGram::new(h, dim, lambda)?);
        }
        let mut evaluator = Self {
            grams,
            alpha,
            transform,
            skipped: 0,
        };
        for h in 0..model.space.horizon {
            for entry in data.bucket(h) {
                match model.prediction_feature(&entry.trajectory.prefix(h)) {
                    Ok(f) => {
                        let x = evaluator.transformed(h, f);
                        evaluator.grams[h].accumulate(&x)?;
                    }
                    Err(PsrError::DegenerateHistory { .. }) => evaluator.skipped += 1,
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(evaluator)
    }

    fn transformed(&self, h: usize, feature: DVector<f64>) -> DVector<f64> {
        match &self.transform {
            Some(t) => &t[h] * feature,
            None => feature,
        }
    }

    /// `b̂(τ_H) = min{α √(Σ_h ‖Tψ̄(τ_h)‖²_{Û_h⁻¹}), 1}`; 1 when a prefix is degenerate.
    pub fn bonus(&self, model: &PsrModel, trajectory: &History) -> Result<f64> {
        let mut total = 0.0;
        for h in 0..model.space.horizon {
            match model.prediction_feature(&trajectory.prefix(h)) {
                Ok(f) => total += self.grams[h].score(&self.transformed(h, f)),
                Err(PsrError::DegenerateHistory { .. }) => return Ok(1.0),
                Err(e) => return Err(e),
            }
        }
        Ok(self.clip(total))
    }

    fn clip(&self, total: f64) -> f64 {
        if self.alpha == 0.0 {
            return 0.0;
        }
        (self.alpha * total.sqrt()).min(1.0)
    }

    /// Bonus of every full trajectory in index order, sharing prefix work.
    pub fn bonus_leaves(&self, model: &PsrModel) -> Result<Vec<f64>> {
        let space = model.space;
        let layers = model.psi_layers()?;
        let pairs = space.n_pairs();
        let mut acc = vec![0.0f64];
        for h in 0..space.horizon {
            let phi = &model.phi[h];
            let mut scored = Vec::with_capacity(layers[h].len());
            for (idx, psi) in layers[h].iter().enumerate() {
                let parent = if h == 0 { acc[0] } else { acc[idx / pairs] };
                let prob = phi.dot(psi);
                let s = if parent.is_infinite() || prob <= PSI_GUARD {
                    f64::INFINITY
                } else {
                    parent + self.grams[h].score(&self.transformed(h, psi / prob))
                };
                scored.push(s);
            }
            acc = scored;
        }
        let mut leaves = Vec::with_capacity(acc.len() * pairs);
        for &total in &acc {
            let b = if total.is_infinite() { 1.0 } else { self.clip(total) };
            leaves.extend(std::iter::repeat(b).take(pairs));
        }
        Ok(leaves)
    }

    pub fn condition_numbers(&self) -> Vec<f64> {
        self.grams.iter().map(FeatureGram::condition_number).collect()
    }

    pub fn snapshot(&self) -> EvaluatorSnapshot {
        EvaluatorSnapshot {
            lambda: self.grams.first().map(|g| g.lambda).unwrap_or(0.0),
            alpha: self.alpha,
            grams: self.grams.iter().map(|g| rows_of(&g.matrix)).collect(),
            transform: self.transform.as_ref().map(|t| t.iter().map(rows_of).collect()),
        }
    }
}

/// `(Ĝ_{h+1})†` for `h = 0..H-1`, mapping prediction features to beliefs.
pub fn decodable_transform(g: &GMatrices) -> Result<Vec<DMatrix<f64>>> {
    g.g.iter()
        .enumerate()
        .map(|(j, mat)| {
            let condition = column_condition_number(mat);
            if condition > MAX_CONDITION {
                return Err(PsrError::SingularCoreTests { step: j, condition });
            }
            Ok(pseudo_inverse(mat))
        })
        .collect()
}

/// `U_h = λI + Σ ψ̄*(τ_h) ψ̄*(τ_h)ᵀ` over the data, using the true model.
pub fn ground_truth_gram(truth: &PsrModel, data: &DatasetFamily, lambda: f64) -> Result<Vec<FeatureGram>> {
    Ok(BonusEvaluator::build(truth, data, lambda, 0.0, None)?.grams)
}

/// Both sides of the empirical-versus-true bonus relation:
/// `E*[√(Σ_h ‖ψ̄̂‖²_{Û⁻¹})]` against
/// `(1 + 2|A|Q_A√(7rβ)/√λ) Σ_h E*[‖ψ̄*‖_{U⁻¹}] + (2HQ_A/√λ) D_TV`.
pub fn bonus_relation(
    truth: &PsrModel,
    hat: &PsrModel,
    data: &DatasetFamily,
    lambda: f64,
    beta: f64,
    rank: usize,
    policy: &crate::policy::Policy,
) -> Result<(f64, f64)> {
    let space = truth.space;
    let empirical = BonusEvaluator::build(hat, data, lambda, 1.0, None)?;
    let true_grams = ground_truth_gram(truth, data, lambda)?;
    let w = policy.leaf_weights(&space)?;
    let p = truth.leaf_probs()?;
    let mut lhs = 0.0;
    let mut true_sum = 0.0;
    for (leaf, (&w, &p)) in w.iter().zip(&p).enumerate() {
        let mass = w * p;
        if mass == 0.0 {
            continue;
        }
        let traj = History::from_index(&space, space.horizon, leaf);
        let mut total = 0.0;
        let mut degenerate = false;
        for h in 0..space.horizon {
            let prefix = traj.prefix(h);
            match hat.prediction_feature(&prefix) {
                Ok(f) => total += empirical.grams[h].score(&f),
                Err(_) => degenerate = true,
            }
            let f = truth.prediction_feature(&prefix)?;
            true_sum += mass * true_grams[h].score(&f).sqrt();
        }
        lhs += mass * if degenerate { f64::INFINITY } else { total.sqrt() };
    }
    let q_a = truth.core_tests.q_a() as f64;
    let a = space.n_actions as f64;
    let sl = lambda.sqrt();
    let tv = crate::psr::tv_distance(hat, truth, policy)?;
    let rhs = (1.0 + 2.0 * a * q_a * (7.0 * rank as f64 * beta).sqrt() / sl) * true_sum
        + 2.0 * space.horizon as f64 * q_a / sl * tv;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_gram_scores_euclidean() {
        let g = FeatureGram::new(0, 3, 1.0).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0, 2.0]);
        assert!((g.score(&x) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn one_accumulation_halves_the_score() {
        let mut g = FeatureGram::new(0, 2, 1.0).unwrap();
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        g.accumulate(&e1).unwrap();
        assert!((g.score(&e1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tiny_lambda_is_refused() {
        assert!(FeatureGram::new(0, 2, 1e-13).is_err());
        assert!(FeatureGram::new(0, 2, 0.0).is_err());
    }

    #[test]
    fn dimension_mismatch_is_refused() {
        let mut g = FeatureGram::new(0, 2, 1.0).unwrap();
        assert!(g.accumulate(&DVector::from_vec(vec![1.0])).is_err());
    }
}
