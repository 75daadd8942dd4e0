//! Executable forms of the auxiliary inequalities.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::linalg::{numeric_rank, RANK_TOL};
use crate::numeric::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub lhs: f64,
    pub rhs: f64,
}

impl Comparison {
    /// `lhs ≤ rhs` up to a relative `1e-12` rounding allowance.
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-12 * self.rhs.abs().max(1.0)
    }
}

/// `D_TV²(P,Q) ≤ 4(|P|+|Q|) D_H²(P,Q)` for nonnegative bounded measures.
pub fn tv_hellinger_check(p: &[f64], q: &[f64]) -> Comparison {
    assert_eq!(p.len(), q.len());
    let tv = compensated_sum(p.iter().zip(q).map(|(a, b)| (a - b).abs()));
    let hel = 0.5
        * compensated_sum(p.iter().zip(q).map(|(a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        }));
    let mass = compensated_sum(p.iter().copied()) + compensated_sum(q.iter().copied());
    Comparison {
        lhs: tv * tv,
        rhs: 4.0 * mass * hel,
    }
}

fn gram(vectors: &[&DVector<f64>], dim: usize, lambda: f64) -> Cholesky<f64, nalgebra::Dyn> {
    let mut m = DMatrix::identity(dim, dim) * lambda;
    for v in vectors {
        m += *v * v.transpose();
    }
    Cholesky::new(m).expect("regularized gram is positive definite")
}

fn family_rank(vectors: &[DVector<f64>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let dim = vectors[0].len();
    let m = DMatrix::from_fn(dim, vectors.len(), |i, j| vectors[j][i]);
    numeric_rank(&m, RANK_TOL)
}

/// Transfer of feature scores between two vector sequences.
///
/// `A = λI + Σ_{j∈J} x_j x_jᵀ` and `B = λI + Σ_{j∈J} y_j y_jᵀ` (the regularized
/// `B` keeps the form well defined when the `y` family is rank deficient);
/// `r` is the larger of the two family ranks. Returns one comparison per index:
/// `‖x_i‖_{A⁻¹} ≤ ‖x_i − y_i‖/√λ + (1 + 2√r √(Σ_J ‖x_j − y_j‖²)/√λ) ‖y_i‖_{B⁻¹}`.
pub fn transfer_score_check(
    xs: &[DVector<f64>],
    ys: &[DVector<f64>],
    subset: &[usize],
    lambda: f64,
) -> Vec<Comparison> {
    assert_eq!(xs.len(), ys.len());
    assert!(lambda > 0.0);
    let Some(first) = xs.first() else { return Vec::new() };
    let dim = first.len();
    let a = gram(&subset.iter().map(|&j| &xs[j]).collect::<Vec<_>>(), dim, lambda);
    let b = gram(&subset.iter().map(|&j| &ys[j]).collect::<Vec<_>>(), dim, lambda);
    let r = family_rank(xs).max(family_rank(ys)) as f64;
    let spread = subset
        .iter()
        .map(|&j| (&xs[j] - &ys[j]).norm_squared())
        .sum::<f64>()
        .sqrt();
    let sl = lambda.sqrt();
    xs.iter()
        .zip(ys)
        .map(|(x, y)| Comparison {
            lhs: x.dot(&a.solve(x)).sqrt(),
            rhs: (x - y).norm() / sl + (1.0 + 2.0 * r.sqrt() * spread / sl) * y.dot(&b.solve(y)).sqrt(),
        })
        .collect()
}

/// `Σ_k min{‖x_k‖²_{U_k⁻¹}, B} ≤ (1+B) r log(1 + K/λ)` with `U_k = λI + Σ_{t<k} x_t x_tᵀ`.
///
/// The right-hand side assumes `‖x_k‖ ≤ 1`; `r` is the numeric rank of the family.
pub fn elliptical_potential_check(vectors: &[DVector<f64>], lambda: f64, b: f64) -> Comparison {
    assert!(!vectors.is_empty() && lambda > 0.0 && b > 0.0);
    let dim = vectors[0].len();
    let mut u = DMatrix::identity(dim, dim) * lambda;
    let mut lhs = 0.0;
    for x in vectors {
        let chol = Cholesky::new(u.clone()).expect("positive definite");
        lhs += x.dot(&chol.solve(x)).min(b);
        u += x * x.transpose();
    }
    let r = family_rank(vectors) as f64;
    Comparison {
        lhs,
        rhs: (1.0 + b) * r * (1.0 + vectors.len() as f64 / lambda).ln(),
    }
}
