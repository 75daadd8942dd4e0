//! Dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used by [`pseudo_inverse`].
pub const PINV_CUTOFF: f64 = 1e-10;

/// Default relative tolerance for [`numeric_rank`].
pub const RANK_TOL: f64 = 1e-8;

/// Singular values in non-increasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Count of singular values above `tol * sigma_max`.
pub fn numeric_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let sv = singular_values(m);
    let Some(&max) = sv.first() else { return 0 };
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

/// `sigma_max / sigma_k` where `k = ncols`; infinite for rank-deficient columns.
pub fn column_condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    let k = m.ncols();
    if sv.len() < k || k == 0 {
        return f64::INFINITY;
    }
    let smallest = sv[k - 1];
    if smallest <= 0.0 {
        f64::INFINITY
    } else {
        sv[0] / smallest
    }
}

/// Moore-Penrose pseudo-inverse via SVD, zeroing singular values at or below
/// `PINV_CUTOFF * sigma_max`.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let max = svd.singular_values.iter().fold(0.0f64, |acc, &s| acc.max(s));
    let mut result = DMatrix::zeros(cols, rows);
    if max == 0.0 {
        return result;
    }
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > PINV_CUTOFF * max {
            let vk = v_t.row(k).transpose();
            let uk = u.column(k);
            result += (vk * uk.transpose()) / s;
        }
    }
    result
}

/// Greedy column selection with largest-residual pivoting.
///
/// Picks `count` columns; at each step the column with the largest residual
/// norm wins, ties (within a relative `1e-12`) going to the lowest index. The
/// returned indices are sorted ascending.
pub fn pivoted_columns(m: &DMatrix<f64>, count: usize) -> Vec<usize> {
    let mut residual = m.clone();
    let ncols = m.ncols();
    let mut chosen: Vec<usize> = Vec::with_capacity(count);
    for _ in 0..count.min(ncols) {
        let norms: Vec<f64> = (0..ncols)
            .map(|j| {
                if chosen.contains(&j) {
                    -1.0
                } else {
                    residual.column(j).norm()
                }
            })
            .collect();
        let max = norms.iter().fold(f64::NEG_INFINITY, |acc, &n| acc.max(n));
        if max <= 0.0 {
            break;
        }
        let pick = norms
            .iter()
            .position(|&n| n >= max * (1.0 - 1e-12))
            .expect("maximum is attained");
        let q: DVector<f64> = residual.column(pick) / norms[pick];
        let projections = q.transpose() * &residual;
        residual -= &q * projections;
        chosen.push(pick);
    }
    chosen.sort_unstable();
    chosen
}

/// Largest entrywise absolute difference between two equally shaped matrices.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_zero_and_identity() {
        assert_eq!(numeric_rank(&DMatrix::zeros(3, 4), RANK_TOL), 0);
        assert_eq!(numeric_rank(&DMatrix::identity(3, 3), RANK_TOL), 3);
    }

    #[test]
    fn pseudo_inverse_of_tall_full_rank() {
        let g = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 0.5, 0.0, 1.0]);
        let pinv = pseudo_inverse(&g);
        let ident = &pinv * &g;
        assert!(max_abs_diff(&ident, &DMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn pseudo_inverse_of_rank_deficient() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let pinv = pseudo_inverse(&m);
        let back = &m * &pinv * &m;
        assert!(max_abs_diff(&back, &m) < 1e-12);
    }

    #[test]
    fn pivoting_skips_duplicate_columns() {
        let m = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 0.0, 0.5, 0.0, 0.0, 1.0, 0.5]);
        let picked = pivoted_columns(&m, 2);
        assert_eq!(picked, vec![0, 2]);
    }

    #[test]
    fn condition_number_infinite_when_rank_deficient() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(column_condition_number(&m) > 1e15);
        assert!((column_condition_number(&DMatrix::identity(2, 2)) - 1.0).abs() < 1e-12);
    }
}
