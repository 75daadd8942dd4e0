use nalgebra::DVector;
use psrlab::lemmas::{elliptical_potential_check, transfer_score_check, tv_hellinger_check};

#[test]
fn disjoint_point_masses() {
    // TV = 2, D_H² = ½(1 + 1) = 1, total mass 2.
    let c = tv_hellinger_check(&[1.0, 0.0], &[0.0, 1.0]);
    assert!((c.lhs - 4.0).abs() < 1e-15);
    assert!((c.rhs - 8.0).abs() < 1e-15);
    assert!(c.holds());
}

#[test]
fn identical_measures_are_tight() {
    let p = [0.2, 0.5, 0.3];
    let c = tv_hellinger_check(&p, &p);
    assert_eq!(c.lhs, 0.0);
    assert_eq!(c.rhs, 0.0);
    assert!(c.holds());
}

#[test]
fn scaled_measures_by_hand() {
    // P = (a), Q = (b): TV² = (a−b)², D_H² = ½(√a − √b)², mass a + b.
    let (a, b): (f64, f64) = (0.9, 0.1);
    let c = tv_hellinger_check(&[a], &[b]);
    assert!((c.lhs - (a - b).powi(2)).abs() < 1e-15);
    assert!((c.rhs - 4.0 * (a + b) * 0.5 * (a.sqrt() - b.sqrt()).powi(2)).abs() < 1e-15);
}

#[test]
fn transfer_score_in_one_dimension() {
    let xs = vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![2.0])];
    let ys = vec![DVector::from_vec(vec![1.5]), DVector::from_vec(vec![2.0])];
    let lambda = 0.5;
    let checks = transfer_score_check(&xs, &ys, &[0, 1], lambda);
    // A = λ + 1 + 4, B = λ + 2.25 + 4, r = 1, Σ‖x − y‖² = 0.25.
    let a = lambda + 5.0;
    let b = lambda + 6.25;
    let factor = 1.0 + 2.0 * 0.5 / lambda.sqrt();
    let expect = [
        (1.0 / a.sqrt(), 0.5 / lambda.sqrt() + factor * 1.5 / b.sqrt()),
        (2.0 / a.sqrt(), factor * 2.0 / b.sqrt()),
    ];
    for (c, (lhs, rhs)) in checks.iter().zip(expect) {
        assert!((c.lhs - lhs).abs() < 1e-12);
        assert!((c.rhs - rhs).abs() < 1e-12);
        assert!(c.holds());
    }
}

#[test]
fn identical_families_transfer_exactly() {
    let xs: Vec<DVector<f64>> = (0..4).map(|i| DVector::from_vec(vec![i as f64, 1.0 - i as f64])).collect();
    for c in transfer_score_check(&xs, &xs, &[0, 2, 3], 1.0) {
        assert!((c.lhs - c.rhs).abs() < 1e-12);
    }
}

#[test]
fn single_unit_vector_potential() {
    // U_1 = λI excludes x_1, so the sum is min{1/λ, B}.
    let x = vec![DVector::from_vec(vec![1.0, 0.0])];
    let c = elliptical_potential_check(&x, 1.0, 1.0);
    assert!((c.lhs - 1.0).abs() < 1e-15);
    assert!((c.rhs - 2.0 * 2f64.ln()).abs() < 1e-15);
    assert!(c.holds());
}

#[test]
fn repeated_direction_by_hand() {
    // x_k = e_1 for k = 1..4: scores 1/(λ + k − 1).
    let xs = vec![DVector::from_vec(vec![1.0, 0.0]); 4];
    let lambda = 2.0;
    let c = elliptical_potential_check(&xs, lambda, 10.0);
    let expect: f64 = (0..4).map(|k| 1.0 / (lambda + k as f64)).sum();
    assert!((c.lhs - expect).abs() < 1e-14);
    assert!((c.rhs - 11.0 * (1.0 + 4.0 / lambda).ln()).abs() < 1e-14);
    assert!(c.holds());
}
