use psrlab::params::{resolve_offline, resolve_online, EnvSummary};
use psrlab::pomdp::reference_instance;

#[test]
fn online_parameters_by_hand() {
    let env = reference_instance();
    let model = env.to_psr_decodable(1).unwrap();
    let s = EnvSummary::from_env(&env, &model).unwrap();
    assert_eq!((s.rank, s.d, s.q_a, s.horizon, s.n_actions, s.n_obs), (2, 3, 1, 2, 2, 3));
    let (k, n, delta, c) = (100usize, 40usize, 0.1, 0.5);
    let p = resolve_online(&s, k, n, delta, c).unwrap();

    let (r, d, qa, h, a, o, g) = (2.0f64, 3.0f64, 1.0f64, 2.0f64, 2.0f64, 3.0f64, s.gamma);
    let p_min = c * delta / (k as f64 * h * (o * a).powi(2));
    let beta = 31.0 * c * ((k * n) as f64 / delta).ln();
    let spread = r.sqrt().max(qa * h.sqrt() / g);
    let lambda = g * a * a * qa * beta * spread / (d * h).sqrt();
    let alpha = c * (qa * (h * d).sqrt() * lambda.sqrt() / (g * g) + a * qa * beta.sqrt() / g);
    for (got, want) in [(p.p_min, p_min), (p.beta, beta), (p.lambda, lambda), (p.alpha, alpha)] {
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn offline_parameters_by_hand() {
    let env = reference_instance();
    let model = env.to_psr_decodable(1).unwrap();
    let s = EnvSummary::from_env(&env, &model).unwrap();
    let (k, n, delta, c, iota, ct) = (250usize, 40usize, 0.1, 0.2, 0.2, 5.0);
    let p = resolve_offline(&s, k, n, delta, c, iota, ct).unwrap();

    let (r, d, qa, h, g) = (2.0f64, 3.0f64, 1.0f64, 2.0f64, s.gamma);
    let beta = 31.0 * c * ((k * n) as f64 / delta).ln();
    let spread = r.sqrt().max(qa * h.sqrt() / g);
    let lambda = g * ct * beta * spread / (iota * iota * qa * (d * h).sqrt());
    let alpha = c * (qa * (d * h).sqrt() * lambda.sqrt() / (g * g) + beta.sqrt() / (iota * g));
    for (got, want) in [(p.beta, beta), (p.lambda, lambda), (p.alpha, alpha)] {
        assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
    }
}
