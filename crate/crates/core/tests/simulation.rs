mod common;

use std::collections::BTreeMap;

use common::*;
use mislearn_core::mixture::{mixture_log_ratio, prop2_diagnostics, MixtureLrConfig};
use mislearn_core::simulate::*;
use mislearn_core::stable::steady_state_gain;
use rand::Rng;

fn no_jumps(t: usize, seed: u64) -> TrueProcessConfig {
    TrueProcessConfig {
        a: 0.7,
        sigma_eta: 0.3,
        sigma_u: 1.0,
        p: 0.0,
        mu_j: 0.0,
        sigma_j: 0.0,
        t,
        seed,
        lambda0: 0.0,
        forced_jumps: BTreeMap::new(),
    }
}

#[test]
fn degenerate_and_forced_paths() {
    let cfg = TrueProcessConfig {
        a: 0.0,
        sigma_eta: 0.0,
        ..no_jumps(100, 1)
    };
    let path = simulate_true_process(&cfg).unwrap();
    assert!(path.lambda.iter().all(|l| *l == 0.0));
    assert!(path.f.iter().zip(&path.noise).all(|(f, u)| f == u));

    let cfg = TrueProcessConfig {
        a: 0.5,
        sigma_eta: 0.0,
        p: 1.0,
        mu_j: 10.0,
        sigma_j: 0.0,
        ..no_jumps(20, 2)
    };
    let path = simulate_true_process(&cfg).unwrap();
    let mut prev = 0.0;
    for l in &path.lambda {
        assert!((l - (0.5 * prev + 10.0)).abs() < 1e-12);
        prev = *l;
    }
    assert_eq!(path.jump_times.len(), 20);
    assert!(simulate_true_process(&TrueProcessConfig { t: 0, ..no_jumps(1, 1) }).is_err());
}

#[test]
fn jump_frequency_is_binomial() {
    let cfg = TrueProcessConfig {
        p: 0.05,
        sigma_j: 1.0,
        ..no_jumps(10_000, 9)
    };
    let path = simulate_true_process(&cfg).unwrap();
    let n = path.jump_times.len() as f64;
    let se = (0.05 * 0.95 * 10_000.0f64).sqrt();
    assert!((n - 500.0).abs() < 3.0 * se, "{n}");
    assert!(path.jump_times.iter().all(|t| *t < 10_000));
}

#[test]
fn seeded_paths_are_reproducible() {
    let cfg = TrueProcessConfig { p: 0.1, sigma_j: 1.0, ..no_jumps(500, 77) };
    assert_eq!(simulate_true_process(&cfg).unwrap(), simulate_true_process(&cfg).unwrap());
}

#[test]
fn correctly_specified_filter_has_white_innovations() {
    let cfg = no_jumps(5000, 31);
    let path = simulate_true_process(&cfg).unwrap();
    let believed = BelievedModel { a: 0.7, sigma_u: 1.0, sigma_eta: 0.3 };
    let out = run_misspecified_filter(&path, &believed, believed.steady_prior(0.0).unwrap()).unwrap();
    let rho = innovation_autocorrelation(&path, &out);
    assert!(rho.abs() < 3.0 / 5000f64.sqrt(), "{rho}");
}

#[test]
fn log_score_converges_to_entropy_rate() {
    let cfg = no_jumps(100_000, 41);
    let path = simulate_true_process(&cfg).unwrap();
    let believed = BelievedModel { a: 0.7, sigma_u: 1.0, sigma_eta: 0.3 };
    let (m, se) = average_log_score(&path, &believed, 100).unwrap();
    let h = gaussian_entropy_rate(0.7, 0.3, 1.0).unwrap();
    assert!((m - h).abs() < 2.0 * se, "{m} vs {h} (se {se})");
}

#[test]
fn zero_state_noise_collapses_gain() {
    let cfg = no_jumps(2000, 5);
    let path = simulate_true_process(&TrueProcessConfig { a: 0.0, sigma_eta: 0.0, ..cfg }).unwrap();
    let believed = BelievedModel { a: 0.0, sigma_u: 1.0, sigma_eta: 0.0 };
    let prior = mislearn_core::stable::StatePrior { mean: 0.0, variance: 1.0 };
    let out = run_misspecified_filter(&path, &believed, prior).unwrap();
    assert!(out.steps.iter().all(|s| s.gain == 0.0));
    assert_eq!(steady_state_gain(0.0, 0.0, 1.0).unwrap().gain, 0.0);
}

#[test]
fn riccati_fixed_point_holds() {
    let mut r = rng(55);
    for _ in 0..100 {
        let a = r.random_range(-0.99..0.99);
        let se = r.random_range(0.001..2.0);
        let su = r.random_range(0.01..2.0);
        let ss = steady_state_gain(a, se, su).unwrap();
        let p = ss.pred_var;
        let k = p / (p + su * su);
        assert!((a * a * (1.0 - k) * p + se * se - p).abs() < 1e-12 * p.max(1.0));
        assert!((ss.gain - k).abs() < 1e-12);
    }
}

#[test]
fn gains_rise_with_believed_state_noise() {
    let report = gain_monotonicity_check(&[0.001, 0.01, 0.1], 0.5, 1.0).unwrap();
    assert!(report.gains_increasing && report.decay_decreasing);
    // Oracle: positive root of P² + P(r(1-a²) - q) - qr = 0.
    for (s, k) in report.sigma_eta.iter().zip(&report.gains) {
        let (q, r, a2) = (s * s, 1.0, 0.25);
        let b = r * (1.0 - a2) - q;
        let p = (-b + (b * b + 4.0 * q * r).sqrt()) / 2.0;
        assert!((k - p / (p + r)).abs() < 1e-10);
    }
    assert!(gain_monotonicity_check(&[0.1, 0.01], 0.5, 1.0).is_err());
}

#[test]
fn error_path_needs_a_jump() {
    let path = simulate_true_process(&no_jumps(30, 1)).unwrap();
    let believed = BelievedModel { a: 0.7, sigma_u: 1.0, sigma_eta: 0.3 };
    let out = run_misspecified_filter(&path, &believed, believed.steady_prior(0.0).unwrap()).unwrap();
    assert!(post_break_error_path(&path, &out, 5, 3).is_err());
}

#[test]
fn unit_jump_error_decays_at_closed_form_rate() {
    // Believed σ̃_η² = 0.088 with σ_u = 1 and A = 0.9 puts the gain at 0.2.
    let believed_var: f64 = 0.088;
    let k = steady_state_gain(0.9, believed_var.sqrt(), 1.0).unwrap().gain;
    assert!((k - 0.2).abs() < 1e-12);
    let cfg = Prop1Config {
        a: 0.9,
        sigma_eta: 0.5,
        believed_sigma_eta: believed_var.sqrt(),
        sigma_u: 1.0,
        p: 0.01,
        mu_j: 0.0,
        sigma_j: 1.0,
        jump: 1.0,
        h_max: 10,
        paths: 100_000,
        seed: 6,
    };
    let report = prop1_monte_carlo(&cfg).unwrap();
    for h in [0usize, 1, 5, 10] {
        let c = &report.horizons[h];
        assert!((c.closed_form + 0.72f64.powi(h as i32) * 0.8).abs() < 1e-12);
        assert!(c.within(3.0), "{c:?}");
    }
    assert!(report.rejected > 0);
}

#[test]
fn zero_persistence_corrects_in_one_step() {
    for h in 1..5 {
        assert_eq!(prop1_closed_form(0.0, 0.3, 0.7, 1.0, h), 0.0);
    }
}

#[test]
fn equilibrium_identities_hold_every_period() {
    let mut shifts = BTreeMap::new();
    shifts.insert(100, 1.0);
    let cfg = EquilibriumConfig {
        gamma: 2.0,
        sigma_u: 0.2,
        nu_sd: 0.3,
        shifts,
        ..EquilibriumConfig::default()
    };
    for beliefs in [Beliefs::Perfect, Beliefs::Filter { believed_sigma_eta: 0.005 }] {
        let path = simulate_equilibrium(&cfg, beliefs).unwrap();
        let (c, d, x) = path.max_identity_errors();
        assert!(c < 1e-12 && d < 1e-12 && x < 1e-12);
    }
    let perfect = simulate_equilibrium(&cfg, Beliefs::Perfect).unwrap();
    assert!(perfect.wedge.iter().all(|w| *w == 0.0));
    assert!(EquilibriumConfig { gamma: 0.0, ..cfg }.validate().is_err());
}

#[test]
fn supply_shift_wedge_follows_error_recursion() {
    // Noise-free state and constant supply isolate the wedge response.
    let mut shifts = BTreeMap::new();
    shifts.insert(100, 1.0);
    let cfg = EquilibriumConfig {
        gamma: 2.0,
        sigma_u: 0.2,
        nu_sd: 0.0,
        sigma_eta: 0.0,
        shifts,
        t: 140,
        ..EquilibriumConfig::default()
    };
    let believed = 0.02;
    let path = simulate_equilibrium(&cfg, Beliefs::Filter { believed_sigma_eta: believed }).unwrap();
    assert!((path.m_s[100] - path.m_s[99] - 0.08).abs() < 1e-12);
    let k = steady_state_gain(cfg.a, believed, cfg.sigma_u).unwrap().gain;
    let phi = (1.0 - k) * cfg.a;
    // e_t = φ e_{t-1} - (1-K)J + K u_t with u_t recovered from the signal.
    let mut e = path.lambda_hat[99] - path.lambda[99];
    for t in 100..140 {
        let jump = if t == 100 { 0.08 } else { 0.0 };
        let u = path.signal[t] - path.lambda[t];
        e = phi * e - (1.0 - k) * jump + k * u;
        let w = cfg.a * -e;
        assert!((path.wedge[t] - w).abs() < 1e-12, "t={t}");
    }
}

#[test]
fn corollary1_sweep_is_monotone_in_jump_size() {
    let cfg = Corollary1Config::default();
    let report = corollary1_monte_carlo(&cfg).unwrap();
    assert_eq!(report.n, 30_000);
    assert!(report.mean_increasing, "{:?}", report.by_size);
    assert!(report.rank_correlation > 0.0 && report.z > 3.0, "{report:?}");

    let zero = Corollary1Config {
        sizes: vec![0.0],
        replications: 2000,
        ..Corollary1Config::default()
    };
    let report = corollary1_monte_carlo(&zero).unwrap();
    assert!(report.z.abs() < 3.0, "{report:?}");

    let one = corollary1_check(&[corollary1_replicate(&cfg, 0, 0).unwrap()], 12);
    assert!(one.insufficient_sample);
}

#[test]
fn lemma1_matches_direct_density_ratio() {
    let mut r = rng(66);
    for _ in 0..10_000 {
        let cfg = MixtureLrConfig {
            m: r.random_range(-1.0..1.0),
            s_s2: r.random_range(0.05..3.0),
            sigma_j2: r.random_range(0.0..3.0),
            mu_j: r.random_range(-2.0..2.0),
            p: r.random_range(0.0..=1.0),
        };
        let x = cfg.m + r.random_range(-4.0..4.0);
        let (g, delta) = mixture_log_ratio(&cfg, x).unwrap();
        let ps = normal_density(x, cfg.m, cfg.s_s2);
        let pj = normal_density(x, cfg.m + cfg.mu_j, cfg.s_s2 + cfg.sigma_j2);
        let direct = ((1.0 - cfg.p) * ps + cfg.p * pj).ln() - ps.ln();
        assert!((delta - direct).abs() < 1e-12, "{cfg:?} x={x}");
        assert!((g - (pj.ln() - ps.ln())).abs() < 1e-12);
    }
}

fn normal_density(x: f64, m: f64, v: f64) -> f64 {
    (-(x - m) * (x - m) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()
}

#[test]
fn prop2_signs_follow_rigidity_condition() {
    let mut r = rng(67);
    for _ in 0..1000 {
        let s = r.random_range(0.05..3.0);
        let sj = r.random_range(0.05..3.0);
        let mu: f64 = r.random_range(0.05..2.5) * if r.random::<bool>() { 1.0 } else { -1.0 };
        let cfg = MixtureLrConfig { m: 0.0, s_s2: s, sigma_j2: sj, mu_j: mu, p: 0.05 };
        let rep = prop2_diagnostics(&cfg).unwrap();
        assert!(rep.dg_dabs_mu_numeric > 0.0);
        let threshold = sj * s / (s + sj);
        if (mu * mu - threshold).abs() > 1e-6 {
            assert_eq!(rep.dg_ds_numeric < 0.0, mu * mu > threshold, "{cfg:?} {rep:?}");
        }
    }
}
