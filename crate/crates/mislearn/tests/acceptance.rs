//! Acceptance suite: one PASS/FAIL/SKIP line per criterion, checked
//! against oracles written here rather than the library's own helpers.
//!
//! Lines go straight to the stderr handle so they show up even when the
//! harness captures output. Criterion 12 needs the public Fama-French
//! factor file: point `FF6_CSV` at a wide percent-unit CSV with columns
//! `date`, `Mkt-RF` (or `MKT`), `SMB`, `HML`, `RMW`, `CMA` and `Mom` (or
//! `UMD`).

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use mislearn::io::{load_returns, Layout, Unit};
use mislearn_core::hp::{one_sided_hp_detrend, HP_LAMBDA_MONTHLY};
use mislearn_core::mislearning::{spike_pass_rate, SpikeExperiment};
use mislearn_core::mixture::{mixture_log_ratio, prop2_diagnostics, MixtureLrConfig};
use mislearn_core::regime::{fit_break_mle, hamilton_filter, BreakParams};
use mislearn_core::regression::{
    run_regression, ClusterDim, Covariance, RegressionData, RegressionResult, RegressionSpec, Regressor,
};
use mislearn_core::simulate::{
    gain_monotonicity_check, prop1_replicate, prop1_summarize, replication_rng, simulate_equilibrium,
    simulate_true_process, Beliefs, EquilibriumConfig, Prop1Config, TrueProcessConfig,
};
use mislearn_core::stable::{fit_stable_mle, kalman_filter, StableParams, StatePrior};
use mislearn_core::xsec::{corollary41_check, decompose, Corollary41Verdict};
use mislearn_core::{ExogenousSeries, MonthIndex, TimeSeries};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn gauss(r: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - r.random::<f64>();
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn ln_normal(x: f64, m: f64, v: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m) * (x - m) / v)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

/// Posterior of each state given observations so far, and the joint
/// likelihood, from the linear map (λ0, η1..ηT) -> (λ1..λT).
fn joint_gaussian(f: &[f64], rho: f64, su: f64, se: f64, prior: StatePrior) -> (Vec<(f64, f64)>, f64) {
    let n = f.len();
    let lmap = DMatrix::from_fn(n, n + 1, |s, j| {
        let s = s + 1;
        match j {
            0 => rho.powi(s as i32),
            j if j <= s => rho.powi((s - j) as i32),
            _ => 0.0,
        }
    });
    let mut d = DMatrix::zeros(n + 1, n + 1);
    d[(0, 0)] = prior.variance;
    for j in 1..=n {
        d[(j, j)] = se * se;
    }
    let cov_l = &lmap * d * lmap.transpose();
    let mean_l = DVector::from_fn(n, |s, _| rho.powi(s as i32 + 1) * prior.mean);
    let cov_f = &cov_l + DMatrix::identity(n, n) * (su * su);
    let mut post = Vec::with_capacity(n);
    for t in 1..=n {
        let sff = cov_f.view((0, 0), (t, t)).into_owned();
        let slf = cov_l.view((t - 1, 0), (1, t)).into_owned();
        let dev = DVector::from_fn(t, |i, _| f[i] - mean_l[i]);
        let inv = sff.try_inverse().unwrap();
        let w = &slf * &inv;
        let m = mean_l[t - 1] + (&w * &dev)[(0, 0)];
        let v = cov_l[(t - 1, t - 1)] - (&w * slf.transpose())[(0, 0)];
        post.push((m, v));
    }
    let dev = DVector::from_fn(n, |i, _| f[i] - mean_l[i]);
    let det = cov_f.determinant();
    let quad = (dev.transpose() * cov_f.try_inverse().unwrap() * &dev)[(0, 0)];
    let ll = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + det.ln() + quad);
    (post, ll)
}

fn c1_kalman() -> Verdict {
    let start = Instant::now();
    let mut r = replication_rng(101, 0);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let rho = r.random_range(-0.95..0.95);
        let su = r.random_range(0.1..1.0);
        let se = r.random_range(0.05..1.0);
        let prior = StatePrior {
            mean: r.random_range(-1.0..1.0),
            variance: r.random_range(0.01..2.0),
        };
        let f: Vec<f64> = (0..5).map(|_| gauss(&mut r)).collect();
        let out = kalman_filter(&f, &StableParams::new(rho, su, se).unwrap(), prior).unwrap();
        let (post, ll) = joint_gaussian(&f, rho, su, se, prior);
        for (s, (m, v)) in out.steps.iter().zip(&post) {
            worst = worst.max((s.filt_mean - m).abs()).max((s.filt_var - v).abs());
        }
        worst = worst.max((out.loglik - ll).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst <= 1e-10 && secs < 1.0, format!("max abs diff {worst:.2e}, {secs:.3} s"))
}

fn c2_hamilton() -> Verdict {
    let start = Instant::now();
    let mut r = replication_rng(202, 0);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = BreakParams {
            mu0: r.random_range(-0.5..0.5),
            mu1: r.random_range(-0.5..0.5),
            sd0: r.random_range(0.2..1.0),
            sd1: r.random_range(0.2..2.0),
            p00: r.random_range(0.05..0.99),
            p11: r.random_range(0.05..0.99),
        };
        let q1 = r.random_range(0.0..1.0);
        let init = [1.0 - q1, q1];
        let f: Vec<f64> = (0..10).map(|_| gauss(&mut r)).collect();
        let out = hamilton_filter(&f, &p, init).unwrap();
        let trans = [[p.p00, 1.0 - p.p00], [1.0 - p.p11, p.p11]];
        let (mu, sd) = ([p.mu0, p.mu1], [p.sd0, p.sd1]);
        let mut total = 0.0;
        for path in 0u32..1 << 10 {
            let s = |t: usize| ((path >> t) & 1) as usize;
            let mut prob = init[s(0)];
            let mut dens = 0.0;
            for t in 0..10 {
                if t > 0 {
                    prob *= trans[s(t - 1)][s(t)];
                }
                dens += ln_normal(f[t], mu[s(t)], sd[s(t)] * sd[s(t)]);
            }
            total += prob * dens.exp();
        }
        worst = worst.max((out.loglik - total.ln()).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(worst <= 1e-9 && secs < 5.0, format!("max abs diff {worst:.2e}, {secs:.3} s"))
}

fn c3_lemma1() -> Verdict {
    let mut r = replication_rng(303, 0);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let c = MixtureLrConfig {
            m: r.random_range(-1.0..1.0),
            s_s2: r.random_range(0.05..3.0),
            sigma_j2: r.random_range(0.0..3.0),
            mu_j: r.random_range(-2.0..2.0),
            p: r.random_range(0.0..=1.0),
        };
        let x = c.m + r.random_range(-4.0..4.0);
        let (_, delta) = mixture_log_ratio(&c, x).unwrap();
        let ps = ln_normal(x, c.m, c.s_s2).exp();
        let pj = ln_normal(x, c.m + c.mu_j, c.s_s2 + c.sigma_j2).exp();
        let direct = ((1.0 - c.p) * ps + c.p * pj).ln() - ps.ln();
        worst = worst.max((delta - direct).abs());
    }
    verdict(worst <= 1e-12, format!("10000 points, max abs diff {worst:.2e}"))
}

fn c4_prop1() -> Verdict {
    let start = Instant::now();
    let cfg = Prop1Config {
        a: 0.9,
        sigma_eta: 0.5,
        believed_sigma_eta: 0.088f64.sqrt(),
        sigma_u: 1.0,
        p: 0.01,
        mu_j: 0.0,
        sigma_j: 1.0,
        jump: 1.0,
        h_max: 10,
        paths: 100_000,
        seed: 404,
    };
    let reps: Vec<_> = (0..cfg.paths as u64)
        .into_par_iter()
        .map(|i| prop1_replicate(&cfg, i).unwrap())
        .collect();
    let rep = prop1_summarize(&cfg, &reps).unwrap();
    // Closed form from the steady-state gain solved here by iteration.
    let (a, q, r2) = (cfg.a, cfg.believed_sigma_eta.powi(2), cfg.sigma_u.powi(2));
    let mut p = q;
    for _ in 0..10_000 {
        let pred = a * a * p + q;
        p = pred - pred * pred / (pred + r2);
    }
    let pred = a * a * p + q;
    let k = pred / (pred + r2);
    let mut worst_z = 0.0f64;
    let mut ok = true;
    for h in [0usize, 1, 5, 10] {
        let col: Vec<f64> = reps.iter().map(|(e, _)| e[h]).collect();
        let n = col.len() as f64;
        let m = col.iter().sum::<f64>() / n;
        let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let closed = -((1.0 - k) * a).powi(h as i32) * (1.0 - k) * cfg.jump;
        let z = (m - closed) / (sd / n.sqrt());
        worst_z = worst_z.max(z.abs());
        ok &= z.abs() <= 3.0 && close(rep.horizons[h].closed_form, closed, 1e-9);
    }
    let grid: Vec<f64> = (1..=10).map(|i| 0.05 * i as f64).collect();
    let g = gain_monotonicity_check(&grid, cfg.a, cfg.sigma_u).unwrap();
    let increasing = g.gains.windows(2).all(|w| w[1] > w[0]);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        ok && increasing && secs < 30.0,
        format!("max |z| {worst_z:.2} over h in {{0,1,5,10}}, gain increasing {increasing}, {secs:.1} s"),
    )
}

fn c5_prop2() -> Verdict {
    // g at the break realization from the two densities directly.
    let g = |s: f64, sj: f64, mu: f64| ln_normal(mu, mu, s + sj) - ln_normal(mu, 0.0, s);
    let mut r = replication_rng(505, 0);
    let (mut positive, mut agree, mut tested) = (0, 0, 0);
    for _ in 0..1000 {
        let s = r.random_range(0.05..3.0);
        let sj = r.random_range(0.05..3.0);
        let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
        let mu: f64 = sign * r.random_range(0.05..2.5);
        let a = mu.abs();
        let hm = 1e-5 * a;
        let dmu = (g(s, sj, a + hm) - g(s, sj, a - hm)) / (2.0 * hm);
        let hs = 1e-5 * s;
        let ds = (g(s + hs, sj, a) - g(s - hs, sj, a)) / (2.0 * hs);
        let rep = prop2_diagnostics(&MixtureLrConfig {
            m: 0.0,
            s_s2: s,
            sigma_j2: sj,
            mu_j: mu,
            p: 0.05,
        })
        .unwrap();
        if dmu > 0.0 && rep.dg_dabs_mu_numeric > 0.0 {
            positive += 1;
        }
        let threshold = sj * s / (s + sj);
        if (mu * mu - threshold).abs() > 1e-6 {
            tested += 1;
            let expect_negative = mu * mu > threshold;
            if (ds < 0.0) == expect_negative && (rep.dg_ds_numeric < 0.0) == expect_negative {
                agree += 1;
            }
        }
    }
    verdict(
        positive == 1000 && agree == tested,
        format!("dg/d|mu| > 0 at {positive}/1000, dg/ds sign agrees at {agree}/{tested}"),
    )
}

fn c6_theorem1() -> Verdict {
    let mut worst = 0.0f64;
    let mut periods = 0;
    for seed in 0..20u64 {
        let cfg = EquilibriumConfig {
            gamma: 2.0 + seed as f64 * 0.1,
            sigma_u: 0.2,
            s_bar: 1.0,
            nu_sd: 0.05,
            shifts: BTreeMap::from([(100, 1.0), (150, -0.5)]),
            a: 0.9,
            sigma_eta: 0.02,
            lambda0: 0.0,
            t: 240,
            seed,
        };
        let path = simulate_equilibrium(&cfg, Beliefs::Filter { believed_sigma_eta: 0.01 }).unwrap();
        let k = cfg.gamma * cfg.sigma_u * cfg.sigma_u;
        for t in 0..cfg.t {
            let m_s = k * path.supply[t];
            let w = cfg.a * (path.lambda[t] - path.lambda_hat[t]);
            worst = worst.max((path.m_s[t] - m_s).abs()).max((path.m_t[t] - (m_s + w)).abs());
            periods += 1;
        }
    }
    verdict(worst <= 1e-12, format!("{periods} periods, max identity error {worst:.2e}"))
}

fn c7_decomposition() -> Verdict {
    let mut r = replication_rng(707, 0);
    let mut worst_identity = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for k in 0..200 {
        let n = 24 + k % 300;
        let delta: Vec<f64> = (0..n).map(|_| 0.5 * gauss(&mut r) + 0.1).collect();
        let prob: Vec<f64> = (0..n).map(|_| r.random::<f64>().powi(1 + k % 3)).collect();
        let spikes: Vec<bool> = delta.iter().map(|d| *d > 0.6).collect();
        let row = decompose("s", &delta, &prob, &spikes).unwrap();
        let nf = n as f64;
        let pi = prob.iter().sum::<f64>() / nf;
        let w1: f64 = prob.iter().sum();
        let w0: f64 = prob.iter().map(|p| 1.0 - p).sum();
        let mu1 = prob.iter().zip(&delta).map(|(p, d)| p * d).sum::<f64>() / w1;
        let mu0 = prob.iter().zip(&delta).map(|(p, d)| (1.0 - p) * d).sum::<f64>() / w0;
        let e = delta.iter().sum::<f64>() / nf;
        let (m1, m0) = (row.mu1.unwrap(), row.mu0.unwrap());
        worst_identity = worst_identity.max((row.e_delta - (row.pi * m1 + (1.0 - row.pi) * m0)).abs());
        worst_oracle = worst_oracle
            .max((row.pi - pi).abs())
            .max((m1 - mu1).abs())
            .max((m0 - mu0).abs())
            .max((row.e_delta - e).abs());
    }
    // Same identity on the rows the pipeline writes.
    let dir = common::fixture(150, 4);
    let out = dir.path().join("o");
    let cfg = dir.path().join("config.toml");
    let o = common::cli(&["xsec", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let (h, rows) = common::read_csv(&out.join("demo/decomposition.csv"));
    let col = |r: &Vec<String>, n: &str| r[common::column(&h, n)].parse::<f64>().unwrap();
    let mut worst_file = 0.0f64;
    for row in &rows {
        let (pi, m1, m0, e) = (col(row, "pi"), col(row, "mu1"), col(row, "mu0"), col(row, "e_delta"));
        worst_file = worst_file.max((e - (pi * m1 + (1.0 - pi) * m0)).abs());
    }
    verdict(
        o.status.success() && worst_identity <= 1e-12 && worst_oracle <= 1e-12 && worst_file <= 1e-12,
        format!(
            "max identity error {worst_identity:.2e} (200 paths), {worst_file:.2e} ({} pipeline rows), oracle diff {worst_oracle:.2e}",
            rows.len()
        ),
    )
}

fn c8_corollary41() -> Verdict {
    let (mu0, delta) = (0.1, 0.3);
    let n = 240;
    let mut rows = Vec::new();
    for k in 0..20 {
        let breaks = 5 + 11 * k;
        let prob: Vec<f64> = (0..n).map(|t| if t < breaks { 1.0 } else { 0.0 }).collect();
        let d: Vec<f64> = prob.iter().map(|p| mu0 + delta * p).collect();
        let spikes = vec![false; n];
        rows.push(decompose(&format!("k{k:02}"), &d, &prob, &spikes).unwrap());
    }
    let report = corollary41_check(&rows, 1e-9).unwrap();
    let mut sorted: Vec<(f64, f64)> = rows.iter().map(|r| (r.pi, r.e_delta)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let oracle_violations = sorted.windows(2).filter(|w| w[1].1 < w[0].1).count();
    verdict(
        report.monotonicity_violations == 0
            && oracle_violations == 0
            && report.verdict == Corollary41Verdict::Consistent,
        format!(
            "{} rows, violations {} (oracle {oracle_violations}), verdict {:?}",
            report.n, report.monotonicity_violations, report.verdict
        ),
    )
}

fn type7(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Δ recomputed from the fitted parameters with hand-written recursions.
fn delta_by_hand(f: &[f64]) -> Vec<f64> {
    let series = TimeSeries::monthly(MonthIndex::new(2000, 1).unwrap(), f.to_vec());
    let st = fit_stable_mle(&series).unwrap();
    let br = fit_break_mle(&series).unwrap();
    let (p, b) = (st.params, br.params);
    let (mut m, mut v) = (st.prior.mean, st.prior.variance);
    let mut pr = br.init;
    let mut out = Vec::with_capacity(f.len());
    for &x in f {
        let pm = p.rho * m;
        let pv = p.rho * p.rho * v + p.sigma_eta * p.sigma_eta;
        let s2 = pv + p.sigma_u * p.sigma_u;
        let ls = ln_normal(x, pm, s2);
        let d0 = pr[0] * ln_normal(x, b.mu0, b.sd0 * b.sd0).exp();
        let d1 = pr[1] * ln_normal(x, b.mu1, b.sd1 * b.sd1).exp();
        out.push((d0 + d1).ln() - ls);
        let k = pv / s2;
        m = pm + k * (x - pm);
        v = (1.0 - k) * pv;
        let f1 = d1 / (d0 + d1);
        pr = [(1.0 - f1) * b.p00 + f1 * (1.0 - b.p11), (1.0 - f1) * (1.0 - b.p00) + f1 * b.p11];
    }
    out
}

fn c9_spike() -> Verdict {
    let exp = SpikeExperiment::default();
    let outcomes: Vec<_> = (0..exp.paths as u64)
        .into_par_iter()
        .map(|r| exp.replicate(r).unwrap())
        .collect();
    let rate = spike_pass_rate(&outcomes);
    let by_count = outcomes.iter().filter(|o| o.post_max > o.pre_quantile).count() as f64 / outcomes.len() as f64;
    // Two paths recomputed end to end.
    let mut agree = true;
    for r in [0u64, 1] {
        let mut forced = BTreeMap::new();
        forced.insert(exp.t_star, exp.jump());
        let path = simulate_true_process(&TrueProcessConfig {
            a: exp.a,
            sigma_eta: exp.sigma_eta,
            sigma_u: exp.sigma_u,
            p: 0.0,
            mu_j: 0.0,
            sigma_j: 0.0,
            t: exp.t,
            seed: exp.seed + r,
            lambda0: 0.0,
            forced_jumps: forced,
        })
        .unwrap();
        let d = delta_by_hand(&path.f);
        let q = type7(&d[..exp.t_star], exp.quantile);
        let mx = d[exp.t_star..exp.t_star + exp.window].iter().copied().fold(f64::MIN, f64::max);
        let o = outcomes[r as usize];
        agree &= close(o.pre_quantile, q, 1e-8) && close(o.post_max, mx, 1e-8);
    }
    verdict(
        rate >= 0.95 && rate == by_count && agree,
        format!(
            "{} paths, {:.3} clear the pre-break 99th percentile within 3 months (hand recomputation agrees: {agree})",
            outcomes.len(),
            rate
        ),
    )
}

fn design(d: &RegressionData) -> DMatrix<f64> {
    DMatrix::from_fn(d.len(), d.regressors.len() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            d.regressors[j - 1].values[i]
        }
    })
}

fn max_cov_diff(res: &RegressionResult, v: &DMatrix<f64>) -> f64 {
    let mut w = 0.0f64;
    for i in 0..v.nrows() {
        for j in 0..v.ncols() {
            w = w.max((res.covariance[(i, j)] - v[(i, j)]).abs());
        }
    }
    w
}

fn c10_regression() -> Verdict {
    let mut r = replication_rng(1010, 0);
    let n = 10;
    let x1: Vec<f64> = (0..n).map(|_| gauss(&mut r)).collect();
    let x2: Vec<f64> = (0..n).map(|_| gauss(&mut r)).collect();
    let y: Vec<f64> = (0..n).map(|i| 0.3 + 0.5 * x1[i] - 0.2 * x2[i] + (1.0 + x1[i].abs()) * gauss(&mut r)).collect();
    let data = RegressionData {
        y: y.clone(),
        regressors: vec![Regressor::new("x1", x1), Regressor::new("x2", x2)],
        units: Some((0..n as u32).map(|i| i / 2).collect()),
        times: Some((0..n as i64).map(|i| i % 2).collect()),
    };
    let ts = RegressionData {
        units: None,
        times: None,
        ..data.clone()
    };
    let x = design(&data);
    let k = x.ncols();
    let yv = DVector::from_vec(y);
    let bread = (x.transpose() * &x).try_inverse().unwrap();
    let beta = &bread * x.transpose() * &yv;
    let e = &yv - &x * &beta;
    let sand = |meat: &DMatrix<f64>| &bread * meat * &bread;
    let score = |i: usize| x.row(i).transpose() * e[i];
    let spec = |covariance| RegressionSpec {
        covariance,
        ..RegressionSpec::default()
    };
    let mut worst = 0.0f64;

    let classic = run_regression(&ts, &spec(Covariance::Classic)).unwrap();
    for (c, b) in classic.coefficients.iter().zip(beta.iter()) {
        worst = worst.max((c.estimate - b).abs());
    }
    worst = worst.max(max_cov_diff(&classic, &(&bread * (e.dot(&e) / (n - k) as f64))));

    let mut hc3 = DMatrix::zeros(k, k);
    for i in 0..n {
        let xi = x.row(i).transpose();
        let h = (xi.transpose() * &bread * &xi)[(0, 0)];
        hc3 += &xi * xi.transpose() * (e[i] / (1.0 - h)).powi(2);
    }
    worst = worst.max(max_cov_diff(&run_regression(&ts, &spec(Covariance::Hc3)).unwrap(), &sand(&hc3)));

    for lag in 0..4 {
        let mut meat = DMatrix::zeros(k, k);
        for i in 0..n {
            meat += score(i) * score(i).transpose();
        }
        for l in 1..=lag {
            let w = 1.0 - l as f64 / (lag + 1) as f64;
            for t in l..n {
                meat += (score(t) * score(t - l).transpose() + score(t - l) * score(t).transpose()) * w;
            }
        }
        let res = run_regression(&ts, &spec(Covariance::NeweyWest { lag })).unwrap();
        worst = worst.max(max_cov_diff(&res, &sand(&meat)));
    }

    let cluster = |key: &dyn Fn(usize) -> i64| {
        let mut sums: BTreeMap<i64, DVector<f64>> = BTreeMap::new();
        for i in 0..n {
            *sums.entry(key(i)).or_insert_with(|| DVector::zeros(k)) += score(i);
        }
        let mut meat = DMatrix::zeros(k, k);
        for s in sums.values() {
            meat += s * s.transpose();
        }
        let g = sums.len() as f64;
        (sand(&meat), g / (g - 1.0) * (n - 1) as f64 / (n - k) as f64)
    };
    let (vu, cu) = cluster(&|i| (i / 2) as i64);
    let (vt, ct) = cluster(&|i| (i % 2) as i64);
    let (vi, ci) = cluster(&|i| i as i64);
    for small_sample in [false, true] {
        let s = |c: f64| if small_sample { c } else { 1.0 };
        let unit = run_regression(
            &data,
            &spec(Covariance::Cluster {
                dim: ClusterDim::Unit,
                small_sample,
            }),
        )
        .unwrap();
        worst = worst.max(max_cov_diff(&unit, &(&vu * s(cu))));
        let time = run_regression(
            &data,
            &spec(Covariance::Cluster {
                dim: ClusterDim::Time,
                small_sample,
            }),
        )
        .unwrap();
        worst = worst.max(max_cov_diff(&time, &(&vt * s(ct))));
        let two = run_regression(&data, &spec(Covariance::TwoWay { small_sample })).unwrap();
        worst = worst.max(max_cov_diff(&two, &(&vu * s(cu) + &vt * s(ct) - &vi * s(ci))));
    }

    let nw0 = run_regression(&ts, &spec(Covariance::NeweyWest { lag: 0 })).unwrap();
    let hc0 = run_regression(&ts, &spec(Covariance::Hc0)).unwrap();
    let identical = nw0.covariance == hc0.covariance;
    verdict(
        worst <= 1e-10 && identical,
        format!("10-row fixtures, max abs diff {worst:.2e}, NW(0) bit-identical to HC0: {identical}"),
    )
}

fn c11_hp() -> Verdict {
    let start = MonthIndex::new(1990, 1).unwrap();
    let exo = |v: &[f64]| -> ExogenousSeries { start.range(v.len()).zip(v.iter().copied()).collect() };
    let mut worst = 0.0f64;
    for (a, b) in [(0.0, 1.0), (3.5, -0.02), (-100.0, 7.0)] {
        let v: Vec<f64> = (0..180).map(|t| a + b * t as f64).collect();
        for (_, c) in one_sided_hp_detrend(&exo(&v), HP_LAMBDA_MONTHLY).unwrap() {
            worst = worst.max(c.abs());
        }
    }
    let mut r = replication_rng(1111, 0);
    let v: Vec<f64> = (0..150).map(|_| gauss(&mut r)).collect();
    let full = one_sided_hp_detrend(&exo(&v), HP_LAMBDA_MONTHLY).unwrap();
    let mut causal = true;
    for k in [4, 5, 17, 60, 149] {
        let pre = one_sided_hp_detrend(&exo(&v[..k]), HP_LAMBDA_MONTHLY).unwrap();
        causal &= pre
            .iter()
            .zip(&full)
            .all(|(p, f)| p.0 == f.0 && p.1.to_bits() == f.1.to_bits());
    }
    verdict(
        worst <= 1e-9 && causal,
        format!("max |cycle| on affine input {worst:.2e}, prefix recomputation bit-identical: {causal}"),
    )
}

struct PaperRow {
    id: &'static str,
    stable_ll: f64,
    /// rho, sigma_u, sigma_eta; negative marks a "< |value|" entry.
    stable: [f64; 3],
    break_ll: f64,
    /// mu0, mu1, sd0, sd1, p00, p11.
    brk: [f64; 6],
}

const PAPER: [PaperRow; 6] = [
    PaperRow {
        id: "MKT",
        stable_ll: 1255.79,
        stable: [0.0587, 0.0013, 0.0449],
        break_ll: 1314.32,
        brk: [0.0109, 0.0011, 0.0281, 0.0558, 0.9489, 0.9475],
    },
    PaperRow {
        id: "SMB",
        stable_ll: 1551.30,
        stable: [0.3680, 0.0277, 0.0114],
        break_ll: 1596.43,
        brk: [-0.0009, 0.0067, 0.0219, 0.0409, 0.9536, 0.9136],
    },
    PaperRow {
        id: "HML",
        stable_ll: 1572.75,
        stable: [0.4923, 0.0244, 0.0150],
        break_ll: 1649.15,
        brk: [0.0002, 0.0074, 0.0187, 0.0417, 0.9673, 0.9459],
    },
    PaperRow {
        id: "RMW",
        stable_ll: 1787.94,
        stable: [0.1602, -0.0001, 0.0221],
        break_ll: 1943.01,
        brk: [0.0020, 0.0084, 0.0158, 0.0512, 0.9964, 0.9656],
    },
    PaperRow {
        id: "CMA",
        stable_ll: 1842.33,
        stable: [0.4695, 0.0173, 0.0101],
        break_ll: 1915.91,
        brk: [0.0009, 0.0072, 0.0150, 0.0317, 0.9851, 0.9534],
    },
    PaperRow {
        id: "UMD",
        stable_ll: 1937.79,
        stable: [0.0849, 0.0001, 0.0470],
        break_ll: 2277.97,
        brk: [0.0081, -0.0037, 0.0265, 0.0972, 0.9758, 0.8792],
    },
];

/// 20% of the reported value, widened by the half-unit of its last
/// reported digit; "< x" entries must stay below 1.2x.
fn param_ok(est: f64, paper: f64) -> bool {
    if paper < 0.0 && paper > -0.001 {
        return est.abs() < 1.2 * paper.abs();
    }
    (est - paper).abs() <= 0.2 * paper.abs() + 0.00005
}

fn c12_ff6() -> Verdict {
    let Ok(path) = std::env::var("FF6_CSV") else {
        return Verdict::Skip("FF6_CSV not set; the public factor file is required".into());
    };
    let raw = match load_returns(std::path::Path::new(&path), Layout::Wide, Unit::Percent) {
        Ok(p) => p,
        Err(e) => return Verdict::Fail(format!("cannot read {path}: {e}")),
    };
    let alias = |id: &'static str| -> Vec<&'static str> {
        match id {
            "MKT" => vec!["MKT", "Mkt-RF", "Mkt_RF"],
            "UMD" => vec!["UMD", "Mom", "MOM"],
            other => vec![other],
        }
    };
    let end = MonthIndex::new(2026, 1).unwrap();
    let mut failures = Vec::new();
    let mut dll = Vec::new();
    for row in &PAPER {
        let Some(col) = alias(row.id).into_iter().find(|c| raw.contains(c)) else {
            return Verdict::Fail(format!("{path}: no column for {}", row.id));
        };
        let s = raw.series(col).unwrap();
        let start = if row.id == "UMD" {
            MonthIndex::new(1927, 1).unwrap()
        } else {
            MonthIndex::new(1963, 7).unwrap()
        };
        let (dates, values): (Vec<MonthIndex>, Vec<f64>) = s
            .dates
            .iter()
            .zip(&s.values)
            .filter(|(d, _)| **d >= start && **d <= end)
            .map(|(d, v)| (*d, *v))
            .unzip();
        let ts = TimeSeries::new(dates, values).unwrap();
        let st = fit_stable_mle(&ts).unwrap();
        let br = fit_break_mle(&ts).unwrap();
        if (st.loglik - row.stable_ll).abs() > 2.0 {
            failures.push(format!("{} stable loglik {:.2} vs {:.2}", row.id, st.loglik, row.stable_ll));
        }
        if (br.loglik - row.break_ll).abs() > 2.0 {
            failures.push(format!("{} break loglik {:.2} vs {:.2}", row.id, br.loglik, row.break_ll));
        }
        let sp = st.params;
        for (name, est, paper) in [("rho", sp.rho, row.stable[0]), ("sigma_u", sp.sigma_u, row.stable[1]), ("sigma_eta", sp.sigma_eta, row.stable[2])] {
            if !param_ok(est, paper) {
                failures.push(format!("{} {name} {est:.4} vs {paper}", row.id));
            }
        }
        let bp = br.params;
        let names = ["mu0", "mu1", "sd0", "sd1", "p00", "p11"];
        let ests = [bp.mu0, bp.mu1, bp.sd0, bp.sd1, bp.p00, bp.p11];
        for ((name, est), paper) in names.iter().zip(ests).zip(row.brk) {
            if (est - paper).abs() > 0.2 * paper.abs() + 0.00005 {
                failures.push(format!("{} {name} {est:.4} vs {paper}", row.id));
            }
        }
        dll.push((row.id, br.loglik - st.loglik));
    }
    let mut order = dll.clone();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    let got: Vec<&str> = order.iter().map(|d| d.0).collect();
    let paper_order = ["UMD", "RMW", "HML", "CMA", "MKT", "SMB"];
    if got != paper_order {
        failures.push(format!("dLL order {got:?}, paper {paper_order:?}"));
    }
    if dll.iter().any(|d| d.1 <= 0.0) {
        failures.push("a dLL is not positive".into());
    }
    let detail = dll.iter().map(|(id, d)| format!("{id} {d:.2}")).collect::<Vec<_>>().join(", ");
    if failures.is_empty() {
        Verdict::Pass(format!("dLL {detail}"))
    } else {
        Verdict::Fail(format!("dLL {detail}; {}", failures.join("; ")))
    }
}

fn c13_determinism() -> Verdict {
    let dir = common::fixture(180, 9);
    let cfg = dir.path().join("config.toml");
    let mut trees = Vec::new();
    for run in ["one", "two"] {
        let out = dir.path().join(run);
        let o = common::cli(&["report", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        if !o.status.success() {
            return Verdict::Fail(format!("report failed: {}", common::stderr(&o)));
        }
        trees.push(common::tree(&out));
    }
    let files: BTreeSet<_> = trees[0].keys().collect();
    let bytes: usize = trees[0].values().map(Vec::len).sum();
    verdict(
        trees[0] == trees[1] && files.len() > 15,
        format!("{} files, {bytes} bytes, identical: {}", files.len(), trees[0] == trees[1]),
    )
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Verdict); 13] = [
        ("Kalman filter vs joint Gaussian", c1_kalman),
        ("Hamilton filter vs path enumeration", c2_hamilton),
        ("mixture log ratio closed form", c3_lemma1),
        ("post-break error dynamics and gain ordering", c4_prop1),
        ("likelihood-gap comparative statics", c5_prop2),
        ("market clearing and wedge identities", c6_theorem1),
        ("decomposition identity", c7_decomposition),
        ("monotonicity under common mu0, constant gap", c8_corollary41),
        ("mislearning spikes after a 4 sd break", c9_spike),
        ("regression covariance oracles", c10_regression),
        ("one-sided HP filter", c11_hp),
        ("FF6 model fit diagnostics", c12_ff6),
        ("byte-identical pipeline reruns", c13_determinism),
    ];
    let mut failed = Vec::new();
    let mut err = std::io::stderr();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed.push(i + 1);
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        writeln!(err, "criterion {:>2} {tag}: {name}: {detail} [{secs:.1} s]", i + 1).unwrap();
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
