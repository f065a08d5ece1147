//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub struct JointGaussian {
    /// Posterior mean and variance of `λ_t` given `f_1..f_t`.
    pub posterior: Vec<(f64, f64)>,
    pub loglik: f64,
}

/// Brute-force posterior and likelihood of the AR(1)-plus-noise model from
/// the joint Gaussian distribution of states and observations.
pub fn kalman_joint(f: &[f64], rho: f64, su: f64, se: f64, m0: f64, p0: f64) -> JointGaussian {
    let n = f.len();
    let (q, r) = (se * se, su * su);
    let cov = |s: usize, t: usize| {
        let mut c = rho.powi((s + t) as i32) * p0;
        for j in 1..=s.min(t) {
            c += q * rho.powi((s + t - 2 * j) as i32);
        }
        c
    };
    let mean: Vec<f64> = (1..=n).map(|s| rho.powi(s as i32) * m0).collect();
    let mut posterior = Vec::with_capacity(n);
    for t in 1..=n {
        let sf = DMatrix::from_fn(t, t, |i, j| cov(i + 1, j + 1) + if i == j { r } else { 0.0 });
        let c = DVector::from_fn(t, |i, _| cov(t, i + 1));
        let dev = DVector::from_fn(t, |i, _| f[i] - mean[i]);
        let inv = sf.try_inverse().expect("covariance is positive definite");
        let w = &inv * &c;
        posterior.push((mean[t - 1] + w.dot(&dev), cov(t, t) - c.dot(&w)));
    }
    let sf = DMatrix::from_fn(n, n, |i, j| cov(i + 1, j + 1) + if i == j { r } else { 0.0 });
    let dev = DVector::from_fn(n, |i, _| f[i] - mean[i]);
    let chol = sf.cholesky().expect("covariance is positive definite");
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let quad = dev.dot(&chol.solve(&dev));
    let loglik = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad);
    JointGaussian { posterior, loglik }
}

fn phi(x: f64, m: f64, sd: f64) -> f64 {
    let z = (x - m) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// Log-likelihood of a two-state switching model by summing over all `2^T`
/// state paths.
pub fn hamilton_enumerate(f: &[f64], mu: [f64; 2], sd: [f64; 2], p: [[f64; 2]; 2], init: [f64; 2]) -> f64 {
    let n = f.len();
    let mut total = 0.0;
    for code in 0u32..(1 << n) {
        let state = |t: usize| ((code >> t) & 1) as usize;
        let mut w = init[state(0)] * phi(f[0], mu[state(0)], sd[state(0)]);
        for t in 1..n {
            w *= p[state(t - 1)][state(t)] * phi(f[t], mu[state(t)], sd[state(t)]);
        }
        total += w;
    }
    total.ln()
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// AR(1) state plus noise, stationary start.
pub fn ar_plus_noise(rng: &mut ChaCha8Rng, n: usize, rho: f64, su: f64, se: f64) -> Vec<f64> {
    let mut lambda = gauss(rng) * se / (1.0 - rho * rho).sqrt();
    (0..n)
        .map(|_| {
            lambda = rho * lambda + se * gauss(rng);
            lambda + su * gauss(rng)
        })
        .collect()
}

/// Two-state Markov-switching Gaussian sample started from the ergodic
/// distribution.
pub fn markov_switching(rng: &mut ChaCha8Rng, n: usize, mu: [f64; 2], sd: [f64; 2], p00: f64, p11: f64) -> Vec<f64> {
    let pi1 = (1.0 - p00) / (2.0 - p00 - p11);
    let mut s = usize::from(rng.random::<f64>() < pi1);
    (0..n)
        .map(|_| {
            let stay = if s == 0 { p00 } else { p11 };
            if rng.random::<f64>() >= stay {
                s = 1 - s;
            }
            mu[s] + sd[s] * gauss(rng)
        })
        .collect()
}

/// Dense OLS pieces: `(β, (X'X)⁻¹, residuals)`.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>, DVector<f64>) {
    let xtx_inv = (x.transpose() * x).try_inverse().expect("full rank");
    let b = &xtx_inv * x.transpose() * y;
    let e = y - x * &b;
    (b, xtx_inv, e)
}

/// `(X'X)⁻¹ M (X'X)⁻¹`.
pub fn sandwich(bread: &DMatrix<f64>, meat: &DMatrix<f64>) -> DMatrix<f64> {
    bread * meat * bread
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
