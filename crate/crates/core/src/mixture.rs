//! Closed-form likelihood ratio between the stable predictive density and a
//! break-aware two-component mixture, plus the comparative statics used to
//! show that mislearning spikes grow with break size and model rigidity.

// Shadowed by inherent methods whenever std is in the crate graph.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::math::log_add_exp;

/// Stable predictive `N(m, s_S2)` against the mixture
/// `(1-p) N(m, s_S2) + p N(m + mu_j, s_S2 + sigma_j2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureLrConfig {
    pub m: f64,
    pub s_s2: f64,
    pub sigma_j2: f64,
    pub mu_j: f64,
    pub p: f64,
}

impl MixtureLrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_s2 > 0.0) {
            return Err(invalid("s_s2", "stable predictive variance must be > 0"));
        }
        if !(self.sigma_j2 >= 0.0) {
            return Err(invalid("sigma_j2", "jump variance increment must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid("p", "jump probability must lie in [0, 1]"));
        }
        if !self.m.is_finite() || !self.mu_j.is_finite() {
            return Err(invalid("m", "means must be finite"));
        }
        Ok(())
    }

    /// Break-model predictive variance `s_B2 = s_S2 + sigma_j2`.
    pub fn s_b2(&self) -> f64 {
        self.s_s2 + self.sigma_j2
    }

    /// Log density ratio of the jump component to the stable density at `x`.
    pub fn g(&self, x: f64) -> f64 {
        let s_b2 = self.s_b2();
        let d = x - self.m;
        let dj = d - self.mu_j;
        0.5 * (self.s_s2 / s_b2).ln() + d * d / (2.0 * self.s_s2) - dj * dj / (2.0 * s_b2)
    }

    /// `ln[(1-p) + p e^g]`, evaluated without overflow.
    pub fn delta_from_g(&self, g: f64) -> f64 {
        let a = if self.p < 1.0 { (1.0 - self.p).ln() } else { f64::NEG_INFINITY };
        let b = if self.p > 0.0 { self.p.ln() + g } else { f64::NEG_INFINITY };
        log_add_exp(a, b)
    }
}

/// Returns `(g, Δ)` at the realized value `x`.
pub fn mixture_log_ratio(cfg: &MixtureLrConfig, x: f64) -> Result<(f64, f64)> {
    cfg.validate()?;
    let g = cfg.g(x);
    Ok((g, cfg.delta_from_g(g)))
}

/// Comparative statics at the break-consistent realization `x = m + μ_J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop2Report {
    pub g_at_break: f64,
    /// Analytic `∂g/∂|μ_J| = |μ_J| / s`.
    pub dg_dabs_mu: f64,
    /// Central-difference counterpart of `dg_dabs_mu`.
    pub dg_dabs_mu_numeric: f64,
    /// Analytic `∂g/∂s = σ_J²/(2s(s+σ_J²)) - μ_J²/(2s²)`.
    pub dg_ds: f64,
    pub dg_ds_numeric: f64,
    /// `σ_J² s / (s + σ_J²)`.
    pub rigidity_threshold: f64,
    /// `μ_J² > σ_J² s/(s+σ_J²)`: a more rigid model magnifies the gap.
    pub rigidity_condition: bool,
}

fn g_at_break(s: f64, sigma_j2: f64, abs_mu: f64) -> f64 {
    0.5 * (s / (s + sigma_j2)).ln() + abs_mu * abs_mu / (2.0 * s)
}

pub fn prop2_diagnostics(cfg: &MixtureLrConfig) -> Result<Prop2Report> {
    cfg.validate()?;
    let s = cfg.s_s2;
    let sj = cfg.sigma_j2;
    let a = cfg.mu_j.abs();
    let h_mu = 1e-6 * a.max(1e-3);
    let h_s = 1e-6 * s;
    let dg_dabs_mu_numeric =
        (g_at_break(s, sj, a + h_mu) - g_at_break(s, sj, (a - h_mu).max(0.0))) / (a + h_mu - (a - h_mu).max(0.0));
    let dg_ds_numeric = (g_at_break(s + h_s, sj, a) - g_at_break(s - h_s, sj, a)) / (2.0 * h_s);
    let threshold = sj * s / (s + sj);
    Ok(Prop2Report {
        g_at_break: cfg.g(cfg.m + cfg.mu_j),
        dg_dabs_mu: a / s,
        dg_dabs_mu_numeric,
        dg_ds: sj / (2.0 * s * (s + sj)) - cfg.mu_j * cfg.mu_j / (2.0 * s * s),
        dg_ds_numeric,
        rigidity_threshold: threshold,
        rigidity_condition: cfg.mu_j * cfg.mu_j > threshold,
    })
}
