//! Break-aware benchmark: two-state Gaussian Markov-switching model
//! filtered with the Hamilton recursion and estimated by maximum likelihood.
//!
//! State 1 is the break (high-variance) state; fits are relabeled so that
//! `sd1 >= sd0`.

use alloc::vec::Vec;

// Shadowed by inherent methods whenever std is in the crate graph.
#[allow(unused_imports)]
use num_traits::Float;

use crate::calendar::MonthIndex;
use crate::error::{invalid, Error, Result};
use crate::math::{log_add_exp, mean, normal_logpdf, sample_sd};
use crate::optimize::{minimize_multistart, newton_polish, NelderMeadOptions};
use crate::panel::TimeSeries;
use crate::stable::{information_criteria, FLOOR_BAND, SD_FLOOR};

pub const BREAK_PARAM_COUNT: usize = 6;
pub const BREAK_MIN_OBS: usize = 48;
/// Self-transition probability above which a fit is flagged degenerate.
pub const ABSORBING_LIMIT: f64 = 0.9999;
/// Filtered probability above which a month is classified as a break state.
pub const BREAK_STATE_THRESHOLD: f64 = 0.5;
const PROB_LIMIT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakParams {
    pub mu0: f64,
    pub mu1: f64,
    pub sd0: f64,
    pub sd1: f64,
    pub p00: f64,
    pub p11: f64,
}

impl BreakParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu0", self.mu0), ("mu1", self.mu1)] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        for (name, v) in [("sd0", self.sd0), ("sd1", self.sd1)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, "must be finite and > 0"));
            }
        }
        for (name, v) in [("p00", self.p00), ("p11", self.p11)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// `[[p00, 1-p00], [1-p11, p11]]`, rows indexed by the current state.
    pub fn transition(&self) -> [[f64; 2]; 2] {
        [[self.p00, 1.0 - self.p00], [1.0 - self.p11, self.p11]]
    }

    /// Stationary distribution; `None` when the chain has no unique one.
    pub fn ergodic(&self) -> Option<[f64; 2]> {
        let denom = 2.0 - self.p00 - self.p11;
        if denom <= 0.0 {
            return None;
        }
        let pi1 = (1.0 - self.p00) / denom;
        Some([1.0 - pi1, pi1])
    }

    /// One-step state prediction from a filtered distribution.
    pub fn predict(&self, filtered: [f64; 2]) -> [f64; 2] {
        let tr = self.transition();
        [
            filtered[0] * tr[0][0] + filtered[1] * tr[1][0],
            filtered[0] * tr[0][1] + filtered[1] * tr[1][1],
        ]
    }

    /// Swaps the state labels.
    pub fn swapped(&self) -> Self {
        Self {
            mu0: self.mu1,
            mu1: self.mu0,
            sd0: self.sd1,
            sd1: self.sd0,
            p00: self.p11,
            p11: self.p00,
        }
    }

    /// Labels the higher-variance state as state 1.
    pub fn relabeled(&self) -> Self {
        if self.sd0 > self.sd1 {
            self.swapped()
        } else {
            *self
        }
    }

    pub fn to_unconstrained(&self) -> [f64; 6] {
        let logit = |p: f64| {
            let p = p.clamp(PROB_LIMIT, 1.0 - PROB_LIMIT);
            (p / (1.0 - p)).ln()
        };
        [
            self.mu0,
            self.mu1,
            self.sd0.max(SD_FLOOR).ln(),
            self.sd1.max(SD_FLOOR).ln(),
            logit(self.p00),
            logit(self.p11),
        ]
    }

    pub fn from_unconstrained(theta: &[f64]) -> Self {
        let expit = |x: f64| (1.0 / (1.0 + (-x).exp())).clamp(PROB_LIMIT, 1.0 - PROB_LIMIT);
        Self {
            mu0: theta[0],
            mu1: theta[1],
            sd0: theta[2].exp().max(SD_FLOOR),
            sd1: theta[3].exp().max(SD_FLOOR),
            p00: expit(theta[4]),
            p11: expit(theta[5]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeStep {
    /// `Pr(S_t = j | F_{t-1})`.
    pub predicted: [f64; 2],
    /// `Pr(S_t = j | F_t)`.
    pub filtered: [f64; 2],
    /// `Pr(S_{t+1} = 1 | F_t)`.
    pub next_break: f64,
    /// `log p_B(f_t | F_{t-1})`.
    pub log_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonOutput {
    pub steps: Vec<RegimeStep>,
    pub loglik: f64,
}

fn validate_init(init: [f64; 2]) -> Result<()> {
    if init.iter().any(|p| !(0.0..=1.0).contains(p)) || ((init[0] + init[1]) - 1.0).abs() > 1e-12 {
        return Err(invalid("init", "initial state distribution must be a probability vector"));
    }
    Ok(())
}

/// Hamilton filter. `init` is the state distribution for the first
/// observation, i.e. `Pr(S_1 = j | F_0)`. All mixing happens in log space.
pub fn hamilton_filter(series: &[f64], params: &BreakParams, init: [f64; 2]) -> Result<HamiltonOutput> {
    params.validate()?;
    validate_init(init)?;
    if let Some(index) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let vars = [params.sd0 * params.sd0, params.sd1 * params.sd1];
    let means = [params.mu0, params.mu1];
    let mut predicted = init;
    let mut steps = Vec::with_capacity(series.len());
    let mut loglik = 0.0;
    for (t, &f) in series.iter().enumerate() {
        let lj = [
            predicted[0].ln() + normal_logpdf(f, means[0], vars[0]),
            predicted[1].ln() + normal_logpdf(f, means[1], vars[1]),
        ];
        let log_density = log_add_exp(lj[0], lj[1]);
        if !log_density.is_finite() {
            return Err(Error::Degenerate(alloc::format!(
                "zero predictive density at position {t}"
            )));
        }
        let f1 = (lj[1] - log_density).exp();
        let filtered = [1.0 - f1, f1];
        let next = params.predict(filtered);
        steps.push(RegimeStep {
            predicted,
            filtered,
            next_break: next[1],
            log_density,
        });
        loglik += log_density;
        predicted = next;
    }
    Ok(HamiltonOutput { steps, loglik })
}

/// Log-likelihood only; `-inf` on degeneracy.
pub fn hamilton_loglik(series: &[f64], params: &BreakParams, init: [f64; 2]) -> f64 {
    let vars = [params.sd0 * params.sd0, params.sd1 * params.sd1];
    let means = [params.mu0, params.mu1];
    let mut pred = init;
    let mut ll = 0.0;
    for &f in series {
        let l0 = pred[0].ln() + normal_logpdf(f, means[0], vars[0]);
        let l1 = pred[1].ln() + normal_logpdf(f, means[1], vars[1]);
        let ld = log_add_exp(l0, l1);
        if !ld.is_finite() {
            return f64::NEG_INFINITY;
        }
        ll += ld;
        let f1 = (l1 - ld).exp();
        pred = params.predict([1.0 - f1, f1]);
    }
    ll
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakFit {
    pub dates: Vec<MonthIndex>,
    pub params: BreakParams,
    pub init: [f64; 2],
    pub filter: HamiltonOutput,
    pub loglik: f64,
    pub n_obs: usize,
    pub aic: f64,
    pub bic: f64,
    /// A standard deviation on the floor or a near-absorbing state.
    pub degenerate: bool,
}

impl BreakFit {
    /// Evaluates the model at fixed parameters, starting from the ergodic
    /// distribution (uniform if the chain has none).
    pub fn evaluate(series: &TimeSeries, params: BreakParams) -> Result<Self> {
        let init = params.ergodic().unwrap_or([0.5, 0.5]);
        let filter = hamilton_filter(&series.values, &params, init)?;
        let n = series.len();
        let (aic, bic) = information_criteria(filter.loglik, BREAK_PARAM_COUNT, n);
        let degenerate = params.sd0 < FLOOR_BAND
            || params.sd1 < FLOOR_BAND
            || params.p00 > ABSORBING_LIMIT
            || params.p11 > ABSORBING_LIMIT;
        Ok(Self {
            dates: series.dates.clone(),
            params,
            init,
            loglik: filter.loglik,
            filter,
            n_obs: n,
            aic,
            bic,
            degenerate,
        })
    }

    pub fn log_densities(&self) -> Vec<f64> {
        self.filter.steps.iter().map(|s| s.log_density).collect()
    }

    /// Share of months whose filtered break probability exceeds 0.5.
    pub fn break_state_share(&self) -> f64 {
        let n = self.filter.steps.len();
        if n == 0 {
            return f64::NAN;
        }
        let hits = self
            .filter
            .steps
            .iter()
            .filter(|s| s.filtered[1] > BREAK_STATE_THRESHOLD)
            .count();
        hits as f64 / n as f64
    }
}

fn break_objective(series: &[f64], theta: &[f64]) -> f64 {
    let p = BreakParams::from_unconstrained(theta);
    let init = p.ergodic().unwrap_or([0.5, 0.5]);
    -hamilton_loglik(series, &p, init)
}

/// Eight starting points built from the sample mean and standard deviation.
pub fn break_starts(series: &[f64]) -> Vec<BreakParams> {
    let m = mean(series);
    let s = sample_sd(series).max(SD_FLOOR);
    let raw = [
        (0.0, 0.0, 0.7, 1.6, 0.95, 0.90),
        (0.0, 0.0, 0.5, 2.0, 0.98, 0.95),
        (0.0, 0.0, 0.8, 1.3, 0.90, 0.90),
        (0.25, -0.25, 0.7, 1.5, 0.95, 0.90),
        (-0.25, 0.25, 0.7, 1.5, 0.95, 0.90),
        (0.0, 0.0, 0.6, 1.8, 0.99, 0.80),
        (0.0, 0.0, 0.9, 3.0, 0.97, 0.70),
        (0.5, -0.5, 0.8, 1.2, 0.80, 0.80),
    ];
    raw.iter()
        .map(|&(d0, d1, c0, c1, p00, p11)| BreakParams {
            mu0: m + d0 * s,
            mu1: m + d1 * s,
            sd0: c0 * s,
            sd1: c1 * s,
            p00,
            p11,
        })
        .collect()
}

/// Maximum-likelihood fit of the two-state model (logit transition
/// probabilities, log standard deviations), relabeled so state 1 has the
/// larger variance.
pub fn fit_break_mle(series: &TimeSeries) -> Result<BreakFit> {
    let y = &series.values;
    if y.len() < BREAK_MIN_OBS {
        return Err(Error::InsufficientData {
            needed: BREAK_MIN_OBS,
            got: y.len(),
        });
    }
    if let Some(index) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    if y.iter().all(|v| *v == y[0]) {
        let p = BreakParams {
            mu0: y[0],
            mu1: y[0],
            sd0: SD_FLOOR,
            sd1: SD_FLOOR,
            p00: 0.5,
            p11: 0.5,
        };
        let mut fit = BreakFit::evaluate(series, p)?;
        fit.degenerate = true;
        return Ok(fit);
    }
    let starts: Vec<Vec<f64>> = break_starts(y).iter().map(|p| p.to_unconstrained().to_vec()).collect();
    let opts = NelderMeadOptions {
        max_evals: 40_000,
        ftol_rel: 1e-8,
        ftol_abs: 1e-10,
        xtol: 1e-6,
        ..NelderMeadOptions::default()
    };
    let best = minimize_multistart(|th| break_objective(y, th), &starts, &opts)?;
    let (theta, _) = newton_polish(|th| break_objective(y, th), &best.x, 8);
    let params = BreakParams::from_unconstrained(&theta).relabeled();
    BreakFit::evaluate(series, params)
}

/// Negative log-likelihood on unconstrained coordinates.
pub fn break_negloglik(series: &[f64], theta: &[f64]) -> f64 {
    break_objective(series, theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakProbabilityMode {
    /// `Pr(S_t = 1 | F_t)`.
    Filtered,
    /// `Pr(S_{t+1} = 1 | F_t)`.
    PredictedNext,
}

pub fn break_probability_series(fit: &BreakFit, mode: BreakProbabilityMode) -> Vec<(MonthIndex, f64)> {
    fit.dates
        .iter()
        .zip(&fit.filter.steps)
        .map(|(t, s)| {
            let p = match mode {
                BreakProbabilityMode::Filtered => s.filtered[1],
                BreakProbabilityMode::PredictedNext => s.next_break,
            };
            (*t, p)
        })
        .collect()
}
