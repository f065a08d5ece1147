//! Stable (no-break) state-space model: scalar Kalman filter, steady-state
//! Riccati solution and maximum-likelihood estimation.
//!
//! Observation `f_t = λ_t + u_t`, state `λ_t = ρ λ_{t-1} + η_t`, with
//! `u ~ N(0, σ_u²)` and `η ~ N(0, σ_η²)`. Returns enter raw (no demeaning).

use alloc::vec::Vec;

// Shadowed by inherent methods whenever std is in the crate graph.
#[allow(unused_imports)]
use num_traits::Float;

use crate::calendar::MonthIndex;
use crate::error::{invalid, Error, Result};
use crate::math::{normal_logpdf, sample_variance, LN_2PI};
use crate::optimize::{minimize_multistart, newton_polish, NelderMeadOptions};
use crate::panel::TimeSeries;

/// Lower bound on estimated standard deviations.
pub const SD_FLOOR: f64 = 1e-8;
/// A standard deviation below this is reported as sitting on the floor.
pub const FLOOR_BAND: f64 = 10.0 * SD_FLOOR;
/// Number of free parameters in the stable model.
pub const STABLE_PARAM_COUNT: usize = 3;
/// Minimum series length for estimation.
pub const STABLE_MIN_OBS: usize = 24;
const RHO_LIMIT: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableParams {
    pub rho: f64,
    pub sigma_u: f64,
    pub sigma_eta: f64,
}

impl StableParams {
    pub fn new(rho: f64, sigma_u: f64, sigma_eta: f64) -> Result<Self> {
        let p = Self {
            rho,
            sigma_u,
            sigma_eta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < 1.0) {
            return Err(invalid("rho", "persistence must satisfy |rho| < 1"));
        }
        if !(self.sigma_u >= 0.0) || !self.sigma_u.is_finite() {
            return Err(invalid("sigma_u", "must be finite and >= 0"));
        }
        if !(self.sigma_eta >= 0.0) || !self.sigma_eta.is_finite() {
            return Err(invalid("sigma_eta", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Unconstrained coordinates `(atanh ρ, ln σ_u, ln σ_η)`.
    pub fn to_unconstrained(&self) -> [f64; 3] {
        [
            self.rho.atanh(),
            self.sigma_u.max(SD_FLOOR).ln(),
            self.sigma_eta.max(SD_FLOOR).ln(),
        ]
    }

    pub fn from_unconstrained(theta: &[f64]) -> Self {
        Self {
            rho: theta[0].tanh().clamp(-RHO_LIMIT, RHO_LIMIT),
            sigma_u: theta[1].exp().max(SD_FLOOR),
            sigma_eta: theta[2].exp().max(SD_FLOOR),
        }
    }
}

/// Gaussian prior on the state before the first observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatePrior {
    pub mean: f64,
    pub variance: f64,
}

impl StatePrior {
    /// Stationary prior `N(0, σ_η²/(1-ρ²))` when `|ρ| < 0.999`, otherwise a
    /// diffuse prior with variance `1e7 · var(series)`.
    pub fn default_for(params: &StableParams, series: &[f64]) -> Self {
        if params.rho.abs() < 0.999 {
            Self {
                mean: 0.0,
                variance: params.sigma_eta * params.sigma_eta / (1.0 - params.rho * params.rho),
            }
        } else {
            let v = sample_variance(series);
            Self {
                mean: 0.0,
                variance: 1e7 * if v.is_finite() && v > 0.0 { v } else { 1.0 },
            }
        }
    }
}

/// One period of filter output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterStep {
    /// `m_{t|t-1} = ρ λ̂_{t-1}`.
    pub pred_mean: f64,
    /// `P_{t|t-1}`.
    pub pred_state_var: f64,
    /// Predictive variance of the observation, `s²_{S,t} = P_{t|t-1} + σ_u²`.
    pub pred_obs_var: f64,
    pub gain: f64,
    /// `λ̂_t`.
    pub filt_mean: f64,
    /// `P_t`.
    pub filt_var: f64,
    /// `log p_S(f_t | F_{t-1})`.
    pub log_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanOutput {
    pub steps: Vec<FilterStep>,
    pub loglik: f64,
}

fn check_finite(series: &[f64]) -> Result<()> {
    match series.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Runs the scalar Kalman recursion over `series`.
pub fn kalman_filter(series: &[f64], params: &StableParams, prior: StatePrior) -> Result<KalmanOutput> {
    params.validate()?;
    check_finite(series)?;
    let (q, r) = (params.sigma_eta * params.sigma_eta, params.sigma_u * params.sigma_u);
    let mut mean = prior.mean;
    let mut var = prior.variance;
    let mut steps = Vec::with_capacity(series.len());
    let mut loglik = 0.0;
    for (t, &f) in series.iter().enumerate() {
        let pred_mean = params.rho * mean;
        let pred_state_var = params.rho * params.rho * var + q;
        let s2 = pred_state_var + r;
        if !(s2 > 0.0) {
            return Err(Error::Degenerate(alloc::format!(
                "zero predictive variance at position {t}"
            )));
        }
        let gain = pred_state_var / s2;
        let log_density = normal_logpdf(f, pred_mean, s2);
        mean = pred_mean + gain * (f - pred_mean);
        var = (1.0 - gain) * pred_state_var;
        loglik += log_density;
        steps.push(FilterStep {
            pred_mean,
            pred_state_var,
            pred_obs_var: s2,
            gain,
            filt_mean: mean,
            filt_var: var,
            log_density,
        });
    }
    Ok(KalmanOutput { steps, loglik })
}

/// Log-likelihood only, without allocating per-period output.
pub fn kalman_loglik(series: &[f64], params: &StableParams, prior: StatePrior) -> f64 {
    let (q, r) = (params.sigma_eta * params.sigma_eta, params.sigma_u * params.sigma_u);
    let mut mean = prior.mean;
    let mut var = prior.variance;
    let mut ll = 0.0;
    for &f in series {
        let pm = params.rho * mean;
        let pv = params.rho * params.rho * var + q;
        let s2 = pv + r;
        let e = f - pm;
        ll -= 0.5 * (LN_2PI + s2.ln() + e * e / s2);
        let k = pv / s2;
        mean = pm + k * e;
        var = (1.0 - k) * pv;
    }
    if ll.is_nan() {
        f64::NEG_INFINITY
    } else {
        ll
    }
}

/// Fixed point of the scalar Riccati recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub pred_var: f64,
    pub gain: f64,
    pub filt_var: f64,
    pub iterations: usize,
}

/// Steady-state predictive variance and gain of the filter with persistence
/// `a`, state noise `sigma_eta` and observation noise `sigma_u`.
///
/// Iterates `P ← a²(1-K)P + σ_η²`, `K = P/(P+σ_u²)` from `P = σ_η²` until the
/// relative change drops below 1e-12 (at most 1e5 iterations).
pub fn steady_state_gain(a: f64, sigma_eta: f64, sigma_u: f64) -> Result<SteadyState> {
    if !(a.abs() < 1.0) {
        return Err(invalid("a", "persistence must satisfy |a| < 1"));
    }
    if !(sigma_eta >= 0.0 && sigma_u >= 0.0) {
        return Err(invalid("sigma", "standard deviations must be >= 0"));
    }
    let q = sigma_eta * sigma_eta;
    let r = sigma_u * sigma_u;
    if q == 0.0 && r == 0.0 {
        return Err(Error::Degenerate("both noise variances are zero".into()));
    }
    let gain_of = |p: f64| if p + r > 0.0 { p / (p + r) } else { 0.0 };
    let mut p = q;
    let mut iterations = 0;
    while iterations < 100_000 {
        iterations += 1;
        let k = gain_of(p);
        let next = a * a * (1.0 - k) * p + q;
        let done = (next - p).abs() <= 1e-12 * next.abs() || next == p;
        p = next;
        if done {
            break;
        }
    }
    let gain = gain_of(p);
    Ok(SteadyState {
        pred_var: p,
        gain,
        filt_var: (1.0 - gain) * p,
        iterations,
    })
}

/// `(AIC, BIC) = (2k - 2 ln L, k ln n - 2 ln L)`.
pub fn information_criteria(loglik: f64, k: usize, n: usize) -> (f64, f64) {
    let k = k as f64;
    (2.0 * k - 2.0 * loglik, k * (n.max(1) as f64).ln() - 2.0 * loglik)
}

/// Maximum-likelihood fit of the stable model to one series.
#[derive(Debug, Clone, PartialEq)]
pub struct StableFit {
    pub dates: Vec<MonthIndex>,
    pub params: StableParams,
    pub prior: StatePrior,
    pub filter: KalmanOutput,
    pub loglik: f64,
    pub n_obs: usize,
    pub aic: f64,
    pub bic: f64,
    /// Estimated standard deviations sitting on the floor: `[σ_u, σ_η]`.
    pub at_floor: [bool; 2],
    /// Constant series or both standard deviations on the floor.
    pub degenerate: bool,
}

impl StableFit {
    /// Evaluates the model at fixed parameters (default prior).
    pub fn evaluate(series: &TimeSeries, params: StableParams) -> Result<Self> {
        let prior = StatePrior::default_for(&params, &series.values);
        let filter = kalman_filter(&series.values, &params, prior)?;
        let n = series.len();
        let (aic, bic) = information_criteria(filter.loglik, STABLE_PARAM_COUNT, n);
        let at_floor = [params.sigma_u < FLOOR_BAND, params.sigma_eta < FLOOR_BAND];
        Ok(Self {
            dates: series.dates.clone(),
            params,
            prior,
            loglik: filter.loglik,
            filter,
            n_obs: n,
            aic,
            bic,
            at_floor,
            degenerate: at_floor[0] && at_floor[1],
        })
    }

    pub fn log_densities(&self) -> Vec<f64> {
        self.filter.steps.iter().map(|s| s.log_density).collect()
    }
}

fn stable_objective(series: &[f64], theta: &[f64]) -> f64 {
    let p = StableParams::from_unconstrained(theta);
    let prior = StatePrior::default_for(&p, series);
    -kalman_loglik(series, &p, prior)
}

/// Multi-start values: ρ ∈ {0, 0.3, 0.6, -0.3} crossed with three splits of
/// the sample variance between observation and state noise.
pub fn stable_starts(series: &[f64]) -> Vec<[f64; 3]> {
    let v = sample_variance(series).max(SD_FLOOR * SD_FLOOR);
    let mut starts = Vec::new();
    for rho in [0.0, 0.3, 0.6, -0.3] {
        for share_u in [0.5, 0.9, 0.1] {
            let p = StableParams {
                rho,
                sigma_u: (share_u * v).sqrt(),
                sigma_eta: ((1.0 - share_u) * v).sqrt(),
            };
            starts.push(p.to_unconstrained());
        }
    }
    starts
}

/// Estimates `(ρ, σ_u, σ_η)` by maximizing the filter likelihood on the
/// transformed coordinates. Constant series short-circuit to a degenerate
/// fit with both standard deviations on the floor.
pub fn fit_stable_mle(series: &TimeSeries) -> Result<StableFit> {
    let y = &series.values;
    if y.len() < STABLE_MIN_OBS {
        return Err(Error::InsufficientData {
            needed: STABLE_MIN_OBS,
            got: y.len(),
        });
    }
    check_finite(y)?;
    if y.iter().all(|v| *v == y[0]) {
        let mut fit = StableFit::evaluate(series, StableParams::new(0.0, SD_FLOOR, SD_FLOOR)?)?;
        fit.degenerate = true;
        return Ok(fit);
    }
    let starts: Vec<Vec<f64>> = stable_starts(y).iter().map(|s| s.to_vec()).collect();
    let opts = NelderMeadOptions {
        ftol_rel: 1e-8,
        ftol_abs: 1e-10,
        xtol: 1e-6,
        ..NelderMeadOptions::default()
    };
    let best = minimize_multistart(|th| stable_objective(y, th), &starts, &opts)?;
    let (theta, _) = newton_polish(|th| stable_objective(y, th), &best.x, 8);
    StableFit::evaluate(series, StableParams::from_unconstrained(&theta))
}

/// Negative log-likelihood on unconstrained coordinates; exposed for
/// gradient diagnostics.
pub fn stable_negloglik(series: &[f64], theta: &[f64]) -> f64 {
    stable_objective(series, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn static_model_is_iid_gaussian() {
        let y = [0.01, -0.02, 0.005, 0.03];
        let p = StableParams::new(0.0, 0.02, 0.0).unwrap();
        let out = kalman_filter(&y, &p, StatePrior { mean: 0.0, variance: 0.0 }).unwrap();
        let expect: f64 = y.iter().map(|v| normal_logpdf(*v, 0.0, 0.0004)).sum();
        assert!((out.loglik - expect).abs() < 1e-12);
        assert!(out.steps.iter().all(|s| s.pred_mean == 0.0 && s.gain == 0.0));
    }

    #[test]
    fn loglik_is_sum_of_log_densities_and_fast_path_agrees() {
        let y = [0.3, -0.1, 0.4, 0.2, -0.5, 0.05];
        let p = StableParams::new(0.6, 0.3, 0.2).unwrap();
        let prior = StatePrior::default_for(&p, &y);
        let out = kalman_filter(&y, &p, prior).unwrap();
        let sum: f64 = out.steps.iter().map(|s| s.log_density).sum();
        assert_eq!(out.loglik, sum);
        assert!((kalman_loglik(&y, &p, prior) - out.loglik).abs() < 1e-12);
        assert!(out.steps.iter().all(|s| s.pred_obs_var > 0.0));
    }

    #[test]
    fn rejects_non_finite_input_with_position() {
        let p = StableParams::new(0.5, 0.1, 0.1).unwrap();
        let err = kalman_filter(&[0.1, f64::NAN, 0.2], &p, StatePrior { mean: 0.0, variance: 1.0 });
        assert_eq!(err.unwrap_err(), Error::NonFinite { index: 1 });
    }

    #[test]
    fn steady_gain_is_one_half_for_unit_noises() {
        let ss = steady_state_gain(0.0, 1.0, 1.0).unwrap();
        assert!((ss.gain - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_state_noise_gives_zero_gain_and_noiseless_obs_gives_unit_gain() {
        assert_eq!(steady_state_gain(0.5, 0.0, 1.0).unwrap().gain, 0.0);
        let k = steady_state_gain(0.5, 0.3, 1e-9).unwrap().gain;
        assert!((k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn steady_state_solves_riccati_quadratic() {
        // Closed form: P² + P(r(1-a²) - q) - q r = 0.
        for &(a, se, su) in &[(0.9, 0.3, 1.0), (0.5, 0.01, 1.0), (-0.7, 0.2, 0.05), (0.0587, 0.0449, 0.0013)] {
            let (q, r) = (se * se, su * su);
            let b = r * (1.0 - a * a) - q;
            let p_closed = (-b + (b * b + 4.0 * q * r).sqrt()) / 2.0;
            let ss = steady_state_gain(a, se, su).unwrap();
            assert!((ss.pred_var - p_closed).abs() <= 1e-12 * p_closed.max(1e-300), "{a} {se} {su}");
            let k = ss.pred_var / (ss.pred_var + r);
            let resid = a * a * (1.0 - k) * ss.pred_var + q - ss.pred_var;
            assert!(resid.abs() < 1e-12);
        }
    }

    #[test]
    fn information_criteria_match_reported_rows() {
        let (aic, bic) = information_criteria(1255.79, 3, 751);
        assert!((aic + 2505.58).abs() < 5e-3);
        assert!((bic + 2491.72).abs() < 5e-3);
        let (aic, bic) = information_criteria(1314.32, 6, 751);
        assert!((aic + 2616.64).abs() < 5e-3);
        assert!((bic + 2588.91).abs() < 5e-3);
        assert_eq!(information_criteria(0.0, 0, 1), (0.0, 0.0));
    }

    #[test]
    fn constant_series_is_flagged_degenerate() {
        let s = TimeSeries::monthly(MonthIndex::new(2000, 1).unwrap(), vec![0.01; 40]);
        let fit = fit_stable_mle(&s).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.at_floor, [true, true]);
    }

    #[test]
    fn short_series_is_rejected() {
        let s = TimeSeries::monthly(MonthIndex::new(2000, 1).unwrap(), vec![0.01; 10]);
        assert!(matches!(fit_stable_mle(&s), Err(Error::InsufficientData { needed: 24, got: 10 })));
    }
}
