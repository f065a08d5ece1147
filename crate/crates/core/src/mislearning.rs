//! Mislearning intensity: the log ratio of break-aware to stable one-step
//! predictive densities, its rolling mean, spikes and model comparison.

use alloc::string::String;
use alloc::vec::Vec;

// Shadowed by inherent methods whenever std is in the crate graph.
#[allow(unused_imports)]
use num_traits::Float;

use crate::calendar::MonthIndex;
use crate::error::{invalid, Error, Result};
use crate::math::quantile_type7;
use crate::panel::TimeSeries;
use crate::regime::{fit_break_mle, BreakFit, BreakParams, BREAK_PARAM_COUNT};
use crate::stable::{fit_stable_mle, StableFit, StableParams, STABLE_PARAM_COUNT};

/// Default rolling window (months).
pub const DEFAULT_ROLLING_WINDOW: usize = 6;
/// Default pooled spike quantile.
pub const DEFAULT_SPIKE_QUANTILE: f64 = 0.9;

/// `Δ_t = log p_B(f_t | F_{t-1}) - log p_S(f_t | F_{t-1})`.
pub fn compute_delta(stable: &StableFit, brk: &BreakFit) -> Result<Vec<(MonthIndex, f64)>> {
    if stable.dates != brk.dates {
        let a: alloc::collections::BTreeSet<_> = stable.dates.iter().copied().collect();
        let b: alloc::collections::BTreeSet<_> = brk.dates.iter().copied().collect();
        let mut months: Vec<MonthIndex> = a.symmetric_difference(&b).copied().collect();
        if months.is_empty() {
            // Same months, different order or multiplicity.
            months = stable
                .dates
                .iter()
                .zip(&brk.dates)
                .filter(|(x, y)| x != y)
                .map(|(x, _)| *x)
                .collect();
        }
        return Err(Error::TimelineMismatch { months });
    }
    Ok(stable
        .dates
        .iter()
        .zip(stable.filter.steps.iter().zip(&brk.filter.steps))
        .map(|(t, (s, b))| (*t, b.log_density - s.log_density))
        .collect())
}

/// Trailing mean of the `m` most recent values; `None` until `m` values exist.
pub fn rolling_delta(delta: &[f64], m: usize) -> Result<Vec<Option<f64>>> {
    if m == 0 {
        return Err(invalid("m", "rolling window must be >= 1"));
    }
    Ok((0..delta.len())
        .map(|t| (t + 1 >= m).then(|| delta[t + 1 - m..=t].iter().sum::<f64>() / m as f64))
        .collect())
}

/// Type-7 quantile `q` of the pooled deltas.
pub fn spike_threshold(pool: &[f64], q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(invalid("q", "quantile must lie in (0, 1)"));
    }
    if pool.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(index) = pool.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(quantile_type7(pool, q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MislearningRow {
    pub date: MonthIndex,
    pub delta: f64,
    pub rolling: Option<f64>,
    /// Filtered `Pr(S_t = 1 | F_t)`.
    pub break_prob: f64,
    pub spike: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MislearningSeries {
    pub series_id: String,
    pub threshold: f64,
    pub window: usize,
    pub degenerate: bool,
    pub rows: Vec<MislearningRow>,
}

impl MislearningSeries {
    pub fn deltas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.delta).collect()
    }

    pub fn break_probs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.break_prob).collect()
    }

    pub fn spikes(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.spike).collect()
    }

    pub fn get(&self, t: MonthIndex) -> Option<&MislearningRow> {
        self.rows
            .binary_search_by(|r| r.date.cmp(&t))
            .ok()
            .map(|i| &self.rows[i])
    }

    /// Re-applies a (pooled) spike threshold.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        for r in &mut self.rows {
            r.spike = r.delta > threshold;
        }
        self
    }
}

/// Assembles the per-month mislearning series from both fits.
pub fn mislearning_series(
    series_id: &str,
    stable: &StableFit,
    brk: &BreakFit,
    window: usize,
    threshold: f64,
) -> Result<MislearningSeries> {
    let delta = compute_delta(stable, brk)?;
    let values: Vec<f64> = delta.iter().map(|(_, d)| *d).collect();
    let rolling = rolling_delta(&values, window)?;
    let rows = delta
        .iter()
        .zip(rolling)
        .zip(&brk.filter.steps)
        .map(|(((date, d), rolling), step)| MislearningRow {
            date: *date,
            delta: *d,
            rolling,
            break_prob: step.filtered[1],
            spike: *d > threshold,
        })
        .collect();
    Ok(MislearningSeries {
        series_id: series_id.into(),
        threshold,
        window,
        degenerate: stable.degenerate || brk.degenerate,
        rows,
    })
}

/// Pools deltas across series, optionally skipping degenerate fits, and
/// returns the type-7 quantile `q`.
pub fn pooled_threshold(series: &[MislearningSeries], q: f64, skip_degenerate: bool) -> Result<f64> {
    let pool: Vec<f64> = series
        .iter()
        .filter(|s| !(skip_degenerate && s.degenerate))
        .flat_map(|s| s.rows.iter().map(|r| r.delta))
        .collect();
    spike_threshold(&pool, q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub series: String,
    pub n_obs: usize,
    pub stable_loglik: f64,
    pub stable_aic: f64,
    pub stable_bic: f64,
    pub break_loglik: f64,
    pub break_aic: f64,
    pub break_bic: f64,
    /// `LL_break - LL_stable`.
    pub d_ll: f64,
    /// `AIC_stable - AIC_break`; positive favours the break model.
    pub d_aic: f64,
    /// `BIC_stable - BIC_break`; positive favours the break model.
    pub d_bic: f64,
    pub k_stable: usize,
    pub k_break: usize,
}

/// One comparison row per series present in both fit lists.
pub fn model_comparison_table(stable: &[(String, StableFit)], brk: &[(String, BreakFit)]) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::with_capacity(stable.len());
    let mut unmatched: Vec<&str> = Vec::new();
    for (id, s) in stable {
        let Some((_, b)) = brk.iter().find(|(bid, _)| bid == id) else {
            unmatched.push(id);
            continue;
        };
        rows.push(ComparisonRow {
            series: id.clone(),
            n_obs: s.n_obs,
            stable_loglik: s.loglik,
            stable_aic: s.aic,
            stable_bic: s.bic,
            break_loglik: b.loglik,
            break_aic: b.aic,
            break_bic: b.bic,
            d_ll: b.loglik - s.loglik,
            d_aic: s.aic - b.aic,
            d_bic: s.bic - b.bic,
            k_stable: STABLE_PARAM_COUNT,
            k_break: BREAK_PARAM_COUNT,
        });
    }
    unmatched.extend(
        brk.iter()
            .filter(|(id, _)| !stable.iter().any(|(sid, _)| sid == id))
            .map(|(id, _)| id.as_str()),
    );
    if !unmatched.is_empty() {
        return Err(Error::Precondition(alloc::format!(
            "series without a matching fit: {}",
            unmatched.join(", ")
        )));
    }
    Ok(rows)
}

/// Expanding-window re-estimation: Δ_t uses parameters estimated on data
/// strictly before `t`, refreshed every `refit_every` months.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpandingOptions {
    pub min_obs: usize,
    pub refit_every: usize,
}

impl Default for ExpandingOptions {
    fn default() -> Self {
        Self {
            min_obs: 120,
            refit_every: 12,
        }
    }
}

/// Out-of-sample Δ for every month after the first `min_obs`.
pub fn expanding_delta(series: &TimeSeries, opts: ExpandingOptions) -> Result<Vec<(MonthIndex, f64)>> {
    if opts.refit_every == 0 {
        return Err(invalid("refit_every", "must be >= 1"));
    }
    let min = opts.min_obs.max(crate::regime::BREAK_MIN_OBS);
    if series.len() <= min {
        return Err(Error::InsufficientData {
            needed: min + 1,
            got: series.len(),
        });
    }
    let prefix = |end: usize| TimeSeries {
        dates: series.dates[..end].to_vec(),
        values: series.values[..end].to_vec(),
    };
    let mut out = Vec::with_capacity(series.len() - min);
    let mut params: Option<(StableParams, BreakParams)> = None;
    for t in min..series.len() {
        if params.is_none() || (t - min) % opts.refit_every == 0 {
            let train = prefix(t);
            params = Some((fit_stable_mle(&train)?.params, fit_break_mle(&train)?.params));
        }
        let (sp, bp) = params.expect("fitted above");
        let through = prefix(t + 1);
        let s = StableFit::evaluate(&through, sp)?;
        let b = BreakFit::evaluate(&through, bp)?;
        let d = b.filter.steps[t].log_density - s.filter.steps[t].log_density;
        out.push((series.dates[t], d));
    }
    Ok(out)
}

/// Synthetic check that Δ reacts to a single large break: an AR(1)-plus-noise
/// path with one forced jump of `size_sd` unconditional standard deviations
/// of `f` at `t_star`, both models fitted on the full path.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeExperiment {
    pub a: f64,
    pub sigma_eta: f64,
    pub sigma_u: f64,
    pub t: usize,
    pub t_star: usize,
    pub size_sd: f64,
    /// Months from the break (inclusive) searched for the maximum.
    pub window: usize,
    /// Pre-break quantile the maximum must exceed.
    pub quantile: f64,
    pub paths: usize,
    pub seed: u64,
}

impl Default for SpikeExperiment {
    fn default() -> Self {
        Self {
            a: 0.9,
            sigma_eta: 0.01,
            sigma_u: 0.04,
            t: 260,
            t_star: 200,
            size_sd: 4.0,
            window: 3,
            quantile: 0.99,
            paths: 500,
            seed: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeOutcome {
    pub pre_quantile: f64,
    pub post_max: f64,
}

impl SpikeOutcome {
    pub fn passed(&self) -> bool {
        self.post_max > self.pre_quantile
    }
}

impl SpikeExperiment {
    pub fn validate(&self) -> Result<()> {
        if self.t_star < 2 || self.window == 0 || self.t_star + self.window > self.t {
            return Err(invalid("t_star", "break window must lie inside the path after two months"));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(invalid("quantile", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Jump size in return units.
    pub fn jump(&self) -> f64 {
        let var_f = self.sigma_eta * self.sigma_eta / (1.0 - self.a * self.a) + self.sigma_u * self.sigma_u;
        self.size_sd * var_f.sqrt()
    }

    /// Path `r` is seeded with `seed + r`.
    pub fn replicate(&self, r: u64) -> Result<SpikeOutcome> {
        self.validate()?;
        let mut forced = alloc::collections::BTreeMap::new();
        forced.insert(self.t_star, self.jump());
        let cfg = crate::simulate::TrueProcessConfig {
            a: self.a,
            sigma_eta: self.sigma_eta,
            sigma_u: self.sigma_u,
            p: 0.0,
            mu_j: 0.0,
            sigma_j: 0.0,
            t: self.t,
            seed: self.seed.wrapping_add(r),
            lambda0: 0.0,
            forced_jumps: forced,
        };
        let path = crate::simulate::simulate_true_process(&cfg)?;
        let series = TimeSeries::monthly(MonthIndex::new(2000, 1)?, path.f);
        let delta: Vec<f64> = compute_delta(&fit_stable_mle(&series)?, &fit_break_mle(&series)?)?
            .into_iter()
            .map(|d| d.1)
            .collect();
        Ok(SpikeOutcome {
            pre_quantile: quantile_type7(&delta[..self.t_star], self.quantile),
            post_max: delta[self.t_star..self.t_star + self.window]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Share of replications in which the post-break maximum clears the
/// pre-break quantile.
pub fn spike_pass_rate(outcomes: &[SpikeOutcome]) -> f64 {
    if outcomes.is_empty() {
        return f64::NAN;
    }
    outcomes.iter().filter(|o| o.passed()).count() as f64 / outcomes.len() as f64
}
