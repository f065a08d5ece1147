//! Per-sample estimation of the stable and break models and the resulting
//! mislearning series.

use rayon::prelude::*;

use mislearn_core::mislearning::{
    expanding_delta, mislearning_series, model_comparison_table, pooled_threshold, rolling_delta, ExpandingOptions,
    MislearningRow, MislearningSeries,
};
use mislearn_core::regime::{fit_break_mle, BreakFit, BREAK_MIN_OBS};
use mislearn_core::stable::{fit_stable_mle, StableFit};
use mislearn_core::{Error, TimeSeries};

use crate::config::FitConfig;
use crate::error::Result;
use crate::io::{flag, num, opt, text, Table};
use crate::pipeline::{Sample, Warnings};

#[derive(Debug, Clone)]
pub struct SeriesFit {
    pub id: String,
    pub stable: StableFit,
    pub brk: BreakFit,
}

#[derive(Debug, Clone)]
pub struct FittedSample {
    pub name: String,
    pub fits: Vec<SeriesFit>,
    /// Aligned with `fits`.
    pub mislearning: Vec<MislearningSeries>,
    /// Pooled spike threshold; NaN when no Δ is available.
    pub threshold: f64,
}

fn fit_one(id: &str, series: &TimeSeries) -> std::result::Result<SeriesFit, Error> {
    Ok(SeriesFit {
        id: id.into(),
        stable: fit_stable_mle(series)?,
        brk: fit_break_mle(series)?,
    })
}

/// Δ from expanding-window estimates. Break probabilities still come from
/// the full-sample filter, which is causal at fixed parameters.
fn expanding_series(
    fit: &SeriesFit,
    series: &TimeSeries,
    cfg: &FitConfig,
) -> std::result::Result<MislearningSeries, Error> {
    let opts = ExpandingOptions {
        min_obs: cfg.expanding_min_obs,
        refit_every: cfg.refit_every,
    };
    let delta = expanding_delta(series, opts)?;
    let values: Vec<f64> = delta.iter().map(|d| d.1).collect();
    let rolling = rolling_delta(&values, cfg.rolling_window)?;
    let offset = series.len() - delta.len();
    let rows = delta
        .iter()
        .zip(rolling)
        .enumerate()
        .map(|(i, ((date, d), rolling))| MislearningRow {
            date: *date,
            delta: *d,
            rolling,
            break_prob: fit.brk.filter.steps[offset + i].filtered[1],
            spike: false,
        })
        .collect();
    Ok(MislearningSeries {
        series_id: fit.id.clone(),
        threshold: f64::INFINITY,
        window: cfg.rolling_window,
        degenerate: fit.stable.degenerate || fit.brk.degenerate,
        rows,
    })
}

pub fn fit_sample(sample: &Sample, cfg: &FitConfig, warnings: &mut Warnings) -> Result<FittedSample> {
    let ids: Vec<&str> = sample.panel.series_ids().collect();
    let mut inputs = Vec::with_capacity(ids.len());
    for id in ids {
        let s = sample.panel.series(id).expect("listed series exists");
        if s.len() < BREAK_MIN_OBS {
            warnings.push(
                "fit",
                &format!("{}/{id}", sample.name),
                format!("skipped: {} observations, at least {BREAK_MIN_OBS} required", s.len()),
            );
            continue;
        }
        inputs.push((id, s));
    }
    let results: Vec<_> = inputs
        .par_iter()
        .map(|(id, s)| {
            let fit = fit_one(id, s)?;
            let ml = if cfg.expanding {
                expanding_series(&fit, s, cfg)?
            } else {
                mislearning_series(id, &fit.stable, &fit.brk, cfg.rolling_window, f64::INFINITY)?
            };
            Ok::<_, Error>((fit, ml))
        })
        .collect();
    let mut fits = Vec::with_capacity(results.len());
    let mut mislearning = Vec::with_capacity(results.len());
    for ((id, _), r) in inputs.iter().zip(results) {
        match r {
            Ok((f, m)) => {
                if f.stable.degenerate || f.brk.degenerate {
                    warnings.push(
                        "fit",
                        &format!("{}/{id}", sample.name),
                        "degenerate fit: excluded from pooled thresholds and cross-sectional aggregates",
                    );
                }
                fits.push(f);
                mislearning.push(m);
            }
            Err(e) => warnings.push("fit", &format!("{}/{id}", sample.name), format!("skipped: {e}")),
        }
    }
    let threshold = match pooled_threshold(&mislearning, cfg.spike_quantile, true) {
        Ok(t) => t,
        Err(Error::EmptySample) if !mislearning.is_empty() => {
            warnings.push(
                "fit",
                &sample.name,
                "every fit is degenerate; spike threshold pools all series",
            );
            pooled_threshold(&mislearning, cfg.spike_quantile, false).unwrap_or(f64::NAN)
        }
        Err(e) => {
            warnings.push("fit", &sample.name, format!("no spike threshold: {e}"));
            f64::NAN
        }
    };
    let mislearning = mislearning.into_iter().map(|m| m.with_threshold(threshold)).collect();
    Ok(FittedSample {
        name: sample.name.clone(),
        fits,
        mislearning,
        threshold,
    })
}

impl FittedSample {
    pub fn stable_table(&self) -> Table {
        let mut t = Table::new(&[
            "series", "start", "end", "obs", "loglik", "aic", "bic", "rho", "sigma_u", "sigma_eta", "degenerate",
        ]);
        for f in &self.fits {
            let s = &f.stable;
            let p = s.params;
            t.push(vec![
                f.id.clone(),
                text(s.dates[0]),
                text(s.dates[s.dates.len() - 1]),
                text(s.n_obs),
                num(s.loglik),
                num(s.aic),
                num(s.bic),
                num(p.rho),
                num(p.sigma_u),
                num(p.sigma_eta),
                flag(s.degenerate),
            ]);
        }
        t
    }

    pub fn break_table(&self) -> Table {
        let mut t = Table::new(&[
            "series", "start", "end", "obs", "loglik", "aic", "bic", "mu0", "mu1", "sd0", "sd1", "p00", "p11",
            "degenerate",
        ]);
        for f in &self.fits {
            let b = &f.brk;
            let p = b.params;
            t.push(vec![
                f.id.clone(),
                text(b.dates[0]),
                text(b.dates[b.dates.len() - 1]),
                text(b.n_obs),
                num(b.loglik),
                num(b.aic),
                num(b.bic),
                num(p.mu0),
                num(p.mu1),
                num(p.sd0),
                num(p.sd1),
                num(p.p00),
                num(p.p11),
                flag(b.degenerate),
            ]);
        }
        t
    }

    pub fn comparison_table(&self, warnings: &mut Warnings) -> Table {
        let mut t = Table::new(&[
            "series",
            "obs",
            "stable_loglik",
            "stable_aic",
            "stable_bic",
            "break_loglik",
            "break_aic",
            "break_bic",
            "d_ll",
            "d_aic",
            "d_bic",
            "params",
        ]);
        let stable: Vec<(String, StableFit)> = self.fits.iter().map(|f| (f.id.clone(), f.stable.clone())).collect();
        let brk: Vec<(String, BreakFit)> = self.fits.iter().map(|f| (f.id.clone(), f.brk.clone())).collect();
        match model_comparison_table(&stable, &brk) {
            Ok(rows) => {
                for r in rows {
                    t.push(vec![
                        r.series,
                        text(r.n_obs),
                        num(r.stable_loglik),
                        num(r.stable_aic),
                        num(r.stable_bic),
                        num(r.break_loglik),
                        num(r.break_aic),
                        num(r.break_bic),
                        num(r.d_ll),
                        num(r.d_aic),
                        num(r.d_bic),
                        format!("{} / {}", r.k_stable, r.k_break),
                    ]);
                }
            }
            Err(e) => warnings.push("fit", &self.name, format!("comparison table: {e}")),
        }
        t
    }

    pub fn delta_table(&self) -> Table {
        let mut t = Table::new(&["series", "date", "delta", "rolling_delta", "break_prob", "spike"]);
        for m in &self.mislearning {
            for r in &m.rows {
                t.push(vec![
                    m.series_id.clone(),
                    text(r.date),
                    num(r.delta),
                    opt(r.rolling),
                    num(r.break_prob),
                    flag(r.spike),
                ]);
            }
        }
        t
    }

    /// Filtered states with ±2√P bands, break probabilities and both
    /// predictive log densities, one row per series and month.
    pub fn filter_state_table(&self) -> Table {
        let mut t = Table::new(&[
            "series",
            "date",
            "pred_mean",
            "pred_var",
            "filt_mean",
            "filt_var",
            "band_lower",
            "band_upper",
            "gain",
            "break_prob",
            "next_break_prob",
            "log_p_stable",
            "log_p_break",
        ]);
        for f in &self.fits {
            let steps = f.stable.filter.steps.iter().zip(&f.brk.filter.steps);
            for (i, (s, b)) in steps.enumerate() {
                let band = 2.0 * s.filt_var.sqrt();
                t.push(vec![
                    f.id.clone(),
                    text(f.stable.dates[i]),
                    num(s.pred_mean),
                    num(s.pred_obs_var),
                    num(s.filt_mean),
                    num(s.filt_var),
                    num(s.filt_mean - band),
                    num(s.filt_mean + band),
                    num(s.gain),
                    num(b.filtered[1]),
                    num(b.next_break),
                    num(s.log_density),
                    num(b.log_density),
                ]);
            }
        }
        t
    }
}
