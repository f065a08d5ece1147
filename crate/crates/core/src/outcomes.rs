//! Forward performance outcomes built strictly from returns after the
//! forecast origin, plus lagged volatility controls.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

// Shadowed by inherent methods whenever std is in the crate graph.
#[allow(unused_imports)]
use num_traits::Float;

use crate::calendar::MonthIndex;
use crate::error::{invalid, Result};
use crate::math::{quantile_type7, sample_sd};
use crate::panel::ReturnPanel;

pub const DEFAULT_HORIZONS: [usize; 3] = [3, 6, 12];
pub const DEFAULT_FAILURE_QUANTILE: f64 = 0.05;
pub const CONTROL_WINDOW: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Sharpe,
    CumRet,
    Vol,
    DownsideVol,
    MaxDd,
    Failure,
}

impl Outcome {
    pub const ALL: [Outcome; 6] = [
        Outcome::Sharpe,
        Outcome::CumRet,
        Outcome::Vol,
        Outcome::DownsideVol,
        Outcome::MaxDd,
        Outcome::Failure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::Sharpe => "sharpe",
            Outcome::CumRet => "cumret",
            Outcome::Vol => "vol",
            Outcome::DownsideVol => "downside_vol",
            Outcome::MaxDd => "max_dd",
            Outcome::Failure => "failure",
        }
    }

    pub fn parse(s: &str) -> Option<Outcome> {
        Outcome::ALL.into_iter().find(|o| o.name() == s)
    }
}

/// Window statistics for one horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowStats {
    pub cumret: f64,
    pub vol: f64,
    /// `None` when the window has zero volatility.
    pub sharpe: Option<f64>,
    pub downside_vol: f64,
    pub max_dd: f64,
    pub min: f64,
}

/// Statistics of a return window (`r.len() >= 1`).
pub fn window_stats(r: &[f64]) -> WindowStats {
    let h = r.len();
    let cumret: f64 = r.iter().sum();
    let vol = if h >= 2 { sample_sd(r) } else { 0.0 };
    let sharpe = if vol > 0.0 { Some(cumret / h as f64 / vol) } else { None };
    let neg: Vec<f64> = r.iter().copied().filter(|v| *v < 0.0).collect();
    let downside_vol = if neg.is_empty() {
        0.0
    } else {
        (neg.iter().map(|v| v * v).sum::<f64>() / neg.len() as f64).sqrt()
    };
    let mut path = 0.0;
    let mut peak = 0.0f64;
    let mut max_dd = 0.0f64;
    for v in r {
        path += v;
        peak = peak.max(path);
        max_dd = max_dd.max(peak - path);
    }
    WindowStats {
        cumret,
        vol,
        sharpe,
        downside_vol,
        max_dd,
        min: r.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutcomeRow {
    pub series: String,
    pub t: MonthIndex,
    pub h: usize,
    pub sharpe: Option<f64>,
    pub cumret: f64,
    pub vol: f64,
    pub downside_vol: f64,
    pub max_dd: f64,
    pub failure: bool,
}

impl ForwardOutcomeRow {
    pub fn value(&self, o: Outcome) -> Option<f64> {
        match o {
            Outcome::Sharpe => self.sharpe,
            Outcome::CumRet => Some(self.cumret),
            Outcome::Vol => Some(self.vol),
            Outcome::DownsideVol => Some(self.downside_vol),
            Outcome::MaxDd => Some(self.max_dd),
            Outcome::Failure => Some(if self.failure { 1.0 } else { 0.0 }),
        }
    }
}

/// Rows keyed by `(series, t, h)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForwardOutcomeTable {
    pub rows: BTreeMap<(String, MonthIndex, usize), ForwardOutcomeRow>,
    /// Per-series failure thresholds (full-sample return quantile).
    pub failure_thresholds: BTreeMap<String, f64>,
}

impl ForwardOutcomeTable {
    pub fn get(&self, series: &str, t: MonthIndex, h: usize) -> Option<&ForwardOutcomeRow> {
        self.rows.get(&(String::from(series), t, h))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// For every observation month `t` of every series and every horizon `h`,
/// statistics over the next `h` available returns strictly after `t`.
/// `failure` compares the window minimum with the series' full-sample
/// `failure_quantile` quantile, the one quantity that uses the whole sample.
pub fn forward_outcomes(panel: &ReturnPanel, horizons: &[usize], failure_quantile: f64) -> Result<ForwardOutcomeTable> {
    if horizons.iter().any(|h| !(1..=60).contains(h)) {
        return Err(invalid("horizons", "each horizon must lie in 1..=60"));
    }
    if !(failure_quantile > 0.0 && failure_quantile < 1.0) {
        return Err(invalid("failure_quantile", "must lie in (0, 1)"));
    }
    let mut table = ForwardOutcomeTable::default();
    for id in panel.series_ids() {
        let s = panel.series(id).expect("listed series exists");
        let threshold = quantile_type7(&s.values, failure_quantile);
        table.failure_thresholds.insert(id.into(), threshold);
        for i in 0..s.len() {
            for &h in horizons {
                if i + h >= s.len() {
                    continue;
                }
                let w = window_stats(&s.values[i + 1..=i + h]);
                table.rows.insert(
                    (id.into(), s.dates[i], h),
                    ForwardOutcomeRow {
                        series: id.into(),
                        t: s.dates[i],
                        h,
                        sharpe: w.sharpe,
                        cumret: w.cumret,
                        vol: w.vol,
                        downside_vol: w.downside_vol,
                        max_dd: w.max_dd,
                        failure: w.min < threshold,
                    },
                );
            }
        }
    }
    Ok(table)
}

/// Sample s.d. of the returns in calendar months `t-12..t-1`; `None` unless
/// all twelve are observed.
pub fn lagged_rolling_vol(panel: &ReturnPanel, series: &str, t: MonthIndex) -> Option<f64> {
    let mut window = Vec::with_capacity(CONTROL_WINDOW);
    for l in (1..=CONTROL_WINDOW as i64).rev() {
        window.push(panel.get(series, t.add_months(-l))?);
    }
    Some(sample_sd(&window))
}
