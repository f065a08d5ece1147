//! Panel predictive regressions of forward outcomes on mislearning, the
//! passive-ownership interaction designs and leave-one-year-out refits.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::calendar::MonthIndex;
use crate::error::{Error, Result};
use crate::mislearning::MislearningSeries;
use crate::outcomes::{lagged_rolling_vol, ForwardOutcomeTable, Outcome};
use crate::panel::{ExogenousSeries, ReturnPanel};
use crate::regime::BREAK_STATE_THRESHOLD;
use crate::regression::{
    run_regression, ClusterDim, Covariance, FixedEffects, RegressionData, RegressionResult, RegressionSpec, Regressor,
};

/// Everything the regression designs draw on.
#[derive(Debug, Clone, Copy)]
pub struct PredictiveInputs<'a> {
    pub panel: &'a ReturnPanel,
    pub mislearning: &'a [MislearningSeries],
    pub outcomes: &'a ForwardOutcomeTable,
    /// Series whose lagged volatility proxies market uncertainty.
    pub market: &'a str,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveSpec {
    pub outcome: Outcome,
    pub horizon: usize,
    pub controls: bool,
    pub fixed_effects: FixedEffects,
    pub covariance: Covariance,
}

impl PredictiveSpec {
    pub fn regression(&self) -> RegressionSpec {
        RegressionSpec {
            intercept: true,
            fixed_effects: self.fixed_effects,
            covariance: self.covariance,
            normal_reference: false,
        }
    }
}

struct Row {
    unit: u32,
    t: MonthIndex,
    y: f64,
    delta: f64,
    break_state: f64,
    own_vol: f64,
    mkt_vol: f64,
}

fn collect_rows(
    inputs: &PredictiveInputs<'_>,
    y_of: &dyn Fn(&str, MonthIndex, f64) -> Option<f64>,
    controls: bool,
    only: Option<&str>,
) -> Vec<Row> {
    let mut rows = Vec::new();
    for (unit, s) in inputs.mislearning.iter().enumerate() {
        if s.degenerate || only.is_some_and(|id| id != s.series_id) {
            continue;
        }
        for r in &s.rows {
            let Some(y) = y_of(&s.series_id, r.date, r.delta) else {
                continue;
            };
            let (own_vol, mkt_vol) = if controls {
                match (
                    lagged_rolling_vol(inputs.panel, &s.series_id, r.date),
                    lagged_rolling_vol(inputs.panel, inputs.market, r.date),
                ) {
                    (Some(a), Some(b)) => (a, b),
                    _ => continue,
                }
            } else {
                (0.0, 0.0)
            };
            rows.push(Row {
                unit: unit as u32,
                t: r.date,
                y,
                delta: r.delta,
                break_state: if r.break_prob > BREAK_STATE_THRESHOLD { 1.0 } else { 0.0 },
                own_vol,
                mkt_vol,
            });
        }
    }
    rows
}

fn frame(rows: &[Row], regressors: Vec<Regressor>) -> RegressionData {
    RegressionData {
        y: rows.iter().map(|r| r.y).collect(),
        regressors,
        units: Some(rows.iter().map(|r| r.unit).collect()),
        times: Some(rows.iter().map(|r| r.t.ordinal()).collect()),
    }
}

fn column(rows: &[Row], name: &str, f: impl Fn(&Row) -> f64) -> Regressor {
    Regressor::new(name, rows.iter().map(f).collect())
}

fn control_columns(rows: &[Row], time_fe: bool) -> Vec<Regressor> {
    let mut cols = alloc::vec![column(rows, "own_vol", |r| r.own_vol)];
    if !time_fe {
        cols.push(column(rows, "mkt_vol", |r| r.mkt_vol));
    }
    cols
}

/// `Perf_{t→t+h} = a + bΔ_t (+ controls) + e`, pooled or for one series.
pub fn predictive_data(inputs: &PredictiveInputs<'_>, spec: &PredictiveSpec, only: Option<&str>) -> RegressionData {
    let out = inputs.outcomes;
    let y_of = |id: &str, t: MonthIndex, _d: f64| out.get(id, t, spec.horizon).and_then(|r| r.value(spec.outcome));
    let rows = collect_rows(inputs, &y_of, spec.controls, only);
    let mut regs = alloc::vec![column(&rows, "delta", |r| r.delta)];
    if spec.controls {
        let time_fe = matches!(spec.fixed_effects, FixedEffects::Time | FixedEffects::UnitAndTime);
        regs.extend(control_columns(&rows, time_fe));
    }
    frame(&rows, regs)
}

pub fn predictive_regression(
    inputs: &PredictiveInputs<'_>,
    spec: &PredictiveSpec,
    only: Option<&str>,
) -> Result<RegressionResult> {
    let data = predictive_data(inputs, spec, only);
    if data.is_empty() {
        return Err(Error::EmptySample);
    }
    run_regression(&data, &spec.regression())
}

/// HC3, Newey–West with lag `h`, clustering by month, by series, and both.
pub fn inference_sweep_estimators(horizon: usize) -> [Covariance; 5] {
    [
        Covariance::Hc3,
        Covariance::NeweyWest { lag: horizon },
        Covariance::Cluster {
            dim: ClusterDim::Time,
            small_sample: true,
        },
        Covariance::Cluster {
            dim: ClusterDim::Unit,
            small_sample: true,
        },
        Covariance::TwoWay { small_sample: true },
    ]
}

/// Fits one design under every sweep estimator.
pub fn inference_sweep(data: &RegressionData, base: &RegressionSpec, horizon: usize) -> Vec<(Covariance, Result<RegressionResult>)> {
    inference_sweep_estimators(horizon)
        .into_iter()
        .map(|c| {
            let spec = RegressionSpec { covariance: c, ..*base };
            (c, run_regression(data, &spec))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassiveVariant {
    /// `Δ_{k,t}` on the break state, lagged passive intensity and their
    /// interaction.
    Onset,
    /// `Perf_{k,t→t+h}` on `Δ_{k,t}`, lagged passive intensity, their
    /// interaction and controls.
    Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassiveSpec {
    pub variant: PassiveVariant,
    pub outcome: Outcome,
    pub horizon: usize,
    pub controls: bool,
    /// Adds month effects; time-only columns are then dropped and the
    /// interaction is identified from cross-sectional variation alone.
    pub month_fe: bool,
    pub covariance: Covariance,
}

impl PassiveSpec {
    pub fn interaction_name(&self) -> &'static str {
        match self.variant {
            PassiveVariant::Onset => "break_x_passive",
            PassiveVariant::Outcome => "delta_x_passive",
        }
    }

    pub fn regression(&self) -> RegressionSpec {
        RegressionSpec {
            intercept: false,
            fixed_effects: if self.month_fe {
                FixedEffects::UnitAndTime
            } else {
                FixedEffects::Unit
            },
            covariance: self.covariance,
            normal_reference: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassiveData {
    pub data: RegressionData,
    /// Origin months dropped because the passive value for `t-1` is missing.
    pub dropped_months: Vec<MonthIndex>,
    pub dropped_rows: usize,
}

/// Builds the interaction design with passive intensity measured at `t-1`.
pub fn passive_data(inputs: &PredictiveInputs<'_>, passive: &ExogenousSeries, spec: &PassiveSpec) -> PassiveData {
    let out = inputs.outcomes;
    let rows = match spec.variant {
        PassiveVariant::Onset => collect_rows(inputs, &|_, _, d| Some(d), spec.controls, None),
        PassiveVariant::Outcome => collect_rows(
            inputs,
            &|id, t, _| out.get(id, t, spec.horizon).and_then(|r| r.value(spec.outcome)),
            spec.controls,
            None,
        ),
    };
    let mut dropped = BTreeSet::new();
    let mut dropped_rows = 0;
    let mut kept = Vec::with_capacity(rows.len());
    let mut lagged = Vec::with_capacity(rows.len());
    for r in rows {
        match passive.get(r.t.pred()) {
            Some(v) => {
                lagged.push(v);
                kept.push(r);
            }
            None => {
                dropped.insert(r.t);
                dropped_rows += 1;
            }
        }
    }
    let main = match spec.variant {
        PassiveVariant::Onset => ("break", kept.iter().map(|r| r.break_state).collect::<Vec<f64>>()),
        PassiveVariant::Outcome => ("delta", kept.iter().map(|r| r.delta).collect()),
    };
    let inter: Vec<f64> = main.1.iter().zip(&lagged).map(|(a, b)| a * b).collect();
    let mut regs = alloc::vec![Regressor::new(main.0, main.1)];
    if !spec.month_fe {
        regs.push(Regressor::new("passive_lag", lagged));
    }
    regs.push(Regressor::new(spec.interaction_name(), inter));
    if spec.controls {
        regs.extend(control_columns(&kept, spec.month_fe));
    }
    PassiveData {
        data: frame(&kept, regs),
        dropped_months: dropped.into_iter().collect(),
        dropped_rows,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassiveResult {
    pub result: RegressionResult,
    pub dropped_months: Vec<MonthIndex>,
    pub dropped_rows: usize,
}

pub fn passive_interaction(
    inputs: &PredictiveInputs<'_>,
    passive: &ExogenousSeries,
    spec: &PassiveSpec,
) -> Result<PassiveResult> {
    let d = passive_data(inputs, passive, spec);
    if d.data.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(PassiveResult {
        result: run_regression(&d.data, &spec.regression())?,
        dropped_months: d.dropped_months,
        dropped_rows: d.dropped_rows,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LeaveOneYearOut {
    pub coefficients: BTreeMap<i32, f64>,
    pub warnings: Vec<String>,
}

/// Refits `spec` without the forecast-origin months of each held-out year
/// and reports the coefficient on `term`.
pub fn leave_one_year_out(
    data: &RegressionData,
    spec: &RegressionSpec,
    term: &str,
    years: &BTreeSet<i32>,
) -> Result<LeaveOneYearOut> {
    let times = data
        .times
        .as_ref()
        .ok_or_else(|| Error::Precondition("time identifiers are required".into()))?;
    let year_of = |t: i64| MonthIndex::from_ordinal(t).year();
    let present: BTreeSet<i32> = times.iter().map(|t| year_of(*t)).collect();
    if present.len() < 2 {
        return Err(Error::Precondition(alloc::format!(
            "need at least two calendar years, found {}",
            present.len()
        )));
    }
    let mut out = LeaveOneYearOut::default();
    for &y in years {
        let sub = data.filter_rows(|i| year_of(times[i]) != y);
        if sub.is_empty() {
            out.warnings.push(alloc::format!("{y}: exclusion empties the sample"));
            continue;
        }
        match run_regression(&sub, spec) {
            Ok(r) => match r.coefficient(term) {
                Some(c) => {
                    out.coefficients.insert(y, c.estimate);
                }
                None => out.warnings.push(alloc::format!("{y}: term `{term}` not in the design")),
            },
            Err(e) => out.warnings.push(alloc::format!("{y}: {e}")),
        }
    }
    Ok(out)
}
