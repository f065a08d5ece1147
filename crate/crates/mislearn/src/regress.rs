//! Predictive regression suites: baseline and controlled fits per horizon,
//! the inference sweep and the passive-ownership interaction designs.

use std::collections::{BTreeMap, BTreeSet};

use mislearn_core::hp::one_sided_hp_detrend;
use mislearn_core::outcomes::{forward_outcomes, Outcome};
use mislearn_core::predictive::{
    inference_sweep, leave_one_year_out, passive_data, predictive_data, PassiveSpec, PassiveVariant, PredictiveInputs,
    PredictiveSpec,
};
use mislearn_core::regression::{
    run_regression, ClusterDim, Covariance, FixedEffects, RegressionResult, RegressionSpec,
};
use mislearn_core::{ExogenousSeries, MonthIndex};

use crate::config::{Estimator, FixedEffectsChoice, PassiveConfig, PipelineConfig, Suite};
use crate::error::{PipelineError, Result};
use crate::fit::FittedSample;
use crate::io::{flag, num, opt, text, Table};
use crate::pipeline::{Sample, Warnings};

pub const POOLED: &str = "pooled";

pub fn covariance(e: Estimator, lag: usize) -> Covariance {
    match e {
        Estimator::Classic => Covariance::Classic,
        Estimator::Hc0 => Covariance::Hc0,
        Estimator::Hc3 => Covariance::Hc3,
        Estimator::Nw => Covariance::NeweyWest { lag },
        Estimator::ClusterTime => Covariance::Cluster {
            dim: ClusterDim::Time,
            small_sample: true,
        },
        Estimator::ClusterSeries => Covariance::Cluster {
            dim: ClusterDim::Unit,
            small_sample: true,
        },
        Estimator::TwoWay => Covariance::TwoWay { small_sample: true },
    }
}

pub fn fixed_effects(c: FixedEffectsChoice) -> FixedEffects {
    match c {
        FixedEffectsChoice::None => FixedEffects::None,
        FixedEffectsChoice::Series => FixedEffects::Unit,
        FixedEffectsChoice::Month => FixedEffects::Time,
        FixedEffectsChoice::SeriesMonth => FixedEffects::UnitAndTime,
    }
}

/// Lagged passive share and, optionally, its one-sided HP cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct PassiveProxies {
    pub proxies: Vec<(&'static str, ExogenousSeries)>,
}

impl PassiveProxies {
    pub fn table(&self) -> Table {
        let mut header = vec!["date"];
        header.extend(self.proxies.iter().map(|(n, _)| *n));
        let mut t = Table::new(&header);
        let months: BTreeSet<MonthIndex> = self.proxies.iter().flat_map(|(_, s)| s.iter().map(|(m, _)| m)).collect();
        for m in months {
            let mut row = vec![text(m)];
            row.extend(self.proxies.iter().map(|(_, s)| opt(s.get(m))));
            t.push(row);
        }
        t
    }
}

pub fn passive_proxies(raw: &ExogenousSeries, cfg: &PassiveConfig) -> Result<PassiveProxies> {
    let mut proxies = vec![("total", raw.clone())];
    if cfg.detrend {
        let cycle = one_sided_hp_detrend(raw, cfg.hp_lambda).map_err(|e| PipelineError::numerical("passive HP filter", e))?;
        proxies.push(("detrended", cycle.into_iter().collect()));
    }
    Ok(PassiveProxies { proxies })
}

#[derive(Debug, Clone)]
pub struct RegressTables {
    pub results: BTreeMap<usize, Table>,
    pub sweep: Table,
    pub passive: Table,
    pub loyo: Table,
}

impl Default for RegressTables {
    fn default() -> Self {
        Self::new()
    }
}

impl RegressTables {
    pub fn results_table() -> Table {
        Table::new(&["sample", "factor", "outcome", "ctrl", "coef", "se", "t", "p", "obs", "r2"])
    }

    fn new() -> Self {
        Self {
            results: BTreeMap::new(),
            sweep: Table::new(&[
                "sample", "outcome", "h", "ctrl", "estimator", "coef", "se", "t", "p", "obs", "clusters",
            ]),
            passive: Table::new(&[
                "sample",
                "variant",
                "proxy",
                "month_fe",
                "term",
                "coef",
                "se",
                "t",
                "p",
                "obs",
                "r2",
                "dropped_rows",
                "dropped_months",
            ]),
            loyo: Table::new(&["sample", "proxy", "term", "year", "coef"]),
        }
    }

    pub fn merge(&mut self, other: RegressTables) {
        for (h, t) in other.results {
            self.results.entry(h).or_insert_with(Self::results_table).extend(t);
        }
        self.sweep.extend(other.sweep);
        self.passive.extend(other.passive);
        self.loyo.extend(other.loyo);
    }
}

fn coef_row(sample: &str, factor: &str, outcome: Outcome, ctrl: bool, r: &RegressionResult) -> Option<Vec<String>> {
    let c = r.coefficient("delta")?;
    Some(vec![
        sample.into(),
        factor.into(),
        outcome.name().into(),
        flag(ctrl),
        num(c.estimate),
        num(c.se),
        num(c.t),
        num(c.p),
        text(r.n_obs),
        num(r.r_squared),
    ])
}

pub fn regress_sample(
    sample: &Sample,
    fitted: &FittedSample,
    cfg: &PipelineConfig,
    passive: Option<(&PassiveProxies, &PassiveConfig)>,
    warnings: &mut Warnings,
) -> Result<RegressTables> {
    let rc = &cfg.regress;
    let mut horizons: BTreeSet<usize> = rc.horizons.iter().copied().collect();
    horizons.insert(rc.sweep_horizon);
    if let Some((_, p)) = passive {
        horizons.insert(p.horizon);
    }
    let horizons: Vec<usize> = horizons.into_iter().collect();
    let outcomes =
        forward_outcomes(&sample.panel, &horizons, rc.failure_quantile).map_err(|e| PipelineError::numerical("forward outcomes", e))?;
    let market = sample.market.as_deref();
    let inputs = PredictiveInputs {
        panel: &sample.panel,
        mislearning: &fitted.mislearning,
        outcomes: &outcomes,
        market: market.unwrap_or(""),
    };
    let mut out = RegressTables::new();
    let name = sample.name.as_str();
    let mut ctrl_choices = Vec::new();
    if rc.suites.contains(&Suite::Baseline) {
        ctrl_choices.push(false);
    }
    if rc.suites.contains(&Suite::Controlled) {
        if market.is_some() {
            ctrl_choices.push(true);
        } else {
            warnings.push("regress", name, "controlled suite skipped: no market series (set samples.market)");
        }
    }
    let lag = |h: usize| rc.nw_lag.unwrap_or(h);
    let series_ids: Vec<String> = fitted
        .mislearning
        .iter()
        .filter(|m| !m.degenerate)
        .map(|m| m.series_id.clone())
        .collect();
    if rc.per_series && ctrl_choices.contains(&true) {
        if let Some(m) = market.filter(|m| series_ids.iter().any(|id| id == m)) {
            warnings.push(
                "regress",
                &format!("{name}/{m}"),
                "controlled per-series regressions skipped: own volatility is the market volatility",
            );
        }
    }
    for &h in &rc.horizons {
        let mut table = RegressTables::results_table();
        for &ctrl in &ctrl_choices {
            for outcome in cfg.outcomes() {
                let pooled = PredictiveSpec {
                    outcome,
                    horizon: h,
                    controls: ctrl,
                    fixed_effects: fixed_effects(rc.pooled_fixed_effects),
                    covariance: covariance(rc.estimator, lag(h)),
                };
                let mut targets: Vec<(&str, Option<&str>, PredictiveSpec)> = vec![(POOLED, None, pooled)];
                if rc.per_series {
                    for id in series_ids.iter().filter(|id| !(ctrl && Some(id.as_str()) == market)) {
                        let spec = PredictiveSpec {
                            fixed_effects: FixedEffects::None,
                            ..pooled
                        };
                        targets.push((id.as_str(), Some(id.as_str()), spec));
                    }
                }
                for (factor, only, spec) in targets {
                    let data = predictive_data(&inputs, &spec, only);
                    let subject = format!("{name}/{factor}/{}/h{h}/ctrl{}", outcome.name(), u8::from(ctrl));
                    if data.is_empty() {
                        warnings.push("regress", &subject, "no usable observations");
                        continue;
                    }
                    match run_regression(&data, &spec.regression()) {
                        Ok(r) => {
                            if let Some(row) = coef_row(name, factor, outcome, ctrl, &r) {
                                table.push(row);
                            }
                        }
                        Err(e) => warnings.push("regress", &subject, e.to_string()),
                    }
                }
            }
        }
        out.results.insert(h, table);
    }

    if rc.suites.contains(&Suite::Sweep) {
        let outcome = Outcome::parse(&rc.sweep_outcome).expect("validated");
        let ctrl = rc.sweep_controls && market.is_some();
        let spec = PredictiveSpec {
            outcome,
            horizon: rc.sweep_horizon,
            controls: ctrl,
            fixed_effects: fixed_effects(rc.pooled_fixed_effects),
            covariance: Covariance::Hc3,
        };
        let data = predictive_data(&inputs, &spec, None);
        if data.is_empty() {
            warnings.push("regress", name, "inference sweep: no usable observations");
        }
        for (cov, r) in inference_sweep(&data, &spec.regression(), rc.sweep_horizon) {
            match r {
                Ok(r) => {
                    if let Some(c) = r.coefficient("delta") {
                        out.sweep.push(vec![
                            name.into(),
                            outcome.name().into(),
                            text(rc.sweep_horizon),
                            flag(ctrl),
                            cov.label(),
                            num(c.estimate),
                            num(c.se),
                            num(c.t),
                            num(c.p),
                            text(r.n_obs),
                            r.clusters.map(text).unwrap_or_default(),
                        ]);
                    }
                }
                Err(e) if !data.is_empty() => {
                    warnings.push("regress", &format!("{name}/sweep/{}", cov.label()), e.to_string())
                }
                Err(_) => {}
            }
        }
    }

    if let Some((proxies, pc)) = passive {
        passive_suite(name, &inputs, market.is_some(), proxies, pc, cfg, &mut out, warnings);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn passive_suite(
    name: &str,
    inputs: &PredictiveInputs<'_>,
    has_market: bool,
    proxies: &PassiveProxies,
    pc: &PassiveConfig,
    cfg: &PipelineConfig,
    out: &mut RegressTables,
    warnings: &mut Warnings,
) {
    let outcome = Outcome::parse(&pc.outcome).expect("validated");
    let cov = covariance(cfg.regress.estimator, cfg.regress.nw_lag.unwrap_or(pc.horizon));
    for (proxy, series) in &proxies.proxies {
        for variant in [PassiveVariant::Onset, PassiveVariant::Outcome] {
            for month_fe in [false, true] {
                let spec = PassiveSpec {
                    variant,
                    outcome,
                    horizon: pc.horizon,
                    controls: variant == PassiveVariant::Outcome && has_market,
                    month_fe,
                    covariance: cov,
                };
                let vname = match variant {
                    PassiveVariant::Onset => "onset",
                    PassiveVariant::Outcome => "outcome",
                };
                let subject = format!("{name}/{vname}/{proxy}/month_fe{}", u8::from(month_fe));
                let d = passive_data(inputs, series, &spec);
                if d.dropped_rows > 0 {
                    let first = d.dropped_months.first().map(text).unwrap_or_default();
                    let last = d.dropped_months.last().map(text).unwrap_or_default();
                    warnings.push(
                        "passive",
                        &subject,
                        format!(
                            "passive value for t-1 missing in {} month(s) ({first}..{last}); {} row(s) dropped",
                            d.dropped_months.len(),
                            d.dropped_rows
                        ),
                    );
                }
                if d.data.is_empty() {
                    warnings.push("passive", &subject, "no usable observations");
                    continue;
                }
                let rspec = spec.regression();
                match run_regression(&d.data, &rspec) {
                    Ok(r) => {
                        for c in &r.coefficients {
                            out.passive.push(vec![
                                name.into(),
                                vname.into(),
                                (*proxy).into(),
                                flag(month_fe),
                                c.name.clone(),
                                num(c.estimate),
                                num(c.se),
                                num(c.t),
                                num(c.p),
                                text(r.n_obs),
                                num(r.r_squared),
                                text(d.dropped_rows),
                                text(d.dropped_months.len()),
                            ]);
                        }
                    }
                    Err(e) => {
                        warnings.push("passive", &subject, e.to_string());
                        continue;
                    }
                }
                if variant == PassiveVariant::Outcome && !month_fe {
                    loyo(name, proxy, &d.data, &rspec, spec.interaction_name(), out, warnings);
                }
            }
        }
    }
}

fn loyo(
    name: &str,
    proxy: &str,
    data: &mislearn_core::regression::RegressionData,
    spec: &RegressionSpec,
    term: &str,
    out: &mut RegressTables,
    warnings: &mut Warnings,
) {
    let years: BTreeSet<i32> = data
        .times
        .iter()
        .flatten()
        .map(|t| MonthIndex::from_ordinal(*t).year())
        .collect();
    match leave_one_year_out(data, spec, term, &years) {
        Ok(l) => {
            for (y, c) in l.coefficients {
                out.loyo.push(vec![name.into(), proxy.into(), term.into(), text(y), num(c)]);
            }
            for w in l.warnings {
                warnings.push("loyo", &format!("{name}/{proxy}"), w);
            }
        }
        Err(e) => warnings.push("loyo", &format!("{name}/{proxy}"), e.to_string()),
    }
}
