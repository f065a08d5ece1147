//! Cross-sectional stage: per-series decomposition, IVOL, tertile and HC3
//! diagnostics, the monotonicity screen and rank tables.

use mislearn_core::math::{mean, pearson, sample_sd};
use mislearn_core::regression::RegressionResult;
use mislearn_core::xsec::{
    compute_ivol, corollary41_check, decompose, ivol_tertiles, rank_diagnostic, tertile_analysis, usable_rows,
    xsec_regressions, Corollary41Verdict, DecompositionRow, TERTILE_LABELS, TERTILE_MIN_ROWS, XSEC_MIN_ROWS,
};
use mislearn_core::ReturnPanel;

use crate::config::XsecConfig;
use crate::error::Result;
use crate::fit::FittedSample;
use crate::io::{flag, num, opt, text, Table};
use crate::pipeline::{Sample, Warnings};

#[derive(Debug, Clone)]
pub struct XsecOutput {
    pub rows: Vec<DecompositionRow>,
    decomposition: Table,
    summary: Table,
    tertiles: Option<(Table, Table)>,
    regressions: Option<Table>,
    corollary41: Table,
    rank: Option<Table>,
}

impl XsecOutput {
    pub fn tables(&self) -> Vec<(&'static str, &Table)> {
        let mut out = vec![("decomposition.csv", &self.decomposition), ("summary.csv", &self.summary)];
        if let Some((t, d)) = &self.tertiles {
            out.push(("tertiles.csv", t));
            out.push(("tertile_descriptives.csv", d));
        }
        if let Some(r) = &self.regressions {
            out.push(("xsec_regressions.csv", r));
        }
        out.push(("corollary41.csv", &self.corollary41));
        if let Some(r) = &self.rank {
            out.push(("rank.csv", r));
        }
        out
    }
}

fn factor_series(panel: &ReturnPanel, cfg: &XsecConfig) -> Option<[mislearn_core::TimeSeries; 3]> {
    let [a, b, c] = [0, 1, 2].map(|i| panel.series(&cfg.factors[i]));
    Some([a?, b?, c?])
}

pub fn xsec_sample(
    sample: &Sample,
    fitted: &FittedSample,
    factor_panel: &ReturnPanel,
    cfg: &XsecConfig,
    warnings: &mut Warnings,
) -> Result<XsecOutput> {
    let name = &sample.name;
    let factors = factor_series(factor_panel, cfg);
    if factors.is_none() {
        warnings.push(
            "xsec",
            name,
            format!("factor series {} not all available; IVOL left empty", cfg.factors.join("/")),
        );
    }
    let mut rows = Vec::with_capacity(fitted.mislearning.len());
    for m in &fitted.mislearning {
        let subject = format!("{name}/{}", m.series_id);
        let mut row = match decompose(&m.series_id, &m.deltas(), &m.break_probs(), &m.spikes()) {
            Ok(r) => r,
            Err(e) => {
                warnings.push("xsec", &subject, format!("decomposition skipped: {e}"));
                continue;
            }
        };
        row.degenerate = m.degenerate;
        if row.mu1.is_none() || row.mu0.is_none() {
            warnings.push("xsec", &subject, "all break mass in one state; conditional mean absent");
        }
        if let Some(f) = &factors {
            let own = sample.panel.series(&m.series_id).expect("fitted series in panel");
            match compute_ivol(&own, [&f[0], &f[1], &f[2]]) {
                Ok(iv) => {
                    row.ivol = Some(iv.ivol);
                    row.one_minus_r2 = Some(iv.one_minus_r2);
                }
                Err(e) => warnings.push("xsec", &subject, format!("IVOL absent: {e}")),
            }
        }
        rows.push(row);
    }

    let decomposition = decomposition_table(&rows, cfg.ivol_scale);
    let summary = summary_table(&rows, fitted.threshold);

    let tertiles = if usable_rows(&rows).len() < TERTILE_MIN_ROWS {
        warnings.push(
            "xsec",
            name,
            format!(
                "tertile step skipped: {} usable series, at least {TERTILE_MIN_ROWS} required",
                usable_rows(&rows).len()
            ),
        );
        None
    } else {
        match tertile_analysis(&rows) {
            Ok(t) => Some(tertile_tables(name, &t, cfg.ivol_scale)),
            Err(e) => {
                warnings.push("xsec", name, format!("tertile step failed: {e}"));
                None
            }
        }
    };

    let regressions = match xsec_regressions(&rows) {
        Ok(models) => {
            let mut t = Table::new(&["sample", "model", "dependent", "term", "coef", "se", "t", "p", "r2", "obs"]);
            for m in models {
                push_coefficients(&mut t, name, m.label, m.dependent, &m.result);
            }
            Some(t)
        }
        Err(e) => {
            warnings.push(
                "xsec",
                name,
                format!("cross-sectional regressions skipped (at least {XSEC_MIN_ROWS} usable series): {e}"),
            );
            None
        }
    };

    let corollary41 = corollary41_table(name, &rows, cfg.mu0_tolerance, warnings);

    let rank = {
        let kept: Vec<&DecompositionRow> = rows.iter().filter(|r| !r.degenerate).collect();
        let ids: Vec<String> = kept.iter().map(|r| r.series.clone()).collect();
        let col = |f: &dyn Fn(&DecompositionRow) -> f64| kept.iter().map(|r| f(r)).collect::<Vec<f64>>();
        let metrics = vec![
            ("pi".to_owned(), col(&|r| r.pi)),
            ("pi_hard".to_owned(), col(&|r| r.pi_hard)),
            ("mu1".to_owned(), col(&|r| r.mu1.unwrap_or(f64::NAN))),
            ("e_delta".to_owned(), col(&|r| r.e_delta)),
            ("spike_freq".to_owned(), col(&|r| r.spike_freq)),
        ];
        match rank_diagnostic(&ids, &metrics) {
            Ok(rt) => {
                let mut header = vec!["series"];
                header.extend(rt.metrics.iter().map(String::as_str));
                let mut t = Table::new(&header);
                for (i, id) in rt.ids.iter().enumerate() {
                    let mut row = vec![id.clone()];
                    row.extend(rt.ranks.iter().map(|r| text(r[i])));
                    t.push(row);
                }
                Some(t)
            }
            Err(e) => {
                warnings.push("xsec", name, format!("rank table skipped: {e}"));
                None
            }
        }
    };

    Ok(XsecOutput {
        rows,
        decomposition,
        summary,
        tertiles,
        regressions,
        corollary41,
        rank,
    })
}

fn decomposition_table(rows: &[DecompositionRow], scale: f64) -> Table {
    let mut t = Table::new(&[
        "series",
        "pi",
        "pi_hard",
        "mu1",
        "mu0",
        "e_delta",
        "spike_freq",
        "q1",
        "q0",
        "ivol",
        "degenerate_flag",
        "identity_error",
        "spike_identity_error",
    ]);
    for r in rows {
        t.push(vec![
            r.series.clone(),
            num(r.pi),
            num(r.pi_hard),
            opt(r.mu1),
            opt(r.mu0),
            num(r.e_delta),
            num(r.spike_freq),
            opt(r.q1),
            opt(r.q0),
            opt(r.ivol.map(|v| v * scale)),
            flag(r.degenerate),
            num(r.decomposition_error),
            num(r.spike_decomposition_error),
        ]);
    }
    t
}

/// N, means and dispersions of the decomposition objects, fit of the
/// implied mean, identity errors and the pooled spike threshold.
fn summary_table(rows: &[DecompositionRow], threshold: f64) -> Table {
    let kept: Vec<&DecompositionRow> = rows
        .iter()
        .filter(|r| !r.degenerate && r.mu1.is_some() && r.mu0.is_some())
        .collect();
    let col = |f: &dyn Fn(&DecompositionRow) -> f64| kept.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let pi = col(&|r| r.pi);
    let mu1 = col(&|r| r.mu1.unwrap_or(f64::NAN));
    let mu0 = col(&|r| r.mu0.unwrap_or(f64::NAN));
    let ed = col(&|r| r.e_delta);
    let implied = col(&|r| r.pi * r.mu1.unwrap_or(f64::NAN) + (1.0 - r.pi) * r.mu0.unwrap_or(f64::NAN));
    let err = col(&|r| r.decomposition_error);
    let stat = |f: fn(&[f64]) -> f64, xs: &[f64]| if xs.is_empty() { f64::NAN } else { f(xs) };
    let max_err = err.iter().copied().fold(if err.is_empty() { f64::NAN } else { 0.0 }, f64::max);
    let corr = if kept.len() >= 2 { pearson(&ed, &implied) } else { f64::NAN };
    let mut t = Table::new(&["statistic", "value"]);
    let mut put = |k: &str, v: String| t.push(vec![k.into(), v]);
    put("n", text(kept.len()));
    put("mean_pi", num(stat(mean, &pi)));
    put("sd_pi", num(stat(sample_sd, &pi)));
    put("mean_mu1", num(stat(mean, &mu1)));
    put("sd_mu1", num(stat(sample_sd, &mu1)));
    put("mean_mu0", num(stat(mean, &mu0)));
    put("sd_mu0", num(stat(sample_sd, &mu0)));
    put("mean_e_delta", num(stat(mean, &ed)));
    put("sd_e_delta", num(stat(sample_sd, &ed)));
    put("corr_e_delta_implied", num(corr));
    put("mean_abs_decomposition_error", num(stat(mean, &err)));
    put("max_abs_decomposition_error", num(max_err));
    put("tau90", num(threshold));
    t
}

fn push_coefficients(t: &mut Table, sample: &str, model: &str, dependent: &str, r: &RegressionResult) {
    for c in &r.coefficients {
        t.push(vec![
            sample.into(),
            model.into(),
            dependent.into(),
            c.name.clone(),
            num(c.estimate),
            num(c.se),
            num(c.t),
            num(c.p),
            num(r.r_squared),
            text(r.n_obs),
        ]);
    }
}

fn tertile_tables(sample: &str, tertiles: &[mislearn_core::xsec::Tertile], scale: f64) -> (Table, Table) {
    let mut slopes = Table::new(&["sample", "tertile", "dependent", "term", "coef", "se", "t", "p", "r2", "obs"]);
    let mut desc = Table::new(&[
        "sample",
        "tertile",
        "n",
        "ivol",
        "pi",
        "e_delta",
        "spike_freq",
        "sd_mu1",
        "sd_mu0",
        "sd_e_delta",
        "series",
    ]);
    for t in tertiles {
        push_coefficients(&mut slopes, sample, t.label, "e_delta", &t.e_delta_on_pi);
        push_coefficients(&mut slopes, sample, t.label, "spike_freq", &t.spike_on_pi);
        let d = &t.descriptives;
        desc.push(vec![
            sample.into(),
            t.label.into(),
            text(d.n),
            num(d.ivol * scale),
            num(d.pi),
            num(d.e_delta),
            num(d.spike_freq),
            num(d.sd_mu1),
            num(d.sd_mu0),
            num(d.sd_e_delta),
            t.series.join(" "),
        ]);
    }
    (slopes, desc)
}

fn verdict(v: Corollary41Verdict) -> &'static str {
    match v {
        Corollary41Verdict::Consistent => "consistent",
        Corollary41Verdict::HypothesesViolated => "hypotheses_violated",
        Corollary41Verdict::Contradicted => "contradicted",
    }
}

fn corollary41_table(sample: &str, rows: &[DecompositionRow], tol: f64, warnings: &mut Warnings) -> Table {
    let mut t = Table::new(&[
        "sample",
        "group",
        "n",
        "rank_correlation",
        "rank_correlation_positive",
        "mu0_common",
        "delta_nonnegative",
        "delta_increasing",
        "monotonicity_violations",
        "verdict",
    ]);
    let kept: Vec<DecompositionRow> = rows.iter().filter(|r| !r.degenerate).cloned().collect();
    let mut groups: Vec<(&str, Vec<DecompositionRow>)> = vec![("all", kept)];
    let usable = usable_rows(rows);
    if usable.len() >= TERTILE_MIN_ROWS {
        for (label, g) in TERTILE_LABELS.iter().zip(ivol_tertiles(&usable)) {
            groups.push((label, g.into_iter().cloned().collect()));
        }
    }
    for (group, g) in groups {
        match corollary41_check(&g, tol) {
            Ok(r) => t.push(vec![
                sample.into(),
                group.into(),
                text(r.n),
                num(r.rank_correlation),
                flag(r.rank_correlation_positive),
                flag(r.mu0_common),
                flag(r.delta_nonnegative),
                flag(r.delta_increasing),
                text(r.monotonicity_violations),
                verdict(r.verdict).into(),
            ]),
            Err(e) => warnings.push("xsec", &format!("{sample}/{group}"), format!("monotonicity screen skipped: {e}")),
        }
    }
    t
}
