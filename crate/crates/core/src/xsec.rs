//! Anomaly-level decomposition of average mislearning into break-proneness
//! and state-conditional severity, idiosyncratic volatility, and the
//! cross-sectional screens built on them.

use alloc::string::String;
use alloc::vec::Vec;

// Shadowed by inherent methods whenever std is in the crate graph.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::math::{mean, sample_sd, spearman};
use crate::panel::TimeSeries;
use crate::regime::BREAK_STATE_THRESHOLD;
use crate::regression::{run_regression, Covariance, FixedEffects, RegressionData, RegressionResult, RegressionSpec, Regressor};

pub const IVOL_MIN_OBS: usize = 36;
pub const TERTILE_MIN_ROWS: usize = 9;
pub const XSEC_MIN_ROWS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionRow {
    pub series: String,
    /// Mean filtered break probability.
    pub pi: f64,
    /// Share of months with filtered break probability above 0.5.
    pub pi_hard: f64,
    /// Probability-weighted mean Δ; `None` without break mass.
    pub mu1: Option<f64>,
    /// Complement-weighted mean Δ; `None` without non-break mass.
    pub mu0: Option<f64>,
    pub e_delta: f64,
    pub spike_freq: f64,
    /// Spike rate in hard break months.
    pub q1: Option<f64>,
    /// Spike rate in hard non-break months.
    pub q0: Option<f64>,
    pub ivol: Option<f64>,
    pub one_minus_r2: Option<f64>,
    pub sd_delta: f64,
    pub degenerate: bool,
    /// `|E[Δ] - (π μ1 + (1-π) μ0)|`.
    pub decomposition_error: f64,
    /// `|spike_freq - (π_hard q1 + (1-π_hard) q0)|`.
    pub spike_decomposition_error: f64,
}

impl DecompositionRow {
    /// `δ = μ1 - μ0` when both are defined.
    pub fn severity_gap(&self) -> Option<f64> {
        Some(self.mu1? - self.mu0?)
    }
}

/// Decomposes one series' Δ path with its break probabilities and spike flags.
pub fn decompose(series: &str, delta: &[f64], prob: &[f64], spikes: &[bool]) -> Result<DecompositionRow> {
    let n = delta.len();
    if prob.len() != n || spikes.len() != n {
        return Err(Error::Precondition("delta, probability and spike paths differ in length".into()));
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Precondition("break probabilities must lie in [0, 1]".into()));
    }
    let nf = n as f64;
    let w1: f64 = prob.iter().sum();
    let w0: f64 = prob.iter().map(|p| 1.0 - p).sum();
    let s1: f64 = prob.iter().zip(delta).map(|(p, d)| p * d).sum();
    let s0: f64 = prob.iter().zip(delta).map(|(p, d)| (1.0 - p) * d).sum();
    let pi = w1 / nf;
    let mu1 = (w1 > 0.0).then(|| s1 / w1);
    let mu0 = (w0 > 0.0).then(|| s0 / w0);
    let e_delta = mean(delta);
    let implied = pi * mu1.unwrap_or(0.0) + (1.0 - pi) * mu0.unwrap_or(0.0);

    let hard: Vec<bool> = prob.iter().map(|p| *p > BREAK_STATE_THRESHOLD).collect();
    let n1 = hard.iter().filter(|h| **h).count();
    let n0 = n - n1;
    let k1 = hard.iter().zip(spikes).filter(|(h, s)| **h && **s).count();
    let k0 = hard.iter().zip(spikes).filter(|(h, s)| !**h && **s).count();
    let pi_hard = n1 as f64 / nf;
    let spike_freq = (k1 + k0) as f64 / nf;
    let q1 = (n1 > 0).then(|| k1 as f64 / n1 as f64);
    let q0 = (n0 > 0).then(|| k0 as f64 / n0 as f64);
    let spike_implied = pi_hard * q1.unwrap_or(0.0) + (1.0 - pi_hard) * q0.unwrap_or(0.0);
    Ok(DecompositionRow {
        series: series.into(),
        pi,
        pi_hard,
        mu1,
        mu0,
        e_delta,
        spike_freq,
        q1,
        q0,
        ivol: None,
        one_minus_r2: None,
        sd_delta: if n > 1 { sample_sd(delta) } else { 0.0 },
        degenerate: false,
        decomposition_error: (e_delta - implied).abs(),
        spike_decomposition_error: (spike_freq - spike_implied).abs(),
    })
}

/// Residual dispersion from the three-factor time-series regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ivol {
    /// Residual sample standard deviation (decimal per month).
    pub ivol: f64,
    pub one_minus_r2: f64,
    pub n_obs: usize,
}

/// Regresses `series` on an intercept and three factors over their common
/// months; the residual s.d. uses the `n - 1` denominator.
pub fn compute_ivol(series: &TimeSeries, factors: [&TimeSeries; 3]) -> Result<Ivol> {
    let mut y = Vec::new();
    let mut x: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (t, v) in series.dates.iter().zip(&series.values) {
        let f: Option<Vec<f64>> = factors.iter().map(|s| s.get(*t)).collect();
        if let Some(f) = f {
            y.push(*v);
            for j in 0..3 {
                x[j].push(f[j]);
            }
        }
    }
    if y.len() < IVOL_MIN_OBS {
        return Err(Error::InsufficientData {
            needed: IVOL_MIN_OBS,
            got: y.len(),
        });
    }
    let [a, b, c] = x;
    let data = RegressionData {
        y,
        regressors: alloc::vec![Regressor::new("f1", a), Regressor::new("f2", b), Regressor::new("f3", c)],
        units: None,
        times: None,
    };
    let spec = RegressionSpec {
        covariance: Covariance::Classic,
        ..RegressionSpec::default()
    };
    let r = run_regression(&data, &spec)?;
    Ok(Ivol {
        ivol: sample_sd(&r.residuals),
        one_minus_r2: 1.0 - r.r_squared,
        n_obs: r.n_obs,
    })
}

fn hc3_normal() -> RegressionSpec {
    RegressionSpec {
        intercept: true,
        fixed_effects: FixedEffects::None,
        covariance: Covariance::Hc3,
        normal_reference: true,
    }
}

fn fit(y: Vec<f64>, regs: Vec<Regressor>) -> Result<RegressionResult> {
    run_regression(
        &RegressionData {
            y,
            regressors: regs,
            units: None,
            times: None,
        },
        &hc3_normal(),
    )
}

/// Rows usable in cross-sectional work: non-degenerate with both
/// conditional means and an IVOL value.
pub fn usable_rows(rows: &[DecompositionRow]) -> Vec<&DecompositionRow> {
    rows.iter()
        .filter(|r| !r.degenerate && r.mu1.is_some() && r.mu0.is_some() && r.ivol.is_some())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TertileDescriptives {
    pub n: usize,
    pub ivol: f64,
    pub pi: f64,
    pub e_delta: f64,
    pub spike_freq: f64,
    pub sd_mu1: f64,
    pub sd_mu0: f64,
    pub sd_e_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tertile {
    pub label: &'static str,
    pub series: Vec<String>,
    pub e_delta_on_pi: RegressionResult,
    pub spike_on_pi: RegressionResult,
    pub descriptives: TertileDescriptives,
}

pub const TERTILE_LABELS: [&str; 3] = ["Low IVOL", "Medium IVOL", "High IVOL"];

/// Tertile membership by IVOL rank: with rows ordered by `(ivol, series)`,
/// position `i` is low when `i <= (n-1)/3`, medium when `i <= 2(n-1)/3`,
/// high otherwise (the type-7 tertile breakpoints).
pub fn ivol_tertiles<'a>(rows: &[&'a DecompositionRow]) -> [Vec<&'a DecompositionRow>; 3] {
    let mut sorted: Vec<&DecompositionRow> = rows.to_vec();
    sorted.sort_by(|a, b| {
        a.ivol
            .unwrap_or(f64::NAN)
            .total_cmp(&b.ivol.unwrap_or(f64::NAN))
            .then_with(|| a.series.cmp(&b.series))
    });
    let n = sorted.len();
    let cut = (n.saturating_sub(1)) as f64;
    let mut out: [Vec<&DecompositionRow>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (i, r) in sorted.into_iter().enumerate() {
        let pos = 3.0 * i as f64;
        let g = if pos <= cut {
            0
        } else if pos <= 2.0 * cut {
            1
        } else {
            2
        };
        out[g].push(r);
    }
    out
}

/// Within-tertile HC3 slopes of average mislearning and spike frequency on
/// break-proneness, plus descriptives (IVOL in decimal units).
pub fn tertile_analysis(rows: &[DecompositionRow]) -> Result<Vec<Tertile>> {
    let usable = usable_rows(rows);
    if usable.len() < TERTILE_MIN_ROWS {
        return Err(Error::InsufficientData {
            needed: TERTILE_MIN_ROWS,
            got: usable.len(),
        });
    }
    let groups = ivol_tertiles(&usable);
    let mut out = Vec::with_capacity(3);
    for (label, g) in TERTILE_LABELS.iter().zip(groups) {
        let pi: Vec<f64> = g.iter().map(|r| r.pi).collect();
        let ed: Vec<f64> = g.iter().map(|r| r.e_delta).collect();
        let sp: Vec<f64> = g.iter().map(|r| r.spike_freq).collect();
        let mu1: Vec<f64> = g.iter().filter_map(|r| r.mu1).collect();
        let mu0: Vec<f64> = g.iter().filter_map(|r| r.mu0).collect();
        let ivol: Vec<f64> = g.iter().filter_map(|r| r.ivol).collect();
        out.push(Tertile {
            label,
            series: g.iter().map(|r| r.series.clone()).collect(),
            e_delta_on_pi: fit(ed.clone(), alloc::vec![Regressor::new("pi", pi.clone())])?,
            spike_on_pi: fit(sp.clone(), alloc::vec![Regressor::new("pi", pi.clone())])?,
            descriptives: TertileDescriptives {
                n: g.len(),
                ivol: mean(&ivol),
                pi: mean(&pi),
                e_delta: mean(&ed),
                spike_freq: mean(&sp),
                sd_mu1: sample_sd(&mu1),
                sd_mu0: sample_sd(&mu0),
                sd_e_delta: sample_sd(&ed),
            },
        });
    }
    Ok(out)
}

fn zscore(v: &[f64]) -> Vec<f64> {
    let m = mean(v);
    let s = sample_sd(v);
    v.iter().map(|x| (x - m) / s).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct XsecModel {
    pub label: &'static str,
    pub dependent: &'static str,
    pub result: RegressionResult,
}

/// HC3 cross-sectional models: μ1 and π on standardized IVOL and
/// standardized `1 - R²` (A1–A3, B1–B3); μ1 on π (C1); E[Δ] and spike
/// frequency on π and on π + π² (C2–C5).
pub fn xsec_regressions(rows: &[DecompositionRow]) -> Result<Vec<XsecModel>> {
    let usable: Vec<&DecompositionRow> = usable_rows(rows)
        .into_iter()
        .filter(|r| r.one_minus_r2.is_some())
        .collect();
    if usable.len() < XSEC_MIN_ROWS {
        return Err(Error::InsufficientData {
            needed: XSEC_MIN_ROWS,
            got: usable.len(),
        });
    }
    let col = |f: &dyn Fn(&DecompositionRow) -> f64| usable.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let mu1 = col(&|r| r.mu1.unwrap_or(f64::NAN));
    let pi = col(&|r| r.pi);
    let ed = col(&|r| r.e_delta);
    let sp = col(&|r| r.spike_freq);
    let ivol_z = zscore(&col(&|r| r.ivol.unwrap_or(f64::NAN)));
    let r2_z = zscore(&col(&|r| r.one_minus_r2.unwrap_or(f64::NAN)));
    let pi2: Vec<f64> = pi.iter().map(|p| p * p).collect();
    let iv = || Regressor::new("ivol_z", ivol_z.clone());
    let rz = || Regressor::new("one_minus_r2_z", r2_z.clone());
    let p1 = || Regressor::new("pi", pi.clone());
    let p2 = || Regressor::new("pi_sq", pi2.clone());
    let specs: Vec<(&'static str, &'static str, Vec<f64>, Vec<Regressor>)> = alloc::vec![
        ("A1", "mu1", mu1.clone(), alloc::vec![iv()]),
        ("A2", "mu1", mu1.clone(), alloc::vec![rz()]),
        ("A3", "mu1", mu1.clone(), alloc::vec![iv(), rz()]),
        ("B1", "pi", pi.clone(), alloc::vec![iv()]),
        ("B2", "pi", pi.clone(), alloc::vec![rz()]),
        ("B3", "pi", pi.clone(), alloc::vec![iv(), rz()]),
        ("C1", "mu1", mu1.clone(), alloc::vec![p1()]),
        ("C2", "e_delta", ed.clone(), alloc::vec![p1()]),
        ("C3", "e_delta", ed.clone(), alloc::vec![p1(), p2()]),
        ("C4", "spike_freq", sp.clone(), alloc::vec![p1()]),
        ("C5", "spike_freq", sp.clone(), alloc::vec![p1(), p2()]),
    ];
    specs
        .into_iter()
        .map(|(label, dependent, y, regs)| {
            Ok(XsecModel {
                label,
                dependent,
                result: fit(y, regs)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corollary41Verdict {
    /// Hypotheses hold and E[Δ] is weakly increasing in π.
    Consistent,
    /// Hypotheses fail; the monotonicity result is descriptive only.
    HypothesesViolated,
    /// Hypotheses hold yet E[Δ] decreases somewhere in π.
    Contradicted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corollary41Report {
    pub n: usize,
    pub rank_correlation: f64,
    pub rank_correlation_positive: bool,
    pub mu0_common: bool,
    pub delta_nonnegative: bool,
    pub delta_increasing: bool,
    /// Adjacent pairs (ordered by π) where E[Δ] falls.
    pub monotonicity_violations: usize,
    pub verdict: Corollary41Verdict,
}

/// Checks the sufficient conditions (common μ0 within `tolerance`, δ ≥ 0
/// and weakly increasing in π) and whether E[Δ] rises with π.
pub fn corollary41_check(rows: &[DecompositionRow], tolerance: f64) -> Result<Corollary41Report> {
    let mut usable: Vec<&DecompositionRow> = rows.iter().filter(|r| r.mu1.is_some() && r.mu0.is_some()).collect();
    if usable.is_empty() {
        return Err(Error::EmptySample);
    }
    usable.sort_by(|a, b| a.pi.total_cmp(&b.pi).then_with(|| a.series.cmp(&b.series)));
    let mu0: Vec<f64> = usable.iter().filter_map(|r| r.mu0).collect();
    let gap: Vec<f64> = usable.iter().filter_map(|r| r.severity_gap()).collect();
    let hi = mu0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = mu0.iter().copied().fold(f64::INFINITY, f64::min);
    let mu0_common = hi - lo <= tolerance;
    let delta_nonnegative = gap.iter().all(|d| *d >= -tolerance);
    let delta_increasing = usable
        .windows(2)
        .zip(gap.windows(2))
        .all(|(r, d)| r[1].pi == r[0].pi || d[1] >= d[0] - tolerance);
    let monotonicity_violations = usable
        .windows(2)
        .filter(|w| w[1].pi > w[0].pi && w[1].e_delta < w[0].e_delta - tolerance)
        .count();
    let pi: Vec<f64> = usable.iter().map(|r| r.pi).collect();
    let ed: Vec<f64> = usable.iter().map(|r| r.e_delta).collect();
    let rho = if usable.len() >= 2 { spearman(&pi, &ed) } else { f64::NAN };
    let hypotheses = mu0_common && delta_nonnegative && delta_increasing;
    let verdict = match (hypotheses, monotonicity_violations) {
        (false, _) => Corollary41Verdict::HypothesesViolated,
        (true, 0) => Corollary41Verdict::Consistent,
        (true, _) => Corollary41Verdict::Contradicted,
    };
    Ok(Corollary41Report {
        n: usable.len(),
        rank_correlation: rho,
        rank_correlation_positive: rho > 0.0,
        mu0_common,
        delta_nonnegative,
        delta_increasing,
        monotonicity_violations,
        verdict,
    })
}

/// Ranks per metric, 1 = largest. Ties (and missing values, which rank
/// last) are ordered by position in `ids`, so ranks are always a permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub ids: Vec<String>,
    pub metrics: Vec<String>,
    /// `ranks[m][i]` is the rank of row `i` on metric `m`.
    pub ranks: Vec<Vec<usize>>,
}

pub fn rank_diagnostic(ids: &[String], metrics: &[(String, Vec<f64>)]) -> Result<RankTable> {
    if ids.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: ids.len(),
        });
    }
    let mut ranks = Vec::with_capacity(metrics.len());
    for (name, values) in metrics {
        if values.len() != ids.len() {
            return Err(Error::Precondition(alloc::format!("metric `{name}` has the wrong length")));
        }
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (values[a], values[b]);
            match (x.is_nan(), y.is_nan()) {
                (false, false) => y.total_cmp(&x),
                (true, false) => core::cmp::Ordering::Greater,
                (false, true) => core::cmp::Ordering::Less,
                (true, true) => core::cmp::Ordering::Equal,
            }
        });
        let mut r = alloc::vec![0; ids.len()];
        for (pos, i) in order.into_iter().enumerate() {
            r[i] = pos + 1;
        }
        ranks.push(r);
    }
    Ok(RankTable {
        ids: ids.to_vec(),
        metrics: metrics.iter().map(|(n, _)| n.clone()).collect(),
        ranks,
    })
}
