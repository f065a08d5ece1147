//! Ordinary least squares with interchangeable covariance estimators and
//! fixed effects absorbed by within-demeaning.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

// Shadowed by inherent methods whenever std is in the crate graph.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Qr};
use crate::math::{normal_two_sided, student_t_two_sided};

/// Name given to the intercept column.
pub const INTERCEPT: &str = "const";
/// A demeaned column whose norm falls below this share of its raw norm is
/// treated as absorbed by the fixed effects.
const ABSORBED_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub name: String,
    pub values: Vec<f64>,
}

impl Regressor {
    pub fn new(name: &str, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

/// Outcome, regressors and optional panel coordinates for each row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegressionData {
    pub y: Vec<f64>,
    pub regressors: Vec<Regressor>,
    /// Panel unit of each row (series).
    pub units: Option<Vec<u32>>,
    /// Calendar position of each row (month ordinal).
    pub times: Option<Vec<i64>>,
}

impl RegressionData {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Keeps the rows for which `keep` returns true.
    pub fn filter_rows(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep(i)).collect();
        let pick = |v: &Vec<f64>| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        Self {
            y: pick(&self.y),
            regressors: self
                .regressors
                .iter()
                .map(|r| Regressor {
                    name: r.name.clone(),
                    values: pick(&r.values),
                })
                .collect(),
            units: self.units.as_ref().map(|u| idx.iter().map(|&i| u[i]).collect()),
            times: self.times.as_ref().map(|t| idx.iter().map(|&i| t[i]).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedEffects {
    None,
    Unit,
    Time,
    UnitAndTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterDim {
    Unit,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Covariance {
    /// Homoskedastic `s² (X'X)⁻¹`.
    Classic,
    /// White.
    Hc0,
    /// Squared residuals scaled by `(1 - h_ii)⁻²`.
    Hc3,
    /// Bartlett kernel with the given lag; lags are taken within units on
    /// the calendar (rows `l` months apart).
    NeweyWest { lag: usize },
    /// One-way cluster sandwich; `small_sample` applies
    /// `G/(G-1) · (n-1)/(n-k)`.
    Cluster { dim: ClusterDim, small_sample: bool },
    /// Unit + time − intersection.
    TwoWay { small_sample: bool },
}

impl Covariance {
    pub fn label(&self) -> String {
        match self {
            Covariance::Classic => "classic".into(),
            Covariance::Hc0 => "HC0".into(),
            Covariance::Hc3 => "HC3".into(),
            Covariance::NeweyWest { lag } => alloc::format!("NW({lag})"),
            Covariance::Cluster { dim: ClusterDim::Unit, .. } => "cluster(series)".into(),
            Covariance::Cluster { dim: ClusterDim::Time, .. } => "cluster(time)".into(),
            Covariance::TwoWay { .. } => "cluster(two-way)".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionSpec {
    /// Ignored when fixed effects are present (the intercept is absorbed).
    pub intercept: bool,
    pub fixed_effects: FixedEffects,
    pub covariance: Covariance,
    /// Normal instead of Student-t p-values for the non-clustered estimators.
    pub normal_reference: bool,
}

impl Default for RegressionSpec {
    fn default() -> Self {
        Self {
            intercept: true,
            fixed_effects: FixedEffects::None,
            covariance: Covariance::Hc3,
            normal_reference: false,
        }
    }
}

/// Reference distribution for p-values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    StudentT(f64),
    Normal,
}

impl Reference {
    pub fn p_value(&self, t: f64) -> f64 {
        match self {
            Reference::StudentT(df) => student_t_two_sided(t, *df),
            Reference::Normal => normal_two_sided(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub coefficients: Vec<Coefficient>,
    pub covariance: Matrix,
    pub n_obs: usize,
    /// Residual degrees of freedom after absorbed fixed effects.
    pub dof: usize,
    /// Within R² when fixed effects are present.
    pub r_squared: f64,
    pub residuals: Vec<f64>,
    pub reference: Reference,
    pub clusters: Option<usize>,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

fn index_groups<K: Ord + Copy>(keys: &[K]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    let ids = keys
        .iter()
        .map(|k| {
            let next = map.len();
            *map.entry(*k).or_insert(next)
        })
        .collect();
    (ids, map.len())
}

fn demean_by(v: &mut [f64], groups: &[usize], g: usize) {
    let mut sum = vec![0.0; g];
    let mut cnt = vec![0usize; g];
    for (x, &k) in v.iter().zip(groups) {
        sum[k] += x;
        cnt[k] += 1;
    }
    for (x, &k) in v.iter_mut().zip(groups) {
        *x -= sum[k] / cnt[k] as f64;
    }
}

/// Within transformation; alternating projections for two-way effects.
fn absorb(v: &mut [f64], fe: &[(Vec<usize>, usize)]) {
    match fe.len() {
        0 => {}
        1 => demean_by(v, &fe[0].0, fe[0].1),
        _ => {
            let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
            for _ in 0..10_000 {
                let before = v.to_vec();
                for (g, n) in fe {
                    demean_by(v, g, *n);
                }
                let change = v.iter().zip(&before).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if change <= 1e-14 * scale {
                    break;
                }
            }
        }
    }
}

fn require<'a, T>(v: &'a Option<Vec<T>>, what: &str) -> Result<&'a Vec<T>> {
    v.as_ref()
        .ok_or_else(|| Error::Precondition(alloc::format!("{what} identifiers are required")))
}

/// `Σ_g (Σ_{i∈g} s_i)(Σ_{i∈g} s_i)'` for scores `s_i = x_i e_i`.
fn cluster_meat(scores: &[Vec<f64>], groups: &[usize], g: usize, k: usize) -> Matrix {
    let mut sums = vec![vec![0.0; k]; g];
    for (s, &c) in scores.iter().zip(groups) {
        for j in 0..k {
            sums[c][j] += s[j];
        }
    }
    let mut m = Matrix::zeros(k, k);
    for s in &sums {
        m.add_outer(s, 1.0);
    }
    m
}

fn sandwich(bread: &Matrix, meat: &Matrix) -> Matrix {
    bread.matmul(meat).matmul(bread)
}

fn cluster_factor(small_sample: bool, g: usize, n: usize, k: usize) -> f64 {
    if small_sample {
        (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - k as f64))
    } else {
        1.0
    }
}

/// Fits `y = X b + e` per `spec`.
pub fn run_regression(data: &RegressionData, spec: &RegressionSpec) -> Result<RegressionResult> {
    let n = data.len();
    for r in &data.regressors {
        if r.values.len() != n {
            return Err(Error::Precondition(alloc::format!(
                "column `{}` has {} rows, outcome has {n}",
                r.name,
                r.values.len()
            )));
        }
    }
    if let Some(u) = &data.units {
        if u.len() != n {
            return Err(Error::Precondition("unit identifiers do not match rows".into()));
        }
    }
    if let Some(t) = &data.times {
        if t.len() != n {
            return Err(Error::Precondition("time identifiers do not match rows".into()));
        }
    }
    let all_values = data.y.iter().chain(data.regressors.iter().flat_map(|r| r.values.iter()));
    if let Some(index) = all_values.clone().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: index % n.max(1) });
    }

    let mut fe: Vec<(Vec<usize>, usize)> = Vec::new();
    if matches!(spec.fixed_effects, FixedEffects::Unit | FixedEffects::UnitAndTime) {
        fe.push(index_groups(require(&data.units, "unit")?));
    }
    if matches!(spec.fixed_effects, FixedEffects::Time | FixedEffects::UnitAndTime) {
        fe.push(index_groups(require(&data.times, "time")?));
    }
    let absorbed = match fe.len() {
        0 => 0,
        1 => fe[0].1,
        _ => fe[0].1 + fe[1].1 - 1,
    };
    let intercept = spec.intercept && fe.is_empty();

    let mut names: Vec<String> = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    if intercept {
        names.push(INTERCEPT.into());
        columns.push(vec![1.0; n]);
    }
    let mut collinear = Vec::new();
    for r in &data.regressors {
        let mut v = r.values.clone();
        let raw: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        absorb(&mut v, &fe);
        let within: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if raw == 0.0 || within <= ABSORBED_TOLERANCE * raw {
            collinear.push(r.name.clone());
        }
        names.push(r.name.clone());
        columns.push(v);
    }
    if !collinear.is_empty() {
        return Err(Error::RankDeficient { columns: collinear });
    }
    let k = columns.len();
    if k == 0 {
        return Err(Error::Precondition("no regressors".into()));
    }
    if n <= k + absorbed {
        return Err(Error::InsufficientData {
            needed: k + absorbed + 1,
            got: n,
        });
    }
    let mut y = data.y.clone();
    absorb(&mut y, &fe);

    let refs: Vec<&[f64]> = columns.iter().map(|c| c.as_slice()).collect();
    let x = Matrix::from_columns(&refs);
    let qr = Qr::factor(&x).map_err(|idx| Error::RankDeficient {
        columns: idx.into_iter().map(|j| names[j].clone()).collect(),
    })?;
    let beta = qr.solve(&y);
    let fitted = x.matvec(&beta);
    let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let ssr: f64 = resid.iter().map(|e| e * e).sum();
    let sst: f64 = if intercept {
        let m = y.iter().sum::<f64>() / n as f64;
        y.iter().map(|v| (v - m) * (v - m)).sum()
    } else {
        y.iter().map(|v| v * v).sum()
    };
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else if ssr == 0.0 { 1.0 } else { 0.0 };
    let dof = n - k - absorbed;
    let bread = qr.xtx_inverse();
    let rows: Vec<&[f64]> = (0..n).map(|i| x.row(i)).collect();
    let scores: Vec<Vec<f64>> = rows
        .iter()
        .zip(&resid)
        .map(|(r, e)| r.iter().map(|v| v * e).collect())
        .collect();

    let mut reference = if spec.normal_reference {
        Reference::Normal
    } else {
        Reference::StudentT(dof as f64)
    };
    let mut clusters = None;
    let cov = match spec.covariance {
        Covariance::Classic => {
            let mut v = bread.clone();
            v.scale(ssr / dof as f64);
            v
        }
        Covariance::Hc0 => {
            let mut meat = Matrix::zeros(k, k);
            for s in &scores {
                meat.add_outer(s, 1.0);
            }
            sandwich(&bread, &meat)
        }
        Covariance::Hc3 => {
            let mut meat = Matrix::zeros(k, k);
            for (i, r) in rows.iter().enumerate() {
                let e2 = resid[i] * resid[i];
                let bx = bread.matvec(r);
                let h: f64 = r.iter().zip(&bx).map(|(a, b)| a * b).sum();
                let d = 1.0 - h;
                let w = if e2 == 0.0 {
                    0.0
                } else if d > 0.0 {
                    e2 / (d * d)
                } else {
                    f64::INFINITY
                };
                meat.add_outer(r, w);
            }
            sandwich(&bread, &meat)
        }
        Covariance::NeweyWest { lag } => {
            let mut meat = Matrix::zeros(k, k);
            for s in &scores {
                meat.add_outer(s, 1.0);
            }
            if lag > 0 {
                let units: Vec<u32> = data.units.clone().unwrap_or_else(|| vec![0; n]);
                let times: Vec<i64> = match &data.times {
                    Some(t) => t.clone(),
                    None => (0..n as i64).collect(),
                };
                let mut position: BTreeMap<(u32, i64), usize> = BTreeMap::new();
                for i in 0..n {
                    if position.insert((units[i], times[i]), i).is_some() {
                        return Err(Error::Precondition(alloc::format!(
                            "two rows share unit {} and time {}",
                            units[i],
                            times[i]
                        )));
                    }
                }
                for i in 0..n {
                    for l in 1..=lag {
                        if let Some(&j) = position.get(&(units[i], times[i] + l as i64)) {
                            let w = 1.0 - l as f64 / (lag as f64 + 1.0);
                            meat.add_sym_outer(&scores[i], &scores[j], w);
                        }
                    }
                }
            }
            sandwich(&bread, &meat)
        }
        Covariance::Cluster { dim, small_sample } => {
            let (groups, g) = match dim {
                ClusterDim::Unit => index_groups(require(&data.units, "unit")?),
                ClusterDim::Time => index_groups(require(&data.times, "time")?),
            };
            if g < 2 {
                return Err(Error::TooFewClusters { found: g });
            }
            let mut v = sandwich(&bread, &cluster_meat(&scores, &groups, g, k));
            v.scale(cluster_factor(small_sample, g, n, k));
            reference = Reference::StudentT((g - 1) as f64);
            clusters = Some(g);
            v
        }
        Covariance::TwoWay { small_sample } => {
            let units = require(&data.units, "unit")?;
            let times = require(&data.times, "time")?;
            let (gu, nu) = index_groups(units);
            let (gt, nt) = index_groups(times);
            let pairs: Vec<(u32, i64)> = units.iter().copied().zip(times.iter().copied()).collect();
            let (gi, ni) = index_groups(&pairs);
            if nu < 2 || nt < 2 {
                return Err(Error::TooFewClusters { found: nu.min(nt) });
            }
            let mut vu = sandwich(&bread, &cluster_meat(&scores, &gu, nu, k));
            vu.scale(cluster_factor(small_sample, nu, n, k));
            let mut vt = sandwich(&bread, &cluster_meat(&scores, &gt, nt, k));
            vt.scale(cluster_factor(small_sample, nt, n, k));
            let mut vi = sandwich(&bread, &cluster_meat(&scores, &gi, ni, k));
            if ni > 1 {
                vi.scale(cluster_factor(small_sample, ni, n, k));
            }
            vu.add_assign(&vt);
            vu.sub_assign(&vi);
            reference = Reference::Normal;
            clusters = Some(nu.min(nt));
            vu
        }
    };

    let coefficients = names
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let var = cov[(j, j)];
            let se = if var >= 0.0 { var.sqrt() } else { f64::NAN };
            let t = beta[j] / se;
            Coefficient {
                name,
                estimate: beta[j],
                se,
                t,
                p: reference.p_value(t),
            }
        })
        .collect();
    Ok(RegressionResult {
        coefficients,
        covariance: cov,
        n_obs: n,
        dof,
        r_squared,
        residuals: resid,
        reference,
        clusters,
    })
}

/// Distinct clusters along a dimension; handy for warnings.
pub fn count_clusters(data: &RegressionData, dim: ClusterDim) -> usize {
    match dim {
        ClusterDim::Unit => data.units.as_ref().map_or(0, |u| u.iter().collect::<BTreeSet<_>>().len()),
        ClusterDim::Time => data.times.as_ref().map_or(0, |t| t.iter().collect::<BTreeSet<_>>().len()),
    }
}
