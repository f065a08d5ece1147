//! Strictly one-sided Hodrick–Prescott filter: the cycle at each date is
//! taken from the HP fit to the data observed through that date.

use alloc::vec;
use alloc::vec::Vec;

use crate::calendar::MonthIndex;
use crate::error::{invalid, Error, Result};
use crate::linalg::solve_spd_pentadiagonal;
use crate::panel::ExogenousSeries;

/// Monthly smoothing parameter.
pub const HP_LAMBDA_MONTHLY: f64 = 129_600.0;
pub const HP_MIN_OBS: usize = 4;

/// Cycle of the two-sided HP filter on `y`.
///
/// Solves `(I + λD'D) c = λD'(Dy)` directly for the cycle, so a series with
/// zero second differences yields an exactly zero cycle.
pub fn hp_cycle(y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n = y.len();
    if n < 3 {
        return Ok(vec![0.0; n]);
    }
    let mut d = vec![1.0; n];
    let mut e = vec![0.0; n - 1];
    let mut f = vec![0.0; n - 2];
    let mut rhs = vec![0.0; n];
    const C: [f64; 3] = [1.0, -2.0, 1.0];
    for r in 0..n - 2 {
        let dy = y[r] - 2.0 * y[r + 1] + y[r + 2];
        for i in 0..3 {
            d[r + i] += lambda * C[i] * C[i];
            rhs[r + i] += lambda * C[i] * dy;
        }
        e[r] += lambda * C[0] * C[1];
        e[r + 1] += lambda * C[1] * C[2];
        f[r] += lambda * C[0] * C[2];
    }
    solve_spd_pentadiagonal(&d, &e, &f, &rhs)
        .ok_or_else(|| Error::Degenerate("HP system is not positive definite".into()))
}

/// One-sided cycle: `cycle_t` is the last element of the HP cycle fitted to
/// `y_1..y_t`. Months are taken in key order; gaps are not interpolated.
pub fn one_sided_hp_detrend(series: &ExogenousSeries, lambda: f64) -> Result<Vec<(MonthIndex, f64)>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda", "smoothing parameter must be > 0"));
    }
    if series.len() < HP_MIN_OBS {
        return Err(Error::InsufficientData {
            needed: HP_MIN_OBS,
            got: series.len(),
        });
    }
    let (dates, values): (Vec<MonthIndex>, Vec<f64>) = series.iter().unzip();
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut out = Vec::with_capacity(values.len());
    for t in 0..values.len() {
        let c = hp_cycle(&values[..=t], lambda)?;
        out.push((dates[t], c[t]));
    }
    Ok(out)
}
