//! Derivative-free minimization: Nelder–Mead with restarts, multi-start
//! driver and a finite-difference Newton polish for smooth optima.

use alloc::vec;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::linalg::{Matrix, Qr};

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Convergence when the simplex value spread is below
    /// `ftol_rel * |f_best| + ftol_abs` ...
    pub ftol_rel: f64,
    pub ftol_abs: f64,
    /// ... and every vertex lies within `xtol` (max-norm) of the best vertex.
    pub xtol: f64,
    pub initial_step: f64,
    /// Fresh-simplex restarts from the converged point.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            ftol_rel: 1e-8,
            ftol_abs: 1e-12,
            xtol: 1e-7,
            initial_step: 0.25,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn simplex_pass<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    opts: &NelderMeadOptions,
    budget: usize,
) -> Minimum {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        let step = if p[i].abs() > 1.0 { opts.initial_step * p[i].abs() } else { opts.initial_step };
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| sanitize(f(p))).collect();
    let mut evals = n + 1;
    let mut converged = false;

    while evals < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let best = vals[0];
        let worst = vals[n];
        let spread_ok = best.is_finite()
            && (worst - best).abs() <= opts.ftol_rel * best.abs() + opts.ftol_abs;
        let size = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread_ok && size <= opts.xtol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for p in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = along(-1.0);
        let fr = sanitize(f(&xr));
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = sanitize(f(&xe));
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(-0.5);
            let fc = sanitize(f(&xc));
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = sanitize(f(&xc));
            (xc, fc)
        };
        evals += 1;
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        // Shrink towards the best vertex.
        for i in 1..=n {
            let shrunk: Vec<f64> = pts[0].iter().zip(&pts[i]).map(|(b, p)| b + 0.5 * (p - b)).collect();
            vals[i] = sanitize(f(&shrunk));
            pts[i] = shrunk;
        }
        evals += n;
    }

    let (bi, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("simplex is nonempty");
    Minimum {
        x: pts[bi].clone(),
        fx: vals[bi],
        evals,
        converged,
    }
}

/// Minimizes `f` from `x0`. After each converged pass the simplex is rebuilt
/// around the incumbent; iteration stops once a restart no longer improves
/// the objective beyond the tolerance.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Minimum {
    let mut best = simplex_pass(&mut f, x0, opts, opts.max_evals);
    let mut total = best.evals;
    for _ in 0..opts.restarts {
        if !best.converged || total >= opts.max_evals {
            break;
        }
        let mut o = *opts;
        o.initial_step = (opts.initial_step * 0.1).max(opts.xtol * 10.0);
        let next = simplex_pass(&mut f, &best.x, &o, opts.max_evals - total);
        total += next.evals;
        let improved = best.fx - next.fx > opts.ftol_rel * best.fx.abs() + opts.ftol_abs;
        if next.fx <= best.fx {
            best = Minimum { evals: total, ..next };
        } else {
            best.evals = total;
        }
        if !improved {
            break;
        }
    }
    best.evals = total;
    best
}

/// Runs Nelder–Mead from each start and keeps the lowest objective.
///
/// Fails with [`Error::EstimationFailed`] (carrying the best point) when no
/// start converged.
pub fn minimize_multistart<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    starts: &[Vec<f64>],
    opts: &NelderMeadOptions,
) -> Result<Minimum> {
    let mut best: Option<Minimum> = None;
    let mut any_converged = false;
    for s in starts {
        let m = nelder_mead(&mut f, s, opts);
        any_converged |= m.converged && m.fx.is_finite();
        let better = match &best {
            None => true,
            Some(b) => {
                // Prefer converged runs on ties of the objective.
                m.fx < b.fx || (m.fx == b.fx && m.converged && !b.converged)
            }
        };
        if better {
            best = Some(m);
        }
    }
    let best = best.ok_or(Error::EmptySample)?;
    if !any_converged || !best.fx.is_finite() {
        return Err(Error::EstimationFailed {
            best: best.x,
            objective: best.fx,
        });
    }
    Ok(best)
}

/// Central-difference gradient.
pub fn numerical_gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut p = x.to_vec();
    for i in 0..x.len() {
        let xi = p[i];
        p[i] = xi + h;
        let fp = f(&p);
        p[i] = xi - h;
        let fm = f(&p);
        p[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

fn numerical_hessian<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], h: f64) -> Matrix {
    let n = x.len();
    let mut hess = Matrix::zeros(n, n);
    let f0 = f(x);
    let mut p = x.to_vec();
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                p[i] = x[i] + h;
                let fp = f(&p);
                p[i] = x[i] - h;
                let fm = f(&p);
                p[i] = x[i];
                (fp - 2.0 * f0 + fm) / (h * h)
            } else {
                let mut eval = |di: f64, dj: f64| {
                    p[i] = x[i] + di;
                    p[j] = x[j] + dj;
                    let v = f(&p);
                    p[i] = x[i];
                    p[j] = x[j];
                    v
                };
                (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h)
            };
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Finite-difference Newton iterations from `x`, accepting only steps that
/// lower `f` (with step halving). Returns the polished point and value.
///
/// Used after the simplex has located a basin, where the objective is smooth
/// and a couple of Newton steps reach the stationary point far more tightly
/// than simplex contraction does.
pub fn newton_polish<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], iterations: usize) -> (Vec<f64>, f64) {
    let mut cur = x.to_vec();
    let mut fcur = f(&cur);
    for _ in 0..iterations {
        let g = numerical_gradient(&mut f, &cur, 1e-5);
        let hess = numerical_hessian(&mut f, &cur, 1e-4);
        let step = match Qr::factor(&hess) {
            Ok(qr) => qr.solve(&g),
            Err(_) => break,
        };
        // Only descend along a direction that actually decreases f.
        let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        if !(slope > 0.0) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<f64> = cur.iter().zip(&step).map(|(c, s)| c - t * s).collect();
            let fc = f(&cand);
            if fc.is_finite() && fc <= fcur {
                let gain = fcur - fc;
                cur = cand;
                fcur = fc;
                accepted = true;
                if gain <= 1e-14 * fcur.abs().max(1.0) {
                    return (cur, fcur);
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (cur, fcur)
}
