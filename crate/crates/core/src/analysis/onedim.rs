//! Diagnostics for one-dimensional maps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::DiscreteMap;
use crate::error::{Error, Result};

const SCAN_CELLS: usize = 10_000;
const ROOT_TOL: f64 = 1e-12;
const MINIMALITY_TOL: f64 = 1e-9;

fn compose<F: Fn(f64) -> Result<f64>>(f: &F, m: f64, k: usize) -> Result<f64> {
    let mut x = m;
    for _ in 0..k {
        x = f(x)?;
    }
    Ok(x)
}

fn divisors_below(k: usize) -> impl Iterator<Item = usize> {
    (1..k).filter(move |j| k.is_multiple_of(*j))
}

/// A point of least period `k` in `[a, b]`, or `None` when no sign change of
/// `F^k(m) - m` yields one. Points where the map fails are skipped.
pub fn find_periodic_orbit<F>(f: F, k: usize, bracket: [f64; 2]) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let [a, b] = bracket;
    if k == 0 {
        return Err(Error::Parameter("period must be at least 1".into()));
    }
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::InvalidInput(format!("bad bracket [{a}, {b}]")));
    }
    let g = |m: f64| compose(&f, m, k).map(|y| y - m).ok();
    let minimal = |m: f64| divisors_below(k).all(|j| compose(&f, m, j).is_ok_and(|y| (y - m).abs() > MINIMALITY_TOL));
    let width = (b - a) / SCAN_CELLS as f64;
    let mut left = a;
    let mut gl = g(a);
    for i in 1..=SCAN_CELLS {
        let right = if i == SCAN_CELLS { b } else { a + width * i as f64 };
        let gr = g(right);
        if let (Some(l), Some(r)) = (gl, gr) {
            let root = if l == 0.0 {
                Some(left)
            } else if l * r < 0.0 {
                let (mut lo, mut hi, mut glo) = (left, right, l);
                while hi - lo > ROOT_TOL {
                    let mid = 0.5 * (lo + hi);
                    match g(mid) {
                        Some(0.0) => {
                            lo = mid;
                            hi = mid;
                        }
                        Some(gm) if (gm > 0.0) == (glo > 0.0) => {
                            lo = mid;
                            glo = gm;
                        }
                        Some(_) => hi = mid,
                        None => break,
                    }
                }
                Some(0.5 * (lo + hi))
            } else {
                None
            };
            if let Some(m) = root {
                if minimal(m) {
                    return Ok(Some(m));
                }
            }
        }
        left = right;
        gl = gr;
    }
    Ok(None)
}

/// The orbit `m, F(m), ..., F^(k-1)(m)`.
pub fn orbit_points<F: Fn(f64) -> Result<f64>>(f: F, m: f64, k: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(k);
    let mut x = m;
    for _ in 0..k {
        out.push(x);
        x = f(x)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

pub fn central_derivative<F: Fn(f64) -> Result<f64>>(f: &F, m: f64, h: f64) -> Result<f64> {
    Ok((f(m + h)? - f(m - h)?) / (2.0 * h))
}

/// Linear stability of the fixed point `m`. A supplied closed-form derivative
/// takes precedence once it agrees with the central difference.
pub fn classify_fixed_point<F>(f: F, m: f64, closed_form: Option<f64>) -> Result<(Stability, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let residual = (f(m)? - m).abs();
    if !(residual <= 1e-9) {
        return Err(Error::NotFixedPoint { residual });
    }
    let fd = central_derivative(&f, m, 1e-6)?;
    let d = match closed_form {
        Some(c) if (c - fd).abs() <= 1e-5 * (1.0 + c.abs()) => c,
        Some(c) => {
            return Err(Error::Numerical(format!(
                "closed-form derivative {c} disagrees with finite difference {fd}"
            )))
        }
        None => fd,
    };
    let s = if d.abs() < 1.0 - 1e-6 {
        Stability::Stable
    } else if d.abs() > 1.0 + 1e-6 {
        Stability::Unstable
    } else {
        Stability::Marginal
    };
    Ok((s, d))
}

/// `F'(v) = 1 - eta v` for `m exp(eta (v - m))`.
pub fn entropic_derivative(eta: f64, v: f64, m: f64) -> f64 {
    (eta * (v - m)).exp() * (1.0 - eta * m)
}

/// Schwarzian of `m exp(eta (v - m))`; independent of `v`.
pub fn schwarzian_entropic(eta: f64, m: f64) -> Result<f64> {
    let q = 1.0 - eta * m;
    if q.abs() < 1e-12 {
        return Err(Error::SingularPoint { m });
    }
    Ok(-eta * eta * (6.0 - 4.0 * eta * m + eta * eta * m * m) / (2.0 * q * q))
}

fn stencil<F: Fn(f64) -> Result<f64>>(f: &F, m: f64, h: f64) -> Result<[f64; 3]> {
    let (fm2, fm1, f0, fp1, fp2) = (f(m - 2.0 * h)?, f(m - h)?, f(m)?, f(m + h)?, f(m + 2.0 * h)?);
    let d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
    let d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
    let d3 = (-fm2 + 2.0 * fm1 - 2.0 * fp1 + fp2) / (2.0 * h * h * h);
    Ok([d1, d2, d3])
}

/// `F'''/F' - 3/2 (F''/F')^2` from five-point differences, with Richardson
/// extrapolation on the third derivative. `F` must be defined on `[m - 2h, m + 2h]`.
pub fn schwarzian_fd<F: Fn(f64) -> Result<f64>>(f: F, m: f64, h: f64) -> Result<f64> {
    let [d1, d2, d3h] = stencil(&f, m, h)?;
    let [_, _, d3h2] = stencil(&f, m, 0.5 * h)?;
    let d3 = (4.0 * d3h2 - d3h) / 3.0;
    if d1.abs() < 1e-10 {
        return Err(Error::SingularPoint { m });
    }
    Ok(d3 / d1 - 1.5 * (d2 / d1) * (d2 / d1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationConfig {
    pub eta_min: f64,
    pub eta_max: f64,
    pub n_eta: usize,
    pub m0: f64,
    pub burn_in: usize,
    pub keep: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationRow {
    pub eta: f64,
    /// Attained values; empty when the orbit diverged.
    pub values: Vec<f64>,
    pub diverged: bool,
}

/// Long-run values of the family `make(eta)` over an evenly spaced grid.
pub fn bifurcation_scan<M>(make: M, cfg: &BifurcationConfig) -> Result<Vec<BifurcationRow>>
where
    M: Fn(f64) -> Result<DiscreteMap> + Sync,
{
    if cfg.n_eta < 2 || cfg.keep == 0 {
        return Err(Error::Parameter("bifurcation scan needs n_eta >= 2 and keep >= 1".into()));
    }
    if !(cfg.eta_min < cfg.eta_max) {
        return Err(Error::Parameter(format!("empty range [{}, {}]", cfg.eta_min, cfg.eta_max)));
    }
    (0..cfg.n_eta)
        .into_par_iter()
        .map(|i| {
            let eta = cfg.eta_min + (cfg.eta_max - cfg.eta_min) * i as f64 / (cfg.n_eta - 1) as f64;
            let map = make(eta)?;
            let run = || -> Result<Vec<f64>> {
                let mut m = vec![cfg.m0; map.model.dim()];
                for _ in 0..cfg.burn_in {
                    m = map.step(&m)?;
                }
                let mut out = Vec::with_capacity(cfg.keep);
                for _ in 0..cfg.keep {
                    m = map.step(&m)?;
                    out.push(m[0]);
                }
                Ok(out)
            };
            Ok(match run() {
                Ok(values) => BifurcationRow { eta, values, diverged: false },
                Err(Error::Divergence { .. }) => BifurcationRow { eta, values: Vec::new(), diverged: true },
                Err(e) => return Err(e),
            })
        })
        .collect()
}

/// Segments `(x0, y0, x1, y1)`: vertical to the graph, then horizontal to the diagonal.
pub fn cobweb_trace<F: Fn(f64) -> Result<f64>>(f: F, m0: f64, n_steps: usize) -> Result<Vec<[f64; 4]>> {
    if n_steps == 0 {
        return Err(Error::Parameter("cobweb needs at least one step".into()));
    }
    let mut out = Vec::with_capacity(2 * n_steps);
    let mut m = m0;
    for _ in 0..n_steps {
        let next = f(m)?;
        out.push([m, m, m, next]);
        out.push([m, next, next, next]);
        m = next;
    }
    Ok(out)
}
