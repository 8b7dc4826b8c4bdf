use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::ScalarFn;
use crate::quadrature;

const QUAD_RTOL: f64 = 1e-10;
const QUAD_ATOL: f64 = 1e-14;

/// Density `rho(p)` of continuum mass over reserve prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Density {
    /// `rho(p) = c`
    Constant { c: f64 },
    /// `rho(p) = c / (p - 1)`, needs support above 1.
    Negation { c: f64 },
    /// `rho(p) = h'(p) / (v - p)` with `v` the segment's per-unit value, so that
    /// `integral (v - p) rho(p) dp = h(b) - h(a)`.
    Derived { h: ScalarFn },
    /// Piecewise-linear interpolant through `points`; zero outside them.
    Tabulated { points: Vec<[f64; 2]> },
}

impl Density {
    pub fn rho(&self, p: f64, v: f64) -> f64 {
        match self {
            Density::Constant { c } => *c,
            Density::Negation { c } => c / (p - 1.0),
            Density::Derived { h } => h.deriv(p) / (v - p),
            Density::Tabulated { points } => tabulated(points, p),
        }
    }

    pub(crate) fn validate(&self, v: f64, lo: f64, hi: f64) -> std::result::Result<(), String> {
        match self {
            Density::Constant { c } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(format!("negative or non-finite density constant {c}"));
                }
            }
            Density::Negation { c } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(format!("negative or non-finite density constant {c}"));
                }
                if lo <= 1.0 {
                    return Err(format!("negation density needs support above 1, got lower end {lo}"));
                }
            }
            Density::Derived { h } => {
                h.validate().map_err(|e| e.to_string())?;
                if lo < v && v < hi {
                    return Err(format!("derived density is singular at the per-unit value {v} inside the support"));
                }
                let n = 1001;
                for k in 0..n {
                    let p = lo + (hi - lo) * k as f64 / (n - 1) as f64;
                    if p == v {
                        continue;
                    }
                    let r = self.rho(p, v);
                    if !(r.is_finite() && r >= -1e-12) {
                        return Err(format!("derived density is negative or non-finite at p = {p} (rho = {r})"));
                    }
                }
            }
            Density::Tabulated { points } => {
                if points.len() < 2 {
                    return Err("tabulated density needs at least two points".into());
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err("tabulated density abscissae must be strictly increasing".into());
                }
                if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite() && p[1] >= 0.0)) {
                    return Err("tabulated density values must be finite and nonnegative".into());
                }
            }
        }
        Ok(())
    }

    /// `integral_a^b (v - p) rho(p) dp`, the utility of winning the mass on `[a, b]`.
    pub fn utility_integral(&self, a: f64, b: f64, v: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        match self {
            Density::Constant { c } => Ok(c * ((b - a) * v - 0.5 * (b * b - a * a))),
            Density::Negation { c } => {
                let log_ratio = ((b - 1.0) / (a - 1.0)).ln();
                Ok(c * ((v - 1.0) * log_ratio - (b - a)))
            }
            Density::Derived { h } => Ok(h.eval(b) - h.eval(a)),
            Density::Tabulated { points } => piecewise_quad(points, a, b, |p| (v - p) * tabulated(points, p)),
        }
    }

    /// `integral_a^b rho(p) dp`, the mass on `[a, b]`.
    pub fn mass_integral(&self, a: f64, b: f64, v: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        match self {
            Density::Constant { c } => Ok(c * (b - a)),
            Density::Negation { c } => Ok(c * ((b - 1.0) / (a - 1.0)).ln()),
            Density::Derived { .. } => quadrature::integrate(|p| self.rho(p, v), a, b, QUAD_RTOL, QUAD_ATOL),
            Density::Tabulated { points } => piecewise_quad(points, a, b, |p| tabulated(points, p)),
        }
    }

    /// `integral_a^b p rho(p) dp`, the payment collected on `[a, b]`.
    pub fn price_integral(&self, a: f64, b: f64, v: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        match self {
            Density::Constant { c } => Ok(0.5 * c * (b * b - a * a)),
            Density::Negation { c } => Ok(c * ((b - a) + ((b - 1.0) / (a - 1.0)).ln())),
            Density::Derived { .. } => quadrature::integrate(|p| p * self.rho(p, v), a, b, QUAD_RTOL, QUAD_ATOL),
            Density::Tabulated { points } => piecewise_quad(points, a, b, |p| p * tabulated(points, p)),
        }
    }
}

fn tabulated(points: &[[f64; 2]], p: f64) -> f64 {
    let k = points.partition_point(|q| q[0] <= p);
    if k == 0 || (k == points.len() && p > points[k - 1][0]) {
        return 0.0;
    }
    if k == points.len() {
        return points[k - 1][1];
    }
    let [x0, y0] = points[k - 1];
    let [x1, y1] = points[k];
    y0 + (y1 - y0) * (p - x0) / (x1 - x0)
}

fn piecewise_quad<F: Fn(f64) -> f64>(points: &[[f64; 2]], a: f64, b: f64, f: F) -> Result<f64> {
    let mut cuts = vec![a];
    cuts.extend(points.iter().map(|q| q[0]).filter(|&x| x > a && x < b));
    cuts.push(b);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += quadrature::integrate(&f, w[0], w[1], QUAD_RTOL, QUAD_ATOL)
            .map_err(|e| Error::Numerical(format!("tabulated density: {e}")))?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negation_utility_is_linear_at_unit_value() {
        let d = Density::Negation { c: 100.0 };
        let u = d.utility_integral(1.05, 1.7, 1.0).unwrap();
        assert!((u + 100.0 * (1.7 - 1.05)).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let cases = [
            (Density::Constant { c: 0.7 }, 0.3, 2.2, 1.0),
            (Density::Negation { c: 3.0 }, 1.05, 1.93, 1.0),
            (Density::Negation { c: 3.0 }, 1.1, 1.8, 2.5),
        ];
        for (d, a, b, v) in cases {
            let qu = quadrature::integrate(|p| (v - p) * d.rho(p, v), a, b, 1e-13, 0.0).unwrap();
            let qm = quadrature::integrate(|p| d.rho(p, v), a, b, 1e-13, 0.0).unwrap();
            let qp = quadrature::integrate(|p| p * d.rho(p, v), a, b, 1e-13, 0.0).unwrap();
            assert!((d.utility_integral(a, b, v).unwrap() - qu).abs() < 1e-10);
            assert!((d.mass_integral(a, b, v).unwrap() - qm).abs() < 1e-10);
            assert!((d.price_integral(a, b, v).unwrap() - qp).abs() < 1e-10);
        }
    }

    #[test]
    fn tabulated_is_zero_outside() {
        let pts = vec![[1.0, 1.0], [2.0, 3.0]];
        assert_eq!(tabulated(&pts, 0.5), 0.0);
        assert_eq!(tabulated(&pts, 1.5), 2.0);
        assert_eq!(tabulated(&pts, 2.0), 3.0);
        assert_eq!(tabulated(&pts, 2.5), 0.0);
        let d = Density::Tabulated { points: pts };
        assert!((d.mass_integral(0.0, 3.0, 1.0).unwrap() - 2.0).abs() < 1e-12);
    }
}
