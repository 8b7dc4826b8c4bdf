//! Serializable scalar functions used as per-coordinate nonlinearities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real function of one variable with an almost-everywhere derivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    Zero,
    Constant {
        c: f64,
    },
    Linear {
        slope: f64,
        #[serde(default)]
        intercept: f64,
    },
    /// Interpolates `points` (sorted by abscissa) and extends the end slopes.
    PiecewiseLinear {
        points: Vec<[f64; 2]>,
    },
    /// `amp * sin(freq * x + phase)`
    Sine {
        amp: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amp * tanh(x / scale)`
    Tanh {
        amp: f64,
        scale: f64,
    },
    /// Three-segment diode `gb*x + (ga-gb)/2 * (|x+1| - |x-1|)`.
    ChuaDiode {
        ga: f64,
        gb: f64,
    },
    /// `gain * inner((x - shift) / scale) + tilt * x + offset`
    Transformed {
        inner: Box<ScalarFn>,
        shift: f64,
        scale: f64,
        gain: f64,
        #[serde(default)]
        tilt: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl ScalarFn {
    pub fn transformed(inner: ScalarFn, shift: f64, scale: f64, gain: f64, tilt: f64, offset: f64) -> Self {
        ScalarFn::Transformed {
            inner: Box::new(inner),
            shift,
            scale,
            gain,
            tilt,
            offset,
        }
    }

    /// Adds `tilt * x + offset` to `self`.
    pub fn plus_affine(self, tilt: f64, offset: f64) -> Self {
        match self {
            ScalarFn::Transformed {
                inner,
                shift,
                scale,
                gain,
                tilt: t0,
                offset: o0,
            } => ScalarFn::Transformed {
                inner,
                shift,
                scale,
                gain,
                tilt: t0 + tilt,
                offset: o0 + offset,
            },
            other => ScalarFn::transformed(other, 0.0, 1.0, 1.0, tilt, offset),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Zero => 0.0,
            ScalarFn::Constant { c } => *c,
            ScalarFn::Linear { slope, intercept } => slope * x + intercept,
            ScalarFn::PiecewiseLinear { points } => {
                let i = segment_index(points, x);
                let [x0, y0] = points[i];
                let [x1, y1] = points[i + 1];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
            ScalarFn::Sine { amp, freq, phase } => amp * (freq * x + phase).sin(),
            ScalarFn::Tanh { amp, scale } => amp * (x / scale).tanh(),
            ScalarFn::ChuaDiode { ga, gb } => gb * x + 0.5 * (ga - gb) * ((x + 1.0).abs() - (x - 1.0).abs()),
            ScalarFn::Transformed {
                inner,
                shift,
                scale,
                gain,
                tilt,
                offset,
            } => gain * inner.eval((x - shift) / scale) + tilt * x + offset,
        }
    }

    /// Derivative; at kinks the right derivative is returned.
    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            ScalarFn::Zero | ScalarFn::Constant { .. } => 0.0,
            ScalarFn::Linear { slope, .. } => *slope,
            ScalarFn::PiecewiseLinear { points } => {
                let i = segment_index(points, x);
                let [x0, y0] = points[i];
                let [x1, y1] = points[i + 1];
                (y1 - y0) / (x1 - x0)
            }
            ScalarFn::Sine { amp, freq, phase } => amp * freq * (freq * x + phase).cos(),
            ScalarFn::Tanh { amp, scale } => {
                let c = (x / scale).cosh();
                amp / (scale * c * c)
            }
            ScalarFn::ChuaDiode { ga, gb } => {
                if (-1.0..1.0).contains(&x) {
                    *ga
                } else {
                    *gb
                }
            }
            ScalarFn::Transformed {
                inner,
                shift,
                scale,
                gain,
                tilt,
                ..
            } => gain / scale * inner.deriv((x - shift) / scale) + tilt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("scalar function: {m}")));
        match self {
            ScalarFn::PiecewiseLinear { points } => {
                if points.len() < 2 {
                    return bad("piecewise_linear needs at least two points");
                }
                if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                    return bad("piecewise_linear points must be finite");
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return bad("piecewise_linear abscissae must be strictly increasing");
                }
                Ok(())
            }
            ScalarFn::Tanh { scale, .. } if *scale == 0.0 => bad("tanh scale must be nonzero"),
            ScalarFn::Transformed { inner, scale, .. } => {
                if *scale == 0.0 || !scale.is_finite() {
                    return bad("transformed scale must be finite and nonzero");
                }
                inner.validate()
            }
            _ => Ok(()),
        }
    }

    /// Largest `|f'|` over `n` evenly spaced points of `[lo, hi]`, kinks included.
    pub fn max_abs_slope(&self, lo: f64, hi: f64, n: usize) -> f64 {
        let n = n.max(2);
        (0..n)
            .map(|k| {
                let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
                self.deriv(x).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `f'` over `n` evenly spaced points of `[lo, hi]`.
    pub fn max_slope(&self, lo: f64, hi: f64, n: usize) -> f64 {
        let n = n.max(2);
        (0..n)
            .map(|k| {
                let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
                self.deriv(x)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn segment_index(points: &[[f64; 2]], x: f64) -> usize {
    let k = points.partition_point(|p| p[0] <= x);
    k.saturating_sub(1).min(points.len() - 2)
}
