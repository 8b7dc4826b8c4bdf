use serde::{Deserialize, Serialize};

use crate::continuous::{IntegratorConfig, Stepper, VectorField};
use crate::error::{Error, Result};

/// The hyperplane `x[coord] = level`, crossed in `direction` (+1, -1 or 0 for
/// both), with `projection` picking the recorded coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub coord: usize,
    pub level: f64,
    pub direction: i8,
    pub projection: Vec<usize>,
    /// Longest flight time before giving up.
    #[serde(default = "default_cap")]
    pub time_cap: f64,
}

fn default_cap() -> f64 {
    100.0
}

impl Section {
    pub fn new(coord: usize, level: f64, direction: i8, projection: Vec<usize>) -> Self {
        Section {
            coord,
            level,
            direction,
            projection,
            time_cap: default_cap(),
        }
    }

    fn crosses(&self, before: f64, after: f64) -> bool {
        let up = before < 0.0 && after >= 0.0;
        let down = before > 0.0 && after <= 0.0;
        match self.direction {
            d if d > 0 => up,
            d if d < 0 => down,
            _ => up || down,
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.projection.iter().map(|&i| x[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Return {
    pub state: Vec<f64>,
    pub point: Vec<f64>,
    pub tau: f64,
}

const TIME_TOL: f64 = 1e-10;

/// Flows from `x0` to the next crossing of `section` in its direction.
///
/// The crossing is bracketed on the dense output, bisected to `1e-10` in
/// time, then polished with Newton steps on re-integrations from the start
/// of the bracketing step.
pub fn poincare_map<F: VectorField + ?Sized>(
    field: &F,
    cfg: &IntegratorConfig,
    section: &Section,
    x0: &[f64],
) -> Result<Return> {
    if section.coord >= x0.len() || section.projection.iter().any(|&i| i >= x0.len()) {
        return Err(Error::InvalidInput("section refers to a missing coordinate".into()));
    }
    let c = section.coord;
    let mut st = Stepper::new(field, *cfg, 0.0, x0)?;
    let mut before = x0[c] - section.level;
    while st.t() < section.time_cap {
        st.step(section.time_cap)?;
        let after = st.state()[c] - section.level;
        if section.crosses(before, after) {
            return refine(field, cfg, section, &st, before);
        }
        before = after;
    }
    Err(Error::NoReturn { cap: section.time_cap })
}

fn refine<F: VectorField + ?Sized>(
    field: &F,
    cfg: &IntegratorConfig,
    section: &Section,
    st: &Stepper<'_, F>,
    g_lo: f64,
) -> Result<Return> {
    let c = section.coord;
    let (t0, x_start) = st.previous();
    let x_start = x_start.to_vec();
    let (mut lo, mut hi) = (t0, st.t());
    let mut buf = vec![0.0; x_start.len()];
    while hi - lo > TIME_TOL {
        let mid = 0.5 * (lo + hi);
        st.interpolate(mid, &mut buf);
        if (buf[c] - section.level > 0.0) == (g_lo > 0.0) && buf[c] != section.level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (t_lo, t_hi) = (t0, st.t());
    let mut t = 0.5 * (lo + hi);
    let mut x = st.state().to_vec();
    let mut dx = vec![0.0; x.len()];
    for _ in 0..4 {
        x = if t > t_lo {
            let mut sub = Stepper::new(field, *cfg, t_lo, &x_start)?;
            sub.advance_to(t)?;
            sub.state().to_vec()
        } else {
            x_start.clone()
        };
        field.eval(&x, &mut dx)?;
        let g = x[c] - section.level;
        if dx[c] == 0.0 {
            break;
        }
        let dt = g / dx[c];
        let t_new = (t - dt).clamp(t_lo, t_hi);
        if (t_new - t).abs() < 1e-13 {
            break;
        }
        t = t_new;
    }
    x[c] = section.level;
    Ok(Return {
        point: section.project(&x),
        state: x,
        tau: t,
    })
}

/// Successive section points starting from `x0`, which need not lie on the section.
pub fn poincare_returns<F: VectorField + ?Sized>(
    field: &F,
    cfg: &IntegratorConfig,
    section: &Section,
    x0: &[f64],
    n: usize,
) -> Result<Vec<Return>> {
    let mut out = Vec::with_capacity(n);
    let mut x = x0.to_vec();
    for _ in 0..n {
        let r = poincare_map(field, cfg, section, &x)?;
        x = r.state.clone();
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuous::FnField;
    use std::f64::consts::PI;

    fn rotation() -> FnField<impl Fn(&[f64], &mut [f64]) + Sync> {
        FnField::new(2, |x: &[f64], dx: &mut [f64]| {
            dx[0] = -2.0 * x[1];
            dx[1] = 2.0 * x[0];
        })
    }

    #[test]
    fn circle_returns_after_period() {
        let f = rotation();
        let cfg = IntegratorConfig::dopri5(1e-12, 1e-12, 0.01);
        let sec = Section::new(1, 0.0, 1, vec![0]);
        let r = poincare_map(&f, &cfg, &sec, &[1.0, 0.0]).unwrap();
        assert!((r.point[0] - 1.0).abs() < 1e-8);
        assert!((r.tau - PI).abs() < 1e-8, "{}", r.tau);
        let both = Section::new(1, 0.0, 0, vec![0]);
        let r = poincare_map(&f, &cfg, &both, &[1.0, 0.0]).unwrap();
        assert!((r.point[0] + 1.0).abs() < 1e-8);
        assert!((r.tau - PI / 2.0).abs() < 1e-8);
    }

    #[test]
    fn no_return_is_reported() {
        let f = FnField::new(1, |_: &[f64], dx: &mut [f64]| dx[0] = 1.0);
        let sec = Section { time_cap: 5.0, ..Section::new(0, -1.0, 0, vec![0]) };
        let e = poincare_map(&f, &IntegratorConfig::default(), &sec, &[0.0]).unwrap_err();
        assert!(matches!(e, Error::NoReturn { .. }));
    }
}
