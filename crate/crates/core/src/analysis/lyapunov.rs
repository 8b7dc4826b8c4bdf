use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::continuous::{IntegratorConfig, Stepper, VectorField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovConfig {
    pub d0: f64,
    pub renorm_dt: f64,
    pub t_total: f64,
    pub transient: f64,
    /// Seeds the initial perturbation direction.
    pub seed: u64,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            d0: 1e-8,
            renorm_dt: 0.5,
            t_total: 2000.0,
            transient: 200.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate {
    pub exponent: f64,
    /// `(t, running estimate)` after each counted renormalization.
    pub series: Vec<(f64, f64)>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Benettin estimate of the largest exponent: a shadow orbit at distance
/// `d0` is pulled back along the current separation every `renorm_dt`.
pub fn largest_lyapunov<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    cfg: &LyapunovConfig,
    integ: &IntegratorConfig,
) -> Result<LyapunovEstimate> {
    if !(cfg.d0 > 0.0 && cfg.d0.is_finite()) {
        return Err(Error::Parameter(format!("d0 must be positive, got {}", cfg.d0)));
    }
    if !(cfg.renorm_dt > 0.0 && cfg.renorm_dt.is_finite()) {
        return Err(Error::Parameter(format!("renormalization interval must be positive, got {}", cfg.renorm_dt)));
    }
    if !(cfg.transient >= 0.0 && cfg.t_total > cfg.transient && cfg.t_total.is_finite()) {
        return Err(Error::Parameter(format!(
            "need 0 <= transient < t_total, got {} and {}",
            cfg.transient, cfg.t_total
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dir: Vec<f64> = (0..x0.len()).map(|_| rng.random::<f64>() - 0.5).collect();
    let n = norm(&dir);
    dir.iter_mut().for_each(|d| *d /= n);
    let shadow0: Vec<f64> = x0.iter().zip(&dir).map(|(x, d)| x + cfg.d0 * d).collect();

    let mut base = Stepper::new(field, *integ, 0.0, x0)?;
    let mut shadow = Stepper::new(field, *integ, 0.0, &shadow0)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut series = Vec::new();
    let mut k = 1u64;
    loop {
        let t = (k as f64 * cfg.renorm_dt).min(cfg.t_total);
        base.advance_to(t)?;
        shadow.advance_to(t)?;
        let diff: Vec<f64> = shadow.state().iter().zip(base.state()).map(|(s, b)| s - b).collect();
        let d = norm(&diff);
        if d == 0.0 || !d.is_finite() {
            return Err(Error::DegeneratePerturbation { t });
        }
        if t > cfg.transient {
            sum += (d / cfg.d0).ln();
            count += 1;
            series.push((t, sum / (count as f64 * cfg.renorm_dt)));
        }
        let pulled: Vec<f64> = base.state().iter().zip(&diff).map(|(b, e)| b + e * (cfg.d0 / d)).collect();
        shadow.reset(&pulled)?;
        if t >= cfg.t_total {
            break;
        }
        k += 1;
    }
    if count == 0 {
        return Err(Error::Parameter("no renormalization after the transient".into()));
    }
    Ok(LyapunovEstimate {
        exponent: sum / (count as f64 * cfg.renorm_dt),
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuous::FnField;

    #[test]
    fn linear_fields() {
        let cfg = LyapunovConfig {
            t_total: 50.0,
            transient: 5.0,
            ..Default::default()
        };
        let grow = FnField::new(1, |x: &[f64], dx: &mut [f64]| dx[0] = x[0]);
        let est = largest_lyapunov(&grow, &[0.0], &cfg, &IntegratorConfig::default()).unwrap();
        assert!((est.exponent - 1.0).abs() < 1e-3, "{}", est.exponent);
        let decay = FnField::new(1, |x: &[f64], dx: &mut [f64]| dx[0] = -x[0]);
        let est = largest_lyapunov(&decay, &[0.0], &cfg, &IntegratorConfig::default()).unwrap();
        assert!((est.exponent + 1.0).abs() < 1e-3, "{}", est.exponent);
    }
}
