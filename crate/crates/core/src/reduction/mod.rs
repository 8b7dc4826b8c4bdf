//! Compiles systems `dx_i/dt = sum_j A_ij x_j + h_i(x_i)` into autobidding
//! markets whose multiplier flow reproduces them on a projection.

pub mod gadgets;

use serde::{Deserialize, Serialize};

use crate::continuous::{integrate_sampled, FastCoord, IntegratorConfig, MarketField, Trajectory, VectorField};
use crate::error::{Error, Result};
use crate::func::ScalarFn;
use crate::market::{self, MarketInstance};
use gadgets::{GADGET_HI, GADGET_LO, PEG_LEVEL};

pub const BOX_LO: f64 = 1.1;
pub const BOX_HI: f64 = 1.9;

const LIPSCHITZ_SAMPLES: usize = 100_000;
const SAFETY: f64 = 1.05;

/// Per-coordinate affine map `X = offset + scale * x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl AffineMap {
    pub fn identity(d: usize) -> Self {
        AffineMap {
            offset: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    /// Sends each `[lo, hi]` onto `[BOX_LO, BOX_HI]`.
    pub fn onto_box(bounds: &[[f64; 2]]) -> Self {
        let scale: Vec<f64> = bounds.iter().map(|[lo, hi]| (BOX_HI - BOX_LO) / (hi - lo)).collect();
        let offset = bounds.iter().zip(&scale).map(|([lo, _], s)| BOX_LO - s * lo).collect();
        AffineMap { offset, scale }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.offset).zip(&self.scale).map(|((x, o), s)| o + s * x).collect()
    }

    pub fn decode(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.offset).zip(&self.scale).map(|((y, o), s)| (y - o) / s).collect()
    }

    /// `self` applied after `inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        let scale = self.scale.iter().zip(&inner.scale).map(|(a, b)| a * b).collect();
        let offset = self
            .offset
            .iter()
            .zip(&self.scale)
            .zip(&inner.offset)
            .map(|((o, s), io)| o + s * io)
            .collect();
        AffineMap { offset, scale }
    }
}

/// `dx_i/dt = sum_j a[i][j] x_j + h[i](x_i)` on the box `bounds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSystem {
    pub dimension: usize,
    pub a: Vec<Vec<f64>>,
    pub h: Vec<ScalarFn>,
    pub bounds: Vec<[f64; 2]>,
    /// Bound on `|h_i'|`; estimated by sampling when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default)]
    pub normalized: bool,
    /// For normalized systems built from another one: the map from those
    /// original coordinates into the box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoding: Option<AffineMap>,
}

impl TargetSystem {
    pub fn new(a: Vec<Vec<f64>>, h: Vec<ScalarFn>, bounds: Vec<[f64; 2]>) -> Self {
        TargetSystem {
            dimension: a.len(),
            a,
            h,
            bounds,
            lipschitz: None,
            normalized: false,
            encoding: None,
        }
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.dimension {
            let lin: f64 = self.a[i].iter().zip(x).map(|(a, x)| a * x).sum();
            out[i] = lin + self.h[i].eval(x[i]);
        }
    }

    pub fn field(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension];
        self.eval(x, &mut out);
        out
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension;
        let bad = |m: String| Err(Error::InvalidInput(format!("target system: {m}")));
        if d == 0 {
            return bad("dimension must be positive".into());
        }
        if self.a.len() != d || self.a.iter().any(|r| r.len() != d) {
            return bad(format!("matrix must be {d} x {d}"));
        }
        if self.a.iter().flatten().any(|v| !v.is_finite()) {
            return bad("matrix entries must be finite".into());
        }
        if self.h.len() != d || self.bounds.len() != d {
            return bad(format!("need {d} nonlinearities and {d} bounds"));
        }
        for h in &self.h {
            h.validate()?;
        }
        for (i, [lo, hi]) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::UnsupportedTarget(format!("coordinate {i} is unbounded")));
            }
            if lo >= hi {
                return bad(format!("coordinate {i}: empty box [{lo}, {hi}]"));
            }
        }
        if let Some(l) = self.lipschitz {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::UnsupportedTarget(format!("derivative bound {l} is not a finite nonnegative number")));
            }
        }
        if self.normalized {
            if self.bounds.iter().any(|b| *b != [BOX_LO, BOX_HI]) {
                return bad(format!("normalized systems live on [{BOX_LO}, {BOX_HI}] in every coordinate"));
            }
            for (i, h) in self.h.iter().enumerate() {
                let top = h.max_slope(BOX_LO, BOX_HI, 10_001);
                if top >= 0.0 {
                    return bad(format!("normalized nonlinearity {i} must be strictly decreasing (max slope {top})"));
                }
            }
        }
        Ok(())
    }

    /// The derivative bound `L`, from the field or by dense sampling.
    pub fn derivative_bound(&self) -> Result<f64> {
        if let Some(l) = self.lipschitz {
            return Ok(l);
        }
        let mut l: f64 = 0.0;
        for (h, [lo, hi]) in self.h.iter().zip(&self.bounds) {
            l = l.max(h.max_abs_slope(*lo, *hi, LIPSCHITZ_SAMPLES));
        }
        if !l.is_finite() {
            return Err(Error::UnsupportedTarget("nonlinearity is not Lipschitz on its box".into()));
        }
        Ok(l * SAFETY)
    }
}

/// Rewrites `dx/dt = A x + h(x)` in coordinates `X = enc(x)`. Constant
/// offsets produced by the shift are absorbed into the nonlinearities.
pub fn conjugate(a: &[Vec<f64>], h: &[ScalarFn], enc: &AffineMap) -> (Vec<Vec<f64>>, Vec<ScalarFn>) {
    let d = a.len();
    let (o, s) = (&enc.offset, &enc.scale);
    let at = (0..d)
        .map(|i| (0..d).map(|j| s[i] * a[i][j] / s[j]).collect())
        .collect();
    let ht = (0..d)
        .map(|i| {
            let shift: f64 = (0..d).map(|j| s[i] * a[i][j] * o[j] / s[j]).sum();
            ScalarFn::transformed(h[i].clone(), o[i], s[i], s[i], 0.0, -shift)
        })
        .collect();
    (at, ht)
}

/// Affine change of variables into `[1.1, 1.9]^d`, then `(L + 1) x_i` moved
/// from each nonlinearity into the diagonal so every `h_i` is decreasing.
pub fn normalize(target: &TargetSystem) -> Result<(TargetSystem, AffineMap)> {
    target.validate()?;
    if target.normalized {
        let enc = AffineMap::identity(target.dimension);
        return Ok((target.clone(), enc));
    }
    let l = target.derivative_bound()?;
    let enc = AffineMap::onto_box(&target.bounds);
    let (mut at, ht) = conjugate(&target.a, &target.h, &enc);
    let ht = ht.into_iter().map(|h| h.plus_affine(-(l + 1.0), 0.0)).collect();
    for (i, row) in at.iter_mut().enumerate() {
        row[i] += l + 1.0;
    }
    let out = TargetSystem {
        dimension: target.dimension,
        a: at,
        h: ht,
        bounds: vec![[BOX_LO, BOX_HI]; target.dimension],
        lipschitz: Some(l + 1.0 + l),
        normalized: true,
        encoding: Some(enc.clone()),
    };
    Ok((out, enc))
}

/// Sup-norm bound on `|m_bar - (3 - m)|` for inputs moving at speed at most `l`.
pub fn negation_error_bound(l: f64, lambda: f64) -> f64 {
    if l == 0.0 {
        return 0.0;
    }
    if 2.0 * lambda <= l {
        return f64::INFINITY;
    }
    (l / lambda) * ((2.0 * lambda / l).ln() + 1.0)
}

/// Upper bounds on `|dX_i/dt|` over the gadget range for a normalized system.
pub fn speed_bounds(norm: &TargetSystem) -> Vec<f64> {
    let d = norm.dimension;
    let mid = 0.5 * (GADGET_LO + GADGET_HI);
    let half = 0.5 * (GADGET_HI - GADGET_LO);
    (0..d)
        .map(|i| {
            let off: f64 = (0..d).filter(|&j| j != i).map(|j| norm.a[i][j] * mid).sum();
            let spread: f64 = (0..d).filter(|&j| j != i).map(|j| norm.a[i][j].abs() * half).sum();
            let n = 10_001;
            let own = (0..n)
                .map(|k| {
                    let x = GADGET_LO + (GADGET_HI - GADGET_LO) * k as f64 / (n - 1) as f64;
                    (norm.h[i].eval(x) + norm.a[i][i] * x + off).abs()
                })
                .fold(0.0, f64::max);
            (own + spread) * SAFETY
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompileOptions {
    /// Negation rate; chosen from `eps` when absent.
    pub lambda: Option<f64>,
    /// Requested field accuracy, in the target's own coordinates.
    pub eps: Option<f64>,
    /// Exact continuum segments (true) or reserve-priced item quantization.
    pub continuum: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            lambda: None,
            eps: None,
            continuum: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledMarket {
    pub instance: MarketInstance,
    pub lambda: f64,
    pub primary: Vec<usize>,
    pub negation: Vec<usize>,
    pub auxiliary: Vec<usize>,
    /// Map from the target's coordinates to primary multipliers.
    pub encode: AffineMap,
    /// Normalized system realized by the primary multipliers.
    pub normalized: TargetSystem,
    /// Predicted sup field error from negation lag, in target coordinates.
    pub negation_bound: f64,
    /// Sup error of item quantization per primary coordinate (0 in continuum mode).
    pub quantization_bound: f64,
}

impl CompiledMarket {
    pub fn dim(&self) -> usize {
        self.primary.len()
    }

    /// Full multiplier vector for target state `x0`, negations at `3 - m`.
    pub fn initial_state(&self, x0: &[f64]) -> Vec<f64> {
        let m = self.encode.encode(x0);
        let mut out = vec![0.0; self.instance.n_bidders];
        for (k, (&p, &n)) in self.primary.iter().zip(&self.negation).enumerate() {
            out[p] = m[k];
            out[n] = 3.0 - m[k];
        }
        for &a in &self.auxiliary {
            out[a] = PEG_LEVEL;
        }
        out
    }

    pub fn decode(&self, m: &[f64]) -> Vec<f64> {
        let prim: Vec<f64> = self.primary.iter().map(|&p| m[p]).collect();
        self.encode.decode(&prim)
    }

    pub fn fast_coords(&self) -> Vec<FastCoord> {
        self.primary
            .iter()
            .zip(&self.negation)
            .map(|(&p, &n)| FastCoord::negation(n, p, self.lambda))
            .collect()
    }

    pub fn field(&self) -> MarketField {
        MarketField::new(self.instance.clone()).with_fast(self.fast_coords())
    }

    /// Velocity of the projected state in target coordinates.
    pub fn projected_rates(&self, m: &[f64]) -> Result<Vec<f64>> {
        let u = market::utility(&self.instance, m)?;
        Ok(self
            .primary
            .iter()
            .zip(&self.encode.scale)
            .map(|(&p, s)| u[p] / s)
            .collect())
    }

    pub fn negation_error_bound(&self) -> f64 {
        self.negation_bound
    }
}

fn predicted_error(norm: &TargetSystem, scale: &[f64], speeds: &[f64], lambda: f64) -> f64 {
    let d = norm.dimension;
    let delta: Vec<f64> = speeds.iter().map(|&l| negation_error_bound(l, lambda)).collect();
    (0..d)
        .map(|i| {
            let s: f64 = (0..d)
                .filter(|&j| norm.a[i][j] > 0.0)
                .map(|j| norm.a[i][j] * delta[j])
                .sum();
            s / scale[i]
        })
        .fold(0.0, f64::max)
}

/// Smallest rate whose predicted negation error is at most `eps`.
pub fn minimal_lambda(norm: &TargetSystem, scale: &[f64], eps: f64) -> f64 {
    let speeds = speed_bounds(norm);
    let f = |lam: f64| predicted_error(norm, scale, &speeds, lam);
    if f(1.0) <= eps {
        return 1.0;
    }
    let mut hi = 2.0;
    while f(hi) > eps {
        hi *= 2.0;
        if hi > 1e15 {
            return f64::INFINITY;
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if f(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-12 {
            break;
        }
    }
    hi
}

pub fn compile(target: &TargetSystem, opts: &CompileOptions) -> Result<CompiledMarket> {
    let (norm, enc) = normalize(target)?;
    let d = norm.dimension;
    let full_enc = match (&target.normalized, &target.encoding) {
        (true, Some(e)) => e.clone(),
        _ => enc,
    };
    let speeds = speed_bounds(&norm);
    let (eps_neg, eps_quant) = match (opts.eps, opts.continuum) {
        (Some(e), true) => (Some(e), f64::INFINITY),
        (Some(e), false) => (Some(0.5 * e), 0.5 * e),
        (None, _) => (None, f64::INFINITY),
    };
    if let Some(e) = opts.eps {
        if !(e > 0.0) {
            return Err(Error::Parameter(format!("tolerance must be positive, got {e}")));
        }
    }
    let lambda = match (opts.lambda, eps_neg) {
        (Some(l), Some(e)) => {
            let err = predicted_error(&norm, &full_enc.scale, &speeds, l);
            if err > e {
                return Err(Error::EpsilonUnachievable {
                    eps: e,
                    lambda: l,
                    min_lambda: minimal_lambda(&norm, &full_enc.scale, e),
                });
            }
            l
        }
        (Some(l), None) => l,
        (None, Some(e)) => {
            let lmin = minimal_lambda(&norm, &full_enc.scale, e);
            if !lmin.is_finite() {
                return Err(Error::EpsilonUnachievable {
                    eps: e,
                    lambda: f64::INFINITY,
                    min_lambda: lmin,
                });
            }
            lmin.max(100.0)
        }
        (None, None) => 100.0,
    };

    let mut inst = MarketInstance::new(d);
    let primary: Vec<usize> = (0..d).collect();
    let mut negation = Vec::with_capacity(d);
    for &p in &primary {
        negation.push(gadgets::build_negation_gadget(&mut inst, lambda, p)?);
    }
    let mut offdiag = norm.a.clone();
    let mut h = norm.h.clone();
    for i in 0..d {
        if offdiag[i][i] < 0.0 {
            h[i] = h[i].clone().plus_affine(offdiag[i][i], 0.0);
            offdiag[i][i] = 0.0;
        }
    }
    let mut constants = gadgets::build_linear_gadgets(&mut inst, &offdiag, &primary, &negation);
    let quant_scale = full_enc.scale.iter().cloned().fold(f64::INFINITY, f64::min);
    for i in 0..d {
        if opts.continuum {
            inst.add_segment(gadgets::build_nonlinear_gadget(&h[i], primary[i])?);
        } else {
            gadgets::discretize_nonlinear_gadget(&mut inst, &h[i], primary[i], eps_quant * quant_scale)?;
        }
        constants[i] += h[i].eval(GADGET_LO);
    }
    let mut peg = None;
    for i in 0..d {
        gadgets::build_constant_gadget(&mut inst, primary[i], constants[i], &mut peg);
    }
    inst.validate()?;
    Ok(CompiledMarket {
        negation_bound: predicted_error(&norm, &full_enc.scale, &speeds, lambda),
        quantization_bound: if opts.continuum { 0.0 } else { eps_quant },
        instance: inst,
        lambda,
        primary,
        negation,
        auxiliary: peg.into_iter().collect(),
        encode: full_enc,
        normalized: norm,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    /// Largest max-norm discrepancy between projected and target velocities.
    pub sup_error: f64,
    pub at_time: f64,
    pub samples: usize,
}

/// Integrates the compiled market from target state `x0` and compares its
/// projected velocity with the target field at every sample.
pub fn verify_simulation(
    compiled: &CompiledMarket,
    target: &TargetSystem,
    x0: &[f64],
    t_end: f64,
    sample_dt: f64,
) -> Result<SimulationReport> {
    if x0.len() != compiled.dim() {
        return Err(Error::InvalidInput(format!("x0 has {} entries for a {}-dimensional target", x0.len(), compiled.dim())));
    }
    let field = compiled.field();
    let cfg = IntegratorConfig::for_field(&field);
    let m0 = compiled.initial_state(x0);
    let watched: Vec<usize> = compiled.primary.iter().chain(&compiled.negation).copied().collect();
    if let Some(&i) = watched.iter().find(|&&i| !(GADGET_LO..=GADGET_HI).contains(&m0[i])) {
        return Err(Error::InvalidInput(format!("x0 maps outside the gadget range (multiplier {i} = {})", m0[i])));
    }
    let traj = integrate_sampled(&field, &m0, t_end, &cfg, sample_dt)?;
    let mut report = SimulationReport {
        sup_error: 0.0,
        at_time: 0.0,
        samples: 0,
    };
    let mut du = vec![0.0; field.dim()];
    for (t, m) in traj.times.iter().zip(&traj.states) {
        if let Some(&i) = watched.iter().find(|&&i| !(GADGET_LO..=GADGET_HI).contains(&m[i])) {
            return Err(Error::BoxEscape {
                time: *t,
                coord: i,
                sup_error: report.sup_error,
            });
        }
        field.eval(m, &mut du)?;
        let x = compiled.decode(m);
        let want = target_rates(target, compiled, &x);
        for (k, &p) in compiled.primary.iter().enumerate() {
            let got = du[p] / compiled.encode.scale[k];
            let e = (got - want[k]).abs();
            if e > report.sup_error {
                report.sup_error = e;
                report.at_time = *t;
            }
        }
        report.samples += 1;
    }
    Ok(report)
}

/// Drives one negation gadget with an input moving at constant speed `slope`
/// (an uncontested item) from `m = 1.05`, bar at `3 - m`, and returns
/// `sup_t |m_bar - (3 - m)|` over `[0, t_end]` sampled every `t_end / 2000`.
pub fn negation_lag(lambda: f64, slope: f64, t_end: f64) -> Result<(f64, Trajectory)> {
    if !(slope > 0.0 && slope.is_finite()) {
        return Err(Error::Parameter(format!("input speed must be positive, got {slope}")));
    }
    if GADGET_LO + slope * t_end > GADGET_HI {
        return Err(Error::Parameter(format!("input leaves the gadget range before t = {t_end}")));
    }
    let mut inst = MarketInstance::new(1);
    let bar = gadgets::build_negation_gadget(&mut inst, lambda, 0)?;
    inst.add_item(&[(0, slope)], None);
    let field = MarketField::new(inst).with_fast(vec![FastCoord::negation(bar, 0, lambda)]);
    let cfg = IntegratorConfig::for_field(&field);
    let traj = integrate_sampled(&field, &[GADGET_LO, 3.0 - GADGET_LO], t_end, &cfg, t_end / 2000.0)?;
    let sup = traj.states.iter().map(|m| (m[bar] - (3.0 - m[0])).abs()).fold(0.0, f64::max);
    Ok((sup, traj))
}

/// Target velocity at target state `x`, in target coordinates.
fn target_rates(target: &TargetSystem, compiled: &CompiledMarket, x: &[f64]) -> Vec<f64> {
    match (&target.normalized, &target.encoding) {
        (true, Some(enc)) => {
            let v = target.field(&enc.encode(x));
            v.iter().zip(&enc.scale).map(|(v, s)| v / s).collect()
        }
        _ => {
            let _ = compiled;
            target.field(x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_normalization_slope() {
        let t = TargetSystem {
            lipschitz: Some(1.0),
            ..TargetSystem::new(vec![vec![0.0]], vec![ScalarFn::Sine { amp: 1.0, freq: 1.0, phase: 0.0 }], vec![[-2.0, 2.0]])
        };
        let (n, enc) = normalize(&t).unwrap();
        assert_eq!(n.a[0][0], 2.0);
        for k in 0..=100 {
            let x = -2.0 + 4.0 * k as f64 / 100.0;
            let big_x = enc.encode(&[x])[0];
            let slope = n.h[0].deriv(big_x);
            assert!((slope - (x.cos() - 2.0)).abs() < 1e-12);
            assert!((-3.0..=-1.0).contains(&slope));
        }
    }

    #[test]
    fn normalization_is_conjugacy() {
        let t = TargetSystem::new(
            vec![vec![-0.3, 1.2], vec![-0.7, 0.1]],
            vec![ScalarFn::Tanh { amp: 0.5, scale: 0.8 }, ScalarFn::Sine { amp: 0.2, freq: 3.0, phase: 0.1 }],
            vec![[-1.0, 3.0], [-0.5, 0.5]],
        );
        let (n, enc) = normalize(&t).unwrap();
        for x in [[0.0, 0.0], [2.5, -0.4], [-0.9, 0.3]] {
            let raw = t.field(&x);
            let big = n.field(&enc.encode(&x));
            for k in 0..2 {
                assert!((big[k] - enc.scale[k] * raw[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalized_is_idempotent() {
        let t = TargetSystem {
            normalized: true,
            ..TargetSystem::new(vec![vec![-1.0]], vec![ScalarFn::Linear { slope: -0.5, intercept: 0.0 }], vec![[BOX_LO, BOX_HI]])
        };
        let (n, enc) = normalize(&t).unwrap();
        assert_eq!(n, t);
        assert_eq!(enc, AffineMap::identity(1));
    }

    #[test]
    fn unbounded_rejected() {
        let t = TargetSystem::new(vec![vec![-1.0]], vec![ScalarFn::Zero], vec![[f64::NEG_INFINITY, 1.0]]);
        assert!(matches!(normalize(&t), Err(Error::UnsupportedTarget(_))));
    }

    #[test]
    fn competitive_system_compiles_exactly() {
        let t = TargetSystem {
            normalized: true,
            ..TargetSystem::new(vec![vec![-1.0]], vec![ScalarFn::Linear { slope: -1e-3, intercept: 3.0 }], vec![[BOX_LO, BOX_HI]])
        };
        let c = compile(&t, &CompileOptions::default()).unwrap();
        for k in 0..=50 {
            let x = BOX_LO + 0.8 * k as f64 / 50.0;
            let m = c.initial_state(&[x]);
            let got = c.projected_rates(&m).unwrap()[0];
            assert!((got - t.field(&[x])[0]).abs() < 1e-13);
        }
        assert_eq!(c.negation_bound, 0.0);
    }

    #[test]
    fn epsilon_check_reports_minimal_lambda() {
        let t = TargetSystem {
            normalized: true,
            ..TargetSystem::new(
                vec![vec![0.0, 1.0], vec![-1.0, 0.0]],
                vec![ScalarFn::Linear { slope: -1.0, intercept: 1.5 }, ScalarFn::Linear { slope: -1.0, intercept: 3.0 }],
                vec![[BOX_LO, BOX_HI]; 2],
            )
        };
        let err = compile(&t, &CompileOptions { lambda: Some(10.0), eps: Some(1e-3), continuum: true }).unwrap_err();
        let Error::EpsilonUnachievable { min_lambda, .. } = err else { panic!("{err:?}") };
        let ok = compile(&t, &CompileOptions { lambda: Some(min_lambda * 1.001), eps: Some(1e-3), continuum: true }).unwrap();
        assert!(ok.negation_bound <= 1e-3);
        let auto = compile(&t, &CompileOptions { lambda: None, eps: Some(1e-3), continuum: true }).unwrap();
        assert!((auto.lambda - min_lambda.max(100.0)).abs() < 1e-6 * auto.lambda);
    }

    #[test]
    fn negation_lag_within_bound() {
        let mut last = f64::INFINITY;
        for lam in [10.0, 100.0, 1000.0] {
            let (sup, _) = negation_lag(lam, 1.0, 0.85).unwrap();
            assert!(sup <= negation_error_bound(1.0, lam));
            assert!((sup - (1.0 - (-0.85 * lam).exp()) / lam).abs() < 1e-6 / lam, "{sup}");
            assert!(sup < last);
            last = sup;
        }
    }

    #[test]
    fn affine_round_trip() {
        let enc = AffineMap::onto_box(&[[-2.5, 2.5], [-0.45, 0.45], [-9.5, 9.5]]);
        assert_eq!(enc.encode(&[-2.5, -0.45, -9.5]).iter().map(|v| (v * 1e12).round() / 1e12).collect::<Vec<_>>(), vec![1.1, 1.1, 1.1]);
        let x = [0.3, -0.2, 7.7];
        let back = enc.decode(&enc.encode(&x));
        for k in 0..3 {
            assert!((back[k] - x[k]).abs() < 1e-12);
        }
    }
}
