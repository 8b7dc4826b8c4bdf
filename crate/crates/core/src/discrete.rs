//! Discrete-time multiplier updates: entropic (multiplicative) and Euclidean
//! (projected additive) steps, plus the entropic step floored at 1.

use crate::continuous::Trajectory;
use crate::error::{Error, Result};
use crate::market::{self, ContinuumSegment, Density, MarketInstance};

const M_CAP: f64 = 1e12;
const EXP_CAP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Update {
    Entropic,
    Euclidean,
    TruncatedEntropic,
}

/// Where utilities come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Market(MarketInstance),
    /// Two bidders valuing `[[v, 1], [1, v]]`, tracked through one symmetric
    /// coordinate: `u(m) = v - m`.
    Symmetric { v: f64 },
    /// Two bidders valuing `[[1, 1/k], [1/k, 1]]`: `u(m) = 1 - m/k`.
    Ricker { k: f64 },
    /// One bidder, unit-density segment on `[0, cap]`: `u(m) = m - m^2/2`.
    Logistic { cap: f64 },
}

impl Model {
    /// The market the closed forms are shorthand for.
    pub fn instance(&self) -> MarketInstance {
        match self {
            Model::Market(inst) => inst.clone(),
            Model::Symmetric { v } => MarketInstance::from_valuation_matrix(&[vec![*v, 1.0], vec![1.0, *v]]),
            Model::Ricker { k } => {
                MarketInstance::from_valuation_matrix(&[vec![1.0, 1.0 / k], vec![1.0 / k, 1.0]])
            }
            Model::Logistic { cap } => {
                let mut inst = MarketInstance::new(1);
                inst.add_segment(ContinuumSegment {
                    owners: vec![0],
                    value: 1.0,
                    support: [0.0, *cap],
                    density: Density::Constant { c: 1.0 },
                });
                inst
            }
        }
    }

    /// Number of bidders a state of this model stands for.
    pub fn replicas(&self) -> usize {
        match self {
            Model::Market(_) | Model::Logistic { .. } => 1,
            Model::Symmetric { .. } | Model::Ricker { .. } => 2,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Market(inst) => inst.n_bidders,
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Model::Market(inst) => inst.validate(),
            Model::Symmetric { v } if !(v.is_finite() && *v > 1.0) => {
                Err(Error::Parameter(format!("symmetric family needs v > 1, got {v}")))
            }
            Model::Ricker { k } if !(k.is_finite() && *k > 1.0) => {
                Err(Error::Parameter(format!("Ricker family needs k > 1, got {k}")))
            }
            Model::Logistic { cap } if !(cap.is_finite() && *cap > 0.0) => {
                Err(Error::Parameter(format!("logistic segment needs a positive cap, got {cap}")))
            }
            _ => Ok(()),
        }
    }

    pub fn utilities(&self, m: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Market(inst) => market::utility(inst, m),
            _ => {
                let [x] = m else {
                    return Err(Error::InvalidInput(format!("closed-form model expects 1 state, got {}", m.len())));
                };
                let u = match self {
                    Model::Symmetric { v } => v - x,
                    Model::Ricker { k } => 1.0 - x * (1.0 / k),
                    Model::Logistic { cap } => {
                        let b = x.clamp(0.0, *cap);
                        b - 0.5 * (b * b)
                    }
                    Model::Market(_) => unreachable!(),
                };
                Ok(vec![u])
            }
        }
    }

    /// Welfare and revenue of the full market at the (replicated) state.
    pub fn welfare_revenue(&self, instance: &MarketInstance, m: &[f64]) -> Result<(f64, f64)> {
        let profile: Vec<f64> = match self {
            Model::Market(_) => m.to_vec(),
            _ => vec![m[0]; self.replicas()],
        };
        Ok((market::welfare(instance, &profile)?, market::revenue(instance, &profile)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMap {
    pub update: Update,
    pub eta: f64,
    pub model: Model,
}

impl DiscreteMap {
    pub fn new(update: Update, eta: f64, model: Model) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::Parameter(format!("learning rate must be positive, got {eta}")));
        }
        model.validate()?;
        Ok(DiscreteMap { update, eta, model })
    }

    pub fn step(&self, m: &[f64]) -> Result<Vec<f64>> {
        if m.iter().any(|x| *x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidInput(format!("multipliers must be finite and nonnegative: {m:?}")));
        }
        let u = self.model.utilities(m)?;
        let eta = self.eta;
        let mut out = Vec::with_capacity(m.len());
        for (&mi, &ui) in m.iter().zip(&u) {
            let next = match self.update {
                Update::Euclidean => (mi + eta * ui).max(0.0),
                Update::Entropic | Update::TruncatedEntropic => {
                    if (eta * ui).abs() > EXP_CAP {
                        return Err(Error::Divergence {
                            last_good: f64::NAN,
                            detail: format!("exponent eta*u = {eta}*{ui} exceeds {EXP_CAP}"),
                        });
                    }
                    let e = mi * (eta * ui).exp();
                    if self.update == Update::TruncatedEntropic {
                        e.max(1.0)
                    } else {
                        e
                    }
                }
            };
            if next > M_CAP || !next.is_finite() {
                return Err(Error::Divergence {
                    last_good: f64::NAN,
                    detail: format!("multiplier {next} exceeds {M_CAP} (u = {ui}, eta = {eta})"),
                });
            }
            out.push(next);
        }
        Ok(out)
    }

    /// The scalar map for one-dimensional models.
    pub fn map_1d(&self, m: f64) -> Result<f64> {
        Ok(self.step(&[m])?[0])
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    /// States indexed by step (the trajectory's time axis).
    pub trajectory: Trajectory,
    pub welfare: Vec<f64>,
    pub revenue: Vec<f64>,
    pub mean_welfare: f64,
    pub mean_revenue: f64,
}

impl Orbit {
    /// Writes `step,m0,...[,welfare,revenue]`.
    pub fn write_csv<W: std::io::Write>(&self, w: W, with_market: bool) -> std::io::Result<()> {
        let dim = self.trajectory.dim();
        let mut header = vec!["step".to_string()];
        header.extend((0..dim).map(|i| format!("m{i}")));
        if with_market {
            header.push("welfare".into());
            header.push("revenue".into());
        }
        let rows = self.trajectory.states.iter().enumerate().map(|(k, s)| {
            let mut row = vec![k as f64];
            row.extend_from_slice(s);
            if with_market {
                row.push(self.welfare[k]);
                row.push(self.revenue[k]);
            }
            row
        });
        crate::output::write_csv(w, &header, rows)
    }
}

fn divergence_at(e: Error, step: usize) -> Error {
    match e {
        Error::Divergence { detail, .. } => Error::Divergence {
            last_good: step as f64,
            detail: format!("step {step}: {detail}"),
        },
        other => other,
    }
}

/// Runs `t` steps from `m0`, visiting every state including `m0`.
pub fn walk<F: FnMut(usize, &[f64]) -> Result<()>>(map: &DiscreteMap, m0: &[f64], t: usize, mut visit: F) -> Result<Vec<f64>> {
    let mut m = m0.to_vec();
    visit(0, &m)?;
    for k in 1..=t {
        m = map.step(&m).map_err(|e| divergence_at(e, k - 1))?;
        visit(k, &m)?;
    }
    Ok(m)
}

/// Orbit of length `t + 1` with welfare and revenue averaged over steps `burn_in..=t`.
pub fn iterate(map: &DiscreteMap, m0: &[f64], t: usize, burn_in: usize) -> Result<Orbit> {
    if t <= burn_in {
        return Err(Error::InvalidInput(format!("need T > burn_in, got T = {t}, burn_in = {burn_in}")));
    }
    if m0.len() != map.model.dim() {
        return Err(Error::InvalidInput(format!("initial state has {} entries, model needs {}", m0.len(), map.model.dim())));
    }
    let instance = map.model.instance();
    let mut traj = Trajectory::new();
    let mut welfare = Vec::with_capacity(t + 1);
    let mut revenue = Vec::with_capacity(t + 1);
    let (mut ws, mut rs) = (KahanSum::default(), KahanSum::default());
    walk(map, m0, t, |k, m| {
        let (w, r) = map.model.welfare_revenue(&instance, m)?;
        if k >= burn_in {
            ws.add(w);
            rs.add(r);
        }
        welfare.push(w);
        revenue.push(r);
        traj.push(k as f64, m.to_vec())
    })?;
    let count = (t - burn_in + 1) as f64;
    Ok(Orbit {
        trajectory: traj,
        welfare,
        revenue,
        mean_welfare: ws.value() / count,
        mean_revenue: rs.value() / count,
    })
}

/// Time averages of welfare and revenue without storing the orbit.
pub fn averages(map: &DiscreteMap, m0: &[f64], t: usize, burn_in: usize) -> Result<(f64, f64)> {
    if t <= burn_in {
        return Err(Error::InvalidInput(format!("need T > burn_in, got T = {t}, burn_in = {burn_in}")));
    }
    let instance = map.model.instance();
    let (mut ws, mut rs) = (KahanSum::default(), KahanSum::default());
    walk(map, m0, t, |k, m| {
        if k >= burn_in {
            let (w, r) = map.model.welfare_revenue(&instance, m)?;
            ws.add(w);
            rs.add(r);
        }
        Ok(())
    })?;
    let count = (t - burn_in + 1) as f64;
    Ok((ws.value() / count, rs.value() / count))
}

/// Default burn-in: a fifth of the horizon.
pub fn default_burn_in(t: usize) -> usize {
    t / 5
}
