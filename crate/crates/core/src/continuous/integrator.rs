use super::{FastCoord, Trajectory, VectorField};
use crate::error::{Error, Result};

const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Classic fourth-order Runge-Kutta with a fixed step.
    Rk4,
    /// Dormand-Prince 5(4) with embedded error control.
    Dopri5,
    /// Strang splitting: exact exponential half steps for the fast linear
    /// coordinates around a Dormand-Prince step of the slow ones.
    Dopri5Split,
    /// Fixed-step exponential Runge-Kutta (Cox-Matthews ETDRK4): fast linear
    /// coordinates are propagated with their exact relaxation kernel.
    Etd4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step for `Rk4` and `Etd4`; ignored otherwise.
    pub step: f64,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Dopri5,
            step: 0.01,
            rtol: 1e-9,
            atol: 1e-9,
            max_step: 0.01,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(step: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4,
            step,
            max_step: step,
            ..Default::default()
        }
    }

    pub fn etd4(step: f64) -> Self {
        IntegratorConfig {
            method: Method::Etd4,
            step,
            max_step: step,
            ..Default::default()
        }
    }

    pub fn dopri5(rtol: f64, atol: f64, max_step: f64) -> Self {
        IntegratorConfig {
            method: Method::Dopri5,
            rtol,
            atol,
            max_step,
            ..Default::default()
        }
    }

    /// The default for `field`: the exponential integrator with step `1e-3`
    /// once the fast rate reaches 100, otherwise plain Dormand-Prince with a
    /// step cap that respects the fast rate.
    pub fn for_field<F: VectorField + ?Sized>(field: &F) -> Self {
        let lam = field.max_fast_rate();
        if lam >= 100.0 {
            return IntegratorConfig::etd4(1e-3);
        }
        let mut cfg = IntegratorConfig::default();
        if lam > 0.0 {
            cfg.max_step = cfg.max_step.min(0.5 / lam);
        }
        cfg
    }

    pub fn validate<F: VectorField + ?Sized>(&self, field: &F) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive(self.max_step, "max_step")?;
        match self.method {
            Method::Rk4 | Method::Etd4 => positive(self.step, "step")?,
            Method::Dopri5 | Method::Dopri5Split => {
                positive(self.rtol, "rtol")?;
                positive(self.atol, "atol")?;
            }
        }
        let lam = field.max_fast_rate();
        if lam > 0.0 && !matches!(self.method, Method::Dopri5Split | Method::Etd4) {
            let h = match self.method {
                Method::Rk4 => self.step,
                _ => self.max_step,
            };
            if h > 0.5 / lam * (1.0 + 1e-12) {
                return Err(Error::Parameter(format!(
                    "explicit step {h} exceeds 1/(2 lambda) = {} for fast rate {lam}",
                    0.5 / lam
                )));
            }
        }
        Ok(())
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Single-trajectory integrator that keeps the last step for dense output.
pub struct Stepper<'a, F: VectorField + ?Sized> {
    field: &'a F,
    cfg: IntegratorConfig,
    t: f64,
    x: Vec<f64>,
    fx: Vec<f64>,
    t_prev: f64,
    x_prev: Vec<f64>,
    f_prev: Vec<f64>,
    h: f64,
    fast: Vec<FastCoord>,
    slow: Vec<bool>,
    k: [Vec<f64>; 7],
    y: Vec<f64>,
    x_new: Vec<f64>,
    etd: EtdCache,
    dev_u: Vec<f64>,
    dev_fu: Vec<f64>,
    accepted: usize,
    rejected: usize,
}

impl<'a, F: VectorField + ?Sized> Stepper<'a, F> {
    pub fn new(field: &'a F, cfg: IntegratorConfig, t0: f64, x0: &[f64]) -> Result<Self> {
        let n = field.dim();
        if x0.len() != n {
            return Err(Error::InvalidInput(format!("initial state has {} entries, field dimension is {n}", x0.len())));
        }
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("initial state is not finite".into()));
        }
        cfg.validate(field)?;
        let fast: Vec<FastCoord> = if matches!(cfg.method, Method::Dopri5Split | Method::Etd4) {
            field.fast_coords().to_vec()
        } else {
            Vec::new()
        };
        let mut slow = vec![true; n];
        for f in &fast {
            if f.index >= n || f.rate <= 0.0 {
                return Err(Error::InvalidInput(format!("fast coordinate {} is invalid", f.index)));
            }
            slow[f.index] = false;
        }
        if let Some(f) = fast.iter().find(|f| f.inputs.iter().any(|&(j, _)| j >= n || !slow[j])) {
            return Err(Error::InvalidInput(format!("fast coordinate {} must read only slow coordinates", f.index)));
        }
        let mut fx = vec![0.0; n];
        field.eval(x0, &mut fx)?;
        let h = match cfg.method {
            Method::Rk4 | Method::Etd4 => cfg.step,
            _ => cfg.max_step.min(1e-3),
        };
        Ok(Stepper {
            field,
            cfg,
            t: t0,
            x: x0.to_vec(),
            t_prev: t0,
            x_prev: x0.to_vec(),
            f_prev: fx.clone(),
            fx,
            h,
            fast,
            slow,
            k: std::array::from_fn(|_| vec![0.0; n]),
            y: vec![0.0; n],
            x_new: vec![0.0; n],
            etd: EtdCache::default(),
            dev_u: vec![0.0; n],
            dev_fu: vec![0.0; n],
            accepted: 0,
            rejected: 0,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn derivative(&self) -> &[f64] {
        &self.fx
    }

    pub fn last_step(&self) -> (f64, f64) {
        (self.t_prev, self.t)
    }

    /// Time and state at the start of the last accepted step.
    pub fn previous(&self) -> (f64, &[f64]) {
        (self.t_prev, &self.x_prev)
    }

    pub fn stats(&self) -> (usize, usize) {
        (self.accepted, self.rejected)
    }

    /// Replaces the current state (e.g. after a renormalization).
    pub fn reset(&mut self, x: &[f64]) -> Result<()> {
        self.x.copy_from_slice(x);
        self.field.eval(&self.x, &mut self.fx)?;
        self.t_prev = self.t;
        self.x_prev.copy_from_slice(x);
        self.f_prev.copy_from_slice(&self.fx);
        Ok(())
    }

    /// Advances by one accepted step without passing `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<()> {
        let room = t_limit - self.t;
        if room <= 0.0 {
            return Ok(());
        }
        let h = match self.cfg.method {
            Method::Rk4 => {
                let h = self.cfg.step.min(room);
                self.rk4(h)?;
                h
            }
            Method::Etd4 => {
                let h = self.cfg.step.min(room);
                self.etd4(h)?;
                h
            }
            Method::Dopri5 | Method::Dopri5Split => loop {
                let h = self.h.min(self.cfg.max_step).min(room);
                let (err, worst) = if self.cfg.method == Method::Dopri5 {
                    self.dopri_attempt(h)?
                } else {
                    self.split_attempt(h)?
                };
                if err <= 1.0 {
                    let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    self.h = (h * fac).min(self.cfg.max_step);
                    break h;
                }
                self.rejected += 1;
                self.h = h * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                if self.h < MIN_STEP {
                    if !err.is_finite() {
                        return Err(Error::Divergence {
                            last_good: self.t,
                            detail: format!("component {worst} became non-finite within the step"),
                        });
                    }
                    return Err(Error::Stiffness { coord: worst, t: self.t });
                }
            },
        };
        let t_new = if h == room { t_limit } else { self.t + h };
        let mut f_new = std::mem::take(&mut self.y);
        if self.cfg.method == Method::Dopri5 {
            f_new.copy_from_slice(&self.k[6]);
        } else {
            self.field.eval(&self.x_new, &mut f_new)?;
        }
        if let Some(i) = self.x_new.iter().chain(&f_new).position(|v| !v.is_finite()) {
            self.y = f_new;
            return Err(Error::Divergence {
                last_good: self.t,
                detail: format!("component {} became non-finite", i % self.x.len()),
            });
        }
        std::mem::swap(&mut self.x_prev, &mut self.x);
        std::mem::swap(&mut self.f_prev, &mut self.fx);
        std::mem::swap(&mut self.x, &mut self.x_new);
        std::mem::swap(&mut self.fx, &mut f_new);
        self.y = f_new;
        self.t_prev = self.t;
        self.t = t_new;
        self.accepted += 1;
        Ok(())
    }

    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        while self.t < t_target {
            self.step(t_target)?;
        }
        Ok(())
    }

    /// Cubic Hermite interpolant over the last accepted step.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) {
        let h = self.t - self.t_prev;
        if h <= 0.0 {
            out.copy_from_slice(&self.x);
            return;
        }
        let s = (t - self.t_prev) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        for i in 0..out.len() {
            out[i] = h00 * self.x_prev[i] + h10 * h * self.f_prev[i] + h01 * self.x[i] + h11 * h * self.fx[i];
        }
        if self.cfg.method == Method::Etd4 {
            // A cubic cannot follow a boundary layer thinner than the step, so
            // deviations relax exponentially between the two step ends instead.
            let tau = t - self.t_prev;
            for f in &self.fast {
                let w0 = self.x_prev[f.index] - f.target(&self.x_prev);
                let w1 = self.x[f.index] - f.target(&self.x);
                let a = -(-f.rate * tau).exp_m1();
                let b = -(-f.rate * h).exp_m1();
                let r = if b > 0.0 { a / b } else { s };
                out[f.index] = f.target(out) + w0 * (1.0 - r) + w1 * r;
            }
        }
    }

    fn rk4(&mut self, h: f64) -> Result<()> {
        let n = self.x.len();
        self.k[0].copy_from_slice(&self.fx);
        for (stage, frac) in [(1, 0.5), (2, 0.5), (3, 1.0)] {
            for i in 0..n {
                self.y[i] = self.x[i] + frac * h * self.k[stage - 1][i];
            }
            let (_, rest) = self.k.split_at_mut(stage);
            self.field.eval(&self.y, &mut rest[0])?;
        }
        for i in 0..n {
            self.x_new[i] = self.x[i] + h / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
        Ok(())
    }

    /// ETD coordinates: fast entries become deviations `u_i - target_i(u)`.
    fn to_deviation(fast: &[FastCoord], u: &[f64], w: &mut [f64]) {
        w.copy_from_slice(u);
        for f in fast {
            w[f.index] = u[f.index] - f.target(u);
        }
    }

    fn from_deviation(fast: &[FastCoord], w: &[f64], u: &mut [f64]) {
        u.copy_from_slice(w);
        for f in fast {
            u[f.index] = w[f.index] + f.target(w);
        }
    }

    /// Nonlinear part in deviation coordinates given `F(u)`: the rate of
    /// each deviation without its `-rate * deviation` term.
    fn deviation_rates(fast: &[FastCoord], w: &[f64], fu: &[f64], out: &mut [f64]) {
        out.copy_from_slice(fu);
        for f in fast {
            let drift: f64 = f.inputs.iter().map(|&(j, c)| c * fu[j]).sum();
            out[f.index] = fu[f.index] + f.rate * w[f.index] - drift;
        }
    }

    fn etd_nonlinear(&mut self, w: &[f64], out: &mut [f64]) -> Result<()> {
        let mut u = std::mem::take(&mut self.dev_u);
        let mut fu = std::mem::take(&mut self.dev_fu);
        Self::from_deviation(&self.fast, w, &mut u);
        let r = self.field.eval(&u, &mut fu);
        if r.is_ok() {
            Self::deviation_rates(&self.fast, w, &fu, out);
        }
        self.dev_u = u;
        self.dev_fu = fu;
        r
    }

    fn etd4(&mut self, h: f64) -> Result<()> {
        let mut cache = std::mem::take(&mut self.etd);
        if cache.h != h {
            cache.set_step(&self.fast, self.x.len(), h);
        }
        let mut k = std::mem::take(&mut self.k);
        let res = self.etd4_stages(&cache, &mut k, h);
        self.k = k;
        self.etd = cache;
        res
    }

    fn etd4_stages(&mut self, c: &EtdCache, k: &mut [Vec<f64>; 7], h: f64) -> Result<()> {
        let n = self.x.len();
        let half = 0.5 * h;
        let [nu, na, nb, nc, sa, sb, sc] = k;
        let mut x = std::mem::take(&mut self.y);
        Self::to_deviation(&self.fast, &self.x, &mut x);
        Self::deviation_rates(&self.fast, &x, &self.fx, nu);
        for i in 0..n {
            sa[i] = c.e2[i] * x[i] + half * c.p1h[i] * nu[i];
        }
        let r = (|| {
            self.etd_nonlinear(sa, na)?;
            for i in 0..n {
                sb[i] = c.e2[i] * x[i] + half * c.p1h[i] * na[i];
            }
            self.etd_nonlinear(sb, nb)?;
            for i in 0..n {
                sc[i] = c.e2[i] * sa[i] + half * c.p1h[i] * (2.0 * nb[i] - nu[i]);
            }
            self.etd_nonlinear(sc, nc)?;
            for i in 0..n {
                let [f1, f2, f3] = c.w[i];
                sa[i] = c.e[i] * x[i] + h * (f1 * nu[i] + 2.0 * f2 * (na[i] + nb[i]) + f3 * nc[i]);
            }
            Self::from_deviation(&self.fast, sa, &mut self.x_new);
            Ok(())
        })();
        self.y = x;
        r
    }

    /// Runs the Dormand-Prince stages from `x0` with `k[0]` preset; the
    /// derivative used is `field` with fast coordinates frozen when splitting.
    fn dopri_stages(&mut self, x0: &[f64], h: f64, frozen: bool) -> Result<()> {
        let n = x0.len();
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in A[s].iter().enumerate().take(s) {
                    acc += a * self.k[j][i];
                }
                self.y[i] = x0[i] + h * acc;
            }
            let (_, rest) = self.k.split_at_mut(s);
            if s == 6 {
                self.x_new.copy_from_slice(&self.y);
            }
            self.field.eval(&self.y, &mut rest[0])?;
            if frozen {
                for f in &self.fast {
                    rest[0][f.index] = 0.0;
                }
            }
        }
        Ok(())
    }

    fn error_norm(&self, x0: &[f64], h: f64) -> (f64, usize) {
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut worst = (0.0, 0usize);
        for i in 0..x0.len() {
            if !self.slow[i] {
                continue;
            }
            let mut e = 0.0;
            for (j, c) in E.iter().enumerate() {
                e += c * self.k[j][i];
            }
            let sc = self.cfg.atol + self.cfg.rtol * x0[i].abs().max(self.x_new[i].abs());
            let r = (h * e / sc).abs();
            if !r.is_finite() {
                return (f64::INFINITY, i);
            }
            if r > worst.0 {
                worst = (r, i);
            }
            sum += r * r;
            count += 1;
        }
        if count == 0 {
            return (0.0, 0);
        }
        ((sum / count as f64).sqrt(), worst.1)
    }

    fn dopri_attempt(&mut self, h: f64) -> Result<(f64, usize)> {
        self.k[0].copy_from_slice(&self.fx);
        let x0 = std::mem::take(&mut self.x);
        let r = self.dopri_stages(&x0, h, false);
        let out = r.map(|_| self.error_norm(&x0, h));
        self.x = x0;
        out
    }

    fn relax_fast(fast: &[FastCoord], x: &mut [f64], dt: f64) {
        let targets: Vec<f64> = fast.iter().map(|f| f.target(x)).collect();
        for (f, target) in fast.iter().zip(targets) {
            let decay = (-f.rate * dt).exp();
            x[f.index] = target + (x[f.index] - target) * decay;
        }
    }

    fn split_attempt(&mut self, h: f64) -> Result<(f64, usize)> {
        let mut xa = self.x.clone();
        Self::relax_fast(&self.fast, &mut xa, 0.5 * h);
        self.field.eval(&xa, &mut self.k[0])?;
        for f in &self.fast {
            self.k[0][f.index] = 0.0;
        }
        self.dopri_stages(&xa, h, true)?;
        let err = self.error_norm(&xa, h);
        let mut xb = std::mem::take(&mut self.x_new);
        Self::relax_fast(&self.fast, &mut xb, 0.5 * h);
        self.x_new = xb;
        Ok(err)
    }
}

/// Per-coordinate ETDRK4 weights for one step size.
#[derive(Debug, Clone, Default)]
struct EtdCache {
    h: f64,
    e: Vec<f64>,
    e2: Vec<f64>,
    p1h: Vec<f64>,
    w: Vec<[f64; 3]>,
}

impl EtdCache {
    fn set_step(&mut self, fast: &[FastCoord], n: usize, h: f64) {
        self.h = h;
        self.e = vec![1.0; n];
        self.e2 = vec![1.0; n];
        self.p1h = vec![1.0; n];
        self.w = vec![[1.0 / 6.0; 3]; n];
        for f in fast {
            let z = -f.rate * h;
            let [q0, q1, _, _] = phi(0.5 * z);
            let [p0, p1, p2, p3] = phi(z);
            let i = f.index;
            self.e[i] = p0;
            self.e2[i] = q0;
            self.p1h[i] = q1;
            self.w[i] = [p1 - 3.0 * p2 + 4.0 * p3, p2 - 2.0 * p3, -p2 + 4.0 * p3];
        }
    }
}

/// `[phi_0(z), ..., phi_3(z)]` with `phi_k(z) = sum_n z^n / (n + k)!`.
fn phi(z: f64) -> [f64; 4] {
    if z.abs() < 1.0 {
        let mut out = [0.0; 4];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut term = 1.0 / (1..=k).map(|j| j as f64).product::<f64>();
            let mut sum = term;
            for n in 1..30 {
                term *= z / (n + k) as f64;
                sum += term;
            }
            *slot = sum;
        }
        out
    } else {
        let p0 = z.exp();
        let p1 = (p0 - 1.0) / z;
        let p2 = (p1 - 1.0) / z;
        let p3 = (p2 - 0.5) / z;
        [p0, p1, p2, p3]
    }
}

/// Integrates to `t_end`, recording every accepted step.
pub fn integrate<F: VectorField + ?Sized>(field: &F, x0: &[f64], t_end: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("t_end must be positive, got {t_end}")));
    }
    let mut st = Stepper::new(field, *cfg, 0.0, x0)?;
    let mut traj = Trajectory::new();
    traj.push(0.0, x0.to_vec())?;
    while st.t() < t_end {
        st.step(t_end)?;
        traj.push(st.t(), st.state().to_vec())?;
    }
    Ok(traj)
}

/// Integrates to `t_end`, recording states on the grid `k * dt` plus `t_end`.
pub fn integrate_sampled<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
    dt: f64,
) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("t_end must be positive, got {t_end}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("sample interval must be positive, got {dt}")));
    }
    let mut st = Stepper::new(field, *cfg, 0.0, x0)?;
    let mut traj = Trajectory::new();
    traj.push(0.0, x0.to_vec())?;
    let mut k = 1u64;
    let mut buf = vec![0.0; x0.len()];
    loop {
        let ts = (k as f64 * dt).min(t_end);
        while st.t() < ts {
            st.step(t_end)?;
        }
        while (k as f64 * dt) <= st.t() && (k as f64 * dt) < t_end {
            let tk = k as f64 * dt;
            st.interpolate(tk, &mut buf);
            traj.push(tk, buf.clone())?;
            k += 1;
        }
        if st.t() >= t_end {
            break;
        }
    }
    traj.push(t_end, st.state().to_vec())?;
    Ok(traj)
}
