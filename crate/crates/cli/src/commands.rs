use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use autobid_core::analysis::horseshoe::{
    chua_poincare_config, chua_section, check_with_doubling, horseshoe_augmented, horseshoe_raw_chua, EDGE_NAMES,
};
use autobid_core::analysis::{largest_lyapunov, poincare_map, poincare_returns, HorseshoeReport, LyapunovConfig, Quadrangles};
use autobid_core::chua::{augmented_encoding, augmented_initial, chua_as_target, chua_encoding, AugmentedChua, ChuaField, ChuaParams};
use autobid_core::continuous::{integrate, integrate_sampled, market_field, FnField, IntegratorConfig, Trajectory, VectorField};
use autobid_core::output::{fmt_f64, write_csv};
use autobid_core::reduction::{compile, negation_error_bound, negation_lag, verify_simulation, CompileOptions, TargetSystem, AffineMap};
use clap::{Args, ValueEnum};
use serde::Serialize;

use crate::{emit, files, write_to, VerificationFailed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Exponential integrator for fast rates of 100 and above, else Dormand-Prince.
    Auto,
    Dopri5,
    Rk4,
    Etd4,
}

fn integrator<F: VectorField + ?Sized>(field: &F, method: MethodArg, step: f64, rtol: f64, atol: f64) -> IntegratorConfig {
    match method {
        MethodArg::Auto => IntegratorConfig::for_field(field),
        MethodArg::Dopri5 => IntegratorConfig::dopri5(rtol, atol, step),
        MethodArg::Rk4 => IntegratorConfig::rk4(step),
        MethodArg::Etd4 => IntegratorConfig::etd4(step),
    }
}

fn run_sampled<F: VectorField + ?Sized>(field: &F, x0: &[f64], t_end: f64, cfg: &IntegratorConfig, dt: Option<f64>) -> Result<Trajectory> {
    Ok(match dt {
        Some(dt) => integrate_sampled(field, x0, t_end, cfg, dt)?,
        None => integrate(field, x0, t_end, cfg)?,
    })
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub market: PathBuf,
    /// Initial multipliers (default: all ones).
    #[arg(long, value_delimiter = ',')]
    pub m0: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    /// Sample interval; every accepted step when absent.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    pub method: MethodArg,
    /// Fixed step (rk4, etd4) or step cap (dopri5).
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub atol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let inst = files::load_market(&a.market)?;
    let field = market_field(&inst)?;
    let m0 = if a.m0.is_empty() { vec![1.0; inst.n_bidders] } else { a.m0.clone() };
    let cfg = integrator(&field, a.method, a.step, a.rtol, a.atol);
    let traj = run_sampled(&field, &m0, a.t_end, &cfg, a.dt)?;
    let (t, last) = traj.last().expect("trajectory is nonempty");
    let summary = format!("{} samples, m({t}) = {:?}", traj.len(), last);
    emit(a.out.as_deref(), &summary, |w| traj.write_csv(w))
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// Target system file.
    #[arg(long, conflicts_with_all = ["chua", "negation_lag"])]
    pub target: Option<PathBuf>,
    /// Use Chua's circuit (box-normalized) as the target.
    #[arg(long)]
    pub chua: bool,
    /// Negation rate; derived from `--eps` when absent.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Requested accuracy of the simulated field, in target coordinates.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Quantize continuum segments into reserve-priced items.
    #[arg(long)]
    pub discretize: bool,
    /// Verification start in target coordinates (default: box center, or
    /// (0.1, 0.1, 0.1) with `--chua`).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Vec<f64>,
    #[arg(long, default_value_t = 10.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    pub sample_dt: f64,
    #[arg(long)]
    pub no_verify: bool,
    /// Write the compiled market file here.
    #[arg(long)]
    pub market_out: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Measure the negation gadget's lag for constant-speed input instead.
    #[arg(long)]
    pub negation_lag: bool,
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000")]
    pub lambdas: Vec<f64>,
    /// Input speed for `--negation-lag`.
    #[arg(long, default_value_t = 1.0)]
    pub slope: f64,
    /// Horizon for `--negation-lag`.
    #[arg(long, default_value_t = 0.8)]
    pub lag_t_end: f64,
    /// CSV for `--negation-lag`: `lambda,sup_error,bound`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct ReduceReport {
    lambda: f64,
    eps_requested: Option<f64>,
    eps_measured: Option<f64>,
    worst_time: Option<f64>,
    samples: usize,
    negation_bound: f64,
    quantization_bound: f64,
    n_bidders: usize,
    n_items: usize,
    n_segments: usize,
    primary: Vec<usize>,
    negation: Vec<usize>,
    auxiliary: Vec<usize>,
    encoding: AffineMap,
}

fn default_x0(t: &TargetSystem) -> Vec<f64> {
    let mid: Vec<f64> = t.bounds.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect();
    match (&t.normalized, &t.encoding) {
        (true, Some(enc)) => enc.decode(&mid),
        _ => mid,
    }
}

pub fn reduce(a: ReduceArgs) -> Result<()> {
    if a.negation_lag {
        let mut rows = Vec::with_capacity(a.lambdas.len());
        for &l in &a.lambdas {
            let (sup, _) = negation_lag(l, a.slope, a.lag_t_end)?;
            rows.push([l, sup, negation_error_bound(a.slope, l)]);
        }
        let ok = rows.iter().all(|r| r[1] <= r[2]);
        let summary = format!("negation lag at {} rates, all within bound: {ok}", rows.len());
        let header = ["lambda", "sup_error", "bound"].map(String::from);
        return emit(a.out.as_deref(), &summary, |w| write_csv(w, &header, &rows));
    }
    let target = match (&a.target, a.chua) {
        (Some(p), _) => files::load_target(p)?,
        (None, true) => chua_as_target(),
        (None, false) => bail!("reduce needs --target, --chua or --negation-lag"),
    };
    let opts = CompileOptions {
        lambda: a.lambda,
        eps: a.eps,
        continuum: !a.discretize,
    };
    let compiled = compile(&target, &opts)?;
    if let Some(p) = &a.market_out {
        files::save_market(p, &compiled.instance)?;
    }
    let sim = if a.no_verify {
        None
    } else {
        let x0 = match (a.x0.is_empty(), a.chua) {
            (false, _) => a.x0.clone(),
            (true, true) => vec![0.1; 3],
            (true, false) => default_x0(&target),
        };
        Some(verify_simulation(&compiled, &target, &x0, a.t_end, a.sample_dt)?)
    };
    let report = ReduceReport {
        lambda: compiled.lambda,
        eps_requested: a.eps,
        eps_measured: sim.as_ref().map(|s| s.sup_error),
        worst_time: sim.as_ref().map(|s| s.at_time),
        samples: sim.as_ref().map_or(0, |s| s.samples),
        negation_bound: compiled.negation_bound,
        quantization_bound: compiled.quantization_bound,
        n_bidders: compiled.instance.n_bidders,
        n_items: compiled.instance.items.len(),
        n_segments: compiled.instance.segments.len(),
        primary: compiled.primary.clone(),
        negation: compiled.negation.clone(),
        auxiliary: compiled.auxiliary.clone(),
        encoding: compiled.encode.clone(),
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match &a.report {
        Some(p) => write_to(p, &json)?,
        None => print!("{json}"),
    }
    let summary = format!(
        "compiled {} bidders at lambda = {}, measured field error {}",
        report.n_bidders,
        report.lambda,
        report.eps_measured.map_or("not checked".into(), |e| e.to_string())
    );
    eprintln!("{summary}");
    if let (Some(eps), Some(s)) = (a.eps, &sim) {
        if s.sup_error > eps {
            return Err(VerificationFailed(format!("measured error {} exceeds requested {eps}", s.sup_error)).into());
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
#[group(id = "mode", multiple = false)]
pub struct ChuaMode {
    /// The circuit itself (3 states).
    #[arg(long)]
    pub raw: bool,
    /// The circuit with negation bars (6 states); the default.
    #[arg(long)]
    pub augmented: bool,
    /// The compiled market (one column per bidder).
    #[arg(long)]
    pub compiled: bool,
}

#[derive(Debug, Args)]
pub struct ChuaArgs {
    #[command(flatten)]
    pub mode: ChuaMode,
    #[arg(long, default_value_t = 100.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 100.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0.1,0.1,0.1")]
    pub x0: Vec<f64>,
    /// Write box coordinates (the multipliers' scale) instead of circuit units.
    #[arg(long)]
    pub encoded: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn three(x: &[f64], what: &str) -> Result<()> {
    if x.len() != 3 {
        bail!("{what} needs 3 values, got {}", x.len());
    }
    Ok(())
}

fn encode_rows(traj: &mut Trajectory, enc: &AffineMap) {
    for s in &mut traj.states {
        *s = enc.encode(s);
    }
}

pub fn chua(a: ChuaArgs) -> Result<()> {
    three(&a.x0, "--x0")?;
    let params = ChuaParams::default();
    let traj = if a.mode.raw {
        let field = ChuaField { params };
        let mut t = integrate_sampled(&field, &a.x0, a.t_end, &IntegratorConfig::default(), a.dt)?;
        if a.encoded {
            encode_rows(&mut t, &chua_encoding());
        }
        t
    } else if a.mode.compiled {
        let compiled = compile(&chua_as_target(), &CompileOptions { lambda: Some(a.lambda), ..Default::default() })?;
        let field = compiled.field();
        integrate_sampled(&field, &compiled.initial_state(&a.x0), a.t_end, &IntegratorConfig::for_field(&field), a.dt)?
    } else {
        let field = AugmentedChua::new(params, a.lambda)?;
        let mut t = integrate_sampled(&field, &augmented_initial(&a.x0), a.t_end, &IntegratorConfig::for_field(&field), a.dt)?;
        if a.encoded {
            encode_rows(&mut t, &augmented_encoding());
        }
        t
    };
    let bounds: Vec<String> = traj.bounds().iter().map(|(lo, hi)| format!("[{lo:.4}, {hi:.4}]")).collect();
    let summary = format!("{} samples, ranges {}", traj.len(), bounds.join(" "));
    emit(a.out.as_deref(), &summary, |w| traj.write_csv(w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum System {
    ChuaRaw,
    ChuaAugmented,
    /// dx/dt = x, exponent +1.
    LinearGrow,
    /// dx/dt = -x, exponent -1.
    LinearDecay,
}

#[derive(Debug, Args)]
pub struct LyapunovArgs {
    #[arg(long, value_enum, default_value_t = System::ChuaAugmented)]
    pub system: System,
    #[arg(long, default_value_t = 100.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub d0: f64,
    #[arg(long, default_value_t = 0.5)]
    pub renorm_dt: f64,
    #[arg(long, default_value_t = 2000.0)]
    pub t_total: f64,
    #[arg(long, default_value_t = 200.0)]
    pub transient: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Circuit start (bars lifted to `3 - partner`).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0.1,0.1,0.1")]
    pub x0: Vec<f64>,
    /// Write `t,running_estimate`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn lyapunov(a: LyapunovArgs) -> Result<()> {
    let cfg = LyapunovConfig {
        d0: a.d0,
        renorm_dt: a.renorm_dt,
        t_total: a.t_total,
        transient: a.transient,
        seed: a.seed,
    };
    let est = match a.system {
        System::ChuaRaw => {
            three(&a.x0, "--x0")?;
            largest_lyapunov(&ChuaField { params: ChuaParams::default() }, &a.x0, &cfg, &IntegratorConfig::default())?
        }
        System::ChuaAugmented => {
            three(&a.x0, "--x0")?;
            let field = AugmentedChua::new(ChuaParams::default(), a.lambda)?;
            largest_lyapunov(&field, &augmented_initial(&a.x0), &cfg, &IntegratorConfig::for_field(&field))?
        }
        System::LinearGrow | System::LinearDecay => {
            let s = if a.system == System::LinearGrow { 1.0 } else { -1.0 };
            let field = FnField::new(1, move |x: &[f64], dx: &mut [f64]| dx[0] = s * x[0]);
            largest_lyapunov(&field, &[0.0], &cfg, &IntegratorConfig::default())?
        }
    };
    println!("largest Lyapunov exponent {}", fmt_f64(est.exponent));
    if let Some(p) = &a.out {
        let rows: Vec<[f64; 2]> = est.series.iter().map(|&(t, e)| [t, e]).collect();
        let mut w = std::io::BufWriter::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?);
        write_csv(&mut w, &["t", "running_estimate"].map(String::from), &rows)?;
        w.flush()?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChuaSystem {
    ChuaRaw,
    ChuaAugmented,
}

/// The return-map ingredients for one of the two circuit forms.
struct ReturnSetup {
    field: Box<dyn VectorField>,
    cfg: IntegratorConfig,
    augmented: bool,
}

impl ReturnSetup {
    fn new(system: ChuaSystem, lambda: f64) -> Result<Self> {
        let params = ChuaParams::default();
        Ok(match system {
            ChuaSystem::ChuaRaw => ReturnSetup {
                field: Box::new(ChuaField { params }),
                cfg: chua_poincare_config(),
                augmented: false,
            },
            ChuaSystem::ChuaAugmented => {
                let f = AugmentedChua::new(params, lambda)?;
                let cfg = IntegratorConfig::for_field(&f);
                ReturnSetup {
                    field: Box::new(f),
                    cfg,
                    augmented: true,
                }
            }
        })
    }

    fn lift(&self, x: &[f64]) -> Vec<f64> {
        if self.augmented {
            augmented_initial(x)
        } else {
            x.to_vec()
        }
    }
}

#[derive(Debug, Args)]
pub struct PoincareArgs {
    #[arg(long, value_enum, default_value_t = ChuaSystem::ChuaRaw)]
    pub system: ChuaSystem,
    #[arg(long, default_value_t = 1000.0)]
    pub lambda: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0.1,0.1,0.1")]
    pub x0: Vec<f64>,
    /// Number of successive returns.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Map this many samples of each quadrangle edge instead; writes
    /// `edge,y0,z0,y1,z1,region`.
    #[arg(long)]
    pub edge_samples: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn poincare(a: PoincareArgs) -> Result<()> {
    let setup = ReturnSetup::new(a.system, a.lambda)?;
    let section = chua_section();
    if let Some(n) = a.edge_samples {
        let quads = Quadrangles::default();
        let mut lines = Vec::new();
        let mut outside = 0;
        for (e, name) in EDGE_NAMES.iter().enumerate() {
            for p in quads.edge_samples(e, n) {
                let r = poincare_map(setup.field.as_ref(), &setup.cfg, &section, &setup.lift(&[1.0, p[0], p[1]]))?;
                let region = quads.classify([r.point[0], r.point[1]]);
                outside += (region == autobid_core::analysis::Region::OutsideP) as usize;
                lines.push(format!(
                    "{name},{},{},{},{},{region}",
                    fmt_f64(p[0]),
                    fmt_f64(p[1]),
                    fmt_f64(r.point[0]),
                    fmt_f64(r.point[1])
                ));
            }
        }
        let summary = format!("{} edge images, {outside} outside the strip", lines.len());
        return emit(a.out.as_deref(), &summary, |w| {
            writeln!(w, "edge,y0,z0,y1,z1,region")?;
            lines.iter().try_for_each(|l| writeln!(w, "{l}"))
        });
    }
    three(&a.x0, "--x0")?;
    let rets = poincare_returns(setup.field.as_ref(), &setup.cfg, &section, &setup.lift(&a.x0), a.n)?;
    let rows: Vec<[f64; 4]> = rets.iter().enumerate().map(|(k, r)| [k as f64, r.tau, r.point[0], r.point[1]]).collect();
    let summary = format!("{} returns to x = 1", rows.len());
    emit(a.out.as_deref(), &summary, |w| write_csv(w, &["n", "tau", "y", "z"].map(String::from), &rows))
}

#[derive(Debug, Args)]
pub struct HorseshoeArgs {
    #[arg(long, value_enum, default_value_t = ChuaSystem::ChuaRaw)]
    pub system: ChuaSystem,
    #[arg(long, default_value_t = 1000.0)]
    pub lambda: f64,
    /// Samples per quadrangle edge.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Also rerun with twice the samples and report whether any verdict moved.
    #[arg(long)]
    pub double: bool,
    /// Run the augmented test at each of these rates instead.
    #[arg(long, value_delimiter = ',')]
    pub scan: Option<Vec<f64>>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Exit with status 4 unless the precondition holds.
    #[arg(long)]
    pub require: bool,
}

pub fn horseshoe(a: HorseshoeArgs) -> Result<()> {
    let params = ChuaParams::default();
    let (text, passed) = if let Some(lambdas) = &a.scan {
        let mut text = format!("samples_per_edge {}\n", a.samples);
        let mut smallest = None;
        for &l in lambdas {
            let verdict = match horseshoe_augmented(&params, l, a.samples) {
                Ok(r) => r.precondition_satisfied.to_string(),
                Err(e) => format!("false ({e})"),
            };
            if verdict == "true" && smallest.is_none_or(|s| l < s) {
                smallest = Some(l);
            }
            text += &format!("lambda {} precondition_satisfied {verdict}\n", l);
        }
        text += &match smallest {
            Some(l) => format!("smallest_passing_lambda {l}\n"),
            None => "smallest_passing_lambda none\n".into(),
        };
        (text, smallest.is_some())
    } else {
        let run = |n: usize| -> autobid_core::Result<HorseshoeReport> {
            match a.system {
                ChuaSystem::ChuaRaw => horseshoe_raw_chua(&params, n),
                ChuaSystem::ChuaAugmented => horseshoe_augmented(&params, a.lambda, n),
            }
        };
        let (report, flipped) = if a.double {
            let (r, f) = check_with_doubling(run, a.samples)?;
            (r, Some(f))
        } else {
            (run(a.samples)?, None)
        };
        let mut text = report.to_string();
        if let Some(f) = flipped {
            text += &format!("stable_under_doubling {}\n", !f);
        }
        let ok = report.precondition_satisfied && flipped != Some(true);
        (text, ok)
    };
    match &a.report {
        Some(p) => {
            write_to(p, &text)?;
            println!("horseshoe precondition satisfied: {passed}");
        }
        None => print!("{text}"),
    }
    if a.require && !passed {
        return Err(VerificationFailed("horseshoe precondition not satisfied".into()).into());
    }
    Ok(())
}
