use std::path::PathBuf;

use anyhow::{bail, Result};
use autobid_core::analysis::onedim::orbit_points;
use autobid_core::analysis::{bifurcation_scan, cobweb_trace, find_periodic_orbit, BifurcationConfig};
use autobid_core::discrete::{iterate, DiscreteMap, KahanSum, Model, Update};
use autobid_core::output::write_csv;
use clap::Args;

use crate::{emit, files, MapKind, ModelArgs};

fn update(kind: MapKind) -> Update {
    match kind {
        MapKind::Entropic => Update::Entropic,
        MapKind::Euclidean => Update::Euclidean,
        MapKind::Truncated => Update::TruncatedEntropic,
    }
}

fn model(args: &ModelArgs) -> Result<Model> {
    Ok(match args {
        ModelArgs { v: Some(v), .. } => Model::Symmetric { v: *v },
        ModelArgs { ricker_k: Some(k), .. } => Model::Ricker { k: *k },
        ModelArgs { logistic_cap: Some(cap), .. } => Model::Logistic { cap: *cap },
        ModelArgs { market: Some(p), .. } => Model::Market(files::load_market(p)?),
        _ => bail!("choose a model with --v, --ricker-k, --logistic-cap or --market"),
    })
}

fn initial(model: &Model, m0: &[f64]) -> Vec<f64> {
    if m0.is_empty() {
        vec![1.0; model.dim()]
    } else {
        m0.to_vec()
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn one_dim(model: &Model) -> Result<()> {
    if model.dim() != 1 {
        bail!("this command needs a one-dimensional model, got {} multipliers", model.dim());
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct DiscreteArgs {
    #[arg(long, value_enum, default_value_t = MapKind::Entropic)]
    pub map: MapKind,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Learning rate.
    #[arg(long, required_unless_present = "eta_sweep", allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Initial multipliers (default: all ones).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub m0: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Steps excluded from the reported means.
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    /// Add welfare and revenue columns.
    #[arg(long)]
    pub with_market: bool,
    /// Add running means of welfare and revenue (from step 0).
    #[arg(long)]
    pub averages: bool,
    /// `min,max,n`: write `eta,mean_welfare,mean_revenue` over a grid instead of an orbit.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub eta_sweep: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn discrete(a: DiscreteArgs) -> Result<()> {
    let model = model(&a.model)?;
    let m0 = initial(&model, &a.m0);
    if let Some(sweep) = &a.eta_sweep {
        let [lo, hi, n] = sweep[..] else {
            bail!("--eta-sweep takes min,max,n");
        };
        let mut rows = Vec::new();
        let mut diverged = 0;
        for eta in linspace(lo, hi, n as usize) {
            let map = DiscreteMap::new(update(a.map), eta, model.clone())?;
            match iterate(&map, &m0, a.steps, a.burn_in) {
                Ok(o) => rows.push([eta, o.mean_welfare, o.mean_revenue]),
                Err(autobid_core::Error::Divergence { .. }) => diverged += 1,
                Err(e) => return Err(e.into()),
            }
        }
        let header = ["eta", "mean_welfare", "mean_revenue"].map(String::from);
        let summary = format!("eta sweep: {} rates, {} diverged", rows.len() + diverged, diverged);
        return emit(a.out.as_deref(), &summary, |w| write_csv(w, &header, &rows));
    }
    let eta = a.eta.expect("clap enforces --eta");
    let map = DiscreteMap::new(update(a.map), eta, model)?;
    let orbit = iterate(&map, &m0, a.steps, a.burn_in)?;
    let (_, last) = orbit.trajectory.last().expect("orbit is nonempty");
    let summary = format!(
        "{} steps, final m = {:?}, mean welfare {}, mean revenue {}",
        a.steps, last, orbit.mean_welfare, orbit.mean_revenue
    );
    if !a.averages {
        return emit(a.out.as_deref(), &summary, |w| orbit.write_csv(w, a.with_market));
    }
    let dim = orbit.trajectory.dim();
    let mut header = vec!["step".to_string()];
    header.extend((0..dim).map(|i| format!("m{i}")));
    if a.with_market {
        header.extend(["welfare", "revenue"].map(String::from));
    }
    header.extend(["avg_welfare", "avg_revenue"].map(String::from));
    let (mut ws, mut rs) = (KahanSum::default(), KahanSum::default());
    let rows: Vec<Vec<f64>> = orbit
        .trajectory
        .states
        .iter()
        .enumerate()
        .map(|(k, s)| {
            ws.add(orbit.welfare[k]);
            rs.add(orbit.revenue[k]);
            let mut row = vec![k as f64];
            row.extend_from_slice(s);
            if a.with_market {
                row.extend([orbit.welfare[k], orbit.revenue[k]]);
            }
            let n = (k + 1) as f64;
            row.extend([ws.value() / n, rs.value() / n]);
            row
        })
        .collect();
    emit(a.out.as_deref(), &summary, |w| write_csv(w, &header, &rows))
}

#[derive(Debug, Args)]
pub struct BifurcateArgs {
    #[arg(long, value_enum, default_value_t = MapKind::Entropic)]
    pub map: MapKind,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub eta_min: f64,
    #[arg(long)]
    pub eta_max: f64,
    #[arg(long, default_value_t = 1000)]
    pub n_eta: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 200)]
    pub keep: usize,
    #[arg(long, default_value_t = 1.0)]
    pub m0: f64,
    /// Report `eta m / (2 (eta + 1))`, the logistic coordinate for `r = eta + 1`.
    #[arg(long)]
    pub rescale: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn bifurcate(a: BifurcateArgs) -> Result<()> {
    let model = model(&a.model)?;
    let cfg = BifurcationConfig {
        eta_min: a.eta_min,
        eta_max: a.eta_max,
        n_eta: a.n_eta,
        m0: a.m0,
        burn_in: a.burn_in,
        keep: a.keep,
    };
    let kind = update(a.map);
    let rows = bifurcation_scan(|eta| DiscreteMap::new(kind, eta, model.clone()), &cfg)?;
    let diverged = rows.iter().filter(|r| r.diverged).count();
    let points: Vec<[f64; 2]> = rows
        .iter()
        .flat_map(|r| {
            let s = if a.rescale { r.eta / (2.0 * (r.eta + 1.0)) } else { 1.0 };
            r.values.iter().map(move |&v| [r.eta, s * v])
        })
        .collect();
    let header = ["eta", "value"].map(String::from);
    let summary = format!("{} rates, {} points, {} diverged", rows.len(), points.len(), diverged);
    emit(a.out.as_deref(), &summary, |w| write_csv(w, &header, &points))
}

#[derive(Debug, Args)]
pub struct CobwebArgs {
    #[arg(long, value_enum, default_value_t = MapKind::Entropic)]
    pub map: MapKind,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub m0: f64,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    /// Also write `m,F` on a grid over `--range`.
    #[arg(long)]
    pub graph_out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0,4")]
    pub range: Vec<f64>,
    #[arg(long, default_value_t = 400)]
    pub grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cobweb(a: CobwebArgs) -> Result<()> {
    let model = model(&a.model)?;
    one_dim(&model)?;
    let map = DiscreteMap::new(update(a.map), a.eta, model)?;
    let f = |m: f64| map.map_1d(m);
    let segs = cobweb_trace(f, a.m0, a.steps)?;
    if let Some(p) = &a.graph_out {
        let [lo, hi] = a.range[..] else {
            bail!("--range takes lo,hi");
        };
        let rows: Vec<[f64; 2]> = linspace(lo, hi, a.grid).into_iter().map(|m| [m, f(m).unwrap_or(f64::NAN)]).collect();
        let mut w = std::io::BufWriter::new(std::fs::File::create(p)?);
        write_csv(&mut w, &["m".into(), "F".into()], &rows)?;
    }
    let header = ["x0", "y0", "x1", "y1"].map(String::from);
    let summary = format!("{} segments, final m = {}", segs.len(), segs.last().map_or(a.m0, |s| s[3]));
    emit(a.out.as_deref(), &summary, |w| write_csv(w, &header, &segs))
}

#[derive(Debug, Args)]
pub struct PeriodicArgs {
    #[arg(long, value_enum, default_value_t = MapKind::Entropic)]
    pub map: MapKind,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, required_unless_present = "eta_scan", allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Least period sought.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.001,5")]
    pub bracket: Vec<f64>,
    /// `min,max,step`: write `eta,found,point` over a grid of rates.
    #[arg(long, value_delimiter = ',')]
    pub eta_scan: Option<Vec<f64>>,
    /// Write `m,F,F2,F3` over the bracket.
    #[arg(long)]
    pub compositions_out: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn periodic(a: PeriodicArgs) -> Result<()> {
    let model = model(&a.model)?;
    one_dim(&model)?;
    let [lo, hi] = a.bracket[..] else {
        bail!("--bracket takes a,b");
    };
    let kind = update(a.map);
    if let Some(scan) = &a.eta_scan {
        let [e0, e1, de] = scan[..] else {
            bail!("--eta-scan takes min,max,step");
        };
        if !(de > 0.0 && e1 >= e0) {
            bail!("--eta-scan needs min <= max and a positive step");
        }
        let n = ((e1 - e0) / de + 1e-9).floor() as usize + 1;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let eta = e0 + i as f64 * de;
            let map = DiscreteMap::new(kind, eta, model.clone())?;
            let hit = find_periodic_orbit(|m| map.map_1d(m), a.k, [lo, hi])?;
            rows.push([eta, hit.is_some() as u8 as f64, hit.unwrap_or(f64::NAN)]);
        }
        let onset = rows.iter().find(|r| r[1] == 1.0).map(|r| r[0]);
        let summary = match onset {
            Some(e) => format!("period-{} points first found at eta = {e}", a.k),
            None => format!("no period-{} points on the scanned rates", a.k),
        };
        let header = ["eta", "found", "point"].map(String::from);
        return emit(a.out.as_deref(), &summary, |w| write_csv(w, &header, &rows));
    }
    let eta = a.eta.expect("clap enforces --eta");
    let map = DiscreteMap::new(kind, eta, model)?;
    let f = |m: f64| map.map_1d(m);
    if let Some(p) = &a.compositions_out {
        let rows: Vec<[f64; 4]> = linspace(lo, hi, a.grid)
            .into_iter()
            .map(|m| {
                let f1 = f(m).unwrap_or(f64::NAN);
                let f2 = f(f1).unwrap_or(f64::NAN);
                let f3 = f(f2).unwrap_or(f64::NAN);
                [m, f1, f2, f3]
            })
            .collect();
        let mut w = std::io::BufWriter::new(std::fs::File::create(p)?);
        write_csv(&mut w, &["m", "F", "F2", "F3"].map(String::from), &rows)?;
    }
    let hit = find_periodic_orbit(f, a.k, [lo, hi])?;
    let (summary, rows) = match hit {
        Some(m) => {
            let pts = orbit_points(f, m, a.k)?;
            (format!("period-{} orbit {:?}", a.k, pts), pts.into_iter().map(|x| [x]).collect::<Vec<_>>())
        }
        None => (format!("no period-{} point in [{lo}, {hi}]", a.k), Vec::new()),
    };
    emit(a.out.as_deref(), &summary, |w| write_csv(w, &["m".to_string()], &rows))
}
