//! Edge-image test for the deformed horseshoe on a planar return map.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::poincare::{poincare_map, Section};
use crate::chua::{augmented_initial, AugmentedChua, ChuaField, ChuaParams};
use crate::continuous::{IntegratorConfig, VectorField};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    MMinus,
    N0,
    M0,
    N1,
    MPlus,
    OutsideP,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Region::MMinus => "M-",
            Region::N0 => "N0",
            Region::M0 => "M0",
            Region::N1 => "N1",
            Region::MPlus => "M+",
            Region::OutsideP => "OUTSIDE_P",
        };
        f.write_str(s)
    }
}

/// Two quadrangles `N1 = A1 A2 A3 A4`, `N0 = A5 A6 A7 A8` in a strip bounded
/// by `z = a (b y - c_k)`. Edges `A1A2`, `A3A4`, `A5A6`, `A7A8` cross the strip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadrangles {
    pub points: [[f64; 2]; 8],
    pub a: f64,
    pub b: f64,
    pub c: [f64; 2],
}

impl Default for Quadrangles {
    fn default() -> Self {
        Quadrangles {
            points: [
                [-0.1950, -2.6942956550],
                [-0.1761, -2.2243882059],
                [-0.2376, -2.9659317744],
                [-0.2410, -3.2489461290],
                [-0.3181, -4.1785885539],
                [-0.3315, -4.0981421985],
                [-0.3597, -4.4381670543],
                [-0.3472, -4.5294652668],
            ],
            a: 9.623,
            b: 1.253,
            c: [0.0105, 0.03565],
        }
    }
}

pub const EDGE_NAMES: [&str; 8] = ["N1U", "N1D", "N0U", "N0D", "N1L", "N1R", "N0L", "N0R"];
const EDGES: [(usize, usize); 8] = [(0, 1), (2, 3), (4, 5), (6, 7), (1, 2), (3, 0), (5, 6), (7, 4)];

fn cross(o: [f64; 2], a: [f64; 2], p: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0])
}

fn centroid(p: &[[f64; 2]]) -> [f64; 2] {
    let n = p.len() as f64;
    [p.iter().map(|q| q[0]).sum::<f64>() / n, p.iter().map(|q| q[1]).sum::<f64>() / n]
}

impl Quadrangles {
    /// Largest distance (in `z`) from a corner to its nearest strip line.
    pub fn line_residual(&self) -> f64 {
        self.points
            .iter()
            .map(|[y, z]| {
                self.c
                    .iter()
                    .map(|c| (z - self.a * (self.b * y - c)).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    /// Strict membership in the open strip.
    pub fn in_strip(&self, p: [f64; 2]) -> bool {
        let l: Vec<f64> = self.c.iter().map(|c| self.a * (self.b * p[0] - c)).collect();
        let (lo, hi) = (l[0].min(l[1]), l[0].max(l[1]));
        p[1] > lo && p[1] < hi
    }

    /// Whether `p` lies on the `N1` side of transverse edge `e` (0..4).
    fn beyond(&self, e: usize, p: [f64; 2]) -> bool {
        let (i, j) = EDGES[e];
        let (a, b) = (self.points[i], self.points[j]);
        let up = {
            let c1 = centroid(&self.points[0..4]);
            let c0 = centroid(&self.points[4..8]);
            let mid = centroid(&[a, b]);
            [mid[0] + (c1[0] - c0[0]), mid[1] + (c1[1] - c0[1])]
        };
        cross(a, b, p).signum() == cross(a, b, up).signum()
    }

    pub fn classify(&self, p: [f64; 2]) -> Region {
        if !self.in_strip(p) {
            Region::OutsideP
        } else if self.beyond(0, p) {
            Region::MPlus
        } else if self.beyond(1, p) {
            Region::N1
        } else if self.beyond(2, p) {
            Region::M0
        } else if self.beyond(3, p) {
            Region::N0
        } else {
            Region::MMinus
        }
    }

    /// `n` evenly spaced points on edge `e`, endpoints included.
    pub fn edge_samples(&self, e: usize, n: usize) -> Vec<[f64; 2]> {
        let (i, j) = EDGES[e];
        let (a, b) = (self.points[i], self.points[j]);
        (0..n)
            .map(|k| {
                let s = if n == 1 { 0.5 } else { k as f64 / (n - 1) as f64 };
                [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub name: String,
    pub regions: BTreeSet<Region>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorseshoeReport {
    pub edges: Vec<EdgeReport>,
    pub precondition_satisfied: bool,
    pub n_edge_samples: usize,
}

impl HorseshoeReport {
    fn regions(&self, name: &str) -> &BTreeSet<Region> {
        &self.edges.iter().find(|e| e.name == name).expect("edge present").regions
    }
}

impl fmt::Display for HorseshoeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples_per_edge {}", self.n_edge_samples)?;
        for e in &self.edges {
            let r: Vec<String> = e.regions.iter().map(Region::to_string).collect();
            writeln!(f, "edge {} -> {}", e.name, r.join(" "))?;
        }
        writeln!(f, "precondition_satisfied {}", self.precondition_satisfied)
    }
}

fn within(r: &BTreeSet<Region>, allowed: &[Region]) -> bool {
    !r.is_empty() && r.iter().all(|x| allowed.contains(x))
}

fn verdict(report: &HorseshoeReport) -> bool {
    use Region::*;
    if report.edges.iter().any(|e| e.regions.contains(&OutsideP)) {
        return false;
    }
    let (n0u, n0d) = (report.regions("N0U"), report.regions("N0D"));
    let (n1u, n1d) = (report.regions("N1U"), report.regions("N1D"));
    let n0 = (within(n0u, &[MPlus]) && within(n0d, &[MMinus])) || (within(n0u, &[MMinus]) && within(n0d, &[MPlus]));
    let upper = [M0, N0, MPlus];
    let n1 = (within(n1u, &[MMinus]) && within(n1d, &upper)) || (within(n1d, &[MMinus]) && within(n1u, &upper));
    n0 && n1
}

/// Maps `n` samples of every quadrangle edge through the return map and
/// classifies the images. `lift` turns a section point into a full state.
pub fn check_horseshoe_precondition<F, L>(
    field: &F,
    cfg: &IntegratorConfig,
    section: &Section,
    quads: &Quadrangles,
    lift: L,
    n: usize,
) -> Result<HorseshoeReport>
where
    F: VectorField + ?Sized,
    L: Fn([f64; 2]) -> Vec<f64> + Sync,
{
    let edges = (0..EDGES.len())
        .map(|e| {
            let regions = quads
                .edge_samples(e, n)
                .into_par_iter()
                .map(|p| {
                    let r = poincare_map(field, cfg, section, &lift(p))?;
                    Ok(quads.classify([r.point[0], r.point[1]]))
                })
                .collect::<Result<BTreeSet<Region>>>()?;
            Ok(EdgeReport {
                name: EDGE_NAMES[e].to_string(),
                regions,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = HorseshoeReport {
        edges,
        precondition_satisfied: false,
        n_edge_samples: n,
    };
    report.precondition_satisfied = verdict(&report);
    Ok(report)
}

/// The section `x = 1` crossed with `x` decreasing, recording `(y, z)`.
pub fn chua_section() -> Section {
    Section::new(0, 1.0, -1, vec![1, 2])
}

pub fn chua_poincare_config() -> IntegratorConfig {
    IntegratorConfig::dopri5(1e-11, 1e-12, 0.01)
}

pub fn horseshoe_raw_chua(params: &ChuaParams, n: usize) -> Result<HorseshoeReport> {
    let field = ChuaField { params: *params };
    check_horseshoe_precondition(&field, &chua_poincare_config(), &chua_section(), &Quadrangles::default(), |p| vec![1.0, p[0], p[1]], n)
}

/// Same test on the augmented circuit, bars started at `3 - partner`.
pub fn horseshoe_augmented(params: &ChuaParams, lambda: f64, n: usize) -> Result<HorseshoeReport> {
    let field = AugmentedChua::new(*params, lambda)?;
    let cfg = IntegratorConfig::for_field(&field);
    check_horseshoe_precondition(&field, &cfg, &chua_section(), &Quadrangles::default(), |p| augmented_initial(&[1.0, p[0], p[1]]), n)
}

/// Runs the augmented test for each rate; a numerical failure counts as a
/// failed precondition for that rate.
pub fn lambda_scan(params: &ChuaParams, lambdas: &[f64], n: usize) -> Vec<(f64, Result<HorseshoeReport>)> {
    lambdas.iter().map(|&l| (l, horseshoe_augmented(params, l, n))).collect()
}

/// Runs at `n` and `2n` samples; returns the finer report and whether any
/// edge changed its set of regions.
pub fn check_with_doubling<R>(run: R, n: usize) -> Result<(HorseshoeReport, bool)>
where
    R: Fn(usize) -> Result<HorseshoeReport>,
{
    let coarse = run(n)?;
    let fine = run(2 * n)?;
    let flipped = coarse.edges.iter().zip(&fine.edges).any(|(a, b)| a.regions != b.regions)
        || coarse.precondition_satisfied != fine.precondition_satisfied;
    Ok((fine, flipped))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_lie_on_strip_lines() {
        let q = Quadrangles::default();
        assert!(q.line_residual() < 1e-6, "{}", q.line_residual());
    }

    #[test]
    fn interior_points_classified() {
        let q = Quadrangles::default();
        let c1 = centroid(&q.points[0..4]);
        let c0 = centroid(&q.points[4..8]);
        assert_eq!(q.classify(c1), Region::N1);
        assert_eq!(q.classify(c0), Region::N0);
        assert_eq!(q.classify(centroid(&[c0, c1])), Region::M0);
        assert_eq!(q.classify([c1[0] + 0.1, c1[1] + 0.1 * 9.623 * 1.253]), Region::MPlus);
        assert_eq!(q.classify([c0[0] - 0.1, c0[1] - 0.1 * 9.623 * 1.253]), Region::MMinus);
        assert_eq!(q.classify([0.0, 5.0]), Region::OutsideP);
    }
}
