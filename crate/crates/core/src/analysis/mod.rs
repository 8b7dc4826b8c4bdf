//! Chaos diagnostics for flows and maps.

pub mod horseshoe;
pub mod lyapunov;
pub mod onedim;
pub mod poincare;

pub use horseshoe::{check_horseshoe_precondition, HorseshoeReport, Quadrangles, Region};
pub use lyapunov::{largest_lyapunov, LyapunovConfig, LyapunovEstimate};
pub use onedim::{
    bifurcation_scan, classify_fixed_point, cobweb_trace, find_periodic_orbit, schwarzian_entropic, schwarzian_fd,
    BifurcationConfig, BifurcationRow, Stability,
};
pub use poincare::{poincare_map, poincare_returns, Return, Section};
