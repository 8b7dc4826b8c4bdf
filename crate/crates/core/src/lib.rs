//! Numerical lab for autobidding dynamics: second-price markets with
//! return-on-spend constrained bidders, the multiplier flows and maps they
//! induce, a compiler from nonlinear systems into such markets, and chaos
//! diagnostics.

pub mod analysis;
pub mod chua;
pub mod continuous;
pub mod discrete;
pub mod error;
pub mod func;
pub mod market;
pub mod output;
pub mod quadrature;
pub mod reduction;

pub use error::{Error, ErrorClass, Result};
