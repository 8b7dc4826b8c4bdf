//! Continuous-time dynamics `dm/dt = u(m)` and general explicit vector fields.

mod integrator;
mod trajectory;

pub use integrator::{integrate, integrate_sampled, IntegratorConfig, Method, Stepper};
pub use trajectory::Trajectory;

use crate::error::Result;
use crate::market::{utility_into, MarketInstance};

/// A coordinate relaxing at rate `rate` toward `offset + sum(coef * x[input])`.
#[derive(Debug, Clone, PartialEq)]
pub struct FastCoord {
    pub index: usize,
    pub rate: f64,
    pub offset: f64,
    pub inputs: Vec<(usize, f64)>,
}

impl FastCoord {
    /// The negation relaxation `dy/dt = rate * (3 - x[input] - y)`.
    pub fn negation(index: usize, input: usize, rate: f64) -> Self {
        FastCoord {
            index,
            rate,
            offset: 3.0,
            inputs: vec![(input, -1.0)],
        }
    }

    pub fn target(&self, x: &[f64]) -> f64 {
        self.inputs.iter().fold(self.offset, |acc, &(j, c)| acc + c * x[j])
    }
}

/// An autonomous vector field.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64], dx: &mut [f64]) -> Result<()>;

    /// Linear relaxing coordinates eligible for exact exponential substeps.
    fn fast_coords(&self) -> &[FastCoord] {
        &[]
    }

    fn max_fast_rate(&self) -> f64 {
        self.fast_coords().iter().map(|f| f.rate).fold(0.0, f64::max)
    }
}

/// A vector field given by a closure.
pub struct FnField<F> {
    dim: usize,
    f: F,
    fast: Vec<FastCoord>,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f, fast: Vec::new() }
    }

    pub fn with_fast(mut self, fast: Vec<FastCoord>) -> Self {
        self.fast = fast;
        self
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) -> Result<()> {
        (self.f)(x, dx);
        Ok(())
    }

    fn fast_coords(&self) -> &[FastCoord] {
        &self.fast
    }
}

/// The autobidding flow of a market: each multiplier moves at its utility.
#[derive(Debug, Clone)]
pub struct MarketField {
    pub instance: MarketInstance,
    fast: Vec<FastCoord>,
}

impl MarketField {
    pub fn new(instance: MarketInstance) -> Self {
        MarketField { instance, fast: Vec::new() }
    }

    pub fn with_fast(mut self, fast: Vec<FastCoord>) -> Self {
        self.fast = fast;
        self
    }
}

pub fn market_field(instance: &MarketInstance) -> Result<MarketField> {
    instance.validate()?;
    Ok(MarketField::new(instance.clone()))
}

impl VectorField for MarketField {
    fn dim(&self) -> usize {
        self.instance.n_bidders
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) -> Result<()> {
        utility_into(&self.instance, x, dx)
    }

    fn fast_coords(&self) -> &[FastCoord] {
        &self.fast
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn market_field_is_utility() {
        let inst = MarketInstance::from_valuation_matrix(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let f = market_field(&inst).unwrap();
        let mut dx = [0.0; 2];
        f.eval(&[1.5, 1.5], &mut dx).unwrap();
        assert_eq!(dx, [0.5, 0.5]);
        f.eval(&[2.0, 2.0], &mut dx).unwrap();
        assert_eq!(dx, [0.0, 0.0]);
    }

    #[test]
    fn negation_target() {
        let f = FastCoord::negation(1, 0, 50.0);
        assert_eq!(f.target(&[1.2, 9.0]), 3.0 - 1.2);
    }
}
