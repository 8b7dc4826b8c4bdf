use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::output;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, x: Vec<f64>) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::InvalidInput(format!("trajectory times must increase: {t} after {last}")));
            }
            if x.len() != self.states[0].len() {
                return Err(Error::InvalidInput("trajectory state dimension changed".into()));
            }
        }
        self.times.push(t);
        self.states.push(x);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.times.last()?, self.states.last()?.as_slice()))
    }

    /// Componentwise `(min, max)` over all states.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim()];
        for s in &self.states {
            for (slot, &v) in b.iter_mut().zip(s) {
                slot.0 = slot.0.min(v);
                slot.1 = slot.1.max(v);
            }
        }
        b
    }

    /// Writes `t,x0,x1,...` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((0..self.dim()).map(|i| format!("x{i}")));
        let rows = self.times.iter().zip(&self.states).map(|(t, s)| {
            let mut row = Vec::with_capacity(s.len() + 1);
            row.push(*t);
            row.extend_from_slice(s);
            row
        });
        output::write_csv(w, &header, rows)
    }
}
