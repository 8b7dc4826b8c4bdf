//! Second-price auction environments under uniform bid scaling.
//!
//! Bidder `i` bids `m[i] * v[i][j]` on every discrete item `j`. The highest bids
//! split the item uniformly and each winner pays its share of the highest
//! competing bid. A reserve price acts as an extra bid that must be strictly
//! beaten. Continuum segments only compete against their own reserve prices.

mod auction;
mod density;

pub use auction::{allocate, revenue, utility, utility_into, welfare, Allocation, ItemOutcome, ShareSum};
pub use density::Density;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteItem {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reserve: Option<f64>,
}

impl DiscreteItem {
    pub fn new(values: Vec<f64>) -> Self {
        DiscreteItem { values, reserve: None }
    }

    pub fn with_reserve(values: Vec<f64>, reserve: f64) -> Self {
        DiscreteItem {
            values,
            reserve: Some(reserve),
        }
    }
}

/// A measure of infinitesimal items indexed by reserve price `p` on `support`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumSegment {
    pub owners: Vec<usize>,
    /// Value per unit of mass, shared by every owner.
    pub value: f64,
    pub support: [f64; 2],
    pub density: Density,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MarketInstance {
    pub n_bidders: usize,
    #[serde(default)]
    pub items: Vec<DiscreteItem>,
    #[serde(default)]
    pub segments: Vec<ContinuumSegment>,
}

impl MarketInstance {
    pub fn new(n_bidders: usize) -> Self {
        MarketInstance {
            n_bidders,
            items: Vec::new(),
            segments: Vec::new(),
        }
    }

    /// Builds an instance with one item per row of `values` (item-major).
    pub fn from_value_rows(n_bidders: usize, rows: &[Vec<f64>]) -> Self {
        MarketInstance {
            n_bidders,
            items: rows.iter().map(|r| DiscreteItem::new(r.clone())).collect(),
            segments: Vec::new(),
        }
    }

    /// Item-major view of the bidder-major valuation matrix `v[i][j]`.
    pub fn from_valuation_matrix(v: &[Vec<f64>]) -> Self {
        let n = v.len();
        let m = v.first().map_or(0, Vec::len);
        let rows: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| v[i][j]).collect()).collect();
        MarketInstance::from_value_rows(n, &rows)
    }

    pub fn add_bidder(&mut self) -> usize {
        for item in &mut self.items {
            item.values.push(0.0);
        }
        self.n_bidders += 1;
        self.n_bidders - 1
    }

    /// Adds an item valued only by the listed bidders; returns its index.
    pub fn add_item(&mut self, entries: &[(usize, f64)], reserve: Option<f64>) -> usize {
        let mut values = vec![0.0; self.n_bidders];
        for &(i, v) in entries {
            values[i] = v;
        }
        self.items.push(DiscreteItem { values, reserve });
        self.items.len() - 1
    }

    pub fn add_segment(&mut self, segment: ContinuumSegment) -> usize {
        self.segments.push(segment);
        self.segments.len() - 1
    }

    /// Checks every structural invariant, naming the offending item or segment.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidInput(m));
        if self.n_bidders == 0 {
            return fail("instance needs at least one bidder".into());
        }
        for (j, item) in self.items.iter().enumerate() {
            if item.values.len() != self.n_bidders {
                return fail(format!(
                    "item {j}: {} values for {} bidders",
                    item.values.len(),
                    self.n_bidders
                ));
            }
            if let Some(v) = item.values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return fail(format!("item {j}: value {v} is negative or not finite"));
            }
            if let Some(r) = item.reserve {
                if !(r.is_finite() && r >= 0.0) {
                    return fail(format!("item {j}: reserve price {r} is negative or not finite"));
                }
            }
        }
        for (s, seg) in self.segments.iter().enumerate() {
            if seg.owners.is_empty() {
                return fail(format!("segment {s}: no owner bidders"));
            }
            if let Some(o) = seg.owners.iter().find(|&&o| o >= self.n_bidders) {
                return fail(format!("segment {s}: owner {o} out of range"));
            }
            let mut sorted = seg.owners.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != seg.owners.len() {
                return fail(format!("segment {s}: duplicate owners"));
            }
            if !(seg.value.is_finite() && seg.value > 0.0) {
                return fail(format!("segment {s}: per-unit value {} must be positive", seg.value));
            }
            let [lo, hi] = seg.support;
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
                return fail(format!("segment {s}: support [{lo}, {hi}] must satisfy 0 <= lo < hi"));
            }
            if let Err(m) = seg.density.validate(seg.value, lo, hi) {
                return fail(format!("segment {s}: {m}"));
            }
        }
        Ok(())
    }

    pub(crate) fn check_profile(&self, m: &[f64]) -> Result<()> {
        if m.len() != self.n_bidders {
            return Err(Error::InvalidInput(format!(
                "multiplier profile has {} entries for {} bidders",
                m.len(),
                self.n_bidders
            )));
        }
        if let Some((i, x)) = m.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("multiplier {i} is not finite ({x})")));
        }
        Ok(())
    }
}

/// Per-bidder multipliers, validated nonnegative and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierProfile(Vec<f64>);

impl MultiplierProfile {
    pub fn new(m: Vec<f64>, instance: &MarketInstance) -> Result<Self> {
        instance.check_profile(&m)?;
        if let Some((i, x)) = m.iter().enumerate().find(|(_, x)| **x < 0.0) {
            return Err(Error::InvalidInput(format!("multiplier {i} is negative ({x})")));
        }
        Ok(MultiplierProfile(m))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}
