use super::{ContinuumSegment, MarketInstance};
use crate::error::{Error, Result};

/// Outcome of one discrete item.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemOutcome {
    /// Bidders holding the maximal bid; empty when the reserve wins.
    pub winners: Vec<usize>,
    /// Highest competing bid faced by each winner (reserve included).
    pub price: f64,
}

impl ItemOutcome {
    pub fn share(&self) -> f64 {
        if self.winners.is_empty() {
            0.0
        } else {
            1.0 / self.winners.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub items: Vec<ItemOutcome>,
    n_bidders: usize,
}

impl Allocation {
    /// `x[j][i]`, the fraction of item `j` won by bidder `i`.
    pub fn fractions(&self) -> Vec<Vec<f64>> {
        self.items
            .iter()
            .map(|o| {
                let mut row = vec![0.0; self.n_bidders];
                for &w in &o.winners {
                    row[w] = o.share();
                }
                row
            })
            .collect()
    }

    /// `p[j][i]`, the payment of bidder `i` for item `j`.
    pub fn payments(&self) -> Vec<Vec<f64>> {
        self.items
            .iter()
            .map(|o| {
                let mut row = vec![0.0; self.n_bidders];
                for &w in &o.winners {
                    row[w] = o.price / o.winners.len() as f64;
                }
                row
            })
            .collect()
    }
}

/// Sums amounts of the form `a / k` for small integers `k`.
///
/// Amounts are grouped by `k` and the division happens once, over the lcm of
/// the divisors seen, so dyadic inputs yield the correctly rounded total.
#[derive(Debug, Clone)]
pub struct ShareSum {
    by_divisor: Vec<f64>,
}

impl ShareSum {
    pub fn new(max_divisor: usize) -> Self {
        ShareSum {
            by_divisor: vec![0.0; max_divisor + 1],
        }
    }

    pub fn add(&mut self, amount: f64, divisor: usize) {
        if divisor >= self.by_divisor.len() {
            self.by_divisor.resize(divisor + 1, 0.0);
        }
        self.by_divisor[divisor] += amount;
    }

    pub fn total(&self) -> f64 {
        let mut lcm: u64 = 1;
        for (k, s) in self.by_divisor.iter().enumerate().skip(1) {
            if *s != 0.0 {
                lcm = lcm / gcd(lcm, k as u64) * k as u64;
                if lcm > 1 << 20 {
                    return self
                        .by_divisor
                        .iter()
                        .enumerate()
                        .skip(1)
                        .map(|(k, s)| s / k as f64)
                        .sum();
                }
            }
        }
        let scaled: f64 = self
            .by_divisor
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, s)| **s != 0.0)
            .map(|(k, s)| s * (lcm / k as u64) as f64)
            .sum();
        scaled / lcm as f64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn outcome(values: &[f64], reserve: Option<f64>, m: &[f64]) -> ItemOutcome {
    let mut best = f64::NEG_INFINITY;
    let mut winners = Vec::new();
    let mut runner_up = f64::NEG_INFINITY;
    for (i, (&v, &mi)) in values.iter().zip(m).enumerate() {
        let bid = mi * v;
        if bid > best {
            runner_up = best;
            best = bid;
            winners.clear();
            winners.push(i);
        } else if bid == best {
            winners.push(i);
        } else if bid > runner_up {
            runner_up = bid;
        }
    }
    if let Some(r) = reserve {
        if best <= r {
            return ItemOutcome { winners: Vec::new(), price: r };
        }
    }
    let competing = if winners.len() > 1 { best } else { runner_up };
    let price = competing.max(reserve.unwrap_or(0.0)).max(0.0);
    ItemOutcome { winners, price }
}

pub fn allocate(instance: &MarketInstance, m: &[f64]) -> Result<Allocation> {
    instance.check_profile(m)?;
    Ok(Allocation {
        items: instance.items.iter().map(|it| outcome(&it.values, it.reserve, m)).collect(),
        n_bidders: instance.n_bidders,
    })
}

/// Splits `[lo, top]` at the owners' clamped bids. Yields `(a, b, active)` where
/// `active` lists owners bidding above every price in `(a, b)`.
fn segment_pieces(seg: &ContinuumSegment, m: &[f64]) -> Vec<(f64, f64, Vec<usize>)> {
    let [lo, hi] = seg.support;
    let caps: Vec<(usize, f64)> = seg
        .owners
        .iter()
        .map(|&o| (o, (m[o] * seg.value).clamp(lo, hi)))
        .collect();
    let mut cuts: Vec<f64> = caps.iter().map(|c| c.1).filter(|&c| c > lo).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut pieces = Vec::with_capacity(cuts.len());
    let mut a = lo;
    for b in cuts {
        let active = caps.iter().filter(|c| c.1 >= b).map(|c| c.0).collect();
        pieces.push((a, b, active));
        a = b;
    }
    pieces
}

fn segment_utilities(seg: &ContinuumSegment, m: &[f64], out: &mut [f64]) -> Result<()> {
    if let [owner] = seg.owners[..] {
        let [lo, hi] = seg.support;
        let top = (m[owner] * seg.value).clamp(lo, hi);
        out[owner] += seg.density.utility_integral(lo, top, seg.value)?;
        return Ok(());
    }
    for (a, b, active) in segment_pieces(seg, m) {
        let u = seg.density.utility_integral(a, b, seg.value)? / active.len() as f64;
        for o in active {
            out[o] += u;
        }
    }
    Ok(())
}

fn segment_top(seg: &ContinuumSegment, m: &[f64]) -> f64 {
    let [lo, hi] = seg.support;
    seg.owners
        .iter()
        .map(|&o| (m[o] * seg.value).clamp(lo, hi))
        .fold(lo, f64::max)
}

/// Quasi-linear utilities `u_i(m)` written into `out`.
pub fn utility_into(instance: &MarketInstance, m: &[f64], out: &mut [f64]) -> Result<()> {
    instance.check_profile(m)?;
    let n = instance.n_bidders;
    if out.len() != n {
        return Err(Error::InvalidInput(format!("output buffer has {} entries for {n} bidders", out.len())));
    }
    let mut sums: Vec<ShareSum> = (0..n).map(|_| ShareSum::new(n)).collect();
    for item in &instance.items {
        let o = outcome(&item.values, item.reserve, m);
        let k = o.winners.len();
        for &w in &o.winners {
            sums[w].add(item.values[w] - o.price, k);
        }
    }
    for (slot, s) in out.iter_mut().zip(&sums) {
        *slot = s.total();
    }
    for seg in &instance.segments {
        segment_utilities(seg, m, out)?;
    }
    Ok(())
}

pub fn utility(instance: &MarketInstance, m: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; instance.n_bidders];
    utility_into(instance, m, &mut out)?;
    Ok(out)
}

/// Total value allocated, discrete and continuum.
pub fn welfare(instance: &MarketInstance, m: &[f64]) -> Result<f64> {
    instance.check_profile(m)?;
    let mut sum = ShareSum::new(instance.n_bidders);
    for item in &instance.items {
        let o = outcome(&item.values, item.reserve, m);
        for &w in &o.winners {
            sum.add(item.values[w], o.winners.len());
        }
    }
    let mut total = sum.total();
    for seg in &instance.segments {
        let top = segment_top(seg, m);
        total += seg.value * seg.density.mass_integral(seg.support[0], top, seg.value)?;
    }
    Ok(total)
}

/// Total payments collected, discrete and continuum.
pub fn revenue(instance: &MarketInstance, m: &[f64]) -> Result<f64> {
    instance.check_profile(m)?;
    let mut sum = ShareSum::new(1);
    for item in &instance.items {
        let o = outcome(&item.values, item.reserve, m);
        if !o.winners.is_empty() {
            sum.add(o.price, 1);
        }
    }
    let mut total = sum.total();
    for seg in &instance.segments {
        let top = segment_top(seg, m);
        total += seg.density.price_integral(seg.support[0], top, seg.value)?;
    }
    Ok(total)
}
