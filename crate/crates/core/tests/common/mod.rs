//! Shared test oracles.
#![allow(dead_code)]

use autobid_core::chua::{augmented_encoding, augmented_field, chua_as_target, ChuaParams};
use autobid_core::market::{self, MarketInstance};
use autobid_core::reduction::{compile, CompileOptions};
use num::{BigInt, BigRational, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exact outcome of every item: fractions, payments, and the aggregates.
pub struct Exact {
    pub fractions: Vec<Vec<BigRational>>,
    pub payments: Vec<Vec<BigRational>>,
    pub utilities: Vec<BigRational>,
    pub welfare: BigRational,
    pub revenue: BigRational,
}

pub fn q(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Brute force in rationals, written from the auction rules alone: bids are
/// `m_i v_i`, a reserve must be strictly beaten, the highest bids split the
/// item and each pays its share of the highest competing bid.
pub fn exact_outcome(inst: &MarketInstance, m: &[f64]) -> Exact {
    let n = inst.n_bidders;
    let zero = BigRational::zero();
    let mut out = Exact {
        fractions: Vec::new(),
        payments: Vec::new(),
        utilities: vec![zero.clone(); n],
        welfare: zero.clone(),
        revenue: zero.clone(),
    };
    for item in &inst.items {
        let bids: Vec<BigRational> = (0..n).map(|i| q(m[i]) * q(item.values[i])).collect();
        let best = bids.iter().max().unwrap().clone();
        let mut frac = vec![zero.clone(); n];
        let mut pay = vec![zero.clone(); n];
        let reserve = item.reserve.map(q);
        let sold = reserve.as_ref().is_none_or(|r| best > *r);
        if sold {
            let winners: Vec<usize> = (0..n).filter(|&i| bids[i] == best).collect();
            let competing = if winners.len() > 1 {
                best.clone()
            } else {
                (0..n).filter(|i| !winners.contains(i)).map(|i| bids[i].clone()).max().unwrap_or(zero.clone())
            };
            let mut price = competing.max(zero.clone());
            if let Some(r) = &reserve {
                price = price.max(r.clone());
            }
            let k = BigRational::from_integer(BigInt::from(winners.len()));
            for &w in &winners {
                frac[w] = BigRational::from_integer(1.into()) / &k;
                pay[w] = &price / &k;
                out.utilities[w] += (q(item.values[w]) - &price) / &k;
                out.welfare += q(item.values[w]) / &k;
            }
            out.revenue += price;
        }
        out.fractions.push(frac);
        out.payments.push(pay);
    }
    out
}

fn grid(rng: &mut ChaCha8Rng, steps: u32, unit: f64) -> f64 {
    rng.random_range(0..=steps) as f64 * unit
}

/// A random instance on coarse dyadic grids, so ties and reserve hits are common.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (MarketInstance, Vec<f64>) {
    let n = rng.random_range(1..=4);
    let items = rng.random_range(1..=5);
    let rows: Vec<Vec<f64>> = (0..items).map(|_| (0..n).map(|_| grid(rng, 12, 0.25)).collect()).collect();
    let mut inst = MarketInstance::from_value_rows(n, &rows);
    for it in &mut inst.items {
        if rng.random_bool(0.4) {
            it.reserve = Some(grid(rng, 12, 0.25));
        }
    }
    let m = (0..n).map(|_| grid(rng, 8, 0.25)).collect();
    (inst, m)
}

/// Descriptions of every disagreement with the exact oracle.
pub fn oracle_mismatches(count: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    for case in 0..count {
        let (inst, m) = random_instance(&mut rng);
        let exact = exact_outcome(&inst, &m);
        let f = |x: &BigRational| x.to_f64().unwrap();
        let alloc = market::allocate(&inst, &m).unwrap();
        let fr: Vec<Vec<f64>> = exact.fractions.iter().map(|r| r.iter().map(f).collect()).collect();
        let pay: Vec<Vec<f64>> = exact.payments.iter().map(|r| r.iter().map(f).collect()).collect();
        let u: Vec<f64> = exact.utilities.iter().map(f).collect();
        let checks = [
            ("fractions", alloc.fractions() == fr),
            ("payments", alloc.payments() == pay),
            ("utilities", market::utility(&inst, &m).unwrap() == u),
            ("welfare", market::welfare(&inst, &m).unwrap() == f(&exact.welfare)),
            ("revenue", market::revenue(&inst, &m).unwrap() == f(&exact.revenue)),
        ];
        for (what, ok) in checks {
            if !ok {
                bad.push(format!("case {case}: {what} differ for {inst:?} at {m:?}"));
            }
        }
    }
    bad
}

/// Largest gap between the compiled Chua market's utilities and the
/// hand-written augmented field, conjugated into box coordinates, over random
/// profiles in the box.
pub fn compiled_chua_discrepancy(lambda: f64, points: usize, seed: u64) -> f64 {
    let compiled = compile(&chua_as_target(), &CompileOptions { lambda: Some(lambda), ..Default::default() }).unwrap();
    let enc = augmented_encoding();
    let slots: Vec<usize> = compiled.primary.iter().chain(&compiled.negation).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut profile = vec![0.0; compiled.instance.n_bidders];
    for &a in &compiled.auxiliary {
        profile[a] = 2.0;
    }
    let mut worst = 0.0f64;
    for _ in 0..points {
        let mm: Vec<f64> = (0..6).map(|_| rng.random_range(1.1..1.9)).collect();
        for (k, &s) in slots.iter().enumerate() {
            profile[s] = mm[k];
        }
        let u = market::utility(&compiled.instance, &profile).unwrap();
        let want = augmented_field(&enc.decode(&mm), &ChuaParams::default(), lambda);
        for (k, &s) in slots.iter().enumerate() {
            worst = worst.max((u[s] - enc.scale[k] * want[k]).abs());
        }
    }
    worst
}
