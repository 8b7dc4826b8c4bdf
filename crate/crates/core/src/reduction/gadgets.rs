//! Market fragments realizing one term of a normalized vector field each.
//!
//! Every fragment assumes the multipliers it reads stay inside
//! [`GADGET_LO`, `GADGET_HI`].

use crate::error::{Error, Result};
use crate::func::ScalarFn;
use crate::market::{ContinuumSegment, Density, MarketInstance};

pub const GADGET_LO: f64 = 1.05;
pub const GADGET_HI: f64 = 1.95;
/// Largest number of items a discretized nonlinearity may use.
pub const ITEM_CAP: u64 = 100_000;
pub const PEG_LEVEL: f64 = 2.0;

const SLOPE_SAMPLES: usize = 10_001;

fn check_decreasing(h: &ScalarFn) -> Result<()> {
    let top = h.max_slope(GADGET_LO, GADGET_HI, SLOPE_SAMPLES);
    if top >= 0.0 {
        return Err(Error::Precondition(format!(
            "nonlinearity must be strictly decreasing on [{GADGET_LO}, {GADGET_HI}]; max slope {top}"
        )));
    }
    Ok(())
}

/// Segment with density `h'(p) / (1 - p)`; owner's utility gains `h(m) - h(GADGET_LO)`.
pub fn build_nonlinear_gadget(h: &ScalarFn, bidder: usize) -> Result<ContinuumSegment> {
    check_decreasing(h)?;
    Ok(ContinuumSegment {
        owners: vec![bidder],
        value: 1.0,
        support: [GADGET_LO, GADGET_HI],
        density: Density::Derived { h: h.clone() },
    })
}

/// Number of reserve-priced items that keep the step approximation within `eps`.
pub fn discretization_size(h: &ScalarFn, eps: f64) -> Result<u64> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("discretization tolerance must be positive, got {eps}")));
    }
    if eps.is_infinite() {
        return Ok(0);
    }
    let slope = h.max_abs_slope(GADGET_LO, GADGET_HI, SLOPE_SAMPLES) * 1.05;
    let k = (slope * (GADGET_HI - GADGET_LO) / eps).ceil().max(1.0);
    if !k.is_finite() || k > ITEM_CAP as f64 {
        return Err(Error::Capacity {
            required: if k.is_finite() { k as u64 } else { u64::MAX },
            cap: ITEM_CAP,
        });
    }
    Ok(k as u64)
}

/// Replaces the segment by items of real-valued mass: the item for cell
/// `[a, b]` with midpoint `p` is worth `w = (h(b) - h(a)) / (1 - p)` to
/// `bidder` and carries reserve `p * w`, so it is won exactly when `m > p` and
/// then adds `h(b) - h(a)`.
pub fn discretize_nonlinear_gadget(instance: &mut MarketInstance, h: &ScalarFn, bidder: usize, eps: f64) -> Result<usize> {
    check_decreasing(h)?;
    let k = discretization_size(h, eps)?;
    let width = (GADGET_HI - GADGET_LO) / k as f64;
    for c in 0..k {
        let a = GADGET_LO + width * c as f64;
        let b = if c + 1 == k { GADGET_HI } else { a + width };
        let p = 0.5 * (a + b);
        let w = (h.eval(b) - h.eval(a)) / (1.0 - p);
        instance.add_item(&[(bidder, w)], Some(p * w));
    }
    Ok(k as usize)
}

/// Adds bidder `bar` whose utility is `3 lambda - lambda m_input - lambda m_bar`
/// while both multipliers stay in the gadget range. Returns `bar`.
pub fn build_negation_gadget(instance: &mut MarketInstance, lambda: f64, input: usize) -> Result<usize> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::Parameter(format!("negation rate must be at least 1, got {lambda}")));
    }
    let bar = instance.add_bidder();
    instance.add_item(&[(input, lambda), (bar, 1.95 * lambda)], None);
    instance.add_segment(ContinuumSegment {
        owners: vec![bar],
        value: 1.0,
        support: [GADGET_LO, 2.0],
        density: Density::Negation { c: lambda },
    });
    Ok(bar)
}

/// Adds the auxiliary bidder held at [`PEG_LEVEL`]: its utility is `2 - m`
/// on `[1.05, 2.95]`, so the level is an attracting rest point.
pub fn build_peg(instance: &mut MarketInstance) -> usize {
    let peg = instance.add_bidder();
    let lo = GADGET_LO;
    instance.add_item(&[(peg, PEG_LEVEL - lo)], None);
    instance.add_segment(ContinuumSegment {
        owners: vec![peg],
        value: 1.0,
        support: [lo, 2.95],
        density: Density::Negation { c: 1.0 },
    });
    peg
}

/// Emits one item per nonzero linear coefficient and returns, per primary
/// bidder, the constant that cancels the offsets the items introduce.
///
/// `a[i][j] > 0` is realized against the negation of `j` (worth `2a` to `i`,
/// `a` to the negation bidder), `a[i][j] < 0` with `i != j` against `j`
/// itself. Negative diagonal entries are not handled here.
pub fn build_linear_gadgets(instance: &mut MarketInstance, a: &[Vec<f64>], primary: &[usize], negation: &[usize]) -> Vec<f64> {
    let d = primary.len();
    let mut constants = vec![0.0; d];
    for i in 0..d {
        for j in 0..d {
            let c = a[i][j];
            if c > 0.0 {
                instance.add_item(&[(primary[i], 2.0 * c), (negation[j], c)], None);
                constants[i] += c;
            } else if c < 0.0 && i != j {
                let cbar = -c;
                instance.add_item(&[(primary[i], 2.0 * cbar), (primary[j], cbar)], None);
                constants[i] -= 2.0 * cbar;
            }
        }
    }
    constants
}

/// Adds a constant `c` to the utility of `bidder`: an uncontested item when
/// positive, an item lost to the peg's bid otherwise. Creates the peg lazily.
pub fn build_constant_gadget(instance: &mut MarketInstance, bidder: usize, c: f64, peg: &mut Option<usize>) {
    if c > 0.0 {
        instance.add_item(&[(bidder, c)], None);
    } else if c < 0.0 {
        let p = *peg.get_or_insert_with(|| build_peg(instance));
        let vp = (c.abs() / 0.05).max(1.0);
        instance.add_item(&[(bidder, PEG_LEVEL * vp + c), (p, vp)], None);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::utility;

    #[test]
    fn nonlinear_gadget_recovers_h() {
        let h = ScalarFn::Linear { slope: -1.0, intercept: 0.0 };
        let mut inst = MarketInstance::new(1);
        inst.add_segment(build_nonlinear_gadget(&h, 0).unwrap());
        for m in [1.05, 1.2, 1.5, 1.95] {
            let u = utility(&inst, &[m]).unwrap()[0];
            assert!((u - (-(m - 1.05))).abs() < 1e-14);
        }
        assert!(build_nonlinear_gadget(&ScalarFn::Linear { slope: 0.5, intercept: 0.0 }, 0).is_err());
    }

    #[test]
    fn negation_gadget_utility() {
        let lam = 37.0;
        let mut inst = MarketInstance::new(1);
        let bar = build_negation_gadget(&mut inst, lam, 0).unwrap();
        for (m, mb) in [(1.5, 1.5), (1.2, 1.9), (1.9, 1.06)] {
            let u = utility(&inst, &[m, mb]).unwrap();
            assert_eq!(u[0], 0.0);
            assert!((u[bar] - (3.0 * lam - lam * m - lam * mb)).abs() < 1e-11);
        }
        assert!(matches!(build_negation_gadget(&mut inst, 0.5, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn peg_rests_at_two() {
        let mut inst = MarketInstance::new(0);
        let p = build_peg(&mut inst);
        assert_eq!(utility(&inst, &[PEG_LEVEL]).unwrap()[p], 0.0);
        assert!((utility(&inst, &[1.5]).unwrap()[p] - 0.5).abs() < 1e-14);
        assert!((utility(&inst, &[2.5]).unwrap()[p] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn constants_both_signs() {
        let mut inst = MarketInstance::new(1);
        let mut peg = None;
        build_constant_gadget(&mut inst, 0, 0.7, &mut peg);
        assert!(peg.is_none());
        build_constant_gadget(&mut inst, 0, -0.005, &mut peg);
        build_constant_gadget(&mut inst, 0, -3.0, &mut peg);
        let p = peg.unwrap();
        for m in [1.05, 1.5, 1.95] {
            let mut prof = vec![m; inst.n_bidders];
            prof[p] = PEG_LEVEL;
            let u = utility(&inst, &prof).unwrap();
            assert!((u[0] - (0.7 - 0.005 - 3.0)).abs() < 1e-13, "{}", u[0]);
            assert_eq!(u[p], 0.0);
        }
    }

    #[test]
    fn linear_gadget_contributions() {
        let mut inst = MarketInstance::new(4);
        let a = vec![vec![0.0, 0.5], vec![-0.25, 0.0]];
        let c = build_linear_gadgets(&mut inst, &a, &[0, 1], &[2, 3]);
        assert_eq!(c, vec![0.5, -0.5]);
        let u = utility(&inst, &[1.3, 1.7, 1.4, 1.5]).unwrap();
        assert!((u[0] + c[0] - 0.5 * (3.0 - 1.5)).abs() < 1e-15);
        assert!((u[1] + c[1] - (-0.25 * 1.3)).abs() < 1e-15);
        assert_eq!(u[2], 0.0);
        assert_eq!(u[3], 0.0);
    }

    #[test]
    fn discretized_gadget_within_eps() {
        let h = ScalarFn::Linear { slope: -1.0, intercept: 0.0 };
        let mut inst = MarketInstance::new(1);
        let k = discretize_nonlinear_gadget(&mut inst, &h, 0, 0.01).unwrap();
        assert!(k <= 200);
        for s in 0..10_000 {
            let m = GADGET_LO + (GADGET_HI - GADGET_LO) * s as f64 / 9_999.0;
            let u = utility(&inst, &[m]).unwrap()[0];
            assert!((u - (-(m - GADGET_LO))).abs() <= 0.01);
        }
        let mut empty = MarketInstance::new(1);
        assert_eq!(discretize_nonlinear_gadget(&mut empty, &h, 0, f64::INFINITY).unwrap(), 0);
        assert!(matches!(discretization_size(&h, 1e-9), Err(Error::Capacity { .. })));
    }
}
