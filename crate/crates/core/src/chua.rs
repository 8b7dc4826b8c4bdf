//! Chua's circuit, its negation-augmented variant and its form as a
//! reduction target.

use serde::{Deserialize, Serialize};

use crate::continuous::{FastCoord, VectorField};
use crate::error::{Error, Result};
use crate::func::ScalarFn;
use crate::reduction::{conjugate, AffineMap, TargetSystem, BOX_HI, BOX_LO};

/// Box enclosing the double-scroll attractor.
pub const CHUA_BOX: [[f64; 2]; 3] = [[-2.5, 2.5], [-0.45, 0.45], [-9.5, 9.5]];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChuaParams {
    pub c1: f64,
    pub c2: f64,
    pub l: f64,
    pub r: f64,
    pub ga: f64,
    pub gb: f64,
    pub r0: f64,
}

impl Default for ChuaParams {
    fn default() -> Self {
        ChuaParams {
            c1: 1.0,
            c2: 9.3515,
            l: 0.06913,
            r: 0.33065,
            ga: -3.4429,
            gb: -2.1849,
            r0: 0.00036,
        }
    }
}

impl ChuaParams {
    pub fn g(&self) -> f64 {
        1.0 / self.r
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.c1, self.c2, self.l, self.r, self.ga, self.gb, self.r0];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("circuit parameters must be finite".into()));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0 && self.l > 0.0 && self.r > 0.0) {
            return Err(Error::Parameter("C1, C2, L and R must be positive".into()));
        }
        Ok(())
    }

    pub fn diode_fn(&self) -> ScalarFn {
        ScalarFn::ChuaDiode { ga: self.ga, gb: self.gb }
    }

    /// `-g(x) - G x - x`, the diode with the unit slope moved into the matrix.
    pub fn diode_tilde_fn(&self) -> ScalarFn {
        ScalarFn::transformed(self.diode_fn(), 0.0, 1.0, -1.0, -(self.g() + 1.0), 0.0)
    }
}

pub fn diode(x: f64, p: &ChuaParams) -> f64 {
    p.gb * x + 0.5 * (p.ga - p.gb) * ((x + 1.0).abs() - (x - 1.0).abs())
}

pub fn diode_tilde(x: f64, p: &ChuaParams) -> f64 {
    -diode(x, p) - p.g() * x - x
}

pub fn chua_field(s: &[f64], p: &ChuaParams) -> [f64; 3] {
    let (x, y, z) = (s[0], s[1], s[2]);
    let g = p.g();
    [
        (g * (y - x) - diode(x, p)) / p.c1,
        (g * (x - y) + z) / p.c2,
        (-y - p.r0 * z) / p.l,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChuaField {
    pub params: ChuaParams,
}

impl VectorField for ChuaField {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) -> Result<()> {
        dx.copy_from_slice(&chua_field(x, &self.params));
        Ok(())
    }
}

/// Derivative of `(x, y, z, xb, yb, zb)`: each bar relaxes toward
/// `3 - partner` at rate `lambda`, and the primaries read positive couplings
/// through `3 - bar`.
pub fn augmented_field(s: &[f64], p: &ChuaParams, lambda: f64) -> [f64; 6] {
    let (x, y, z, xb, yb, zb) = (s[0], s[1], s[2], s[3], s[4], s[5]);
    let g = p.g();
    [
        ((3.0 - xb) + g * (3.0 - yb) + diode_tilde(x, p)) / p.c1,
        (g * (3.0 - xb) - g * y + (3.0 - zb)) / p.c2,
        (-y - p.r0 * z) / p.l,
        lambda * (3.0 - x - xb),
        lambda * (3.0 - y - yb),
        lambda * (3.0 - z - zb),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedChua {
    pub params: ChuaParams,
    pub lambda: f64,
    fast: Vec<FastCoord>,
}

impl AugmentedChua {
    pub fn new(params: ChuaParams, lambda: f64) -> Result<Self> {
        params.validate()?;
        if !(lambda >= 1.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!("negation rate must be at least 1, got {lambda}")));
        }
        let fast = (0..3).map(|k| FastCoord::negation(3 + k, k, lambda)).collect();
        Ok(AugmentedChua { params, lambda, fast })
    }
}

impl VectorField for AugmentedChua {
    fn dim(&self) -> usize {
        6
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) -> Result<()> {
        dx.copy_from_slice(&augmented_field(x, &self.params, self.lambda));
        Ok(())
    }

    fn fast_coords(&self) -> &[FastCoord] {
        &self.fast
    }
}

/// `(x, y, z)` lifted onto the slice where every bar equals `3 - partner`.
pub fn augmented_initial(x0: &[f64]) -> Vec<f64> {
    vec![x0[0], x0[1], x0[2], 3.0 - x0[0], 3.0 - x0[1], 3.0 - x0[2]]
}

/// The map from circuit coordinates into `[1.1, 1.9]^3`.
pub fn chua_encoding() -> AffineMap {
    AffineMap::onto_box(&CHUA_BOX)
}

/// Six-dimensional extension of [`chua_encoding`]: bars use the offset that
/// sends `3 - x` to `3 - X`, so bar dynamics keep their form.
pub fn augmented_encoding() -> AffineMap {
    let e = chua_encoding();
    let mut offset = e.offset.clone();
    offset.extend(e.offset.iter().zip(&e.scale).map(|(o, s)| 3.0 - o - 3.0 * s));
    let mut scale = e.scale.clone();
    scale.extend_from_slice(&e.scale);
    AffineMap { offset, scale }
}

/// Chua's circuit written as `A x + h(x)` in box coordinates, ready to compile.
pub fn chua_as_target_with(p: &ChuaParams) -> TargetSystem {
    let g = p.g();
    let a = vec![
        vec![1.0 / p.c1, g / p.c1, 0.0],
        vec![g / p.c2, 0.0, 1.0 / p.c2],
        vec![0.0, -1.0 / p.l, 0.0],
    ];
    let h = vec![
        ScalarFn::transformed(p.diode_tilde_fn(), 0.0, 1.0, 1.0 / p.c1, 0.0, 0.0),
        ScalarFn::Linear { slope: -g / p.c2, intercept: 0.0 },
        ScalarFn::Linear { slope: -p.r0 / p.l, intercept: 0.0 },
    ];
    let enc = chua_encoding();
    let (at, ht) = conjugate(&a, &h, &enc);
    TargetSystem {
        dimension: 3,
        a: at,
        h: ht,
        bounds: vec![[BOX_LO, BOX_HI]; 3],
        lipschitz: None,
        normalized: true,
        encoding: Some(enc),
    }
}

pub fn chua_as_target() -> TargetSystem {
    chua_as_target_with(&ChuaParams::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diode_values() {
        let p = ChuaParams::default();
        assert_eq!(diode(0.0, &p), 0.0);
        assert!((diode(1.0, &p) - p.ga).abs() < 1e-15);
        assert!((diode(2.0, &p) - (p.ga + p.gb)).abs() < 1e-14);
        for x in [-3.0, -0.4, 0.7, 5.5] {
            assert_eq!(diode(x, &p), p.diode_fn().eval(x));
            assert!((diode_tilde(x, &p) - p.diode_tilde_fn().eval(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn field_examples() {
        let p = ChuaParams::default();
        assert_eq!(chua_field(&[0.0, 0.0, 0.0], &p), [0.0; 3]);
        let dx = chua_field(&[1.0, 0.0, 0.0], &p)[0];
        assert!((dx - (-p.g() - p.ga)).abs() < 1e-15);
        assert!((dx - 0.41857).abs() < 1e-4);
    }

    #[test]
    fn augmented_on_slice_is_chua() {
        let p = ChuaParams::default();
        for s in [[0.1, 0.1, 0.1], [-1.7, 0.3, 6.2], [2.2, -0.4, -8.0]] {
            let a = augmented_field(&augmented_initial(&s), &p, 100.0);
            let c = chua_field(&s, &p);
            for k in 0..3 {
                assert!((a[k] - c[k]).abs() < 1e-12 * (1.0 + c[k].abs()));
                assert_eq!(a[3 + k], 0.0);
            }
        }
    }

    #[test]
    fn encoding_corners() {
        let e = chua_encoding();
        let lo = e.encode(&[-2.5, -0.45, -9.5]);
        let hi = e.encode(&[2.5, 0.45, 9.5]);
        for k in 0..3 {
            assert!((lo[k] - 1.1).abs() < 1e-14);
            assert!((hi[k] - 1.9).abs() < 1e-14);
        }
        let big = augmented_encoding().encode(&augmented_initial(&[0.3, -0.1, 2.0]));
        for k in 0..3 {
            assert!((big[3 + k] - (3.0 - big[k])).abs() < 1e-14);
        }
    }

    #[test]
    fn target_is_conjugate_of_circuit() {
        let p = ChuaParams::default();
        let t = chua_as_target();
        t.validate().unwrap();
        let e = chua_encoding();
        for s in [[0.1, 0.1, 0.1], [-1.7, 0.3, 6.2], [2.2, -0.4, -8.0]] {
            let v = t.field(&e.encode(&s));
            let c = chua_field(&s, &p);
            for k in 0..3 {
                assert!((v[k] / e.scale[k] - c[k]).abs() < 1e-11);
            }
        }
    }
}
