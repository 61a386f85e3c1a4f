//! Fourier–Bessel particular solutions adapted to the Z₂×Z₂ parity classes.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::numerics::bessel::bessel_j_all;

/// Parity under (x → −x, y → −y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryClass {
    EvenEven,
    OddEven,
    EvenOdd,
    OddOdd,
}

impl SymmetryClass {
    pub const ALL: [SymmetryClass; 4] =
        [SymmetryClass::EvenEven, SymmetryClass::OddEven, SymmetryClass::EvenOdd, SymmetryClass::OddOdd];

    /// Odd under x → −x.
    pub fn odd_in_x(self) -> bool {
        matches!(self, SymmetryClass::OddEven | SymmetryClass::OddOdd)
    }

    /// Odd under y → −y.
    pub fn odd_in_y(self) -> bool {
        matches!(self, SymmetryClass::EvenOdd | SymmetryClass::OddOdd)
    }

    /// Angular factor is `sin(nφ)` (otherwise `cos(nφ)`).
    fn uses_sine(self) -> bool {
        self.odd_in_y()
    }

    /// Lowest angular order; orders step by two.
    fn first_order(self) -> usize {
        match self {
            SymmetryClass::EvenEven => 0,
            SymmetryClass::OddOdd => 2,
            SymmetryClass::OddEven | SymmetryClass::EvenOdd => 1,
        }
    }

    /// Angular orders `n ≤ n_max` in this class.
    pub fn orders(self, n_max: usize) -> Vec<usize> {
        (self.first_order()..=n_max.max(self.first_order())).step_by(2).collect()
    }

    pub fn label(self) -> &'static str {
        match self {
            SymmetryClass::EvenEven => "ee",
            SymmetryClass::OddEven => "oe",
            SymmetryClass::EvenOdd => "eo",
            SymmetryClass::OddOdd => "oo",
        }
    }
}

/// A Helmholtz solution `Σ c_n J_n(λr) T(nφ)` in one parity class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierBessel {
    pub class: SymmetryClass,
    pub lambda: f64,
    pub orders: Vec<usize>,
    pub coefficients: Vec<f64>,
}

/// Value and gradient of every basis function at one point.
pub(crate) struct BasisSample {
    pub value: Vec<f64>,
    pub grad: Vec<Vec2>,
}

/// Evaluates basis functions `J_n(λr) T(nφ)` for the given orders at `p`.
///
/// `with_grad` selects whether gradients are filled.
pub(crate) fn sample_basis(
    class: SymmetryClass,
    orders: &[usize],
    lambda: f64,
    p: Vec2,
    with_grad: bool,
    scratch: &mut Vec<f64>,
) -> BasisSample {
    let n_top = orders.last().copied().unwrap_or(0);
    let r = p.norm();
    let phi = p.y.atan2(p.x);
    scratch.resize(n_top + 2, 0.0);
    bessel_j_all(lambda * r, scratch);
    let (sphi, cphi) = phi.sin_cos();
    let e_r = Vec2::new(cphi, sphi);
    let e_phi = Vec2::new(-sphi, cphi);
    let sine = class.uses_sine();
    let mut value = Vec::with_capacity(orders.len());
    let mut grad = Vec::with_capacity(if with_grad { orders.len() } else { 0 });
    // (cos nφ, sin nφ) advanced by rotation through 2φ; orders step by two
    let (s2, c2) = (2.0 * phi).sin_cos();
    let first = orders.first().copied().unwrap_or(0);
    let (mut s, mut c) = (first as f64 * phi).sin_cos();
    for (i, &n) in orders.iter().enumerate() {
        if i > 0 {
            let cn = c * c2 - s * s2;
            s = s * c2 + c * s2;
            c = cn;
        }
        let (t, dt) = if sine { (s, n as f64 * c) } else { (c, -(n as f64) * s) };
        let j = scratch[n];
        value.push(j * t);
        if with_grad {
            let dj = if n == 0 { -scratch[1] } else { 0.5 * (scratch[n - 1] - scratch[n + 1]) };
            let radial = lambda * dj * t;
            // (1/r) ∂φ; J_n(λr)/r stays bounded as r → 0 for n ≥ 1
            let angular = if r > 1e-300 {
                j * dt / r
            } else if n == 1 {
                0.5 * lambda * dt
            } else {
                0.0
            };
            grad.push(e_r * radial + e_phi * angular);
        }
    }
    BasisSample { value, grad }
}

impl FourierBessel {
    pub fn value(&self, p: Vec2) -> f64 {
        let mut scratch = Vec::new();
        let s = sample_basis(self.class, &self.orders, self.lambda, p, false, &mut scratch);
        s.value.iter().zip(&self.coefficients).map(|(v, c)| v * c).sum()
    }

    pub fn value_and_gradient(&self, p: Vec2) -> (f64, Vec2) {
        let mut scratch = Vec::new();
        self.value_and_gradient_with(p, &mut scratch)
    }

    pub(crate) fn value_and_gradient_with(&self, p: Vec2, scratch: &mut Vec<f64>) -> (f64, Vec2) {
        let s = sample_basis(self.class, &self.orders, self.lambda, p, true, scratch);
        let mut v = 0.0;
        let mut g = Vec2::default();
        for ((bv, bg), c) in s.value.iter().zip(&s.grad).zip(&self.coefficients) {
            v += bv * c;
            g = g + *bg * *c;
        }
        (v, g)
    }

    pub(crate) fn value_with(&self, p: Vec2, scratch: &mut Vec<f64>) -> f64 {
        let s = sample_basis(self.class, &self.orders, self.lambda, p, false, scratch);
        s.value.iter().zip(&self.coefficients).map(|(v, c)| v * c).sum()
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.coefficients {
            *c *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parities_match_class() {
        let p = Vec2::new(0.31, 0.47);
        for class in SymmetryClass::ALL {
            let orders = class.orders(9);
            let mut scratch = Vec::new();
            let a = sample_basis(class, &orders, 3.3, p, false, &mut scratch).value;
            let bx = sample_basis(class, &orders, 3.3, Vec2::new(-p.x, p.y), false, &mut scratch).value;
            let by = sample_basis(class, &orders, 3.3, Vec2::new(p.x, -p.y), false, &mut scratch).value;
            let sx = if class.odd_in_x() { -1.0 } else { 1.0 };
            let sy = if class.odd_in_y() { -1.0 } else { 1.0 };
            for i in 0..orders.len() {
                assert!((bx[i] - sx * a[i]).abs() < 1e-14, "{class:?} x-parity");
                assert!((by[i] - sy * a[i]).abs() < 1e-14, "{class:?} y-parity");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = Vec2::new(0.6, -0.25);
        let h = 1e-6;
        for class in SymmetryClass::ALL {
            let orders = class.orders(8);
            let mut scratch = Vec::new();
            let s = sample_basis(class, &orders, 4.1, p, true, &mut scratch);
            let fx = |q: Vec2, sc: &mut Vec<f64>| sample_basis(class, &orders, 4.1, q, false, sc).value;
            let px = fx(p + Vec2::new(h, 0.0), &mut scratch);
            let mx = fx(p - Vec2::new(h, 0.0), &mut scratch);
            let py = fx(p + Vec2::new(0.0, h), &mut scratch);
            let my = fx(p - Vec2::new(0.0, h), &mut scratch);
            for i in 0..orders.len() {
                let g = Vec2::new((px[i] - mx[i]) / (2.0 * h), (py[i] - my[i]) / (2.0 * h));
                assert!((g - s.grad[i]).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn basis_satisfies_helmholtz() {
        // five-point Laplacian of one basis function
        let class = SymmetryClass::EvenOdd;
        let orders = vec![3];
        let lam = 2.7;
        let p = Vec2::new(0.4, 0.3);
        let h = 1e-3;
        let mut sc = Vec::new();
        let mut f = |q: Vec2| sample_basis(class, &orders, lam, q, false, &mut sc).value[0];
        let c = f(p);
        let lap = (f(p + Vec2::new(h, 0.0)) + f(p - Vec2::new(h, 0.0)) + f(p + Vec2::new(0.0, h))
            + f(p - Vec2::new(0.0, h))
            - 4.0 * c)
            / (h * h);
        assert!((lap + lam * lam * c).abs() < 1e-5);
    }
}
