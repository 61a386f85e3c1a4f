//! Ellipses, Z₂×Z₂-symmetric normal deformation fields and deformed domains.
//!
//! Boundaries are parametrised by the ellipse angle θ, `x(θ) = (A cos θ,
//! B sin θ)`, traversed counter-clockwise. Normal displacements ρ̇ are
//! measured along the outward unit normal, and every boundary integral is
//! written as `∫ f(θ) |x'(θ)| dθ`.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quad;

/// Plane vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        self * (1.0 / self.norm())
    }

    /// Rotation by −π/2; maps a counter-clockwise tangent to the outward normal.
    pub fn rot_cw(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// The ellipse `x²/a + y²/b = 1` with `a = A²`, `b = B²`, `A ≥ B > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseDomain {
    #[serde(rename = "A")]
    semi_major: f64,
    #[serde(rename = "B")]
    semi_minor: f64,
}

impl EllipseDomain {
    pub fn new(semi_major: f64, semi_minor: f64) -> Result<Self> {
        if !(semi_minor > 0.0 && semi_major.is_finite() && semi_major >= semi_minor) {
            return Err(Error::InvalidDomain(format!(
                "need A >= B > 0, got A = {semi_major}, B = {semi_minor}"
            )));
        }
        Ok(Self { semi_major, semi_minor })
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Self::new(radius, radius)
    }

    /// Semi-axis `A`.
    pub fn semi_major(&self) -> f64 {
        self.semi_major
    }

    /// Semi-axis `B`.
    pub fn semi_minor(&self) -> f64 {
        self.semi_minor
    }

    /// `a = A²`.
    pub fn a(&self) -> f64 {
        self.semi_major * self.semi_major
    }

    /// `b = B²`.
    pub fn b(&self) -> f64 {
        self.semi_minor * self.semi_minor
    }

    /// Confocal parameter `a − b` (squared focal distance).
    pub fn eps(&self) -> f64 {
        self.a() - self.b()
    }

    pub fn is_disk(&self) -> bool {
        self.semi_major == self.semi_minor
    }

    pub fn area(&self) -> f64 {
        PI * self.semi_major * self.semi_minor
    }

    pub fn point(&self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(self.semi_major * c, self.semi_minor * s)
    }

    pub fn tangent(&self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(-self.semi_major * s, self.semi_minor * c)
    }

    /// `|x'(θ)|`.
    pub fn speed(&self, theta: f64) -> f64 {
        self.tangent(theta).norm()
    }

    pub fn outward_normal(&self, theta: f64) -> Vec2 {
        self.tangent(theta).rot_cw().normalized()
    }

    pub fn curvature(&self, theta: f64) -> f64 {
        let s = self.speed(theta);
        self.semi_major * self.semi_minor / (s * s * s)
    }

    fn curvature_derivative(&self, theta: f64) -> f64 {
        let s = self.speed(theta);
        let (sn, cs) = theta.sin_cos();
        let ds = (self.a() - self.b()) * sn * cs / s;
        -3.0 * self.semi_major * self.semi_minor * ds / (s * s * s * s)
    }

    /// Ellipse angle of a boundary point.
    pub fn angle_of(&self, p: Vec2) -> f64 {
        wrap_angle((p.y / self.semi_minor).atan2(p.x / self.semi_major))
    }
}

/// Normal velocity field ρ̇(θ) on the boundary.
///
/// The symmetric mode stores coefficients of `cos(2kθ)`, which span exactly
/// the smooth functions invariant under θ → −θ and θ → π − θ. The sampled
/// mode keeps the trigonometric interpolant of values on a uniform grid and
/// is used for asymmetric validation fields (translations, dilations).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DeformationField {
    Symmetric { coefficients: Vec<f64> },
    Sampled { cos: Vec<f64>, sin: Vec<f64>, samples: usize },
}

impl DeformationField {
    pub fn symmetric(coefficients: Vec<f64>) -> Self {
        DeformationField::Symmetric { coefficients }
    }

    pub fn zero() -> Self {
        Self::symmetric(vec![0.0])
    }

    /// Single symmetric mode `cos(2kθ)`.
    pub fn mode(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Self::symmetric(c)
    }

    /// Trigonometric interpolant of values on `θ_j = 2πj/n`.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 4 || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("need at least 4 finite samples".into()));
        }
        let kmax = n / 2;
        let mut cos = vec![0.0; kmax + 1];
        let mut sin = vec![0.0; kmax + 1];
        for (k, (ck, sk)) in cos.iter_mut().zip(sin.iter_mut()).enumerate() {
            let mut a = 0.0;
            let mut b = 0.0;
            for (j, v) in values.iter().enumerate() {
                // exact reduction of the phase keeps the transform symmetric
                let ph = TAU * ((k * j) % n) as f64 / n as f64;
                a += v * ph.cos();
                b += v * ph.sin();
            }
            let scale = if k == 0 || (n % 2 == 0 && k == kmax) { 1.0 } else { 2.0 };
            *ck = scale * a / n as f64;
            *sk = if n % 2 == 0 && k == kmax { 0.0 } else { scale * b / n as f64 };
        }
        Ok(DeformationField::Sampled { cos, sin, samples: n })
    }

    /// Samples `f` on a uniform grid and interpolates.
    pub fn from_fn<F: Fn(f64) -> f64>(n: usize, f: F) -> Result<Self> {
        let values: Vec<f64> = quad::periodic_grid(n).into_iter().map(f).collect();
        Self::from_samples(&values)
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self, DeformationField::Symmetric { .. })
    }

    /// Highest angular frequency present (in multiples of θ).
    pub fn top_frequency(&self) -> usize {
        match self {
            DeformationField::Symmetric { coefficients } => 2 * coefficients.len().saturating_sub(1),
            DeformationField::Sampled { cos, .. } => cos.len().saturating_sub(1),
        }
    }

    /// `∂^order ρ̇ / ∂θ^order` for order 0, 1 or 2.
    fn eval_order(&self, theta: f64, order: u8) -> f64 {
        let term = |k: f64, a: f64, b: f64| {
            let (s, c) = (k * theta).sin_cos();
            match order {
                0 => a * c + b * s,
                1 => k * (-a * s + b * c),
                _ => -k * k * (a * c + b * s),
            }
        };
        match self {
            DeformationField::Symmetric { coefficients } => coefficients
                .iter()
                .enumerate()
                .map(|(k, &c)| term(2.0 * k as f64, c, 0.0))
                .sum(),
            DeformationField::Sampled { cos, sin, .. } => cos
                .iter()
                .zip(sin)
                .enumerate()
                .map(|(k, (&a, &b))| term(k as f64, a, b))
                .sum(),
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.eval_order(theta, 0)
    }

    pub fn derivative(&self, theta: f64) -> f64 {
        self.eval_order(theta, 1)
    }

    pub fn second_derivative(&self, theta: f64) -> f64 {
        self.eval_order(theta, 2)
    }

    /// Symmetric cosine coefficients, if in symmetric mode.
    pub fn coefficients(&self) -> Option<&[f64]> {
        match self {
            DeformationField::Symmetric { coefficients } => Some(coefficients),
            _ => None,
        }
    }

    /// True when every coefficient vanishes to `tol`.
    pub fn is_zero(&self, tol: f64) -> bool {
        match self {
            DeformationField::Symmetric { coefficients } => coefficients.iter().all(|c| c.abs() <= tol),
            DeformationField::Sampled { cos, sin, .. } => cos.iter().chain(sin).all(|c| c.abs() <= tol),
        }
    }

    /// Coefficient-space Euclidean norm.
    pub fn coefficient_norm(&self) -> f64 {
        match self {
            DeformationField::Symmetric { coefficients } => coefficients.iter().map(|c| c * c).sum::<f64>().sqrt(),
            DeformationField::Sampled { cos, sin, .. } => cos.iter().chain(sin).map(|c| c * c).sum::<f64>().sqrt(),
        }
    }

    /// Upper bound for `sup |ρ̇|`.
    pub fn sup_bound(&self) -> f64 {
        match self {
            DeformationField::Symmetric { coefficients } => coefficients.iter().map(|c| c.abs()).sum(),
            DeformationField::Sampled { cos, sin, .. } => cos.iter().chain(sin).map(|c| c.abs()).sum(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            DeformationField::Symmetric { coefficients } => {
                Self::symmetric(coefficients.iter().map(|c| c * s).collect())
            }
            DeformationField::Sampled { cos, sin, samples } => DeformationField::Sampled {
                cos: cos.iter().map(|c| c * s).collect(),
                sin: sin.iter().map(|c| c * s).collect(),
                samples: *samples,
            },
        }
    }

    /// `α·self + β·other` for two symmetric fields.
    pub fn combine(&self, alpha: f64, other: &DeformationField, beta: f64) -> Result<Self> {
        match (self, other) {
            (DeformationField::Symmetric { coefficients: a }, DeformationField::Symmetric { coefficients: b }) => {
                let n = a.len().max(b.len());
                let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
                Ok(Self::symmetric((0..n).map(|i| alpha * get(a, i) + beta * get(b, i)).collect()))
            }
            _ => Err(Error::InvalidField("linear combinations need symmetric fields".into())),
        }
    }
}

/// A normal deformation `x → x + ε ρ̇(x) ν_x` of the base ellipse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deformation {
    pub field: DeformationField,
    pub amplitude: f64,
}

/// Geometric data at one boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub position: Vec2,
    /// Outward unit normal.
    pub normal: Vec2,
    /// `|x'(θ)|`.
    pub speed: f64,
    pub curvature: f64,
}

impl BoundaryPoint {
    /// Counter-clockwise unit tangent.
    pub fn tangent(&self) -> Vec2 {
        Vec2::new(-self.normal.y, self.normal.x)
    }
}

/// An ellipse or a normal deformation of one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub base: EllipseDomain,
    pub deformation: Option<Deformation>,
}

const INJECTIVITY_SAMPLES: usize = 4096;

impl DomainSpec {
    pub fn ellipse(base: EllipseDomain) -> Self {
        Self { base, deformation: None }
    }

    /// Deformed domain; rejects amplitudes past the loss of star-shapedness.
    pub fn deformed(base: EllipseDomain, field: DeformationField, amplitude: f64) -> Result<Self> {
        if !amplitude.is_finite() {
            return Err(Error::InvalidDomain("non-finite deformation amplitude".into()));
        }
        let spec = Self { base, deformation: Some(Deformation { field, amplitude }) };
        spec.check_embedded()?;
        Ok(spec)
    }

    /// The curve stays embedded (and star-shaped about the origin) while the
    /// polar angle advances monotonically: `x × x' > 0` everywhere.
    fn check_embedded(&self) -> Result<()> {
        let mut worst = f64::INFINITY;
        for th in quad::periodic_grid(INJECTIVITY_SAMPLES) {
            let (x, dx, _) = self.derivatives(th);
            worst = worst.min(x.cross(dx));
        }
        let floor = 1e-3 * self.base.semi_major() * self.base.semi_minor();
        if worst <= floor {
            return Err(Error::InvalidDomain(format!(
                "deformed boundary is not embedded/star-shaped (min radial speed {worst:.3e})"
            )));
        }
        Ok(())
    }

    pub fn is_exact_ellipse(&self) -> bool {
        match &self.deformation {
            None => true,
            Some(d) => d.amplitude == 0.0 || d.field.is_zero(0.0),
        }
    }

    /// True when the domain keeps the Z₂×Z₂ symmetry of the ellipse.
    pub fn is_symmetric(&self) -> bool {
        self.deformation.as_ref().map_or(true, |d| d.field.is_symmetric() || d.amplitude == 0.0)
    }

    /// Position and its first two θ-derivatives.
    pub fn derivatives(&self, theta: f64) -> (Vec2, Vec2, Vec2) {
        let e = &self.base;
        let x = e.point(theta);
        let dx = e.tangent(theta);
        let ddx = -x;
        match &self.deformation {
            None => (x, dx, ddx),
            Some(Deformation { field, amplitude }) => {
                let eps = *amplitude;
                let nu = e.outward_normal(theta);
                let k = e.curvature(theta);
                let dk = e.curvature_derivative(theta);
                let rho = field.eval(theta);
                let drho = field.derivative(theta);
                let ddrho = field.second_derivative(theta);
                // ν' = κ x', ν'' = κ' x' + κ x''
                let dnu = dx * k;
                let ddnu = dx * dk + ddx * k;
                let p = x + nu * (eps * rho);
                let dp = dx + (nu * drho + dnu * rho) * eps;
                let ddp = ddx + (nu * ddrho + dnu * (2.0 * drho) + ddnu * rho) * eps;
                (p, dp, ddp)
            }
        }
    }

    pub fn boundary_point(&self, theta: f64) -> BoundaryPoint {
        let theta = wrap_angle(theta);
        let (position, d1, d2) = self.derivatives(theta);
        let speed = d1.norm();
        BoundaryPoint {
            position,
            normal: d1.rot_cw() * (1.0 / speed),
            speed,
            curvature: d1.cross(d2) / (speed * speed * speed),
        }
    }

    /// Arclength `∫ |x'(θ)| dθ` by adaptive Gauss–Kronrod quadrature.
    pub fn perimeter(&self) -> Result<f64> {
        quad::integrate(|t| self.derivatives(t).1.norm(), 0.0, TAU, 1e-14, 1e-14)
    }

    /// Enclosed area `½ ∮ x × x' dθ`.
    pub fn area(&self) -> Result<f64> {
        quad::integrate(
            |t| {
                let (x, dx, _) = self.derivatives(t);
                0.5 * x.cross(dx)
            },
            0.0,
            TAU,
            1e-14,
            1e-14,
        )
    }

    /// Largest distance of the boundary from the origin (sampled).
    pub fn max_radius(&self) -> f64 {
        quad::periodic_grid(1024)
            .into_iter()
            .map(|t| self.derivatives(t).0.norm())
            .fold(0.0, f64::max)
            * 1.0001
    }
}

/// Convenience wrapper: [`DomainSpec::boundary_point`] as a free function.
pub fn boundary_point(domain: &DomainSpec, theta: f64) -> BoundaryPoint {
    domain.boundary_point(theta)
}

/// Convenience wrapper: [`DomainSpec::perimeter`].
pub fn perimeter(domain: &DomainSpec) -> Result<f64> {
    domain.perimeter()
}

/// Convenience wrapper: [`DeformationField::eval`].
pub fn eval_deformation(field: &DeformationField, theta: f64) -> f64 {
    field.eval(theta)
}

/// Translation field `ρ̇ = ⟨v, ν⟩` on `domain`, sampled on `n` points.
pub fn translation_field(domain: &DomainSpec, v: Vec2, n: usize) -> Result<DeformationField> {
    DeformationField::from_fn(n, |t| domain.boundary_point(t).normal.dot(v))
}

/// Dilation field `ρ̇ = ⟨x, ν_x⟩` on `domain`, sampled on `n` points.
pub fn dilation_field(domain: &DomainSpec, n: usize) -> Result<DeformationField> {
    DeformationField::from_fn(n, |t| {
        let bp = domain.boundary_point(t);
        bp.position.dot(bp.normal)
    })
}
