//! Billiard map on the coball bundle of the boundary, the caustic invariant of
//! the ellipse and its invariant curves with their Leray densities.
//!
//! Phase points are `(θ, ζ)` with θ the boundary parameter and ζ the component
//! of the unit velocity along the unit tangent `x'/|x'|`. A ray leaving the
//! boundary travels in direction `ζ t̂ − γ₁ ν` with ν the outward normal and
//! `γ₁ = sqrt(1 − ζ²)`.

mod families;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, DomainSpec, EllipseDomain, Vec2};
use crate::numerics::{quad, roots::brent_root, sum::neumaier_sum};

pub use families::{
    birkhoff_rotation_number, length_spectrum, multiplicity_filter, periodic_family, rotation_number, FamilyKind,
    LengthGroup, PeriodicFamily,
};

/// Phase points with `|ζ| ≥ 1 − GLANCING_MARGIN` are rejected.
pub const GLANCING_MARGIN: f64 = 1e-6;
/// Rays with `|Z| ≤ FOCAL_MARGIN` pass (numerically) through a focus.
pub const FOCAL_MARGIN: f64 = 1e-8;

/// A point of the open coball bundle of the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub theta: f64,
    pub zeta: f64,
}

impl PhasePoint {
    pub fn new(theta: f64, zeta: f64) -> Self {
        Self { theta, zeta }
    }

    /// Normal component `γ₁ = sqrt(1 − ζ²)`.
    pub fn gamma1(&self) -> f64 {
        (1.0 - self.zeta * self.zeta).max(0.0).sqrt()
    }

    /// Time reversal `(θ, ζ) → (θ, −ζ)`.
    pub fn reversed(&self) -> Self {
        Self { theta: self.theta, zeta: -self.zeta }
    }
}

fn check_glancing(pt: &PhasePoint) -> Result<()> {
    if !pt.zeta.is_finite() || pt.zeta.abs() >= 1.0 - GLANCING_MARGIN {
        return Err(Error::Glancing { zeta: pt.zeta, margin: GLANCING_MARGIN });
    }
    Ok(())
}

/// Position, unit tangent and outward normal at θ.
fn frame(domain: &DomainSpec, theta: f64) -> (Vec2, Vec2, Vec2) {
    let bp = domain.boundary_point(theta);
    (bp.position, bp.tangent(), bp.normal)
}

/// Unit direction of the ray leaving the boundary at `pt`.
fn direction(tangent: Vec2, normal: Vec2, pt: &PhasePoint) -> Vec2 {
    tangent * pt.zeta - normal * pt.gamma1()
}

/// One step of the billiard map and the length of the chord travelled.
pub fn billiard_map(domain: &DomainSpec, pt: PhasePoint) -> Result<(PhasePoint, f64)> {
    check_glancing(&pt)?;
    let (p, t, nu) = frame(domain, pt.theta);
    let d = direction(t, nu, &pt);
    let (theta1, chord) = if domain.is_exact_ellipse() {
        ellipse_hit(&domain.base, p, d)?
    } else {
        ray_hit(domain, pt.theta, p, d)?
    };
    let (_, t1, _) = frame(domain, theta1);
    // tangential momentum is continuous across the impact
    let zeta = d.dot(t1).clamp(-1.0, 1.0);
    Ok((PhasePoint { theta: theta1, zeta }, chord))
}

/// Second intersection of the ray `p + s d` with the ellipse, closed form.
fn ellipse_hit(e: &EllipseDomain, p: Vec2, d: Vec2) -> Result<(f64, f64)> {
    let (a, b) = (e.a(), e.b());
    let qa = d.x * d.x / a + d.y * d.y / b;
    let qb = 2.0 * (p.x * d.x / a + p.y * d.y / b);
    let s = -qb / qa;
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Geometry(format!("ray does not re-enter the ellipse (s = {s:e})")));
    }
    Ok((e.angle_of(p + d * s), s))
}

/// Offsets from the departure angle at which the crossing function is sampled;
/// dense near both sides of the departure point for near-glancing rays.
fn hit_offsets() -> Vec<f64> {
    const UNIFORM: usize = 512;
    let mut v: Vec<f64> = (1..UNIFORM).map(|k| TAU * k as f64 / UNIFORM as f64).collect();
    for m in 3..=12 {
        let h = TAU * 10f64.powi(-m);
        v.push(h);
        v.push(TAU - h);
    }
    v.sort_by(f64::total_cmp);
    v
}

/// Nearest forward intersection of the ray with a general star-shaped
/// boundary, by bracketing `d × (x(φ) − p)` and refining with Brent.
fn ray_hit(domain: &DomainSpec, theta0: f64, p: Vec2, d: Vec2) -> Result<(f64, f64)> {
    let g = |phi: f64| d.cross(domain.derivatives(phi).0 - p);
    let offsets = hit_offsets();
    let mut best: Option<(f64, f64)> = None;
    let mut prev = (offsets[0], g(theta0 + offsets[0]));
    for &off in &offsets[1..] {
        let cur = (off, g(theta0 + off));
        if prev.1.signum() != cur.1.signum() || cur.1 == 0.0 {
            if let Some(r) = brent_root(|o| g(theta0 + o), prev.0, cur.0, 1e-15) {
                let phi = wrap_angle(theta0 + r);
                let s = (domain.derivatives(phi).0 - p).dot(d);
                // the departure point itself is a root with s ≈ 0
                if s > 1e-10 * domain.base.semi_major() && best.map_or(true, |(_, bs)| s < bs) {
                    best = Some((phi, s));
                }
            }
        }
        prev = cur;
    }
    best.ok_or_else(|| Error::Geometry(format!("no boundary intersection found from theta = {theta0}")))
}

/// Caustic parameter of the ray leaving the ellipse at `pt`.
///
/// The ray is tangent to the confocal conic `x²/(ε+Z) + y²/Z = 1`, which for a
/// unit direction d through p reads `Z = (p × d)² − ε d_y²`. Elliptic caustics
/// have `Z ∈ (0, b]`, hyperbolic ones `Z ∈ (−ε, 0)`.
pub fn caustic_invariant(e: &EllipseDomain, pt: PhasePoint) -> Result<f64> {
    let z = caustic_value(e, pt);
    if !e.is_disk() && z.abs() <= FOCAL_MARGIN {
        return Err(Error::FocalRay(z.abs()));
    }
    Ok(z)
}

fn caustic_value(e: &EllipseDomain, pt: PhasePoint) -> f64 {
    let p = e.point(pt.theta);
    let t = e.tangent(pt.theta).normalized();
    let nu = e.outward_normal(pt.theta);
    let d = direction(t, nu, &pt);
    let c = p.cross(d);
    c * c - e.eps() * d.y * d.y
}

/// `b − Z(θ, 0)`; on the ellipse `Z = b − (b + ε sin²θ)(1 − ζ²)`.
fn level_gap(e: &EllipseDomain, theta: f64) -> f64 {
    let s = theta.sin();
    e.b() + e.eps() * s * s
}

/// Component of a level set selected by the sign of ζ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Positive,
    Negative,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Positive => 1.0,
            Branch::Negative => -1.0,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Branch::Positive => Branch::Negative,
            Branch::Negative => Branch::Positive,
        }
    }
}

/// A level set `{Z = c}` on one branch, with Leray density `du_Z = w(θ) dθ`.
///
/// `du_Z = dq / |∂Z/∂ζ|` with q arclength, so `w = |x'(θ)| / |∂Z/∂ζ|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCurve {
    pub domain: EllipseDomain,
    pub level: f64,
    pub branch: Branch,
    /// Uniform grid `2πk/n`.
    pub theta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub weight: Vec<f64>,
}

/// Default number of θ samples stored on a curve.
pub const CURVE_SAMPLES: usize = 1024;

/// Invariant curve of level `c` sampled on [`CURVE_SAMPLES`] points.
pub fn invariant_curve(e: &EllipseDomain, c: f64, branch: Branch) -> Result<InvariantCurve> {
    invariant_curve_sampled(e, c, branch, CURVE_SAMPLES)
}

/// Invariant curve of level `c` sampled on `n` uniform points.
pub fn invariant_curve_sampled(e: &EllipseDomain, c: f64, branch: Branch, n: usize) -> Result<InvariantCurve> {
    let b = e.b();
    let lower_ok = if e.is_disk() { c >= 0.0 } else { c > 0.0 };
    if !(c.is_finite() && lower_ok && c < b) {
        return Err(Error::Curve(format!("level {c} outside the elliptic-caustic range (0, {b})")));
    }
    if n < 8 {
        return Err(Error::Curve("at least 8 samples are needed".into()));
    }
    let mut curve = InvariantCurve { domain: *e, level: c, branch, theta: quad::periodic_grid(n), zeta: vec![], weight: vec![] };
    curve.zeta = curve.theta.iter().map(|&t| curve.zeta_at(t)).collect();
    curve.weight = curve.theta.iter().map(|&t| curve.weight_at(t)).collect();
    Ok(curve)
}

impl InvariantCurve {
    /// True for the disk's diameter level, where `∂Z/∂ζ` vanishes identically.
    fn is_diametral(&self) -> bool {
        self.level == 0.0
    }

    /// `ζ(θ; c)` on this branch.
    pub fn zeta_at(&self, theta: f64) -> f64 {
        let z2 = 1.0 - (self.domain.b() - self.level) / level_gap(&self.domain, theta);
        self.branch.sign() * z2.max(0.0).sqrt()
    }

    /// `|∂Z/∂ζ|` at `(θ, ζ(θ; c))`.
    pub fn dz_dzeta(&self, theta: f64) -> f64 {
        2.0 * level_gap(&self.domain, theta) * self.zeta_at(theta).abs()
    }

    /// Leray weight `w(θ)`. On the disk's diameter level the density is
    /// degenerate and the arclength density stands in for it.
    pub fn weight_at(&self, theta: f64) -> f64 {
        let speed = self.domain.speed(theta);
        if self.is_diametral() {
            speed
        } else {
            speed / self.dz_dzeta(theta)
        }
    }

    pub fn phase_point(&self, theta: f64) -> PhasePoint {
        PhasePoint { theta, zeta: self.zeta_at(theta) }
    }

    /// `γ₁(ζ(θ))`.
    pub fn gamma1_at(&self, theta: f64) -> f64 {
        self.phase_point(theta).gamma1()
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// `∫ f(θ, ζ) du_Z` by the periodic trapezoid rule on the stored samples.
    pub fn leray_integral<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        let vals: Vec<f64> =
            self.theta.iter().zip(&self.zeta).zip(&self.weight).map(|((&t, &z), &w)| f(t, z) * w).collect();
        quad::periodic_trapezoid(&vals)
    }

    /// Total Leray mass `∫ du_Z`.
    pub fn leray_mass(&self) -> f64 {
        neumaier_sum(self.weight.iter().copied()) * TAU / self.len() as f64
    }

    /// `∫_0^θ w dθ` for `θ ∈ [0, 2π]`.
    ///
    /// w is even about every multiple of π/2, so the integral reduces to the
    /// quarter arc. Near θ = 0 the weight behaves like `1/sqrt(ε sin²θ + c)`,
    /// which the substitution `sin θ = sqrt(c/ε) sinh t` makes smooth.
    pub(crate) fn leray_arc(&self, theta: f64) -> Result<f64> {
        let quarter = self.quarter_arc(FRAC_PI_2)?;
        let k = (theta / FRAC_PI_2).floor().clamp(0.0, 4.0);
        let r = theta - k * FRAC_PI_2;
        let head = k * quarter;
        if r <= 0.0 {
            return Ok(head);
        }
        Ok(if k as usize % 2 == 0 { head + self.quarter_arc(r)? } else { head + quarter - self.quarter_arc(FRAC_PI_2 - r)? })
    }

    /// `∫_0^x w dθ` for `x ∈ [0, π/2]`.
    fn quarter_arc(&self, x: f64) -> Result<f64> {
        let (eps, c) = (self.domain.eps(), self.level);
        let direct = |lo: f64, hi: f64| quad::integrate(|t| self.weight_at(t), lo, hi, 1e-15, 1e-14);
        if eps == 0.0 || self.is_diametral() {
            return direct(0.0, x);
        }
        let split = x.min(FRAC_PI_4);
        let k = (c / eps).sqrt();
        let t_of = |th: f64| (th.sin() / k).asinh();
        let inner = |t: f64| {
            let th = (k * t.sinh()).min(1.0).asin();
            let g = level_gap(&self.domain, th);
            self.domain.speed(th) / (2.0 * g.sqrt() * eps.sqrt() * th.cos())
        };
        let head = quad::integrate(inner, 0.0, t_of(split), 1e-15, 1e-14)?;
        Ok(if x > split { head + direct(split, x)? } else { head })
    }

    /// The level's other branch.
    pub fn reversed(&self) -> InvariantCurve {
        InvariantCurve {
            domain: self.domain,
            level: self.level,
            branch: self.branch.reversed(),
            theta: self.theta.clone(),
            zeta: self.zeta.iter().map(|z| -z).collect(),
            weight: self.weight.clone(),
        }
    }
}
