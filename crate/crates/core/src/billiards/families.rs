//! Rotation numbers, periodic families and the length spectrum of the ellipse.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{billiard_map, invariant_curve_sampled, Branch, InvariantCurve, PhasePoint, GLANCING_MARGIN};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, DomainSpec, EllipseDomain};
use crate::numerics::sum::neumaier_sum;

/// Rotation number of an invariant curve, in `(0, 1/2]`.
///
/// The Leray measure is invariant, so its normalised distribution function
/// conjugates the map on the curve to a rigid rotation; the rotation number is
/// the normalised Leray mass of the arc from θ = 0 to its image.
pub fn rotation_number(curve: &InvariantCurve) -> Result<f64> {
    level_rotation(&curve.domain, curve.level)
}

fn level_rotation(e: &EllipseDomain, c: f64) -> Result<f64> {
    let curve = invariant_curve_sampled(e, c, Branch::Positive, 8)?;
    let start = curve.phase_point(0.0);
    let (next, _) = billiard_map(&DomainSpec::ellipse(*e), start)?;
    let mut theta1 = wrap_angle(next.theta);
    if theta1 == 0.0 {
        theta1 = TAU;
    }
    let arc = curve.leray_arc(theta1)?;
    let total = curve.leray_arc(TAU)?;
    let omega = arc / total;
    if !(omega > 0.0 && omega <= 0.5 + 1e-12) {
        return Err(Error::Rotation(format!("level {c}: rotation {omega} outside (0, 1/2]")));
    }
    Ok(omega.min(0.5))
}

/// Birkhoff average of boundary-angle increments over `iterations` bounces
/// starting at θ = 0 on the positive branch. Converges like `1/iterations`.
pub fn birkhoff_rotation_number(curve: &InvariantCurve, iterations: usize) -> Result<f64> {
    let domain = DomainSpec::ellipse(curve.domain);
    let mut pt = PhasePoint { theta: 0.0, zeta: curve.zeta_at(0.0).abs() };
    let mut increments = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let (next, _) = billiard_map(&domain, pt)?;
        increments.push(wrap_angle(next.theta - pt.theta));
        pt = next;
    }
    Ok(neumaier_sum(increments) / (TAU * iterations as f64))
}

/// Kind of a periodic family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// Orbits tangent to a confocal ellipse (or a concentric circle).
    Elliptic,
    /// The isolated orbit along the minor axis.
    MinorBouncingBall,
    /// The isolated orbit along the major axis.
    MajorBouncingBall,
}

/// Closed billiard trajectories of winding `p` and `q` bounces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicFamily {
    pub p: u32,
    pub q: u32,
    pub kind: FamilyKind,
    /// Caustic level `Z_{p/q}`.
    pub level: f64,
    pub length: f64,
    /// Number of invariant curves (1 for self-reversed orbits, 2 otherwise).
    pub components: usize,
    /// The components are exchanged by `ζ → −ζ`.
    pub time_reversal_pair: bool,
    /// Spread of the chord sum over the sampled starting points.
    pub length_spread: f64,
    /// Largest angular mismatch after q bounces over the sampled starting points.
    pub closure_error: f64,
    /// `T` is an integer multiple of the perimeter.
    pub perimeter_multiple: bool,
}

/// Smallest caustic level, relative to b, searched on the ellipse.
const SEPARATRIX_MARGIN: f64 = 1e-200;

/// Starting points used to measure the length of a family.
const LENGTH_STARTS: usize = 8;

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn is_perimeter_multiple(length: f64, perimeter: f64) -> bool {
    let m = (length / perimeter).round();
    m >= 1.0 && (length - m * perimeter).abs() <= 1e-9 * length
}

/// The family with rotation number `p/q` on the ellipse.
///
/// `p/q = 1/2` returns the minor-axis bouncing ball (the disk's diameters).
/// Other rotation numbers are located by bisection on the caustic level,
/// using that the rotation number decreases strictly in the level.
pub fn periodic_family(e: &EllipseDomain, p: u32, q: u32) -> Result<PeriodicFamily> {
    let no = |reason: &str| Error::NoSuchFamily { p, q, reason: reason.into() };
    if p == 0 || q < 2 || 2 * p > q {
        return Err(no("need 0 < p/q <= 1/2"));
    }
    if gcd(p, q) != 1 {
        return Err(no("p and q must be coprime"));
    }
    let perimeter = DomainSpec::ellipse(*e).perimeter()?;
    if 2 * p == q {
        let (kind, level) = if e.is_disk() { (FamilyKind::Elliptic, 0.0) } else { (FamilyKind::MinorBouncingBall, -e.eps()) };
        let length = 4.0 * e.semi_minor();
        return Ok(PeriodicFamily {
            p,
            q,
            kind,
            level,
            length,
            components: 1,
            time_reversal_pair: false,
            length_spread: 0.0,
            closure_error: 0.0,
            perimeter_multiple: is_perimeter_multiple(length, perimeter),
        });
    }
    let target = p as f64 / q as f64;
    let b = e.b();
    let mut lo = if e.is_disk() { 0.0 } else { SEPARATRIX_MARGIN * b };
    // ζ(0)² = c/b must stay clear of glancing
    let mut hi = b * (1.0 - 4.0 * GLANCING_MARGIN);
    if level_rotation(e, lo)? < target {
        return Err(no("rotation number too close to 1/2 for the separatrix margin"));
    }
    if level_rotation(e, hi)? > target {
        return Err(no("rotation number below the glancing margin"));
    }
    while hi - lo > 1e-15 * b {
        // the rotation number approaches 1/2 only logarithmically in the level
        let mid = if lo > 0.0 && hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        if level_rotation(e, mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let level = 0.5 * (lo + hi);
    let (length, length_spread, closure_error) = family_length(e, level, p, q)?;
    Ok(PeriodicFamily {
        p,
        q,
        kind: FamilyKind::Elliptic,
        level,
        length,
        components: 2,
        time_reversal_pair: true,
        length_spread,
        closure_error,
        perimeter_multiple: is_perimeter_multiple(length, perimeter),
    })
}

/// Mean chord sum over q bounces, its spread and the closure error.
fn family_length(e: &EllipseDomain, level: f64, p: u32, q: u32) -> Result<(f64, f64, f64)> {
    let domain = DomainSpec::ellipse(*e);
    let curve = invariant_curve_sampled(e, level, Branch::Positive, 8)?;
    let mut lengths = Vec::with_capacity(LENGTH_STARTS);
    let mut closure: f64 = 0.0;
    for k in 0..LENGTH_STARTS {
        let theta0 = (k as f64 + 0.25) * TAU / LENGTH_STARTS as f64;
        let mut pt = curve.phase_point(theta0);
        let mut chords = Vec::with_capacity(q as usize);
        let mut advance = 0.0;
        for _ in 0..q {
            let (next, chord) = billiard_map(&domain, pt)?;
            advance += wrap_angle(next.theta - pt.theta);
            chords.push(chord);
            pt = next;
        }
        lengths.push(neumaier_sum(chords));
        closure = closure.max((advance - TAU * p as f64).abs());
    }
    let mean = neumaier_sum(lengths.iter().copied()) / lengths.len() as f64;
    let spread = lengths.iter().fold(f64::NEG_INFINITY, |m, &l| m.max(l))
        - lengths.iter().fold(f64::INFINITY, |m, &l| m.min(l));
    Ok((mean, spread, closure))
}

/// All families with `q ≤ q_max`, sorted by length, optionally restricted to
/// `lo ≤ T ≤ hi`. On the ellipse both bouncing balls appear as `q = 2` entries.
pub fn length_spectrum(e: &EllipseDomain, q_max: u32, window: Option<(f64, f64)>) -> Result<Vec<PeriodicFamily>> {
    if q_max < 2 {
        return Err(Error::InvalidArgument("q_max must be at least 2".into()));
    }
    let pairs: Vec<(u32, u32)> =
        (2..=q_max).flat_map(|q| (1..=q / 2).filter(move |&p| gcd(p, q) == 1).map(move |p| (p, q))).collect();
    let mut out: Vec<PeriodicFamily> =
        pairs.par_iter().map(|&(p, q)| periodic_family(e, p, q)).collect::<Result<Vec<_>>>()?;
    if !e.is_disk() {
        let perimeter = DomainSpec::ellipse(*e).perimeter()?;
        let length = 4.0 * e.semi_major();
        out.push(PeriodicFamily {
            p: 1,
            q: 2,
            kind: FamilyKind::MajorBouncingBall,
            level: 0.0,
            length,
            components: 1,
            time_reversal_pair: false,
            length_spread: 0.0,
            closure_error: 0.0,
            perimeter_multiple: is_perimeter_multiple(length, perimeter),
        });
    }
    if let Some((lo, hi)) = window {
        out.retain(|f| f.length >= lo && f.length <= hi);
    }
    out.sort_by(|a, b| a.length.total_cmp(&b.length).then(a.q.cmp(&b.q)).then(a.p.cmp(&b.p)));
    Ok(out)
}

/// Families sharing one length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthGroup {
    pub length: f64,
    /// (p, q, kind) of every family in the group.
    pub members: Vec<(u32, u32, FamilyKind)>,
    /// Total number of invariant curves.
    pub components: usize,
    /// One invariant curve plus its time-reversal image, away from multiples
    /// of the perimeter.
    pub clean_simple: bool,
}

/// Groups families whose lengths chain within `tol` and marks the
/// clean-simple lengths.
pub fn multiplicity_filter(families: &[PeriodicFamily], tol: f64) -> Vec<LengthGroup> {
    let mut sorted: Vec<&PeriodicFamily> = families.iter().collect();
    sorted.sort_by(|a, b| a.length.total_cmp(&b.length));
    let mut groups: Vec<Vec<&PeriodicFamily>> = Vec::new();
    for f in sorted {
        match groups.last_mut() {
            Some(g) if f.length - g.last().map_or(f64::NEG_INFINITY, |l| l.length) <= tol => g.push(f),
            _ => groups.push(vec![f]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let length = neumaier_sum(g.iter().map(|f| f.length)) / g.len() as f64;
            let components = g.iter().map(|f| f.components).sum();
            let clean_simple = g.len() == 1
                && g[0].kind == FamilyKind::Elliptic
                && g[0].time_reversal_pair
                && g[0].components == 2
                && !g[0].perimeter_multiple;
            LengthGroup { length, members: g.iter().map(|f| (f.p, f.q, f.kind)).collect(), components, clean_simple }
        })
        .collect()
}

/// Rotation number of the disk level `c = b ζ₀²`: `arccos(ζ₀)/π`.
#[cfg(test)]
fn disk_rotation(zeta0: f64) -> f64 {
    zeta0.acos() / std::f64::consts::PI
}
