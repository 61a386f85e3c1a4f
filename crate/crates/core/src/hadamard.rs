//! Hadamard variations of eigenvalues, Green's kernels and the smoothed wave
//! trace under a normal boundary displacement `ρ̇`, measured along the outward
//! normal, plus the central finite-difference oracle.
//!
//! Signs, with `ρ̇ > 0` enlarging the domain:
//!
//! * Dirichlet: `δλ² = −∫ (∂_νΨ)² ρ̇ ds`;
//! * Neumann: `δλ² = ∫ (|∇ᵀΨ|² − λ²Ψ²) ρ̇ ds`;
//! * Dirichlet Green's kernel: `δG(x, y) = ∫ ∂_νG(x, q) ∂_νG(y, q) ρ̇ ds`;
//! * Neumann Green's kernel: `δG(x, y) = ∫ (λ²G(x, q)G(y, q) − ∇ᵀG(x, q)·∇ᵀG(y, q)) ρ̇ ds`,
//!
//! where `G = Σ Ψ_j(x)Ψ_j(y)/(λ_j² − λ²)` is the resolvent kernel.

use std::f64::consts::{PI, TAU};

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, DeformationField, DomainSpec, Vec2};
use crate::numerics::bessel::{bessel_j_with_derivative, bessel_y01};
use crate::numerics::quad::{integrate, periodic_grid};
use crate::numerics::sum::neumaier_sum;
use crate::spectral::{solve_spectrum_with, BoundaryCondition, SpectralOptions, SpectrumResult};

/// Boundary grid points required per oscillation of the field's top mode.
pub const POINTS_PER_OSCILLATION: usize = 8;

/// Default relative bound on the Weyl-tail leakage of a trace evaluation.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Per-eigenvalue `|δλ²|/λ²` at the rounding level of the boundary quadrature.
const NOISE_RATE: f64 = 1e-12;

/// Relative distance in λ² below which the resolvent is considered singular.
pub const POLE_GAP: f64 = 1e-6;

/// First variation of the sum of the eigenvalues λ² in one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigVariation {
    /// Index into `SpectrumResult::clusters`.
    pub cluster: usize,
    /// λ² of the cluster's first member.
    pub lambda_sq: f64,
    pub size: usize,
    /// `δ Σ_cluster λ²`.
    pub value: f64,
}

/// `∫ ψ̂(t) δTr E(t) dt` for the Gaussian window `ψ̂(t) = exp(−(t − T)²/2σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedTraceVariation {
    pub center: f64,
    pub width: f64,
    pub value: f64,
    /// Largest λ in the spectrum used.
    pub cutoff: f64,
    /// Estimated contribution of the eigenvalues above the cutoff.
    pub leakage: f64,
}

/// Green's kernel variation with its truncation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreensVariation {
    pub value: f64,
    pub truncation: f64,
}

fn check_resolution(spec: &SpectrumResult, field: &DeformationField) -> Result<()> {
    let n = spec.traces.first().map_or(usize::MAX, |t| t.theta.len());
    let need = POINTS_PER_OSCILLATION * field.top_frequency().max(1);
    if n < need {
        return Err(Error::Resolution(format!(
            "trace grid has {n} points, the field's top frequency {} needs {need}",
            field.top_frequency()
        )));
    }
    Ok(())
}

/// Hadamard variation of every cluster of `spec` under `field`.
///
/// The integrand is a sum of squares over the cluster, hence independent of
/// the orthonormal basis chosen inside it.
pub fn eig_variation(spec: &SpectrumResult, field: &DeformationField) -> Result<Vec<EigVariation>> {
    check_resolution(spec, field)?;
    let rho: Vec<f64> = match spec.traces.first() {
        Some(t) => t.theta.iter().map(|&th| field.eval(th)).collect(),
        None => Vec::new(),
    };
    let out = spec
        .clusters
        .par_iter()
        .enumerate()
        .map(|(c, cl)| {
            let per_member = cl.indices.iter().map(|&i| {
                let tr = &spec.traces[i];
                let l2 = spec.eigenpairs[i].lambda_sq;
                match spec.bc {
                    BoundaryCondition::Dirichlet => -tr.integrate(|k| tr.normal_derivative[k].powi(2) * rho[k]),
                    BoundaryCondition::Neumann => {
                        tr.integrate(|k| (tr.tangential[k].powi(2) - l2 * tr.value[k].powi(2)) * rho[k])
                    }
                }
            });
            EigVariation {
                cluster: c,
                lambda_sq: spec.eigenpairs[cl.indices[0]].lambda_sq,
                size: cl.indices.len(),
                value: neumaier_sum(per_member),
            }
        })
        .collect();
    Ok(out)
}

/// Central difference `(Σλ²(+h) − Σλ²(−h))/2h` per cluster of the undeformed
/// spectrum, solving the deformed problems with default options.
pub fn finite_difference_variation(
    domain: &DomainSpec,
    field: &DeformationField,
    bc: BoundaryCondition,
    h: f64,
    lambda_max: f64,
) -> Result<Vec<EigVariation>> {
    let opts = SpectralOptions::default();
    let base = solve_spectrum_with(domain, bc, lambda_max, &opts)?;
    finite_difference_variation_from(&base, field, h, &opts)
}

/// As [`finite_difference_variation`], reusing an already solved base spectrum.
///
/// Eigenvalues are matched across ±h by parity class and rank within it.
pub fn finite_difference_variation_from(
    base: &SpectrumResult,
    field: &DeformationField,
    h: f64,
    opts: &SpectralOptions,
) -> Result<Vec<EigVariation>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    if !base.domain.is_exact_ellipse() {
        return Err(Error::InvalidDomain("finite differences are taken about an exact ellipse".into()));
    }
    let e = base.domain.base;
    let top = base.eigenpairs.last().map_or(0.0, |p| p.lambda);
    let reach = base.lambda_max.max(top) * 1.05 + 0.5;
    let solve = |amp: f64| -> Result<SpectrumResult> {
        let d = DomainSpec::deformed(e, field.clone(), amp)?;
        let o = SpectralOptions { trace_grid: 8, ..opts.clone() };
        solve_spectrum_with(&d, base.bc, reach, &o)
    };
    let plus = solve(h)?;
    let minus = solve(-h)?;

    // rank of every base eigenvalue within its class
    let mut seen = std::collections::HashMap::new();
    let ranks: Vec<usize> = base
        .eigenpairs
        .iter()
        .map(|p| {
            let r = seen.entry(p.class).or_insert(0usize);
            *r += 1;
            *r - 1
        })
        .collect();
    let partner = |s: &SpectrumResult, i: usize| -> Result<f64> {
        let class = base.eigenpairs[i].class;
        s.eigenpairs.iter().filter(|p| p.class == class).nth(ranks[i]).map(|p| p.lambda_sq).ok_or_else(|| {
            Error::Matching(format!(
                "class {} has no eigenvalue of rank {} on the deformed domain",
                class.label(),
                ranks[i]
            ))
        })
    };
    // half the distance from each base eigenvalue to its class neighbours
    let reach_of = |i: usize| -> f64 {
        let class = base.eigenpairs[i].class;
        let l2 = base.eigenpairs[i].lambda_sq;
        base.eigenpairs
            .iter()
            .enumerate()
            .filter(|(j, p)| *j != i && p.class == class)
            .map(|(_, p)| 0.5 * (p.lambda_sq - l2).abs())
            .fold(f64::INFINITY, f64::min)
    };
    let mut out = Vec::with_capacity(base.clusters.len());
    for (c, cl) in base.clusters.iter().enumerate() {
        let mut diffs = Vec::with_capacity(cl.indices.len());
        for &i in &cl.indices {
            let (p, m) = (partner(&plus, i)?, partner(&minus, i)?);
            let l2 = base.eigenpairs[i].lambda_sq;
            let r = reach_of(i);
            if (p - l2).abs() >= r || (m - l2).abs() >= r {
                return Err(Error::Matching(format!("eigenvalue {l2} moved to {m} / {p} across +-h, past a class neighbour")));
            }
            diffs.push((p - m) / (2.0 * h));
        }
        out.push(EigVariation {
            cluster: c,
            lambda_sq: base.eigenpairs[cl.indices[0]].lambda_sq,
            size: cl.indices.len(),
            value: neumaier_sum(diffs),
        });
    }
    Ok(out)
}

/// Pairing of `−t sin(tλ)/(2λ)` with the Gaussian window centred at `|T|`.
fn window_kernel(lambda: f64, t: f64, sigma: f64) -> f64 {
    let t = t.abs();
    let g = (2.0 * PI).sqrt() * sigma * (-0.5 * (sigma * lambda).powi(2)).exp();
    -g / (2.0 * lambda) * (t * (lambda * t).sin() + sigma * sigma * lambda * (lambda * t).cos())
}

/// Upper bound of `|window_kernel|`.
fn window_envelope(lambda: f64, t: f64, sigma: f64) -> f64 {
    let g = (2.0 * PI).sqrt() * sigma * (-0.5 * (sigma * lambda).powi(2)).exp();
    g / (2.0 * lambda) * (t.abs() + sigma * sigma * lambda)
}

/// Smoothed wave-trace variation with the default tail tolerance.
pub fn trace_variation(
    spec: &SpectrumResult,
    variations: &[EigVariation],
    t: f64,
    sigma: f64,
) -> Result<SmoothedTraceVariation> {
    trace_variation_with(spec, variations, t, sigma, DEFAULT_TAIL_TOL)
}

/// `Σ_clusters δΣλ² K(λ)` with `K` the window pairing of `−t sin(tλ)/(2λ)`.
///
/// The tail above the cutoff is bounded by the Weyl density times the largest
/// per-eigenvalue `|δλ²|/λ²` of the top quarter of the spectrum, with 10%
/// slack, unless that rate is at rounding level; a bound above `tail_tol` times the summed magnitude is rejected.
pub fn trace_variation_with(
    spec: &SpectrumResult,
    variations: &[EigVariation],
    t: f64,
    sigma: f64,
    tail_tol: f64,
) -> Result<SmoothedTraceVariation> {
    if !(sigma > 0.0 && sigma.is_finite() && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("need finite T and positive width, got T = {t}, sigma = {sigma}")));
    }
    let terms: Vec<f64> = variations
        .iter()
        .filter(|v| v.lambda_sq > 0.0)
        .map(|v| v.value * window_kernel(v.lambda_sq.sqrt(), t, sigma))
        .collect();
    let magnitude = neumaier_sum(terms.iter().map(|x| x.abs()));
    let value = neumaier_sum(terms);

    let cutoff = spec.lambda_max;
    let top: Vec<&EigVariation> = variations.iter().filter(|v| v.lambda_sq > (0.75 * cutoff).powi(2)).collect();
    let rate = top.iter().map(|v| v.value.abs() / (v.size as f64 * v.lambda_sq)).fold(0.0, f64::max);
    let leakage = if rate > NOISE_RATE {
        let area = spec.domain.area()?;
        let perimeter = spec.domain.perimeter()?;
        let tail = integrate(
            |l| (area * l / TAU + perimeter / (4.0 * PI)) * rate * l * l * window_envelope(l, t, sigma),
            cutoff,
            cutoff + 40.0 / sigma,
            1e-300,
            1e-8,
        )?;
        1.1 * tail
    } else {
        0.0
    };
    if leakage > tail_tol * magnitude.max(f64::MIN_POSITIVE) && leakage > 0.0 {
        return Err(Error::Cutoff(format!(
            "leakage {leakage:.3e} above the cutoff {cutoff} exceeds {tail_tol:.1e} x {magnitude:.3e}"
        )));
    }
    Ok(SmoothedTraceVariation { center: t, width: sigma, value, cutoff, leakage })
}

/// Free resolvent kernel `−Y₀(λr)/4` and its radial derivative.
fn free_kernel(lambda: f64, r: f64) -> (f64, f64) {
    let (y0, y1) = bessel_y01(lambda * r);
    (-0.25 * y0, 0.25 * lambda * y1)
}

fn inside(domain: &DomainSpec, x: Vec2) -> bool {
    let pts: Vec<Vec2> = periodic_grid(2048).into_iter().map(|t| domain.boundary_point(t).position - x).collect();
    let mut winding = 0.0;
    for k in 0..pts.len() {
        let (a, b) = (pts[k], pts[(k + 1) % pts.len()]);
        winding += wrap_angle(b.y.atan2(b.x) - a.y.atan2(a.x) + PI) - PI;
    }
    let clearance = pts.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
    winding > PI && clearance > 1e-6 * domain.max_radius()
}

/// Boundary data of `G(x, ·)` on the θ grid `theta`: `(∂_νG, G, ∇ᵀG)`.
///
/// `G = Φ − w` with the regular part `w` a least-squares Fourier–Bessel fit
/// of orders `0..=order` matching the boundary condition of Φ.
fn kernel_boundary(
    domain: &DomainSpec,
    bc: BoundaryCondition,
    lambda: f64,
    x: Vec2,
    order: usize,
    theta: &[f64],
) -> Result<Vec<(f64, f64, f64)>> {
    let nb = 2 * order + 1;
    let m = 4 * order + 16;
    let fit_theta: Vec<f64> = (0..m).map(|k| (k as f64 + 0.5) * TAU / m as f64).collect();

    // columns: J_n cos nφ (n = 0..=order), then J_n sin nφ (n = 1..=order)
    let basis_row = |p: Vec2| -> (Vec<f64>, Vec<Vec2>) {
        let r = p.norm();
        let phi = p.y.atan2(p.x);
        let (j, dj) = bessel_j_with_derivative(order, lambda * r);
        let mut v = Vec::with_capacity(nb);
        let mut g = Vec::with_capacity(nb);
        let er = if r > 0.0 { p * (1.0 / r) } else { Vec2::new(1.0, 0.0) };
        let ephi = Vec2::new(-er.y, er.x);
        for (trig, shift) in [(0usize, 0usize), (1, 1)] {
            for n in shift..=order {
                let (s, c) = (n as f64 * phi).sin_cos();
                let (f, df) = if trig == 0 { (c, -(n as f64) * s) } else { (s, n as f64 * c) };
                v.push(j[n] * f);
                // (1/r) J_n(λr) → λ J_n'(0) for n = 1, 0 otherwise
                let j_over_r = if r > 0.0 { j[n] / r } else if n == 1 { 0.5 * lambda } else { 0.0 };
                g.push(er * (lambda * dj[n] * f) + ephi * (j_over_r * df));
            }
        }
        (v, g)
    };

    let mut a = Mat::<f64>::zeros(m, nb);
    let mut rhs = Mat::<f64>::zeros(m, 1);
    for (i, &th) in fit_theta.iter().enumerate() {
        let bp = domain.boundary_point(th);
        let d = bp.position - x;
        let r = d.norm();
        let (phi, dphi) = free_kernel(lambda, r);
        let (v, g) = basis_row(bp.position);
        for col in 0..nb {
            a[(i, col)] = match bc {
                BoundaryCondition::Dirichlet => v[col],
                BoundaryCondition::Neumann => g[col].dot(bp.normal),
            };
        }
        rhs[(i, 0)] = match bc {
            BoundaryCondition::Dirichlet => phi,
            BoundaryCondition::Neumann => dphi * d.dot(bp.normal) / r,
        };
    }
    let mut scales = vec![1.0; nb];
    for (col, sc) in scales.iter_mut().enumerate() {
        let norm = (0..m).map(|i| a[(i, col)].powi(2)).sum::<f64>().sqrt();
        if norm > 0.0 {
            *sc = norm;
            for i in 0..m {
                a[(i, col)] /= norm;
            }
        }
    }
    let svd = a.thin_svd().map_err(|_| Error::Accuracy("Green's kernel fit: SVD failed".into()))?;
    let s = svd.S().column_vector();
    let (u, v) = (svd.U(), svd.V());
    let s0 = s[0];
    let mut coef = vec![0.0; nb];
    for k in 0..s.nrows() {
        if s[k] <= 1e-14 * s0 {
            break;
        }
        let proj: f64 = (0..m).map(|i| u[(i, k)] * rhs[(i, 0)]).sum::<f64>() / s[k];
        for (col, c) in coef.iter_mut().enumerate() {
            *c += v[(col, k)] * proj;
        }
    }
    for (c, sc) in coef.iter_mut().zip(&scales) {
        *c /= sc;
    }

    Ok(theta
        .iter()
        .map(|&th| {
            let bp = domain.boundary_point(th);
            let d = bp.position - x;
            let r = d.norm();
            let (phi, dphi) = free_kernel(lambda, r);
            let grad_phi = d * (dphi / r);
            let (v, g) = basis_row(bp.position);
            let w: f64 = neumaier_sum(v.iter().zip(&coef).map(|(a, c)| a * c));
            let gw = g.iter().zip(&coef).fold(Vec2::new(0.0, 0.0), |acc, (gv, c)| acc + *gv * *c);
            let grad = grad_phi - gw;
            (grad.dot(bp.normal), phi - w, grad.dot(bp.tangent()))
        })
        .collect())
}

fn greens_integral(
    domain: &DomainSpec,
    bc: BoundaryCondition,
    field: &DeformationField,
    lambda: f64,
    x: Vec2,
    y: Vec2,
    order: usize,
) -> Result<f64> {
    let n = (8 * order + 64).max(POINTS_PER_OSCILLATION * field.top_frequency());
    let theta = periodic_grid(n);
    let gx = kernel_boundary(domain, bc, lambda, x, order, &theta)?;
    let gy = if x == y { gx.clone() } else { kernel_boundary(domain, bc, lambda, y, order, &theta)? };
    let terms = theta.iter().enumerate().map(|(k, &th)| {
        let speed = domain.boundary_point(th).speed;
        let (a, b) = (gx[k], gy[k]);
        let f = match bc {
            BoundaryCondition::Dirichlet => a.0 * b.0,
            BoundaryCondition::Neumann => lambda * lambda * a.1 * b.1 - a.2 * b.2,
        };
        f * field.eval(th) * speed
    });
    Ok(neumaier_sum(terms) * TAU / n as f64)
}

/// Variation of the resolvent kernel `G_λ(x, y)` of `spec`'s domain and
/// boundary condition.
///
/// `G(x, ·)` on the boundary is the free kernel minus a Fourier–Bessel fit of
/// highest order `n_terms`; the truncation estimate is the change when the
/// order drops by a quarter. The spectrum only guards against poles.
pub fn greens_variation(
    spec: &SpectrumResult,
    field: &DeformationField,
    lambda: f64,
    x: Vec2,
    y: Vec2,
    n_terms: usize,
) -> Result<GreensVariation> {
    if !(lambda > 0.0 && lambda <= spec.lambda_max) {
        return Err(Error::InvalidArgument(format!(
            "spectral parameter {lambda} must lie in (0, {}] to be checked against the spectrum",
            spec.lambda_max
        )));
    }
    if n_terms < 4 {
        return Err(Error::InvalidArgument("n_terms must be at least 4".into()));
    }
    let l2 = lambda * lambda;
    if let Some(p) = spec.eigenpairs.iter().find(|p| (p.lambda_sq - l2).abs() <= POLE_GAP * l2) {
        return Err(Error::Pole(format!("lambda^2 = {l2} is within {POLE_GAP:e} of eigenvalue {}", p.lambda_sq)));
    }
    for p in [x, y] {
        if !inside(&spec.domain, p) {
            return Err(Error::InvalidArgument(format!("point ({}, {}) is not interior", p.x, p.y)));
        }
    }
    let fine = greens_integral(&spec.domain, spec.bc, field, lambda, x, y, n_terms)?;
    let coarse = greens_integral(&spec.domain, spec.bc, field, lambda, x, y, n_terms - n_terms / 4)?;
    Ok(GreensVariation { value: fine, truncation: (fine - coarse).abs() })
}
