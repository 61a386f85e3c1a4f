//! Dirichlet and Neumann eigenvalues with boundary Cauchy data.
//!
//! The domain is Z₂×Z₂ symmetric, so the spectrum splits into four parity
//! classes. Each class is swept independently with the method of particular
//! solutions; located eigenfunctions are L²-normalised by an
//! interior quadrature and their boundary traces sampled on a uniform θ grid.

mod basis;
mod mps;

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use basis::{FourierBessel, SymmetryClass};

use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, Vec2};
use crate::numerics::quad::{gauss_legendre_on, periodic_grid};
use crate::numerics::sum::neumaier_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

impl BoundaryCondition {
    pub fn label(self) -> &'static str {
        match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Neumann => "neumann",
        }
    }
}

/// Solver knobs. Defaults suit λ up to a few hundred eigenvalues per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralOptions {
    /// Points of the uniform θ grid carrying the boundary traces.
    pub trace_grid: usize,
    /// Multiplier on the number of Fourier–Bessel terms.
    pub basis_factor: f64,
    /// Sweep samples per mean class-level spacing.
    pub samples_per_spacing: f64,
    /// Largest sweep step in λ.
    pub max_step: f64,
    /// Boundary tension below which a refined dip is an eigenvalue.
    pub accept_tol: f64,
    /// Dips refining between `accept_tol` and this are reported as failures.
    pub reject_tol: f64,
    /// Relative gap in λ² below which eigenvalues form one cluster.
    pub cluster_gap: f64,
    /// Relative slack of the class-wise Weyl count check.
    pub weyl_slack: f64,
    /// Multiplier on the interior normalisation quadrature size.
    pub quadrature_factor: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            trace_grid: 512,
            basis_factor: 1.0,
            samples_per_spacing: 2.0,
            max_step: 0.05,
            accept_tol: 1e-6,
            reject_tol: 1e-3,
            cluster_gap: 1e-7,
            weyl_slack: 0.05,
            quadrature_factor: 1.0,
        }
    }
}

/// One eigenpair with an L²(Ω)-normalised eigenfunction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    pub lambda: f64,
    pub lambda_sq: f64,
    pub class: SymmetryClass,
    /// Relative boundary residual of the particular solution.
    pub tension: f64,
    pub mode: FourierBessel,
}

/// Boundary data of one eigenfunction on the uniform grid `θ_k = 2πk/n`.
///
/// `normal_derivative` is `∂_νΨ` along the outward normal, `value` is `Ψ`,
/// and `tangential` is the arclength derivative `∇ᵀΨ`. All three are filled
/// for either boundary condition; the one forced to vanish holds the residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub theta: Vec<f64>,
    /// `|x'(θ)|`, so that `∫ f ds ≈ (2π/n) Σ f_k speed_k`.
    pub speed: Vec<f64>,
    pub normal_derivative: Vec<f64>,
    pub value: Vec<f64>,
    pub tangential: Vec<f64>,
}

impl BoundaryTrace {
    /// Periodic trapezoid rule for `∫ f ds` with `f` sampled on the grid.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        let h = std::f64::consts::TAU / self.theta.len() as f64;
        neumaier_sum((0..self.theta.len()).map(|k| f(k) * self.speed[k])) * h
    }
}

/// Indices (into the eigenvalue list) of one multiplicity cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub bc: BoundaryCondition,
    pub lambda_max: f64,
    pub domain: DomainSpec,
    /// Sorted by λ² ascending.
    pub eigenpairs: Vec<Eigenpair>,
    pub clusters: Vec<Cluster>,
    pub traces: Vec<BoundaryTrace>,
    pub cluster_gap: f64,
}

impl SpectrumResult {
    pub fn len(&self) -> usize {
        self.eigenpairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenpairs.is_empty()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigenpairs.iter().map(|e| e.lambda_sq).collect()
    }

    /// Cluster id of every eigenvalue.
    pub fn cluster_ids(&self) -> Vec<usize> {
        let mut ids = vec![0; self.eigenpairs.len()];
        for (c, cl) in self.clusters.iter().enumerate() {
            for &i in &cl.indices {
                ids[i] = c;
            }
        }
        ids
    }

    /// Re-groups the eigenvalues with a different relative gap.
    pub fn recluster(&mut self, gap: f64) {
        self.clusters = cluster_eigenvalues(&self.eigenvalues(), gap);
        self.cluster_gap = gap;
    }
}

/// Groups sorted eigenvalues whose relative gap in λ² is below `gap`.
pub fn cluster_eigenvalues(lambda_sq: &[f64], gap: f64) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    for (i, &l) in lambda_sq.iter().enumerate() {
        let join = i > 0 && (l - lambda_sq[i - 1]).abs() <= gap * l.abs().max(f64::MIN_POSITIVE);
        match out.last_mut() {
            Some(c) if join => c.indices.push(i),
            _ => out.push(Cluster { indices: vec![i] }),
        }
    }
    out
}

/// Two-term Weyl law `N(λ) ≈ Area λ²/4π ∓ Perim λ/4π` (− Dirichlet, + Neumann).
pub fn weyl_count(area: f64, perimeter: f64, bc: BoundaryCondition, lambda: f64) -> f64 {
    let sign = match bc {
        BoundaryCondition::Dirichlet => -1.0,
        BoundaryCondition::Neumann => 1.0,
    };
    area * lambda * lambda / (4.0 * PI) + sign * perimeter * lambda / (4.0 * PI)
}

/// Weyl count of one parity class, i.e. of the quarter domain with the
/// outer arc carrying `bc` and each symmetry axis Dirichlet where the class
/// is odd across it.
fn class_weyl_count(area: f64, perimeter: f64, semi_axes: (f64, f64), bc: BoundaryCondition, class: SymmetryClass, lambda: f64) -> f64 {
    let (ax, by) = semi_axes;
    let arc = perimeter / 4.0;
    let mut signed = match bc {
        BoundaryCondition::Dirichlet => -arc,
        BoundaryCondition::Neumann => arc,
    };
    // segment on the y-axis is a fixed line of x → −x
    signed += if class.odd_in_x() { -by } else { by };
    signed += if class.odd_in_y() { -ax } else { ax };
    area / 4.0 * lambda * lambda / (4.0 * PI) + signed * lambda / (4.0 * PI)
}

/// Eigenvalues with λ ≤ `lambda_max` plus boundary traces on `grid` points.
pub fn solve_spectrum(domain: &DomainSpec, bc: BoundaryCondition, lambda_max: f64, grid: usize) -> Result<SpectrumResult> {
    let opts = SpectralOptions { trace_grid: grid, ..SpectralOptions::default() };
    solve_spectrum_with(domain, bc, lambda_max, &opts)
}

pub fn solve_spectrum_with(
    domain: &DomainSpec,
    bc: BoundaryCondition,
    lambda_max: f64,
    opts: &SpectralOptions,
) -> Result<SpectrumResult> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda_max must be positive, got {lambda_max}")));
    }
    if !domain.is_symmetric() {
        return Err(Error::InvalidDomain("the eigensolver needs a Z2xZ2-symmetric domain".into()));
    }
    if opts.trace_grid < 8 || opts.trace_grid % 4 != 0 {
        return Err(Error::InvalidArgument("trace grid must be a multiple of 4, at least 8".into()));
    }
    let area = domain.area()?;
    let perimeter = domain.perimeter()?;
    let r_max = domain.max_radius();
    let semi_axes = (domain.boundary_point(0.0).position.x, domain.boundary_point(FRAC_PI_2).position.y);

    let per_class: Vec<Result<Vec<Eigenpair>>> = SymmetryClass::ALL
        .par_iter()
        .map(|&class| {
            let eig = solve_class(domain, bc, class, lambda_max, area, r_max, opts)?;
            let count = eig.iter().filter(|e| e.lambda > 0.0).count() as f64;
            let weyl = class_weyl_count(area, perimeter, semi_axes, bc, class, lambda_max).max(0.0);
            if (count - weyl).abs() > opts.weyl_slack * weyl + 3.0 {
                return Err(Error::Completeness(format!(
                    "class {}: found {count} eigenvalues below {lambda_max}, Weyl predicts {weyl:.1}",
                    class.label()
                )));
            }
            Ok(eig)
        })
        .collect();
    let mut eigenpairs = Vec::new();
    for r in per_class {
        eigenpairs.extend(r?);
    }
    if bc == BoundaryCondition::Neumann {
        eigenpairs.push(constant_mode(area));
    }
    eigenpairs.sort_by(|a, b| a.lambda_sq.total_cmp(&b.lambda_sq).then(a.class.cmp(&b.class)));

    let traces = eigenpairs.par_iter().map(|e| boundary_trace(domain, &e.mode, opts.trace_grid)).collect();
    let clusters = cluster_eigenvalues(&eigenpairs.iter().map(|e| e.lambda_sq).collect::<Vec<_>>(), opts.cluster_gap);
    Ok(SpectrumResult { bc, lambda_max, domain: domain.clone(), eigenpairs, clusters, traces, cluster_gap: opts.cluster_gap })
}

/// Eigenpairs of one parity class, normalised, sorted.
fn solve_class(
    domain: &DomainSpec,
    bc: BoundaryCondition,
    class: SymmetryClass,
    lambda_max: f64,
    area: f64,
    r_max: f64,
    opts: &SpectralOptions,
) -> Result<Vec<Eigenpair>> {
    let lo = 1.0 / r_max;
    let hi = lambda_max;
    if hi <= lo {
        return Ok(Vec::new());
    }
    let bands = mps::Bands::new(domain, class, bc, lo, hi, opts.basis_factor);
    let params = mps::SweepParams {
        lo,
        hi,
        density_coeff: area / (8.0 * PI),
        samples_per_spacing: opts.samples_per_spacing,
        max_step: opts.max_step,
        accept_tol: opts.accept_tol,
    };
    let swept = mps::sweep(&bands, &params);
    if let Some(&(l, s)) = swept.stalled.iter().find(|r| r.1 < opts.reject_tol) {
        return Err(Error::Accuracy(format!(
            "class {}: tension minimum {s:.2e} at lambda = {l:.10} is neither an eigenvalue nor spurious",
            class.label()
        )));
    }
    let mut out = Vec::with_capacity(swept.located.len());
    for loc in &swept.located {
        for (mut mode, tension) in bands.discs[loc.band].modes(loc.lambda, loc.multiplicity) {
            let norm = interior_norm(domain, &mode, opts.quadrature_factor);
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::Accuracy(format!("degenerate eigenfunction at lambda = {}", loc.lambda)));
            }
            mode.scale(1.0 / norm.sqrt());
            out.push(Eigenpair { lambda: loc.lambda, lambda_sq: loc.lambda * loc.lambda, class, tension, mode });
        }
    }
    Ok(out)
}

fn constant_mode(area: f64) -> Eigenpair {
    let mode = FourierBessel {
        class: SymmetryClass::EvenEven,
        lambda: 0.0,
        orders: vec![0],
        coefficients: vec![1.0 / area.sqrt()],
    };
    Eigenpair { lambda: 0.0, lambda_sq: 0.0, class: SymmetryClass::EvenEven, tension: 0.0, mode }
}

/// `∫_Ω u²` through the map `(s, θ) → s·x(θ)`, Gauss–Legendre in `s` and the
/// offset trapezoid rule on the quarter arc (u² is even across both axes).
pub fn interior_norm(domain: &DomainSpec, mode: &FourierBessel, factor: f64) -> f64 {
    let r_max = domain.max_radius();
    let kr = mode.lambda * r_max;
    let n_s = ((0.75 * kr + 24.0) * factor).ceil() as usize;
    let n_t = ((0.75 * kr + 24.0) * factor).ceil() as usize;
    let (s_nodes, s_weights) = gauss_legendre_on(n_s, 0.0, 1.0);
    let dth = FRAC_PI_2 / n_t as f64;
    let mut scratch = Vec::new();
    let mut terms = Vec::with_capacity(n_s * n_t);
    for k in 0..n_t {
        let th = (k as f64 + 0.5) * dth;
        let (x, dx, _) = domain.derivatives(th);
        let jac = x.cross(dx);
        for (s, w) in s_nodes.iter().zip(&s_weights) {
            let u = mode.value_with(x * *s, &mut scratch);
            terms.push(u * u * s * jac * w);
        }
    }
    4.0 * dth * neumaier_sum(terms)
}

/// Boundary traces of `mode` on the uniform grid of `n` points.
pub(crate) fn boundary_trace(domain: &DomainSpec, mode: &FourierBessel, n: usize) -> BoundaryTrace {
    let theta = periodic_grid(n);
    let mut scratch = Vec::new();
    let mut speed = Vec::with_capacity(n);
    let mut normal_derivative = Vec::with_capacity(n);
    let mut value = Vec::with_capacity(n);
    let mut tangential = Vec::with_capacity(n);
    for &th in &theta {
        let bp = domain.boundary_point(th);
        let (v, g): (f64, Vec2) = mode.value_and_gradient_with(bp.position, &mut scratch);
        speed.push(bp.speed);
        normal_derivative.push(g.dot(bp.normal));
        value.push(v);
        tangential.push(g.dot(bp.tangent()));
    }
    BoundaryTrace { theta, speed, normal_derivative, value, tangential }
}

/// Boundary Cauchy data of eigenpair `j`.
pub fn boundary_cauchy_data(result: &SpectrumResult, j: usize) -> Result<&BoundaryTrace> {
    result.traces.get(j).ok_or(Error::IndexOutOfRange { index: j, len: result.traces.len() })
}
