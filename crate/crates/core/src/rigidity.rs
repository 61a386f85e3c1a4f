//! Rigidity integrals on invariant curves of the ellipse, the Abel transform
//! and its moments at the glancing level, the moment-matrix null-space test,
//! the flatness utilities and the spectral/geometric ratio contract.
//!
//! On the level `Z = c` write `t(θ) = b + ε sin²θ` and `u = b − c`. Then
//! `γ₁ = sqrt(u/t)` and the Leray weight is `w = |x'|/(2t|ζ|)` with
//! `ζ² = (t − u)/t`, so
//!
//! `I(Z) = ∫ ρ̇ γ₁ w dθ = sqrt(u) A(Z)`, `A(Z) = ∫ ρ̇ |x'| / (2t sqrt(t − u)) dθ`.
//!
//! `A` is analytic in `u` for `u < b`, and vanishes exactly where `I` does.

use std::f64::consts::TAU;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::billiards::{invariant_curve_sampled, Branch, FamilyKind, InvariantCurve, PeriodicFamily, CURVE_SAMPLES};
use crate::error::{Error, Result};
use crate::geometry::{DeformationField, EllipseDomain};
use crate::hadamard::{eig_variation, trace_variation};
use crate::numerics::quad::periodic_grid;
use crate::numerics::sum::neumaier_sum;
use crate::spectral::SpectrumResult;

/// Relative change allowed when the quadrature grid doubles.
pub const QUADRATURE_TOL: f64 = 1e-9;

/// Tolerance of the Richardson limit of the moments.
pub const MOMENT_TOL: f64 = 1e-6;

/// Largest supported moment order.
pub const MAX_MOMENT: usize = 8;

/// Creeping levels `u = b 2^{-i}` used for the Richardson limit.
const RICHARDSON_LEVELS: [i32; 4] = [12, 13, 14, 15];

/// Coefficients at or below this are zero for the flatness utilities.
pub const FLAT_TOL: f64 = 1e-14;

fn level_gap(e: &EllipseDomain, theta: f64) -> f64 {
    let s = theta.sin();
    e.b() + e.eps() * s * s
}

fn check_field_resolution(field: &DeformationField, n: usize) -> Result<()> {
    if 8 * field.top_frequency() > n {
        return Err(Error::Quadrature(format!(
            "{n} samples cannot resolve a field of frequency {}",
            field.top_frequency()
        )));
    }
    Ok(())
}

/// `(∫ ρ̇ γ₁ w dθ, ∫ |ρ̇| γ₁ w dθ)` on the stored samples; `γ₁` from the level.
fn curve_sums(curve: &InvariantCurve, field: &DeformationField) -> (f64, f64) {
    let u = curve.domain.b() - curve.level;
    let n = curve.len() as f64;
    let terms: Vec<f64> = curve
        .theta
        .iter()
        .zip(&curve.weight)
        .map(|(&th, &w)| field.eval(th) * (u / level_gap(&curve.domain, th)).sqrt() * w)
        .collect();
    let mass = neumaier_sum(terms.iter().map(|x| x.abs())) * TAU / n;
    (neumaier_sum(terms) * TAU / n, mass)
}

/// `I(Z; ρ̇) = ∫ ρ̇ γ₁ du_Z` over one invariant curve.
///
/// The value uses the curve's own samples; a rerun on twice as many samples
/// must agree to `QUADRATURE_TOL` relative to `∫ |ρ̇| γ₁ du_Z`.
pub fn rigidity_integral(curve: &InvariantCurve, field: &DeformationField) -> Result<f64> {
    check_field_resolution(field, curve.len())?;
    let (value, mass) = curve_sums(curve, field);
    let fine = invariant_curve_sampled(&curve.domain, curve.level, curve.branch, 2 * curve.len())?;
    let (check, _) = curve_sums(&fine, field);
    if (check - value).abs() > QUADRATURE_TOL * mass.max(f64::MIN_POSITIVE) {
        return Err(Error::Quadrature(format!(
            "rigidity integral moved from {value:e} to {check:e} when the grid doubled"
        )));
    }
    Ok(value)
}

fn creeping_check(e: &EllipseDomain, z: f64) -> Result<()> {
    if !(z > 0.0 && z < e.b()) {
        return Err(Error::InvalidArgument(format!("level {z} is outside the elliptic window (0, {})", e.b())));
    }
    Ok(())
}

/// `A(Z) = I(Z)/sqrt(b − Z)` by quadrature over the invariant curve at Z.
pub fn abel_transform(e: &EllipseDomain, field: &DeformationField, z: f64) -> Result<f64> {
    abel_transform_sampled(e, field, z, CURVE_SAMPLES)
}

pub fn abel_transform_sampled(e: &EllipseDomain, field: &DeformationField, z: f64, n: usize) -> Result<f64> {
    creeping_check(e, z)?;
    check_field_resolution(field, n)?;
    let eval = |n: usize| -> Result<(f64, f64)> {
        let curve = invariant_curve_sampled(e, z, Branch::Positive, n)?;
        let terms: Vec<f64> = curve
            .theta
            .iter()
            .zip(&curve.weight)
            .map(|(&th, &w)| field.eval(th) * w / level_gap(e, th).sqrt())
            .collect();
        let mass = neumaier_sum(terms.iter().map(|x| x.abs())) * TAU / n as f64;
        Ok((neumaier_sum(terms) * TAU / n as f64, mass))
    };
    let (value, mass) = eval(n)?;
    let (check, _) = eval(2 * n)?;
    if (check - value).abs() > QUADRATURE_TOL * mass.max(f64::MIN_POSITIVE) {
        return Err(Error::Quadrature(format!("Abel transform moved from {value:e} to {check:e} when the grid doubled")));
    }
    Ok(value)
}

/// `A^{(k)}(Z)/k!` from the differentiated representation
/// `(−1)^k ((1/2)_k/k!) ∫ ρ̇ |x'| (t − u)^{−1/2−k} / (2t) dθ`.
fn abel_taylor_at(e: &EllipseDomain, field: &DeformationField, u: f64, k: usize, n: usize) -> f64 {
    abel_taylor_with_scale(e, field, u, k, n).0
}

/// Value and absolute-integrand scale of [`abel_taylor_at`].
fn abel_taylor_with_scale(e: &EllipseDomain, field: &DeformationField, u: f64, k: usize, n: usize) -> (f64, f64) {
    let mut coef = 1.0;
    for j in 0..k {
        coef *= -(0.5 + j as f64) / (j as f64 + 1.0);
    }
    let terms: Vec<f64> = periodic_grid(n)
        .into_iter()
        .map(|th| {
            let t = level_gap(e, th);
            field.eval(th) * e.speed(th) / (2.0 * t) * (t - u).powf(-0.5 - k as f64)
        })
        .collect();
    let h = TAU / n as f64;
    let scale = neumaier_sum(terms.iter().map(|v| v.abs())) * h * coef.abs();
    (coef * neumaier_sum(terms) * h, scale)
}

/// `dA/dZ` by the differentiated quadrature.
pub fn abel_transform_derivative(e: &EllipseDomain, field: &DeformationField, z: f64) -> Result<f64> {
    creeping_check(e, z)?;
    check_field_resolution(field, CURVE_SAMPLES)?;
    Ok(abel_taylor_at(e, field, e.b() - z, 1, CURVE_SAMPLES))
}

/// Taylor coefficients `m_k = A^{(k)}(b)/k!`, `k = 0..=k_max`.
///
/// Each coefficient of the differentiated representation is evaluated on
/// four creeping levels and extrapolated to `Z = b` by Neville's scheme;
/// disagreement between the three- and four-level limits above
/// `MOMENT_TOL` is an error.
pub fn abel_moments(e: &EllipseDomain, field: &DeformationField, k_max: usize) -> Result<Vec<f64>> {
    if k_max > MAX_MOMENT {
        return Err(Error::InvalidArgument(format!("k_max = {k_max} exceeds {MAX_MOMENT}")));
    }
    if !field.is_symmetric() {
        return Err(Error::InvalidField("moments need a Z2xZ2-symmetric field".into()));
    }
    check_field_resolution(field, CURVE_SAMPLES)?;
    let us: Vec<f64> = RICHARDSON_LEVELS.iter().map(|&i| e.b() * 2f64.powi(-i)).collect();
    (0..=k_max)
        .map(|k| {
            let (vals, scales): (Vec<f64>, Vec<f64>) =
                us.iter().map(|&u| abel_taylor_with_scale(e, field, u, k, CURVE_SAMPLES)).unzip();
            let four = neville_at_zero(&us, &vals);
            let three = neville_at_zero(&us[..3], &vals[..3]);
            let scale = scales.iter().fold(0.0f64, |m, &v| m.max(v));
            if (four - three).abs() > MOMENT_TOL * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Moment(format!("order {k}: limits {three:e} and {four:e} disagree")));
            }
            Ok(four)
        })
        .collect()
}

/// Value at 0 of the interpolating polynomial through `(x_i, y_i)`.
fn neville_at_zero(x: &[f64], y: &[f64]) -> f64 {
    let mut p = y.to_vec();
    for m in 1..x.len() {
        for i in 0..x.len() - m {
            p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i]);
        }
    }
    p[0]
}

/// Knobs of [`null_space_test_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NullSpaceOptions {
    /// Curve samples at the base resolution.
    pub samples: usize,
    /// Factor applied to `samples` for the refinement run.
    pub refinement: usize,
    /// Append the rows `ρ̇(0)` and `ρ̇(π/2)` (axis endpoints).
    pub endpoint_constraints: bool,
    /// Relative size of σ_min, against σ_max, below which rank is lost.
    pub rank_tol: f64,
    /// Largest relative change of σ_min under refinement.
    pub stability_tol: f64,
}

impl Default for NullSpaceOptions {
    fn default() -> Self {
        Self { samples: 256, refinement: 4, endpoint_constraints: false, rank_tol: 1e-12, stability_tol: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// σ_min is bounded away from zero and stable under refinement.
    Rigid,
    /// σ_min fell below the rank tolerance.
    RankLoss,
    /// σ_min changed by more than the stability tolerance under refinement.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub modes: usize,
    /// Caustic levels `Z_i = b(1 − 2^{−i})`.
    pub levels: Vec<f64>,
    /// `matrix[i][j] = I(Z_i; cos 2jθ)`, followed by endpoint rows if enabled.
    pub matrix: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub refined_singular_values: Vec<f64>,
    pub sigma_min: f64,
    pub sigma_min_refined: f64,
    /// `|σ_min(refined) − σ_min| / σ_min`.
    pub relative_change: f64,
    /// Numerical rank of the first `k` curve rows, `k = 1..=K`.
    pub rank_by_curves: Vec<usize>,
    /// `‖M v‖` for the unit right singular vector of σ_min, base and refined.
    pub kernel_residual: f64,
    pub kernel_residual_refined: f64,
    pub samples: usize,
    pub refined_samples: usize,
    pub endpoint_constraints: bool,
    pub verdict: Verdict,
}

impl RigidityReport {
    /// The moment matrix as comma-separated rows with a header.
    pub fn matrix_csv(&self) -> String {
        let mut out = String::from("row,level");
        for j in 0..self.modes {
            out.push_str(&format!(",cos{}", 2 * j));
        }
        out.push('\n');
        for (i, row) in self.matrix.iter().enumerate() {
            let level = self.levels.get(i).map_or_else(|| "endpoint".to_string(), |z| format!("{z:.17e}"));
            out.push_str(&format!("{i},{level}"));
            for v in row {
                out.push_str(&format!(",{v:.17e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Creeping levels `Z_i = b(1 − 2^{−i})`, `i = 1..=k`.
pub fn creeping_levels(e: &EllipseDomain, k: usize) -> Vec<f64> {
    (1..=k).map(|i| e.b() * (1.0 - 2f64.powi(-(i as i32)))).collect()
}

/// Rows `I(Z_i; ρ̇)` of `field` on the given levels.
pub fn field_residuals(e: &EllipseDomain, field: &DeformationField, levels: &[f64], samples: usize) -> Result<Vec<f64>> {
    levels
        .par_iter()
        .map(|&z| {
            creeping_check(e, z)?;
            rigidity_integral(&invariant_curve_sampled(e, z, Branch::Positive, samples)?, field)
        })
        .collect()
}

fn moment_matrix(e: &EllipseDomain, modes: usize, levels: &[f64], samples: usize, endpoints: bool) -> Result<Mat<f64>> {
    let fields: Vec<DeformationField> = (0..modes).map(DeformationField::mode).collect();
    let rows: Vec<Vec<f64>> = levels
        .par_iter()
        .map(|&z| {
            let curve = invariant_curve_sampled(e, z, Branch::Positive, samples)?;
            fields.iter().map(|f| rigidity_integral(&curve, f)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let extra = if endpoints { 2 } else { 0 };
    let mut m = Mat::<f64>::zeros(rows.len() + extra, modes);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    if endpoints {
        for (j, f) in fields.iter().enumerate() {
            m[(rows.len(), j)] = f.eval(0.0);
            m[(rows.len() + 1, j)] = f.eval(std::f64::consts::FRAC_PI_2);
        }
    }
    Ok(m)
}

/// Singular values (descending) and the right singular vector of the smallest.
fn svd_summary(m: &Mat<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let svd = m.thin_svd().map_err(|_| Error::Accuracy("moment matrix SVD failed".into()))?;
    let s = svd.S().column_vector();
    let sv: Vec<f64> = (0..s.nrows()).map(|i| s[i]).collect();
    let v = svd.V();
    let last = v.ncols() - 1;
    Ok((sv, (0..v.nrows()).map(|i| v[(i, last)]).collect()))
}

fn residual(m: &Mat<f64>, v: &[f64]) -> f64 {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum::<f64>().powi(2)).sum::<f64>().sqrt()
}

fn numerical_rank(m: &Mat<f64>, tol: f64) -> Result<usize> {
    let (sv, _) = svd_summary(m)?;
    let top = sv.first().copied().unwrap_or(0.0);
    Ok(sv.iter().filter(|&&s| s > tol * top && s > 0.0).count())
}

/// Moment-matrix null-space test with default options.
pub fn null_space_test(e: &EllipseDomain, modes: usize, curves: usize) -> Result<RigidityReport> {
    null_space_test_with(e, modes, curves, &NullSpaceOptions::default())
}

/// Builds `M_ij = I(Z_i; cos 2jθ)` on `curves` creeping levels and reports
/// its singular values at the base and the refined resolution.
pub fn null_space_test_with(
    e: &EllipseDomain,
    modes: usize,
    curves: usize,
    opts: &NullSpaceOptions,
) -> Result<RigidityReport> {
    if modes == 0 || curves < modes {
        return Err(Error::InvalidArgument(format!("need 0 < M <= K, got M = {modes}, K = {curves}")));
    }
    if opts.refinement < 2 {
        return Err(Error::InvalidArgument("refinement factor must be at least 2".into()));
    }
    let levels = creeping_levels(e, curves);
    let fine_samples = opts.samples * opts.refinement;
    let m = moment_matrix(e, modes, &levels, opts.samples, opts.endpoint_constraints)?;
    let mf = moment_matrix(e, modes, &levels, fine_samples, opts.endpoint_constraints)?;
    let (sv, v) = svd_summary(&m)?;
    let (svf, vf) = svd_summary(&mf)?;
    let sigma_min = *sv.last().unwrap_or(&0.0);
    let sigma_min_refined = *svf.last().unwrap_or(&0.0);
    let relative_change =
        if sigma_min > 0.0 { (sigma_min_refined - sigma_min).abs() / sigma_min } else { f64::INFINITY };
    let rank_by_curves = (1..=curves)
        .map(|k| numerical_rank(&m.subrows(0, k).to_owned(), opts.rank_tol))
        .collect::<Result<Vec<_>>>()?;
    let top = sv.first().copied().unwrap_or(0.0);
    let verdict = if !(sigma_min > opts.rank_tol * top) || !(sigma_min_refined > opts.rank_tol * top) {
        Verdict::RankLoss
    } else if relative_change > opts.stability_tol {
        Verdict::Unresolved
    } else {
        Verdict::Rigid
    };
    Ok(RigidityReport {
        modes,
        levels,
        matrix: (0..m.nrows()).map(|i| (0..modes).map(|j| m[(i, j)]).collect()).collect(),
        kernel_residual: residual(&m, &v),
        kernel_residual_refined: residual(&mf, &vf),
        singular_values: sv,
        refined_singular_values: svf,
        sigma_min,
        sigma_min_refined,
        relative_change,
        rank_by_curves,
        samples: opts.samples,
        refined_samples: fine_samples,
        endpoint_constraints: opts.endpoint_constraints,
        verdict,
    })
}

/// Outcome of [`first_nonflat_order`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flatness {
    /// `ρ^{(k)}/k!` is the first non-vanishing Taylor term.
    Order { k: usize, leading: DeformationField },
    Flat,
}

/// Smallest `k` with `taylor[k] = ρ^{(k)}` non-zero, and `ρ^{(k)}/k!`.
///
/// `taylor[j]` holds the j-th ε-derivative of the boundary offset at ε = 0.
pub fn first_nonflat_order(taylor: &[DeformationField]) -> Flatness {
    match taylor.iter().position(|f| !f.is_zero(FLAT_TOL)) {
        Some(k) => {
            let fact: f64 = (1..=k).map(|j| j as f64).product();
            Flatness::Order { k, leading: taylor[k].scaled(1.0 / fact) }
        }
        None => Flatness::Flat,
    }
}

/// The family under `ε → ε^{1/k}`: its first-order Taylor data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reparametrized {
    pub k: usize,
    /// `ρ^{(k)}/k!`, the ε-velocity of the reparametrized family.
    pub leading: DeformationField,
    /// `[0, leading]`: the Taylor data of the new family through first order.
    pub taylor: Vec<DeformationField>,
}

/// Reparametrizes by `ε → ε^{1/k}` so the leading term becomes first order.
pub fn reparametrize_flat(taylor: &[DeformationField], order: &Flatness) -> Result<Reparametrized> {
    match order {
        Flatness::Flat => Err(Error::Flat),
        Flatness::Order { k, .. } => {
            let Flatness::Order { k: k_found, leading } = first_nonflat_order(taylor) else {
                return Err(Error::Flat);
            };
            if k_found != *k {
                return Err(Error::InvalidArgument(format!("order {k} does not match the sequence (first non-zero {k_found})")));
            }
            Ok(Reparametrized { k: *k, taylor: vec![DeformationField::zero(), leading.clone()], leading })
        }
    }
}

/// Spectral and geometric ratios for a field pair at one periodic family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioContract {
    pub length: f64,
    pub level: f64,
    pub width: f64,
    pub spectral: (f64, f64),
    pub geometric: (f64, f64),
    pub spectral_ratio: f64,
    pub geometric_ratio: f64,
    /// `|spectral_ratio − geometric_ratio| / |geometric_ratio|`.
    pub discrepancy: f64,
}

fn is_clean_simple(f: &PeriodicFamily) -> bool {
    f.kind == FamilyKind::Elliptic && f.components == 2 && f.time_reversal_pair && !f.perimeter_multiple
}

/// Compares `trace_variation(T; ρ̇₁)/trace_variation(T; ρ̇₂)` with
/// `I(Z_T; ρ̇₁)/I(Z_T; ρ̇₂)` at the family's length `T` and level `Z_T`.
pub fn ratio_contract(
    spec: &SpectrumResult,
    field1: &DeformationField,
    field2: &DeformationField,
    family: &PeriodicFamily,
    sigma: f64,
) -> Result<RatioContract> {
    if !is_clean_simple(family) {
        return Err(Error::InvalidArgument(format!(
            "family {}/{} is not one curve plus its time reversal",
            family.p, family.q
        )));
    }
    if !spec.domain.is_exact_ellipse() {
        return Err(Error::InvalidDomain("the ratio contract needs the spectrum of the exact ellipse".into()));
    }
    let e = spec.domain.base;
    let traced = |f: &DeformationField| -> Result<f64> {
        let v = eig_variation(spec, f)?;
        Ok(trace_variation(spec, &v, family.length, sigma)?.value)
    };
    let (s1, s2) = (traced(field1)?, traced(field2)?);
    let curve = invariant_curve_sampled(&e, family.level, Branch::Positive, CURVE_SAMPLES)?;
    let i1 = rigidity_integral(&curve, field1)?;
    let i2 = rigidity_integral(&curve, field2)?;
    let (_, mass2) = curve_sums(&curve, field2);
    let v2 = eig_variation(spec, field2)?;
    let spectral_scale: f64 = v2.iter().map(|c| c.value.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    if s2.abs() <= 1e-12 * spectral_scale {
        return Err(Error::DegenerateRatio(format!("spectral denominator {s2:e} is at noise level")));
    }
    if i2.abs() <= 1e-12 * mass2 || mass2 == 0.0 {
        return Err(Error::DegenerateRatio(format!("geometric denominator {i2:e} is at noise level")));
    }
    let spectral_ratio = s1 / s2;
    let geometric_ratio = i1 / i2;
    Ok(RatioContract {
        length: family.length,
        level: family.level,
        width: sigma,
        spectral: (s1, s2),
        geometric: (i1, i2),
        spectral_ratio,
        geometric_ratio,
        discrepancy: (spectral_ratio - geometric_ratio).abs() / geometric_ratio.abs(),
    })
}
