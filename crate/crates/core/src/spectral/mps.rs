//! Method of particular solutions for one parity class.
//!
//! For a trial frequency λ the Fourier–Bessel basis is collocated on the
//! quarter boundary arc and on a few interior points, giving a matrix `A`.
//! The tensions σ₁ ≤ σ₂ ≤ … are the stationary values of
//! `‖A_B c‖ / ‖A c‖` with `A_B` the boundary rows. Eigenvalues are the
//! zeros of σ₁.
//!
//! Near a zero σⱼ ≈ S·|λ − λ*|, so a tension and its λ-derivative predict
//! the zero at `λ − σ/σ'`. Every small tension at every sample contributes
//! such a prediction, which resolves zeros closer than the sample step.

use std::f64::consts::FRAC_PI_2;

use faer::{Mat, MatRef};

use super::basis::{FourierBessel, SymmetryClass};
use super::BoundaryCondition;
use crate::geometry::{DomainSpec, Vec2};
use crate::numerics::bessel::bessel_j_all;

/// Relative singular-value cutoff defining the numerical column space.
const RANK_TOL: f64 = 1e-14;
/// Tensions tracked per sample.
const TRACKED: usize = 3;

/// Tensions below this are at the rounding floor of the boundary fit.
const NOISE_TENSION: f64 = 1e-8;

/// Collocation data valid for λ up to the band top it was built for.
pub(crate) struct Discretization {
    class: SymmetryClass,
    bc: BoundaryCondition,
    orders: Vec<usize>,
    /// (point, outward normal, quadrature weight)
    boundary: Vec<(Vec2, Vec2, f64)>,
    interior: Vec<(Vec2, f64)>,
}

/// Highest angular order used at frequency λ on a domain of radius `r_max`.
pub(crate) fn order_cap(lambda: f64, r_max: f64, factor: f64) -> usize {
    let kr = lambda * r_max;
    (factor * (kr + 3.0 * kr.cbrt() + 12.0)).ceil() as usize
}

/// Smallest tensions at one λ with their λ-derivatives, ascending in σ.
pub(crate) struct Probe {
    pub sigma: Vec<f64>,
    pub slope: Vec<f64>,
}

struct Factored {
    u: Mat<f64>,
    s: Vec<f64>,
    v: Mat<f64>,
    scales: Vec<f64>,
}

impl Discretization {
    pub fn new(domain: &DomainSpec, class: SymmetryClass, bc: BoundaryCondition, lambda_top: f64, factor: f64) -> Self {
        let r_max = domain.max_radius();
        let orders = class.orders(order_cap(lambda_top, r_max, factor));
        let nb = orders.len();
        let m_b = 2 * nb + 12;
        let dth = FRAC_PI_2 / m_b as f64;
        let boundary = (0..m_b)
            .map(|k| {
                let bp = domain.boundary_point((k as f64 + 0.5) * dth);
                (bp.position, bp.normal, (bp.speed * dth).sqrt())
            })
            .collect();
        let m_i = nb / 2 + 8;
        let quarter_area = domain.base.area() / 4.0;
        let w_i = (quarter_area / m_i as f64).sqrt();
        // golden-ratio sequence over the quarter domain, radii in [0.25, 0.85]
        let g = 0.618_033_988_749_894_9;
        let interior = (0..m_i)
            .map(|k| {
                let u = ((k as f64 + 0.5) * g).fract();
                let v = (k as f64 + 0.5) / m_i as f64;
                let th = FRAC_PI_2 * (0.05 + 0.9 * u);
                let s = 0.25 + 0.6 * v;
                (domain.derivatives(th).0 * s, w_i)
            })
            .collect();
        Self { class, bc, orders, boundary, interior }
    }

    fn m_b(&self) -> usize {
        self.boundary.len()
    }

    /// Collocation matrix and optionally its λ-derivative, both unscaled.
    fn matrices(&self, lambda: f64, with_derivative: bool) -> (Mat<f64>, Option<Mat<f64>>) {
        let nb = self.orders.len();
        let m = self.boundary.len() + self.interior.len();
        let mut a = Mat::<f64>::zeros(m, nb);
        let mut da = with_derivative.then(|| Mat::<f64>::zeros(m, nb));
        let n_top = self.orders.last().copied().unwrap_or(0);
        let mut jn = vec![0.0; n_top + 2];
        let sine = self.class.odd_in_y();
        let neumann = self.bc == BoundaryCondition::Neumann;
        let first = self.orders.first().copied().unwrap_or(0);
        let rows = self
            .boundary
            .iter()
            .map(|&(p, nu, w)| (p, Some(nu), w))
            .chain(self.interior.iter().map(|&(p, w)| (p, None, w)));
        for (i, (p, nu, w)) in rows.enumerate() {
            let r = p.norm();
            let phi = p.y.atan2(p.x);
            let x = lambda * r;
            bessel_j_all(x, &mut jn);
            let (sphi, cphi) = phi.sin_cos();
            let flux = neumann && nu.is_some();
            // normal components along e_r and e_φ
            let (nr, nphi) = match nu {
                Some(nu) if flux => (nu.x * cphi + nu.y * sphi, -nu.x * sphi + nu.y * cphi),
                _ => (0.0, 0.0),
            };
            let (s2, c2) = (2.0 * phi).sin_cos();
            let (mut s, mut c) = (first as f64 * phi).sin_cos();
            for (j, &n) in self.orders.iter().enumerate() {
                if j > 0 {
                    let cn = c * c2 - s * s2;
                    s = s * c2 + c * s2;
                    c = cn;
                }
                let nf = n as f64;
                let (t, dt) = if sine { (s, nf * c) } else { (c, -nf * s) };
                let jv = jn[n];
                let jp = if n == 0 { -jn[1] } else { 0.5 * (jn[n - 1] - jn[n + 1]) };
                if flux {
                    // (∇f·ν)/λ for f = J_n(λr) T(nφ); boundary points have r > 0
                    a[(i, j)] = w * (jp * t * nr + jv / x * dt * nphi);
                    if let Some(da) = da.as_mut() {
                        let jpp = -jp / x - (1.0 - nf * nf / (x * x)) * jv;
                        da[(i, j)] = w * (r * jpp * t * nr + dt * nphi * (jp - jv / x) / lambda);
                    }
                } else {
                    a[(i, j)] = w * jv * t;
                    if let Some(da) = da.as_mut() {
                        da[(i, j)] = w * r * jp * t;
                    }
                }
            }
        }
        (a, da)
    }

    /// Truncated SVD of the column-normalised collocation matrix.
    fn factor(a: &Mat<f64>) -> Option<Factored> {
        let (m, nb) = (a.nrows(), a.ncols());
        let mut scales = vec![1.0; nb];
        let mut an = a.clone();
        for (j, sc) in scales.iter_mut().enumerate() {
            let norm = (0..m).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt();
            if norm > 0.0 && norm.is_finite() {
                *sc = norm;
                for i in 0..m {
                    an[(i, j)] /= norm;
                }
            }
        }
        let svd = an.thin_svd().ok()?;
        let sv = svd.S().column_vector();
        let s0 = sv[0];
        let r = (0..sv.nrows()).take_while(|&i| sv[i] > RANK_TOL * s0).count().max(1);
        Some(Factored {
            u: svd.U().subcols(0, r).to_owned(),
            s: (0..r).map(|i| sv[i]).collect(),
            v: svd.V().subcols(0, r).to_owned(),
            scales,
        })
    }

    /// Column-scaled coefficients `V S⁻¹ w` for column `col` of `w`.
    fn scaled_coefficients(f: &Factored, w: MatRef<'_, f64>, col: usize) -> Vec<f64> {
        let r = f.s.len();
        (0..f.v.nrows()).map(|j| (0..r).map(|i| f.v[(j, i)] * w[(i, col)] / f.s[i]).sum::<f64>()).collect()
    }

    /// The smallest tensions at λ and their λ-derivatives.
    ///
    /// At a stationary point with `‖A c‖ = 1` and `A_B c = σ p`,
    /// `σ' = p·(A'_B c) − σ (A c)·(A' c)`.
    pub fn probe(&self, lambda: f64) -> Option<Probe> {
        let (a, da) = self.matrices(lambda, true);
        let da = da?;
        let f = Self::factor(&a)?;
        let m_b = self.m_b();
        let m = a.nrows();
        let ub = f.u.subrows(0, m_b).to_owned();
        let svd = ub.thin_svd().ok()?;
        let sig = svd.S().column_vector();
        let p = svd.U();
        let w = svd.V();
        let r = w.ncols();
        let mut sigma = Vec::with_capacity(TRACKED);
        let mut slope = Vec::with_capacity(TRACKED);
        for k in 0..TRACKED.min(r) {
            let col = r - 1 - k;
            let c: Vec<f64> =
                Self::scaled_coefficients(&f, w, col).iter().zip(&f.scales).map(|(c, s)| c / s).collect();
            let y: Vec<f64> = (0..m).map(|i| (0..c.len()).map(|j| da[(i, j)] * c[j]).sum::<f64>()).collect();
            let g: Vec<f64> = (0..m).map(|i| (0..r).map(|q| f.u[(i, q)] * w[(q, col)]).sum::<f64>()).collect();
            let py: f64 = (0..m_b).map(|i| p[(i, col)] * y[i]).sum();
            let gy: f64 = (0..m).map(|i| g[i] * y[i]).sum();
            sigma.push(sig[col]);
            slope.push(py - sig[col] * gy);
        }
        Some(Probe { sigma, slope })
    }

    /// Particular solutions for the `count` smallest tensions at λ.
    pub fn modes(&self, lambda: f64, count: usize) -> Vec<(FourierBessel, f64)> {
        let (a, _) = self.matrices(lambda, false);
        let Some(f) = Self::factor(&a) else {
            return Vec::new();
        };
        let ub = f.u.subrows(0, self.m_b()).to_owned();
        let Ok(svd) = ub.thin_svd() else {
            return Vec::new();
        };
        let sig = svd.S().column_vector();
        let w = svd.V();
        let r = w.ncols();
        (0..count.min(r))
            .map(|k| {
                let col = r - 1 - k;
                let coefficients =
                    Self::scaled_coefficients(&f, w, col).iter().zip(&f.scales).map(|(c, s)| c / s).collect();
                (FourierBessel { class: self.class, lambda, orders: self.orders.clone(), coefficients }, sig[col])
            })
            .collect()
    }
}

/// A located eigenvalue of one class.
#[derive(Debug, Clone)]
pub(crate) struct Located {
    pub lambda: f64,
    pub band: usize,
    /// Number of tensions below the acceptance level at `lambda`.
    pub multiplicity: usize,
}

/// Frequency bands sharing one discretization.
pub(crate) struct Bands {
    edges: Vec<f64>,
    pub discs: Vec<Discretization>,
}

impl Bands {
    pub fn new(domain: &DomainSpec, class: SymmetryClass, bc: BoundaryCondition, lo: f64, hi: f64, factor: f64) -> Self {
        let mut edges = vec![lo];
        let mut x = lo;
        while x < hi {
            x = (x + (0.12 * x).max(1.0)).min(hi);
            edges.push(x);
        }
        let discs = edges
            .windows(2)
            .map(|w| Discretization::new(domain, class, bc, w[1] * 1.02 + 0.1, factor))
            .collect();
        Self { edges, discs }
    }

    pub fn band_of(&self, lambda: f64) -> usize {
        let n = self.discs.len();
        self.edges[1..].iter().position(|&e| lambda <= e).unwrap_or(n - 1).min(n - 1)
    }
}

/// Sweep configuration for one class.
pub(crate) struct SweepParams {
    pub lo: f64,
    pub hi: f64,
    /// Mean class-level spacing at λ is `1 / (density_coeff · λ)`.
    pub density_coeff: f64,
    pub samples_per_spacing: f64,
    pub max_step: f64,
    pub accept_tol: f64,
}

/// Outcome of a class sweep.
pub(crate) struct SweepResult {
    pub located: Vec<Located>,
    /// Refinements that ended at a tension above `accept_tol`, as (λ, σ).
    pub stalled: Vec<(f64, f64)>,
}

/// Zero predictions `λ − σⱼ/σⱼ'` within `reach` of λ, skipping the first `skip`.
fn predictions(lambda: f64, probe: &Probe, reach: f64, skip: usize) -> Vec<f64> {
    probe
        .sigma
        .iter()
        .zip(&probe.slope)
        .skip(skip)
        .filter_map(|(&s, &d)| {
            let step = s / d;
            (step.is_finite() && step.abs() <= reach).then_some(lambda - step)
        })
        .collect()
}

enum Newton {
    Converged { lambda: f64, probe: Probe },
    Failed { lambda: f64, sigma: f64 },
}

/// Newton iteration on σ₁ from `x0`, confined to `x0 ± reach`.
fn newton(disc: &Discretization, x0: f64, reach: f64) -> Newton {
    let mut x = x0;
    let mut best: Option<(f64, Probe)> = None;
    for _ in 0..12 {
        let Some(pr) = disc.probe(x) else {
            break;
        };
        let (s, d) = (pr.sigma[0], pr.slope[0]);
        let step = s / d;
        if step.abs() <= 1e-13 * x {
            return Newton::Converged { lambda: x, probe: pr };
        }
        if best.as_ref().is_none_or(|b| s < b.1.sigma[0]) {
            best = Some((x, pr));
        }
        if !step.is_finite() || (x - step - x0).abs() > reach {
            break;
        }
        x -= step;
    }
    match best {
        // the iteration stalls on rounding noise once σ reaches it
        Some((lambda, probe)) if probe.sigma[0] < NOISE_TENSION => Newton::Converged { lambda, probe },
        Some((lambda, probe)) => Newton::Failed { lambda, sigma: probe.sigma[0] },
        None => Newton::Failed { lambda: x0, sigma: f64::INFINITY },
    }
}

/// Locates every zero of σ₁ in `[lo, hi]`.
pub(crate) fn sweep(bands: &Bands, p: &SweepParams) -> SweepResult {
    let step_at = |x: f64| (1.0 / (p.samples_per_spacing * p.density_coeff * x)).min(p.max_step);
    let mut pending: Vec<(f64, f64)> = Vec::new();
    let mut x = p.lo;
    while x <= p.hi + step_at(x) {
        let h = step_at(x);
        if let Some(pr) = bands.discs[bands.band_of(x)].probe(x) {
            pending.extend(predictions(x, &pr, 1.5 * h, 0).into_iter().map(|z| (z, h)));
        }
        x += h;
    }
    pending.sort_by(|a, b| a.0.total_cmp(&b.0));
    // predictions of one zero from neighbouring samples nearly coincide
    let mut queue: Vec<(f64, f64)> = Vec::new();
    for (z, h) in pending {
        match queue.last() {
            Some(&(q, _)) if (z - q).abs() < 0.02 * h => {}
            _ => queue.push((z, h)),
        }
    }
    queue.reverse();

    let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
    let mut found: Vec<Located> = Vec::new();
    let mut stalled = Vec::new();
    while let Some((z0, h)) = queue.pop() {
        if z0 < p.lo - 2.0 * h || z0 > p.hi + 2.0 * h || found.iter().any(|f| same(f.lambda, z0)) {
            continue;
        }
        let band = bands.band_of(z0);
        match newton(&bands.discs[band], z0, 2.0 * h) {
            Newton::Converged { lambda, probe } => {
                if probe.sigma[0] >= p.accept_tol {
                    stalled.push((lambda, probe.sigma[0]));
                    continue;
                }
                if found.iter().any(|f| same(f.lambda, lambda)) {
                    continue;
                }
                let multiplicity = probe.sigma.iter().take_while(|&&s| s < p.accept_tol).count();
                found.push(Located { lambda, band, multiplicity });
                // the remaining small tensions point at neighbouring zeros
                for z in predictions(lambda, &probe, 2.0 * h, multiplicity) {
                    if !found.iter().any(|f| same(f.lambda, z)) {
                        queue.push((z, h));
                    }
                }
            }
            Newton::Failed { lambda, sigma } => stalled.push((lambda, sigma)),
        }
    }
    found.retain(|f| f.lambda >= p.lo && f.lambda <= p.hi);
    found.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    // a stall is explained when it sits on a located zero
    stalled.retain(|&(l, _)| !found.iter().any(|f| (f.lambda - l).abs() < 1e-6 * l));
    SweepResult { located: found, stalled }
}
