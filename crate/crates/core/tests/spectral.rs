use std::f64::consts::PI;

use hadamard_lab::geometry::{DeformationField, DomainSpec, EllipseDomain, Vec2};
use hadamard_lab::numerics::quad::gauss_legendre_on;
use hadamard_lab::spectral::*;
use hadamard_lab::Error;

/// `J_n(x) = (1/2π) ∫_0^{2π} cos(nτ − x sin τ) dτ` by the periodic trapezoid
/// rule (exact to rounding for the arguments used here).
fn bessel_integral(n: usize, x: f64) -> f64 {
    let m = 256;
    let s: f64 = (0..m)
        .map(|k| {
            let tau = 2.0 * PI * k as f64 / m as f64;
            (n as f64 * tau - x * tau.sin()).cos()
        })
        .sum();
    s / m as f64
}

fn bessel_integral_prime(n: usize, x: f64) -> f64 {
    let m = 256;
    let s: f64 = (0..m)
        .map(|k| {
            let tau = 2.0 * PI * k as f64 / m as f64;
            tau.sin() * (n as f64 * tau - x * tau.sin()).sin()
        })
        .sum();
    s / m as f64
}

/// Zeros of `f` in `(lo, hi)` by a fine sign scan and bisection to rounding.
fn zeros(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<f64> {
    let step = 1e-3;
    let mut out = Vec::new();
    let mut a = lo;
    let mut fa = f(a);
    while a < hi {
        let b = a + step;
        let fb = f(b);
        if fa * fb < 0.0 {
            let (mut l, mut r, mut fl) = (a, b, fa);
            for _ in 0..80 {
                let m = 0.5 * (l + r);
                let fm = f(m);
                if fm * fl <= 0.0 {
                    r = m;
                } else {
                    l = m;
                    fl = fm;
                }
            }
            out.push(0.5 * (l + r));
        }
        a = b;
        fa = fb;
    }
    out
}

/// First `count` disk eigenvalues λ² with multiplicity (positive ones only).
fn disk_oracle(bc: BoundaryCondition, count: usize, lambda_hi: f64) -> Vec<f64> {
    let mut all = Vec::new();
    for n in 0..25usize {
        // zeros of J_n and J_n' lie beyond x = n; below that J_n is rounding noise
        let lo = (n as f64).max(0.5);
        let z = match bc {
            BoundaryCondition::Dirichlet => zeros(|x| bessel_integral(n, x), lo, lambda_hi),
            BoundaryCondition::Neumann => zeros(|x| bessel_integral_prime(n, x), lo, lambda_hi),
        };
        for j in z {
            all.push(j * j);
            if n > 0 {
                all.push(j * j);
            }
        }
    }
    all.sort_by(f64::total_cmp);
    all.truncate(count);
    all
}

fn disk() -> DomainSpec {
    DomainSpec::ellipse(EllipseDomain::disk(1.0).unwrap())
}

fn ellipse() -> DomainSpec {
    DomainSpec::ellipse(EllipseDomain::new(2.0, 1.0).unwrap())
}

#[test]
fn disk_first_twenty_match_bessel_zeros() {
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
        let s = solve_spectrum(&disk(), bc, 11.0, 128).unwrap();
        let got: Vec<f64> = s.eigenvalues().into_iter().filter(|&l| l > 0.0).take(20).collect();
        let want = disk_oracle(bc, 20, 11.5);
        assert_eq!(got.len(), 20);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-8 * w, "{bc:?}: {g} vs {w}");
        }
    }
}

#[test]
fn disk_ground_states() {
    let d = solve_spectrum(&disk(), BoundaryCondition::Dirichlet, 3.0, 64).unwrap();
    assert!((d.eigenpairs[0].lambda_sq - 5.783185962946784).abs() < 1e-9);
    let n = solve_spectrum(&disk(), BoundaryCondition::Neumann, 3.0, 64).unwrap();
    assert_eq!(n.eigenpairs[0].lambda_sq, 0.0);
    assert!((n.eigenpairs[1].lambda_sq - 3.389957716672).abs() < 1e-9);
    assert!((n.eigenpairs[1].lambda_sq - n.eigenpairs[2].lambda_sq).abs() < 1e-12);
    assert_eq!(n.clusters[1].indices.len(), 2);
}

#[test]
fn disk_dirichlet_radial_mode_has_constant_flux() {
    let s = solve_spectrum(&disk(), BoundaryCondition::Dirichlet, 3.0, 64).unwrap();
    let t = boundary_cauchy_data(&s, 0).unwrap();
    let mean = t.normal_derivative.iter().sum::<f64>() / t.normal_derivative.len() as f64;
    assert!(t.normal_derivative.iter().all(|v| (v - mean).abs() < 1e-10 * mean.abs()));
}

#[test]
fn rellich_identity_on_disks() {
    for r in [1.0, 1.5] {
        let dom = DomainSpec::ellipse(EllipseDomain::disk(r).unwrap());
        let s = solve_spectrum(&dom, BoundaryCondition::Dirichlet, 10.0, 256).unwrap();
        for (j, e) in s.eigenpairs.iter().enumerate() {
            let t = boundary_cauchy_data(&s, j).unwrap();
            let flux = t.integrate(|k| t.normal_derivative[k].powi(2));
            let want = 2.0 * e.lambda_sq / r;
            assert!((flux - want).abs() < 1e-8 * want, "R={r} j={j}: {flux} vs {want}");
        }
    }
}

#[test]
fn neumann_radial_mode_has_no_tangential_gradient() {
    let s = solve_spectrum(&disk(), BoundaryCondition::Neumann, 4.5, 64).unwrap();
    let j = s
        .eigenpairs
        .iter()
        .position(|e| (e.lambda - 3.8317059702075125).abs() < 1e-8)
        .expect("radial Neumann mode");
    let t = boundary_cauchy_data(&s, j).unwrap();
    let scale = t.value.iter().fold(0.0f64, |m, v| m.max(v.abs())) * s.eigenpairs[j].lambda;
    assert!(t.tangential.iter().all(|v| v.abs() < 1e-9 * scale));
    assert!(t.normal_derivative.iter().all(|v| v.abs() < 1e-8 * scale));
}

#[test]
fn traces_follow_symmetry_classes() {
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
        let s = solve_spectrum(&ellipse(), bc, 8.0, 128).unwrap();
        for (j, e) in s.eigenpairs.iter().enumerate() {
            let t = boundary_cauchy_data(&s, j).unwrap();
            let data = match bc {
                BoundaryCondition::Dirichlet => &t.normal_derivative,
                BoundaryCondition::Neumann => &t.value,
            };
            let n = data.len();
            let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let sy = if e.class.odd_in_y() { -1.0 } else { 1.0 };
            let sx = if e.class.odd_in_x() { -1.0 } else { 1.0 };
            for k in 0..n {
                // θ → −θ is y → −y; θ → π − θ is x → −x
                assert!((data[(n - k) % n] - sy * data[k]).abs() < 1e-9 * scale);
                assert!((data[(n / 2 + n - k) % n] - sx * data[k]).abs() < 1e-9 * scale);
            }
            if e.class == SymmetryClass::EvenEven && e.lambda > 0.0 {
                // even trace: centred difference at θ = 0 and π/2 vanishes
                assert!((data[1] - data[n - 1]).abs() < 1e-9 * scale);
                assert!((data[n / 4 + 1] - data[n / 4 - 1]).abs() < 1e-9 * scale);
            }
        }
    }
}

/// `∫_Ω Ψ²` in Cartesian coordinates: `x = A sin φ`, `y = B cos φ · s`.
fn cartesian_norm(mode: &FourierBessel, a: f64, b: f64) -> f64 {
    let (phi, wp) = gauss_legendre_on(120, -PI / 2.0, PI / 2.0);
    let (s, ws) = gauss_legendre_on(120, -1.0, 1.0);
    let mut total = 0.0;
    for (p, w1) in phi.iter().zip(&wp) {
        let half = b * p.cos();
        for (q, w2) in s.iter().zip(&ws) {
            let v = mode.value(Vec2::new(a * p.sin(), half * q));
            total += v * v * w1 * w2 * a * p.cos() * half;
        }
    }
    total
}

#[test]
fn eigenfunctions_are_normalised() {
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
        let s = solve_spectrum(&ellipse(), bc, 9.0, 64).unwrap();
        for e in &s.eigenpairs {
            let n = cartesian_norm(&e.mode, 2.0, 1.0);
            assert!((n - 1.0).abs() < 1e-6, "{bc:?} lambda={}: {n}", e.lambda);
        }
    }
}

#[test]
fn disk_clusters_are_stable_under_gap_changes() {
    let mut s = solve_spectrum(&disk(), BoundaryCondition::Dirichlet, 10.0, 64).unwrap();
    let base = s.clusters.clone();
    for (j, c) in base.iter().enumerate() {
        let l = s.eigenpairs[c.indices[0]].lambda;
        let radial = s.eigenpairs[c.indices[0]].class == SymmetryClass::EvenEven && c.indices.len() == 1;
        assert!(radial || c.indices.len() == 2, "cluster {j} at {l} has size {}", c.indices.len());
    }
    s.recluster(2e-7);
    assert_eq!(s.clusters, base);
    s.recluster(5e-8);
    assert_eq!(s.clusters, base);
}

#[test]
fn classes_are_simple_on_the_ellipse() {
    let s = solve_spectrum(&ellipse(), BoundaryCondition::Dirichlet, 15.0, 64).unwrap();
    for class in SymmetryClass::ALL {
        let l: Vec<f64> = s.eigenpairs.iter().filter(|e| e.class == class).map(|e| e.lambda_sq).collect();
        assert!(l.windows(2).all(|w| w[1] - w[0] > 1e-7 * w[1]));
    }
}

#[test]
fn ellipse_ground_state_is_stable_under_refinement() {
    let coarse = solve_spectrum(&ellipse(), BoundaryCondition::Dirichlet, 3.0, 64).unwrap();
    let fine_opts = SpectralOptions {
        trace_grid: 256,
        basis_factor: 1.5,
        samples_per_spacing: 4.0,
        quadrature_factor: 2.0,
        ..SpectralOptions::default()
    };
    let fine = solve_spectrum_with(&ellipse(), BoundaryCondition::Dirichlet, 3.0, &fine_opts).unwrap();
    let (a, b) = (coarse.eigenpairs[0].lambda_sq, fine.eigenpairs[0].lambda_sq);
    assert!((a - b).abs() < 1e-8 * a, "{a} vs {b}");
    let fd = finite_difference_ground_state(2.0, 1.0, 0.02);
    assert!((a - fd).abs() < 0.03 * a, "{a} vs finite differences {fd}");
}

/// Dirichlet ground state of the five-point Laplacian on the grid points
/// strictly inside the ellipse, by inverse iteration with conjugate gradients.
fn finite_difference_ground_state(a: f64, b: f64, h: f64) -> f64 {
    let nx = (a / h).floor() as i64;
    let ny = (b / h).floor() as i64;
    let inside = |i: i64, j: i64| {
        let (x, y) = (i as f64 * h, j as f64 * h);
        (x / a).powi(2) + (y / b).powi(2) < 1.0
    };
    let mut index = std::collections::HashMap::new();
    let mut pts = Vec::new();
    for i in -nx..=nx {
        for j in -ny..=ny {
            if inside(i, j) {
                index.insert((i, j), pts.len());
                pts.push((i, j));
            }
        }
    }
    let nbrs: Vec<Vec<usize>> = pts
        .iter()
        .map(|&(i, j)| [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)].iter().filter_map(|p| index.get(p).copied()).collect())
        .collect();
    let apply = |v: &[f64]| -> Vec<f64> {
        (0..v.len()).map(|k| (4.0 * v[k] - nbrs[k].iter().map(|&m| v[m]).sum::<f64>()) / (h * h)).collect()
    };
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let solve = |rhs: &[f64]| {
        let mut x = vec![0.0; rhs.len()];
        let mut r = rhs.to_vec();
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let stop = 1e-24 * rr;
        for _ in 0..5000 {
            let ap = apply(&p);
            let alpha = rr / dot(&p, &ap);
            for k in 0..x.len() {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let next = dot(&r, &r);
            if next < stop {
                break;
            }
            for k in 0..p.len() {
                p[k] = r[k] + next / rr * p[k];
            }
            rr = next;
        }
        x
    };
    let mut v = vec![1.0; pts.len()];
    let mut lambda = 0.0;
    for _ in 0..30 {
        let w = solve(&v);
        let n = dot(&w, &w).sqrt();
        v = w.iter().map(|x| x / n).collect();
        lambda = dot(&v, &apply(&v));
    }
    lambda
}

#[test]
fn counts_follow_weyl_at_the_top_of_the_range() {
    let e = ellipse();
    let area = e.area().unwrap();
    let perim = e.perimeter().unwrap();
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
        let lmax = 20.0;
        let s = solve_spectrum(&e, bc, lmax, 64).unwrap();
        let n = s.eigenpairs.iter().filter(|p| p.lambda > 0.0).count() as f64;
        let w = weyl_count(area, perim, bc, lmax);
        assert!((n - w).abs() / n < 0.03, "{bc:?}: {n} vs {w}");
    }
}

#[test]
fn invalid_requests_are_rejected() {
    assert!(matches!(solve_spectrum(&disk(), BoundaryCondition::Dirichlet, 0.0, 64), Err(Error::InvalidArgument(_))));
    assert!(matches!(solve_spectrum(&disk(), BoundaryCondition::Dirichlet, 3.0, 10), Err(Error::InvalidArgument(_))));
    let asym = DeformationField::from_fn(16, |t| t.cos()).unwrap();
    let dom = DomainSpec::deformed(EllipseDomain::new(2.0, 1.0).unwrap(), asym, 0.05).unwrap();
    assert!(matches!(solve_spectrum(&dom, BoundaryCondition::Dirichlet, 3.0, 64), Err(Error::InvalidDomain(_))));
    let s = solve_spectrum(&disk(), BoundaryCondition::Dirichlet, 3.0, 64).unwrap();
    assert!(matches!(boundary_cauchy_data(&s, s.len()), Err(Error::IndexOutOfRange { .. })));
}

#[test]
fn deformed_spectrum_moves_continuously() {
    let base = EllipseDomain::new(2.0, 1.0).unwrap();
    let field = DeformationField::mode(1);
    let s0 = solve_spectrum(&DomainSpec::ellipse(base), BoundaryCondition::Dirichlet, 5.0, 64).unwrap();
    let s1 = solve_spectrum(&DomainSpec::deformed(base, field, 1e-3).unwrap(), BoundaryCondition::Dirichlet, 5.0, 64).unwrap();
    assert_eq!(s0.len(), s1.len());
    for (a, b) in s0.eigenpairs.iter().zip(&s1.eigenpairs) {
        assert_eq!(a.class, b.class);
        assert!((a.lambda_sq - b.lambda_sq).abs() < 1e-2 * a.lambda_sq);
    }
}
