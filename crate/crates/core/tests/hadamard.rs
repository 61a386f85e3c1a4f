use std::f64::consts::{PI, TAU};

use hadamard_lab::geometry::{dilation_field, translation_field, DeformationField, DomainSpec, EllipseDomain, Vec2};
use hadamard_lab::hadamard::*;
use hadamard_lab::spectral::{solve_spectrum, BoundaryCondition, SpectrumResult};
use hadamard_lab::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const J01: f64 = 2.404_825_557_695_773;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn disk() -> DomainSpec {
    DomainSpec::ellipse(EllipseDomain::disk(1.0).unwrap())
}

fn ellipse() -> DomainSpec {
    DomainSpec::ellipse(EllipseDomain::new(2.0, 1.0).unwrap())
}

fn both() -> [BoundaryCondition; 2] {
    [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann]
}

/// `(J0, J1, Y0, Y1)` from their power series; accurate for moderate x.
fn bessel_series(x: f64) -> (f64, f64, f64, f64) {
    let q = x * x / 4.0;
    let (mut j0, mut j1, mut y0s, mut y1s) = (0.0, 0.0, 0.0, 0.0);
    let (mut t0, mut t1, mut h) = (1.0f64, x / 2.0, 0.0);
    for k in 0..60 {
        let hk1 = h + 1.0 / (k as f64 + 1.0);
        j0 += t0;
        j1 += t1;
        if k >= 1 {
            y0s += -t0 * h;
        }
        y1s += (h + hk1 - 2.0 * EULER_GAMMA) * t1;
        t0 *= -q / ((k as f64 + 1.0) * (k as f64 + 1.0));
        t1 *= -q / ((k as f64 + 1.0) * (k as f64 + 2.0));
        h = hk1;
    }
    let l = (x / 2.0).ln() + EULER_GAMMA;
    let y0 = 2.0 / PI * (l * j0 + y0s);
    let y1 = -2.0 / (PI * x) + 2.0 / PI * (x / 2.0).ln() * j1 - y1s / PI;
    (j0, j1, y0, y1)
}

fn random_symmetric_field(rng: &mut ChaCha8Rng) -> DeformationField {
    DeformationField::symmetric((0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Mixed tolerance: relative to the larger value, floored at `floor`.
fn close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(floor)
}

#[test]
fn zero_field_gives_zero_variations() {
    for bc in both() {
        let s = solve_spectrum(&disk(), bc, 8.0, 64).unwrap();
        let v = eig_variation(&s, &DeformationField::zero()).unwrap();
        assert!(!v.is_empty());
        assert!(v.iter().all(|c| c.value == 0.0));
        let t = trace_variation(&s, &v, 3.0, 0.5).unwrap();
        assert_eq!(t.value, 0.0);
    }
}

#[test]
fn disk_ground_state_dilation() {
    let s = solve_spectrum(&disk(), BoundaryCondition::Dirichlet, 3.0, 64).unwrap();
    let v = eig_variation(&s, &DeformationField::symmetric(vec![1.0])).unwrap();
    let want = -2.0 * J01 * J01;
    assert!((v[0].value - want).abs() < 1e-9 * want.abs(), "{} vs {want}", v[0].value);
    assert!((want + 11.5663719).abs() < 1e-7);
}

#[test]
fn dilation_law_on_first_twenty_clusters() {
    for (domain, lmax) in [(disk(), 14.0), (ellipse(), 7.5)] {
        let field = dilation_field(&domain, 64).unwrap();
        for bc in both() {
            let s = solve_spectrum(&domain, bc, lmax, 512).unwrap();
            let v = eig_variation(&s, &field).unwrap();
            assert!(v.len() >= 20, "{} clusters", v.len());
            for c in &v[..20] {
                let want = -2.0 * c.lambda_sq * c.size as f64;
                assert!((c.value - want).abs() <= 1e-6 * want.abs().max(1e-9), "{bc:?} cluster {}: {} vs {want}", c.cluster, c.value);
            }
        }
    }
}

#[test]
fn translation_fields_leave_the_spectrum_fixed() {
    for domain in [disk(), ellipse()] {
        for v in [Vec2::new(1.0, 0.0), Vec2::new(0.3, -0.8)] {
            let field = translation_field(&domain, v, 64).unwrap();
            for bc in both() {
                let s = solve_spectrum(&domain, bc, 9.0, 512).unwrap();
                let var = eig_variation(&s, &field).unwrap();
                for c in var.iter().take(20) {
                    assert!(c.value.abs() < 1e-8 * c.lambda_sq.max(1.0), "{bc:?}: {} at {}", c.value, c.lambda_sq);
                }
            }
        }
    }
}

fn remix(spec: &SpectrumResult, rng: &mut ChaCha8Rng) -> SpectrumResult {
    let mut out = spec.clone();
    for cl in &spec.clusters {
        let k = cl.indices.len();
        if k < 2 {
            continue;
        }
        // random orthogonal matrix by Gram–Schmidt on a Gaussian-ish matrix
        let mut q: Vec<Vec<f64>> = Vec::new();
        while q.len() < k {
            let mut v: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for u in &q {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
            }
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n > 1e-3 {
                q.push(v.into_iter().map(|a| a / n).collect());
            }
        }
        for (r, &dst) in cl.indices.iter().enumerate() {
            let mix = |get: fn(&hadamard_lab::spectral::BoundaryTrace) -> &Vec<f64>| -> Vec<f64> {
                let n = get(&spec.traces[dst]).len();
                (0..n).map(|p| cl.indices.iter().enumerate().map(|(c, &src)| q[r][c] * get(&spec.traces[src])[p]).sum()).collect()
            };
            out.traces[dst].normal_derivative = mix(|t| &t.normal_derivative);
            out.traces[dst].value = mix(|t| &t.value);
            out.traces[dst].tangential = mix(|t| &t.tangential);
        }
    }
    out
}

#[test]
fn cluster_sums_are_basis_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let field = random_symmetric_field(&mut rng);
    for bc in both() {
        let s = solve_spectrum(&disk(), bc, 10.0, 256).unwrap();
        assert!(s.clusters.iter().any(|c| c.indices.len() == 2));
        let base = eig_variation(&s, &field).unwrap();
        for _ in 0..3 {
            let mixed = eig_variation(&remix(&s, &mut rng), &field).unwrap();
            for (a, b) in base.iter().zip(&mixed) {
                assert!((a.value - b.value).abs() <= 1e-10 * a.value.abs().max(a.lambda_sq), "{} vs {}", a.value, b.value);
            }
        }
    }
}

#[test]
fn coarse_grid_is_rejected() {
    let s = solve_spectrum(&disk(), BoundaryCondition::Dirichlet, 5.0, 16).unwrap();
    assert!(eig_variation(&s, &DeformationField::mode(1)).is_ok());
    assert!(matches!(eig_variation(&s, &DeformationField::mode(2)), Err(Error::Resolution(_))));
}

#[test]
fn finite_differences_of_zero_field_vanish() {
    let fd = finite_difference_variation(&ellipse(), &DeformationField::zero(), BoundaryCondition::Dirichlet, 1e-4, 5.0)
        .unwrap();
    assert!(fd.iter().all(|c| c.value == 0.0));
}

#[test]
fn finite_differences_match_disk_scaling() {
    for bc in both() {
        let fd = finite_difference_variation(&disk(), &DeformationField::symmetric(vec![1.0]), bc, 1e-4, 8.0).unwrap();
        let s = solve_spectrum(&disk(), bc, 8.0, 64).unwrap();
        let hv = eig_variation(&s, &DeformationField::symmetric(vec![1.0])).unwrap();
        for (a, b) in fd.iter().zip(&hv) {
            let want = -2.0 * a.lambda_sq * a.size as f64;
            assert!(close(a.value, want, 1e-4, 1e-8), "{bc:?}: FD {} vs {want}", a.value);
            assert!(close(a.value, b.value, 1e-4, 1e-8), "{bc:?}: FD {} vs formula {}", a.value, b.value);
        }
    }
}

#[test]
fn finite_differences_match_formula_on_the_ellipse() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut fields = vec![DeformationField::mode(1)];
    fields.push(random_symmetric_field(&mut rng));
    for bc in both() {
        let s = solve_spectrum(&ellipse(), bc, 5.5, 256).unwrap();
        for field in &fields {
            let hv = eig_variation(&s, field).unwrap();
            let fd = finite_difference_variation(&ellipse(), field, bc, 1e-4, 5.5).unwrap();
            assert_eq!(hv.len(), fd.len());
            for (a, b) in hv.iter().zip(&fd).take(10) {
                assert!(close(a.value, b.value, 1e-3, 1e-6 * a.lambda_sq), "{bc:?} λ²={}: {} vs FD {}", a.lambda_sq, a.value, b.value);
            }
        }
    }
}

#[test]
fn finite_differences_need_an_exact_ellipse() {
    let d = DomainSpec::deformed(EllipseDomain::new(2.0, 1.0).unwrap(), DeformationField::mode(1), 0.01).unwrap();
    let r = finite_difference_variation(&d, &DeformationField::mode(1), BoundaryCondition::Dirichlet, 1e-4, 4.0);
    assert!(matches!(r, Err(Error::InvalidDomain(_))), "{r:?}");
}

/// Direct quadrature of `∫ exp(−(t−T)²/2σ²) (−t sin(tλ)/(2λ)) dt`.
fn window_oracle(lambda: f64, t0: f64, sigma: f64) -> f64 {
    let (a, b) = (t0 - 12.0 * sigma, t0 + 12.0 * sigma);
    let n = 20000;
    let h = (b - a) / n as f64;
    let f = |t: f64| (-(t - t0).powi(2) / (2.0 * sigma * sigma)).exp() * (-t * (t * lambda).sin() / (2.0 * lambda));
    // composite Simpson
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn trace_pairing_matches_direct_quadrature() {
    let s = solve_spectrum(&disk(), BoundaryCondition::Dirichlet, 14.0, 64).unwrap();
    let v = eig_variation(&s, &DeformationField::symmetric(vec![1.0])).unwrap();
    for (t, sigma) in [(2.0, 0.6), (3.7, 0.5)] {
        let got = trace_variation(&s, &v, t, sigma).unwrap();
        let want: f64 = v.iter().map(|c| c.value * window_oracle(c.lambda_sq.sqrt(), t, sigma)).sum();
        assert!((got.value - want).abs() < 1e-9 * want.abs().max(1e-12), "T={t}: {} vs {want}", got.value);
        assert!(got.leakage < 1e-8 * got.value.abs());
        assert_eq!(got.cutoff, 14.0);
    }
}

#[test]
fn trace_variation_is_even_in_t() {
    let s = solve_spectrum(&ellipse(), BoundaryCondition::Dirichlet, 12.0, 64).unwrap();
    let v = eig_variation(&s, &DeformationField::symmetric(vec![0.5, 1.0])).unwrap();
    for t in [0.7, 2.0, 4.0, 5.3] {
        let a = trace_variation(&s, &v, t, 0.7).unwrap();
        let b = trace_variation(&s, &v, -t, 0.7).unwrap();
        assert_eq!(a.value, b.value);
    }
}

#[test]
fn translation_trace_is_negligible() {
    let s = solve_spectrum(&ellipse(), BoundaryCondition::Dirichlet, 12.0, 256).unwrap();
    let field = translation_field(&s.domain, Vec2::new(1.0, 1.0), 64).unwrap();
    let dil = dilation_field(&s.domain, 64).unwrap();
    let v = eig_variation(&s, &field).unwrap();
    let vd = eig_variation(&s, &dil).unwrap();
    for t in [1.0, 2.5, 4.0] {
        let a = trace_variation(&s, &v, t, 0.6).unwrap().value;
        let scale = trace_variation(&s, &vd, t, 0.6).unwrap().value.abs();
        assert!(a.abs() < 1e-9 * scale.max(1.0), "T={t}: {a} vs scale {scale}");
    }
}

#[test]
fn low_cutoff_is_rejected() {
    let s = solve_spectrum(&disk(), BoundaryCondition::Dirichlet, 10.0, 64).unwrap();
    let v = eig_variation(&s, &DeformationField::symmetric(vec![1.0])).unwrap();
    assert!(matches!(trace_variation(&s, &v, 2.0, 0.05), Err(Error::Cutoff(_))));
}

/// Regular part of the disk kernel at the centre: `c(R) = Y0(λR)/(4 J0(λR))`
/// (Dirichlet) or `Y1(λR)/(4 J1(λR))` (Neumann).
fn disk_centre_regular_part(bc: BoundaryCondition, lambda: f64, radius: f64) -> f64 {
    let (j0, j1, y0, y1) = bessel_series(lambda * radius);
    match bc {
        BoundaryCondition::Dirichlet => y0 / (4.0 * j0),
        BoundaryCondition::Neumann => y1 / (4.0 * j1),
    }
}

#[test]
fn greens_variation_matches_disk_finite_difference() {
    let lambda = 2.0;
    let h = 1e-5;
    for bc in both() {
        let s = solve_spectrum(&disk(), bc, 4.0, 64).unwrap();
        let fd = (disk_centre_regular_part(bc, lambda, 1.0 + h) - disk_centre_regular_part(bc, lambda, 1.0 - h)) / (2.0 * h);
        let o = Vec2::new(0.0, 0.0);
        let g = greens_variation(&s, &DeformationField::symmetric(vec![1.0]), lambda, o, o, 24).unwrap();
        assert!((g.value - fd).abs() < 1e-3 * fd.abs(), "{bc:?}: {} vs FD {fd}", g.value);
        assert!(g.truncation < 1e-8 * fd.abs());
    }
}

#[test]
fn greens_variation_of_zero_field_vanishes() {
    let s = solve_spectrum(&ellipse(), BoundaryCondition::Dirichlet, 3.0, 64).unwrap();
    let g = greens_variation(&s, &DeformationField::zero(), 1.3, Vec2::new(0.2, 0.1), Vec2::new(-0.5, 0.3), 30).unwrap();
    assert_eq!(g.value, 0.0);
}

#[test]
fn greens_variation_is_symmetric() {
    let field = DeformationField::symmetric(vec![0.3, -1.0, 0.5]);
    let (x, y) = (Vec2::new(0.4, 0.2), Vec2::new(-0.9, -0.35));
    for bc in both() {
        let s = solve_spectrum(&ellipse(), bc, 3.0, 64).unwrap();
        let a = greens_variation(&s, &field, 1.7, x, y, 40).unwrap();
        let b = greens_variation(&s, &field, 1.7, y, x, 40).unwrap();
        let tol = 10.0 * (a.truncation + b.truncation) + 1e-12 * a.value.abs();
        assert!((a.value - b.value).abs() <= tol, "{bc:?}: {} vs {}", a.value, b.value);
    }
}

#[test]
fn greens_variation_rejects_poles_and_exterior_points() {
    let s = solve_spectrum(&disk(), BoundaryCondition::Dirichlet, 4.0, 64).unwrap();
    let o = Vec2::new(0.0, 0.0);
    let f = DeformationField::symmetric(vec![1.0]);
    assert!(matches!(greens_variation(&s, &f, J01, o, o, 24), Err(Error::Pole(_))));
    let r = greens_variation(&s, &f, 2.0, Vec2::new(1.5, 0.0), o, 24);
    assert!(matches!(r, Err(Error::InvalidArgument(_))), "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eig_variation_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, seed in 0u64..1000) {
        let s = solve_spectrum(&ellipse(), BoundaryCondition::Neumann, 5.0, 128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f1 = random_symmetric_field(&mut rng);
        let f2 = random_symmetric_field(&mut rng);
        let comb = f1.combine(a, &f2, b).unwrap();
        let v1 = eig_variation(&s, &f1).unwrap();
        let v2 = eig_variation(&s, &f2).unwrap();
        let vc = eig_variation(&s, &comb).unwrap();
        for ((x, y), z) in v1.iter().zip(&v2).zip(&vc) {
            let want = a * x.value + b * y.value;
            prop_assert!((z.value - want).abs() <= 1e-10 * (x.value.abs() + y.value.abs() + x.lambda_sq));
        }
    }

    #[test]
    fn trace_kernel_is_even(t in 0.1f64..TAU, sigma in 0.65f64..1.0) {
        let s = solve_spectrum(&disk(), BoundaryCondition::Dirichlet, 14.0, 64).unwrap();
        let v = eig_variation(&s, &DeformationField::symmetric(vec![1.0, 0.4])).unwrap();
        let a = trace_variation(&s, &v, t, sigma).unwrap();
        let b = trace_variation(&s, &v, -t, sigma).unwrap();
        prop_assert_eq!(a.value, b.value);
    }
}
