//! Batch front-end for the hadamard-lab pipelines.
//!
//! A run reads an [`ExperimentConfig`], executes one pipeline and writes one
//! artifact file that starts with the tool version and the config echo.

pub mod config;
pub mod output;

use std::path::PathBuf;

use hadamard_lab::billiards::{billiard_map, caustic_invariant, length_spectrum, multiplicity_filter, PhasePoint};
use hadamard_lab::geometry::DeformationField;
use hadamard_lab::hadamard::{eig_variation, finite_difference_variation_from, trace_variation_with};
use hadamard_lab::rigidity::{
    abel_moments, abel_transform, abel_transform_derivative, field_residuals, first_nonflat_order, null_space_test_with,
    reparametrize_flat, Flatness,
};
use hadamard_lab::spectral::{solve_spectrum_with, weyl_count, SpectralOptions, SpectrumResult};
use hadamard_lab::Error;
use thiserror::Error as ThisError;

pub use config::{ExperimentConfig, FieldConfig, Format, Pipeline};
pub use output::{Artifact, Cell};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "HADAMARD_LAB_THREADS";

/// Families whose lengths differ by less than this are one length.
const LENGTH_TOL: f64 = 1e-9;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("{context}: {source}")]
    Numeric { context: String, source: Error },
}

impl From<Error> for CliError {
    fn from(source: Error) -> Self {
        CliError::Numeric { context: "numeric failure".into(), source }
    }
}

impl CliError {
    /// 2 for usage and file errors, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Numeric { .. } => 3,
        }
    }
}

trait Context<T> {
    fn context(self, what: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, Error> {
    fn context(self, what: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Numeric { context: what.to_string(), source })
    }
}

/// Outcome of [`run`]: the artifact path and whether some rows failed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub path: PathBuf,
    pub partial: bool,
}

/// Validates, computes and writes the artifact of `config`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let artifact = compute(config)?;
    let path = output::write_artifact(config, &artifact)?;
    Ok(RunOutcome { path, partial: artifact.partial })
}

/// Validates `config` and computes its artifact without writing it.
pub fn compute(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    config.validate()?;
    match config.pipeline {
        Pipeline::Eigs => eigs(config),
        Pipeline::Billiards => billiards(config),
        Pipeline::Lengths => lengths(config),
        Pipeline::HadamardCheck => hadamard_check(config),
        Pipeline::TraceScan => trace_scan(config),
        Pipeline::Rigidity => rigidity(config),
        Pipeline::Abel => abel(config),
        Pipeline::Flatness => flatness(config),
    }
}

fn spectral_options(config: &ExperimentConfig) -> SpectralOptions {
    SpectralOptions { trace_grid: config.grid, ..SpectralOptions::default() }
}

fn spectrum(config: &ExperimentConfig) -> Result<SpectrumResult, CliError> {
    solve_spectrum_with(&config.domain_spec()?, config.bc, config.lambda_max, &spectral_options(config)).context("spectrum")
}

fn eigs(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    let spec = spectrum(config)?;
    let ids = spec.cluster_ids();
    let mut a = Artifact::new(&["index", "lambda_sq", "lambda", "class", "cluster", "tension"]);
    for (i, e) in spec.eigenpairs.iter().enumerate() {
        a.push(vec![i.into(), e.lambda_sq.into(), e.lambda.into(), e.class.label().into(), ids[i].into(), e.tension.into()]);
    }
    let domain = config.domain_spec()?;
    let weyl = weyl_count(domain.area()?, domain.perimeter()?, config.bc, config.lambda_max);
    a.note("count", spec.eigenpairs.iter().filter(|e| e.lambda > 0.0).count() as i64);
    a.note("clusters", spec.clusters.len() as i64);
    a.note("weyl", weyl);
    Ok(a)
}

fn billiards(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    let domain = config.domain_spec()?;
    let exact = domain.is_exact_ellipse();
    let mut pt = PhasePoint::new(config.theta0, config.zeta0);
    let z0 = if exact { Some(caustic_invariant(&domain.base, pt).context("caustic invariant")?) } else { None };
    let mut a = Artifact::new(&["bounce", "theta", "zeta", "chord", "caustic"]);
    a.push(vec![0usize.into(), pt.theta.into(), pt.zeta.into(), Cell::Empty, z0.into()]);
    let mut drift: f64 = 0.0;
    for k in 1..=config.iterations {
        let (next, chord) = billiard_map(&domain, pt).context(&format!("bounce {k}"))?;
        pt = next;
        let z = if exact { Some(caustic_invariant(&domain.base, pt).context("caustic invariant")?) } else { None };
        if let (Some(z), Some(z0)) = (z, z0) {
            drift = drift.max((z - z0).abs());
        }
        a.push(vec![k.into(), pt.theta.into(), pt.zeta.into(), chord.into(), z.into()]);
    }
    if exact {
        a.note("caustic_drift", drift);
    }
    Ok(a)
}

fn lengths(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    let e = config.ellipse()?;
    let fams = length_spectrum(&e, config.q_max, None).context("length spectrum")?;
    let groups = multiplicity_filter(&fams, LENGTH_TOL);
    let mut a = Artifact::new(&["p", "q", "kind", "level", "length", "components", "clean_simple"]);
    for f in &fams {
        let clean = groups.iter().find(|g| g.members.contains(&(f.p, f.q, f.kind))).is_some_and(|g| g.clean_simple);
        let kind = serde_plain_kind(f.kind);
        a.push(vec![f.p.into(), f.q.into(), kind.into(), f.level.into(), f.length.into(), f.components.into(), clean.into()]);
    }
    a.note("families", fams.len() as i64);
    a.note("distinct_lengths", groups.len() as i64);
    Ok(a)
}

fn serde_plain_kind(kind: hadamard_lab::billiards::FamilyKind) -> &'static str {
    use hadamard_lab::billiards::FamilyKind::*;
    match kind {
        Elliptic => "elliptic",
        MinorBouncingBall => "minor_bouncing_ball",
        MajorBouncingBall => "major_bouncing_ball",
    }
}

fn hadamard_check(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    let base = spectrum(config)?;
    let field = config.deformation_field()?;
    let formula = eig_variation(&base, &field).context("Hadamard variation")?;
    let fd = finite_difference_variation_from(&base, &field, config.h, &spectral_options(config))
        .context("finite-difference variation")?;
    let mut a = Artifact::new(&["cluster", "lambda_sq", "size", "formula", "finite_difference", "relative_difference"]);
    let mut worst: f64 = 0.0;
    for (v, d) in formula.iter().zip(&fd).take(config.clusters) {
        let scale = v.value.abs().max(d.value.abs()).max(1e-12 * v.lambda_sq);
        let rel = (v.value - d.value).abs() / scale;
        worst = worst.max(rel);
        a.push(vec![v.cluster.into(), v.lambda_sq.into(), v.size.into(), v.value.into(), d.value.into(), rel.into()]);
    }
    a.note("max_relative_difference", worst);
    Ok(a)
}

/// Smoothed trace variation on a uniform T grid. Lengths of the base
/// ellipse's periodic families are attached to their nearest grid point.
fn trace_scan(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    let spec = spectrum(config)?;
    let field = config.deformation_field()?;
    let vars = eig_variation(&spec, &field).context("Hadamard variation")?;
    let n = config.t_steps;
    let dt = (config.t_max - config.t_min) / (n - 1) as f64;
    let ts: Vec<f64> = (0..n).map(|i| config.t_min + i as f64 * dt).collect();
    let window = (config.t_min - 0.5 * dt, config.t_max + 0.5 * dt);
    let fams = length_spectrum(&config.ellipse()?, config.q_max, Some(window)).context("length spectrum")?;
    let mut markers = vec![Vec::<String>::new(); n];
    for f in &fams {
        let i = (((f.length - config.t_min) / dt).round().max(0.0) as usize).min(n - 1);
        markers[i].push(format!("{}/{}@{}", f.p, f.q, f.length));
    }
    let mut a = Artifact::new(&["t", "value", "sigma", "cutoff", "leakage", "status", "lsp"]);
    let mut flagged = 0i64;
    for (i, &t) in ts.iter().enumerate() {
        let lsp = markers[i].join(";");
        match trace_variation_with(&spec, &vars, t, config.sigma, config.tail_tol) {
            Ok(r) => a.push(vec![t.into(), r.value.into(), config.sigma.into(), r.cutoff.into(), r.leakage.into(), "ok".into(), lsp.into()]),
            Err(Error::Cutoff(_)) => {
                flagged += 1;
                a.push(vec![t.into(), Cell::Empty, config.sigma.into(), spec.lambda_max.into(), Cell::Empty, "cutoff".into(), lsp.into()]);
            }
            Err(e) => return Err(CliError::Numeric { context: format!("trace variation at T = {t}"), source: e }),
        }
    }
    a.partial = flagged > 0;
    a.note("cutoff_points", flagged);
    Ok(a)
}

fn rigidity(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    let e = config.ellipse()?;
    let report = null_space_test_with(&e, config.modes, config.curves, &config.null_space_options()).context("null-space test")?;
    let field = config.deformation_field()?;
    let residuals = field_residuals(&e, &field, &report.levels, config.samples).context("field residuals")?;
    let mut cols = vec!["row".to_string(), "level".to_string(), "field_residual".to_string()];
    cols.extend((0..config.modes).map(|j| format!("cos{}", 2 * j)));
    let mut a = Artifact { columns: cols, ..Artifact::default() };
    for (i, row) in report.matrix.iter().enumerate() {
        let mut cells: Vec<Cell> = vec![i.into(), report.levels.get(i).copied().into(), residuals.get(i).copied().into()];
        cells.extend(row.iter().map(|&v| Cell::Float(v)));
        a.push(cells);
    }
    let max_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    a.note("field_residual_max", max_residual);
    a.note("sigma_min", report.sigma_min);
    a.note("sigma_min_refined", report.sigma_min_refined);
    a.note("relative_change", report.relative_change);
    a.note("singular_values", report.singular_values.clone());
    a.note("rank_by_curves", report.rank_by_curves.iter().map(|&r| r as i64).collect::<Vec<_>>());
    a.note("verdict", format!("{:?}", report.verdict).to_lowercase());
    Ok(a)
}

fn abel(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    let e = config.ellipse()?;
    let field = config.deformation_field()?;
    let steps = config.z_steps;
    let mut a = Artifact::new(&["z", "abel", "derivative"]);
    for i in 0..steps {
        let frac = if steps == 1 { config.z_min } else { config.z_min + (config.z_max - config.z_min) * i as f64 / (steps - 1) as f64 };
        let z = frac * e.b();
        let v = abel_transform(&e, &field, z).context(&format!("Abel transform at Z = {z}"))?;
        let d = abel_transform_derivative(&e, &field, z).context(&format!("Abel derivative at Z = {z}"))?;
        a.push(vec![z.into(), v.into(), d.into()]);
    }
    let moments = abel_moments(&e, &field, config.k_max).context("Abel moments")?;
    a.note("b", e.b());
    a.note("moments", moments);
    Ok(a)
}

fn flatness(config: &ExperimentConfig) -> Result<Artifact, CliError> {
    let seq: Vec<DeformationField> = config.taylor.iter().map(|c| DeformationField::symmetric(c.clone())).collect();
    let order = first_nonflat_order(&seq);
    let mut a = Artifact::new(&["family", "j", "coefficients"]);
    let join = |f: &DeformationField| {
        f.coefficients().unwrap_or(&[]).iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
    };
    for (j, f) in seq.iter().enumerate() {
        a.push(vec!["input".into(), j.into(), join(f).into()]);
    }
    match &order {
        Flatness::Flat => a.note("order", "flat"),
        Flatness::Order { k, leading } => {
            a.note("order", *k as i64);
            a.note("leading", leading.coefficients().unwrap_or(&[]).to_vec());
            let r = reparametrize_flat(&seq, &order).context("reparametrization")?;
            for (j, f) in r.taylor.iter().enumerate() {
                a.push(vec!["reparametrized".into(), j.into(), join(f).into()]);
            }
        }
    }
    Ok(a)
}
