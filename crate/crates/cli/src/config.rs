//! Experiment configuration. Every field has a default, so an empty TOML
//! document is a valid `eigs` run on the ellipse A = 2, B = 1.

use std::path::PathBuf;

use hadamard_lab::geometry::{dilation_field, translation_field, DeformationField, DomainSpec, EllipseDomain, Vec2};
use hadamard_lab::rigidity::NullSpaceOptions;
use hadamard_lab::spectral::BoundaryCondition;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Samples used when interpolating translation and dilation fields; the
/// default trace grid resolves their top frequency.
const NON_SYMMETRIC_SAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Eigs,
    Billiards,
    Lengths,
    HadamardCheck,
    TraceScan,
    Rigidity,
    Abel,
    Flatness,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Eigs => "eigs",
            Pipeline::Billiards => "billiards",
            Pipeline::Lengths => "lengths",
            Pipeline::HadamardCheck => "hadamard-check",
            Pipeline::TraceScan => "trace-scan",
            Pipeline::Rigidity => "rigidity",
            Pipeline::Abel => "abel",
            Pipeline::Flatness => "flatness",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Comma-separated table behind `#` comment lines.
    Csv,
    /// One TOML document with the config echo and the result.
    Toml,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Symmetric coefficients of the boundary deformation (`cos 2kθ`).
    pub deformation: Vec<f64>,
    pub amplitude: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self { semi_major: 2.0, semi_minor: 1.0, deformation: Vec::new(), amplitude: 0.0 }
    }
}

/// Normal velocity ρ̇ fed to the variation and rigidity pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldConfig {
    /// `Σ c_k cos 2kθ`.
    Symmetric { coefficients: Vec<f64> },
    /// `⟨v, ν⟩`.
    Translation { vx: f64, vy: f64 },
    /// `⟨q, ν_q⟩`.
    Dilation,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig::Symmetric { coefficients: vec![0.0, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// File stem; the pipeline name when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), stem: None, format: Format::Csv }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    pub domain: DomainConfig,
    pub bc: BoundaryCondition,
    pub field: FieldConfig,
    /// Spectral cutoff λ_max.
    pub lambda_max: f64,
    /// Boundary trace grid size.
    pub grid: usize,
    /// Largest bounce count of the length spectrum.
    pub q_max: u32,
    /// Gaussian window width σ of the trace scan.
    pub sigma: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub t_steps: usize,
    pub tail_tol: f64,
    /// Finite-difference step of `hadamard-check`.
    pub h: f64,
    /// Clusters compared by `hadamard-check`.
    pub clusters: usize,
    /// Billiard orbit start `(θ, ζ)` and number of bounces.
    pub theta0: f64,
    pub zeta0: f64,
    pub iterations: usize,
    /// Symmetric modes M and creeping curves K of the null-space test.
    pub modes: usize,
    pub curves: usize,
    pub samples: usize,
    pub refinement: usize,
    pub endpoint_constraints: bool,
    pub rank_tol: f64,
    pub stability_tol: f64,
    /// Caustic grid of `abel`, as fractions of b.
    pub z_min: f64,
    pub z_max: f64,
    pub z_steps: usize,
    /// Highest Taylor moment of `abel`.
    pub k_max: usize,
    /// Taylor coefficients ρ^{(j)} of a deformation family, each a symmetric
    /// coefficient vector, for `flatness`.
    pub taylor: Vec<Vec<f64>>,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ns = NullSpaceOptions::default();
        Self {
            pipeline: Pipeline::Eigs,
            domain: DomainConfig::default(),
            bc: BoundaryCondition::Dirichlet,
            field: FieldConfig::default(),
            lambda_max: 10.0,
            grid: 256,
            q_max: 4,
            sigma: 0.5,
            t_min: 3.5,
            t_max: 4.5,
            t_steps: 21,
            tail_tol: hadamard_lab::hadamard::DEFAULT_TAIL_TOL,
            h: 1e-4,
            clusters: 10,
            theta0: 0.3,
            zeta0: 0.4,
            iterations: 100,
            modes: 6,
            curves: 12,
            samples: ns.samples,
            refinement: ns.refinement,
            endpoint_constraints: ns.endpoint_constraints,
            rank_tol: ns.rank_tol,
            stability_tol: ns.stability_tol,
            z_min: 0.5,
            z_max: 0.99,
            z_steps: 50,
            k_max: 3,
            taylor: vec![vec![0.0], vec![0.0, 1.0]],
            output: OutputConfig::default(),
        }
    }
}

fn usage(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{path}: {msg}"))
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(path, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every knob the selected pipeline reads; errors name the field.
    pub fn validate(&self) -> Result<(), CliError> {
        positive("domain.semi_major", self.domain.semi_major)?;
        positive("domain.semi_minor", self.domain.semi_minor)?;
        if self.domain.semi_minor > self.domain.semi_major {
            return Err(usage("domain.semi_minor", "must not exceed domain.semi_major"));
        }
        if !self.domain.amplitude.is_finite() {
            return Err(usage("domain.amplitude", "must be finite"));
        }
        if let FieldConfig::Symmetric { coefficients } = &self.field {
            if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                return Err(usage("field.coefficients", "need at least one finite coefficient"));
            }
        }
        match self.pipeline {
            Pipeline::Eigs | Pipeline::HadamardCheck | Pipeline::TraceScan => {
                positive("lambda_max", self.lambda_max)?;
                if self.grid < 8 || self.grid % 4 != 0 {
                    return Err(usage("grid", "must be a multiple of 4, at least 8"));
                }
            }
            _ => {}
        }
        match self.pipeline {
            Pipeline::HadamardCheck => {
                positive("h", self.h)?;
                if self.clusters == 0 {
                    return Err(usage("clusters", "must be at least 1"));
                }
            }
            Pipeline::TraceScan => {
                positive("sigma", self.sigma)?;
                positive("tail_tol", self.tail_tol)?;
                if self.t_steps < 2 || !(self.t_max > self.t_min) {
                    return Err(usage("t_steps", "need t_steps >= 2 and t_max > t_min"));
                }
                if self.q_max == 0 {
                    return Err(usage("q_max", "must be at least 1"));
                }
            }
            Pipeline::Lengths if self.q_max == 0 => return Err(usage("q_max", "must be at least 1")),
            Pipeline::Billiards => {
                if !(self.zeta0.abs() < 1.0) || !self.theta0.is_finite() {
                    return Err(usage("zeta0", "need a finite theta0 and |zeta0| < 1"));
                }
            }
            Pipeline::Rigidity => {
                if self.modes == 0 || self.curves < self.modes {
                    return Err(usage("curves", "need 0 < modes <= curves"));
                }
                if self.refinement < 2 || self.samples < 8 {
                    return Err(usage("refinement", "need refinement >= 2 and samples >= 8"));
                }
            }
            Pipeline::Abel => {
                if !(0.0 < self.z_min && self.z_min <= self.z_max && self.z_max < 1.0) || self.z_steps == 0 {
                    return Err(usage("z_min", "need 0 < z_min <= z_max < 1 and z_steps >= 1"));
                }
            }
            Pipeline::Flatness if self.taylor.iter().any(|c| c.is_empty()) => {
                return Err(usage("taylor", "every Taylor coefficient needs at least one entry"));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn ellipse(&self) -> Result<EllipseDomain, CliError> {
        Ok(EllipseDomain::new(self.domain.semi_major, self.domain.semi_minor)?)
    }

    pub fn domain_spec(&self) -> Result<DomainSpec, CliError> {
        let e = self.ellipse()?;
        if self.domain.deformation.is_empty() || self.domain.amplitude == 0.0 {
            return Ok(DomainSpec::ellipse(e));
        }
        Ok(DomainSpec::deformed(e, DeformationField::symmetric(self.domain.deformation.clone()), self.domain.amplitude)?)
    }

    pub fn deformation_field(&self) -> Result<DeformationField, CliError> {
        let domain = self.domain_spec()?;
        Ok(match &self.field {
            FieldConfig::Symmetric { coefficients } => DeformationField::symmetric(coefficients.clone()),
            FieldConfig::Translation { vx, vy } => translation_field(&domain, Vec2::new(*vx, *vy), NON_SYMMETRIC_SAMPLES)?,
            FieldConfig::Dilation => dilation_field(&domain, NON_SYMMETRIC_SAMPLES)?,
        })
    }

    pub fn null_space_options(&self) -> NullSpaceOptions {
        NullSpaceOptions {
            samples: self.samples,
            refinement: self.refinement,
            endpoint_constraints: self.endpoint_constraints,
            rank_tol: self.rank_tol,
            stability_tol: self.stability_tol,
        }
    }
}
