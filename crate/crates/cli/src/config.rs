//! Run configuration: one JSON document, validated before any computation.

use histvar::hist::Quadrature;
use histvar::kernels::PronyBranch;
use histvar::rve::GammaSpec;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub space: SpaceConfig,
    pub basis: BasisConfig,
    pub material: MaterialConfig,
    #[serde(default)]
    pub reduction: ReductionConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub tests: TestsConfig,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    #[serde(rename = "T")]
    pub duration: f64,
    pub n: usize,
    pub lambda0: f64,
    #[serde(default)]
    pub quadrature: Quadrature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub m: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "oracle", rename_all = "lowercase", deny_unknown_fields)]
pub enum MaterialConfig {
    Sls {
        #[serde(rename = "C0")]
        c0: f64,
        #[serde(rename = "C1")]
        c1: f64,
        lambda: f64,
    },
    Prony {
        mu_inf: f64,
        branches: Vec<PronyBranch>,
    },
    Elastic {
        modulus: f64,
    },
    Rve(RveConfig),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    #[default]
    Shear,
    Axial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RveConfig {
    #[serde(default = "two")]
    pub grains_per_side: usize,
    #[serde(default = "two")]
    pub elems_per_grain_side: usize,
    #[serde(default = "three")]
    pub branches: usize,
    #[serde(default = "gamma_visc")]
    pub gamma_visc: GammaSpec,
    #[serde(default = "gamma_tau")]
    pub gamma_tau: GammaSpec,
    #[serde(default = "one")]
    pub mu_inf: f64,
    #[serde(default = "kappa")]
    pub kappa: f64,
    /// Every grain gets this Wiechert law instead of a random draw.
    #[serde(default)]
    pub homogeneous: Option<HomogeneousGrain>,
    /// Imported assembly replacing the generated cube.
    #[serde(default)]
    pub mesh: Option<PathBuf>,
    #[serde(default)]
    pub channel: Channel,
    #[serde(default = "bins")]
    pub histogram_bins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogeneousGrain {
    pub mu_inf: f64,
    pub branches: Vec<PronyBranch>,
}

fn two() -> usize {
    2
}
fn three() -> usize {
    3
}
fn one() -> f64 {
    1.0
}
fn kappa() -> f64 {
    5.0 / 3.0
}
fn bins() -> usize {
    20
}
fn gamma_visc() -> GammaSpec {
    GammaSpec { mean: 2.0, shape: 2.0 }
}
fn gamma_tau() -> GammaSpec {
    GammaSpec { mean: 1.0, shape: 2.0 }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionConfig {
    #[serde(rename = "N_list", default)]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub fourier_baseline: bool,
    /// Use the exact `S_M` of the standard linear solid instead of sampling.
    #[serde(default)]
    pub closed_form: bool,
    /// Identify each rank `N` on its own basis of size `M = 2N + 1`.
    #[serde(default)]
    pub paired_basis: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(rename = "M_list")]
    pub m_list: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestsConfig {
    /// Unit strain on `τ <= T/2` in the history frame.
    #[serde(default)]
    pub step: bool,
    /// `ε(t) = (4/T²) t (T - t)`.
    #[serde(default)]
    pub parabolic: bool,
    /// `ε(t) = 4/25 t (1 - t)` exactly as printed in the source example.
    #[serde(default)]
    pub parabolic_literal: bool,
    /// CSV with a `strain` column on the configured grid.
    #[serde(default)]
    pub program: Option<PathBuf>,
}

/// Field path plus message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

struct Checker {
    errors: Vec<FieldError>,
}

impl Checker {
    fn require(&mut self, ok: bool, path: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.errors.push(FieldError {
                path: path.into(),
                message: message.into(),
            });
        }
    }

    fn positive(&mut self, v: f64, path: impl Into<String>) {
        self.require(v.is_finite() && v > 0.0, path, format!("must be finite and > 0, got {v}"));
    }

    fn nonnegative(&mut self, v: f64, path: impl Into<String>) {
        self.require(v.is_finite() && v >= 0.0, path, format!("must be finite and >= 0, got {v}"));
    }

    fn file(&mut self, p: &Path, base: &Path, path: &str) {
        let full = resolve(base, p);
        self.require(full.is_file(), path, format!("file {} not found", full.display()));
    }

    fn branches(&mut self, branches: &[PronyBranch], path: &str) {
        for (i, b) in branches.iter().enumerate() {
            self.nonnegative(b.mu, format!("{path}[{i}].mu"));
            self.positive(b.tau, format!("{path}[{i}].tau"));
        }
    }
}

/// Relative paths in a config are relative to the config file.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn size(&self) -> usize {
        2 * self.basis.m + 1
    }

    pub fn parse(text: &str) -> Result<Self, Vec<FieldError>> {
        serde_json::from_str(text).map_err(|e| {
            vec![FieldError {
                path: format!("line {} column {}", e.line(), e.column()),
                message: e.to_string(),
            }]
        })
    }

    /// Every violation, each with its field path.
    pub fn validate(&self, base: &Path) -> Vec<FieldError> {
        let mut c = Checker { errors: Vec::new() };
        c.positive(self.space.duration, "space.T");
        c.require(self.space.n >= 2, "space.n", format!("must be >= 2, got {}", self.space.n));
        c.nonnegative(self.space.lambda0, "space.lambda0");
        let size = self.size();
        for (i, &n) in self.reduction.n_list.iter().enumerate() {
            c.require(
                (1..=size).contains(&n),
                format!("reduction.N_list[{i}]"),
                format!("must lie in 1..={size} (2m+1), got {n}"),
            );
        }
        if let Some(s) = &self.sweep {
            c.require(!s.m_list.is_empty(), "sweep.M_list", "must not be empty");
            for (i, &m) in s.m_list.iter().enumerate() {
                c.require(m % 2 == 1, format!("sweep.M_list[{i}]"), format!("must be odd, got {m}"));
            }
        }
        match &self.material {
            MaterialConfig::Sls { c0, c1, lambda } => {
                c.positive(*c0, "material.C0");
                c.nonnegative(*c1, "material.C1");
                c.positive(*lambda, "material.lambda");
                c.require(
                    !(c0.is_finite() && c1.is_finite()) || c1 <= c0,
                    "material.C1",
                    "must not exceed C0 (the relaxed modulus C0 - C1 would be negative)",
                );
                c.require(
                    self.space.lambda0 > 0.0,
                    "space.lambda0",
                    "must be > 0 for the standard linear solid",
                );
            }
            MaterialConfig::Prony { mu_inf, branches } => {
                c.nonnegative(*mu_inf, "material.mu_inf");
                c.branches(branches, "material.branches");
            }
            MaterialConfig::Elastic { modulus } => c.positive(*modulus, "material.modulus"),
            MaterialConfig::Rve(r) => {
                c.require(r.grains_per_side >= 1, "material.grains_per_side", "must be >= 1");
                c.require(r.elems_per_grain_side >= 1, "material.elems_per_grain_side", "must be >= 1");
                c.require(r.branches >= 1, "material.branches", "must be >= 1");
                for (name, g) in [("gamma_visc", r.gamma_visc), ("gamma_tau", r.gamma_tau)] {
                    c.positive(g.mean, format!("material.{name}.mean"));
                    c.positive(g.shape, format!("material.{name}.shape"));
                }
                c.nonnegative(r.mu_inf, "material.mu_inf");
                c.positive(r.kappa, "material.kappa");
                c.require(r.histogram_bins >= 1, "material.histogram_bins", "must be >= 1");
                if let Some(h) = &r.homogeneous {
                    c.nonnegative(h.mu_inf, "material.homogeneous.mu_inf");
                    c.branches(&h.branches, "material.homogeneous.branches");
                }
                if let Some(p) = &r.mesh {
                    c.file(p, base, "material.mesh");
                }
            }
        }
        if self.reduction.closed_form {
            c.require(
                matches!(self.material, MaterialConfig::Sls { .. }),
                "reduction.closed_form",
                "only available for the standard linear solid",
            );
        }
        if self.tests.step {
            c.require(
                matches!(self.material, MaterialConfig::Sls { .. }),
                "tests.step",
                "the step test needs the standard linear solid reference",
            );
        }
        if let Some(p) = &self.tests.program {
            c.file(p, base, "tests.program");
        }
        c.errors
    }
}
