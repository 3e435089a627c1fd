//! Run configuration: a TOML file plus command-line overrides.
//!
//! Every field has a default, so an empty file (or no file at all) is a
//! valid configuration. The resolved config is echoed into `summary.json`
//! and hashed into the CSV filename, so a given config always lands on the
//! same output path with the same bytes.

use clap::ValueEnum;
use entirelab::dist::DistSpec;
use entirelab::hypercyclicity::TargetSpec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Density,
    Probabilities,
    Variance,
    Growth,
    Moments,
    Kahane,
    Radius,
    Verify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Density => "density",
            ExperimentKind::Probabilities => "probabilities",
            ExperimentKind::Variance => "variance",
            ExperimentKind::Growth => "growth",
            ExperimentKind::Moments => "moments",
            ExperimentKind::Kahane => "kahane",
            ExperimentKind::Radius => "radius",
            ExperimentKind::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    ComplexGaussianStd,
    GaussianPlusLogPareto,
    DivergentLogTail,
    BorderlineTail,
}

/// Coefficient law fragment. `beta` only matters for the Gaussian plus
/// log-Pareto family, `alpha` only for the borderline family; both are
/// ignored (but still echoed) otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistConfig {
    pub family: FamilyKind,
    pub beta: f64,
    pub alpha: f64,
}

impl Default for DistConfig {
    fn default() -> Self {
        DistConfig { family: FamilyKind::ComplexGaussianStd, beta: 1.0, alpha: 2.0 }
    }
}

impl DistConfig {
    pub fn to_spec(&self) -> Result<DistSpec, String> {
        let spec = match self.family {
            FamilyKind::ComplexGaussianStd => DistSpec::ComplexGaussianStd,
            FamilyKind::GaussianPlusLogPareto => {
                DistSpec::GaussianPlusLogPareto { beta: self.beta }
            }
            FamilyKind::DivergentLogTail => DistSpec::DivergentLogTail,
            FamilyKind::BorderlineTail => DistSpec::BorderlineTail { alpha: self.alpha },
        };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

/// Target fragment for orbit experiments: polynomial coefficients as
/// `[re, im]` pairs, the disk radius, and the sup-norm budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetConfig {
    pub a: Vec<[f64; 2]>,
    pub r: f64,
    pub eps: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig { a: vec![[0.0, 0.0]], r: 1.0, eps: 4.0 }
    }
}

impl TargetConfig {
    pub fn to_spec(&self) -> Result<TargetSpec, String> {
        let a: Vec<Complex64> = self.a.iter().map(|c| Complex64::new(c[0], c[1])).collect();
        let spec = TargetSpec { a, r: self.r, eps: self.eps };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

/// The full experiment configuration. Defaults:
///
/// - `experiment = "density"`
/// - `dist`: standard complex Gaussian (`beta = 1.0`, `alpha = 2.0` spares)
/// - `target`: zero polynomial on the unit disk with budget `eps = 4.0`
/// - `n_max = 10_000`: orbit length / profile length
/// - `replicates = 200`: independent seeds per experiment (the moments and
///   kahane experiments floor this at 10_000, echoed in the summary)
/// - `r_grid = [2, 5, 10, 20, 50, 100, 200]`: radii for growth and moments
/// - `p = 0`: circle-average exponent; 0 means sup-norm, else 1, 2 or 4
/// - `grid_m = 256`: circle grid size (power of two, at least 16)
/// - `tol = 1e-12`: evaluation tail tolerance
/// - `seed = 0`: never wall-clock; the flag `--seed` overrides
/// - `output_dir = "out"`
/// - `threads = 0`: automatic; any value yields identical output
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dist: DistConfig,
    pub target: TargetConfig,
    pub n_max: u64,
    pub replicates: u64,
    pub r_grid: Vec<f64>,
    pub p: u32,
    pub grid_m: usize,
    pub tol: f64,
    pub seed: u64,
    pub output_dir: String,
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Density,
            dist: DistConfig::default(),
            target: TargetConfig::default(),
            n_max: 10_000,
            replicates: 200,
            r_grid: vec![2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0],
            p: 0,
            grid_m: 256,
            tol: 1e-12,
            seed: 0,
            output_dir: "out".to_string(),
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    /// Structural checks that do not depend on the experiment. Runs before
    /// any file is created, so a bad config writes nothing.
    pub fn validate(&self) -> Result<(), String> {
        self.dist.to_spec()?;
        self.target.to_spec()?;
        if self.n_max == 0 {
            return Err("n_max must be at least 1".to_string());
        }
        if self.replicates == 0 {
            return Err("replicates must be at least 1".to_string());
        }
        if self.r_grid.is_empty() {
            return Err("r_grid must not be empty".to_string());
        }
        for &r in &self.r_grid {
            if !r.is_finite() || r <= 0.0 {
                return Err(format!("r_grid entries must be positive and finite, got {r}"));
            }
        }
        if !matches!(self.p, 0 | 1 | 2 | 4) {
            return Err(format!("p must be 0 (sup), 1, 2 or 4, got {}", self.p));
        }
        if self.grid_m < 16 || !self.grid_m.is_power_of_two() {
            return Err(format!("grid_m must be a power of two >= 16, got {}", self.grid_m));
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(format!("tol must be positive and finite, got {}", self.tol));
        }
        if self.output_dir.is_empty() {
            return Err("output_dir must not be empty".to_string());
        }
        Ok(())
    }

    /// FNV-1a over the canonical JSON encoding, minus the execution-only
    /// fields: thread count and output directory never change a result,
    /// so they never change the filename either.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let map = v.as_object_mut().expect("config is a map");
        map.remove("threads");
        map.remove("output_dir");
        let canon = serde_json::to_string(&v).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in canon.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }

    pub fn csv_name(&self) -> String {
        format!("{}-{}.csv", self.experiment.name(), self.hash())
    }
}
