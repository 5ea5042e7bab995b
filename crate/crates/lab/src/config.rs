//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use gavg_core::{AveragedDriver, CovarianceSet, Epsilon, Expr, Grid1D, Lattice, ProblemSpec, Steps};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};
use crate::presets;

/// Scalar problem data. Every coefficient is a catalog expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub horizon: f64,
    #[serde(default)]
    pub epsilon: Epsilon,
    #[serde(default)]
    pub b: Expr,
    #[serde(default)]
    pub h: Expr,
    #[serde(default)]
    pub sigma: Expr,
    #[serde(default)]
    pub f: Expr,
    #[serde(default)]
    pub g: Expr,
    #[serde(default)]
    pub phi: Expr,
    #[serde(default)]
    pub obstacle: Expr,
    pub lipschitz: f64,
    pub growth_m: u32,
    pub obstacle_cap: f64,
}

impl ProblemConfig {
    pub fn to_spec(&self) -> LabResult<ProblemSpec> {
        let spec = ProblemSpec::scalar(self.horizon)
            .with_epsilon(self.epsilon)
            .with_drift(self.b.clone())
            .with_drift_qv(self.h.clone())
            .with_vol(self.sigma.clone())
            .with_driver(self.f.clone())
            .with_driver_qv(self.g.clone())
            .with_terminal(self.phi.clone())
            .with_obstacle(self.obstacle.clone())
            .with_constants(self.lipschitz, self.growth_m, self.obstacle_cap);
        spec.check_structure().map_err(|e| LabError::Config(format!("problem: {e}")))?;
        Ok(spec)
    }
}

/// Variance interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaConfig {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    #[serde(default = "auto_steps")]
    pub nt: Steps,
}

fn auto_steps() -> Steps {
    Steps::Auto
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub steps: usize,
    #[serde(default)]
    pub x0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyConfig {
    pub n_list: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AveragingKind {
    #[default]
    Auto,
    Periodic,
    Cesaro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AveragingConfig {
    #[serde(default)]
    pub mode: AveragingKind,
    #[serde(default = "default_cesaro_tol")]
    pub tol: f64,
    #[serde(default = "default_max_horizon")]
    pub max_horizon: f64,
}

fn default_cesaro_tol() -> f64 {
    1e-6
}

fn default_max_horizon() -> f64 {
    1e5
}

impl Default for AveragingConfig {
    fn default() -> Self {
        Self { mode: AveragingKind::Auto, tol: default_cesaro_tol(), max_horizon: default_max_horizon() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Sampling interval for `x`; the grid domain when omitted.
    #[serde(default)]
    pub x: Option<(f64, f64)>,
}

fn default_samples() -> usize {
    4000
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { samples: default_samples(), x: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FkConfig {
    #[serde(default = "default_fk_tolerance")]
    pub tolerance: f64,
}

fn default_fk_tolerance() -> f64 {
    2e-2
}

impl Default for FkConfig {
    fn default() -> Self {
        Self { tolerance: default_fk_tolerance() }
    }
}

fn default_window() -> f64 {
    0.6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub problem: ProblemConfig,
    pub sigma: SigmaConfig,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<PenaltyConfig>,
    #[serde(default)]
    pub averaging: AveragingConfig,
    /// Strictly decreasing, each in `(0, 1]`.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// Centered fraction of the domain used by every norm.
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub fk: FkConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> LabResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads `source` as a JSON file, or as a preset name when no such file exists.
    pub fn load(source: &str) -> LabResult<Self> {
        let path = Path::new(source);
        if path.is_file() {
            let text = std::fs::read_to_string(path)?;
            return Self::from_json(&text);
        }
        match presets::preset(source) {
            Some(cfg) => {
                cfg.check()?;
                Ok(cfg)
            }
            None => Err(LabError::Config(format!(
                "'{source}' is neither a config file nor a preset ({})",
                presets::NAMES.join(", ")
            ))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Schema-level checks that need no solve.
    pub fn check(&self) -> LabResult<()> {
        self.spec()?;
        self.sigma_set()?;
        self.grid()?;
        if !(self.window > 0.0 && self.window <= 1.0) {
            return Err(LabError::Config(format!("window must lie in (0, 1], got {}", self.window)));
        }
        for (i, e) in self.epsilons.iter().enumerate() {
            if !(*e > 0.0 && *e <= 1.0) {
                return Err(LabError::Config(format!("epsilon {e} is outside (0, 1]")));
            }
            if i > 0 && !(*e < self.epsilons[i - 1]) {
                return Err(LabError::Config("epsilons must be strictly decreasing".into()));
            }
        }
        if let Some(p) = &self.penalty {
            if p.n_list.is_empty() || p.n_list.iter().any(|n| !(*n >= 0.0)) {
                return Err(LabError::Config("penalty.n_list needs nonnegative weights".into()));
            }
            if p.n_list.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(LabError::Config("penalty.n_list must be strictly increasing".into()));
            }
        }
        if let Some(l) = &self.lattice {
            if l.steps == 0 {
                return Err(LabError::Config("lattice.steps must be positive".into()));
            }
        }
        if !(self.fk.tolerance > 0.0) {
            return Err(LabError::Config("fk.tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn spec(&self) -> LabResult<ProblemSpec> {
        self.problem.to_spec()
    }

    pub fn sigma_set(&self) -> LabResult<CovarianceSet> {
        CovarianceSet::interval(self.sigma.lower, self.sigma.upper).map_err(|e| LabError::Config(format!("sigma: {e}")))
    }

    pub fn grid(&self) -> LabResult<Grid1D> {
        let g = &self.grid;
        Grid1D::new(g.x_min, g.x_max, g.nx, self.problem.horizon, g.nt).map_err(|e| LabError::Config(format!("grid: {e}")))
    }

    pub fn lattice(&self) -> LabResult<Lattice> {
        let l = self.lattice.ok_or_else(|| LabError::Config("config has no lattice section".into()))?;
        Lattice::new(l.x0, l.steps, self.problem.horizon, &self.sigma_set()?)
            .map_err(|e| LabError::Config(format!("lattice: {e}")))
    }

    pub fn n_list(&self) -> LabResult<&[f64]> {
        self.penalty.as_ref().map(|p| p.n_list.as_slice()).ok_or_else(|| LabError::Config("config has no penalty section".into()))
    }

    /// Averaged driver for the problem, with the configured mode.
    pub fn averaged_driver(&self) -> LabResult<AveragedDriver> {
        let base = self.spec()?.with_epsilon(Epsilon::Averaged);
        let a = &self.averaging;
        let out = match a.mode {
            AveragingKind::Auto => AveragedDriver::auto(base, a.max_horizon, a.tol),
            AveragingKind::Periodic => AveragedDriver::periodic(base),
            AveragingKind::Cesaro => AveragedDriver::cesaro(base, a.max_horizon, a.tol),
        };
        out.map_err(|e| LabError::Config(format!("averaging: {e}")))
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf).or_else(|| self.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
    }
}
