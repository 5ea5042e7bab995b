//! Validation, single solves, Feynman-Kac cross-checks and penalty sweeps.

use std::path::Path;

use gavg_core::{
    check_nondegenerate, check_supported, penalization_sweep, solve_obstacle_pde, solve_reflected_bsde, validate_assumptions, DriverKind, Epsilon, Grid1D, Lattice, SampleRegion, SolutionField,
    SolverOptions, ValidationReport,
};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{LabError, LabResult};
use crate::output::{write_json, write_lattice, write_rows, write_solution};

/// Gaps at or below this size are treated as rounding noise by refinement checks.
pub const ROUNDOFF_FLOOR: f64 = 1e-9;

/// `fine` improves on `coarse` by at least `factor`, or both are at rounding level.
pub fn improves(coarse: f64, fine: f64, factor: f64) -> bool {
    fine <= coarse / factor || (coarse <= ROUNDOFF_FLOOR && fine <= ROUNDOFF_FLOOR)
}

/// Sampled checks of the declared constants plus nondegeneracy of the covariance set.
pub fn run_validation(cfg: &ExperimentConfig) -> LabResult<ValidationReport> {
    cfg.check()?;
    let spec = cfg.spec()?;
    let sigma = cfg.sigma_set()?;
    let x = cfg.validation.x.unwrap_or((cfg.grid.x_min, cfg.grid.x_max));
    let region = SampleRegion::for_spec(&spec, x);
    let mut report = validate_assumptions(&spec, &region, cfg.validation.samples, cfg.seed);
    report.merge(check_nondegenerate(&sigma));
    Ok(report)
}

/// Runs validation and turns a failed report into [`LabError::Validation`].
pub fn require_valid(cfg: &ExperimentConfig, out: Option<&Path>) -> LabResult<ValidationReport> {
    let report = run_validation(cfg)?;
    if let Some(dir) = out {
        write_json(&dir.join("validation.json"), &report)?;
    }
    if !report.passed() {
        let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        return Err(LabError::Validation(names.join(", ")));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveTarget {
    /// Epsilon from the config; averaged when the config says so.
    Config,
    Epsilon(f64),
    Averaged,
}

pub fn run_solve(cfg: &ExperimentConfig, target: SolveTarget, out: Option<&Path>) -> LabResult<SolutionField> {
    cfg.check()?;
    let spec = cfg.spec()?;
    let sigma = cfg.sigma_set()?;
    let grid = cfg.grid()?;
    let epsilon = match target {
        SolveTarget::Config => spec.epsilon,
        SolveTarget::Epsilon(e) if e > 0.0 && e <= 1.0 => Epsilon::Scale(e),
        SolveTarget::Epsilon(e) => return Err(LabError::Config(format!("epsilon {e} is outside (0, 1]"))),
        SolveTarget::Averaged => Epsilon::Averaged,
    };
    let field = match epsilon {
        Epsilon::Scale(_) => {
            let spec = spec.with_epsilon(epsilon);
            solve_obstacle_pde(&spec, &sigma, &grid, DriverKind::Oscillating, SolverOptions::default())?
        }
        Epsilon::Averaged => {
            let avg = cfg.averaged_driver()?;
            solve_obstacle_pde(&spec, &sigma, &grid, DriverKind::Averaged(&avg), SolverOptions::default())?
        }
    };
    if let Some(dir) = out {
        write_solution(&dir.join("solution.csv"), &field)?;
    }
    Ok(field)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FkLevel {
    pub nx: usize,
    pub nt: usize,
    pub lattice_steps: usize,
    pub lattice_y0: f64,
    pub pde_u0: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FkReport {
    pub x0: f64,
    pub levels: Vec<FkLevel>,
    pub shrinks: bool,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares the reflected lattice root value with the obstacle PDE at `(0, x0)` on the
/// configured resolution and on a coarser one (half the nodes, a quarter of the steps).
pub fn run_feynman_kac_check(cfg: &ExperimentConfig, out: Option<&Path>) -> LabResult<FkReport> {
    cfg.check()?;
    let spec = cfg.spec()?;
    check_supported(&spec)?;
    if spec.epsilon == Epsilon::Averaged {
        return Err(LabError::Config("fk-check needs a numeric epsilon".into()));
    }
    let sigma = cfg.sigma_set()?;
    let fine_grid = cfg.grid()?;
    let fine_lattice = cfg.lattice()?;
    if !(fine_lattice.x0 > fine_grid.x_min && fine_lattice.x0 < fine_grid.x_max) {
        return Err(LabError::Config("lattice.x0 must lie inside the grid".into()));
    }
    let coarse_grid = Grid1D { nx: (fine_grid.nx / 2).max(3), ..fine_grid };
    let coarse_lattice = Lattice::new(fine_lattice.x0, (fine_lattice.steps / 4).max(1), spec.horizon, &sigma)?;

    let level = |grid: &Grid1D, lattice: &Lattice| -> LabResult<FkLevel> {
        let u = solve_obstacle_pde(&spec, &sigma, grid, DriverKind::Oscillating, SolverOptions::default())?;
        let y0 = solve_reflected_bsde(&spec, &sigma, lattice)?.y0();
        let u0 = u.interpolate(0, lattice.x0);
        Ok(FkLevel { nx: grid.nx, nt: u.nt, lattice_steps: lattice.steps, lattice_y0: y0, pde_u0: u0, gap: (y0 - u0).abs() })
    };
    let (coarse, fine) = rayon::join(|| level(&coarse_grid, &coarse_lattice), || level(&fine_grid, &fine_lattice));
    let (coarse, fine) = (coarse?, fine?);
    let shrinks = improves(coarse.gap, fine.gap, 1.0);
    let tolerance = cfg.fk.tolerance;
    let report =
        FkReport { x0: fine_lattice.x0, levels: vec![coarse, fine], shrinks, tolerance, passed: shrinks && fine.gap <= tolerance };
    if let Some(dir) = out {
        write_json(&dir.join("fk.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PenaltyRow {
    pub n: f64,
    #[serde(rename = "Y0")]
    pub y0: f64,
    pub gap_to_reflected: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PenaltyReport {
    pub rows: Vec<PenaltyRow>,
    pub reflected_y0: f64,
    pub unreflected_y0: f64,
    pub ordered: bool,
    pub gaps_shrinking: bool,
    /// Largest reflection increment at a node strictly above the obstacle.
    pub flatness_violation: f64,
    pub passed: bool,
}

/// Penalized root values against the reflected one, and the Skorokhod flatness of the
/// reflected solve. Writes `penalization.csv`, `penalization.json` and `lattice.csv`.
pub fn run_penalization_sweep(cfg: &ExperimentConfig, out: Option<&Path>) -> LabResult<PenaltyReport> {
    cfg.check()?;
    let spec = cfg.spec()?;
    let sigma = cfg.sigma_set()?;
    let lattice = cfg.lattice()?;
    let n_list = cfg.n_list()?;
    let sweep = penalization_sweep(&spec, &sigma, &lattice, n_list)?;
    let reflected = solve_reflected_bsde(&spec, &sigma, &lattice)?;
    let mut flatness_violation = 0.0f64;
    reflected.for_each_node(|k, j, t, x, y, _, _| {
        if y > spec.obstacle_at(t, &[x]) + 1e-9 {
            flatness_violation = flatness_violation.max(reflected.increment(k, j));
        }
    });
    let rows: Vec<PenaltyRow> = sweep
        .rows
        .iter()
        .zip(&sweep.gaps)
        .map(|(&(n, y0), &gap)| PenaltyRow { n, y0, gap_to_reflected: gap })
        .collect();
    let passed = sweep.ordered && sweep.gaps_shrinking && flatness_violation == 0.0;
    let report = PenaltyReport {
        rows,
        reflected_y0: sweep.reflected_y0,
        unreflected_y0: sweep.unreflected_y0,
        ordered: sweep.ordered,
        gaps_shrinking: sweep.gaps_shrinking,
        flatness_violation,
        passed,
    };
    if let Some(dir) = out {
        write_rows(&dir.join("penalization.csv"), &report.rows)?;
        write_json(&dir.join("penalization.json"), &report)?;
        write_lattice(&dir.join("lattice.csv"), &reflected)?;
    }
    Ok(report)
}
