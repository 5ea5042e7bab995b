//! Epsilon sweep: solves the averaged problem once, the oscillating problem per epsilon,
//! and compares them on a window against a Richardson estimate of the scheme error.

use std::path::Path;
use std::time::Instant;

use gavg_core::pde::oscillation_steps;
use gavg_core::{
    solve_obstacle_pde, stability_steps, sup_norm_diff, AveragingMode, DriverKind, Epsilon, Grid1D, SolutionField,
    SolverOptions, Steps, Window,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{LabError, LabResult};
use crate::output::{write_json, write_rows};

/// Allowed growth of the error between consecutive epsilons.
pub const MONOTONE_SLACK: f64 = 1.1;
/// Final error must be within this multiple of the Richardson estimate.
pub const ESTIMATE_FACTOR: f64 = 3.0;
/// Allowed rise of the regularity bound as epsilon shrinks.
pub const REGULARITY_DRIFT: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub sup_norm_error: f64,
    pub argmax_t: f64,
    pub argmax_x: f64,
    pub nt: usize,
    /// `max |u| / (1 + |x|^{m+1})` over all nodes.
    pub growth_ratio: f64,
    /// Largest `|u_{j+1} - u_j| / dx` inside the window.
    pub lipschitz_modulus: f64,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Richardson {
    /// Windowed `sup |u_4h - u_2h|` on the coarse nodes.
    pub diff_coarse: f64,
    /// Windowed `sup |u_2h - u_h|` on the middle nodes.
    pub diff_fine: f64,
    /// `diff_coarse / diff_fine`.
    pub ratio: f64,
    /// The ratio was too close to 1 and first order was assumed.
    pub assumed_first_order: bool,
    /// Estimated error of the averaged solution on the sweep grid.
    pub estimate: f64,
}

impl Richardson {
    pub fn from_diffs(diff_coarse: f64, diff_fine: f64) -> Self {
        let ratio = diff_coarse / diff_fine;
        let assumed_first_order = !(ratio > 1.05);
        let effective = if assumed_first_order { 2.0 } else { ratio };
        let estimate = if diff_fine == 0.0 { 0.0 } else { diff_fine / (effective - 1.0) };
        Self { diff_coarse, diff_fine, ratio, assumed_first_order, estimate }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    NonMonotone,
    Failed,
}

/// Summary of one regularity column, in sweep order (epsilon decreasing).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Spread {
    pub min: f64,
    pub max: f64,
    /// `max / min - 1`.
    pub spread: f64,
    /// Largest relative rise of a value over the running maximum of the values before
    /// it, i.e. how much the empirical bound grows as epsilon shrinks.
    pub rise: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut running = f64::NEG_INFINITY;
        let mut rise = 0.0f64;
        for &v in values {
            if running.is_finite() {
                rise = rise.max(v / running - 1.0);
            }
            running = running.max(v);
        }
        Self { min, max, spread: max / min - 1.0, rise }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Regularity {
    pub growth: Spread,
    pub lipschitz: Spread,
    pub bounded: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AveragingSummary {
    pub mode: AveragingMode,
    /// Largest residual over all averaged driver evaluations of the sweep-grid solve.
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepReport {
    pub verdict: Verdict,
    pub monotone: bool,
    pub final_error: f64,
    pub error_bound: f64,
    pub richardson: Richardson,
    pub averaging: AveragingSummary,
    pub regularity: Regularity,
    pub nx: usize,
    pub nt: usize,
    pub window: [f64; 2],
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Serialize)]
struct Timing {
    averaged_seconds: f64,
    epsilons: Vec<(f64, f64)>,
    total_seconds: f64,
}

/// Step count shared by every solve on the sweep grid: CFL on the `4h` grid scaled by 16,
/// raised to resolve the smallest epsilon.
pub fn sweep_steps(cfg: &ExperimentConfig, grids: &[Grid1D; 3]) -> LabResult<usize> {
    let spec = cfg.spec()?;
    let sigma = cfg.sigma_set()?;
    let coarse = stability_steps(&spec, &sigma, &grids[2]);
    let eps_min = cfg.epsilons.last().copied().unwrap_or(1.0);
    let resolve = oscillation_steps(spec.horizon, eps_min);
    let nt = 16 * coarse.max(resolve.div_ceil(16));
    Ok(match cfg.grid.nt {
        Steps::Fixed(n) if n >= nt && n % 16 == 0 => n,
        Steps::Fixed(n) => {
            return Err(LabError::Config(format!("grid.nt = {n} must be a multiple of 16 and at least {nt}")));
        }
        Steps::Auto => nt,
    })
}

/// Sweep grid and its two coarsenings.
pub fn sweep_grids(cfg: &ExperimentConfig) -> LabResult<[Grid1D; 3]> {
    let fine = Grid1D { steps: Steps::Auto, ..cfg.grid()? };
    let mid = fine.coarsened().map_err(|e| LabError::Config(format!("sweep grid: {e}")))?;
    let coarse = mid.coarsened().map_err(|e| LabError::Config(format!("sweep grid: {e}")))?;
    Ok([fine, mid, coarse])
}

/// `sup |coarse - fine|` over the coarse nodes inside `window`; `fine` has half the
/// spacing and a quarter of the time step.
pub fn nested_diff(coarse: &SolutionField, fine: &SolutionField, window: &Window) -> LabResult<f64> {
    if fine.nt != 4 * coarse.nt || fine.grid.nx != 2 * coarse.grid.nx + 1 {
        return Err(LabError::Config("fields are not nested".into()));
    }
    let (ks, js) = window.ranges(&coarse.grid, coarse.nt, coarse.dt)?;
    let mut best = 0.0f64;
    for k in ks {
        for j in js.clone() {
            best = best.max((coarse.value(k, j) - fine.value(4 * k, 2 * j)).abs());
        }
    }
    Ok(best)
}

/// Runs the sweep and writes `sweep.csv`, `verdict.json` and `timing.json` into `out`
/// when given. A solver failure still flushes the rows finished before it.
pub fn run_epsilon_sweep(cfg: &ExperimentConfig, out: Option<&Path>) -> LabResult<SweepReport> {
    let start = Instant::now();
    cfg.check()?;
    if cfg.epsilons.is_empty() {
        return Err(LabError::Config("sweep needs at least one epsilon".into()));
    }
    let spec = cfg.spec()?;
    let sigma = cfg.sigma_set()?;
    let avg = cfg.averaged_driver()?;
    let grids = sweep_grids(cfg)?;
    let nt = sweep_steps(cfg, &grids)?;
    let fixed = [nt, nt / 4, nt / 16];
    let window = Window::inner(&grids[0], cfg.window);

    log::info!("sweep: nx = {}, nt = {nt}, averaging {:?}", grids[0].nx, avg.mode());
    let averaged_start = Instant::now();
    let averaged: Vec<LabResult<SolutionField>> = (0..3)
        .into_par_iter()
        .map(|i| {
            let grid = Grid1D { steps: Steps::Fixed(fixed[i]), ..grids[i] };
            Ok(solve_obstacle_pde(&spec, &sigma, &grid, DriverKind::Averaged(&avg), SolverOptions::default())?)
        })
        .collect();
    let averaged_seconds = averaged_start.elapsed().as_secs_f64();
    let mut averaged = averaged.into_iter().collect::<LabResult<Vec<_>>>()?;
    let coarse = averaged.pop().expect("three levels");
    let mid = averaged.pop().expect("three levels");
    let bar = averaged.pop().expect("three levels");
    let richardson = Richardson::from_diffs(
        nested_diff(&coarse, &mid, &Window::inner(&grids[2], cfg.window))?,
        nested_diff(&mid, &bar, &Window::inner(&grids[1], cfg.window))?,
    );

    let fine = Grid1D { steps: Steps::Fixed(nt), ..grids[0] };
    let solved: Vec<LabResult<SweepRow>> = cfg
        .epsilons
        .par_iter()
        .map(|&epsilon| {
            let t0 = Instant::now();
            let spec_eps = spec.clone().with_epsilon(Epsilon::Scale(epsilon));
            let u = solve_obstacle_pde(&spec_eps, &sigma, &fine, DriverKind::Oscillating, SolverOptions::default())?;
            let diff = sup_norm_diff(&u, &bar, &window)?;
            Ok(SweepRow {
                epsilon,
                sup_norm_error: diff.value,
                argmax_t: diff.t,
                argmax_x: diff.x,
                nt: u.nt,
                growth_ratio: u.growth_ratio(spec.growth_m),
                lipschitz_modulus: u.lipschitz_modulus(&window)?,
                wall_seconds: t0.elapsed().as_secs_f64(),
            })
        })
        .collect();
    let mut rows = Vec::with_capacity(solved.len());
    for row in solved {
        match row {
            Ok(row) => rows.push(row),
            Err(e) => {
                if let Some(dir) = out {
                    write_rows(&dir.join("sweep.csv"), &rows)?;
                }
                return Err(e);
            }
        }
    }

    let errors: Vec<f64> = rows.iter().map(|r| r.sup_norm_error).collect();
    let monotone = errors.windows(2).all(|w| w[1] <= MONOTONE_SLACK * w[0]);
    let final_error = *errors.last().expect("nonempty sweep");
    let error_bound = ESTIMATE_FACTOR * richardson.estimate;
    let verdict = if !monotone {
        Verdict::NonMonotone
    } else if final_error <= error_bound {
        Verdict::Converged
    } else {
        Verdict::Failed
    };
    let growth = Spread::of(&rows.iter().map(|r| r.growth_ratio).collect::<Vec<_>>());
    let lipschitz = Spread::of(&rows.iter().map(|r| r.lipschitz_modulus).collect::<Vec<_>>());
    let bounded = growth.rise <= REGULARITY_DRIFT && lipschitz.rise <= REGULARITY_DRIFT;
    let regularity = Regularity { growth, lipschitz, bounded };
    let report = SweepReport {
        verdict,
        monotone,
        final_error,
        error_bound,
        richardson,
        averaging: AveragingSummary { mode: avg.mode(), max_residual: bar.averaging_residual.unwrap_or(0.0) },
        regularity,
        nx: grids[0].nx,
        nt,
        window: [window.x_lo, window.x_hi],
        rows,
    };
    if let Some(dir) = out {
        write_rows(&dir.join("sweep.csv"), &report.rows)?;
        write_json(&dir.join("verdict.json"), &report)?;
        let timing = Timing {
            averaged_seconds,
            epsilons: report.rows.iter().map(|r| (r.epsilon, r.wall_seconds)).collect(),
            total_seconds: start.elapsed().as_secs_f64(),
        };
        write_json(&dir.join("timing.json"), &timing)?;
    }
    Ok(report)
}
