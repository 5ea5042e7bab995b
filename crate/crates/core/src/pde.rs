//! Monotone explicit backward scheme for the 1-D obstacle problem
//! `min(-u_t - F(t/eps, x, u, u_x, u_xx), u - S) = 0`, `u(T, .) = phi`,
//! and for its averaged counterpart with `F_bar`.
//!
//! Each step takes `u^k_j = max(u^{k+1}_j + dt (F + theta_j (u_{j+1} - 2u_j + u_{j-1}) / (2 dx)), S(t_k, x_j))`
//! with central differences for `p`, the standard second difference for `A`, and a
//! local Lax-Friedrichs coefficient `theta_j` bounding `|dF/dp|` at the node. A boundary
//! node copies its neighbour shifted by the terminal increment, `u_0 = u_1 + phi(x_0) - phi(x_1)`,
//! which keeps the scheme monotone and is exact for solutions of the form `phi(x) + c(t)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::averaging::AveragedDriver;
use crate::coefficients::{assemble_driver_scalar, assemble_driver_scalar_checked, Epsilon, ProblemSpec};
use crate::error::{Error, Result};
use crate::g::CovarianceSet;

/// Values beyond this magnitude are treated as a blow-up.
pub const BLOW_UP: f64 = 1e12;
/// Safety factor of the automatic time step.
pub const CFL_SAFETY: f64 = 0.9;
/// Minimum number of steps per unit of fast time `t / eps`.
pub const STEPS_PER_FAST_UNIT: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Steps {
    Auto,
    #[cfg_attr(feature = "serde", serde(untagged))]
    Fixed(usize),
}

/// Uniform space-time grid with `nx` interior nodes and one boundary node on each side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub horizon: f64,
    pub steps: Steps,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, nx: usize, horizon: f64, steps: Steps) -> Result<Self> {
        if !(x_min < x_max && x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::InvalidArgument("grid needs x_min < x_max".into()));
        }
        if nx < 3 {
            return Err(Error::InvalidArgument("grid needs at least 3 interior nodes".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument("grid horizon must be positive".into()));
        }
        if steps == Steps::Fixed(0) {
            return Err(Error::InvalidArgument("grid needs at least one time step".into()));
        }
        Ok(Self { x_min, x_max, nx, horizon, steps })
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx + 1) as f64
    }

    /// Node count including the two boundary nodes.
    #[inline]
    pub fn nodes(&self) -> usize {
        self.nx + 2
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    /// Same domain with `(dx, dt) -> (dx / 2, dt / 4)`.
    pub fn refined(&self) -> Self {
        let steps = match self.steps {
            Steps::Auto => Steps::Auto,
            Steps::Fixed(nt) => Steps::Fixed(4 * nt),
        };
        Self { nx: 2 * self.nx + 1, steps, ..*self }
    }

    /// Same domain with `(dx, dt) -> (2 dx, 4 dt)`; needs `nx + 1` even.
    pub fn coarsened(&self) -> Result<Self> {
        if (self.nx + 1) % 2 != 0 || (self.nx + 1) / 2 < 4 {
            return Err(Error::InvalidArgument("grid cannot be coarsened: nx + 1 must be even".into()));
        }
        let steps = match self.steps {
            Steps::Auto => Steps::Auto,
            Steps::Fixed(nt) if nt % 4 == 0 => Steps::Fixed(nt / 4),
            Steps::Fixed(_) => return Err(Error::InvalidArgument("nt must be divisible by 4 to coarsen".into())),
        };
        Ok(Self { nx: (self.nx + 1) / 2 - 1, steps, ..*self })
    }
}

/// Lax-Friedrichs coefficients and scheme bounds derived from the catalog.
#[derive(Debug, Clone)]
struct SchemeBounds {
    /// Per node bound of `|dF/dp|`.
    theta: Vec<f64>,
    /// Largest admissible time step.
    dt_max: f64,
}

fn scheme_bounds(spec: &ProblemSpec, sigma_set: &CovarianceSet, grid: &Grid1D) -> SchemeBounds {
    let upper = sigma_set.max_upper();
    let dx = grid.dx();
    let mut vol_sup: f64 = 0.0;
    let theta: Vec<f64> = (0..grid.nodes())
        .map(|j| {
            let x = [grid.x(j)];
            let vol = spec.vol[0][0].abs_bound_at(&x);
            vol_sup = vol_sup.max(vol * vol);
            let drift = spec.drift[0].abs_bound_at(&x);
            let qv = spec.drift_qv[0][0].abs_bound_at(&x);
            let fz = spec.driver.z_slope_bound_at(&x, 0);
            let gz = spec.driver_qv[0].z_slope_bound_at(&x, 0);
            drift + upper * qv + (fz + upper * gz) * vol
        })
        .collect();
    let theta_sup = theta.iter().copied().fold(0.0, f64::max);
    let lip_v = (1.0 + upper) * spec.lipschitz;
    let dt_max = CFL_SAFETY * dx * dx / (upper * vol_sup + dx * theta_sup + dx * dx * lip_v);
    SchemeBounds { theta, dt_max }
}

/// Smallest step count satisfying the stability bound on `grid`.
pub fn stability_steps(spec: &ProblemSpec, sigma_set: &CovarianceSet, grid: &Grid1D) -> usize {
    let bounds = scheme_bounds(spec, sigma_set, grid);
    libm::ceil(grid.horizon / bounds.dt_max).max(1.0) as usize
}

/// Steps needed to resolve the fast time `t / eps` with 20 steps per unit.
pub fn oscillation_steps(horizon: f64, epsilon: f64) -> usize {
    libm::ceil(STEPS_PER_FAST_UNIT * horizon / epsilon) as usize
}

#[derive(Debug, Clone, Copy)]
pub enum DriverKind<'a> {
    /// `F(t / eps, ...)` with `eps` taken from the problem.
    Oscillating,
    Averaged(&'a AveragedDriver),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Project on the obstacle after every step.
    pub project: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { project: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldKind {
    Oscillating(f64),
    Averaged,
}

/// Space-time solution, `nt + 1` slices of `nx + 2` nodes each.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub grid: Grid1D,
    pub nt: usize,
    pub dt: f64,
    pub kind: FieldKind,
    values: Vec<f64>,
    active: Vec<bool>,
    /// Largest averaging residual met during an averaged solve.
    pub averaging_residual: Option<f64>,
}

impl SolutionField {
    #[inline]
    pub fn value(&self, k: usize, j: usize) -> f64 {
        self.values[k * self.grid.nodes() + j]
    }

    /// Whether the projection raised the value at `(k, j)`.
    #[inline]
    pub fn obstacle_active(&self, k: usize, j: usize) -> bool {
        self.active[k * self.grid.nodes() + j]
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.grid.nodes();
        &self.values[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        if k == self.nt {
            self.grid.horizon
        } else {
            k as f64 * self.dt
        }
    }

    /// Quadratic interpolation in `x` on slice `k` through the three nodes nearest to `x`.
    pub fn interpolate(&self, k: usize, x: f64) -> f64 {
        let g = &self.grid;
        let s = (x - g.x_min) / g.dx();
        let j = (libm::round(s) as i64).clamp(1, g.nx as i64) as usize;
        let r = s - j as f64;
        let (um, u0, up) = (self.value(k, j - 1), self.value(k, j), self.value(k, j + 1));
        u0 + 0.5 * r * (up - um) + 0.5 * r * r * (up - 2.0 * u0 + um)
    }

    /// `max |u| / (1 + |x|^{m+1})` over every node.
    pub fn growth_ratio(&self, m: u32) -> f64 {
        let n = self.grid.nodes();
        let weights: Vec<f64> = (0..n).map(|j| 1.0 + libm::pow(libm::fabs(self.grid.x(j)), (m + 1) as f64)).collect();
        self.values.chunks(n).flat_map(|row| row.iter().zip(&weights).map(|(u, w)| libm::fabs(*u) / w)).fold(0.0, f64::max)
    }

    /// Largest difference quotient `|u_{j+1} - u_j| / dx` with both nodes in the window.
    pub fn lipschitz_modulus(&self, window: &Window) -> Result<f64> {
        let (ks, js) = window.ranges(&self.grid, self.nt, self.dt)?;
        let dx = self.grid.dx();
        let mut best: f64 = 0.0;
        for k in ks {
            for j in js.start..js.end.saturating_sub(1) {
                best = best.max(libm::fabs(self.value(k, j + 1) - self.value(k, j)) / dx);
            }
        }
        Ok(best)
    }
}

/// Space-time sub-rectangle used by norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x_lo: f64,
    pub x_hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl Window {
    /// Centered fraction of the spatial domain over the whole time horizon.
    pub fn inner(grid: &Grid1D, fraction: f64) -> Self {
        let mid = 0.5 * (grid.x_min + grid.x_max);
        let half = 0.5 * fraction * (grid.x_max - grid.x_min);
        Self { x_lo: mid - half, x_hi: mid + half, t_lo: 0.0, t_hi: grid.horizon }
    }

    /// Index ranges `(time slices, interior nodes)` covered by the window.
    pub fn ranges(&self, grid: &Grid1D, nt: usize, dt: f64) -> Result<(core::ops::Range<usize>, core::ops::Range<usize>)> {
        if !(self.x_lo >= grid.x_min && self.x_hi <= grid.x_max && self.x_lo <= self.x_hi && self.t_lo <= self.t_hi) {
            return Err(Error::InvalidArgument("window must lie inside the spatial domain".into()));
        }
        let dx = grid.dx();
        let tol = 1e-9;
        let j_lo = libm::ceil((self.x_lo - grid.x_min) / dx - tol).max(1.0) as usize;
        let j_hi = (libm::floor((self.x_hi - grid.x_min) / dx + tol) as usize).min(grid.nx);
        let k_lo = libm::ceil(self.t_lo / dt - tol).max(0.0) as usize;
        let k_hi = (libm::floor(self.t_hi / dt + tol) as usize).min(nt);
        if j_lo > j_hi || k_lo > k_hi {
            return Err(Error::InvalidArgument("window contains no grid node".into()));
        }
        Ok((k_lo..k_hi + 1, j_lo..j_hi + 1))
    }
}

/// Result of [`sup_norm_diff`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormDiff {
    pub value: f64,
    pub k: usize,
    pub j: usize,
    pub t: f64,
    pub x: f64,
}

/// `max |a - b|` over the window, with the node where it is attained.
pub fn sup_norm_diff(a: &SolutionField, b: &SolutionField, window: &Window) -> Result<NormDiff> {
    if a.grid != b.grid || a.nt != b.nt {
        return Err(Error::InvalidArgument("solution fields live on different grids".into()));
    }
    let (ks, js) = window.ranges(&a.grid, a.nt, a.dt)?;
    let mut best = NormDiff { value: -1.0, k: ks.start, j: js.start, t: 0.0, x: 0.0 };
    for k in ks {
        for j in js.clone() {
            let d = libm::fabs(a.value(k, j) - b.value(k, j));
            if d > best.value {
                best = NormDiff { value: d, k, j, t: a.t(k), x: a.grid.x(j) };
            }
        }
    }
    Ok(best)
}

/// Resolves the time step count for `grid` and the chosen driver.
pub fn resolve_steps(spec: &ProblemSpec, sigma_set: &CovarianceSet, grid: &Grid1D, driver: DriverKind<'_>) -> Result<usize> {
    let stable = stability_steps(spec, sigma_set, grid);
    let resolve = match (driver, spec.epsilon) {
        (DriverKind::Oscillating, Epsilon::Scale(e)) if !spec.is_time_independent() => oscillation_steps(grid.horizon, e),
        _ => 0,
    };
    match grid.steps {
        Steps::Auto => Ok(stable.max(resolve)),
        Steps::Fixed(nt) => {
            // The fixed step may use the bound without the safety factor.
            if (nt as f64) < stable as f64 * CFL_SAFETY - 1e-9 {
                return Err(Error::InvalidArgument(alloc::format!(
                    "nt = {nt} violates the stability bound (needs about {stable})"
                )));
            }
            if nt < resolve {
                return Err(Error::InvalidArgument(alloc::format!(
                    "nt = {nt} under-resolves the oscillation (needs {resolve})"
                )));
            }
            Ok(nt)
        }
    }
}

/// Solves the obstacle problem backward from `u(T, .) = phi`.
pub fn solve_obstacle_pde(
    spec: &ProblemSpec,
    sigma_set: &CovarianceSet,
    grid: &Grid1D,
    driver: DriverKind<'_>,
    options: SolverOptions,
) -> Result<SolutionField> {
    if spec.dim_x != 1 || spec.dim_b != 1 {
        return Err(Error::UnsupportedDimension { dim_x: spec.dim_x, dim_b: spec.dim_b });
    }
    if sigma_set.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: sigma_set.dim(), what: "covariance set" });
    }
    spec.check_structure()?;
    if (grid.horizon - spec.horizon).abs() > 1e-12 * spec.horizon {
        return Err(Error::InvalidArgument("grid horizon differs from the problem horizon".into()));
    }
    let epsilon = match driver {
        DriverKind::Oscillating => match spec.epsilon {
            Epsilon::Scale(e) => e,
            Epsilon::Averaged => {
                return Err(Error::InvalidArgument("oscillating solve needs a numeric epsilon".into()));
            }
        },
        DriverKind::Averaged(_) => f64::NAN,
    };

    let nt = resolve_steps(spec, sigma_set, grid, driver)?;
    let bounds = scheme_bounds(spec, sigma_set, grid);
    let n = grid.nodes();
    let nx = grid.nx;
    let dx = grid.dx();
    let dt = grid.horizon / nt as f64;
    let xs: Vec<f64> = (0..n).map(|j| grid.x(j)).collect();
    let theta_half: Vec<f64> = bounds.theta.iter().map(|t| 0.5 * t / dx).collect();
    let (inv_dx2, inv_2dx) = (1.0 / (dx * dx), 0.5 / dx);

    let mut values = vec![0.0; (nt + 1) * n];
    let mut active = vec![false; (nt + 1) * n];
    let ghost_shift = [
        spec.terminal_at(&[xs[0]]) - spec.terminal_at(&[xs[1]]),
        spec.terminal_at(&[xs[nx + 1]]) - spec.terminal_at(&[xs[nx]]),
    ];
    let terminal = &mut values[nt * n..];
    for (j, u) in terminal.iter_mut().enumerate() {
        *u = spec.terminal_at(&[xs[j]]);
        if options.project && *u < spec.obstacle_at(grid.horizon, &[xs[j]]) {
            return Err(Error::InvalidArgument(alloc::format!(
                "terminal value lies below the obstacle at x = {}",
                xs[j]
            )));
        }
    }

    let mut averaging_residual: Option<f64> = None;
    for k in (0..nt).rev() {
        let t = k as f64 * dt;
        let fast = t / epsilon;
        let (done, rest) = values.split_at_mut((k + 1) * n);
        let next = &rest[..n];
        let cur = &mut done[k * n..];
        let act = &mut active[k * n..(k + 1) * n];
        for j in 1..=nx {
            let (um, u0, up) = (next[j - 1], next[j], next[j + 1]);
            let curvature = up - 2.0 * u0 + um;
            let p = (up - um) * inv_2dx;
            let a = curvature * inv_dx2;
            let f = match driver {
                DriverKind::Oscillating => {
                    let (_, f) = assemble_driver_scalar(spec, sigma_set, fast, xs[j], u0, p, a);
                    if !f.is_finite() {
                        assemble_driver_scalar_checked(spec, sigma_set, fast, xs[j], u0, p, a)?;
                    }
                    f
                }
                DriverKind::Averaged(avg) => {
                    let out = avg.average_scalar(sigma_set, xs[j], u0, p, a)?;
                    averaging_residual = Some(averaging_residual.map_or(out.residual, |r| r.max(out.residual)));
                    out.value
                }
            };
            let candidate = u0 + dt * (f + theta_half[j] * curvature);
            let (u, raised) = project(candidate, spec, t, xs[j], options.project);
            if !(u.abs() <= BLOW_UP) {
                return Err(Error::BlowUp { step: k, node: j, value: u });
            }
            cur[j] = u;
            act[j] = raised;
        }
        for (ghost, inner, shift) in [(0, 1, ghost_shift[0]), (nx + 1, nx, ghost_shift[1])] {
            let (u, raised) = project(cur[inner] + shift, spec, t, xs[ghost], options.project);
            if !(u.abs() <= BLOW_UP) {
                return Err(Error::BlowUp { step: k, node: ghost, value: u });
            }
            cur[ghost] = u;
            act[ghost] = raised;
        }
    }

    let kind = match driver {
        DriverKind::Oscillating => FieldKind::Oscillating(epsilon),
        DriverKind::Averaged(_) => FieldKind::Averaged,
    };
    Ok(SolutionField { grid: *grid, nt, dt, kind, values, active, averaging_residual })
}

#[inline]
fn project(candidate: f64, spec: &ProblemSpec, t: f64, x: f64, enabled: bool) -> (f64, bool) {
    if enabled {
        let s = spec.obstacle_at(t, &[x]);
        if candidate < s {
            return (s, true);
        }
    }
    (candidate, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{Expr, Spatial, StateFactor, Temporal, Term};

    fn x_squared() -> Expr {
        Expr::term(Term::constant(1.0).space(Spatial::Monomial { axis: 0, degree: 2 }))
    }

    fn g_heat() -> ProblemSpec {
        ProblemSpec::scalar(1.0)
            .with_vol(Expr::constant(1.0))
            .with_terminal(x_squared())
            .with_obstacle(Expr::constant(-1e10))
    }

    fn sigma_14() -> CovarianceSet {
        CovarianceSet::interval(1.0, 4.0).unwrap()
    }

    #[test]
    fn g_heat_matches_closed_form() {
        let grid = Grid1D::new(-16.0, 16.0, 400, 1.0, Steps::Auto).unwrap();
        let u = solve_obstacle_pde(&g_heat(), &sigma_14(), &grid, DriverKind::Oscillating, SolverOptions::default())
            .unwrap();
        let center = u.interpolate(0, 0.0);
        assert!((center - 4.0).abs() <= 0.04, "u(0,0) = {center}");
        // x^2 + 4 (T - t) solves the scheme exactly, boundary nodes included.
        for k in 0..=u.nt {
            for j in 0..grid.nodes() {
                let x = grid.x(j);
                let exact = x * x + 4.0 * (1.0 - u.t(k));
                assert!((u.value(k, j) - exact).abs() <= 1e-9 * (1.0 + exact), "k={k} j={j}");
            }
        }
        // Terminal slice is phi exactly.
        for j in 0..grid.nodes() {
            assert_eq!(u.value(u.nt, j), grid.x(j) * grid.x(j));
        }
    }

    #[test]
    fn deep_obstacle_is_a_no_op() {
        let grid = Grid1D::new(-4.0, 4.0, 60, 1.0, Steps::Auto).unwrap();
        let spec = g_heat().with_drift(Expr::term(
            Term::constant(0.5).time(Temporal::Sin { omega: 1.0, phase: 0.0 }).space(Spatial::Tanh { k: vec![1.0] }),
        ));
        let with = solve_obstacle_pde(&spec, &sigma_14(), &grid, DriverKind::Oscillating, SolverOptions::default())
            .unwrap();
        let without =
            solve_obstacle_pde(&spec, &sigma_14(), &grid, DriverKind::Oscillating, SolverOptions { project: false })
                .unwrap();
        assert_eq!(with.values, without.values);
    }

    #[test]
    fn obstacle_dominates_and_raises() {
        let grid = Grid1D::new(-4.0, 4.0, 80, 1.0, Steps::Auto).unwrap();
        let spec = ProblemSpec::scalar(1.0)
            .with_vol(Expr::constant(1.0))
            .with_terminal(x_squared())
            .with_driver(Expr::constant(-6.0))
            .with_constants(6.0, 1, 0.0);
        let sigma = sigma_14();
        let obst = solve_obstacle_pde(&spec, &sigma, &grid, DriverKind::Oscillating, SolverOptions::default()).unwrap();
        let free =
            solve_obstacle_pde(&spec, &sigma, &grid, DriverKind::Oscillating, SolverOptions { project: false }).unwrap();
        let mut raised = 0;
        for k in 0..=obst.nt {
            for j in 0..grid.nodes() {
                assert!(obst.value(k, j) >= 0.0);
                assert!(obst.value(k, j) >= free.value(k, j), "k={k} j={j}");
                raised += obst.obstacle_active(k, j) as usize;
            }
        }
        assert!(raised > 0);
        assert!(obst.interpolate(0, 0.0) >= 0.0);
    }

    #[test]
    fn refinement_reduces_error_with_drift() {
        // u = x^2 + c(t) is no longer exact once a state-dependent driver enters;
        // check self-convergence instead: |u_h - u_{h/2}| shrinks.
        let spec = ProblemSpec::scalar(1.0)
            .with_vol(Expr::constant(1.0))
            .with_drift(Expr::term(Term::constant(0.5).space(Spatial::Tanh { k: vec![1.0] })))
            .with_driver(Expr::term(Term::constant(0.5).state(StateFactor::TanhZ { index: 0 })))
            .with_terminal(Expr::term(Term::constant(1.0).space(Spatial::Cos { k: vec![1.0] })))
            .with_obstacle(Expr::constant(-2.0))
            .with_constants(1.0, 1, -2.0);
        let sigma = CovarianceSet::interval(0.5, 1.0).unwrap();
        let g0 = Grid1D::new(-6.0, 6.0, 47, 0.5, Steps::Auto).unwrap();
        let spec = ProblemSpec { horizon: 0.5, ..spec };
        let solve = |g: &Grid1D| {
            solve_obstacle_pde(&spec, &sigma, g, DriverKind::Oscillating, SolverOptions::default()).unwrap()
        };
        let (u0, u1, u2) = (solve(&g0), solve(&g0.refined()), solve(&g0.refined().refined()));
        let e1 = (u0.interpolate(0, 0.0) - u1.interpolate(0, 0.0)).abs();
        let e2 = (u1.interpolate(0, 0.0) - u2.interpolate(0, 0.0)).abs();
        assert!(e2 < e1 / 1.5, "{e1} {e2}");
    }

    #[test]
    fn unsupported_dimension() {
        let mut spec = g_heat();
        spec.dim_x = 2;
        let grid = Grid1D::new(-1.0, 1.0, 10, 1.0, Steps::Auto).unwrap();
        assert!(matches!(
            solve_obstacle_pde(&spec, &sigma_14(), &grid, DriverKind::Oscillating, SolverOptions::default()),
            Err(Error::UnsupportedDimension { .. })
        ));
    }

    #[test]
    fn blow_up_is_reported() {
        // Fixed step far beyond the bound is refused; force instability by skipping
        // the check with a huge driver instead.
        let spec = ProblemSpec::scalar(1.0)
            .with_vol(Expr::constant(1.0))
            .with_terminal(x_squared())
            .with_driver(Expr::term(Term::constant(1.0).state(StateFactor::Y)))
            .with_obstacle(Expr::constant(-1e10))
            .with_constants(1.0, 1, 0.0);
        let grid = Grid1D::new(-4.0, 4.0, 20, 1.0, Steps::Fixed(2)).unwrap();
        assert!(solve_obstacle_pde(&spec, &sigma_14(), &grid, DriverKind::Oscillating, SolverOptions::default()).is_err());
        let huge = spec.clone().with_driver(Expr::term(Term::constant(1e3).state(StateFactor::Y))).with_constants(
            1e3,
            1,
            0.0,
        );
        let grid = Grid1D::new(-4.0, 4.0, 20, 1.0, Steps::Auto).unwrap();
        // e^{1000} overflows the blow-up threshold long before t = 0.
        match solve_obstacle_pde(&huge, &sigma_14(), &grid, DriverKind::Oscillating, SolverOptions::default()) {
            Err(Error::BlowUp { .. }) => {}
            other => panic!("expected blow-up, got {:?}", other.map(|u| u.value(0, 10))),
        }
    }

    #[test]
    fn sup_norm_examples() {
        let grid = Grid1D::new(-4.0, 4.0, 40, 1.0, Steps::Auto).unwrap();
        let a = solve_obstacle_pde(&g_heat(), &sigma_14(), &grid, DriverKind::Oscillating, SolverOptions::default())
            .unwrap();
        let window = Window::inner(&grid, 0.6);
        assert_eq!(sup_norm_diff(&a, &a, &window).unwrap().value, 0.0);
        let mut b = a.clone();
        b.values.iter_mut().for_each(|u| *u += 0.5);
        let d = sup_norm_diff(&a, &b, &window).unwrap();
        assert!((d.value - 0.5).abs() < 1e-12);
        assert!(d.x.abs() <= 0.3 * 8.0 + 1e-9);

        let other = Grid1D::new(-4.0, 4.0, 41, 1.0, Steps::Auto).unwrap();
        let c = solve_obstacle_pde(&g_heat(), &sigma_14(), &other, DriverKind::Oscillating, SolverOptions::default())
            .unwrap();
        assert!(sup_norm_diff(&a, &c, &window).is_err());
    }

    #[test]
    fn oscillating_solve_resolves_fast_time() {
        let spec = g_heat()
            .with_driver(Expr::term(Term::constant(1.0).time(Temporal::Cos { omega: 1.0, phase: 0.0 })))
            .with_epsilon(Epsilon::Scale(0.001));
        let grid = Grid1D::new(-4.0, 4.0, 20, 1.0, Steps::Auto).unwrap();
        let u = solve_obstacle_pde(&spec, &sigma_14(), &grid, DriverKind::Oscillating, SolverOptions::default())
            .unwrap();
        assert!(u.nt >= 20_000);
    }

    #[test]
    fn averaged_solve_of_time_independent_spec_matches() {
        let spec = ProblemSpec::scalar(1.0)
            .with_vol(Expr::term(Term::constant(0.25).space(Spatial::Tanh { k: vec![1.0] })).plus(Term::constant(1.0)))
            .with_driver(Expr::term(Term::constant(0.5).state(StateFactor::TanhZ { index: 0 })))
            .with_terminal(x_squared())
            .with_obstacle(Expr::term(Term::constant(0.5).space(Spatial::Tanh { k: vec![1.0] })).plus(Term::constant(-1.0)))
            .with_constants(1.0, 1, -0.5);
        let sigma = CovarianceSet::interval(0.25, 1.0).unwrap();
        let grid = Grid1D::new(-4.0, 4.0, 39, 1.0, Steps::Auto).unwrap();
        let avg = AveragedDriver::periodic(spec.clone()).unwrap();
        let a = solve_obstacle_pde(&spec, &sigma, &grid, DriverKind::Oscillating, SolverOptions::default()).unwrap();
        let b = solve_obstacle_pde(&spec, &sigma, &grid, DriverKind::Averaged(&avg), SolverOptions::default()).unwrap();
        assert_eq!(b.kind, FieldKind::Averaged);
        let d = sup_norm_diff(&a, &b, &Window::inner(&grid, 1.0)).unwrap();
        assert!(d.value <= 1e-10, "{}", d.value);
    }

    mod comparison {
        use super::*;
        use proptest::prelude::*;

        fn driver(weights: &[f64; 4]) -> Expr {
            Expr::term(Term::constant(weights[0]))
                .plus(Term::constant(weights[1]).state(StateFactor::TanhZ { index: 0 }))
                .plus(Term::constant(weights[2]).time(Temporal::Cos { omega: 1.0, phase: 0.0 }).state(StateFactor::Y))
                .plus(Term::constant(weights[3]).space(Spatial::Sin { k: vec![1.0] }))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]
            #[test]
            fn ordered_data_gives_ordered_solutions(
                w in proptest::array::uniform4(-1.0f64..1.0),
                df in 0.0f64..1.0,
                dphi in 0.0f64..1.0,
                curv in 0.0f64..0.5,
                level in -2.0f64..0.5,
            ) {
                let obstacle = Expr::term(Term::constant(0.5).space(Spatial::Cos { k: vec![1.0] })).plus(Term::constant(level));
                let base = ProblemSpec::scalar(0.5)
                    .with_vol(Expr::constant(1.0))
                    .with_drift(Expr::term(Term::constant(0.3).time(Temporal::Sin { omega: 1.0, phase: 0.0 }).space(Spatial::Tanh { k: vec![1.0] })))
                    .with_obstacle(obstacle)
                    .with_epsilon(Epsilon::Scale(0.2))
                    .with_constants(1.0, 1, 1.0);
                let lower = base.clone().with_driver(driver(&w)).with_terminal(x_squared().plus(Term::constant(1.0)));
                let upper = base
                    .with_driver(driver(&w).plus(Term::constant(df)))
                    .with_terminal(
                        x_squared()
                            .plus(Term::constant(1.0 + dphi))
                            .plus(Term::constant(curv).space(Spatial::Monomial { axis: 0, degree: 2 })),
                    );
                let sigma = CovarianceSet::interval(0.25, 1.0).unwrap();
                let grid = Grid1D::new(-4.0, 4.0, 31, 0.5, Steps::Auto).unwrap();
                let nt = resolve_steps(&upper, &sigma, &grid, DriverKind::Oscillating).unwrap()
                    .max(resolve_steps(&lower, &sigma, &grid, DriverKind::Oscillating).unwrap());
                let grid = Grid1D { steps: Steps::Fixed(nt), ..grid };
                let u1 = solve_obstacle_pde(&lower, &sigma, &grid, DriverKind::Oscillating, SolverOptions::default()).unwrap();
                let u2 = solve_obstacle_pde(&upper, &sigma, &grid, DriverKind::Oscillating, SolverOptions::default()).unwrap();
                for k in 0..=nt {
                    for j in 0..grid.nodes() {
                        prop_assert!(u1.value(k, j) <= u2.value(k, j) + 1e-10, "k={} j={}", k, j);
                        prop_assert!(u1.value(k, j) >= lower.obstacle_at(u1.t(k), &[grid.x(j)]));
                    }
                }
            }
        }
    }
}
