//! Recombining trinomial lattice for scalar reflected and penalized G-BSDEs with forward
//! state `X = x0 + B`.
//!
//! From `(k, j)` the state moves by `+dx, 0, -dx` with weights `(q/2, 1 - q, q/2)`,
//! `q in [q_min, 1]`, so the increment variance `q * upper * dt` ranges over the
//! covariance interval. The one-step sublinear expectation is affine in `q` and is taken
//! at the better endpoint.

use alloc::vec;
use alloc::vec::Vec;

use crate::coefficients::{Epsilon, Expr, ProblemSpec, Spatial, StateFactor, Temporal};
use crate::error::{Error, Result};
use crate::g::CovarianceSet;

/// Slack of the monotonicity checks in [`penalization_sweep`].
pub const PENALTY_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub x0: f64,
    pub steps: usize,
    pub horizon: f64,
    /// Upper variance of the scalar covariance set.
    upper: f64,
    q_min: f64,
}

impl Lattice {
    pub fn new(x0: f64, steps: usize, horizon: f64, sigma_set: &CovarianceSet) -> Result<Self> {
        if sigma_set.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, found: sigma_set.dim(), what: "covariance set" });
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("lattice needs at least one step".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite() && x0.is_finite()) {
            return Err(Error::InvalidArgument("lattice horizon must be positive and x0 finite".into()));
        }
        let (lower, upper) = (sigma_set.lower()[0], sigma_set.upper()[0]);
        if !(lower > 0.0) {
            return Err(Error::InvalidArgument("lattice needs a positive lower variance".into()));
        }
        Ok(Self { x0, steps, horizon, upper, q_min: lower / upper })
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        libm::sqrt(self.upper * self.dt())
    }

    #[inline]
    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    /// State of node `j in -k..=k`.
    #[inline]
    pub fn x(&self, j: i64) -> f64 {
        self.x0 + j as f64 * self.dx()
    }

    /// Flat position of node `(k, j)`; level `k` occupies `k^2 .. (k+1)^2`.
    #[inline]
    fn index(k: usize, j: i64) -> usize {
        k * k + (j + k as i64) as usize
    }

    fn node_count(&self) -> usize {
        (self.steps + 1) * (self.steps + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LatticeMode {
    Reflected,
    Penalized(f64),
}

/// Node fields of a lattice solve. `A` is the expected reflection still to come from
/// `(k, j)` to maturity under the maximizing branch weights.
#[derive(Debug, Clone)]
pub struct LatticeSolution {
    pub lattice: Lattice,
    pub mode: LatticeMode,
    y: Vec<f64>,
    z: Vec<f64>,
    a: Vec<f64>,
    increment: Vec<f64>,
}

impl LatticeSolution {
    pub fn y(&self, k: usize, j: i64) -> f64 {
        self.y[Lattice::index(k, j)]
    }

    pub fn z(&self, k: usize, j: i64) -> f64 {
        self.z[Lattice::index(k, j)]
    }

    pub fn a(&self, k: usize, j: i64) -> f64 {
        self.a.get(Lattice::index(k, j)).copied().unwrap_or(0.0)
    }

    /// Reflection added at `(k, j)` itself.
    pub fn increment(&self, k: usize, j: i64) -> f64 {
        self.increment.get(Lattice::index(k, j)).copied().unwrap_or(0.0)
    }

    pub fn y0(&self) -> f64 {
        self.y[0]
    }

    pub fn z0(&self) -> f64 {
        self.z[0]
    }

    /// Visits every node as `(k, j, t, x, Y, Z, A)`, root first.
    pub fn for_each_node(&self, mut visit: impl FnMut(usize, i64, f64, f64, f64, f64, f64)) {
        let lat = &self.lattice;
        for k in 0..=lat.steps {
            for j in -(k as i64)..=k as i64 {
                visit(k, j, lat.t(k), lat.x(j), self.y(k, j), self.z(k, j), self.a(k, j));
            }
        }
    }
}

fn is_zero(expr: &Expr) -> bool {
    expr.terms.iter().all(|t| t.weight == 0.0)
}

fn is_unit_constant(expr: &Expr) -> bool {
    let constant = expr
        .terms
        .iter()
        .all(|t| t.weight == 0.0 || (t.time == Temporal::Const && t.space == Spatial::Const && t.state == StateFactor::None));
    let total: f64 = expr.terms.iter().map(|t| t.weight).sum();
    constant && libm::fabs(total - 1.0) <= 1e-12
}

/// Checks that `spec` lies in the subclass the lattice supports: scalar, `b = h = 0`, `sigma = 1`.
pub fn check_supported(spec: &ProblemSpec) -> Result<()> {
    if spec.dim_x != 1 || spec.dim_b != 1 {
        return Err(Error::UnsupportedDimension { dim_x: spec.dim_x, dim_b: spec.dim_b });
    }
    spec.check_structure()?;
    if !is_zero(&spec.drift[0]) {
        return Err(Error::UnsupportedForward("lattice needs b = 0".into()));
    }
    if !is_zero(&spec.drift_qv[0][0]) {
        return Err(Error::UnsupportedForward("lattice needs h = 0".into()));
    }
    if !is_unit_constant(&spec.vol[0][0]) {
        return Err(Error::UnsupportedForward("lattice needs sigma = 1".into()));
    }
    Ok(())
}

fn solve(spec: &ProblemSpec, sigma_set: &CovarianceSet, lat: &Lattice, mode: LatticeMode) -> Result<LatticeSolution> {
    check_supported(spec)?;
    if sigma_set.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: sigma_set.dim(), what: "covariance set" });
    }
    let upper = sigma_set.upper()[0];
    let q_min = sigma_set.lower()[0] / upper;
    if libm::fabs(upper - lat.upper) > 1e-15 * upper || libm::fabs(q_min - lat.q_min) > 1e-15 {
        return Err(Error::InvalidArgument("lattice was built for a different covariance set".into()));
    }
    if (lat.horizon - spec.horizon).abs() > 1e-12 * spec.horizon {
        return Err(Error::InvalidArgument("lattice horizon differs from the problem horizon".into()));
    }
    let epsilon = match spec.epsilon {
        Epsilon::Scale(e) => e,
        Epsilon::Averaged => return Err(Error::InvalidArgument("lattice solves need a numeric epsilon".into())),
    };
    let penalty = match mode {
        LatticeMode::Penalized(n) if !(n >= 0.0 && n.is_finite()) => {
            return Err(Error::InvalidArgument("penalty weight must be finite and nonnegative".into()));
        }
        LatticeMode::Penalized(n) => Some(n),
        LatticeMode::Reflected => None,
    };
    let reflected = penalty.is_none();

    let n_steps = lat.steps;
    let (dt, dx) = (lat.dt(), lat.dx());
    let variance_dt = upper * dt;
    let size = lat.node_count();
    let mut y = vec![0.0; size];
    let mut z = vec![0.0; size];
    let (mut a, mut increment) = if reflected { (vec![0.0; size], vec![0.0; size]) } else { (Vec::new(), Vec::new()) };

    let last = n_steps as i64;
    for j in -last..=last {
        let x = lat.x(j);
        let value = spec.terminal_at(&[x]);
        if reflected && value < spec.obstacle_at(lat.horizon, &[x]) {
            return Err(Error::InvalidArgument(alloc::format!("terminal value lies below the obstacle at x = {x}")));
        }
        y[Lattice::index(n_steps, j)] = value;
    }

    for k in (0..n_steps).rev() {
        let t = lat.t(k);
        let fast = t / epsilon;
        let level = k as i64;
        for j in -level..=level {
            let x = [lat.x(j)];
            let next = |field: &[f64], dj: i64| field[Lattice::index(k + 1, j + dj)];
            let (up, mid, dn) = (next(&y, 1), next(&y, 0), next(&y, -1));
            let grad = (up - dn) / (2.0 * dx);
            let zs = [grad];
            let g = spec.driver_qv[0].eval(fast, &x, mid, &zs);
            let value = |q: f64| 0.5 * q * (up + dn) + (1.0 - q) * mid + g * q * variance_dt;
            let (v_low, v_high) = (value(q_min), value(1.0));
            let (expectation, q_star) = if v_high >= v_low { (v_high, 1.0) } else { (v_low, q_min) };
            let free = expectation + spec.driver.eval(fast, &x, mid, &zs) * dt;
            let s = spec.obstacle_at(t, &x);
            let here = Lattice::index(k, j);
            let out = match penalty {
                Some(n) => free + n * (s - mid).max(0.0) * dt,
                None => {
                    let out = free.max(s);
                    let push = out - free;
                    increment[here] = push;
                    a[here] = push + 0.5 * q_star * (next(&a, 1) + next(&a, -1)) + (1.0 - q_star) * next(&a, 0);
                    out
                }
            };
            if !(libm::fabs(out) <= crate::pde::BLOW_UP) {
                return Err(Error::BlowUp { step: k, node: (j + level) as usize, value: out });
            }
            y[here] = out;
            z[here] = grad;
        }
    }
    Ok(LatticeSolution { lattice: *lat, mode, y, z, a, increment })
}

/// Penalized recursion with weight `n_penalty`; `n_penalty = 0` is the unreflected equation.
pub fn solve_penalized_bsde(
    spec: &ProblemSpec,
    sigma_set: &CovarianceSet,
    lat: &Lattice,
    n_penalty: f64,
) -> Result<LatticeSolution> {
    solve(spec, sigma_set, lat, LatticeMode::Penalized(n_penalty))
}

/// Reflected recursion: projection on the obstacle after each step.
pub fn solve_reflected_bsde(spec: &ProblemSpec, sigma_set: &CovarianceSet, lat: &Lattice) -> Result<LatticeSolution> {
    solve(spec, sigma_set, lat, LatticeMode::Reflected)
}

/// Root values of a penalty sweep against the reflected and unreflected solves.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PenalizationSweep {
    /// `(n, Y0(n))` in the order requested.
    pub rows: Vec<(f64, f64)>,
    pub reflected_y0: f64,
    pub unreflected_y0: f64,
    /// `reflected_y0 - Y0(n)` per row.
    pub gaps: Vec<f64>,
    /// Each gap is no larger than the previous one.
    pub gaps_shrinking: bool,
    /// `unreflected <= Y0(n) <= reflected + slack` for every row.
    pub ordered: bool,
}

impl PenalizationSweep {
    pub fn final_gap(&self) -> f64 {
        self.gaps.last().copied().unwrap_or(f64::NAN)
    }
}

/// Solves the penalized equation for each weight in `n_list` (strictly increasing).
/// A decrease of `Y0` beyond [`PENALTY_SLACK`] is a property failure.
pub fn penalization_sweep(
    spec: &ProblemSpec,
    sigma_set: &CovarianceSet,
    lat: &Lattice,
    n_list: &[f64],
) -> Result<PenalizationSweep> {
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("penalty list is empty".into()));
    }
    if n_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("penalty list must be strictly increasing".into()));
    }
    let reflected_y0 = solve_reflected_bsde(spec, sigma_set, lat)?.y0();
    let unreflected_y0 = solve_penalized_bsde(spec, sigma_set, lat, 0.0)?.y0();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let y0 = solve_penalized_bsde(spec, sigma_set, lat, n)?.y0();
        if let Some(&(prev_n, prev)) = rows.last() {
            if y0 < prev - PENALTY_SLACK {
                return Err(Error::PropertyFailure(alloc::format!(
                    "penalized root value decreased from {prev} (n = {prev_n}) to {y0} (n = {n})"
                )));
            }
        }
        rows.push((n, y0));
    }
    let gaps: Vec<f64> = rows.iter().map(|&(_, y0)| reflected_y0 - y0).collect();
    let gaps_shrinking = gaps.windows(2).all(|w| w[1] <= w[0] + PENALTY_SLACK);
    let ordered = rows
        .iter()
        .all(|&(_, y0)| y0 >= unreflected_y0 - PENALTY_SLACK && y0 <= reflected_y0 + PENALTY_SLACK);
    Ok(PenalizationSweep { rows, reflected_y0, unreflected_y0, gaps, gaps_shrinking, ordered })
}
