//! Problem data of the oscillating reflected forward-backward system as a closed
//! catalog of evaluable terms, the driver assembly
//! `F = G(H) + p b + f(t, x, v, p sigma)`,
//! `H_ij = (sigma^T A sigma)_ij + 2 p h_ij + 2 g_ij(t, x, v, p sigma)`,
//! and sampled checks of the Lipschitz, growth and obstacle assumptions.
//!
//! Coefficient evaluation never sees `epsilon`: callers pass the fast time `t / epsilon`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::g::{CovarianceSet, SymMatrix};
use crate::report::ValidationReport;

/// Time factor of a term.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Temporal {
    #[default]
    Const,
    Sin {
        omega: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        phase: f64,
    },
    Cos {
        omega: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        phase: f64,
    },
    CosSquared {
        omega: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        phase: f64,
    },
    /// `1 / (1 + |t|)`.
    Decay,
}

impl Temporal {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Temporal::Const => 1.0,
            Temporal::Sin { omega, phase } => libm::sin(omega * t + phase),
            Temporal::Cos { omega, phase } => libm::cos(omega * t + phase),
            Temporal::CosSquared { omega, phase } => {
                let c = libm::cos(omega * t + phase);
                c * c
            }
            Temporal::Decay => 1.0 / (1.0 + libm::fabs(t)),
        }
    }

    /// `Ok(None)` for constants, `Ok(Some(P))` for the fundamental period, `Err(())`
    /// for non-periodic factors.
    pub fn period(&self) -> core::result::Result<Option<f64>, ()> {
        match *self {
            Temporal::Const => Ok(None),
            Temporal::Sin { omega, .. } | Temporal::Cos { omega, .. } => Ok(Some(2.0 * PI / omega)),
            Temporal::CosSquared { omega, .. } => Ok(Some(PI / omega)),
            Temporal::Decay => Err(()),
        }
    }

    fn omega(&self) -> Option<f64> {
        match *self {
            Temporal::Sin { omega, .. } | Temporal::Cos { omega, .. } | Temporal::CosSquared { omega, .. } => {
                Some(omega)
            }
            _ => None,
        }
    }
}

/// Space factor of a term.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Spatial {
    #[default]
    Const,
    /// `x_axis`.
    Coord {
        #[cfg_attr(feature = "serde", serde(default))]
        axis: usize,
    },
    Sin { k: Vec<f64> },
    Cos { k: Vec<f64> },
    Tanh { k: Vec<f64> },
    /// `x_axis^degree`.
    Monomial {
        #[cfg_attr(feature = "serde", serde(default))]
        axis: usize,
        degree: u32,
    },
}

#[inline]
fn dot(k: &[f64], x: &[f64]) -> f64 {
    k.iter().zip(x).map(|(a, b)| a * b).sum()
}

#[inline]
fn powu(x: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..n {
        acc *= x;
    }
    acc
}

impl Spatial {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Spatial::Const => 1.0,
            Spatial::Coord { axis } => x[*axis],
            Spatial::Sin { k } => libm::sin(dot(k, x)),
            Spatial::Cos { k } => libm::cos(dot(k, x)),
            Spatial::Tanh { k } => libm::tanh(dot(k, x)),
            Spatial::Monomial { axis, degree } => powu(x[*axis], *degree),
        }
    }

    /// Polynomial degree; bounded factors count as degree 0.
    pub fn degree(&self) -> u32 {
        match self {
            Spatial::Coord { .. } => 1,
            Spatial::Monomial { degree, .. } => *degree,
            _ => 0,
        }
    }

    fn check_shape(&self, dim_x: usize) -> core::result::Result<(), String> {
        match self {
            Spatial::Const => Ok(()),
            Spatial::Coord { axis } | Spatial::Monomial { axis, .. } if *axis >= dim_x => {
                Err(format!("spatial axis {axis} out of range for dim_x = {dim_x}"))
            }
            Spatial::Sin { k } | Spatial::Cos { k } | Spatial::Tanh { k } if k.len() != dim_x => {
                Err(format!("wave vector has length {}, expected {dim_x}", k.len()))
            }
            _ => Ok(()),
        }
    }
}

/// State factor of a term; only allowed inside `f` and `g_ij`.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum StateFactor {
    #[default]
    None,
    Y,
    Z {
        #[cfg_attr(feature = "serde", serde(default))]
        index: usize,
    },
    TanhY,
    TanhZ {
        #[cfg_attr(feature = "serde", serde(default))]
        index: usize,
    },
}

impl StateFactor {
    #[inline]
    pub fn eval(&self, y: f64, z: &[f64]) -> f64 {
        match *self {
            StateFactor::None => 1.0,
            StateFactor::Y => y,
            StateFactor::Z { index } => z[index],
            StateFactor::TanhY => libm::tanh(y),
            StateFactor::TanhZ { index } => libm::tanh(z[index]),
        }
    }

    fn depends_on_z(&self, index: usize) -> bool {
        matches!(*self, StateFactor::Z { index: i } | StateFactor::TanhZ { index: i } if i == index)
    }

    fn depends_on_y(&self) -> bool {
        matches!(self, StateFactor::Y | StateFactor::TanhY)
    }
}

/// `weight * temporal(t) * spatial(x) * state(y, z)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Term {
    pub weight: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub time: Temporal,
    #[cfg_attr(feature = "serde", serde(default))]
    pub space: Spatial,
    #[cfg_attr(feature = "serde", serde(default))]
    pub state: StateFactor,
}

impl Term {
    pub fn constant(weight: f64) -> Self {
        Self { weight, time: Temporal::Const, space: Spatial::Const, state: StateFactor::None }
    }

    pub fn time(mut self, time: Temporal) -> Self {
        self.time = time;
        self
    }

    pub fn space(mut self, space: Spatial) -> Self {
        self.space = space;
        self
    }

    pub fn state(mut self, state: StateFactor) -> Self {
        self.state = state;
        self
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &[f64], y: f64, z: &[f64]) -> f64 {
        self.weight * self.time.eval(t) * self.space.eval(x) * self.state.eval(y, z)
    }

    fn describe(&self) -> String {
        format!("{:?} * {:?} * {:?} * {:?}", self.weight, self.time, self.space, self.state)
    }
}

/// Finite sum of terms; the empty sum is identically zero.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Expr {
    pub terms: Vec<Term>,
}

impl Expr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: vec![Term::constant(c)] }
    }

    pub fn term(term: Term) -> Self {
        Self { terms: vec![term] }
    }

    pub fn plus(mut self, term: Term) -> Self {
        self.terms.push(term);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.weight == 0.0)
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &[f64], y: f64, z: &[f64]) -> f64 {
        self.terms.iter().map(|term| term.eval(t, x, y, z)).sum()
    }

    #[inline]
    pub fn eval_tx(&self, t: f64, x: &[f64]) -> f64 {
        self.eval(t, x, 0.0, &[])
    }

    /// Time-uniform bound of `|expr(., x, .)|` for state-free expressions.
    pub fn abs_bound_at(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| libm::fabs(t.weight * t.space.eval(x))).sum()
    }

    /// Time-uniform bound of `|d expr / d z_index|` at `x`.
    pub fn z_slope_bound_at(&self, x: &[f64], index: usize) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.state.depends_on_z(index))
            .map(|t| libm::fabs(t.weight * t.space.eval(x)))
            .sum()
    }

    /// Time-uniform bound of `|d expr / d y|` at `x`.
    pub fn y_slope_bound_at(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.state.depends_on_y())
            .map(|t| libm::fabs(t.weight * t.space.eval(x)))
            .sum()
    }

    pub fn is_time_independent(&self) -> bool {
        self.terms.iter().all(|t| t.time == Temporal::Const || t.weight == 0.0)
    }

    pub fn uses_state(&self) -> bool {
        self.terms.iter().any(|t| t.state != StateFactor::None)
    }

    fn first_non_finite(&self, t: f64, x: &[f64], y: f64, z: &[f64]) -> Option<&Term> {
        self.terms.iter().find(|term| !term.eval(t, x, y, z).is_finite())
    }
}

/// Oscillation scale of the time variable in the coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Scale(f64),
    Averaged,
}

impl Default for Epsilon {
    fn default() -> Self {
        Epsilon::Scale(1.0)
    }
}

impl Epsilon {
    /// Fast time `t / epsilon`; identity in averaged mode.
    #[inline]
    pub fn fast_time(self, t: f64) -> f64 {
        match self {
            Epsilon::Scale(e) => t / e,
            Epsilon::Averaged => t,
        }
    }
}

#[cfg(feature = "serde")]
mod epsilon_serde {
    use super::Epsilon;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(rename_all = "snake_case")]
    enum Sentinel {
        Averaged,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Scale(f64),
        Sentinel(Sentinel),
    }

    impl Serialize for Epsilon {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            match *self {
                Epsilon::Scale(e) => Repr::Scale(e),
                Epsilon::Averaged => Repr::Sentinel(Sentinel::Averaged),
            }
            .serialize(s)
        }
    }

    impl<'de> Deserialize<'de> for Epsilon {
        fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            Ok(match Repr::deserialize(d)? {
                Repr::Scale(e) => Epsilon::Scale(e),
                Repr::Sentinel(Sentinel::Averaged) => Epsilon::Averaged,
            })
        }
    }
}

/// Which coefficient of the problem to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficient {
    /// `b`, a vector of length `dim_x`.
    Drift,
    /// `h_ij`, a vector of length `dim_x`.
    DriftQv(usize, usize),
    /// `sigma`, a `dim_x x dim_b` matrix.
    Vol,
    /// `f`, scalar.
    Driver,
    /// `g_ij`, scalar.
    DriverQv(usize, usize),
    /// `phi`, scalar, time ignored.
    Terminal,
    /// `S`, scalar, evaluated at real time.
    Obstacle,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientValue {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

/// One evaluation of the pair `(H, F)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverEval {
    pub h: SymMatrix,
    pub f: f64,
}

/// Index of the unordered pair `(i, j)` in the packed upper-triangle tables.
#[inline]
pub fn pair_index(dim_b: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * dim_b - i - 1) / 2 + j
}

/// Full problem data. Only the upper triangles of `h` and `g` are stored, so the
/// symmetry `h_ij = h_ji`, `g_ij = g_ji` holds by construction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProblemSpec {
    #[cfg_attr(feature = "serde", serde(default = "one"))]
    pub dim_x: usize,
    #[cfg_attr(feature = "serde", serde(default = "one"))]
    pub dim_b: usize,
    pub horizon: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub epsilon: Epsilon,
    /// `b`: one expression per space component.
    #[cfg_attr(feature = "serde", serde(rename = "b", default))]
    pub drift: Vec<Expr>,
    /// `h_ij` for `i <= j`, each a vector of `dim_x` expressions.
    #[cfg_attr(feature = "serde", serde(rename = "h", default))]
    pub drift_qv: Vec<Vec<Expr>>,
    /// `sigma`: `dim_x` rows of `dim_b` expressions.
    #[cfg_attr(feature = "serde", serde(rename = "sigma", default))]
    pub vol: Vec<Vec<Expr>>,
    #[cfg_attr(feature = "serde", serde(rename = "f", default))]
    pub driver: Expr,
    /// `g_ij` for `i <= j`.
    #[cfg_attr(feature = "serde", serde(rename = "g", default))]
    pub driver_qv: Vec<Expr>,
    #[cfg_attr(feature = "serde", serde(rename = "phi", default))]
    pub terminal: Expr,
    #[cfg_attr(feature = "serde", serde(default))]
    pub obstacle: Expr,
    /// Declared Lipschitz constant `L`.
    pub lipschitz: f64,
    /// Declared growth exponent `m`.
    pub growth_m: u32,
    /// Declared upper bound `c` of the obstacle.
    pub obstacle_cap: f64,
}

#[cfg(feature = "serde")]
fn one() -> usize {
    1
}

impl ProblemSpec {
    /// Scalar problem (`dim_x = dim_b = 1`) with every coefficient zero.
    pub fn scalar(horizon: f64) -> Self {
        Self {
            dim_x: 1,
            dim_b: 1,
            horizon,
            epsilon: Epsilon::Scale(1.0),
            drift: vec![Expr::zero()],
            drift_qv: vec![vec![Expr::zero()]],
            vol: vec![vec![Expr::zero()]],
            driver: Expr::zero(),
            driver_qv: vec![Expr::zero()],
            terminal: Expr::zero(),
            obstacle: Expr::zero(),
            lipschitz: 1.0,
            growth_m: 1,
            obstacle_cap: 0.0,
        }
    }

    pub fn with_drift(mut self, b: Expr) -> Self {
        self.drift = vec![b];
        self
    }

    pub fn with_drift_qv(mut self, h: Expr) -> Self {
        self.drift_qv = vec![vec![h]];
        self
    }

    pub fn with_vol(mut self, sigma: Expr) -> Self {
        self.vol = vec![vec![sigma]];
        self
    }

    pub fn with_driver(mut self, f: Expr) -> Self {
        self.driver = f;
        self
    }

    pub fn with_driver_qv(mut self, g: Expr) -> Self {
        self.driver_qv = vec![g];
        self
    }

    pub fn with_terminal(mut self, phi: Expr) -> Self {
        self.terminal = phi;
        self
    }

    pub fn with_obstacle(mut self, s: Expr) -> Self {
        self.obstacle = s;
        self
    }

    pub fn with_epsilon(mut self, epsilon: Epsilon) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_constants(mut self, lipschitz: f64, growth_m: u32, obstacle_cap: f64) -> Self {
        self.lipschitz = lipschitz;
        self.growth_m = growth_m;
        self.obstacle_cap = obstacle_cap;
        self
    }

    pub fn pairs(&self) -> usize {
        self.dim_b * (self.dim_b + 1) / 2
    }

    /// Fills omitted tables with zeros and checks shapes and catalog rules.
    pub fn normalized(mut self) -> Result<Self> {
        let (n, d) = (self.dim_x, self.dim_b);
        if n == 0 || d == 0 {
            return Err(Error::InvalidSpec("dim_x and dim_b must be positive".into()));
        }
        let pairs = self.pairs();
        if self.drift.is_empty() {
            self.drift = vec![Expr::zero(); n];
        }
        if self.drift_qv.is_empty() {
            self.drift_qv = vec![vec![Expr::zero(); n]; pairs];
        }
        if self.vol.is_empty() {
            self.vol = vec![vec![Expr::zero(); d]; n];
        }
        if self.driver_qv.is_empty() {
            self.driver_qv = vec![Expr::zero(); pairs];
        }
        self.check_structure()?;
        Ok(self)
    }

    /// Shape and catalog checks: state factors only in `f`, `g`; bounded-slope space
    /// factors in `b`, `h`, `sigma`, `S`; degree at most `m + 1` in `f`, `g`, `phi`;
    /// positive frequencies.
    pub fn check_structure(&self) -> Result<()> {
        let (n, d) = (self.dim_x, self.dim_b);
        let shape = |found: usize, expected: usize, what: &'static str| {
            if found == expected {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected, found, what })
            }
        };
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidSpec(format!("horizon must be positive, got {}", self.horizon)));
        }
        if let Epsilon::Scale(e) = self.epsilon {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::InvalidSpec(format!("epsilon must lie in (0, 1], got {e}")));
            }
        }
        if !(self.lipschitz.is_finite() && self.lipschitz > 0.0) {
            return Err(Error::InvalidSpec("declared Lipschitz constant must be positive".into()));
        }
        shape(self.drift.len(), n, "b")?;
        shape(self.drift_qv.len(), self.pairs(), "h pairs")?;
        for h in &self.drift_qv {
            shape(h.len(), n, "h component")?;
        }
        shape(self.vol.len(), n, "sigma rows")?;
        for row in &self.vol {
            shape(row.len(), d, "sigma columns")?;
        }
        shape(self.driver_qv.len(), self.pairs(), "g pairs")?;

        let forward = self.drift.iter().chain(self.drift_qv.iter().flatten()).chain(self.vol.iter().flatten());
        for expr in forward.chain(core::iter::once(&self.obstacle)) {
            for term in &expr.terms {
                self.check_term(term)?;
                if term.state != StateFactor::None {
                    return Err(Error::InvalidSpec(format!(
                        "state factor {:?} is only allowed in f and g",
                        term.state
                    )));
                }
                if term.space.degree() > 1 {
                    return Err(Error::InvalidSpec(format!(
                        "monomial of degree {} in a globally Lipschitz coefficient",
                        term.space.degree()
                    )));
                }
            }
        }
        for term in &self.terminal.terms {
            self.check_term(term)?;
            if term.state != StateFactor::None {
                return Err(Error::InvalidSpec("phi cannot depend on (y, z)".into()));
            }
        }
        for expr in core::iter::once(&self.driver).chain(self.driver_qv.iter()).chain(core::iter::once(&self.terminal)) {
            for term in &expr.terms {
                self.check_term(term)?;
                if term.space.degree() > self.growth_m + 1 {
                    return Err(Error::InvalidSpec(format!(
                        "monomial of degree {} exceeds m + 1 = {}",
                        term.space.degree(),
                        self.growth_m + 1
                    )));
                }
                match term.state {
                    StateFactor::Z { index } | StateFactor::TanhZ { index } if index >= d => {
                        return Err(Error::InvalidSpec(format!("z index {index} out of range for dim_b = {d}")))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn check_term(&self, term: &Term) -> Result<()> {
        if !term.weight.is_finite() {
            return Err(Error::InvalidSpec("term weight must be finite".into()));
        }
        if let Some(omega) = term.time.omega() {
            if !(omega > 0.0 && omega.is_finite()) {
                return Err(Error::InvalidSpec(format!("trigonometric frequency must be positive, got {omega}")));
            }
        }
        term.space.check_shape(self.dim_x).map_err(Error::InvalidSpec)
    }

    /// Span of fast time visited on `[0, T]`.
    pub fn fast_time_span(&self) -> f64 {
        match self.epsilon {
            Epsilon::Scale(e) => self.horizon * (1.0f64).max(1.0 / e),
            Epsilon::Averaged => self.horizon,
        }
    }

    pub fn is_time_independent(&self) -> bool {
        self.drift
            .iter()
            .chain(self.drift_qv.iter().flatten())
            .chain(self.vol.iter().flatten())
            .chain(core::iter::once(&self.driver))
            .chain(self.driver_qv.iter())
            .all(Expr::is_time_independent)
    }

    /// Every temporal factor appearing in the oscillating coefficients.
    pub fn temporal_factors(&self) -> impl Iterator<Item = &Temporal> {
        self.drift
            .iter()
            .chain(self.drift_qv.iter().flatten())
            .chain(self.vol.iter().flatten())
            .chain(core::iter::once(&self.driver))
            .chain(self.driver_qv.iter())
            .flat_map(|e| e.terms.iter().filter(|t| t.weight != 0.0).map(|t| &t.time))
    }

    #[inline]
    pub fn terminal_at(&self, x: &[f64]) -> f64 {
        self.terminal.eval_tx(0.0, x)
    }

    #[inline]
    pub fn obstacle_at(&self, t: f64, x: &[f64]) -> f64 {
        self.obstacle.eval_tx(t, x)
    }

    fn expr_for(&self, which: Coefficient) -> Result<Vec<&Expr>> {
        let pair = |i: usize, j: usize| -> Result<usize> {
            if i >= self.dim_b || j >= self.dim_b {
                Err(Error::InvalidArgument(format!("pair ({i}, {j}) out of range for dim_b = {}", self.dim_b)))
            } else {
                Ok(pair_index(self.dim_b, i, j))
            }
        };
        Ok(match which {
            Coefficient::Drift => self.drift.iter().collect(),
            Coefficient::DriftQv(i, j) => self.drift_qv[pair(i, j)?].iter().collect(),
            Coefficient::Vol => self.vol.iter().flatten().collect(),
            Coefficient::Driver => vec![&self.driver],
            Coefficient::DriverQv(i, j) => vec![&self.driver_qv[pair(i, j)?]],
            Coefficient::Terminal => vec![&self.terminal],
            Coefficient::Obstacle => vec![&self.obstacle],
        })
    }
}

/// Evaluates one coefficient at `(t, x, y, z)`. `t` is the already rescaled time for the
/// oscillating coefficients and real time for the obstacle.
pub fn eval_coefficient(
    spec: &ProblemSpec,
    which: Coefficient,
    t: f64,
    x: &[f64],
    y: f64,
    z: &[f64],
) -> Result<CoefficientValue> {
    if x.len() != spec.dim_x {
        return Err(Error::DimensionMismatch { expected: spec.dim_x, found: x.len(), what: "x" });
    }
    let exprs = spec.expr_for(which)?;
    let allows_state = matches!(which, Coefficient::Driver | Coefficient::DriverQv(..));
    if !allows_state && exprs.iter().any(|e| e.uses_state()) {
        return Err(Error::InvalidSpec(format!("{which:?} carries a state factor")));
    }
    if allows_state && z.len() != spec.dim_b {
        return Err(Error::DimensionMismatch { expected: spec.dim_b, found: z.len(), what: "z" });
    }
    let t = if which == Coefficient::Terminal { 0.0 } else { t };
    let zs: &[f64] = if allows_state { z } else { &[] };
    let values: Vec<f64> = exprs.iter().map(|e| e.eval(t, x, y, zs)).collect();
    Ok(match which {
        Coefficient::Drift | Coefficient::DriftQv(..) => CoefficientValue::Vector(values),
        Coefficient::Vol => CoefficientValue::Matrix(values.chunks(spec.dim_b).map(|r| r.to_vec()).collect()),
        _ => CoefficientValue::Scalar(values[0]),
    })
}

fn non_finite_error(spec: &ProblemSpec, t: f64, x: &[f64], y: f64, z: &[f64]) -> Error {
    let tables: [(&str, Vec<&Expr>); 5] = [
        ("b", spec.drift.iter().collect()),
        ("h", spec.drift_qv.iter().flatten().collect()),
        ("sigma", spec.vol.iter().flatten().collect()),
        ("f", vec![&spec.driver]),
        ("g", spec.driver_qv.iter().collect()),
    ];
    for (name, exprs) in tables {
        for expr in exprs {
            if let Some(term) = expr.first_non_finite(t, x, y, z) {
                return Error::NumericRange { term: format!("{name}: {}", term.describe()) };
            }
        }
    }
    Error::NumericRange { term: String::from("driver assembly (overflow in products)") }
}

/// Assembles `(H, F)` at the already rescaled time `t`.
pub fn assemble_driver(
    spec: &ProblemSpec,
    sigma_set: &CovarianceSet,
    t: f64,
    x: &[f64],
    v: f64,
    p: &[f64],
    a: &SymMatrix,
) -> Result<DriverEval> {
    let (n, d) = (spec.dim_x, spec.dim_b);
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len(), what: "x" });
    }
    if p.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: p.len(), what: "p" });
    }
    if a.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: a.dim(), what: "A" });
    }
    if sigma_set.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: sigma_set.dim(), what: "covariance set" });
    }

    let sigma: Vec<Vec<f64>> = spec.vol.iter().map(|row| row.iter().map(|e| e.eval_tx(t, x)).collect()).collect();
    // z = p sigma, a row vector of length d.
    let z: Vec<f64> = (0..d).map(|k| (0..n).map(|i| p[i] * sigma[i][k]).sum()).collect();
    // A sigma, n x d.
    let a_sigma: Vec<Vec<f64>> =
        (0..n).map(|i| (0..d).map(|k| (0..n).map(|l| a.get(i, l) * sigma[l][k]).sum()).collect()).collect();

    let h = SymMatrix::from_fn(d, |i, j| {
        let quad: f64 = (0..n).map(|l| sigma[l][i] * a_sigma[l][j]).sum();
        let k = pair_index(d, i, j);
        let ph: f64 = spec.drift_qv[k].iter().zip(p).map(|(e, pi)| pi * e.eval_tx(t, x)).sum();
        quad + 2.0 * ph + 2.0 * spec.driver_qv[k].eval(t, x, v, &z)
    });
    let pb: f64 = spec.drift.iter().zip(p).map(|(e, pi)| pi * e.eval_tx(t, x)).sum();
    let f = sigma_set.g_unchecked(&h) + pb + spec.driver.eval(t, x, v, &z);
    if !(f.is_finite() && h.is_finite()) {
        return Err(non_finite_error(spec, t, x, v, &z));
    }
    Ok(DriverEval { h, f })
}

/// Scalar (`dim_x = dim_b = 1`) driver assembly without allocation. Returns `(H, F)`.
/// The caller guarantees the scalar shape.
#[inline]
pub fn assemble_driver_scalar(
    spec: &ProblemSpec,
    sigma_set: &CovarianceSet,
    t: f64,
    x: f64,
    v: f64,
    p: f64,
    a: f64,
) -> (f64, f64) {
    let xs = [x];
    let sigma = spec.vol[0][0].eval_tx(t, &xs);
    let z = [p * sigma];
    let h = sigma * a * sigma + 2.0 * p * spec.drift_qv[0][0].eval_tx(t, &xs) + 2.0 * spec.driver_qv[0].eval(t, &xs, v, &z);
    let g = 0.5 * (sigma_set.upper()[0] * h.max(0.0) + sigma_set.lower()[0] * h.min(0.0));
    let f = g + p * spec.drift[0].eval_tx(t, &xs) + spec.driver.eval(t, &xs, v, &z);
    (h, f)
}

/// Checked variant of [`assemble_driver_scalar`] reporting the offending term on overflow.
pub fn assemble_driver_scalar_checked(
    spec: &ProblemSpec,
    sigma_set: &CovarianceSet,
    t: f64,
    x: f64,
    v: f64,
    p: f64,
    a: f64,
) -> Result<(f64, f64)> {
    let (h, f) = assemble_driver_scalar(spec, sigma_set, t, x, v, p, a);
    if h.is_finite() && f.is_finite() {
        Ok((h, f))
    } else {
        let z = p * spec.vol[0][0].eval_tx(t, &[x]);
        Err(non_finite_error(spec, t, &[x], v, &[z]))
    }
}

/// Region sampled by [`validate_assumptions`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleRegion {
    /// Interval for every space coordinate.
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
    /// Fast times are drawn from `[0, t_max]`.
    pub t_max: f64,
}

impl SampleRegion {
    pub fn for_spec(spec: &ProblemSpec, x: (f64, f64)) -> Self {
        Self { x, y: (-10.0, 10.0), z: (-10.0, 10.0), t_max: spec.fast_time_span().max(2.0 * PI) }
    }
}

struct Sampler<'a> {
    rng: ChaCha8Rng,
    region: &'a SampleRegion,
    dim_x: usize,
    dim_b: usize,
}

impl Sampler<'_> {
    fn uniform(&mut self, (lo, hi): (f64, f64)) -> f64 {
        if hi > lo {
            self.rng.gen_range(lo..=hi)
        } else {
            lo
        }
    }

    fn time(&mut self) -> f64 {
        self.uniform((0.0, self.region.t_max))
    }

    fn point(&mut self) -> Vec<f64> {
        (0..self.dim_x).map(|_| self.uniform(self.region.x)).collect()
    }

    /// Pair of points; every other pair is a close pair so local slopes are probed.
    fn point_pair(&mut self, close: bool) -> (Vec<f64>, Vec<f64>) {
        let x = self.point();
        let width = (self.region.x.1 - self.region.x.0).max(1e-12);
        let xp = if close {
            x.iter().map(|&xi| xi + width * 1e-4 * self.rng.gen_range(-1.0..=1.0)).collect()
        } else {
            self.point()
        };
        (x, xp)
    }

    fn state(&mut self) -> (f64, Vec<f64>) {
        let y = self.uniform(self.region.y);
        let z = (0..self.dim_b).map(|_| self.uniform(self.region.z)).collect();
        (y, z)
    }

    fn close_state(&mut self, y: f64, z: &[f64]) -> (f64, Vec<f64>) {
        let wy = (self.region.y.1 - self.region.y.0).max(1e-12) * 1e-4;
        let wz = (self.region.z.1 - self.region.z.0).max(1e-12) * 1e-4;
        let yp = y + wy * self.rng.gen_range(-1.0..=1.0);
        let zp = z.iter().map(|&zi| zi + wz * self.rng.gen_range(-1.0..=1.0)).collect();
        (yp, zp)
    }
}

fn norm(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

fn within(observed: f64, bound: f64) -> bool {
    observed <= bound * (1.0 + 1e-9) + 1e-12
}

/// Samples the declared constants `(L, m, c)` against the data: Lipschitz ratios of
/// `b, h, sigma` and of `f, g, phi` (with the polynomial weight `1 + |x|^m + |x'|^m`),
/// their size at the origin, the obstacle's slope and cap, and `phi - S(T, .) >= 0`.
/// Deterministic in `seed`.
pub fn validate_assumptions(spec: &ProblemSpec, region: &SampleRegion, samples: usize, seed: u64) -> ValidationReport {
    let mut report = ValidationReport { seed: Some(seed), samples, ..Default::default() };
    if samples < 2 {
        report.push_note("samples", false, "need at least 2 samples");
        return report;
    }
    if let Err(e) = spec.check_structure() {
        report.push_note("catalog.structure", false, format!("{e}"));
        return report;
    }
    report.push_note("catalog.structure", true, "ok");

    let lip = spec.lipschitz;
    let m = spec.growth_m as i32;
    let mut sampler = Sampler { rng: ChaCha8Rng::seed_from_u64(seed), region, dim_x: spec.dim_x, dim_b: spec.dim_b };
    let origin = vec![0.0; spec.dim_x];
    let zero_z = vec![0.0; spec.dim_b];

    // (H1): b, h, sigma.
    let forward: [(&str, Vec<&Expr>); 3] = [
        ("b", spec.drift.iter().collect()),
        ("h", spec.drift_qv.iter().flatten().collect()),
        ("sigma", spec.vol.iter().flatten().collect()),
    ];
    for (name, exprs) in forward.iter() {
        let (mut ratio, mut at_origin) = (0.0f64, 0.0f64);
        for k in 0..samples {
            let s = sampler.time();
            let (x, xp) = sampler.point_pair(k % 2 == 1);
            let dx = norm(&x, &xp);
            for expr in exprs {
                if dx > 0.0 {
                    ratio = ratio.max(libm::fabs(expr.eval_tx(s, &x) - expr.eval_tx(s, &xp)) / dx);
                }
                at_origin = at_origin.max(libm::fabs(expr.eval_tx(s, &origin)));
            }
        }
        report.push(format!("H1.{name}.lipschitz"), ratio, lip, within(ratio, lip));
        report.push(format!("H1.{name}.at_origin"), at_origin, lip, within(at_origin, lip));
    }

    // (H2): f, g, phi with polynomial weight in x.
    let backward: [(&str, Vec<&Expr>, bool); 3] = [
        ("f", vec![&spec.driver], true),
        ("g", spec.driver_qv.iter().collect(), true),
        ("phi", vec![&spec.terminal], false),
    ];
    for (name, exprs, timed) in backward.iter() {
        let (mut ratio, mut at_origin) = (0.0f64, 0.0f64);
        for k in 0..samples {
            let s = if *timed { sampler.time() } else { 0.0 };
            let close = k % 2 == 1;
            let (x, xp) = sampler.point_pair(close);
            let (y, z) = sampler.state();
            let (yp, zp) = if close { sampler.close_state(y, &z) } else { sampler.state() };
            let weight_x = 1.0 + libm::pow(norm(&x, &origin), m as f64) + libm::pow(norm(&xp, &origin), m as f64);
            let denom = weight_x * norm(&x, &xp) + libm::fabs(y - yp) + norm(&z, &zp);
            for expr in exprs {
                if denom > 0.0 {
                    ratio = ratio.max(libm::fabs(expr.eval(s, &x, y, &z) - expr.eval(s, &xp, yp, &zp)) / denom);
                }
                at_origin = at_origin.max(libm::fabs(expr.eval(s, &origin, 0.0, &zero_z)));
            }
        }
        report.push(format!("H2.{name}.lipschitz"), ratio, lip, within(ratio, lip));
        report.push(format!("H2.{name}.at_origin"), at_origin, lip, within(at_origin, lip));
    }

    // (H3): obstacle at real times in [0, T].
    let (mut ratio, mut s_max, mut gap_min) = (0.0f64, f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..samples {
        let t = sampler.uniform((0.0, spec.horizon));
        let (x, xp) = sampler.point_pair(k % 2 == 1);
        let dx = norm(&x, &xp);
        let s_val = spec.obstacle_at(t, &x);
        if dx > 0.0 {
            ratio = ratio.max(libm::fabs(s_val - spec.obstacle_at(t, &xp)) / dx);
        }
        s_max = s_max.max(s_val);
        gap_min = gap_min.min(spec.terminal_at(&x) - spec.obstacle_at(spec.horizon, &x));
    }
    report.push("H3.obstacle.lipschitz", ratio, lip, within(ratio, lip));
    report.push("H3.obstacle.cap", s_max, spec.obstacle_cap, s_max <= spec.obstacle_cap);
    report.push("H3.terminal_dominates", gap_min, 0.0, gap_min >= 0.0);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;

    fn sigma_14() -> CovarianceSet {
        CovarianceSet::interval(1.0, 4.0).unwrap()
    }

    fn tanh1() -> Spatial {
        Spatial::Tanh { k: vec![1.0] }
    }

    #[test]
    fn eval_examples() {
        let spec = ProblemSpec::scalar(1.0)
            .with_drift(Expr::term(Term::constant(1.0).time(Temporal::Sin { omega: 1.0, phase: 0.0 }).space(tanh1())))
            .with_driver(Expr::term(
                Term::constant(1.0).time(Temporal::CosSquared { omega: 1.0, phase: 0.0 }).state(StateFactor::Y),
            ))
            .with_terminal(Expr::term(Term::constant(1.0).space(Spatial::Monomial { axis: 0, degree: 2 })));
        assert_eq!(
            eval_coefficient(&spec, Coefficient::Drift, FRAC_PI_2, &[0.0], 0.0, &[0.0]).unwrap(),
            CoefficientValue::Vector(vec![0.0])
        );
        assert_eq!(
            eval_coefficient(&spec, Coefficient::Driver, 0.0, &[0.7], 3.0, &[0.0]).unwrap(),
            CoefficientValue::Scalar(3.0)
        );
        assert_eq!(
            eval_coefficient(&spec, Coefficient::Terminal, 5.0, &[2.0], 0.0, &[0.0]).unwrap(),
            CoefficientValue::Scalar(4.0)
        );
    }

    #[test]
    fn state_factor_outside_backward_coefficients_is_rejected() {
        let mut spec = ProblemSpec::scalar(1.0);
        spec.drift = vec![Expr::term(Term::constant(1.0).state(StateFactor::Y))];
        assert!(matches!(
            eval_coefficient(&spec, Coefficient::Drift, 0.0, &[0.0], 1.0, &[0.0]),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(spec.check_structure(), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn structure_rules() {
        let quad = Term::constant(1.0).space(Spatial::Monomial { axis: 0, degree: 2 });
        let spec = ProblemSpec::scalar(1.0).with_vol(Expr::term(quad.clone()));
        assert!(spec.check_structure().is_err());
        let spec = ProblemSpec::scalar(1.0).with_terminal(Expr::term(quad.clone()));
        assert!(spec.check_structure().is_ok());
        let cubic = Term::constant(1.0).space(Spatial::Monomial { axis: 0, degree: 3 });
        let spec = ProblemSpec::scalar(1.0).with_terminal(Expr::term(cubic)).with_constants(1.0, 1, 0.0);
        assert!(spec.check_structure().is_err());
        let spec = ProblemSpec::scalar(1.0).with_driver(Expr::term(
            Term::constant(1.0).time(Temporal::Sin { omega: 0.0, phase: 0.0 }),
        ));
        assert!(spec.check_structure().is_err());
        let spec = ProblemSpec::scalar(1.0).with_epsilon(Epsilon::Scale(1.5));
        assert!(spec.check_structure().is_err());
    }

    #[test]
    fn assemble_examples() {
        let sigma = sigma_14();
        let unit_vol = ProblemSpec::scalar(1.0).with_vol(Expr::constant(1.0));
        let d = assemble_driver(&unit_vol, &sigma, 0.0, &[0.3], 0.0, &[0.0], &SymMatrix::scalar(2.0)).unwrap();
        assert_eq!(d.h, SymMatrix::scalar(2.0));
        assert_eq!(d.f, 4.0);

        let drift_only = ProblemSpec::scalar(1.0).with_drift(Expr::constant(1.0));
        let d = assemble_driver(&drift_only, &sigma, 0.0, &[0.3], 0.0, &[2.0], &SymMatrix::zeros(1)).unwrap();
        assert_eq!(d.f, 2.0);

        let g_state = unit_vol.clone().with_driver_qv(Expr::term(Term::constant(1.0).state(StateFactor::Y)));
        let d = assemble_driver(&g_state, &sigma, 0.0, &[0.3], 1.0, &[0.0], &SymMatrix::zeros(1)).unwrap();
        assert_eq!(d.h, SymMatrix::scalar(2.0));
        assert_eq!(d.f, 4.0);
    }

    #[test]
    fn scalar_fast_path_matches_general_assembly() {
        let spec = ProblemSpec::scalar(1.0)
            .with_drift(Expr::term(Term::constant(0.7).time(Temporal::Sin { omega: 2.0, phase: 0.1 }).space(tanh1())))
            .with_drift_qv(Expr::term(Term::constant(-0.3).space(Spatial::Cos { k: vec![0.5] })))
            .with_vol(Expr::constant(1.0).plus(Term::constant(0.25).space(tanh1())))
            .with_driver(Expr::term(Term::constant(1.0).state(StateFactor::TanhZ { index: 0 })))
            .with_driver_qv(Expr::term(
                Term::constant(0.4).time(Temporal::Cos { omega: 1.0, phase: 0.0 }).state(StateFactor::Y),
            ));
        let sigma = CovarianceSet::interval(0.5, 2.0).unwrap();
        for k in 0..50 {
            let t = 0.37 * k as f64;
            let x = -2.0 + 0.09 * k as f64;
            let (v, p, a) = (0.2 * k as f64 - 3.0, 1.5 - 0.05 * k as f64, (k as f64 * 0.7).sin() * 3.0);
            let general = assemble_driver(&spec, &sigma, t, &[x], v, &[p], &SymMatrix::scalar(a)).unwrap();
            let (h, f) = assemble_driver_scalar(&spec, &sigma, t, x, v, p, a);
            assert!((general.h.get(0, 0) - h).abs() <= 1e-14 * (1.0 + h.abs()));
            assert!((general.f - f).abs() <= 1e-14 * (1.0 + f.abs()));
        }
    }

    #[test]
    fn multi_dimensional_assembly_is_symmetric() {
        // n = 2, d = 2 with constant data: sigma = [[1, 0.5], [0, 2]], h_01 = (1, 0), g_11 = y.
        let mut spec = ProblemSpec::scalar(1.0);
        spec.dim_x = 2;
        spec.dim_b = 2;
        spec.drift = vec![Expr::constant(1.0), Expr::constant(-1.0)];
        spec.vol = vec![vec![Expr::constant(1.0), Expr::constant(0.5)], vec![Expr::zero(), Expr::constant(2.0)]];
        spec.drift_qv = vec![vec![Expr::zero(); 2], vec![Expr::constant(1.0), Expr::zero()], vec![Expr::zero(); 2]];
        spec.driver_qv = vec![Expr::zero(), Expr::zero(), Expr::term(Term::constant(1.0).state(StateFactor::Y))];
        let spec = spec.normalized().unwrap();
        let sigma = CovarianceSet::new(vec![1.0, 1.0], vec![2.0, 3.0]).unwrap();
        let a = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, -1.0]]).unwrap();
        let d = assemble_driver(&spec, &sigma, 0.0, &[0.1, 0.2], 2.0, &[1.0, 2.0], &a).unwrap();
        // sigma^T A sigma: column vectors c0 = (1, 0), c1 = (0.5, 2).
        // c0.A.c0 = 1, c0.A.c1 = 0.5 + 0.5*2 = 1.5, c1.A.c1 = 0.25 + 2*0.5*0.5*2 - 4 = -2.75.
        assert_eq!(d.h.get(0, 0), 1.0);
        assert_eq!(d.h.get(0, 1), 1.5 + 2.0 * 1.0);
        assert_eq!(d.h.get(1, 1), -2.75 + 2.0 * 2.0);
        assert_eq!(d.h.get(1, 0), d.h.get(0, 1));
        // G = 1/2 (2*1 + 3*1.25), pb = 1 - 2.
        assert_eq!(d.f, 0.5 * (2.0 + 3.0 * 1.25) - 1.0);
    }

    #[test]
    fn overflowing_monomial_names_the_term() {
        let spec = ProblemSpec::scalar(1.0)
            .with_vol(Expr::constant(1.0))
            .with_driver(Expr::term(Term::constant(1.0).space(Spatial::Monomial { axis: 0, degree: 2 })));
        let err = assemble_driver(&spec, &sigma_14(), 0.0, &[1e200], 0.0, &[0.0], &SymMatrix::zeros(1)).unwrap_err();
        match err {
            Error::NumericRange { term } => assert!(term.starts_with("f:")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn validation_examples() {
        let region = SampleRegion { x: (-3.0, 3.0), y: (-5.0, 5.0), z: (-5.0, 5.0), t_max: 10.0 };
        let spec = ProblemSpec::scalar(1.0)
            .with_drift(Expr::term(Term::constant(1.0).space(tanh1())))
            .with_obstacle(Expr::constant(-1.0));
        let report = validate_assumptions(&spec, &region, 500, 3);
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.seed, Some(3));
        assert!(report.check("H1.b.lipschitz").unwrap().observed <= 1.0);

        let capped = ProblemSpec::scalar(1.0).with_obstacle(Expr::constant(2.0)).with_terminal(Expr::constant(5.0));
        let capped = capped.with_constants(1.0, 1, 1.0);
        let report = validate_assumptions(&capped, &region, 100, 3);
        assert!(!report.check("H3.obstacle.cap").unwrap().passed);

        let quad = ProblemSpec::scalar(1.0)
            .with_terminal(Expr::term(Term::constant(1.0).space(Spatial::Monomial { axis: 0, degree: 2 })))
            .with_obstacle(Expr::constant(-1.0));
        for bounds in [(-1.0, 1.0), (-50.0, 50.0)] {
            let r = SampleRegion { x: bounds, ..region.clone() };
            let report = validate_assumptions(&quad, &r, 300, 11);
            assert!(report.check("H3.terminal_dominates").unwrap().passed);
            assert!(report.passed(), "{report:?}");
        }
    }

    #[test]
    fn validation_detects_steep_drift() {
        let region = SampleRegion { x: (-3.0, 3.0), y: (-1.0, 1.0), z: (-1.0, 1.0), t_max: 10.0 };
        let spec = ProblemSpec::scalar(1.0)
            .with_drift(Expr::term(Term::constant(1.0).space(Spatial::Tanh { k: vec![3.0] })))
            .with_obstacle(Expr::constant(-1.0));
        let report = validate_assumptions(&spec, &region, 400, 1);
        assert!(!report.check("H1.b.lipschitz").unwrap().passed);
    }

    #[test]
    fn validation_is_deterministic_in_seed() {
        let region = SampleRegion { x: (-2.0, 2.0), y: (-1.0, 1.0), z: (-1.0, 1.0), t_max: 5.0 };
        let spec = ProblemSpec::scalar(1.0)
            .with_driver(Expr::term(Term::constant(0.5).state(StateFactor::TanhZ { index: 0 })))
            .with_obstacle(Expr::constant(-1.0));
        assert_eq!(validate_assumptions(&spec, &region, 200, 9), validate_assumptions(&spec, &region, 200, 9));
    }

    #[test]
    fn fast_time_rescaling_is_consistent() {
        let spec = ProblemSpec::scalar(1.0)
            .with_vol(Expr::constant(1.0).plus(Term::constant(0.5).time(Temporal::Sin { omega: 1.0, phase: 0.0 })))
            .with_driver(Expr::term(
                Term::constant(1.0).time(Temporal::CosSquared { omega: 3.0, phase: 0.2 }).state(StateFactor::Y),
            ));
        let sigma = sigma_14();
        let eps0 = 0.05;
        for k in 0..40 {
            let r = 0.13 * k as f64;
            let slow = Epsilon::Scale(1.0).fast_time(r);
            let fast = Epsilon::Scale(eps0).fast_time(r * eps0);
            let (h1, f1) = assemble_driver_scalar(&spec, &sigma, slow, 0.4, 1.3, 0.2, 0.9);
            let (h2, f2) = assemble_driver_scalar(&spec, &sigma, fast, 0.4, 1.3, 0.2, 0.9);
            assert!((h1 - h2).abs() < 1e-12 && (f1 - f2).abs() < 1e-12);
        }
    }
}
