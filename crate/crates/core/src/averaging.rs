//! Time-averaged driver
//! `F_bar(x, v, p, A) = lim_{s -> inf} 1/s int_0^s F(r, x, v, p, A) dr`
//! where `F(r, .) = p b(r, x) + f(r, x, v, p sigma(r, x)) + G(H(r, x, v, p, A))`.
//!
//! The whole composed integrand is integrated; `G` is never averaged term by term.

use alloc::vec::Vec;
use crate::coefficients::{assemble_driver, assemble_driver_scalar_checked, ProblemSpec};
use crate::error::{Error, Result};
use crate::g::{CovarianceSet, SymMatrix};
use crate::quadrature::KinkAware;

/// Panel-doubling tolerance for the one-period quadrature.
pub const PERIODIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "mode", rename_all = "snake_case"))]
pub enum AveragingMode {
    /// Quadrature over one common period `period`.
    Periodic { period: f64 },
    /// Cesaro means at geometrically doubling horizons.
    Cesaro { max_horizon: f64, tol: f64 },
}

/// Value of one average together with its convergence residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Average {
    pub value: f64,
    /// Periodic mode: change of the last panel doubling. Cesaro mode: `|S(2s) - S(s)|`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedDriver {
    base: ProblemSpec,
    mode: AveragingMode,
    /// First horizon of the Cesaro doubling.
    cesaro_start: f64,
}

/// Common period of all temporal factors: `Ok(None)` when the problem is time independent,
/// `Err` when a factor is not periodic or the frequencies are not commensurate.
pub fn common_period(spec: &ProblemSpec) -> core::result::Result<Option<f64>, ()> {
    let mut periods: Vec<f64> = Vec::new();
    for temporal in spec.temporal_factors() {
        if let Some(p) = temporal.period()? {
            periods.push(p);
        }
    }
    let Some(&base) = periods.first() else {
        return Ok(None);
    };
    let mut multiple: u64 = 1;
    for &p in &periods[1..] {
        let (num, _den) = rational_approx(p / base, 1000).ok_or(())?;
        multiple = lcm(multiple, num);
        if multiple > 1_000_000 {
            return Err(());
        }
    }
    Ok(Some(base * multiple as f64))
}

/// Continued-fraction approximation `num / den` of `x > 0` with `den <= max_den`,
/// accepted only when it matches to relative accuracy `1e-9`.
fn rational_approx(x: f64, max_den: u64) -> Option<(u64, u64)> {
    if !(x > 0.0 && x.is_finite()) {
        return None;
    }
    let (mut h0, mut h1, mut k0, mut k1) = (0u64, 1u64, 1u64, 0u64);
    let mut rest = x;
    for _ in 0..40 {
        let a = libm::floor(rest);
        if a > 1e9 {
            break;
        }
        let a_int = a as u64;
        let h2 = a_int.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a_int.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if libm::fabs(h1 as f64 / k1 as f64 - x) <= 1e-9 * x {
            return Some((h1, k1));
        }
        let frac = rest - a;
        if frac < 1e-15 {
            break;
        }
        rest = 1.0 / frac;
    }
    None
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

impl AveragedDriver {
    pub fn new(base: ProblemSpec, mode: AveragingMode) -> Result<Self> {
        base.check_structure()?;
        match mode {
            AveragingMode::Periodic { period } => {
                if !(period > 0.0 && period.is_finite()) {
                    return Err(Error::InvalidArgument("averaging period must be positive".into()));
                }
                let commensurate = common_period(&base)
                    .map_err(|_| Error::InvalidSpec("temporal factors admit no common period".into()))?;
                if let Some(p) = commensurate {
                    let ratio = period / p;
                    if libm::fabs(ratio - libm::round(ratio)) > 1e-9 * ratio || ratio < 0.5 {
                        return Err(Error::InvalidArgument("period is not a multiple of the common period".into()));
                    }
                }
            }
            AveragingMode::Cesaro { max_horizon, tol } => {
                if !(max_horizon > 0.0 && tol > 0.0) {
                    return Err(Error::InvalidArgument("Cesaro mode needs max_horizon > 0 and tol > 0".into()));
                }
            }
        }
        let longest = base.temporal_factors().filter_map(|t| t.period().ok().flatten()).fold(1.0f64, f64::max);
        Ok(Self { base, mode, cesaro_start: longest })
    }

    /// Periodic mode over the detected common period.
    pub fn periodic(base: ProblemSpec) -> Result<Self> {
        let period = common_period(&base)
            .map_err(|_| Error::InvalidSpec("temporal factors admit no common period".into()))?
            .unwrap_or(1.0);
        Self::new(base, AveragingMode::Periodic { period })
    }

    pub fn cesaro(base: ProblemSpec, max_horizon: f64, tol: f64) -> Result<Self> {
        Self::new(base, AveragingMode::Cesaro { max_horizon, tol })
    }

    /// Periodic when the frequencies are commensurate, Cesaro otherwise.
    pub fn auto(base: ProblemSpec, max_horizon: f64, tol: f64) -> Result<Self> {
        match common_period(&base) {
            Ok(_) => Self::periodic(base),
            Err(()) => Self::cesaro(base, max_horizon, tol),
        }
    }

    pub fn mode(&self) -> AveragingMode {
        self.mode
    }

    pub fn base(&self) -> &ProblemSpec {
        &self.base
    }

    fn rule(&self) -> KinkAware {
        KinkAware { scan_points: 32, start_panels: 4, max_doublings: 12, tol: PERIODIC_TOL }
    }

    /// Mean of `integrand` with kink indicators `kinks`, according to the mode.
    fn mean<I, K>(&self, mut integrand: I, mut kinks: K) -> Result<Average>
    where
        I: FnMut(f64) -> Result<f64>,
        K: FnMut(f64, &mut Vec<f64>) -> Result<()>,
    {
        match self.mode {
            AveragingMode::Periodic { period } => {
                // Doubling tolerance applies to the mean, so scale it by the period.
                let rule = KinkAware { tol: PERIODIC_TOL * period, ..self.rule() };
                let out = rule.integrate(0.0, period, &mut integrand, &mut kinks)?;
                Ok(Average { value: out.value / period, residual: out.residual / period })
            }
            AveragingMode::Cesaro { max_horizon, tol } => {
                let chunk = self.cesaro_start;
                let chunk_rule = |len: f64| KinkAware { tol: PERIODIC_TOL * len, ..self.rule() };
                let mut horizon = chunk;
                let mut integral = chunk_rule(chunk).integrate(0.0, chunk, &mut integrand, &mut kinks)?.value;
                let mut mean = integral / horizon;
                let mut residuals = Vec::new();
                loop {
                    if 2.0 * horizon > max_horizon {
                        return Err(Error::AveragingFailure { residuals });
                    }
                    // int_s^{2s} in chunks of the longest period.
                    let pieces = libm::ceil(horizon / chunk) as usize;
                    let len = horizon / pieces as f64;
                    for k in 0..pieces {
                        let a = horizon + k as f64 * len;
                        integral += chunk_rule(len).integrate(a, a + len, &mut integrand, &mut kinks)?.value;
                    }
                    horizon *= 2.0;
                    let next = integral / horizon;
                    let residual = libm::fabs(next - mean);
                    residuals.push(residual);
                    mean = next;
                    if residual < tol {
                        return Ok(Average { value: mean, residual });
                    }
                }
            }
        }
    }

    /// Scalar fast path (`dim_x = dim_b = 1`).
    pub fn average_scalar(&self, sigma_set: &CovarianceSet, x: f64, v: f64, p: f64, a: f64) -> Result<Average> {
        let spec = &self.base;
        if spec.dim_x != 1 || spec.dim_b != 1 || sigma_set.dim() != 1 {
            return Err(Error::UnsupportedDimension { dim_x: spec.dim_x, dim_b: spec.dim_b });
        }
        self.mean(
            |r| Ok(assemble_driver_scalar_checked(spec, sigma_set, r, x, v, p, a)?.1),
            |r, out| {
                out.clear();
                out.push(assemble_driver_scalar_checked(spec, sigma_set, r, x, v, p, a)?.0);
                Ok(())
            },
        )
    }

    /// General shapes; see [`average_driver`].
    pub fn average(&self, sigma_set: &CovarianceSet, x: &[f64], v: f64, p: &[f64], a: &SymMatrix) -> Result<Average> {
        let spec = &self.base;
        // Shape errors surface on the first evaluation.
        assemble_driver(spec, sigma_set, 0.0, x, v, p, a)?;
        self.mean(
            |r| Ok(assemble_driver(spec, sigma_set, r, x, v, p, a)?.f),
            |r, out| {
                let d = assemble_driver(spec, sigma_set, r, x, v, p, a)?;
                out.clear();
                out.extend(d.h.diagonal());
                Ok(())
            },
        )
    }
}

/// `F_bar(x, v, p, A)` for the averaged driver.
pub fn average_driver(
    avg: &AveragedDriver,
    sigma_set: &CovarianceSet,
    x: &[f64],
    v: f64,
    p: &[f64],
    a: &SymMatrix,
) -> Result<f64> {
    avg.average(sigma_set, x, v, p, a).map(|out| out.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{Expr, Spatial, StateFactor, Temporal, Term};
    use core::f64::consts::PI;
    use alloc::vec;

    const TWO_PI: f64 = 2.0 * PI;

    fn sin1() -> Temporal {
        Temporal::Sin { omega: 1.0, phase: 0.0 }
    }

    fn tanh1() -> Spatial {
        Spatial::Tanh { k: vec![1.0] }
    }

    /// Independent trapezoid oracle for the mean of a 2 pi periodic function.
    fn trapezoid_mean(f: impl Fn(f64) -> f64, n: usize) -> f64 {
        let h = TWO_PI / n as f64;
        (0..n).map(|k| f(k as f64 * h)).sum::<f64>() / n as f64
    }

    #[test]
    fn common_period_detection() {
        let spec = ProblemSpec::scalar(1.0)
            .with_drift(Expr::term(Term::constant(1.0).time(sin1())))
            .with_driver(Expr::term(Term::constant(1.0).time(Temporal::CosSquared { omega: 1.0, phase: 0.3 })));
        assert!((common_period(&spec).unwrap().unwrap() - TWO_PI).abs() < 1e-12);

        let spec = ProblemSpec::scalar(1.0)
            .with_drift(Expr::term(Term::constant(1.0).time(Temporal::Sin { omega: 2.0, phase: 0.0 })))
            .with_driver(Expr::term(Term::constant(1.0).time(Temporal::Cos { omega: 3.0, phase: 0.0 })));
        assert!((common_period(&spec).unwrap().unwrap() - TWO_PI).abs() < 1e-12);

        let irrational = ProblemSpec::scalar(1.0)
            .with_drift(Expr::term(Term::constant(1.0).time(sin1())))
            .with_driver(Expr::term(Term::constant(1.0).time(Temporal::Cos { omega: 2f64.sqrt(), phase: 0.0 })));
        assert!(common_period(&irrational).is_err());

        let decay = ProblemSpec::scalar(1.0).with_driver(Expr::term(Term::constant(1.0).time(Temporal::Decay)));
        assert!(common_period(&decay).is_err());
        assert_eq!(common_period(&ProblemSpec::scalar(1.0)), Ok(None));
    }

    #[test]
    fn time_independent_average_is_the_driver() {
        let spec = ProblemSpec::scalar(1.0)
            .with_drift(Expr::term(Term::constant(0.5).space(tanh1())))
            .with_vol(Expr::constant(1.0).plus(Term::constant(0.25).space(tanh1())))
            .with_driver(Expr::term(Term::constant(-0.7).state(StateFactor::TanhZ { index: 0 })));
        let sigma = CovarianceSet::interval(1.0, 4.0).unwrap();
        let avg = AveragedDriver::periodic(spec.clone()).unwrap();
        for (x, v, p, a) in [(0.3, 1.0, -2.0, 1.5), (-1.0, 0.0, 0.5, -3.0)] {
            let direct = assemble_driver(&spec, &sigma, 0.0, &[x], v, &[p], &SymMatrix::scalar(a)).unwrap().f;
            let mean = average_driver(&avg, &sigma, &[x], v, &[p], &SymMatrix::scalar(a)).unwrap();
            assert!((direct - mean).abs() <= 1e-12, "{direct} vs {mean}");
        }
    }

    #[test]
    fn hand_computed_means() {
        let sigma = CovarianceSet::interval(1.0, 4.0).unwrap();
        let cos2 = ProblemSpec::scalar(1.0).with_driver(Expr::term(
            Term::constant(1.0).time(Temporal::CosSquared { omega: 1.0, phase: 0.0 }).state(StateFactor::Y),
        ));
        let avg = AveragedDriver::periodic(cos2).unwrap();
        let v = 3.0;
        let mean = average_driver(&avg, &sigma, &[0.2], v, &[0.0], &SymMatrix::zeros(1)).unwrap();
        assert!((mean - v / 2.0).abs() < 1e-12);

        let sin_drift =
            ProblemSpec::scalar(1.0).with_drift(Expr::term(Term::constant(1.0).time(sin1()).space(tanh1())));
        let avg = AveragedDriver::periodic(sin_drift).unwrap();
        let mean = average_driver(&avg, &sigma, &[1.0], 0.0, &[1.0], &SymMatrix::zeros(1)).unwrap();
        assert!(mean.abs() < 1e-12);

        let vol = ProblemSpec::scalar(1.0).with_vol(Expr::constant(1.0).plus(Term::constant(0.5).time(sin1())));
        let singleton = CovarianceSet::interval(1.0, 1.0).unwrap();
        let oracle = trapezoid_mean(|r| (1.0 + 0.5 * r.sin()).powi(2), 4096);
        assert!((oracle - 1.125).abs() < 1e-12);
        let avg = AveragedDriver::periodic(vol).unwrap();
        let mean = average_driver(&avg, &singleton, &[0.0], 0.0, &[0.0], &SymMatrix::scalar(2.0)).unwrap();
        assert!((mean - oracle).abs() < 1e-12, "{mean}");
    }

    #[test]
    fn kinked_integrand_matches_oracle() {
        // H(r) = 2 g = 2 cos r, so G(H) switches between the two variances.
        let spec = ProblemSpec::scalar(1.0).with_driver_qv(Expr::term(Term::constant(1.0).time(Temporal::Cos {
            omega: 1.0,
            phase: 0.0,
        })));
        let sigma = CovarianceSet::interval(1.0, 4.0).unwrap();
        let avg = AveragedDriver::periodic(spec).unwrap();
        let out = avg.average_scalar(&sigma, 0.0, 0.0, 0.0, 0.0).unwrap();
        // mean of 1/2 (4 (2cos)^+ - (2cos)^-) = (4 - 1) * (2/pi) / 2.
        let exact = 3.0 / PI;
        assert!((out.value - exact).abs() < 1e-12, "{} vs {exact}", out.value);
        assert!(out.residual < PERIODIC_TOL);
    }

    #[test]
    fn cesaro_agrees_with_periodic() {
        let spec = ProblemSpec::scalar(1.0)
            .with_drift(Expr::term(Term::constant(1.0).time(Temporal::Sin { omega: 1.0, phase: 0.4 })))
            .with_vol(Expr::constant(1.0).plus(Term::constant(0.3).time(Temporal::Cos { omega: 1.5, phase: 0.0 })))
            .with_driver(Expr::term(
                Term::constant(1.0).time(Temporal::CosSquared { omega: 1.0, phase: 0.0 }).state(StateFactor::Y),
            ));
        let sigma = CovarianceSet::interval(0.5, 2.0).unwrap();
        let periodic = AveragedDriver::periodic(spec.clone()).unwrap();
        let tol = 1e-8;
        let cesaro = AveragedDriver::cesaro(spec, 1e7, tol).unwrap();
        for (x, v, p, a) in [(0.0, 1.0, 0.5, 2.0), (1.0, -2.0, -1.0, -0.5)] {
            let pv = periodic.average_scalar(&sigma, x, v, p, a).unwrap().value;
            let cv = cesaro.average_scalar(&sigma, x, v, p, a).unwrap().value;
            assert!((pv - cv).abs() <= 3.0 * tol, "{pv} vs {cv}");
        }
    }

    #[test]
    fn cesaro_reports_non_convergence() {
        let spec = ProblemSpec::scalar(1.0).with_driver(
            Expr::term(Term::constant(1.0).time(Temporal::Sin { omega: 1.0, phase: 0.0 }))
                .plus(Term::constant(1.0).time(Temporal::Cos { omega: 2f64.sqrt(), phase: 0.0 })),
        );
        let sigma = CovarianceSet::interval(1.0, 1.0).unwrap();
        let avg = AveragedDriver::auto(spec, 500.0, 1e-12).unwrap();
        assert!(matches!(avg.mode(), AveragingMode::Cesaro { .. }));
        match avg.average_scalar(&sigma, 0.0, 0.0, 0.0, 0.0) {
            Err(Error::AveragingFailure { residuals }) => assert!(!residuals.is_empty()),
            other => panic!("expected averaging failure, got {other:?}"),
        }
    }

    #[test]
    fn sublinearity_survives_averaging() {
        let spec = ProblemSpec::scalar(1.0)
            .with_vol(Expr::constant(1.0).plus(Term::constant(0.5).time(sin1())))
            .with_drift_qv(Expr::term(Term::constant(0.4).time(Temporal::Cos { omega: 2.0, phase: 0.0 })));
        let sigma = CovarianceSet::interval(0.5, 3.0).unwrap();
        let avg = AveragedDriver::periodic(spec).unwrap();
        for (p, a, b) in [(1.0, 2.0, -3.0), (-0.5, -1.0, 0.7), (2.0, 0.1, 0.1)] {
            let sum = avg.average_scalar(&sigma, 0.0, 0.0, p, a + b).unwrap().value;
            let split = avg.average_scalar(&sigma, 0.0, 0.0, p, a).unwrap().value
                + avg.average_scalar(&sigma, 0.0, 0.0, 0.0, b).unwrap().value;
            assert!(sum <= split + 1e-9);
        }
    }
}
