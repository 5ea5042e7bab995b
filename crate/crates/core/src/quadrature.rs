//! Composite Gauss-Legendre quadrature that splits the interval at the sign changes of
//! a set of kink indicators (the diagonal of `H`, where `G` is not differentiable).

use alloc::vec::Vec;

const GL8_NODES: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL8_WEIGHTS: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// 8-point Gauss-Legendre rule on `m` equal panels of `[a, b]`.
pub(crate) fn gauss_legendre<E>(a: f64, b: f64, m: usize, f: &mut impl FnMut(f64) -> Result<f64, E>) -> Result<f64, E> {
    let width = (b - a) / m as f64;
    let half = 0.5 * width;
    let mut total = 0.0;
    for k in 0..m {
        let mid = a + (k as f64 + 0.5) * width;
        let mut panel = 0.0;
        for (node, weight) in GL8_NODES.iter().zip(GL8_WEIGHTS) {
            panel += weight * (f(mid - half * node)? + f(mid + half * node)?);
        }
        total += half * panel;
    }
    Ok(total)
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Integral {
    pub value: f64,
    /// Change between the last two panel doublings.
    pub residual: f64,
}

pub(crate) struct KinkAware {
    /// Equally spaced probes used to detect sign changes of the indicators.
    pub scan_points: usize,
    /// Initial panel count per smooth segment.
    pub start_panels: usize,
    pub max_doublings: u32,
    pub tol: f64,
}

impl KinkAware {
    /// Integrates `f` over `[a, b]`. `indicators(r, out)` writes the kink indicators at `r`;
    /// `f` is smooth between their zero crossings.
    pub fn integrate<E>(
        &self,
        a: f64,
        b: f64,
        f: &mut impl FnMut(f64) -> Result<f64, E>,
        indicators: &mut impl FnMut(f64, &mut Vec<f64>) -> Result<(), E>,
    ) -> Result<Integral, E> {
        let breaks = self.breakpoints(a, b, indicators)?;
        let mut m = self.start_panels.max(1);
        let mut prev = self.sum_segments(&breaks, m, f)?;
        let mut residual = f64::INFINITY;
        for _ in 0..self.max_doublings {
            m *= 2;
            let next = self.sum_segments(&breaks, m, f)?;
            residual = libm::fabs(next - prev);
            prev = next;
            if residual < self.tol {
                break;
            }
        }
        Ok(Integral { value: prev, residual })
    }

    fn sum_segments<E>(&self, breaks: &[f64], m: usize, f: &mut impl FnMut(f64) -> Result<f64, E>) -> Result<f64, E> {
        let mut total = 0.0;
        for w in breaks.windows(2) {
            if w[1] > w[0] {
                total += gauss_legendre(w[0], w[1], m, f)?;
            }
        }
        Ok(total)
    }

    fn breakpoints<E>(
        &self,
        a: f64,
        b: f64,
        indicators: &mut impl FnMut(f64, &mut Vec<f64>) -> Result<(), E>,
    ) -> Result<Vec<f64>, E> {
        let n = self.scan_points.max(1);
        let step = (b - a) / n as f64;
        let mut breaks = Vec::with_capacity(4);
        breaks.push(a);
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut probe = Vec::new();
        indicators(a, &mut left)?;
        for k in 1..=n {
            let r1 = if k == n { b } else { a + k as f64 * step };
            let r0 = a + (k - 1) as f64 * step;
            indicators(r1, &mut right)?;
            for c in 0..left.len() {
                if left[c] * right[c] < 0.0 {
                    // Bisection on component c.
                    let (mut lo, mut hi, sign_lo) = (r0, r1, left[c] > 0.0);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        indicators(mid, &mut probe)?;
                        if (probe[c] > 0.0) == sign_lo {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    breaks.push(0.5 * (lo + hi));
                }
            }
            core::mem::swap(&mut left, &mut right);
        }
        breaks.push(b);
        breaks.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
        Ok(breaks)
    }
}
