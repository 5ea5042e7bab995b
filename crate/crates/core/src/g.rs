//! The sublinear generator `G(A) = 1/2 sup_{B in Sigma} tr(A B)`.
//!
//! `Sigma` is a diagonal box `{diag(s_1..s_n) : s_i in [lower_i, upper_i]}`, so the
//! supremum is attained axis by axis at an endpoint and off-diagonal entries of
//! `A` never contribute.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Sub};

use crate::error::{Error, Result};
use crate::report::ValidationReport;

/// Symmetric matrix stored as its packed upper triangle.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SymMatrix {
    dim: usize,
    upper: Vec<f64>,
}

#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * n - i - 1) / 2 + j
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, upper: vec![0.0; dim * (dim + 1) / 2] }
    }

    /// 1x1 matrix `[a]`.
    pub fn scalar(a: f64) -> Self {
        Self { dim: 1, upper: vec![a] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Builds the matrix from `entry(i, j)` evaluated on the upper triangle only.
    pub fn from_fn(dim: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Self {
        let mut upper = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                upper.push(entry(i, j));
            }
        }
        Self { dim, upper }
    }

    /// Builds from full rows; the rows must be exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len(), what: "matrix row" });
            }
            for j in 0..i {
                if row[j] != rows[j][i] {
                    return Err(Error::InvalidArgument(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[packed_index(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = packed_index(self.dim, i, j);
        self.upper[k] = value;
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim).map(move |i| self.get(i, i))
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().sum()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self { dim: self.dim, upper: self.upper.iter().map(|a| a * factor).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|a| a.is_finite())
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;

    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, rhs.dim, "adding matrices of different dimension");
        SymMatrix { dim: self.dim, upper: self.upper.iter().zip(&rhs.upper).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;

    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        assert_eq!(self.dim, rhs.dim, "subtracting matrices of different dimension");
        SymMatrix { dim: self.dim, upper: self.upper.iter().zip(&rhs.upper).map(|(a, b)| a - b).collect() }
    }
}

/// Per-axis variance intervals defining the diagonal covariance box.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CovarianceSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl CovarianceSet {
    /// Requires `0 <= lower_i <= upper_i < inf`. A zero lower bound is accepted so that
    /// degenerate sets can be reported by [`check_nondegenerate`].
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidArgument("covariance set needs at least one axis".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), found: upper.len(), what: "sigma_upper" });
        }
        for (i, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
                return Err(Error::InvalidArgument(format!(
                    "axis {i}: need 0 <= lower <= upper < inf, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Scalar interval `[lower, upper]` of variances.
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower], vec![upper])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn min_lower(&self) -> f64 {
        self.lower.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_upper(&self) -> f64 {
        self.upper.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.lower.iter().all(|&s| s > 0.0)
    }

    /// Closed-form `G` without the dimension check; the caller guarantees `a.dim() == self.dim()`.
    #[inline]
    pub(crate) fn g_unchecked(&self, a: &SymMatrix) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.lower.len() {
            let d = a.get(i, i);
            acc += self.upper[i] * d.max(0.0) + self.lower[i] * d.min(0.0);
        }
        0.5 * acc
    }
}

/// Evaluates `G(A)` in closed form over the diagonal box.
pub fn g_value(a: &SymMatrix, sigma: &CovarianceSet) -> Result<f64> {
    if a.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: sigma.dim(), found: a.dim(), what: "G argument" });
    }
    Ok(sigma.g_unchecked(a))
}

/// Reports, per axis, whether the lower variance is strictly positive, and the
/// ellipticity constants `(min lower, max upper)`.
pub fn check_nondegenerate(sigma: &CovarianceSet) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (i, &lo) in sigma.lower().iter().enumerate() {
        report.push(format!("sigma.axis{i}.lower_positive"), lo, 0.0, lo > 0.0);
    }
    report.ellipticity = Some((sigma.min_lower(), sigma.max_upper()));
    report
}
