//! Scalar kernels shared by the rest of the crate: Poisson mass, Cholesky,
//! multivariate Gaussian log-density, log-sum-exp and a fixed-order
//! pairwise sum.
//!
//! Densities are always handled in log space. A well separated mixture
//! evaluated far from a component underflows `f64` long before the
//! log-density becomes interesting.

use std::f64::consts::PI;

use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};

/// `ln(2π)`.
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Relative asymmetry tolerated before a covariance is rejected.
pub const SYMMETRY_RTOL: f64 = 1e-12;

/// Natural log of the Poisson mass `e^{-λ} λ^k / k!`.
pub fn ln_poisson_pmf(lambda: f64, k: u64) -> Result<f64> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "poisson rate must be positive and finite, got {lambda}"
        )));
    }
    Ok(k as f64 * lambda.ln() - lambda - ln_factorial(k))
}

/// Poisson mass evaluated through [`ln_poisson_pmf`] so large `k` does not
/// overflow the factorial.
pub fn poisson_pmf(lambda: f64, k: u64) -> Result<f64> {
    ln_poisson_pmf(lambda, k).map(f64::exp)
}

/// `ln Σ exp(v_i)` with the max-subtraction trick.
///
/// Returns `-inf` when every entry is `-inf`; callers that need a finite
/// normaliser check for it.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "log_sum_exp of an empty list".into(),
        ));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("log_sum_exp input contains NaN".into()));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return Ok(max);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Pairwise summation in a fixed recursion order. The result depends only on
/// the slice contents, never on how the slice was produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be positive".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(dim, data)
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self::diagonal(&vec![scale; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            data[i * dim + i] = *d;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks_exact(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn add(&self, other: &SquareMatrix) -> Result<SquareMatrix> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { dim: self.dim, data })
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn determinant(&self) -> Result<f64> {
        Ok(Cholesky::factor(self)?.log_det().exp())
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factors `(A + Aᵀ)/2` after checking `A` is symmetric to
    /// [`SYMMETRY_RTOL`] relative to its largest entry.
    pub fn factor(a: &SquareMatrix) -> Result<Self> {
        let n = a.dim;
        let asym = a.max_asymmetry();
        if asym > SYMMETRY_RTOL * a.max_abs() {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        let mut lower = vec![0.0; n * n];
        for j in 0..n {
            let mut pivot = a.get(j, j);
            for p in 0..j {
                pivot -= lower[j * n + p] * lower[j * n + p];
            }
            if !(pivot > 0.0 && pivot.is_finite()) {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let diag = pivot.sqrt();
            lower[j * n + j] = diag;
            for i in (j + 1)..n {
                let mut s = 0.5 * (a.get(i, j) + a.get(j, i));
                for p in 0..j {
                    s -= lower[i * n + p] * lower[j * n + p];
                }
                lower[i * n + j] = s / diag;
            }
        }
        Ok(Self { dim: n, lower })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.dim + j]
    }

    /// `ln |A| = 2 Σ ln L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| self.lower(i, i).ln()).sum::<f64>()
    }

    /// Solves `L y = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for p in 0..i {
                s -= self.lower(i, p) * y[p];
            }
            y[i] = s / self.lower(i, i);
        }
        y
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut x = self.solve_lower(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in (i + 1)..n {
                s -= self.lower(p, i) * x[p];
            }
            x[i] = s / self.lower(i, i);
        }
        x
    }

    /// `dᵀ A⁻¹ d` as `|L⁻¹ d|²`.
    pub fn mahalanobis_sq(&self, d: &[f64]) -> f64 {
        self.solve_lower(d).iter().map(|v| v * v).sum()
    }

    /// `L x`, used to colour standard normal draws.
    pub fn mul_lower(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..=i).map(|p| self.lower(i, p) * x[p]).sum())
            .collect()
    }
}

/// A multivariate normal with its factorisation cached, for repeated
/// log-density evaluation.
#[derive(Debug, Clone)]
pub struct GaussianKernel {
    mean: Vec<f64>,
    chol: Cholesky,
    log_norm: f64,
}

impl GaussianKernel {
    pub fn new(mean: &[f64], cov: &SquareMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                found: mean.len(),
            });
        }
        let chol = Cholesky::factor(cov)?;
        let log_norm = -0.5 * (mean.len() as f64 * LN_2PI + chol.log_det());
        Ok(Self {
            mean: mean.to_vec(),
            chol,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// Log-density at `z`. `z` must have the kernel's dimension.
    pub fn logpdf(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.mean.len());
        let diff: Vec<f64> = z.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        self.log_norm - 0.5 * self.chol.mahalanobis_sq(&diff)
    }
}

/// `ln 𝒩(z; μ, Σ)`.
pub fn mvn_logpdf(z: &[f64], mu: &[f64], sigma: &SquareMatrix) -> Result<f64> {
    if z.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            found: z.len(),
        });
    }
    Ok(GaussianKernel::new(mu, sigma)?.logpdf(z))
}

/// Semi-axes and orientation (radians) of the ellipse `dᵀ Σ⁻¹ d = r²` for a
/// 2×2 covariance.
pub fn ellipse_2d(cov: &SquareMatrix, radius: f64) -> Result<(f64, f64, f64)> {
    if cov.dim() != 2 {
        return Err(Error::UnsupportedDimension(cov.dim()));
    }
    let (a, b, c) = (cov.get(0, 0), 0.5 * (cov.get(0, 1) + cov.get(1, 0)), cov.get(1, 1));
    let mean = 0.5 * (a + c);
    let spread = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (l1, l2) = (mean + spread, mean - spread);
    if l2 <= 0.0 {
        return Err(Error::NotPositiveDefinite { pivot: 1 });
    }
    let angle = if b == 0.0 && a >= c {
        0.0
    } else if b == 0.0 {
        PI / 2.0
    } else {
        (l1 - a).atan2(b)
    };
    Ok((radius * l1.sqrt(), radius * l2.sqrt(), angle))
}
