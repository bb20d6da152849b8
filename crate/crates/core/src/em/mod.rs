//! Expectation-maximisation for a finite Gaussian mixture.
//!
//! The E-step computes responsibilities in log space; the M-step is the
//! closed-form maximiser of the expected complete-data log-likelihood:
//!
//! ```text
//! N_k = Σ_n γ_nk
//! μ_k = Σ_n γ_nk z_n / N_k
//! Σ_k = Σ_n γ_nk (z_n - μ_k)(z_n - μ_k)ᵀ / N_k   (+ cov_floor · I)
//! w_k = N_k / N
//! ```
//!
//! Weights are left free during the iterations; the Poisson rate is
//! recovered afterwards by [`estimate_lambda`].

mod report;
mod snapshot;

pub use report::{load_fit_report, save_fit_report, FitReport, IterationRecord};
pub use snapshot::{render_snapshot_svg, snapshot, snapshot_file_name};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise_model::{Component, Dataset, TruncatedMixture};
use crate::numkit::{log_sum_exp, pairwise_sum, SquareMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once `|ℓ_t - ℓ_{t-1}| / |ℓ_{t-1}|` drops below this.
    pub ll_rel_tol: f64,
    /// Added to every covariance diagonal after the M-step.
    pub cov_floor: f64,
    /// Snapshot cadence in iterations; 0 disables snapshots.
    pub snapshot_every: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            ll_rel_tol: 1e-8,
            cov_floor: 1e-6,
            snapshot_every: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if !(self.ll_rel_tol.is_finite() && self.ll_rel_tol > 0.0) {
            return Err(Error::InvalidParameter("ll_rel_tol must be > 0".into()));
        }
        if !(self.cov_floor.is_finite() && self.cov_floor >= 0.0) {
            return Err(Error::InvalidParameter("cov_floor must be >= 0".into()));
        }
        Ok(())
    }
}

/// Posterior component probabilities, `N` rows by `K` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    n: usize,
    k: usize,
    values: Vec<f64>,
}

impl Responsibilities {
    /// Builds from an explicit matrix; each row must be a probability
    /// vector to within 1e-12.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map(Vec::len).unwrap_or(0);
        if k == 0 {
            return Err(Error::InvalidArgument("responsibilities need at least one row and column".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch { expected: k, found: row.len() });
            }
            if row.iter().any(|g| !(0.0..=1.0).contains(g)) {
                return Err(Error::InvalidArgument(format!("row {i} has entries outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self {
            n: rows.len(),
            k,
            values: rows.concat(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_components(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.k + k]
    }

    /// `N_k = Σ_n γ_nk`, each column reduced pairwise.
    pub fn effective_counts(&self) -> Vec<f64> {
        (0..self.k)
            .map(|k| {
                let col: Vec<f64> = (0..self.n).map(|i| self.get(i, k)).collect();
                pairwise_sum(&col)
            })
            .collect()
    }

    /// Most responsible component per row, lowest ordinal on ties.
    pub fn argmax(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for (k, g) in row.iter().enumerate() {
                    if *g > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}

fn check_dims(m: &TruncatedMixture, data: &Dataset) -> Result<()> {
    if m.is_empty() {
        return Err(Error::InvalidMixture("mixture has no components".into()));
    }
    if m.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            found: data.dim(),
        });
    }
    Ok(())
}

/// Responsibilities and the log-likelihood in one pass over the rows.
///
/// Rows are processed in parallel but each row's arithmetic is independent
/// and the final reduction is a fixed-order pairwise sum, so the result does
/// not depend on the worker count.
pub fn expectation(m: &TruncatedMixture, data: &Dataset) -> Result<(Responsibilities, f64)> {
    check_dims(m, data)?;
    let kernels = m.kernels()?;
    let k = kernels.len();
    let n = data.len();
    let mut values = vec![0.0; n * k];
    let mut row_ll = vec![0.0; n];

    values
        .par_chunks_mut(k)
        .zip(row_ll.par_iter_mut())
        .enumerate()
        .for_each(|(i, (gamma, ll))| {
            let z = data.row(i);
            for (g, (lw, kernel)) in gamma.iter_mut().zip(&kernels) {
                *g = lw + kernel.logpdf(z);
            }
            // inputs are finite or -inf, never NaN or empty
            let norm = log_sum_exp(gamma).unwrap_or(f64::NAN);
            *ll = norm;
            if norm.is_finite() {
                gamma.iter_mut().for_each(|g| *g = (*g - norm).exp());
            }
        });

    if let Some(row) = row_ll.iter().position(|v| !v.is_finite()) {
        return Err(Error::DegeneratePoint { row });
    }
    Ok((Responsibilities { n, k, values }, pairwise_sum(&row_ll)))
}

/// `γ_nk = w_k 𝒩(z_n; μ_k, Σ_k) / Σ_j w_j 𝒩(z_n; μ_j, Σ_j)`.
pub fn e_step(m: &TruncatedMixture, data: &Dataset) -> Result<Responsibilities> {
    expectation(m, data).map(|(g, _)| g)
}

/// `Σ_n ln Σ_k w_k 𝒩(z_n; μ_k, Σ_k)`.
pub fn log_likelihood(m: &TruncatedMixture, data: &Dataset) -> Result<f64> {
    expectation(m, data).map(|(_, ll)| ll)
}

/// Output of [`m_step`] before it is attached to component labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MStep {
    /// `N_k / N` renormalised to sum to one.
    pub weights: Vec<f64>,
    /// `N_k / N` as computed, before renormalisation.
    pub raw_weights: Vec<f64>,
    pub effective_counts: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covs: Vec<SquareMatrix>,
}

impl MStep {
    /// Attaches the new parameters to the shift indices (and nominal rate)
    /// of `labels`, component by component.
    pub fn into_mixture(self, labels: &TruncatedMixture) -> Result<TruncatedMixture> {
        if labels.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: self.weights.len(),
            });
        }
        let components = labels
            .components()
            .iter()
            .zip(self.weights)
            .zip(self.means)
            .zip(self.covs)
            .map(|(((c, weight), mean), cov)| Component {
                k: c.k,
                weight,
                mean,
                cov,
            })
            .collect();
        TruncatedMixture::new(labels.lambda(), components)
    }
}

/// Closed-form M-step. Each covariance is centred on the new mean.
pub fn m_step(data: &Dataset, gamma: &Responsibilities, cfg: &EmConfig) -> Result<MStep> {
    let (n, k, dim) = (data.len(), gamma.n_components(), data.dim());
    if gamma.n_rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: gamma.n_rows(),
        });
    }
    let counts = gamma.effective_counts();
    let threshold = k as f64 * f64::EPSILON * n as f64;
    if let Some((component, &effective_count)) =
        counts.iter().enumerate().find(|(_, c)| !(**c > threshold))
    {
        return Err(Error::EmptyCluster {
            component,
            effective_count,
        });
    }

    let mut means = vec![vec![0.0; dim]; k];
    for (i, z) in data.rows().enumerate() {
        for (j, mean) in means.iter_mut().enumerate() {
            let g = gamma.get(i, j);
            mean.iter_mut().zip(z).for_each(|(m, zd)| *m += g * zd);
        }
    }
    for (mean, nk) in means.iter_mut().zip(&counts) {
        mean.iter_mut().for_each(|m| *m /= nk);
    }

    let mut scatter = vec![vec![0.0; dim * dim]; k];
    let mut diff = vec![0.0; dim];
    for (i, z) in data.rows().enumerate() {
        for j in 0..k {
            let g = gamma.get(i, j);
            for d in 0..dim {
                diff[d] = z[d] - means[j][d];
            }
            let s = &mut scatter[j];
            for a in 0..dim {
                for b in a..dim {
                    s[a * dim + b] += g * diff[a] * diff[b];
                }
            }
        }
    }
    let covs = scatter
        .into_iter()
        .zip(&counts)
        .map(|(mut s, nk)| {
            for a in 0..dim {
                for b in a..dim {
                    let v = s[a * dim + b] / nk;
                    s[a * dim + b] = v;
                    s[b * dim + a] = v;
                }
                s[a * dim + a] += cfg.cov_floor;
            }
            SquareMatrix::from_row_major(dim, s)
        })
        .collect::<Result<Vec<_>>>()?;

    let raw_weights: Vec<f64> = counts.iter().map(|c| c / n as f64).collect();
    let total: f64 = raw_weights.iter().sum();
    let weights = raw_weights.iter().map(|w| w / total).collect();

    Ok(MStep {
        weights,
        raw_weights,
        effective_counts: counts,
        means,
        covs,
    })
}

/// Runs EM from `init` until the relative log-likelihood change falls below
/// `cfg.ll_rel_tol` or `cfg.max_iters` M-steps have been taken.
pub fn fit(data: &Dataset, init: &TruncatedMixture, cfg: &EmConfig) -> Result<FitReport> {
    fit_observed(data, init, cfg, |_, _, _| Ok(()))
}

/// [`fit`] with a callback invoked for every recorded iteration `t` with the
/// mixture `m_t` and its responsibilities. Used for snapshots.
pub fn fit_observed<F>(
    data: &Dataset,
    init: &TruncatedMixture,
    cfg: &EmConfig,
    mut observe: F,
) -> Result<FitReport>
where
    F: FnMut(usize, &TruncatedMixture, &Responsibilities) -> Result<()>,
{
    cfg.validate()?;
    check_dims(init, data)?;
    let at = |iteration: usize| move |e: Error| Error::AtIteration { iteration, source: Box::new(e) };

    let mut iterations = Vec::new();
    let mut current = init.clone();
    let mut converged = false;
    let mut iteration = 0;
    loop {
        let (gamma, ll) = expectation(&current, data).map_err(at(iteration))?;
        observe(iteration, &current, &gamma)?;
        if let Some(prev) = iterations.last().map(|r: &IterationRecord| r.log_likelihood) {
            converged = ((ll - prev) / prev).abs() < cfg.ll_rel_tol;
        }
        iterations.push(IterationRecord {
            mixture: current.clone(),
            log_likelihood: ll,
            effective_counts: gamma.effective_counts(),
        });
        if converged || iteration == cfg.max_iters {
            break;
        }
        iteration += 1;
        current = m_step(data, &gamma, cfg)
            .and_then(|step| step.into_mixture(&current))
            .map_err(at(iteration))?;
    }

    let lambda_hat = estimate_lambda(&current).ok();
    Ok(FitReport {
        iterations,
        converged,
        iterations_run: iteration,
        lambda_hat,
    })
}

/// Poisson rate recovered from fitted weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaEstimate {
    /// `-ln w₀` from the weight of the zero-shift component.
    pub from_zero_weight: f64,
    /// `Σ k w_k / Σ w_k`.
    pub moment: f64,
}

pub fn estimate_lambda(m: &TruncatedMixture) -> Result<LambdaEstimate> {
    let zero = m
        .component_by_shift(0)
        .ok_or_else(|| Error::NotEstimable("no component with shift index 0".into()))?;
    if !(zero.weight > 0.0 && zero.weight < 1.0) {
        return Err(Error::NotEstimable(format!(
            "zero-shift weight {} is outside (0, 1)",
            zero.weight
        )));
    }
    let total: f64 = m.components().iter().map(|c| c.weight).sum();
    let moment = m.components().iter().map(|c| c.k as f64 * c.weight).sum::<f64>() / total;
    Ok(LambdaEstimate {
        from_zero_weight: -zero.weight.ln(),
        moment,
    })
}

/// Closed-form `∂ℓ/∂μ_k = Σ_n γ_nk Σ_k⁻¹ (z_n - μ_k)` for every component.
pub fn mean_gradient(m: &TruncatedMixture, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    let (gamma, _) = expectation(m, data)?;
    let kernels = m.kernels()?;
    let dim = m.dim();
    Ok(kernels
        .iter()
        .enumerate()
        .map(|(k, (_, kernel))| {
            let mut weighted = vec![0.0; dim];
            for (i, z) in data.rows().enumerate() {
                let g = gamma.get(i, k);
                for d in 0..dim {
                    weighted[d] += g * (z[d] - kernel.mean()[d]);
                }
            }
            kernel.cholesky().solve(&weighted)
        })
        .collect())
}
