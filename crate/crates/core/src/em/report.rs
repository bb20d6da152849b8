use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LambdaEstimate;
use crate::error::{Error, Result};
use crate::noise_model::{Component, TruncatedMixture};
use crate::numkit::SquareMatrix;

/// One recorded EM state: the mixture `m_t`, `ℓ(m_t)`, and the effective
/// counts of the responsibilities under `m_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub mixture: TruncatedMixture,
    pub log_likelihood: f64,
    pub effective_counts: Vec<f64>,
}

/// Trace of an EM run. Entry 0 is the initial mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
    /// Number of M-steps taken.
    pub iterations_run: usize,
    pub lambda_hat: Option<LambdaEstimate>,
}

impl FitReport {
    pub fn final_mixture(&self) -> &TruncatedMixture {
        &self.iterations.last().expect("a fit report always has iteration 0").mixture
    }

    pub fn log_likelihoods(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.log_likelihood).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(&ReportFile::from(self))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<ReportFile>(text)?.try_into()
    }
}

pub fn save_fit_report(path: impl AsRef<Path>, report: &FitReport) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_fit_report(path: impl AsRef<Path>) -> Result<FitReport> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FitReport::from_json(&text)
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    lambda: f64,
    shift_indices: Vec<u64>,
    converged: bool,
    iterations_run: usize,
    lambda_hat: Option<f64>,
    lambda_hat_moment: Option<f64>,
    iterations: Vec<IterationFile>,
}

#[derive(Serialize, Deserialize)]
struct IterationFile {
    ll: f64,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covs: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "Nk")]
    nk: Vec<f64>,
}

impl From<&FitReport> for ReportFile {
    fn from(r: &FitReport) -> Self {
        let first = &r.iterations[0].mixture;
        Self {
            lambda: first.lambda(),
            shift_indices: first.shift_indices(),
            converged: r.converged,
            iterations_run: r.iterations_run,
            lambda_hat: r.lambda_hat.map(|l| l.from_zero_weight),
            lambda_hat_moment: r.lambda_hat.map(|l| l.moment),
            iterations: r
                .iterations
                .iter()
                .map(|it| IterationFile {
                    ll: it.log_likelihood,
                    weights: it.mixture.weights(),
                    means: it.mixture.components().iter().map(|c| c.mean.clone()).collect(),
                    covs: it.mixture.components().iter().map(|c| c.cov.rows()).collect(),
                    nk: it.effective_counts.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ReportFile> for FitReport {
    type Error = Error;

    fn try_from(f: ReportFile) -> Result<Self> {
        if f.iterations.is_empty() {
            return Err(Error::InvalidArgument("fit report has no iterations".into()));
        }
        let iterations = f
            .iterations
            .into_iter()
            .map(|it| {
                let k = f.shift_indices.len();
                if it.weights.len() != k || it.means.len() != k || it.covs.len() != k {
                    return Err(Error::DimensionMismatch {
                        expected: k,
                        found: it.weights.len(),
                    });
                }
                let components = f
                    .shift_indices
                    .iter()
                    .zip(it.weights)
                    .zip(it.means)
                    .zip(&it.covs)
                    .map(|(((&k, weight), mean), cov)| {
                        Ok(Component {
                            k,
                            weight,
                            mean,
                            cov: SquareMatrix::from_rows(cov)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(IterationRecord {
                    mixture: TruncatedMixture::new(f.lambda, components)?,
                    log_likelihood: it.ll,
                    effective_counts: it.nk,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let lambda_hat = match (f.lambda_hat, f.lambda_hat_moment) {
            (Some(from_zero_weight), Some(moment)) => Some(LambdaEstimate {
                from_zero_weight,
                moment,
            }),
            _ => None,
        };
        Ok(Self {
            iterations,
            converged: f.converged,
            iterations_run: f.iterations_run,
            lambda_hat,
        })
    }
}
