//! The hybrid noise generative model: a Poisson-weighted mixture of
//! Gaussians shifted by the photon count, its finite truncation, density
//! evaluation and seeded sampling.

mod io;
mod sample;

pub use io::{load_dataset, load_mixture, read_dataset, save_dataset, save_mixture, write_dataset};
pub use sample::{component_draws, sample, sample_mixture, GENERATOR_TAG};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{log_sum_exp, poisson_pmf, GaussianKernel, SquareMatrix};

/// Default truncation tolerance: keep at least 85% of the Poisson mass.
pub const DEFAULT_TOL: f64 = 0.15;

/// Upper bound on the number of retained Poisson terms.
pub const MAX_TERMS: usize = 10_000;

/// Parameters of the hybrid noise `Z = Z₁ + Z₂` with `Z₁ ~ Poisson(λ)` and
/// `Z₂ ~ 𝒩(μ, σ²)` applied per coordinate in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridNoiseSpec {
    pub lambda: f64,
    pub mu_z2: f64,
    pub sigma2_z2: f64,
    pub dim: usize,
}

impl HybridNoiseSpec {
    pub fn new(lambda: f64, mu_z2: f64, sigma2_z2: f64, dim: usize) -> Result<Self> {
        let spec = Self {
            lambda,
            mu_z2,
            sigma2_z2,
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !self.mu_z2.is_finite() {
            return Err(Error::InvalidParameter("mu_z2 must be finite".into()));
        }
        if !(self.sigma2_z2.is_finite() && self.sigma2_z2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma2_z2 must be > 0, got {}",
                self.sigma2_z2
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dim must be >= 1".into()));
        }
        Ok(())
    }
}

/// How [`truncate_with`] grows the retained window of photon counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TruncationRule {
    /// Window `[c - r, c + r]` around `c = ⌊λ⌋`, clipped at zero, with the
    /// radius grown one step at a time.
    #[default]
    CenteredWindow,
    /// Start at the mode and add whichever neighbour has the larger mass,
    /// one index at a time. Yields the smallest window reaching the target.
    GreedyMass,
}

/// One retained Poisson term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonEntry {
    pub k: u64,
    pub weight: f64,
}

/// Weights and shift indices of a truncated Poisson mixture, ordered by
/// descending mass (ties by ascending `k`).
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub lambda: f64,
    pub entries: Vec<SkeletonEntry>,
    pub coverage: f64,
}

impl Skeleton {
    fn from_indices(lambda: f64, indices: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut entries = indices
            .into_iter()
            .map(|k| Ok(SkeletonEntry { k, weight: poisson_pmf(lambda, k)? }))
            .collect::<Result<Vec<_>>>()?;
        sort_by_mass(&mut entries);
        let coverage = entries.iter().map(|e| e.weight).sum();
        Ok(Self {
            lambda,
            entries,
            coverage,
        })
    }

    /// Builds a skeleton from explicit `(k, weight)` pairs, e.g. fitted
    /// weights. Weights must be positive and indices distinct.
    pub fn from_weights(lambda: f64, pairs: &[(u64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidMixture("skeleton has no components".into()));
        }
        let mut entries: Vec<SkeletonEntry> =
            pairs.iter().map(|&(k, weight)| SkeletonEntry { k, weight }).collect();
        if let Some(e) = entries.iter().find(|e| !(e.weight.is_finite() && e.weight > 0.0)) {
            return Err(Error::InvalidMixture(format!("weight for k={} must be > 0", e.k)));
        }
        let mut ks: Vec<u64> = entries.iter().map(|e| e.k).collect();
        ks.sort_unstable();
        if ks.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidMixture("duplicate shift index".into()));
        }
        sort_by_mass(&mut entries);
        let coverage = entries.iter().map(|e| e.weight).sum();
        Ok(Self {
            lambda,
            entries,
            coverage,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Shift indices in ascending order.
    pub fn indices(&self) -> Vec<u64> {
        let mut ks: Vec<u64> = self.entries.iter().map(|e| e.k).collect();
        ks.sort_unstable();
        ks
    }
}

/// Descending mass, ascending `k` among masses equal to ~10 digits (the two
/// modes of an integer rate differ only by rounding).
fn sort_by_mass(entries: &mut [SkeletonEntry]) {
    entries.sort_by_key(|e| (std::cmp::Reverse((e.weight.ln() * 1e10).round() as i64), e.k));
}

fn validate_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
    }
    Ok(())
}

/// Keeps the most probable photon counts until the retained mass is at
/// least `1 - tol`, using [`TruncationRule::CenteredWindow`].
pub fn truncate(lambda: f64, tol: f64) -> Result<Skeleton> {
    truncate_with(lambda, tol, TruncationRule::default())
}

pub fn truncate_with(lambda: f64, tol: f64, rule: TruncationRule) -> Result<Skeleton> {
    validate_lambda(lambda)?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!("tol must lie in (0, 1), got {tol}")));
    }
    let target = 1.0 - tol;
    let centre = lambda.floor() as u64;
    let pmf = |k: u64| poisson_pmf(lambda, k);

    let (mut lo, mut hi) = (centre, centre);
    let mut mass = pmf(centre)?;
    while mass < target {
        if (hi - lo + 1) as usize >= MAX_TERMS {
            return Err(Error::NonConvergence { max_terms: MAX_TERMS });
        }
        match rule {
            TruncationRule::CenteredWindow => {
                if lo > 0 {
                    lo -= 1;
                    mass += pmf(lo)?;
                }
                hi += 1;
                mass += pmf(hi)?;
            }
            TruncationRule::GreedyMass => {
                let right = pmf(hi + 1)?;
                let left = if lo > 0 { pmf(lo - 1)? } else { f64::NEG_INFINITY };
                if left >= right {
                    lo -= 1;
                    mass += left;
                } else {
                    hi += 1;
                    mass += right;
                }
            }
        }
    }
    Skeleton::from_indices(lambda, lo..=hi)
}

/// The `count` most probable photon counts, regardless of coverage.
pub fn top_k(lambda: f64, count: usize) -> Result<Skeleton> {
    validate_lambda(lambda)?;
    if count == 0 || count > MAX_TERMS {
        return Err(Error::InvalidParameter(format!(
            "component count must be in 1..={MAX_TERMS}, got {count}"
        )));
    }
    // The pmf is unimodal, so the top-k set is the greedy window of size k.
    let centre = lambda.floor() as u64;
    let (mut lo, mut hi) = (centre, centre);
    while ((hi - lo + 1) as usize) < count {
        let right = poisson_pmf(lambda, hi + 1)?;
        let left = if lo > 0 { poisson_pmf(lambda, lo - 1)? } else { f64::NEG_INFINITY };
        if left >= right {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    Skeleton::from_indices(lambda, lo..=hi)
}

/// A mixture component. `k` is the photon-count shift, not the position in
/// the component list.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub k: u64,
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: SquareMatrix,
}

/// A finite Gaussian mixture. Weights are not required to sum to one: a
/// mixture built straight from a truncation keeps `coverage < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedMixture {
    lambda: f64,
    components: Vec<Component>,
    coverage: f64,
}

impl TruncatedMixture {
    pub fn new(lambda: f64, components: Vec<Component>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidMixture("mixture has no components".into()))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::InvalidMixture("component dimension must be positive".into()));
        }
        let mut ks = Vec::with_capacity(components.len());
        for (i, c) in components.iter().enumerate() {
            if !(c.weight.is_finite() && c.weight > 0.0) {
                return Err(Error::InvalidMixture(format!(
                    "component {i} has non-positive weight {}",
                    c.weight
                )));
            }
            if c.mean.len() != dim || c.cov.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: if c.mean.len() != dim { c.mean.len() } else { c.cov.dim() },
                });
            }
            if c.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidMixture(format!("component {i} has a non-finite mean")));
            }
            crate::numkit::Cholesky::factor(&c.cov)?;
            ks.push(c.k);
        }
        ks.sort_unstable();
        if ks.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidMixture("duplicate shift index".into()));
        }
        let coverage = components.iter().map(|c| c.weight).sum();
        Ok(Self {
            lambda,
            components,
            coverage,
        })
    }

    /// Nominal Poisson rate the mixture was built for.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    /// `Σ w_k`.
    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn shift_indices(&self) -> Vec<u64> {
        self.components.iter().map(|c| c.k).collect()
    }

    pub fn component_by_shift(&self, k: u64) -> Option<&Component> {
        self.components.iter().find(|c| c.k == k)
    }

    /// Per-component `(ln w_k, kernel)` pairs, factorised once.
    pub fn kernels(&self) -> Result<Vec<(f64, GaussianKernel)>> {
        self.components
            .iter()
            .map(|c| Ok((c.weight.ln(), GaussianKernel::new(&c.mean, &c.cov)?)))
            .collect()
    }

    /// The same mixture with components reordered by `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let components = order
            .iter()
            .map(|&i| {
                self.components.get(i).cloned().ok_or_else(|| {
                    Error::InvalidArgument(format!("permutation index {i} out of range"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if components.len() != self.components.len() {
            return Err(Error::InvalidArgument("permutation has the wrong length".into()));
        }
        Self::new(self.lambda, components)
    }
}

/// Populates a skeleton with `μ_k = (μ_{Z₂} + k)·1` and `Σ_k = σ²·I`.
/// Components come out ordered by ascending shift index; weights are kept as
/// the raw Poisson masses.
pub fn build_mixture(spec: &HybridNoiseSpec, skeleton: &Skeleton) -> Result<TruncatedMixture> {
    spec.validate()?;
    if skeleton.is_empty() {
        return Err(Error::InvalidMixture("skeleton has no components".into()));
    }
    let mut entries = skeleton.entries.clone();
    entries.sort_by_key(|e| e.k);
    let components = entries
        .iter()
        .map(|e| Component {
            k: e.k,
            weight: e.weight,
            mean: vec![spec.mu_z2 + e.k as f64; spec.dim],
            cov: SquareMatrix::scaled_identity(spec.dim, spec.sigma2_z2),
        })
        .collect();
    TruncatedMixture::new(spec.lambda, components)
}

/// `ln Σ_k w_k 𝒩(z; μ_k, Σ_k)` with the stored (possibly unnormalised)
/// weights.
pub fn mixture_logpdf(mixture: &TruncatedMixture, z: &[f64]) -> Result<f64> {
    if z.len() != mixture.dim() {
        return Err(Error::DimensionMismatch {
            expected: mixture.dim(),
            found: z.len(),
        });
    }
    let terms = mixture
        .kernels()?
        .iter()
        .map(|(lw, kernel)| lw + kernel.logpdf(z))
        .collect::<Vec<_>>();
    log_sum_exp(&terms)
}

/// Provenance of a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub seed: u64,
    pub spec: HybridNoiseSpec,
    pub generator: String,
}

/// `N` samples in `dim` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
    meta: Option<DatasetMeta>,
}

impl Dataset {
    pub fn new(dim: usize, values: Vec<f64>, meta: Option<DatasetMeta>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dataset dimension must be positive".into()));
        }
        if values.is_empty() {
            return Err(Error::InvalidArgument("dataset has no rows".into()));
        }
        if values.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form rows of length {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("dataset values must be finite".into()));
        }
        Ok(Self { dim, values, meta })
    }

    pub fn from_rows(rows: &[Vec<f64>], meta: Option<DatasetMeta>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        Self::new(dim, rows.concat(), meta)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn meta(&self) -> Option<&DatasetMeta> {
        self.meta.as_ref()
    }
}
