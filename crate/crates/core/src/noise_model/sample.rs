use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{build_mixture, Dataset, DatasetMeta, HybridNoiseSpec, Skeleton, TruncatedMixture};
use crate::error::{Error, Result};
use crate::numkit::Cholesky;

/// Version tag written into dataset metadata. Bump it whenever the draw
/// sequence for a given seed changes.
pub const GENERATOR_TAG: &str = "qnoise-chacha8/1";

const STAGE_COMPONENT: u64 = 0;
const STAGE_GAUSSIAN: u64 = 1;

/// Independent stream for `(seed, row, stage)`: ChaCha stream id = row,
/// block position offset by stage.
fn keyed_rng(seed: u64, row: u64, stage: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row);
    rng.set_word_pos(u128::from(stage) << 64);
    rng
}

/// Draws `n` rows from the hybrid noise truncated to `skeleton`.
///
/// The component is chosen with the skeleton weights renormalised by their
/// coverage, then a Gaussian draw is made around that component. Every row
/// has its own keyed stream, so the output is identical for any thread
/// count.
pub fn sample(spec: &HybridNoiseSpec, skeleton: &Skeleton, n: usize, seed: u64) -> Result<Dataset> {
    let mixture = build_mixture(spec, skeleton)?;
    let values = draw(&mixture, n, seed)?;
    Dataset::new(
        spec.dim,
        values,
        Some(DatasetMeta {
            seed,
            spec: *spec,
            generator: GENERATOR_TAG.to_string(),
        }),
    )
}

/// Draws `n` rows from an arbitrary mixture (weights renormalised).
pub fn sample_mixture(mixture: &TruncatedMixture, n: usize, seed: u64) -> Result<Dataset> {
    Dataset::new(mixture.dim(), draw(mixture, n, seed)?, None)
}

fn draw(mixture: &TruncatedMixture, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be >= 1".into()));
    }
    let dim = mixture.dim();
    let factors = mixture
        .components()
        .iter()
        .map(|c| Cholesky::factor(&c.cov))
        .collect::<Result<Vec<_>>>()?;
    let cumulative = cumulative_weights(mixture);

    let mut values = vec![0.0; n * dim];
    values
        .par_chunks_mut(dim)
        .enumerate()
        .for_each(|(row, out)| {
            let idx = pick_component(&cumulative, seed, row);
            let mut rng = keyed_rng(seed, row as u64, STAGE_GAUSSIAN);
            let eps: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let shift = factors[idx].mul_lower(&eps);
            for ((o, m), s) in out.iter_mut().zip(&mixture.components()[idx].mean).zip(shift) {
                *o = m + s;
            }
        });
    Ok(values)
}

/// Component ordinal drawn for each row; the categorical stage of
/// [`sample`] on its own.
pub fn component_draws(mixture: &TruncatedMixture, n: usize, seed: u64) -> Vec<usize> {
    let cumulative = cumulative_weights(mixture);
    (0..n).map(|row| pick_component(&cumulative, seed, row)).collect()
}

fn cumulative_weights(mixture: &TruncatedMixture) -> Vec<f64> {
    let coverage = mixture.coverage();
    mixture
        .components()
        .iter()
        .scan(0.0, |acc, c| {
            *acc += c.weight / coverage;
            Some(*acc)
        })
        .collect()
}

fn pick_component(cumulative: &[f64], seed: u64, row: usize) -> usize {
    let u: f64 = keyed_rng(seed, row as u64, STAGE_COMPONENT).random();
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}
