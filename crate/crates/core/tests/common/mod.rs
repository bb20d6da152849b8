//! Brute-force reference computations shared by the integration tests and
//! the acceptance harness. Nothing here calls into the closed forms under
//! test.
#![allow(dead_code)]

use qnoise::em::Responsibilities;
use qnoise::noise_model::{build_mixture, truncate, Dataset, HybridNoiseSpec, TruncatedMixture};
use qnoise::numkit::SquareMatrix;

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

/// Central difference of `f` at `x` along coordinate `i`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    p[i] = x[i] + h;
    let up = f(&p);
    p[i] = x[i] - h;
    let down = f(&p);
    (up - down) / (2.0 * h)
}

/// Maximises `f` over the box `[lo, hi]` by repeated grid search, shrinking
/// the box around the best grid point each round.
pub fn grid_refine_max(
    f: impl Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    points: usize,
    rounds: usize,
) -> Vec<f64> {
    let dim = lo.len();
    let (mut lo, mut hi) = (lo.to_vec(), hi.to_vec());
    let mut best = lo.clone();
    for _ in 0..rounds {
        let mut best_val = f64::NEG_INFINITY;
        let total = points.pow(dim as u32);
        let mut x = vec![0.0; dim];
        for idx in 0..total {
            let mut rest = idx;
            for d in 0..dim {
                let step = (hi[d] - lo[d]) / (points - 1) as f64;
                x[d] = lo[d] + (rest % points) as f64 * step;
                rest /= points;
            }
            let v = f(&x);
            if v > best_val {
                best_val = v;
                best.copy_from_slice(&x);
            }
        }
        for d in 0..dim {
            let span = 2.0 * (hi[d] - lo[d]) / (points - 1) as f64;
            lo[d] = best[d] - span;
            hi[d] = best[d] + span;
        }
    }
    best
}

/// Expected complete-data log-likelihood contribution of one 1-D component:
/// `Σ_n γ_n ln 𝒩(z_n; μ, σ²)`.
pub fn q_component_1d(z: &[f64], gamma: &[f64], mu: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let c = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
    z.iter()
        .zip(gamma)
        .map(|(x, g)| g * (c - 0.5 * (x - mu) * (x - mu) / var))
        .sum()
}

/// Full expected complete-data log-likelihood for any dimension, computed
/// with an explicit 1-D or 2-D density (no Cholesky).
pub fn q_full(data: &Dataset, gamma: &Responsibilities, weights: &[f64], means: &[Vec<f64>], covs: &[SquareMatrix]) -> f64 {
    let mut total = 0.0;
    for (n, z) in data.rows().enumerate() {
        for k in 0..weights.len() {
            let g = gamma.get(n, k);
            if g == 0.0 {
                continue;
            }
            total += g * (weights[k].ln() + naive_logpdf(z, &means[k], &covs[k]));
        }
    }
    total
}

/// Gaussian log-density by explicit inverse and determinant; D ≤ 2.
pub fn naive_logpdf(z: &[f64], mu: &[f64], cov: &SquareMatrix) -> f64 {
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    match z.len() {
        1 => {
            let v = cov.get(0, 0);
            -0.5 * (ln2pi + v.ln() + (z[0] - mu[0]).powi(2) / v)
        }
        2 => {
            let (a, b, c, d) = (cov.get(0, 0), cov.get(0, 1), cov.get(1, 0), cov.get(1, 1));
            let det = a * d - b * c;
            let (x, y) = (z[0] - mu[0], z[1] - mu[1]);
            let q = (d * x * x - (b + c) * x * y + a * y * y) / det;
            -0.5 * (2.0 * ln2pi + det.ln() + q)
        }
        other => panic!("naive_logpdf supports D <= 2, got {other}"),
    }
}

/// Direct log-likelihood with [`naive_logpdf`].
pub fn naive_log_likelihood(m: &TruncatedMixture, data: &Dataset) -> f64 {
    data.rows()
        .map(|z| {
            let terms: Vec<f64> = m
                .components()
                .iter()
                .map(|c| c.weight.ln() + naive_logpdf(z, &c.mean, &c.cov))
                .collect();
            let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
        })
        .sum()
}

/// The λ, D mixture with the Poisson initialisation, truncated at tol 0.15.
pub fn reference_init(lambda: f64, dim: usize) -> TruncatedMixture {
    let spec = HybridNoiseSpec::new(lambda, 0.0, 1.0, dim).unwrap();
    build_mixture(&spec, &truncate(lambda, 0.15).unwrap()).unwrap()
}

/// N=10, D=1 data and fixed two-column responsibilities for the M-step
/// optimality check.
pub fn m_step_fixture() -> (Dataset, Responsibilities) {
    let z = [-1.9, -1.1, -0.7, -0.2, 0.4, 0.9, 1.3, 2.2, 2.8, 3.5];
    let g1 = [0.97, 0.91, 0.85, 0.7, 0.55, 0.4, 0.3, 0.12, 0.05, 0.02];
    let data = Dataset::from_rows(&z.iter().map(|&v| vec![v]).collect::<Vec<_>>(), None).unwrap();
    let rows: Vec<Vec<f64>> = g1.iter().map(|&g| vec![g, 1.0 - g]).collect();
    (data, Responsibilities::from_rows(&rows).unwrap())
}

/// Brute-force maximiser of the expected complete-data log-likelihood for
/// the [`m_step_fixture`]: returns `(weights, means, variances)`.
pub fn brute_force_m_step(data: &Dataset, gamma: &Responsibilities) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let z: Vec<f64> = data.rows().map(|r| r[0]).collect();
    let k = gamma.n_components();
    let cols: Vec<Vec<f64>> = (0..k).map(|j| (0..z.len()).map(|i| gamma.get(i, j)).collect()).collect();
    let counts: Vec<f64> = cols.iter().map(|c| c.iter().sum()).collect();

    // weights: maximise Σ N_k ln w_k on the simplex (K = 2, one free coordinate)
    assert_eq!(k, 2, "brute force weight search is written for K = 2");
    let w = grid_refine_max(
        |x| {
            if x[0] <= 0.0 || x[0] >= 1.0 {
                f64::NEG_INFINITY
            } else {
                counts[0] * x[0].ln() + counts[1] * (1.0 - x[0]).ln()
            }
        },
        &[1e-6],
        &[1.0 - 1e-6],
        201,
        40,
    )[0];

    let (lo, hi) = (z.iter().cloned().fold(f64::INFINITY, f64::min), z.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let spread = (hi - lo).powi(2);
    let mut means = Vec::new();
    let mut vars = Vec::new();
    for col in &cols {
        let best = grid_refine_max(
            |x| q_component_1d(&z, col, x[0], x[1]),
            &[lo, 1e-4],
            &[hi, spread],
            101,
            40,
        );
        means.push(best[0]);
        vars.push(best[1]);
    }
    (vec![w, 1.0 - w], means, vars)
}

/// Random symmetric positive-definite matrix `B Bᵀ / D + I / 4` with the
/// entries of `B` uniform on (-1, 1).
pub fn random_spd(rng: &mut impl rand::Rng, dim: usize) -> SquareMatrix {
    let b: Vec<f64> = (0..dim * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut data = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let v = (0..dim).map(|t| b[i * dim + t] * b[j * dim + t]).sum::<f64>() / dim as f64;
            data[i * dim + j] = v;
            data[j * dim + i] = v;
        }
        data[i * dim + i] += 0.25;
    }
    SquareMatrix::from_row_major(dim, data).unwrap()
}

/// A random parameter point near the Poisson initialisation, together with
/// data drawn from the generating model.
pub fn random_problem(seed: u64, n: usize) -> (TruncatedMixture, Dataset) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let lambda = [1.0, 2.0][rng.random_range(0..2)];
    let dim = rng.random_range(1..=2);
    let spec = HybridNoiseSpec::new(lambda, 0.0, 1.0, dim).unwrap();
    let skeleton = truncate(lambda, 0.15).unwrap();
    let data = qnoise::noise_model::sample(&spec, &skeleton, n, seed).unwrap();
    let base = build_mixture(&spec, &skeleton).unwrap();
    let raw: Vec<f64> = (0..base.len()).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let components = base
        .components()
        .iter()
        .zip(&raw)
        .map(|(c, w)| qnoise::noise_model::Component {
            k: c.k,
            weight: w / total,
            mean: c.mean.iter().map(|m| m + rng.random_range(-0.5..0.5)).collect(),
            cov: random_spd(&mut rng, dim),
        })
        .collect();
    (TruncatedMixture::new(lambda, components).unwrap(), data)
}

/// Replaces the mean of component `k` by `mean`.
pub fn with_mean(m: &TruncatedMixture, k: usize, mean: &[f64]) -> TruncatedMixture {
    let mut comps = m.components().to_vec();
    comps[k].mean = mean.to_vec();
    TruncatedMixture::new(m.lambda(), comps).unwrap()
}

/// Largest relative discrepancy between the closed-form mean gradient and
/// central differences of the log-likelihood, scaled by the gradient's
/// largest entry.
pub fn gradient_discrepancy(m: &TruncatedMixture, data: &Dataset) -> f64 {
    let closed = qnoise::em::mean_gradient(m, data).unwrap();
    let mut fd = Vec::new();
    for (k, c) in m.components().iter().enumerate() {
        let f = |mu: &[f64]| qnoise::em::log_likelihood(&with_mean(m, k, mu), data).unwrap();
        fd.push((0..c.mean.len()).map(|d| central_diff(f, &c.mean, d, 1e-4)).collect::<Vec<_>>());
    }
    let scale = fd.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    closed
        .iter()
        .flatten()
        .zip(fd.iter().flatten())
        .map(|(g, f)| (g - f).abs() / scale)
        .fold(0.0, f64::max)
}

/// Setting `i` of the randomised EM monotonicity sweep: λ ∈ {1,2,5},
/// D ∈ {1,2}, N ∈ {200, 2000}, initial means jittered.
pub fn monotonicity_case(i: u64) -> (Dataset, TruncatedMixture) {
    use rand::{Rng, SeedableRng};
    let lambda = [1.0, 2.0, 5.0][(i % 3) as usize];
    let dim = 1 + ((i / 3) % 2) as usize;
    let n = [200, 2000][((i / 6) % 2) as usize];
    let spec = HybridNoiseSpec::new(lambda, 0.0, 1.0, dim).unwrap();
    let skeleton = truncate(lambda, 0.15).unwrap();
    let data = qnoise::noise_model::sample(&spec, &skeleton, n, 1000 + i).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(i);
    let base = build_mixture(&spec, &skeleton).unwrap();
    let components = base
        .components()
        .iter()
        .map(|c| qnoise::noise_model::Component {
            mean: c.mean.iter().map(|m| m + rng.random_range(-0.3..0.3)).collect(),
            ..c.clone()
        })
        .collect();
    (data, TruncatedMixture::new(lambda, components).unwrap())
}

/// Whether `ll` is nondecreasing up to `slack` relative.
pub fn nondecreasing(ll: &[f64], slack: f64) -> bool {
    ll.windows(2).all(|w| w[1] >= w[0] - slack * w[0].abs())
}
