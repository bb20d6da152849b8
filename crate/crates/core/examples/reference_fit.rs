//! Fits the λ=2, 2-D hybrid noise with the Poisson initialisation and prints
//! the fitted components.
//!
//! cargo run --release -p qnoise-core --example reference_fit -- [seed] [n] [max_iters] [data.csv]

use qnoise::em::{fit, EmConfig};
use qnoise::noise_model::{build_mixture, sample, truncate, HybridNoiseSpec};

fn main() -> qnoise::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3000);
    let max_iters: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let dump = args.next();

    let spec = HybridNoiseSpec::new(2.0, 0.0, 1.0, 2)?;
    let skeleton = truncate(spec.lambda, 0.15)?;
    let data = sample(&spec, &skeleton, n, seed)?;
    let init = build_mixture(&spec, &skeleton)?;
    if let Some(path) = dump {
        qnoise::noise_model::save_dataset(path, &data)?;
    }
    let cfg = EmConfig { max_iters, ..EmConfig::default() };
    let report = fit(&data, &init, &cfg)?;

    println!("seed={seed} n={n} converged={} iterations={}", report.converged, report.iterations_run);
    for c in report.final_mixture().components() {
        let dist = c.mean.iter().map(|m| (m - c.k as f64).powi(2)).sum::<f64>().sqrt();
        println!(
            "k={} w={:.4} mean=({:.4}, {:.4}) |mean-(k,k)|={:.3} cov=[{:.4} {:.4}; {:.4}]",
            c.k, c.weight, c.mean[0], c.mean[1], dist, c.cov.get(0, 0), c.cov.get(0, 1), c.cov.get(1, 1)
        );
    }
    if let Some(l) = report.lambda_hat {
        println!("lambda_hat={:.4} moment={:.4}", l.from_zero_weight, l.moment);
    }
    Ok(())
}
