//! Acceptance suite: one PASS/FAIL line per criterion, each at its stated
//! tolerance and runtime budget. Exits non-zero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use qnoise::capacity::{
    capacity_scalar, capacity_vector, compare, sweep, ComparisonReport, ScalarChannelParams,
    VectorChannelParams,
};
use qnoise::em::{fit, m_step, EmConfig};
use qnoise::noise_model::{build_mixture, sample, top_k, truncate, HybridNoiseSpec, Skeleton};

/// Seed of the reference recovery run.
const RECOVERY_SEED: u64 = 42;

type Check = Result<String, String>;

struct Outcome {
    id: usize,
    title: &'static str,
    result: Check,
    elapsed: Duration,
    budget: Duration,
}

fn run(id: usize, title: &'static str, budget_secs: u64, f: impl FnOnce() -> Check) -> Outcome {
    let start = Instant::now();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
        .unwrap_or_else(|p| Err(format!("panicked: {}", p.downcast_ref::<String>().cloned().unwrap_or_default())));
    Outcome { id, title, result, elapsed: start.elapsed(), budget: Duration::from_secs(budget_secs) }
}

/// Collects sub-check failures so one criterion reports all of them.
#[derive(Default)]
struct Failures(Vec<String>);

impl Failures {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.0.push(what());
        }
    }

    fn finish(self, detail: String) -> Check {
        if self.0.is_empty() {
            Ok(detail)
        } else {
            Err(format!("{}; {}", self.0.join("; "), detail))
        }
    }
}

fn within(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

fn truncation_table() -> Check {
    let mut f = Failures::default();
    let l2 = truncate(2.0, 0.15).map_err(|e| e.to_string())?;
    f.check(l2.len() == 5, || format!("lambda=2: K={} (want 5)", l2.len()));
    f.check(within(l2.coverage, 0.94735, 5e-4), || format!("lambda=2 coverage {:.6} (want 0.94735)", l2.coverage));
    let mut weights: Vec<(u64, f64)> = l2.entries.iter().map(|e| (e.k, e.weight)).collect();
    weights.sort_by_key(|e| e.0);
    for ((k, w), want) in weights.iter().zip([0.1353, 0.2707, 0.2707, 0.1804, 0.0902]) {
        f.check(within(*w, want, 5e-4), || format!("w{k}={w:.4} (want {want})"));
    }
    let l5 = truncate(5.0, 0.15).map_err(|e| e.to_string())?;
    f.check(l5.len() == 7, || format!("lambda=5: K={} (want 7)", l5.len()));
    f.check(within(l5.coverage, 0.8895, 5e-4), || {
        format!("lambda=5 coverage {:.6} (want 0.8895 +- 5e-4)", l5.coverage)
    });
    let top5 = top_k(5.0, 5).map_err(|e| e.to_string())?;
    f.check(within(top5.coverage, 0.742, 5e-4), || format!("lambda=5 top-5 mass {:.6} (want 0.742)", top5.coverage));
    f.check(top5.coverage < 0.85, || "top-5 mass reaches 0.85".into());
    f.finish(format!(
        "lambda=2 K={} cov={:.5}; lambda=5 K={} cov={:.5}; top-5 {:.5}",
        l2.len(),
        l2.coverage,
        l5.len(),
        l5.coverage,
        top5.coverage
    ))
}

fn em_monotonicity() -> Check {
    let cfg = EmConfig::default();
    let mut worst = 0.0f64;
    let mut steps = 0;
    for i in 0..100 {
        let (data, init) = common::monotonicity_case(i);
        let report = fit(&data, &init, &cfg).map_err(|e| format!("fit {i}: {e}"))?;
        let ll = report.log_likelihoods();
        for w in ll.windows(2) {
            worst = worst.max((w[0] - w[1]) / w[0].abs());
        }
        steps += report.iterations_run;
        if !common::nondecreasing(&ll, 1e-9) {
            return Err(format!("fit {i}: log-likelihood dropped by {worst:e} relative"));
        }
    }
    Ok(format!("100 fits, {steps} EM steps, largest relative drop {worst:.1e}"))
}

fn gradient_oracle() -> Check {
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let (m, data) = common::random_problem(seed, 200);
        let err = common::gradient_discrepancy(&m, &data);
        worst = worst.max(err);
        if err >= 1e-5 {
            return Err(format!("point {seed}: relative discrepancy {err:e}"));
        }
    }
    Ok(format!("20 points, worst relative discrepancy {worst:.1e}"))
}

fn m_step_oracle() -> Check {
    let (data, gamma) = common::m_step_fixture();
    let step = m_step(&data, &gamma, &EmConfig { cov_floor: 0.0, ..EmConfig::default() }).map_err(|e| e.to_string())?;
    let (w, mu, var) = common::brute_force_m_step(&data, &gamma);
    let mut worst = 0.0f64;
    let mut f = Failures::default();
    for k in 0..2 {
        for (name, got, want) in [
            ("w", step.weights[k], w[k]),
            ("mu", step.means[k][0], mu[k]),
            ("var", step.covs[k].get(0, 0), var[k]),
        ] {
            worst = worst.max((got - want).abs());
            f.check(within(got, want, 1e-6), || format!("{name}{k}: closed form {got} vs brute force {want}"));
        }
    }
    f.finish(format!("largest parameter gap {worst:.1e}"))
}

fn reference_recovery() -> Check {
    let spec = HybridNoiseSpec::new(2.0, 0.0, 1.0, 2).map_err(|e| e.to_string())?;
    let sk = truncate(2.0, 0.15).map_err(|e| e.to_string())?;
    let data = sample(&spec, &sk, 3000, RECOVERY_SEED).map_err(|e| e.to_string())?;
    let init = build_mixture(&spec, &sk).map_err(|e| e.to_string())?;
    let report = fit(&data, &init, &EmConfig::default()).map_err(|e| e.to_string())?;
    let m = report.final_mixture();

    let mut f = Failures::default();
    f.check(report.converged && report.iterations_run <= 200, || {
        format!("not converged within 200 iterations (ran {})", report.iterations_run)
    });
    let mut worst = (0, 0.0f64);
    for c in m.components() {
        let d = c.mean.iter().map(|v| (v - c.k as f64).powi(2)).sum::<f64>().sqrt();
        if d > worst.1 {
            worst = (c.k, d);
        }
        f.check(d <= 0.15, || format!("mean k={} is {d:.3} from ({0},{0})", c.k));
    }
    let lambda_hat = report.lambda_hat.map(|l| l.from_zero_weight).unwrap_or(f64::NAN);
    f.check((1.4..=2.4).contains(&lambda_hat), || format!("lambda_hat {lambda_hat:.4} outside [1.4, 2.4]"));
    let total: f64 = m.weights().iter().sum();
    f.check(within(total, 1.0, 1e-12), || format!("weights sum to {total}"));
    let weights: Vec<String> = m.weights().iter().map(|w| format!("{w:.4}")).collect();
    f.finish(format!(
        "seed {RECOVERY_SEED}: iterations {} converged {} lambda_hat {lambda_hat:.4} max mean offset {:.3} (k={}) w=[{}]",
        report.iterations_run,
        report.converged,
        worst.1,
        worst.0,
        weights.join(", ")
    ))
}

fn capacity_limit() -> Check {
    let single = Skeleton::from_weights(1.0, &[(0, 1.0)]).map_err(|e| e.to_string())?;
    let mut f = Failures::default();
    let mut worst = 0.0f64;
    for snr in [0.1, 1.0, 10.0, 100.0] {
        let p = ScalarChannelParams::new(single.clone(), snr, 1.0).map_err(|e| e.to_string())?;
        let got = capacity_scalar(&p).map_err(|e| e.to_string())?;
        let want = 0.5 * (std::f64::consts::E * (1.0 + snr) / 2.0).log2();
        worst = worst.max(common::rel_err(got, want));
        f.check(common::rel_err(got, want) <= 1e-12, || format!("SNR {snr}: {got} vs {want}"));
    }
    for (sk, s2x, s2) in [(truncate(2.0, 0.15), 1.0, 1.0), (truncate(5.0, 0.15), 10.0, 0.687), (Ok(single), 3.0, 0.5)] {
        let p = ScalarChannelParams::new(sk.map_err(|e| e.to_string())?, s2x, s2).map_err(|e| e.to_string())?;
        let s = capacity_scalar(&p).map_err(|e| e.to_string())?;
        let v = capacity_vector(&VectorChannelParams::from_scalar(&p).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        worst = worst.max(common::rel_err(v, s));
        f.check(common::rel_err(v, s) <= 1e-12, || format!("M=1 vector {v} vs scalar {s}"));
    }
    f.finish(format!("worst relative error {worst:.1e}"))
}

const SWEEP_ORACLE: [(f64, f64); 5] = [
    (0.0, 2.130906091416466908826754),
    (5.0, 2.63175575077408984484375),
    (10.0, 3.295873652899224929009235),
    (15.0, 4.038771814450697600579717),
    (20.0, 4.811050879124506342960426),
];

fn unit_template(sigma2: f64) -> Result<ScalarChannelParams, String> {
    ScalarChannelParams::new(truncate(2.0, 0.15).map_err(|e| e.to_string())?, 1.0, sigma2).map_err(|e| e.to_string())
}

fn sweep_properties() -> Check {
    let grid: Vec<f64> = (0..=20).map(f64::from).collect();
    let curve = sweep(&unit_template(1.0)?, &grid).map_err(|e| e.to_string())?;
    let caps = curve.capacities();
    let mut f = Failures::default();
    f.check(caps.windows(2).all(|w| w[1] > w[0]), || "curve is not strictly increasing".into());
    let mut worst = 0.0f64;
    for (db, want) in SWEEP_ORACLE {
        let got = caps[db as usize];
        worst = worst.max(common::rel_err(got, want));
        f.check(common::rel_err(got, want) <= 1e-10, || format!("{db} dB: {got} vs {want}"));
    }
    f.finish(format!("21 points increasing, worst oracle error {worst:.1e}"))
}

fn comparison() -> Check {
    let grid: Vec<f64> = (0..=20).map(f64::from).collect();
    let a = sweep(&unit_template(0.687)?, &grid).map_err(|e| e.to_string())?;
    let b = sweep(&unit_template(1.0)?, &grid).map_err(|e| e.to_string())?;
    let report: ComparisonReport = compare(&a, &b).map_err(|e| e.to_string())?;
    let text = serde_json::to_string(&report).map_err(|e| e.to_string())?;
    let parsed: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;

    let mut f = Failures::default();
    f.check(parsed["a_dominates_b"].is_boolean(), || "verdict missing".into());
    f.check(report.points_a_not_higher.len() == grid.len() - report.points_a_higher, || {
        "contradicting points not all flagged".into()
    });
    f.check(report.a_dominates_b == report.points_a_not_higher.is_empty(), || "verdict and flags disagree".into());
    f.finish(format!(
        "0.687 curve dominates 1.0 curve: {}; {} of {} points contradict the expected direction (0 dB delta {:+.4} bits)",
        report.a_dominates_b,
        report.points_a_not_higher.len(),
        grid.len(),
        report.delta[0]
    ))
}

fn pipeline(dir: &Path, threads: &str) -> Result<Vec<(String, Vec<u8>)>, String> {
    let steps: [&[&str]; 3] = [
        &["generate", "--lambda", "2", "--dim", "2", "--n", "3000", "--seed", "42", "--out", "gt.csv"],
        &["fit", "--data", "gt.csv", "--out", "fit.json"],
        &["capacity", "--sigma-from-fit", "fit.json", "--snr-db", "0:20:1", "--out", "curve.csv"],
    ];
    for args in steps {
        let o = Command::new(env!("CARGO_BIN_EXE_qnoise"))
            .current_dir(dir)
            .args(["--threads", threads])
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
    }
    ["gt.csv", "fit.json", "curve.csv"]
        .iter()
        .map(|n| std::fs::read(dir.join(n)).map(|b| (n.to_string(), b)).map_err(|e| e.to_string()))
        .collect()
}

fn determinism() -> Check {
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let one_a = pipeline(dirs[0].path(), "1")?;
    let one_b = pipeline(dirs[1].path(), "1")?;
    let four = pipeline(dirs[2].path(), "4")?;
    let mut f = Failures::default();
    for ((a, b), c) in one_a.iter().zip(&one_b).zip(&four) {
        f.check(a.1 == b.1, || format!("{} differs between two --threads 1 runs", a.0));
        f.check(a.1 == c.1, || format!("{} differs between --threads 1 and --threads 4", a.0));
    }
    let bytes: usize = one_a.iter().map(|f| f.1.len()).sum();
    f.finish(format!("gt.csv, fit.json, curve.csv identical across 3 runs ({bytes} bytes)"))
}

fn main() {
    let outcomes = [
        run(1, "truncation table", 1, truncation_table),
        run(2, "EM monotonicity", 60, em_monotonicity),
        run(3, "mean-gradient oracle", 10, gradient_oracle),
        run(4, "M-step optimality oracle", 30, m_step_oracle),
        run(5, "reference recovery", 30, reference_recovery),
        run(6, "capacity closed-form limit", 1, capacity_limit),
        run(7, "capacity sweep properties", 5, sweep_properties),
        run(8, "capacity comparison", 5, comparison),
        run(9, "determinism", 60, determinism),
    ];
    let mut failed = 0;
    for o in &outcomes {
        let in_time = o.elapsed <= o.budget;
        let (status, detail) = match (&o.result, in_time) {
            (Ok(d), true) => ("PASS", d.clone()),
            (Ok(d), false) => ("FAIL", format!("over budget; {d}")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "{status} criterion {} ({}) [{:.2}s / {}s]: {detail}",
            o.id,
            o.title,
            o.elapsed.as_secs_f64(),
            o.budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
