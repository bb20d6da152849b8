use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;

use qnoise::capacity::{
    compare as compare_curves, load_curve, parse_grid, render_curves_svg, save_curve, sweep, write_curve,
    ScalarChannelParams, DETERMINANT_SOURCE_TAG,
};
use qnoise::em::{fit_observed, load_fit_report, snapshot, snapshot_file_name, EmConfig};
use qnoise::noise_model::{
    build_mixture, load_dataset, load_mixture, sample, save_dataset, save_mixture, top_k, truncate_with, write_dataset,
    HybridNoiseSpec, Skeleton, DEFAULT_TOL,
};

use crate::args::{CapacityArgs, CompareArgs, FitArgs, GenerateArgs, Rule, TruncateArgs};
use crate::{classify, style, usage, CliError, CliResult};

fn skeleton(lambda: Option<f64>, tol: Option<f64>, k: Option<usize>, rule: Option<Rule>) -> CliResult<Skeleton> {
    let lambda = lambda.ok_or_else(|| usage("--lambda is required"))?;
    if tol.is_some() && k.is_some() {
        return Err(usage("--tol and --k are mutually exclusive"));
    }
    match k {
        Some(count) => top_k(lambda, count),
        None => truncate_with(lambda, tol.unwrap_or(DEFAULT_TOL), rule.unwrap_or(Rule::Centered).into()),
    }
    .map_err(classify)
}

fn write_text(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes()).context("writing to standard output")?,
    }
    Ok(())
}

pub fn truncate(a: TruncateArgs) -> CliResult<()> {
    let sk = skeleton(a.lambda, a.tol, a.k, a.rule)?;
    let spec = HybridNoiseSpec::new(sk.lambda, a.mu_z2.unwrap_or(0.0), a.sigma2_z2.unwrap_or(1.0), a.dim.unwrap_or(2))
        .map_err(classify)?;

    let mut table = String::new();
    table.push_str(&format!(
        "lambda = {}  K = {}  coverage = {:.6}  shift indices = {:?}\n",
        sk.lambda,
        sk.len(),
        sk.coverage,
        sk.indices()
    ));
    table.push_str(&style::header(&format!("{:>6}  {:>12}", "k", "weight")));
    table.push('\n');
    for e in &sk.entries {
        table.push_str(&format!("{:>6}  {:>12.6}\n", e.k, e.weight));
    }
    print!("{table}");

    if let Some(path) = &a.out {
        let mixture = build_mixture(&spec, &sk).map_err(classify)?;
        save_mixture(path, &mixture)?;
    }
    Ok(())
}

pub fn generate(a: GenerateArgs) -> CliResult<()> {
    let seed = a
        .seed
        .ok_or_else(|| usage("--seed is required: generated datasets must be reproducible"))?;
    let n = a.n.ok_or_else(|| usage("--n is required"))?;
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let sk = skeleton(a.lambda, a.tol, a.k, a.rule)?;
    let spec = HybridNoiseSpec::new(sk.lambda, a.mu_z2.unwrap_or(0.0), a.sigma2_z2.unwrap_or(1.0), a.dim.unwrap_or(2))
        .map_err(classify)?;
    let data = sample(&spec, &sk, n, seed).map_err(classify)?;
    match &a.out {
        Some(path) => save_dataset(path, &data)?,
        None => write_dataset(std::io::stdout().lock(), &data).context("writing to standard output")?,
    }
    Ok(())
}

pub fn fit(a: FitArgs) -> CliResult<()> {
    let path = a.data.as_ref().ok_or_else(|| usage("--data is required"))?;
    let cfg = EmConfig {
        max_iters: a.max_iters.unwrap_or(EmConfig::default().max_iters),
        ll_rel_tol: a.ll_rel_tol.unwrap_or(EmConfig::default().ll_rel_tol),
        cov_floor: a.cov_floor.unwrap_or(EmConfig::default().cov_floor),
        snapshot_every: a.snapshot_every.unwrap_or(0),
    };
    cfg.validate().map_err(classify)?;

    let data = load_dataset(path).with_context(|| format!("reading {}", path.display()))?;
    let init = match &a.init {
        Some(init) => load_mixture(init).with_context(|| format!("reading {}", init.display()))?,
        None => {
            let lambda = a.lambda.or(data.meta().map(|m| m.spec.lambda)).ok_or_else(|| {
                usage("--lambda or --init is required (the dataset header records no rate)")
            })?;
            let sk = skeleton(Some(lambda), a.tol, a.k, a.rule)?;
            let spec = HybridNoiseSpec::new(lambda, a.mu_z2.unwrap_or(0.0), a.sigma2_z2.unwrap_or(1.0), data.dim())
                .map_err(classify)?;
            build_mixture(&spec, &sk).map_err(classify)?
        }
    };

    let snapshot_dir = (cfg.snapshot_every > 0).then(|| {
        a.snapshot_dir.clone().unwrap_or_else(|| {
            a.out
                .as_ref()
                .and_then(|p| p.parent())
                .filter(|p| !p.as_os_str().is_empty())
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."))
        })
    });
    if let Some(dir) = &snapshot_dir {
        if data.dim() != 2 {
            return Err(CliError::Runtime(qnoise::Error::UnsupportedDimension(data.dim()).into()));
        }
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let report = fit_observed(&data, &init, &cfg, |t, m, gamma| match &snapshot_dir {
        Some(dir) if t % cfg.snapshot_every == 0 => snapshot(m, gamma, &data, dir.join(snapshot_file_name(t))),
        _ => Ok(()),
    })?;

    let final_ll = report.iterations.last().map(|r| r.log_likelihood).unwrap_or(f64::NAN);
    let mut summary = format!(
        "converged = {}  iterations = {}  log-likelihood = {final_ll:.6}",
        report.converged, report.iterations_run
    );
    if let Some(l) = report.lambda_hat {
        summary.push_str(&format!("  lambda_hat = {:.4}", l.from_zero_weight));
    }
    eprintln!("{summary}");
    if !report.converged {
        eprintln!("{}", style::warn("note: stopped at the iteration limit before the convergence test was met"));
    }
    write_text(a.out.as_deref(), &report.to_json()?)
}

pub fn capacity(a: CapacityArgs) -> CliResult<()> {
    if a.sigma2_z2.is_some() && a.sigma_from_fit.is_some() {
        return Err(usage("--sigma2-z2 and --sigma-from-fit are mutually exclusive"));
    }
    let grid = parse_grid(a.snr_db.as_deref().unwrap_or("0:20:1")).map_err(classify)?;

    let (lambda, sigma2, from_det) = match &a.sigma_from_fit {
        Some(path) => {
            let report = load_fit_report(path).with_context(|| format!("reading {}", path.display()))?;
            let m = report.final_mixture();
            let zero = m
                .component_by_shift(0)
                .ok_or_else(|| anyhow::anyhow!("{}: fitted mixture has no zero-shift component", path.display()))?;
            let det = zero.cov.determinant()?;
            eprintln!(
                "{}",
                style::warn(&format!(
                    "note: |Sigma_0'| = {det:.6} taken as sigma, so sigma2_z2 = {:.6}",
                    det * det
                ))
            );
            (a.lambda.unwrap_or(m.lambda()), det * det, true)
        }
        None => (
            a.lambda.ok_or_else(|| usage("--lambda is required"))?,
            a.sigma2_z2.unwrap_or(1.0),
            false,
        ),
    };
    let sk = skeleton(Some(lambda), a.tol, a.k, a.rule)?;
    let mut params = ScalarChannelParams::new(sk, 1.0, sigma2).map_err(classify)?;
    params.renormalize = a.renormalize.unwrap_or(false);
    let mut curve = sweep(&params, &grid).map_err(classify)?;
    if from_det {
        curve.fingerprint = format!("{};{DETERMINANT_SOURCE_TAG}", curve.fingerprint);
    }
    match &a.out {
        Some(path) => save_curve(path, &curve)?,
        None => write_curve(std::io::stdout().lock(), &curve).context("writing to standard output")?,
    }
    Ok(())
}

fn label(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

pub fn compare(a: CompareArgs) -> CliResult<()> {
    let (pa, pb) = match (&a.a, &a.b) {
        (Some(pa), Some(pb)) => (pa, pb),
        _ => return Err(usage("compare needs two curve files")),
    };
    let ca = load_curve(pa).with_context(|| format!("reading {}", pa.display()))?;
    let cb = load_curve(pb).with_context(|| format!("reading {}", pb.display()))?;
    let report = compare_curves(&ca, &cb).with_context(|| format!("comparing {} with {}", pa.display(), pb.display()))?;

    let verdict = if report.a_dominates_b {
        format!("{} dominates {} at every grid point", label(pa), label(pb))
    } else if report.b_dominates_a {
        format!("{} dominates {} at every grid point", label(pb), label(pa))
    } else {
        format!(
            "no pointwise domination: {} higher at {} points, {} higher at {}, equal at {}",
            label(pa),
            report.points_a_higher,
            label(pb),
            report.points_b_higher,
            report.points_equal
        )
    };
    eprintln!("{verdict}");
    for note in &report.notes {
        eprintln!("{}", style::warn(&format!("note: {note}")));
    }

    let mut json = serde_json::to_string_pretty(&report).context("serialising the comparison")?;
    json.push('\n');
    write_text(a.out.as_deref(), &json)?;

    let plot = a.plot.clone().or_else(|| a.out.as_ref().map(|o| o.with_extension("svg")));
    if let Some(plot) = plot {
        let svg = render_curves_svg(&[(&ca, &label(pa)), (&cb, &label(pb))]);
        std::fs::write(&plot, svg).with_context(|| format!("writing {}", plot.display()))?;
    }
    Ok(())
}
