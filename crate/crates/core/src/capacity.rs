//! Channel capacity of a Gaussian input through the truncated hybrid noise,
//! in bits per channel use.
//!
//! Scalar form, with shift indices `i, j` over the retained window:
//!
//! ```text
//! C = Σ_i w_i [ -log₂ w_i + ½ log₂(2πe(σ_X² + σ²)) + log₂ Σ_j w_j 𝒩(i - j; 0, 2σ²) ]
//! ```
//!
//! The vector form replaces the middle term by `½ log₂((2πe)^M |Σ_i^(y)|)`
//! and the cross term by `𝒩(μ_i; μ_j, Σ_i + Σ_j)`.

use std::f64::consts::{E, LN_2, PI};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise_model::{Component, Skeleton, TruncatedMixture};
use crate::numkit::{log_sum_exp, mvn_logpdf, SquareMatrix, LN_2PI};
use crate::svg::{colour, escape, Canvas};
use crate::textio::{comment_pair, format_f64};

/// Inputs of the scalar capacity formula.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarChannelParams {
    pub skeleton: Skeleton,
    /// Signal variance `σ_X²`.
    pub sigma2_x: f64,
    /// Classical noise variance `σ_{Z₂}²`.
    pub sigma2_z2: f64,
    /// Divide the weights by their coverage before evaluating. Off by
    /// default: the truncated weights enter as they are.
    pub renormalize: bool,
}

impl ScalarChannelParams {
    pub fn new(skeleton: Skeleton, sigma2_x: f64, sigma2_z2: f64) -> Result<Self> {
        let p = Self {
            skeleton,
            sigma2_x,
            sigma2_z2,
            renormalize: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma2_x", self.sigma2_x), ("sigma2_z2", self.sigma2_z2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.skeleton.is_empty() {
            return Err(Error::InvalidParameter("skeleton has no components".into()));
        }
        if let Some(e) = self.skeleton.entries.iter().find(|e| !(e.weight > 0.0 && e.weight.is_finite())) {
            return Err(Error::InvalidParameter(format!("weight for k={} must be > 0", e.k)));
        }
        Ok(())
    }

    fn weighted_indices(&self) -> Vec<(f64, f64)> {
        let scale = if self.renormalize { self.skeleton.coverage } else { 1.0 };
        self.skeleton
            .entries
            .iter()
            .map(|e| (e.weight / scale, e.k as f64))
            .collect()
    }

    /// Short description embedded in curve files.
    pub fn fingerprint(&self) -> String {
        let ks: Vec<String> = self.skeleton.indices().iter().map(u64::to_string).collect();
        format!(
            "lambda={};k={};sigma2_z2={};renormalize={}",
            self.skeleton.lambda,
            ks.join(","),
            self.sigma2_z2,
            self.renormalize
        )
    }
}

pub fn capacity_scalar(p: &ScalarChannelParams) -> Result<f64> {
    p.validate()?;
    let terms = p.weighted_indices();
    let cross_var = 2.0 * p.sigma2_z2;
    let ln_norm = -0.5 * (LN_2PI + cross_var.ln());
    let signal = 0.5 * (2.0 * PI * E * (p.sigma2_x + p.sigma2_z2)).log2();

    let mut total = 0.0;
    let mut logs = Vec::with_capacity(terms.len());
    for &(wi, i) in &terms {
        logs.clear();
        logs.extend(terms.iter().map(|&(wj, j)| wj.ln() + ln_norm - 0.5 * (i - j) * (i - j) / cross_var));
        let cross = log_sum_exp(&logs)? / LN_2;
        total += wi * (-wi.log2() + signal + cross);
    }
    Ok(total)
}

/// Inputs of the vector capacity formula: the noise mixture and one
/// received-signal covariance per component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorChannelParams {
    pub mixture: TruncatedMixture,
    pub sigma_y_covs: Vec<SquareMatrix>,
}

impl VectorChannelParams {
    pub fn new(mixture: TruncatedMixture, sigma_y_covs: Vec<SquareMatrix>) -> Result<Self> {
        if sigma_y_covs.len() != mixture.len() {
            return Err(Error::DimensionMismatch {
                expected: mixture.len(),
                found: sigma_y_covs.len(),
            });
        }
        if let Some(c) = sigma_y_covs.iter().find(|c| c.dim() != mixture.dim()) {
            return Err(Error::DimensionMismatch {
                expected: mixture.dim(),
                found: c.dim(),
            });
        }
        Ok(Self {
            mixture,
            sigma_y_covs,
        })
    }

    /// The one-dimensional instance equivalent to a scalar parameter set:
    /// `μ_i = i`, `Σ_i^(z) = σ²`, `Σ_i^(y) = σ_X² + σ²`.
    pub fn from_scalar(p: &ScalarChannelParams) -> Result<Self> {
        p.validate()?;
        let components = p
            .weighted_indices()
            .into_iter()
            .zip(&p.skeleton.entries)
            .map(|((w, i), e)| Component {
                k: e.k,
                weight: w,
                mean: vec![i],
                cov: SquareMatrix::diagonal(&[p.sigma2_z2]),
            })
            .collect();
        let mixture = TruncatedMixture::new(p.skeleton.lambda, components)?;
        let sy = SquareMatrix::diagonal(&[p.sigma2_x + p.sigma2_z2]);
        Self::new(mixture, vec![sy; p.skeleton.len()])
    }
}

pub fn capacity_vector(p: &VectorChannelParams) -> Result<f64> {
    let comps = p.mixture.components();
    let m = p.mixture.dim() as f64;
    let mut total = 0.0;
    let mut logs = Vec::with_capacity(comps.len());
    for (ci, sy) in comps.iter().zip(&p.sigma_y_covs) {
        let log_det = crate::numkit::Cholesky::factor(sy)?.log_det();
        let signal = 0.5 * (m * (2.0 * PI * E).ln() + log_det) / LN_2;
        logs.clear();
        for cj in comps {
            let joint = ci.cov.add(&cj.cov)?;
            logs.push(cj.weight.ln() + mvn_logpdf(&ci.mean, &cj.mean, &joint)?);
        }
        let cross = log_sum_exp(&logs)? / LN_2;
        total += ci.weight * (-ci.weight.log2() + signal + cross);
    }
    Ok(total)
}

/// Capacity against SNR in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityCurve {
    pub points: Vec<(f64, f64)>,
    pub fingerprint: String,
}

impl CapacityCurve {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn capacities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }
}

/// `10^(dB/10)`.
pub fn snr_from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Evaluates [`capacity_scalar`] at every grid point with
/// `σ_X² = SNR · σ_{Z₂}²`, the template's noise variance held fixed.
pub fn sweep(template: &ScalarChannelParams, snr_db_grid: &[f64]) -> Result<CapacityCurve> {
    template.validate()?;
    if snr_db_grid.is_empty() {
        return Err(Error::InvalidArgument("SNR grid is empty".into()));
    }
    if snr_db_grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("SNR grid must be finite".into()));
    }
    if snr_db_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("SNR grid must be strictly increasing".into()));
    }
    let points = snr_db_grid
        .par_iter()
        .map(|&db| {
            let p = ScalarChannelParams {
                sigma2_x: snr_from_db(db) * template.sigma2_z2,
                ..template.clone()
            };
            capacity_scalar(&p).map(|c| (db, c))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CapacityCurve {
        points,
        fingerprint: template.fingerprint(),
    })
}

/// Parses `min:max:step` (dB) into an inclusive grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("grid must be min:max:step, got {spec:?}"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [min, max, step] = parts[..] else {
        return Err(bad());
    };
    if !(min.is_finite() && max.is_finite() && step.is_finite() && step > 0.0 && max >= min) {
        return Err(bad());
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(Error::InvalidArgument(format!("grid {spec:?} has too many points")));
    }
    Ok((0..count).map(|i| min + i as f64 * step).collect())
}

/// Pointwise comparison of two curves on the same grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub grid: Vec<f64>,
    /// `capacity_a - capacity_b`.
    pub delta: Vec<f64>,
    /// True when every delta is strictly positive.
    pub a_dominates_b: bool,
    pub b_dominates_a: bool,
    pub points_a_higher: usize,
    pub points_b_higher: usize,
    pub points_equal: usize,
    /// Grid points where `a` is not strictly above `b`.
    pub points_a_not_higher: Vec<f64>,
    pub a_params: String,
    pub b_params: String,
    pub notes: Vec<String>,
}

/// Fingerprint marker for a noise variance taken from a fitted covariance
/// determinant.
pub const DETERMINANT_SOURCE_TAG: &str = "sigma_z2_from=det";

pub fn compare(a: &CapacityCurve, b: &CapacityCurve) -> Result<ComparisonReport> {
    if a.points.len() != b.points.len() {
        return Err(Error::GridMismatch(format!(
            "{} points vs {} points",
            a.points.len(),
            b.points.len()
        )));
    }
    if let Some((pa, pb)) = a.points.iter().zip(&b.points).find(|(pa, pb)| pa.0 != pb.0) {
        return Err(Error::GridMismatch(format!("{} dB vs {} dB", pa.0, pb.0)));
    }
    let delta: Vec<f64> = a.points.iter().zip(&b.points).map(|(pa, pb)| pa.1 - pb.1).collect();
    let higher = delta.iter().filter(|d| **d > 0.0).count();
    let lower = delta.iter().filter(|d| **d < 0.0).count();
    let mut notes = Vec::new();
    if [&a.fingerprint, &b.fingerprint].iter().any(|f| f.contains(DETERMINANT_SOURCE_TAG)) {
        notes.push(
            "noise variance derived as sigma = |Sigma_0'| and sigma^2 = |Sigma_0'|^2; for an \
             isotropic 2x2 covariance |Sigma| = sigma^4, so this mapping is not self-consistent"
                .to_string(),
        );
    }
    Ok(ComparisonReport {
        grid: a.grid(),
        a_dominates_b: higher == delta.len(),
        b_dominates_a: lower == delta.len(),
        points_a_higher: higher,
        points_b_higher: lower,
        points_equal: delta.len() - higher - lower,
        points_a_not_higher: a
            .points
            .iter()
            .zip(&delta)
            .filter(|(_, d)| **d <= 0.0)
            .map(|(p, _)| p.0)
            .collect(),
        delta,
        a_params: a.fingerprint.clone(),
        b_params: b.fingerprint.clone(),
        notes,
    })
}

pub fn write_curve<W: Write>(mut w: W, curve: &CapacityCurve) -> std::io::Result<()> {
    if !curve.fingerprint.is_empty() {
        writeln!(w, "# params={}", curve.fingerprint)?;
    }
    writeln!(w, "snr_db,capacity_bits")?;
    for (db, c) in &curve.points {
        writeln!(w, "{},{}", format_f64(*db), format_f64(*c))?;
    }
    w.flush()
}

pub fn read_curve<R: BufRead>(reader: R) -> Result<CapacityCurve> {
    let mut fingerprint = String::new();
    let mut header_seen = false;
    let mut points = Vec::new();
    let mut last_line = 0;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if !header_seen {
            if line.starts_with('#') {
                if let Some(("params", v)) = comment_pair(line) {
                    fingerprint = v.to_string();
                }
                continue;
            }
            if line != "snr_db,capacity_bits" {
                return Err(Error::parse(lineno, format!("malformed header {line:?}")));
            }
            header_seen = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 2 {
            return Err(Error::parse(lineno, format!("expected 2 cells, found {}", cells.len())));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(lineno, format!("non-numeric cell {s:?}")))
        };
        points.push((parse(cells[0])?, parse(cells[1])?));
    }
    if !header_seen {
        return Err(Error::parse(last_line.max(1), "missing header"));
    }
    if points.is_empty() {
        return Err(Error::parse(last_line.max(1), "no rows"));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidArgument("snr_db column must be strictly increasing".into()));
    }
    Ok(CapacityCurve { points, fingerprint })
}

pub fn save_curve(path: impl AsRef<Path>, curve: &CapacityCurve) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_curve(std::io::BufWriter::new(file), curve).map_err(|e| Error::io(path, e))
}

pub fn load_curve(path: impl AsRef<Path>) -> Result<CapacityCurve> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_curve(std::io::BufReader::new(file))
}

/// Overlay of several labelled curves.
pub fn render_curves_svg(curves: &[(&CapacityCurve, &str)]) -> String {
    let all = curves.iter().flat_map(|(c, _)| c.points.iter());
    let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
    for &(db, cap) in all {
        x = (x.0.min(db), x.1.max(db));
        y = (y.0.min(cap), y.1.max(cap));
    }
    let mut canvas = Canvas::new(720.0, 480.0, x, y);
    canvas.axes("Capacity vs SNR", "SNR (dB)", "capacity (bits/use)");
    for (i, (curve, label)) in curves.iter().enumerate() {
        let path: Vec<String> = curve
            .points
            .iter()
            .map(|&(db, cap)| format!("{:.2},{:.2}", canvas.px(db), canvas.py(cap)))
            .collect();
        let _ = writeln!(
            canvas.body,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            path.join(" "),
            colour(i)
        );
        let _ = writeln!(
            canvas.body,
            r#"<text x="70" y="{}" font-size="12" fill="{}">{}</text>"#,
            70 + 16 * i,
            colour(i),
            escape(label)
        );
    }
    canvas.finish()
}
