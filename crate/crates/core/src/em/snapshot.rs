use std::fmt::Write;
use std::path::Path;

use super::Responsibilities;
use crate::error::{Error, Result};
use crate::noise_model::{Dataset, TruncatedMixture};
use crate::numkit::ellipse_2d;
use crate::svg::{colour, Canvas};

/// Mahalanobis radius of the drawn component outlines.
pub const ELLIPSE_RADIUS: f64 = 2.0;

pub fn snapshot_file_name(iteration: usize) -> String {
    format!("iter_{iteration:04}.svg")
}

/// Scatter of `data` coloured by the most responsible component, with the
/// radius-2 Mahalanobis ellipse of every component. 2-D data only.
pub fn render_snapshot_svg(
    m: &TruncatedMixture,
    gamma: &Responsibilities,
    data: &Dataset,
    title: &str,
) -> Result<String> {
    if data.dim() != 2 {
        return Err(Error::UnsupportedDimension(data.dim()));
    }
    if m.dim() != 2 {
        return Err(Error::UnsupportedDimension(m.dim()));
    }
    if gamma.n_rows() != data.len() || gamma.n_components() != m.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: gamma.n_rows(),
        });
    }

    let ellipses = m
        .components()
        .iter()
        .map(|c| ellipse_2d(&c.cov, ELLIPSE_RADIUS))
        .collect::<Result<Vec<_>>>()?;
    let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
    let mut extend = |px: f64, py: f64| {
        x = (x.0.min(px), x.1.max(px));
        y = (y.0.min(py), y.1.max(py));
    };
    for z in data.rows() {
        extend(z[0], z[1]);
    }
    for (c, (a, _, _)) in m.components().iter().zip(&ellipses) {
        extend(c.mean[0] - a, c.mean[1] - a);
        extend(c.mean[0] + a, c.mean[1] + a);
    }

    // equal aspect so rotated ellipses are not sheared
    let half = 0.5 * (x.1 - x.0).max(y.1 - y.0);
    let (cx, cy) = (0.5 * (x.0 + x.1), 0.5 * (y.0 + y.1));
    let mut canvas = Canvas::new(640.0, 640.0, (cx - half, cx + half), (cy - half, cy + half));
    canvas.axes(title, "x0", "x1");
    let labels = gamma.argmax();
    for (z, label) in data.rows().zip(&labels) {
        let _ = writeln!(
            canvas.body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.6" fill="{}" fill-opacity="0.6"/>"#,
            canvas.px(z[0]),
            canvas.py(z[1]),
            colour(*label)
        );
    }
    let (sx, sy) = canvas.scale();
    for (i, (c, (a, b, angle))) in m.components().iter().zip(&ellipses).enumerate() {
        let (cx, cy) = (canvas.px(c.mean[0]), canvas.py(c.mean[1]));
        // the y axis is flipped, so the rotation is negated
        let _ = writeln!(
            canvas.body,
            r##"<ellipse cx="{cx:.2}" cy="{cy:.2}" rx="{:.2}" ry="{:.2}" transform="rotate({:.3} {cx:.2} {cy:.2})" fill="none" stroke="{}" stroke-width="2"><title>k={} w={:.4}</title></ellipse>"##,
            a * sx,
            b * sy,
            -angle.to_degrees(),
            colour(i),
            c.k,
            c.weight
        );
        let _ = writeln!(
            canvas.body,
            r##"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="#000"/>"##
        );
    }
    Ok(canvas.finish())
}

pub fn snapshot(
    m: &TruncatedMixture,
    gamma: &Responsibilities,
    data: &Dataset,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let title = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let svg = render_snapshot_svg(m, gamma, data, &title)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
