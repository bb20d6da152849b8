//! Small helpers shared by the CSV writers and readers.

/// 17 significant digits, enough for an exact `f64` round trip.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Splits a `# key=value` comment line. Returns `None` for other comments.
pub(crate) fn comment_pair(line: &str) -> Option<(&str, &str)> {
    let body = line.strip_prefix('#')?.trim();
    let (k, v) = body.split_once('=')?;
    Some((k.trim(), v.trim()))
}
