//! Minimal SVG plotting: a fixed-size canvas with linear axes.

use std::fmt::Write;

pub(crate) const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

pub(crate) fn colour(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

pub(crate) fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub(crate) struct Canvas {
    pub width: f64,
    pub height: f64,
    margin: f64,
    x: (f64, f64),
    y: (f64, f64),
    pub body: String,
}

impl Canvas {
    pub fn new(width: f64, height: f64, x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self {
            width,
            height,
            margin: 50.0,
            x: widen(x),
            y: widen(y),
            body: String::new(),
        }
    }

    pub fn px(&self, x: f64) -> f64 {
        self.margin + (x - self.x.0) / (self.x.1 - self.x.0) * (self.width - 2.0 * self.margin)
    }

    pub fn py(&self, y: f64) -> f64 {
        self.height - self.margin - (y - self.y.0) / (self.y.1 - self.y.0) * (self.height - 2.0 * self.margin)
    }

    /// Scale factors from data units to pixels.
    pub fn scale(&self) -> (f64, f64) {
        (
            (self.width - 2.0 * self.margin) / (self.x.1 - self.x.0),
            (self.height - 2.0 * self.margin) / (self.y.1 - self.y.0),
        )
    }

    pub fn axes(&mut self, title: &str, x_label: &str, y_label: &str) {
        let (l, r) = (self.margin, self.width - self.margin);
        let (t, b) = (self.margin, self.height - self.margin);
        let _ = writeln!(
            self.body,
            r##"<rect x="{l}" y="{t}" width="{w}" height="{h}" fill="none" stroke="#444"/>"##,
            w = r - l,
            h = b - t
        );
        let _ = writeln!(
            self.body,
            r#"<text x="{x}" y="{y}" text-anchor="middle" font-size="14">{}</text>"#,
            escape(title),
            x = self.width / 2.0,
            y = t - 15.0
        );
        let _ = writeln!(
            self.body,
            r#"<text x="{x}" y="{y}" text-anchor="middle" font-size="12">{}</text>"#,
            escape(x_label),
            x = self.width / 2.0,
            y = self.height - 12.0
        );
        let _ = writeln!(
            self.body,
            r#"<text x="14" y="{y}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {y})">{}</text>"#,
            escape(y_label),
            y = self.height / 2.0
        );
        for (v, label) in [(self.x.0, "lo"), (self.x.1, "hi")] {
            let anchor = if label == "lo" { "start" } else { "end" };
            let _ = writeln!(
                self.body,
                r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-size="10">{v:.3}</text>"#,
                x = self.px(v),
                y = b + 14.0
            );
        }
        for v in [self.y.0, self.y.1] {
            let _ = writeln!(
                self.body,
                r#"<text x="{x:.2}" y="{y:.2}" text-anchor="end" font-size="10">{v:.3}</text>"#,
                x = l - 4.0,
                y = self.py(v) + 3.0
            );
        }
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n",
            w = self.width,
            h = self.height,
            body = self.body
        )
    }
}
