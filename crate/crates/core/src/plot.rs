//! Minimal SVG charts. Output depends only on the input values, so equal data
//! gives byte-identical files.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(values: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut f = Frame {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for (x, y) in values.filter(|(x, y)| x.is_finite() && y.is_finite()) {
            f.x0 = f.x0.min(x);
            f.x1 = f.x1.max(x);
            f.y0 = f.y0.min(y);
            f.y1 = f.y1.max(y);
        }
        if !f.x0.is_finite() {
            (f.x0, f.x1, f.y0, f.y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if f.x1 - f.x0 < 1e-12 {
            f.x1 = f.x0 + 1.0;
        }
        if f.y1 - f.y0 < 1e-12 {
            f.y1 = f.y0 + 1.0;
        }
        f
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str, xlabel: &str, ylabel: &str, f: &Frame) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{l:.1} {t:.1} L{l:.1} {b:.1} L{r:.1} {b:.1}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let xv = f.x0 + frac * (f.x1 - f.x0);
        let yv = f.y0 + frac * (f.y1 - f.y0);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            f.px(xv),
            b + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            l - 6.0,
            f.py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn legend(out: &mut String, labels: &[&str]) {
    for (i, label) in labels.iter().enumerate() {
        let y = MARGIN + 6.0 + 16.0 * i as f64;
        let x = WIDTH - MARGIN - 120.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            y - 9.0,
            COLORS[i % COLORS.len()],
            x + 14.0,
            y,
            escape(label)
        );
    }
}

/// Line chart with one polyline per series.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series<'_>]) -> String {
    let f = Frame::fit(series.iter().flat_map(|s| s.points.iter().copied()));
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel, &f);
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            pts.join(" "),
            COLORS[i % COLORS.len()]
        );
    }
    if series.len() > 1 {
        legend(&mut out, &series.iter().map(|s| s.label).collect::<Vec<_>>());
    }
    out.push_str("</svg>\n");
    out
}

/// Bar chart of labelled values.
pub fn bar_chart(title: &str, ylabel: &str, bars: &[(String, f64)]) -> String {
    let f = Frame::fit(
        bars.iter()
            .enumerate()
            .map(|(i, b)| (i as f64, b.1))
            .chain([(-0.5, 0.0), (bars.len() as f64 - 0.5, 0.0)]),
    );
    let mut out = String::new();
    header(&mut out, title, "", ylabel, &f);
    let width = (f.px(1.0) - f.px(0.0)) * 0.7;
    for (i, (label, v)) in bars.iter().enumerate() {
        let (top, base) = (f.py(v.max(0.0)), f.py(v.min(0.0)));
        let x = f.px(i as f64) - width / 2.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{top:.2}" width="{width:.2}" height="{:.2}" fill="{}"><title>{} = {}</title></rect>"#,
            (base - top).max(0.0),
            COLORS[0],
            escape(label),
            tick(*v)
        );
    }
    out.push_str("</svg>\n");
    out
}
