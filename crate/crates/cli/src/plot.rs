//! Minimal data-driven SVG line plots: axes, ticks, polylines, legend.
//! No styling beyond what the data needs, no external assets, and fully
//! deterministic output for hash-compared reruns.

use std::fmt::Write as _;

pub struct Series {
    pub name: String,
    pub color: &'static str,
    /// (x, y) pairs in data coordinates.
    pub points: Vec<(f64, f64)>,
}

pub const PALETTE: [&str; 4] = ["#c0392b", "#2980b9", "#27ae60", "#8e44ad"];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;

pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1) = padded_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = padded_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );

    // Axes.
    let _ = writeln!(
        svg,
        "  <line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"#333\"/>",
        l = MARGIN_L,
        r = WIDTH - MARGIN_R,
        b = HEIGHT - MARGIN_B
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"#333\"/>",
        l = MARGIN_L,
        t = MARGIN_T,
        b = HEIGHT - MARGIN_B
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{}\" text-anchor=\"middle\" fill=\"#333\">{}</text>",
            px(fx),
            HEIGHT - MARGIN_B + 18.0,
            tick_label(fx)
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\" fill=\"#333\">{}</text>",
            MARGIN_L - 8.0,
            py(fy) + 4.0,
            tick_label(fy)
        );
    }
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"#333\">{}</text>",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        "  <text x=\"14\" y=\"{}\" text-anchor=\"middle\" fill=\"#333\" \
         transform=\"rotate(-90 14 {y})\">{}</text>",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        escape(y_label),
        y = (MARGIN_T + HEIGHT - MARGIN_B) / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let mut pts = String::new();
        for (x, y) in &s.points {
            let _ = write!(pts, "{:.2},{:.2} ", px(*x), py(*y));
        }
        let _ = writeln!(
            svg,
            "  <polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            s.color,
            pts.trim_end()
        );
        let ly = MARGIN_T + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            "  <line x1=\"{x}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{}\" stroke-width=\"2\"/>",
            WIDTH - MARGIN_R - 64.0,
            s.color,
            x = WIDTH - MARGIN_R - 88.0,
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\" fill=\"#333\">{}</text>",
            WIDTH - MARGIN_R - 58.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Data bounds with 5% padding; degenerate ranges widen to a unit span.
fn padded_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
