//! Minimal self-contained SVG line plots for band tables. One polyline per
//! band edge, a shaded region between the edges, and a dashed reference
//! line; enough to eyeball a result without external tooling.

use std::fmt::Write as _;

use ecgtrend_core::inference::ConfidenceBand;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// Render a band as an SVG document. `reference` draws a dashed horizontal
/// line (1 for level bands, 0 for derivative bands).
pub fn band_svg(band: &ConfidenceBand, title: &str, reference: f64) -> String {
    let n = band.positions.len();
    assert!(n >= 2, "plot needs at least two points");

    let x_min = band.positions[0] as f64;
    let x_max = band.positions[n - 1] as f64;
    let mut y_min = reference;
    let mut y_max = reference;
    for i in 0..n {
        y_min = y_min.min(band.lower[i]);
        y_max = y_max.max(band.upper[i]);
    }
    let pad = 0.05 * (y_max - y_min).max(1e-12);
    y_min -= pad;
    y_max += pad;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x = |t: f64| MARGIN_LEFT + (t - x_min) / (x_max - x_min).max(1e-12) * plot_w;
    let y = |v: f64| MARGIN_TOP + (y_max - v) / (y_max - y_min) * plot_h;

    let polyline = |values: &[f64]| -> String {
        let mut pts = String::new();
        for i in 0..n {
            let _ = write!(pts, "{:.2},{:.2} ", x(band.positions[i] as f64), y(values[i]));
        }
        pts.trim_end().to_string()
    };
    // Shaded band: upper edge left-to-right, lower edge back.
    let mut region = String::new();
    for i in 0..n {
        let _ = write!(region, "{:.2},{:.2} ", x(band.positions[i] as f64), y(band.upper[i]));
    }
    for i in (0..n).rev() {
        let _ = write!(region, "{:.2},{:.2} ", x(band.positions[i] as f64), y(band.lower[i]));
    }

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(svg, "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "  <text x=\"{:.1}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        xml_escape(title)
    );
    // Axes.
    let _ = writeln!(
        svg,
        "  <line x1=\"{MARGIN_LEFT}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
        HEIGHT - MARGIN_BOTTOM,
        WIDTH - MARGIN_RIGHT,
        HEIGHT - MARGIN_BOTTOM
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{:.1}\" stroke=\"black\"/>",
        HEIGHT - MARGIN_BOTTOM
    );
    // Axis labels: end ticks only.
    let _ = writeln!(
        svg,
        "  <text x=\"{MARGIN_LEFT}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        HEIGHT - MARGIN_BOTTOM + 18.0,
        x_min
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
        WIDTH - MARGIN_RIGHT,
        HEIGHT - MARGIN_BOTTOM + 18.0,
        x_max
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\">{:.4}</text>",
        MARGIN_LEFT - 6.0,
        HEIGHT - MARGIN_BOTTOM,
        y_min + pad
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\">{:.4}</text>",
        MARGIN_LEFT - 6.0,
        MARGIN_TOP + 4.0,
        y_max - pad
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">beat</text>",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    // Band region, edges, center, reference.
    let _ = writeln!(
        svg,
        "  <polygon points=\"{}\" fill=\"#9ecae1\" fill-opacity=\"0.45\" stroke=\"none\"/>",
        region.trim_end()
    );
    let _ = writeln!(
        svg,
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"#3182bd\" stroke-width=\"1\"/>",
        polyline(&band.lower)
    );
    let _ = writeln!(
        svg,
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"#3182bd\" stroke-width=\"1\"/>",
        polyline(&band.upper)
    );
    let _ = writeln!(
        svg,
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"#08306b\" stroke-width=\"1.5\"/>",
        polyline(&band.center)
    );
    if reference >= y_min && reference <= y_max {
        let _ = writeln!(
            svg,
            "  <line x1=\"{MARGIN_LEFT}\" y1=\"{:.2}\" x2=\"{:.1}\" y2=\"{:.2}\" stroke=\"#d62728\" stroke-dasharray=\"6 4\"/>",
            y(reference),
            WIDTH - MARGIN_RIGHT,
            y(reference)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
