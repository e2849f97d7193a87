//! Hand-rolled, self-contained SVG plots: no scripts, no external fonts or
//! stylesheets, fixed palette, deterministic output for identical inputs.
//!
//! Two plot kinds cover the harness: a log-y overlay of solver traces
//! (optimality gap vs iteration) and a linear scatter-with-fit for the
//! speedup table (iteration ratio vs network size).

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 26.0;
const MARGIN_B: f64 = 56.0;

/// Fixed series palette (cycled when there are more series).
pub const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// One named data series.
pub struct Series {
    /// Legend label.
    pub label: String,
    /// (x, y) samples in data coordinates.
    pub points: Vec<(f64, f64)>,
}

fn document(body: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{body}</svg>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        body = body
    )
}

fn axis_frame() -> String {
    format!(
        "<rect x=\"{l:.2}\" y=\"{t:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" \
         fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n",
        l = MARGIN_L,
        t = MARGIN_T,
        w = WIDTH - MARGIN_L - MARGIN_R,
        h = HEIGHT - MARGIN_T - MARGIN_B
    )
}

fn x_label(text: &str) -> String {
    format!(
        "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"middle\" \
         font-family=\"monospace\" font-size=\"13\">{text}</text>\n",
        x = (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        y = HEIGHT - 12.0
    )
}

fn y_label(text: &str) -> String {
    let x = 18.0;
    let y = (MARGIN_T + HEIGHT - MARGIN_B) / 2.0;
    format!(
        "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"middle\" \
         font-family=\"monospace\" font-size=\"13\" \
         transform=\"rotate(-90 {x:.2} {y:.2})\">{text}</text>\n"
    )
}

fn legend(labels: &[String]) -> String {
    let mut out = String::new();
    let x = MARGIN_L + 14.0;
    for (i, label) in labels.iter().enumerate() {
        let y = MARGIN_T + 16.0 + 18.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        out.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{y:.2}\" x2=\"{x2:.2}\" y2=\"{y:.2}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{tx:.2}\" y=\"{ty:.2}\" font-family=\"monospace\" \
             font-size=\"12\">{label}</text>\n",
            x2 = x + 26.0,
            tx = x + 32.0,
            ty = y + 4.0
        ));
    }
    out
}

/// Evenly spaced "nice" ticks covering `[lo, hi]`.
fn linear_ticks(lo: f64, hi: f64, want: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / want as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| (hi - lo) / s <= want as f64)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    let mut t = start;
    while t <= hi + 1e-9 * step {
        ticks.push(t);
        t += step;
    }
    ticks
}

/// Overlay line plot with a linear x-axis and log₁₀ y-axis.
///
/// Non-positive y values (possible only for an exactly-zero gap) are
/// clamped to the lowest plotted decade so the polyline stays connected.
#[must_use]
pub fn log_line_plot(series: &[Series], x_title: &str, y_title: &str) -> String {
    let xs: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .collect();
    let ys: Vec<f64> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .filter(|v| *v > 0.0 && v.is_finite())
        .collect();
    let (x_lo, x_hi) = bounds(&xs, (0.0, 1.0));
    let (y_lo, y_hi) = bounds(&ys, (1e-1, 1e1));
    let dec_lo = y_lo.log10().floor();
    let dec_hi = y_hi.log10().ceil().max(dec_lo + 1.0);

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |v: f64| MARGIN_L + (v - x_lo) / (x_hi - x_lo).max(1e-300) * plot_w;
    let sy = |v: f64| {
        let d = v.max(10f64.powf(dec_lo)).log10();
        MARGIN_T + (dec_hi - d) / (dec_hi - dec_lo) * plot_h
    };

    let mut body = String::new();
    // Decade grid and labels (thinned to at most ~12 labeled decades).
    let decades = (dec_hi - dec_lo) as i64;
    let stride = (decades as f64 / 12.0).ceil().max(1.0) as i64;
    for i in 0..=decades {
        if i % stride != 0 {
            continue;
        }
        let d = dec_lo + i as f64;
        let y = sy(10f64.powf(d));
        body.push_str(&format!(
            "<line x1=\"{l:.2}\" y1=\"{y:.2}\" x2=\"{r:.2}\" y2=\"{y:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n\
             <text x=\"{tx:.2}\" y=\"{ty:.2}\" text-anchor=\"end\" \
             font-family=\"monospace\" font-size=\"11\">1e{d:+03.0}</text>\n",
            l = MARGIN_L,
            r = WIDTH - MARGIN_R,
            tx = MARGIN_L - 6.0,
            ty = y + 4.0
        ));
    }
    for t in linear_ticks(x_lo, x_hi, 6) {
        let x = sx(t);
        body.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{b:.2}\" x2=\"{x:.2}\" y2=\"{b2:.2}\" \
             stroke=\"black\" stroke-width=\"1\"/>\n\
             <text x=\"{x:.2}\" y=\"{ty:.2}\" text-anchor=\"middle\" \
             font-family=\"monospace\" font-size=\"11\">{t}</text>\n",
            b = HEIGHT - MARGIN_B,
            b2 = HEIGHT - MARGIN_B + 5.0,
            ty = HEIGHT - MARGIN_B + 18.0
        ));
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1)))
            .collect();
        body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
    }
    body.push_str(&axis_frame());
    body.push_str(&legend(
        &series.iter().map(|s| s.label.clone()).collect::<Vec<_>>(),
    ));
    body.push_str(&x_label(x_title));
    body.push_str(&y_label(y_title));
    document(&body)
}

/// Scatter plot with a least-squares fit line, linear axes.
#[must_use]
pub fn scatter_fit_plot(
    points: &[(f64, f64)],
    fit: Option<(f64, f64)>,
    x_title: &str,
    y_title: &str,
) -> String {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (x_lo, x_hi) = pad(bounds(&xs, (0.0, 1.0)));
    let (y_lo, y_hi) = pad(bounds(&ys, (0.0, 1.0)));

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |v: f64| MARGIN_L + (v - x_lo) / (x_hi - x_lo).max(1e-300) * plot_w;
    let sy = |v: f64| MARGIN_T + (y_hi - v) / (y_hi - y_lo).max(1e-300) * plot_h;

    let mut body = String::new();
    for t in linear_ticks(y_lo, y_hi, 6) {
        let y = sy(t);
        body.push_str(&format!(
            "<line x1=\"{l:.2}\" y1=\"{y:.2}\" x2=\"{r:.2}\" y2=\"{y:.2}\" \
             stroke=\"#dddddd\" stroke-width=\"1\"/>\n\
             <text x=\"{tx:.2}\" y=\"{ty:.2}\" text-anchor=\"end\" \
             font-family=\"monospace\" font-size=\"11\">{t}</text>\n",
            l = MARGIN_L,
            r = WIDTH - MARGIN_R,
            tx = MARGIN_L - 6.0,
            ty = y + 4.0
        ));
    }
    for t in linear_ticks(x_lo, x_hi, 6) {
        let x = sx(t);
        body.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{b:.2}\" x2=\"{x:.2}\" y2=\"{b2:.2}\" \
             stroke=\"black\" stroke-width=\"1\"/>\n\
             <text x=\"{x:.2}\" y=\"{ty:.2}\" text-anchor=\"middle\" \
             font-family=\"monospace\" font-size=\"11\">{t}</text>\n",
            b = HEIGHT - MARGIN_B,
            b2 = HEIGHT - MARGIN_B + 5.0,
            ty = HEIGHT - MARGIN_B + 18.0
        ));
    }
    if let Some((slope, intercept)) = fit {
        body.push_str(&format!(
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" \
             stroke=\"{c}\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n",
            x1 = sx(x_lo),
            y1 = sy(slope * x_lo + intercept),
            x2 = sx(x_hi),
            y2 = sy(slope * x_hi + intercept),
            c = PALETTE[1]
        ));
    }
    for p in points {
        body.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"{}\"/>\n",
            sx(p.0),
            sy(p.1),
            PALETTE[0]
        ));
    }
    body.push_str(&axis_frame());
    body.push_str(&x_label(x_title));
    body.push_str(&y_label(y_title));
    document(&body)
}

fn bounds(values: &[f64], fallback: (f64, f64)) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        return fallback;
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn pad((lo, hi): (f64, f64)) -> (f64, f64) {
    let m = 0.06 * (hi - lo);
    (lo - m, hi + m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_are_self_contained_svg_documents() {
        let series = vec![
            Series {
                label: "gt-gda".into(),
                points: vec![(0.0, 1.0), (10.0, 1e-3), (20.0, 1e-6)],
            },
            Series {
                label: "d-gda".into(),
                points: vec![(0.0, 1.0), (10.0, 0.5), (20.0, 0.31)],
            },
        ];
        let svg = log_line_plot(&series, "iteration", "optimality gap");
        assert!(svg.starts_with("<svg xmlns"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("gt-gda") && svg.contains("d-gda"));
        assert!(svg.contains("polyline"));
        assert!(!svg.contains("http://") || svg.matches("http://").count() == 1); // xmlns only
        assert!(!svg.contains("<script") && !svg.contains("@import"));

        let pts = [(8.0, 8.3), (16.0, 16.5), (32.0, 32.9)];
        let svg2 = scatter_fit_plot(&pts, Some((1.03, 0.1)), "network size", "iteration ratio");
        assert!(svg2.contains("circle") && svg2.contains("stroke-dasharray"));
    }

    #[test]
    fn identical_inputs_render_identical_bytes() {
        let series = vec![Series {
            label: "centralized".into(),
            points: vec![(0.0, 2.0), (5.0, 1e-4)],
        }];
        let a = log_line_plot(&series, "iteration", "gap");
        let b = log_line_plot(&series, "iteration", "gap");
        assert_eq!(a, b);
    }

    #[test]
    fn zero_gap_points_are_clamped_not_dropped() {
        let series = vec![Series {
            label: "exact".into(),
            points: vec![(0.0, 1.0), (1.0, 0.0)],
        }];
        let svg = log_line_plot(&series, "iteration", "gap");
        // Two points must survive into the polyline.
        let poly = svg.split("points=\"").nth(1).unwrap();
        let coords = poly.split('"').next().unwrap();
        assert_eq!(coords.split(' ').count(), 2);
    }
}
