//! Minimal native SVG rendering: one line-plot and one histogram layout,
//! enough to eyeball the CSV outputs without pulling in a plotting stack.
//! All coordinates are formatted with fixed precision so reruns emit
//! byte-identical documents.

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 42.0;
const MARGIN_BOTTOM: f64 = 56.0;

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series<'a> {
    pub label: &'a str,
    pub values: &'a [f64],
}

fn plot_area() -> (f64, f64, f64, f64) {
    (
        MARGIN_LEFT,
        MARGIN_TOP,
        WIDTH - MARGIN_RIGHT,
        HEIGHT - MARGIN_BOTTOM,
    )
}

fn header(title: &str) -> String {
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" ",
            "font-family=\"sans-serif\" font-size=\"12\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{cx}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        cx = WIDTH / 2.0,
        title = title
    )
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0, x1, y1) = plot_area();
    out.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y1}\" x2=\"{x1}\" y2=\"{y1}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n\
         <text x=\"{cx:.1}\" y=\"{ly:.1}\" text-anchor=\"middle\">{x_label}</text>\n\
         <text x=\"18\" y=\"{cy:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {cy:.1})\">{y_label}</text>\n",
        cx = (x0 + x1) / 2.0,
        ly = HEIGHT - 12.0,
        cy = (y0 + y1) / 2.0,
    ));
}

fn y_ticks(out: &mut String, lo: f64, hi: f64) {
    let (x0, y0, _, y1) = plot_area();
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let value = lo + (hi - lo) * frac;
        let y = y1 - (y1 - y0) * frac;
        out.push_str(&format!(
            "<line x1=\"{x:.1}\" y1=\"{y:.1}\" x2=\"{x0}\" y2=\"{y:.1}\" stroke=\"black\"/>\n\
             <text x=\"{tx:.1}\" y=\"{ty:.1}\" text-anchor=\"end\">{value:.3e}</text>\n",
            x = x0 - 5.0,
            tx = x0 - 8.0,
            ty = y + 4.0,
        ));
    }
}

/// Line plot of one or more series sharing an integer x axis that starts at
/// `x_start`.
pub fn line_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    x_start: usize,
    series: &[Series],
) -> String {
    let (x0, y0, x1, y1) = plot_area();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut longest = 0usize;
    for s in series {
        longest = longest.max(s.values.len());
        for &v in s.values {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-300 {
        hi = lo + 1.0;
    }
    let pad = (hi - lo) * 0.05;
    let (lo, hi) = (lo - pad, hi + pad);
    let span_x = (longest.max(2) - 1) as f64;

    let mut out = header(title);
    axes(&mut out, x_label, y_label);
    y_ticks(&mut out, lo, hi);

    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let k = x_start as f64 + span_x * frac;
        let x = x0 + (x1 - x0) * frac;
        out.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"middle\">{k:.0}</text>\n",
            y = y1 + 18.0,
        ));
    }

    for (idx, s) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut points = String::new();
        for (i, &v) in s.values.iter().enumerate() {
            if !v.is_finite() {
                continue;
            }
            let x = x0 + (x1 - x0) * i as f64 / span_x;
            let y = y1 - (y1 - y0) * (v - lo) / (hi - lo);
            points.push_str(&format!("{x:.2},{y:.2} "));
        }
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.trim_end()
        ));
        let ly = y0 + 16.0 * idx as f64;
        out.push_str(&format!(
            "<rect x=\"{bx:.1}\" y=\"{by:.1}\" width=\"12\" height=\"4\" fill=\"{color}\"/>\n\
             <text x=\"{tx:.1}\" y=\"{ty:.1}\">{label}</text>\n",
            bx = x1 - 150.0,
            by = ly - 4.0,
            tx = x1 - 132.0,
            ty = ly + 2.0,
            label = s.label,
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Histogram with precomputed bin edges and counts.
pub fn histogram(title: &str, x_label: &str, edges: &[f64], counts: &[u64]) -> String {
    let (x0, y0, x1, y1) = plot_area();
    let lo = edges.first().copied().unwrap_or(0.0);
    let hi = edges.last().copied().unwrap_or(1.0);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let peak = counts.iter().copied().max().unwrap_or(1).max(1) as f64;

    let mut out = header(title);
    axes(&mut out, x_label, "count");
    y_ticks(&mut out, 0.0, peak);

    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let value = lo + span * frac;
        let x = x0 + (x1 - x0) * frac;
        out.push_str(&format!(
            "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"middle\">{value:.1}</text>\n",
            y = y1 + 18.0,
        ));
    }

    for (i, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let left = x0 + (x1 - x0) * (edges[i] - lo) / span;
        let right = x0 + (x1 - x0) * (edges[i + 1] - lo) / span;
        let height = (y1 - y0) * count as f64 / peak;
        out.push_str(&format!(
            "<rect x=\"{left:.2}\" y=\"{top:.2}\" width=\"{w:.2}\" height=\"{height:.2}\" \
             fill=\"#1f77b4\" stroke=\"white\" stroke-width=\"0.5\"/>\n",
            top = y1 - height,
            w = (right - left).max(0.5),
        ));
    }
    out.push_str("</svg>\n");
    out
}
