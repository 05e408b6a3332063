//! Self-contained SVG plots built from primitive shapes.
//!
//! No plotting dependency and no timestamps: identical inputs produce
//! byte-identical files. Coordinates are formatted to a fixed precision.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 50.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_ranges(xs: impl Iterator<Item = f64>, ys: impl Iterator<Item = f64>) -> Frame {
        let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in xs {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
        }
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for y in ys {
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
        if !(x_max > x_min) {
            x_max = x_min + 1.0;
        }
        if !(y_max > y_min) {
            y_max = y_min + 1.0;
        }
        let pad_x = 0.05 * (x_max - x_min);
        let pad_y = 0.05 * (y_max - y_min);
        Frame {
            x_min: x_min - pad_x,
            x_max: x_max + pad_x,
            y_min: y_min - pad_y,
            y_max: y_max + pad_y,
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn open_svg(title: &str) -> String {
    let mut s = String::new();
    write!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"##
    )
    .unwrap();
    s.push('\n');
    writeln!(s, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r##"<text x="{:.1}" y="24" font-family="monospace" font-size="14" text-anchor="middle">{}</text>"##,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(
        s,
        r##"<rect x="{m:.1}" y="{m:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#444" stroke-width="1"/>"##,
        m = MARGIN,
        w = WIDTH - 2.0 * MARGIN,
        h = HEIGHT - 2.0 * MARGIN
    )
    .unwrap();
    s
}

fn close_svg(mut s: String) -> String {
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Trace plot: one polyline per series over the iteration index.
pub fn trace_plot(title: &str, series: &[(&str, &[f64])]) -> String {
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let n = series.iter().map(|(_, v)| v.len()).max().unwrap_or(1);
    let frame = Frame::from_ranges(
        [0.0, (n.max(2) - 1) as f64].into_iter(),
        series.iter().flat_map(|(_, v)| v.iter().copied()),
    );
    let mut s = open_svg(title);
    for (idx, (label, values)) in series.iter().enumerate() {
        let color = colors[idx % colors.len()];
        let mut d = String::new();
        for (i, v) in values.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            write!(d, "{cmd}{:.2} {:.2} ", frame.px(i as f64), frame.py(*v)).unwrap();
        }
        writeln!(
            s,
            r##"<path d="{}" fill="none" stroke="{color}" stroke-width="0.8"/>"##,
            d.trim_end()
        )
        .unwrap();
        writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" fill="{color}">{}</text>"##,
            MARGIN + 6.0,
            MARGIN + 14.0 + 14.0 * idx as f64,
            escape(label)
        )
        .unwrap();
    }
    close_svg(s)
}

/// Stem plot of autocorrelations by lag (lag 0 omitted).
pub fn acf_plot(title: &str, acf: &[f64]) -> String {
    let frame = Frame::from_ranges(
        [0.0, acf.len() as f64 + 1.0].into_iter(),
        acf.iter().copied().chain([0.0, 1.0]),
    );
    let mut s = open_svg(title);
    let y0 = frame.py(0.0);
    writeln!(
        s,
        r##"<line x1="{:.1}" y1="{y0:.1}" x2="{:.1}" y2="{y0:.1}" stroke="#999" stroke-width="0.7"/>"##,
        MARGIN,
        WIDTH - MARGIN
    )
    .unwrap();
    for (k, v) in acf.iter().enumerate() {
        let x = frame.px((k + 1) as f64);
        writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="#1f77b4" stroke-width="2"/>"##,
            frame.py(*v)
        )
        .unwrap();
    }
    close_svg(s)
}

/// Scatter of 2-D points with an optional circle marking a ball or sphere
/// constraint boundary, plus an optional reference point.
pub fn scatter_plot(
    title: &str,
    points: &[(f64, f64)],
    circle: Option<(f64, f64, f64)>,
    reference: Option<(f64, f64)>,
) -> String {
    let extra = circle
        .map(|(cx, cy, r)| vec![(cx - r, cy - r), (cx + r, cy + r)])
        .unwrap_or_default();
    let frame = Frame::from_ranges(
        points.iter().map(|p| p.0).chain(extra.iter().map(|p| p.0)),
        points.iter().map(|p| p.1).chain(extra.iter().map(|p| p.1)),
    );
    let mut s = open_svg(title);
    if let Some((cx, cy, r)) = circle {
        // ellipse in pixel space since axes scale differently
        let rx = (frame.px(cx + r) - frame.px(cx - r)) / 2.0;
        let ry = (frame.py(cy - r) - frame.py(cy + r)) / 2.0;
        writeln!(
            s,
            r##"<ellipse cx="{:.2}" cy="{:.2}" rx="{rx:.2}" ry="{ry:.2}" fill="none" stroke="#444" stroke-width="1.2" stroke-dasharray="4 3"/>"##,
            frame.px(cx),
            frame.py(cy)
        )
        .unwrap();
    }
    for (x, y) in points {
        writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="1.4" fill="#1f77b4" fill-opacity="0.45"/>"##,
            frame.px(*x),
            frame.py(*y)
        )
        .unwrap();
    }
    if let Some((x, y)) = reference {
        writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#d62728"/>"##,
            frame.px(x),
            frame.py(y)
        )
        .unwrap();
    }
    close_svg(s)
}

/// Credible-interval ladder: one horizontal segment per labeled quantity
/// with a marker at the median.
pub fn interval_ladder(title: &str, rows: &[(String, f64, f64, f64)]) -> String {
    let frame = Frame::from_ranges(
        rows.iter().flat_map(|(_, lo, _, hi)| [*lo, *hi].into_iter()),
        [0.0, rows.len() as f64 + 1.0].into_iter(),
    );
    let mut s = open_svg(title);
    for (idx, (label, lo, mid, hi)) in rows.iter().enumerate() {
        let y = frame.py((rows.len() - idx) as f64);
        writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#1f77b4" stroke-width="2"/>"##,
            frame.px(*lo),
            frame.px(*hi)
        )
        .unwrap();
        writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{y:.2}" r="3" fill="#d62728"/>"##,
            frame.px(*mid)
        )
        .unwrap();
        writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="10" text-anchor="end">{}</text>"##,
            MARGIN - 4.0,
            y + 3.0,
            escape(label)
        )
        .unwrap();
    }
    close_svg(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_are_deterministic_and_well_formed() {
        let values = [0.1, 0.5, -0.2, 0.9, 0.3];
        let a = trace_plot("trace", &[("x", &values)]);
        let b = trace_plot("trace", &[("x", &values)]);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));

        let acf = acf_plot("acf", &[0.9, 0.5, 0.2, -0.1]);
        assert!(acf.contains("<line"));

        let scatter = scatter_plot(
            "draws",
            &[(0.1, 0.2), (-0.5, 0.8)],
            Some((0.0, 0.0, 1.0)),
            Some((-1.295, -0.532)),
        );
        assert!(scatter.contains("<ellipse"));

        let ladder = interval_ladder(
            "ci",
            &[("beta_1".into(), -0.9, -0.6, -0.3), ("beta_2".into(), -0.4, 0.0, 0.4)],
        );
        assert!(ladder.matches("<circle").count() == 2);
    }

    #[test]
    fn titles_are_escaped() {
        let svg = trace_plot("a < b & c", &[("x", &[0.0, 1.0][..])]);
        assert!(svg.contains("a &lt; b &amp; c"));
    }
}
