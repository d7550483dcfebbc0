//! Self-contained SVG line charts and planar trajectory plots.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut f = Frame {
            x0: f64::INFINITY,
            x1: f64::NEG_INFINITY,
            y0: f64::INFINITY,
            y1: f64::NEG_INFINITY,
        };
        for (x, y) in points.filter(|(x, y)| x.is_finite() && y.is_finite()) {
            f.x0 = f.x0.min(x);
            f.x1 = f.x1.max(x);
            f.y0 = f.y0.min(y);
            f.y1 = f.y1.max(y);
        }
        if !f.x0.is_finite() {
            return Frame {
                x0: 0.0,
                x1: 1.0,
                y0: 0.0,
                y1: 1.0,
            };
        }
        if f.x1 - f.x0 < 1e-12 {
            f.x0 -= 0.5;
            f.x1 += 0.5;
        }
        if f.y1 - f.y0 < 1e-12 {
            f.y0 -= 0.5;
            f.y1 += 0.5;
        }
        f
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }

    fn scale(&self) -> f64 {
        (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / (self.x1 - self.x0)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        (WIDTH - MARGIN_RIGHT + MARGIN_LEFT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (left, right) = (MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let (top, bottom) = (MARGIN_TOP, HEIGHT - MARGIN_BOTTOM);
    let _ = writeln!(
        out,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = f.x0 + t * (f.x1 - f.x0);
        let yv = f.y0 + t * (f.y1 - f.y0);
        let (x, y) = (f.px(xv), f.py(yv));
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{bottom}" x2="{x:.2}" y2="{}" stroke="black"/>"#, bottom + 5.0);
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            bottom + 18.0,
            tick(xv)
        );
        let _ = writeln!(out, r#"<line x1="{}" y1="{y:.2}" x2="{left}" y2="{y:.2}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 8.0,
            y + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{:.0}", v)
    } else if v.abs() >= 10.0 {
        format!("{:.1}", v)
    } else {
        format!("{:.2}", v)
    }
}

fn legend(out: &mut String, names: &[&str]) {
    let x = WIDTH - MARGIN_RIGHT + 15.0;
    for (i, name) in names.iter().enumerate() {
        let y = MARGIN_TOP + 10.0 + 18.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#,
            x + 20.0
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, x + 26.0, y + 4.0, escape(name));
    }
}

fn polyline(out: &mut String, f: &Frame, points: &[(f64, f64)], color: &str, width: f64) {
    let coords: Vec<String> = points
        .iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="{width}" points="{}"/>"#,
        coords.join(" ")
    );
}

/// Overlaid line chart, one polyline per series.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let f = Frame::fit(series.iter().flat_map(|s| s.points.iter().copied()));
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, x_label, y_label);
    for (i, s) in series.iter().enumerate() {
        polyline(&mut out, &f, &s.points, PALETTE[i % PALETTE.len()], 2.0);
    }
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}

/// Planar paths grouped by label, with an optional goal disk and waypoints.
pub fn trajectory_plot(
    title: &str,
    groups: &[(String, Vec<Vec<[f64; 2]>>)],
    goal: Option<([f64; 2], f64)>,
    waypoints: &[[f64; 2]],
) -> String {
    let mut extent: Vec<(f64, f64)> = groups
        .iter()
        .flat_map(|(_, paths)| paths.iter().flatten().map(|p| (p[0], p[1])))
        .collect();
    if let Some((c, r)) = goal {
        extent.push((c[0] - r, c[1] - r));
        extent.push((c[0] + r, c[1] + r));
    }
    extent.extend(waypoints.iter().map(|w| (w[0], w[1])));
    let mut f = Frame::fit(extent.into_iter());
    // equal aspect: widen the narrower axis
    let ratio = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM);
    let (w, h) = (f.x1 - f.x0, f.y1 - f.y0);
    if w / h < ratio {
        let extra = (h * ratio - w) / 2.0;
        f.x0 -= extra;
        f.x1 += extra;
    } else {
        let extra = (w / ratio - h) / 2.0;
        f.y0 -= extra;
        f.y1 += extra;
    }
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, "x", "y");
    if let Some((c, r)) = goal {
        let _ = writeln!(
            out,
            r##"<circle class="goal" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#2ca02c" fill-opacity="0.25" stroke="#2ca02c"/>"##,
            f.px(c[0]),
            f.py(c[1]),
            r * f.scale()
        );
    }
    for (k, w) in waypoints.iter().enumerate() {
        let _ = writeln!(
            out,
            r##"<circle class="waypoint" cx="{:.2}" cy="{:.2}" r="5" fill="#555"/><text x="{:.2}" y="{:.2}">{k}</text>"##,
            f.px(w[0]),
            f.py(w[1]),
            f.px(w[0]) + 7.0,
            f.py(w[1]) - 7.0
        );
    }
    for (i, (_, paths)) in groups.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for p in paths {
            let pts: Vec<(f64, f64)> = p.iter().map(|q| (q[0], q[1])).collect();
            polyline(&mut out, &f, &pts, color, 1.2);
            if let Some(last) = p.last() {
                let _ = writeln!(
                    out,
                    r#"<circle class="end" cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                    f.px(last[0]),
                    f.py(last[1])
                );
            }
        }
    }
    let names: Vec<&str> = groups.iter().map(|(n, _)| n.as_str()).collect();
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}
