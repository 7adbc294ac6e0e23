//! Minimal static SVG line charts for traces.

use std::fmt::Write;

use crate::trace::SimTrace;

const W: f64 = 720.0;
const H: f64 = 360.0;
const PAD_L: f64 = 64.0;
const PAD_R: f64 = 120.0;
const PAD_T: f64 = 32.0;
const PAD_B: f64 = 40.0;
const MAX_POINTS: usize = 2000;
const COLORS: [&str; 8] = ["#000000", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Keeps min and max of each bucket so chattering envelopes survive thinning.
fn decimate(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let buckets = MAX_POINTS / 2;
    let size = points.len().div_ceil(buckets);
    let mut out = Vec::with_capacity(MAX_POINTS + 2);
    for chunk in points.chunks(size) {
        let lo = chunk.iter().copied().fold(chunk[0], |a, b| if b.1 < a.1 { b } else { a });
        let hi = chunk.iter().copied().fold(chunk[0], |a, b| if b.1 > a.1 { b } else { a });
        if lo.0 <= hi.0 {
            out.extend([lo, hi]);
        } else {
            out.extend([hi, lo]);
        }
    }
    out
}

pub fn line_chart(title: &str, y_label: &str, series: &[Series]) -> String {
    let finite = series.iter().flat_map(|s| &s.points).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let pw = W - PAD_L - PAD_R;
    let ph = H - PAD_T - PAD_B;
    let sx = |x: f64| PAD_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| PAD_T + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" font-size="13">{}</text>"#, PAD_L, escape(title));
    let _ = writeln!(
        s,
        r##"<rect x="{PAD_L}" y="{PAD_T}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>"##
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#, sx(fx), H - PAD_B + 14.0, fx);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#, PAD_L - 4.0, sy(fy) + 4.0, fy);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t [s]</text>"#, PAD_L + pw / 2.0, H - 6.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">{}</text>"#,
        PAD_T + ph / 2.0,
        PAD_T + ph / 2.0,
        escape(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        let mut pen_up = true;
        for (x, y) in decimate(&ser.points) {
            if !(x.is_finite() && y.is_finite()) {
                pen_up = true;
                continue;
            }
            let _ = write!(d, "{}{:.2},{:.2} ", if pen_up { "M" } else { "L" }, sx(x), sy(y));
            pen_up = false;
        }
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1"/>"#, d.trim_end());
        let ly = PAD_T + 14.0 * k as f64 + 8.0;
        let lx = W - PAD_R + 10.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}"/>"#, lx + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 20.0, ly + 4.0, escape(&ser.name));
    }
    s.push_str("</svg>\n");
    s
}

/// Positions, the three error channels and the applied input, as `(file name, svg)` pairs.
pub fn trace_figures(trace: &SimTrace) -> Vec<(String, String)> {
    let name = |i: usize| if i == 0 { "leader".to_string() } else { format!("vehicle {i}") };
    let collect = |agents: std::ops::Range<usize>, f: &dyn Fn(&crate::trace::TraceRow) -> f64| -> Vec<Series> {
        agents
            .map(|i| Series {
                name: name(i),
                points: trace.series(i).map(|r| (r.t, f(r))).collect(),
            })
            .collect()
    };
    let mut out = vec![(
        "states_x1.svg".to_string(),
        line_chart("state 1", "x1", &collect(0..trace.agents, &|r| r.x[0])),
    )];
    for l in 0..trace.state_dim {
        out.push((
            format!("error_e{}.svg", l + 1),
            line_chart(&format!("tracking error, channel {}", l + 1), &format!("e{}", l + 1), &collect(1..trace.agents, &|r| r.e[l])),
        ));
    }
    out.push(("input.svg".to_string(), line_chart("applied input", "u", &collect(1..trace.agents, &|r| r.u))));
    out.push((
        "packets.svg".to_string(),
        line_chart("packet delivered", "pkt", &collect(1..trace.agents, &|r| if r.pkt { 1.0 } else { 0.0 })),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_well_formed() {
        let pts: Vec<(f64, f64)> = (0..5000).map(|k| (k as f64 * 0.01, (k as f64 * 0.1).sin())).collect();
        let s = line_chart("a < b", "y", &[Series { name: "s".into(), points: pts }]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert!(s.contains("a &lt; b"));
        assert!(!s.contains("NaN"));
    }

    #[test]
    fn decimation_keeps_extremes() {
        let mut pts: Vec<(f64, f64)> = (0..10_000).map(|k| (k as f64, 0.0)).collect();
        pts[4321].1 = 7.0;
        pts[8765].1 = -3.0;
        let d = decimate(&pts);
        assert!(d.len() <= MAX_POINTS + 2);
        assert!(d.contains(&(4321.0, 7.0)) && d.contains(&(8765.0, -3.0)));
    }

    #[test]
    fn empty_and_flat_series() {
        let s = line_chart("empty", "y", &[]);
        assert!(s.contains("</svg>"));
        let s = line_chart("flat", "y", &[Series { name: "c".into(), points: vec![(0.0, 2.0), (1.0, 2.0)] }]);
        assert!(!s.contains("NaN") && !s.contains("inf"));
    }
}
