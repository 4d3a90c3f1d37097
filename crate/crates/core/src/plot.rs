//! Self-contained chart and image writers.

use std::fmt::Write as _;

use crate::pipeline::AdvantageCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

/// Line chart of measured (red) against theoretical `√N/2` (blue) gain versus order.
pub fn advantage_svg(curve: &AdvantageCurve) -> String {
    let n_max = curve.orders.iter().cloned().max().unwrap_or(1) as f64;
    let n_min = curve.orders.iter().cloned().min().unwrap_or(0) as f64;
    let g_max = curve
        .measured_gain
        .iter()
        .chain(&curve.theoretical_gain)
        .cloned()
        .fold(0.0, f64::max)
        .max(1.0)
        * 1.1;
    let x_span = (n_max - n_min).max(1.0);
    let px = |n: f64| MARGIN + (n - n_min) / x_span * (WIDTH - 2.0 * MARGIN);
    let py = |g: f64| HEIGHT - MARGIN - g / g_max * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    );
    for i in 0..=4 {
        let g = g_max * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" font-size="11" text-anchor="end">{g:.2}</text>"#,
            MARGIN - 6.0,
            py(g) + 4.0
        );
    }
    for &n in &curve.orders {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" font-size="11" text-anchor="middle">{n}</text>"#,
            px(n as f64),
            HEIGHT - MARGIN + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">code order N</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">SNR gain (ratio)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (values, colour, label, row) in [
        (&curve.theoretical_gain, "blue", "theory √N/2", 0),
        (&curve.measured_gain, "red", "measured", 1),
    ] {
        let pts: Vec<String> = curve
            .orders
            .iter()
            .zip(values.iter())
            .map(|(&n, &g)| format!("{:.2},{:.2}", px(n as f64), py(g)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        for p in &pts {
            let (x, y) = p.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{colour}"/>"#);
        }
        let ly = MARGIN + 14.0 * row as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}" font-size="12">{label}</text>"#,
            MARGIN + 10.0,
            MARGIN + 30.0,
            MARGIN + 36.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Binary 8-bit portable graymap of a row-major map; `lo` maps to 0 and `hi` to 255.
pub fn pgm(values: &[f64], width: usize, height: usize, lo: f64, hi: f64) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    let span = hi - lo;
    out.extend(values.iter().map(|&v| {
        let t = if span > 0.0 { (v - lo) / span } else { 0.0 };
        (t.clamp(0.0, 1.0) * 255.0).round() as u8
    }));
    out
}

/// Row-major map as CSV with one header row of column x positions.
pub fn map_csv(values: &[f64], xs: &[f64], ys: &[f64]) -> String {
    let mut out = String::from("y_m\\x_m");
    for x in xs {
        let _ = write!(out, ",{x}");
    }
    out.push('\n');
    for (j, y) in ys.iter().enumerate() {
        let _ = write!(out, "{y}");
        for v in &values[j * xs.len()..(j + 1) * xs.len()] {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
