//! Dependency-free SVG charts. Output depends only on the inputs.

use std::fmt::Write;

use crate::ml::Metrics;
use crate::sparams::S11Curve;

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, esc(title));
    s
}

fn axes(s: &mut String, xlabel: &str, ylabel: &str) {
    let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
    let _ = writeln!(s, r#"<path d="M{x0:.1} {y1:.1} L{x0:.1} {y0:.1} L{x1:.1} {y0:.1}" stroke="black" fill="none"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        H - 18.0,
        esc(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(ylabel)
    );
}

/// Overlay of S11 curves, one `<path class="curve">` per entry.
pub fn s11_svg(title: &str, curves: &[(String, &S11Curve)]) -> String {
    let lowest = curves.iter().flat_map(|(_, c)| c.db.iter().copied()).fold(-10.0f64, f64::min).max(-120.0);
    let ymin = (lowest / 10.0).floor() * 10.0;
    let xmax = 6.0;
    let px = |f_ghz: f64| LEFT + f_ghz / xmax * (W - LEFT - RIGHT);
    let py = |db: f64| TOP + (db / ymin) * (H - TOP - BOTTOM);
    let mut s = open(title);
    axes(&mut s, "Frequency (GHz)", "S11 (dB)");
    for g in 0..=6 {
        let x = px(g as f64);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{g}</text>"#, H - BOTTOM + 16.0);
    }
    let mut v = 0.0;
    while v >= ymin {
        let y = py(v);
        let _ = writeln!(s, r##"<path d="M{LEFT:.1} {y:.1} L{:.1} {y:.1}" stroke="#dddddd"/>"##, W - RIGHT);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.0}</text>"#, LEFT - 6.0, y + 4.0);
        v -= 10.0;
    }
    for (n, (label, c)) in curves.iter().enumerate() {
        let color = COLORS[n % COLORS.len()];
        let mut d = String::new();
        for (i, (f, db)) in c.freqs.iter().zip(&c.db).enumerate() {
            let _ = write!(d, "{}{:.2} {:.2}", if i == 0 { "M" } else { " L" }, px(f / 1e9), py(db.max(ymin)));
        }
        let _ = writeln!(s, r#"<path class="curve" d="{d}" stroke="{color}" stroke-width="1.5" fill="none"/>"#);
        let ly = TOP + 16.0 + 16.0 * n as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{ly:.1}" fill="{color}" text-anchor="end">{}</text>"#,
            W - RIGHT - 8.0,
            esc(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Grouped bars of overall RMSE and MAE per model.
pub fn metrics_svg(title: &str, metrics: &[Metrics]) -> String {
    let top = metrics.iter().map(|m| m.rmse_mean.max(m.mae_mean)).fold(0.0f64, f64::max);
    let ymax = if top > 0.0 { top * 1.15 } else { 1.0 };
    let mut s = open(title);
    axes(&mut s, "Model", "Error (mm)");
    let slot = (W - LEFT - RIGHT) / metrics.len().max(1) as f64;
    let bw = slot * 0.3;
    let base = H - BOTTOM;
    let scale = (H - TOP - BOTTOM) / ymax;
    for (i, m) in metrics.iter().enumerate() {
        let x = LEFT + slot * i as f64 + slot * 0.2;
        for (k, (v, color, name)) in
            [(m.rmse_mean, COLORS[0], "rmse"), (m.mae_mean, COLORS[1], "mae")].into_iter().enumerate()
        {
            let h = v * scale;
            let bx = x + k as f64 * bw;
            let _ = writeln!(
                s,
                r#"<rect class="{name}" x="{bx:.1}" y="{:.1}" width="{bw:.1}" height="{h:.1}" fill="{color}"/>"#,
                base - h
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{v:.3}</text>"#,
                bx + bw / 2.0,
                base - h - 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x + bw,
            base + 16.0,
            esc(&m.model)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" fill="{}" text-anchor="end">RMSE</text>"#,
        W - RIGHT - 8.0,
        TOP + 16.0,
        COLORS[0]
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" fill="{}" text-anchor="end">MAE</text>"#,
        W - RIGHT - 8.0,
        TOP + 32.0,
        COLORS[1]
    );
    s.push_str("</svg>\n");
    s
}
