//! Minimal SVG line charts: metric versus noise level, one series per method.

use std::collections::BTreeMap;
use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Series of `(method, sigma, value)`; values sharing a method and sigma are averaged.
pub fn series(points: &[(String, f64, f64)]) -> BTreeMap<String, Vec<(f64, f64)>> {
    let mut acc: BTreeMap<String, BTreeMap<u64, (f64, f64, usize)>> = BTreeMap::new();
    for (m, s, v) in points {
        let e = acc.entry(m.clone()).or_default().entry(s.to_bits()).or_insert((*s, 0.0, 0));
        e.1 += v;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(m, by)| {
            let mut pts: Vec<(f64, f64)> = by.into_values().map(|(s, sum, c)| (s, sum / c as f64)).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            (m, pts)
        })
        .collect()
}

pub fn chart(points: &[(String, f64, f64)], metric: &str) -> String {
    let lines = series(points);
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (0.0f64, 1.0f64);
    for pts in lines.values() {
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if x1 - x0 < 1e-12 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (ax, ay) = (px(x0), py(y0));
    let _ = writeln!(s, r#"<line x1="{ax}" y1="{ay}" x2="{}" y2="{ay}" stroke="black"/>"#, px(x1));
    let _ = writeln!(s, r#"<line x1="{ax}" y1="{ay}" x2="{ax}" y2="{}" stroke="black"/>"#, py(y1));
    for t in 0..=4 {
        let x = x0 + (x1 - x0) * f64::from(t) / 4.0;
        let y = y0 + (y1 - y0) * f64::from(t) / 4.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.2}</text>"#, px(x), ay + 18.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.2}</text>"#, ax - 6.0, py(y) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">sigma</text>"#, px(0.5 * (x0 + x1)), H - 10.0);
    let _ = writeln!(s, r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">{}</text>"#, py(0.5 * (y0 + y1)), py(0.5 * (y0 + y1)), escape(metric));
    for (i, (name, pts)) in lines.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        if pts.len() > 1 {
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, coords.join(" "));
        }
        for &(x, y) in pts {
            let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let ly = TOP + 20.0 * (i as f64 + 1.0);
        let lx = W - RIGHT + 15.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}
