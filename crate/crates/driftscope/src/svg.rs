//! Minimal SVG rendering of a 2-D trajectory.

use std::fmt::Write as _;

use driftscope_core::explore::Trajectory2D;

const SIZE: f64 = 640.0;
const PAD: f64 = 48.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Word path as a polyline with week markers; neighbor points labeled in grey.
pub fn render(tr: &Trajectory2D, word: &str, label: impl Fn(usize) -> String) -> String {
    let all: Vec<[f64; 2]> = tr
        .points
        .iter()
        .copied()
        .chain(tr.neighbors.iter().flat_map(|n| n.points.iter().copied()))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &all {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let sx = if x1 > x0 { (SIZE - 2.0 * PAD) / (x1 - x0) } else { 1.0 };
    let sy = if y1 > y0 { (SIZE - 2.0 * PAD) / (y1 - y0) } else { 1.0 };
    let map = |p: [f64; 2]| (PAD + (p[0] - x0) * sx, SIZE - PAD - (p[1] - y0) * sy);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for n in &tr.neighbors {
        for (id, p) in n.ids.iter().zip(&n.points) {
            let (x, y) = map(*p);
            let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="#999"/>"##);
            let _ = writeln!(s, r##"<text x="{:.2}" y="{:.2}" fill="#777">{} ({})</text>"##, x + 4.0, y - 4.0, escape(&label(*id)), n.t);
        }
    }
    let path: Vec<String> = tr
        .points
        .iter()
        .map(|&p| {
            let (x, y) = map(p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#c33" stroke-width="1.5"/>"##, path.join(" "));
    for (t, &p) in tr.points.iter().enumerate() {
        let (x, y) = map(p);
        let _ = writeln!(s, r##"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="#c33"/>"##);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{} t={t}</text>"#, x + 5.0, y + 12.0, escape(word));
    }
    let _ = writeln!(s, r#"<text x="{PAD}" y="20">PC1 {:.1}%  PC2 {:.1}%</text>"#, 100.0 * tr.evr[0], 100.0 * tr.evr[1]);
    s.push_str("</svg>\n");
    s
}
