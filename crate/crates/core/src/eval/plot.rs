//! Plain SVG charts: AP-versus-budget curves and belief maps.

use std::fmt::Write;

use crate::eval::curve::BudgetCurve;
use crate::geometry::Window;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Line chart of AP against the number of evaluated windows, one line per
/// curve.
pub fn curves_svg(curves: &[BudgetCurve], title: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (60.0, 180.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let max_b = curves.iter().map(|c| c.max_budget()).max().unwrap_or(1).max(1) as f64;
    let sx = |b: f64| left + pw * b / max_b;
    let sy = |ap: f64| top + ph * (1.0 - ap.clamp(0.0, 1.0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    // axes and ticks
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} V{} H{}" fill="none" stroke="black"/>"#,
        top + ph,
        left + pw
    );
    for k in 0..=5 {
        let ap = k as f64 / 5.0;
        let y = sy(ap);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{ap:.1}</text>"##,
            left,
            left + pw,
            left - 6.0,
            y + 4.0
        );
        let b = max_b * k as f64 / 5.0;
        let x = sx(b);
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#,
            top + ph + 16.0,
            b.round()
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">evaluated windows</text>"#,
        left + pw / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">AP</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );

    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|&(b, ap)| format!("{:.2},{:.2}", sx(b as f64), sy(ap)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&c.policy)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Proposal windows drawn in belief order, the most believed on top and
/// most opaque. Ground-truth boxes are outlined in green.
pub fn belief_svg(windows: &[Window], beliefs: &[f64], ground_truth: &[Window], title: &str) -> String {
    let size = 480.0;
    let lo = beliefs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = beliefs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut order: Vec<usize> = (0..windows.len().min(beliefs.len())).collect();
    order.sort_by(|&a, &b| beliefs[a].total_cmp(&beliefs[b]));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{}" font-family="sans-serif" font-size="12">"#,
        size + 30.0
    );
    let _ = writeln!(s, r#"<text x="4" y="16">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r##"<g transform="translate(0 24)"><rect width="{size}" height="{size}" fill="#f8f8f8" stroke="black"/>"##
    );
    for i in order {
        let wdw = &windows[i];
        let t = (beliefs[i] - lo) / span;
        let _ = writeln!(
            s,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="rgb({},{},{})" fill-opacity="{:.3}" stroke="none"/>"#,
            wdw.x() * size,
            wdw.y() * size,
            wdw.w() * size,
            wdw.h() * size,
            (255.0 * t) as u8,
            40,
            (255.0 * (1.0 - t)) as u8,
            0.02 + 0.3 * t
        );
    }
    for g in ground_truth {
        let _ = writeln!(
            s,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#2ca02c" stroke-width="2"/>"##,
            g.x() * size,
            g.y() * size,
            g.w() * size,
            g.h() * size
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_chart_mentions_every_policy() {
        let c = |p: &str| BudgetCurve {
            class: "object".into(),
            policy: p.into(),
            points: vec![(0, 0.0), (50, 0.7), (100, 0.9)],
        };
        let svg = curves_svg(&[c("active"), c("random<1>")], "AP");
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("active"));
        assert!(svg.contains("random&lt;1&gt;"));
        assert_eq!(svg.matches("<polyline").count(), 2);
    }
}
