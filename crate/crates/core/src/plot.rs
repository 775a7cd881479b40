//! Static SVG scatter of schedule fronts.

use std::fmt::Write as _;

use crate::pareto::CostPoint;
use crate::search::SearchReport;

const W: f64 = 760.0;
const H: f64 = 520.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 10] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    /// Drawn as solid markers joined by a staircase.
    pub realizable: Vec<CostPoint>,
    /// Drawn dashed.
    pub optimistic: Vec<CostPoint>,
}

/// Final-front schedules of a report, at most `limit` of them.
pub fn report_series(report: &SearchReport, limit: usize) -> Vec<Series> {
    report
        .final_front()
        .take(limit)
        .map(|c| Series { label: c.schedule.to_string(), realizable: c.realizable(), optimistic: c.initial.optimistic.clone() })
        .collect()
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(t);
        t += step;
    }
    out
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 1e6).round() / 1e6)
    }
}

pub fn render_svg(title: &str, series: &[Series]) -> String {
    let pts = series.iter().flat_map(|s| s.realizable.iter().chain(&s.optimistic));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts.filter(|p| p.exec.is_finite() && p.checkin.is_finite()) {
        x0 = x0.min(p.exec);
        x1 = x1.max(p.exec);
        y0 = y0.min(p.checkin);
        y1 = y1.max(p.checkin);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |a: f64, b: f64| {
        let d = if b > a { (b - a) * 0.05 } else { a.abs().max(1.0) * 0.05 };
        (a - d, b + d)
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let sy = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut o = String::new();
    let _ = writeln!(o, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(o, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(o, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, (W - RIGHT + LEFT) / 2.0, escape(title));
    let (bx, by) = (H - BOTTOM, W - RIGHT);
    let _ = writeln!(o, r#"<path d="M{LEFT} {TOP} V{bx} H{by}" fill="none" stroke="black"/>"#);
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(o, r#"<line x1="{x:.2}" y1="{bx}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, bx + 5.0, bx + 18.0, tick_label(t));
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(o, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 5.0, LEFT - 8.0, y + 4.0, tick_label(t));
    }
    let _ = writeln!(o, r#"<text x="{}" y="{}" text-anchor="middle">Execution cost</text>"#, (LEFT + W - RIGHT) / 2.0, H - 15.0);
    let _ = writeln!(o, r#"<text transform="translate(20 {}) rotate(-90)" text-anchor="middle">Check-in cost</text>"#, (TOP + H - BOTTOM) / 2.0);

    for (i, s) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let path = |v: &[CostPoint], stairs: bool| {
            let mut d = String::new();
            for (j, p) in v.iter().enumerate() {
                if j == 0 {
                    let _ = write!(d, "M{:.2} {:.2}", sx(p.exec), sy(p.checkin));
                } else if stairs {
                    let _ = write!(d, " H{:.2} V{:.2}", sx(p.exec), sy(p.checkin));
                } else {
                    let _ = write!(d, " L{:.2} {:.2}", sx(p.exec), sy(p.checkin));
                }
            }
            d
        };
        if s.optimistic.len() > 1 {
            let _ = writeln!(o, r#"<path d="{}" fill="none" stroke="{c}" stroke-dasharray="6 4"/>"#, path(&s.optimistic, false));
        }
        if s.realizable.len() > 1 {
            let _ = writeln!(o, r#"<path d="{}" fill="none" stroke="{c}"/>"#, path(&s.realizable, true));
        }
        for p in &s.realizable {
            let _ = writeln!(o, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{c}"/>"#, sx(p.exec), sy(p.checkin));
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = W - RIGHT + 15.0;
        let _ = writeln!(o, r#"<circle cx="{lx}" cy="{ly}" r="4" fill="{c}"/><text x="{}" y="{}">{}</text>"#, lx + 10.0, ly + 4.0, escape(&s.label));
    }
    o.push_str("</svg>\n");
    o
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
