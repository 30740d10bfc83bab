//! Minimal self-contained SVG charts.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 320.0;
const PAD: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = write!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        w / 2.0,
        esc(title)
    );
}

fn bounds<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

/// A labelled series, optionally offset along x.
pub struct Series<'a> {
    pub label: &'a str,
    pub x0: usize,
    pub values: &'a [f64],
}

/// Line chart with axes, min/max tick labels and a legend. `shade` marks
/// x indices drawn with a grey band behind the lines.
pub fn line_chart(title: &str, xlabel: &str, series: &[Series<'_>], shade: &[usize]) -> String {
    let xmax = series.iter().map(|s| s.x0 + s.values.len()).max().unwrap_or(1).max(2) - 1;
    let (lo, hi) = bounds(series.iter().flat_map(|s| s.values.iter()));
    let sx = |x: f64| PAD + x / xmax as f64 * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - lo) / (hi - lo) * (H - 2.0 * PAD);
    let mut out = String::new();
    header(&mut out, W, H, title);
    let band = (W - 2.0 * PAD) / xmax as f64;
    for &x in shade {
        let _ = write!(
            out,
            r##"<rect x="{:.2}" y="{PAD}" width="{:.2}" height="{}" fill="#e6e6e6"/>"##,
            sx(x as f64) - band / 2.0,
            band,
            H - 2.0 * PAD
        );
    }
    let _ = write!(
        out,
        r#"<path d="M{PAD} {PAD} V{} H{}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = write!(out, r#"<text x="4" y="{:.1}">{hi:.3}</text>"#, PAD + 4.0);
    let _ = write!(out, r#"<text x="4" y="{:.1}">{lo:.3}</text>"#, H - PAD);
    let _ = write!(out, r#"<text x="{PAD}" y="{:.1}">0</text>"#, H - PAD + 14.0);
    let _ = write!(
        out,
        r#"<text x="{}" y="{:.1}" text-anchor="end">{xmax}</text>"#,
        W - PAD,
        H - PAD + 14.0
    );
    let _ = write!(
        out,
        r#"<text x="{}" y="{:.1}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        esc(xlabel)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        let mut pen_up = true;
        for (j, &v) in s.values.iter().enumerate() {
            if !v.is_finite() {
                pen_up = true;
                continue;
            }
            let _ = write!(d, "{}{:.2} {:.2} ", if pen_up { "M" } else { "L" }, sx((s.x0 + j) as f64), sy(v));
            pen_up = false;
        }
        let _ = write!(
            out,
            r#"<path d="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
            d.trim_end()
        );
        let ly = PAD + 14.0 * i as f64;
        let _ = write!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="3" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            W - PAD - 110.0,
            ly - 4.0,
            W - PAD - 96.0,
            ly,
            esc(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Grid of `rows × cols` cells shaded from white (min) to dark blue (max).
pub fn heatmap(title: &str, rows: &[Vec<f64>], row_name: &str, col_name: &str) -> String {
    let nr = rows.len().max(1);
    let nc = rows.iter().map(Vec::len).max().unwrap_or(1).max(1);
    let cell = (560.0 / nc as f64).min(360.0 / nr as f64).clamp(2.0, 40.0);
    let (w, h) = (nc as f64 * cell + 2.0 * PAD, nr as f64 * cell + 2.0 * PAD);
    let (lo, hi) = bounds(rows.iter().flatten());
    let mut out = String::new();
    header(&mut out, w, h, title);
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let t = if v.is_finite() { (v - lo) / (hi - lo) } else { 0.0 };
            let shade = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
            let _ = write!(
                out,
                r##"<rect x="{:.2}" y="{:.2}" width="{cell:.2}" height="{cell:.2}" fill="#{:02x}{:02x}{:02x}"><title>{r},{c}: {v:.4}</title></rect>"##,
                PAD + c as f64 * cell,
                PAD + r as f64 * cell,
                shade(255.0, 8.0),
                shade(255.0, 48.0),
                shade(255.0, 107.0)
            );
        }
    }
    let _ = write!(
        out,
        r#"<text x="{}" y="{:.1}" text-anchor="middle">{} ({nc})</text>"#,
        w / 2.0,
        h - 16.0,
        esc(col_name)
    );
    let _ = write!(
        out,
        r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">{} ({nr})</text>"#,
        h / 2.0,
        h / 2.0,
        esc(row_name)
    );
    let _ = write!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">[{lo:.3}, {hi:.3}]</text>"#,
        w - 4.0,
        h - 4.0
    );
    out.push_str("</svg>\n");
    out
}
