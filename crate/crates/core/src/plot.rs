//! Minimal SVG line plots of PSNR against bits per pixel.

use std::fmt::Write as _;

use crate::evaluation::RDCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 52.0;

pub const JOINT_COLOR: &str = "#1f4fd1";
pub const DECOUPLED_COLOR: &str = "#000000";
pub const REFERENCE_COLOR: &str = "#d11f1f";

#[derive(Clone, Debug)]
pub struct Series<'a> {
    pub curve: &'a RDCurve,
    pub color: &'a str,
    pub dashed: bool,
}

/// Horizontal line at a fixed PSNR.
#[derive(Clone, Debug)]
pub struct ReferenceLine<'a> {
    pub label: &'a str,
    pub psnr: f64,
    pub dashed: bool,
}

fn nice_step(span: f64, target_ticks: f64) -> f64 {
    let raw = span / target_ticks;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let f = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    f * mag
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders the curves and reference lines. Infinite PSNR values are skipped.
pub fn render_svg(title: &str, series: &[Series<'_>], refs: &[ReferenceLine<'_>]) -> String {
    let finite = |p: f64| p.is_finite();
    let xs = series.iter().flat_map(|s| {
        s.curve
            .points()
            .iter()
            .filter(|p| finite(p.psnr))
            .map(|p| p.bpp)
    });
    let ys = series
        .iter()
        .flat_map(|s| s.curve.points().iter().map(|p| p.psnr))
        .chain(refs.iter().map(|r| r.psnr))
        .filter(|p| finite(*p));
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| {
        (a.min(y), b.max(y))
    });
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    x0 = x0.min(0.0);
    if x1 - x0 < 1e-9 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        (y0, y1) = (y0 - 1.0, y1 + 1.0);
    }
    let xstep = nice_step(x1 - x0, 6.0);
    let ystep = nice_step(y1 - y0, 6.0);
    let (x0, x1) = ((x0 / xstep).floor() * xstep, (x1 / xstep).ceil() * xstep);
    let (y0, y1) = ((y0 / ystep).floor() * ystep, (y1 / ystep).ceil() * ystep);

    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="16" text-anchor="middle" font-size="13">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );

    let mut x = x0;
    while x <= x1 + xstep * 1e-6 {
        let px = sx(x);
        let _ = writeln!(
            s,
            r##"<line x1="{px:.1}" y1="{TOP}" x2="{px:.1}" y2="{:.1}" stroke="#e4e4e4"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            TOP + ph,
            TOP + ph + 16.0,
            trim_num(x)
        );
        x += xstep;
    }
    let mut y = y0;
    while y <= y1 + ystep * 1e-6 {
        let py = sy(y);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#e4e4e4"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            py + 4.0,
            trim_num(y)
        );
        y += ystep;
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">bits per pixel</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">PSNR (dB)</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let dash = |d: bool| if d { r#" stroke-dasharray="6 4""# } else { "" };
    let mut legend: Vec<(String, &str, bool)> = Vec::new();
    for r in refs.iter().filter(|r| finite(r.psnr)) {
        let py = sy(r.psnr);
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="{REFERENCE_COLOR}" stroke-width="1.5"{}/>"#,
            LEFT + pw,
            dash(r.dashed)
        );
        legend.push((r.label.to_string(), REFERENCE_COLOR, r.dashed));
    }
    for se in series {
        let pts: Vec<String> = se
            .curve
            .points()
            .iter()
            .filter(|p| finite(p.psnr))
            .map(|p| format!("{:.1},{:.1}", sx(p.bpp), sy(p.psnr)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.8"{}/>"#,
            pts.join(" "),
            se.color,
            dash(se.dashed)
        );
        for p in &pts {
            let (cx, cy) = p.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(
                s,
                r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{}"/>"#,
                se.color
            );
        }
        legend.push((se.curve.label.clone(), se.color, se.dashed));
    }

    let lx = LEFT + pw + 12.0;
    for (i, (label, color, dashed)) in legend.iter().enumerate() {
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="1.8"{}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 22.0,
            dash(*dashed),
            lx + 28.0,
            ly + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn trim_num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::RDPoint;

    #[test]
    fn renders_lines_and_references() {
        let c = RDCurve::new(
            "joint_a0.01",
            vec![
                RDPoint {
                    qp: 4,
                    bpp: 3.0,
                    psnr: 40.0,
                },
                RDPoint {
                    qp: 19,
                    bpp: 1.5,
                    psnr: 35.0,
                },
            ],
        )
        .unwrap();
        let svg = render_svg(
            "t <1>",
            &[Series {
                curve: &c,
                color: JOINT_COLOR,
                dashed: false,
            }],
            &[ReferenceLine {
                label: "none",
                psnr: 30.0,
                dashed: true,
            }],
        );
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polyline"));
        assert!(svg.contains(REFERENCE_COLOR));
        assert!(svg.contains("t &lt;1&gt;"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn empty_plot_is_still_valid() {
        let svg = render_svg("empty", &[], &[]);
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
