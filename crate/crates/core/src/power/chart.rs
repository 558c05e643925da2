use std::fmt::Write;

use super::{DecisionRecord, PowerCurve, CURVE_LOG_E_RANGE};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: (f64, f64, f64, f64) = (50.0, 120.0, 20.0, 45.0); // left, right, top, bottom
const PALETTE: [&str; 6] = ["#1b9e77", "#7570b3", "#e7298a", "#d95f02", "#66a61e", "#e6ab02"];

fn sx(log_e: f64) -> f64 {
    let (lo, hi) = CURVE_LOG_E_RANGE;
    let t = ((log_e - lo) / (hi - lo)).clamp(0.0, 1.0);
    MARGIN.0 + t * (WIDTH - MARGIN.0 - MARGIN.1)
}

fn sy(power: f64) -> f64 {
    HEIGHT - MARGIN.3 - power.clamp(0.0, 1.0) * (HEIGHT - MARGIN.2 - MARGIN.3)
}

/// Power against `ln E`: one line per curve, decisions as dots at 0 and 1.
///
/// Dots with `E = 0` or `ln E` outside the plotted range sit on the
/// nearest edge.
pub fn render_power_chart(curves: &[(String, &PowerCurve)], dots: &[DecisionRecord]) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(s, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);

    let (x0, x1) = (sx(CURVE_LOG_E_RANGE.0), sx(CURVE_LOG_E_RANGE.1));
    let (y0, y1) = (sy(0.0), sy(1.0));
    let _ = write!(s, r##"<g stroke="#999999" stroke-width="1">"##);
    let _ = write!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
    let _ = write!(s, "</g>");
    let lo = CURVE_LOG_E_RANGE.0 as i32;
    let hi = CURVE_LOG_E_RANGE.1 as i32;
    for t in lo..=hi {
        let x = sx(t as f64);
        let _ = write!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{t}</text>"#, y0 + 15.0);
    }
    for p in [0.0, 0.05, 0.25, 0.5, 0.75, 1.0] {
        let y = sy(p);
        let _ = write!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{p}</text>"#, x0 - 6.0, y + 4.0);
    }
    let _ = write!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">ln(effect size)</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 8.0
    );
    let _ = write!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">power</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    let _ = write!(s, r##"<g fill="#444444" fill-opacity="0.25">"##);
    for d in dots {
        let y = if d.reject { y1 } else { y0 };
        let _ = write!(s, r#"<circle cx="{:.2}" cy="{y:.2}" r="2.5"/>"#, sx(d.log_e));
    }
    let _ = write!(s, "</g>");

    for (i, (label, curve)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> =
            curve.curve.iter().map(|p| format!("{:.2},{:.2}", sx(p.log_e), sy(p.power))).collect();
        let _ = write!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = MARGIN.2 + 16.0 * i as f64 + 10.0;
        let lx = WIDTH - MARGIN.1 + 12.0;
        let _ = write!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::{CurvePoint, INTERCEPT};

    #[test]
    fn one_polyline_per_curve() {
        let curve = PowerCurve {
            beta1: 1.0,
            intercept: INTERCEPT,
            std_error: 0.1,
            records: 10,
            rejections: 5,
            curve: vec![
                CurvePoint { log_e: -1.0, effect_size: (-1f64).exp(), power: 0.1 },
                CurvePoint { log_e: 6.0, effect_size: 6f64.exp(), power: 1.0 },
            ],
            bootstrap_beta1: vec![],
            bootstrap_skipped: 0,
            warnings: vec![],
        };
        let svg = render_power_chart(&[("RESET".into(), &curve), ("<BP>".into(), &curve)], &[]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("&lt;BP&gt;"));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
