use std::fmt::Write;

use super::{LineupBundle, Panel};

pub const PANEL_WIDTH: f64 = 200.0;
pub const PANEL_HEIGHT: f64 = 160.0;
const INSET: f64 = 6.0;
const LABEL_HEIGHT: f64 = 18.0;
const GAP: f64 = 8.0;
const GRID_COLUMNS: usize = 5;

/// Shared axis limits for every panel of a lineup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotRanges {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl PlotRanges {
    /// Union of all panels, padded by 5% on each side.
    pub fn of(panels: &[Panel]) -> Self {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (0.0f64, 0.0f64);
        for p in panels {
            for &v in &p.fitted {
                x = (x.0.min(v), x.1.max(v));
            }
            for &v in &p.residuals {
                y = (y.0.min(v), y.1.max(v));
            }
        }
        Self { x: pad(x), y: pad(y) }
    }
}

fn pad((lo, hi): (f64, f64)) -> (f64, f64) {
    let span = hi - lo;
    let span = if span > 0.0 { span } else { lo.abs().max(1.0) };
    (lo - 0.05 * span, hi + 0.05 * span)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelRendering {
    pub svg: String,
    pub width: f64,
    pub height: f64,
    /// 1-based.
    pub panel_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedLineup {
    pub grid_svg: String,
    pub panels: Vec<PanelRendering>,
}

/// Plot body (background, zero line, points) in panel-local coordinates.
fn panel_body(panel: &Panel, ranges: &PlotRanges) -> String {
    let sx = |v: f64| INSET + (v - ranges.x.0) / (ranges.x.1 - ranges.x.0) * (PANEL_WIDTH - 2.0 * INSET);
    let sy = |v: f64| PANEL_HEIGHT - INSET - (v - ranges.y.0) / (ranges.y.1 - ranges.y.0) * (PANEL_HEIGHT - 2.0 * INSET);
    let mut s = String::new();
    let _ = write!(
        s,
        r##"<rect width="{PANEL_WIDTH}" height="{PANEL_HEIGHT}" fill="#ebebeb"/>"##
    );
    let zero = sy(0.0);
    let _ = write!(
        s,
        r##"<line x1="0" y1="{zero:.2}" x2="{PANEL_WIDTH}" y2="{zero:.2}" stroke="#d62728" stroke-width="1.5"/>"##
    );
    s.push_str(r##"<g fill="#000000" fill-opacity="0.6">"##);
    for (f, e) in panel.fitted.iter().zip(&panel.residuals) {
        let _ = write!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2"/>"#, sx(*f), sy(*e));
    }
    s.push_str("</g>");
    s
}

/// A single panel as a standalone SVG document, with no text of any kind.
pub fn render_panel(panel: &Panel, ranges: &PlotRanges, panel_index: usize) -> PanelRendering {
    let svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_WIDTH}" height="{PANEL_HEIGHT}" viewBox="0 0 {PANEL_WIDTH} {PANEL_HEIGHT}">{}</svg>
"#,
        panel_body(panel, ranges)
    );
    PanelRendering { svg, width: PANEL_WIDTH, height: PANEL_HEIGHT, panel_index }
}

/// The full grid (numbered panels, five per row) plus one SVG per panel.
pub fn render_lineup(bundle: &LineupBundle) -> RenderedLineup {
    let ranges = PlotRanges::of(&bundle.panels);
    let m = bundle.panels.len();
    let cols = GRID_COLUMNS.min(m);
    let rows = m.div_ceil(cols);
    let cell_w = PANEL_WIDTH + GAP;
    let cell_h = PANEL_HEIGHT + LABEL_HEIGHT + GAP;
    let width = cols as f64 * cell_w + GAP;
    let height = rows as f64 * cell_h + GAP;
    let mut grid = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}"><rect width="{width}" height="{height}" fill="white"/>"#
    );
    let mut panels = Vec::with_capacity(m);
    for (i, panel) in bundle.panels.iter().enumerate() {
        let (r, c) = (i / cols, i % cols);
        let gx = GAP + c as f64 * cell_w;
        let gy = GAP + r as f64 * cell_h;
        let _ = write!(
            grid,
            r#"<g class="panel" transform="translate({gx},{gy})"><text x="{}" y="13" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text><g transform="translate(0,{LABEL_HEIGHT})">{}</g></g>"#,
            PANEL_WIDTH / 2.0,
            i + 1,
            panel_body(panel, &ranges)
        );
        panels.push(render_panel(panel, &ranges, i + 1));
    }
    grid.push_str("</svg>\n");
    RenderedLineup { grid_svg: grid, panels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lineup::make_lineup;
    use crate::numerics::RandomStream;
    use crate::simulate::{simulate, ExperimentFactors, PredictorDist};

    fn bundle(seed: u64) -> LineupBundle {
        let f = ExperimentFactors::heteroskedastic(1, 16.0, 50, PredictorDist::Normal);
        let ds = simulate(&f, &mut RandomStream::new(987_654_321_012)).unwrap();
        make_lineup(&ds, 20, &mut RandomStream::new(seed)).unwrap()
    }

    /// Minimal well-formedness check: every tag is closed in order.
    fn balanced(svg: &str) -> bool {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = svg;
        while let Some(start) = rest.find('<') {
            let end = rest[start..].find('>').map(|e| start + e).unwrap();
            let tag = &rest[start + 1..end];
            if let Some(name) = tag.strip_prefix('/') {
                if stack.pop().as_deref() != Some(name.trim()) {
                    return false;
                }
            } else if !tag.ends_with('/') {
                stack.push(tag.split_whitespace().next().unwrap().to_string());
            }
            rest = &rest[end + 1..];
        }
        stack.is_empty()
    }

    #[test]
    fn grid_is_well_formed_with_m_groups() {
        let r = render_lineup(&bundle(1));
        assert!(balanced(&r.grid_svg));
        assert_eq!(r.grid_svg.matches(r#"<g class="panel""#).count(), 20);
        assert_eq!(r.panels.len(), 20);
        for p in &r.panels {
            assert!(balanced(&p.svg));
            assert_eq!(p.svg.matches("<line").count(), 1);
            assert!(!p.svg.contains("<text"));
        }
    }

    #[test]
    fn no_secrets_in_svg() {
        let b = bundle(123_456_789_987);
        let r = render_lineup(&b);
        for svg in std::iter::once(&r.grid_svg).chain(r.panels.iter().map(|p| &p.svg)) {
            for needle in ["data", "seed", "factor", "sigma", "position", "heteroskedastic", "123456789987", "987654321012"] {
                assert!(!svg.to_lowercase().contains(needle), "found {needle}");
            }
        }
    }

    #[test]
    fn moving_the_data_plot_permutes_panels_only() {
        let b = bundle(5);
        let mut moved = b.clone();
        let target = if b.data_position == 1 { 2 } else { 1 };
        moved.panels.swap(b.data_position - 1, target - 1);
        moved.data_position = target;
        let r1 = render_lineup(&b);
        let r2 = render_lineup(&moved);
        assert_eq!(r1.panels[b.data_position - 1].svg, r2.panels[target - 1].svg);
        assert_eq!(r1.panels[target - 1].svg, r2.panels[b.data_position - 1].svg);
        let mut s1: Vec<&str> = r1.panels.iter().map(|p| p.svg.as_str()).collect();
        let mut s2: Vec<&str> = r2.panels.iter().map(|p| p.svg.as_str()).collect();
        s1.sort();
        s2.sort();
        assert_eq!(s1, s2);
    }

    #[test]
    fn rendering_is_deterministic() {
        let b = bundle(9);
        assert_eq!(render_lineup(&b), render_lineup(&b));
    }
}
