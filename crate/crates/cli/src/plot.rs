use std::fmt::Write as _;

use crate::commands::AblationRow;

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 220.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 4] = ["#3b6ea8", "#d08a2e", "#5a9e57", "#9a9a9a"];

fn panel(svg: &mut String, x0: f64, title: &str, values: &[(&str, f64)]) {
    let top = values.iter().map(|v| v.1).fold(0.0, f64::max).max(1e-9) * 1.15;
    let base = MARGIN + PANEL_H;
    let slot = PANEL_W / values.len() as f64;
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{title}</text>"#,
        x0 + PANEL_W / 2.0,
        MARGIN - 14.0
    )
    .unwrap();
    writeln!(
        svg,
        r##"<line x1="{x0}" y1="{base}" x2="{}" y2="{base}" stroke="#333"/>"##,
        x0 + PANEL_W
    )
    .unwrap();
    for (i, (name, v)) in values.iter().enumerate() {
        let h = PANEL_H * v / top;
        let x = x0 + i as f64 * slot + slot * 0.15;
        writeln!(
            svg,
            r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="{}"/>"#,
            base - h,
            slot * 0.7,
            COLORS[i % COLORS.len()]
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{v:.2}</text>"#,
            x + slot * 0.35,
            base - h - 4.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{name}</text>"#,
            x + slot * 0.35,
            base + 16.0
        )
        .unwrap();
    }
}

/// Two bar panels: median accuracy and median OADG per variant, in percent.
pub fn ablation_svg(rows: &[AblationRow]) -> String {
    let width = 2.0 * PANEL_W + 3.0 * MARGIN;
    let height = PANEL_H + 2.5 * MARGIN;
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif">"#
    );
    svg.push('\n');
    let acc: Vec<(&str, f64)> = rows
        .iter()
        .map(|r| (r.variant, 100.0 * r.median_accuracy))
        .collect();
    let gap: Vec<(&str, f64)> = rows
        .iter()
        .map(|r| (r.variant, 100.0 * r.median_oadg))
        .collect();
    panel(&mut svg, MARGIN, "median accuracy (%)", &acc);
    panel(&mut svg, 2.0 * MARGIN + PANEL_W, "median OADG (%)", &gap);
    svg.push_str("</svg>\n");
    svg
}
