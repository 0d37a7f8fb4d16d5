//! Static SVG rendering of a risk chart.

use std::fmt::Write;

use crate::planning::{Quadrant, RiskChart};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 640.0;
const MARGIN: f64 = 70.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fill(q: Quadrant) -> &'static str {
    match q {
        Quadrant::Q1 => "#4c78a8",
        Quadrant::Q2 => "#54a24b",
        Quadrant::Q3 => "#9d755d",
        Quadrant::Q4 => "#e45756",
    }
}

/// Renders the chart as a self-contained SVG document with the origin in the
/// center, both axes drawn through it and each quadrant labeled.
pub fn render_risk_chart(chart: &RiskChart) -> String {
    let extent = chart
        .points
        .iter()
        .flat_map(|p| [p.relative_dd.abs(), p.relative_eff.abs()])
        .fold(0.0f64, f64::max);
    let extent = if extent > 0.0 { extent * 1.15 } else { 1.0 };

    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let cx = MARGIN + plot_w / 2.0;
    let cy = MARGIN + plot_h / 2.0;
    let x_of = |v: f64| cx + v / extent * plot_w / 2.0;
    let y_of = |v: f64| cy - v / extent * plot_h / 2.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#888888"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN}" y1="{cy}" x2="{}" y2="{cy}" stroke="black"/>"#,
        WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{cx}" y1="{MARGIN}" x2="{cx}" y2="{}" stroke="black"/>"#,
        HEIGHT - MARGIN
    );

    let quadrant_labels = [
        (
            Quadrant::Q1,
            WIDTH - MARGIN - 8.0,
            MARGIN + 18.0,
            "end",
            "Q1 high density, high effectiveness",
        ),
        (
            Quadrant::Q2,
            MARGIN + 8.0,
            MARGIN + 18.0,
            "start",
            "Q2 low density, high effectiveness",
        ),
        (
            Quadrant::Q3,
            MARGIN + 8.0,
            HEIGHT - MARGIN - 8.0,
            "start",
            "Q3 low density, low effectiveness",
        ),
        (
            Quadrant::Q4,
            WIDTH - MARGIN - 8.0,
            HEIGHT - MARGIN - 8.0,
            "end",
            "Q4 high density, low effectiveness",
        ),
    ];
    for (q, x, y, anchor, label) in quadrant_labels {
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" text-anchor="{anchor}" fill="{}">{label}</text>"#,
            fill(q)
        );
    }

    let _ = writeln!(
        svg,
        r#"<text x="{cx}" y="{}" text-anchor="middle">relative defect density</text>"#,
        HEIGHT - MARGIN / 3.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{cy}" text-anchor="middle" transform="rotate(-90 {} {cy})">relative effectiveness</text>"#,
        MARGIN / 3.0,
        MARGIN / 3.0
    );

    for p in &chart.points {
        let x = x_of(p.relative_dd);
        let y = y_of(p.relative_eff);
        let _ = writeln!(
            svg,
            r#"<circle cx="{x:.3}" cy="{y:.3}" r="5" fill="{}"/>"#,
            fill(p.quadrant)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.3}" y="{:.3}">{}</text>"#,
            x + 8.0,
            y - 6.0,
            escape(&p.project_id)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planning::{build_risk_chart, ProjectPoint};

    #[test]
    fn svg_is_self_contained_and_labeled() {
        let pts = vec![
            ProjectPoint::new("A&B", 0.1, 0.9),
            ProjectPoint::new("C", 0.9, 0.1),
        ];
        let ids: Vec<String> = pts.iter().map(|p| p.project_id.clone()).collect();
        let chart = build_risk_chart(&pts, 1.0, &ids).unwrap();
        let svg = render_risk_chart(&chart);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("A&amp;B"));
        for q in ["Q1", "Q2", "Q3", "Q4"] {
            assert!(svg.contains(q));
        }
        assert!(!svg.contains("href"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }
}
