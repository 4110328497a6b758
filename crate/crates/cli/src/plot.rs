//! SVG rendering of persisted evaluation outputs.

use std::fmt::Write;

use ids_core::metrics::{ConfusionMatrix, RocCurve};
use ids_core::ClassLabel;

const CLASS_COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"];

fn header(out: &mut String, width: u32, height: u32) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
}

/// Row-normalized heat grid, each cell labeled with its count.
pub fn confusion_svg(c: &ConfusionMatrix) -> String {
    const CELL: u32 = 90;
    const LEFT: u32 = 110;
    const TOP: u32 = 70;
    let size = CELL * 5;
    let mut out = String::new();
    header(&mut out, LEFT + size + 30, TOP + size + 60);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="30" text-anchor="middle" font-size="18">Confusion matrix</text>"#,
        LEFT + size / 2
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">Predicted</text>"#,
        LEFT + size / 2,
        TOP + size + 45
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{y}" text-anchor="middle" font-size="14" transform="rotate(-90 20 {y})">Actual</text>"#,
        y = TOP + size / 2
    );
    for (i, actual) in ClassLabel::ALL.iter().enumerate() {
        let row_total = c.row_sum(i);
        let y = TOP + i as u32 * CELL;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="13">{actual}</text>"#,
            LEFT - 8,
            y + CELL / 2 + 5
        );
        for (j, predicted) in ClassLabel::ALL.iter().enumerate() {
            let x = LEFT + j as u32 * CELL;
            let count = c.counts[i][j];
            let f = if row_total == 0 { 0.0 } else { count as f64 / row_total as f64 };
            let shade = |lo: f64| (255.0 - f * (255.0 - lo)).round() as u8;
            let fill = format!("#{:02x}{:02x}{:02x}", shade(8.0), shade(48.0), shade(107.0));
            let ink = if f > 0.5 { "white" } else { "black" };
            let _ = writeln!(out, r#"<g class="cell" data-actual="{actual}" data-predicted="{predicted}">"#);
            let _ = writeln!(
                out,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}" stroke="#999"/>"##
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle" font-size="14" fill="{ink}">{count}</text>"#,
                x + CELL / 2,
                y + CELL / 2 + 5
            );
            let _ = writeln!(out, "</g>");
        }
    }
    for (j, predicted) in ClassLabel::ALL.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{predicted}</text>"#,
            LEFT + j as u32 * CELL + CELL / 2,
            TOP + size + 20
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One-vs-rest ROC curves on shared axes, with the chance diagonal dashed.
/// Classes whose curve is empty are skipped.
pub fn roc_svg(curves: &[(ClassLabel, RocCurve)]) -> String {
    const SIZE: f64 = 400.0;
    const LEFT: f64 = 70.0;
    const TOP: f64 = 50.0;
    let px = |fpr: f64| LEFT + fpr * SIZE;
    let py = |tpr: f64| TOP + (1.0 - tpr) * SIZE;
    let mut out = String::new();
    header(&mut out, (LEFT + SIZE + 190.0) as u32, (TOP + SIZE + 60.0) as u32);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="30" text-anchor="middle" font-size="18">ROC curves (one-vs-rest)</text>"#,
        LEFT + SIZE / 2.0
    );
    let _ = writeln!(
        out,
        r##"<rect x="{LEFT}" y="{TOP}" width="{SIZE}" height="{SIZE}" fill="none" stroke="#333"/>"##
    );
    for tick in 0..=5 {
        let v = tick as f64 / 5.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{v:.1}</text>"#,
            px(v),
            TOP + SIZE + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{v:.1}</text>"#,
            LEFT - 6.0,
            py(v) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">False positive rate</text>"#,
        LEFT + SIZE / 2.0,
        TOP + SIZE + 40.0
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{y:.1}" text-anchor="middle" font-size="13" transform="rotate(-90 20 {y:.1})">True positive rate</text>"#,
        y = TOP + SIZE / 2.0
    );
    let _ = writeln!(
        out,
        r#"<line class="chance" x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-dasharray="6 4"/>"#,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    let mut legend_row = 0;
    for (class, curve) in curves {
        if curve.points.is_empty() {
            continue;
        }
        let color = CLASS_COLORS[class.index()];
        let points: Vec<String> = curve
            .points
            .iter()
            .map(|&(f, t)| format!("{:.2},{:.2}", px(f), py(t)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="roc" data-class="{class}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = TOP + 20.0 + legend_row as f64 * 22.0;
        let lx = LEFT + SIZE + 20.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="3"/>"#,
            lx + 24.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12">{class} (AUC {:.3})</text>"#,
            lx + 30.0,
            ly + 4.0,
            curve.auc
        );
        legend_row += 1;
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_grid_labels_every_cell() {
        let mut counts = [[0u64; 5]; 5];
        counts[4][0] = 5;
        counts[4][4] = 60;
        let svg = confusion_svg(&ConfusionMatrix { counts });
        assert_eq!(svg.matches(r#"class="cell""#).count(), 25);
        let cell = svg.split(r#"data-actual="U2R" data-predicted="Normal">"#).nth(1).unwrap();
        let cell = &cell[..cell.find("</g>").unwrap()];
        assert!(cell.contains(">5</text>"));
    }

    #[test]
    fn roc_chart_has_curves_and_diagonal() {
        let curve = RocCurve {
            points: vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)],
            auc: 1.0,
        };
        let curves: Vec<(ClassLabel, RocCurve)> = ClassLabel::ALL.iter().map(|&c| (c, curve.clone())).collect();
        let svg = roc_svg(&curves);
        assert_eq!(svg.matches(r#"class="roc""#).count(), 5);
        assert_eq!(svg.matches(r#"class="chance""#).count(), 1);
        assert!(svg.contains("stroke-dasharray"));
        assert_eq!(svg, roc_svg(&curves));
    }
}
