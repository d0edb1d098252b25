//! Minimal SVG bar charts for importance reports.

use std::fmt::Write;

const ROW: f64 = 22.0;
const LABEL_W: f64 = 150.0;
const BAR_W: f64 = 320.0;
const VALUE_W: f64 = 70.0;
const TOP: f64 = 36.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Horizontal bar chart, one row per `(label, value)` in the given order.
/// Bars are scaled to the largest absolute value; negative values are drawn
/// in a second color. Output is byte-stable for identical input.
pub fn bar_chart(title: &str, rows: &[(String, f64)]) -> String {
    let width = LABEL_W + BAR_W + VALUE_W;
    let height = TOP + ROW * rows.len() as f64 + 12.0;
    let scale = rows.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="8" y="20" font-size="14" font-weight="bold">{}</text>"#,
        escape(title)
    );
    for (i, (label, value)) in rows.iter().enumerate() {
        let y = TOP + ROW * i as f64;
        let len = if scale > 0.0 { BAR_W * value.abs() / scale } else { 0.0 };
        let fill = if *value < 0.0 { "#c0504d" } else { "#4f81bd" };
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LABEL_W - 6.0,
            y + 14.0,
            escape(label)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{LABEL_W:.1}" y="{:.1}" width="{len:.2}" height="{:.1}" fill="{fill}"/>"#,
            y + 3.0,
            ROW - 6.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{value:.4}</text>"#,
            LABEL_W + len + 4.0,
            y + 14.0
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_bar_per_row_scaled_to_max() {
        let svg = bar_chart(
            "a < b",
            &[("tune_5".into(), 0.5), ("flip_h".into(), 0.25), ("x&y".into(), 0.0)],
        );
        assert_eq!(svg.matches("<rect x=").count(), 3);
        assert!(svg.contains(r#"width="320.00""#));
        assert!(svg.contains(r#"width="160.00""#));
        assert!(svg.contains("a &lt; b") && svg.contains("x&amp;y"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn all_zero_is_drawable() {
        let svg = bar_chart("t", &[("a".into(), 0.0)]);
        assert!(svg.contains(r#"width="0.00""#));
        assert!(!svg.contains("NaN"));
    }
}
