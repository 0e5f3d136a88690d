//! Dependency-free SVG bar charts for the importance reports: one panel per
//! scoring method, one bar per base model, emitted as plain text so the
//! output is diffable and testable.

/// One chart panel: a title and (label, score) bars.
pub struct Panel<'a> {
    pub title: &'a str,
    pub bars: Vec<(String, f64)>,
}

const BAR_WIDTH: f64 = 34.0;
const BAR_GAP: f64 = 10.0;
const PANEL_HEIGHT: f64 = 190.0;
const PLOT_HEIGHT: f64 = 120.0;
const MARGIN: f64 = 42.0;

/// Render stacked bar-chart panels into one SVG document.
pub fn bar_chart(panels: &[Panel<'_>]) -> String {
    let bars = panels.iter().map(|p| p.bars.len()).max().unwrap_or(0);
    let width = MARGIN * 2.0 + bars as f64 * (BAR_WIDTH + BAR_GAP);
    let height = panels.len() as f64 * PANEL_HEIGHT + 20.0;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\" font-size=\"10\">\n"
    );
    for (i, panel) in panels.iter().enumerate() {
        let top = 20.0 + i as f64 * PANEL_HEIGHT;
        out.push_str(&render_panel(panel, top));
    }
    out.push_str("</svg>\n");
    out
}

fn render_panel(panel: &Panel<'_>, top: f64) -> String {
    let max_abs = panel
        .bars
        .iter()
        .map(|(_, v)| v.abs())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let baseline = top + 20.0 + PLOT_HEIGHT;
    let mut out = format!(
        "  <text x=\"{MARGIN}\" y=\"{:.1}\" font-size=\"12\">{}</text>\n",
        top + 10.0,
        escape(panel.title)
    );
    out.push_str(&format!(
        "  <line x1=\"{MARGIN}\" y1=\"{baseline:.1}\" x2=\"{:.1}\" y2=\"{baseline:.1}\" stroke=\"black\"/>\n",
        MARGIN + panel.bars.len() as f64 * (BAR_WIDTH + BAR_GAP)
    ));
    for (j, (label, value)) in panel.bars.iter().enumerate() {
        let x = MARGIN + j as f64 * (BAR_WIDTH + BAR_GAP) + BAR_GAP / 2.0;
        let h = (value.abs() / max_abs) * PLOT_HEIGHT;
        // negative weights hang below the axis
        let y = if *value >= 0.0 { baseline - h } else { baseline };
        out.push_str(&format!(
            "  <rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{BAR_WIDTH}\" height=\"{h:.1}\" fill=\"#4878a8\"/>\n"
        ));
        out.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            x + BAR_WIDTH / 2.0,
            baseline + 14.0,
            escape(label)
        ));
        out.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"8\">{:.3}</text>\n",
            x + BAR_WIDTH / 2.0,
            (y - 3.0).min(baseline - 3.0),
            value
        ));
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
