use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{AnalysisError, PointTag, Projection2D};
use crate::corpus::{Label, Source};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 540.0;
const MARGIN: f64 = 40.0;
const LEGEND_WIDTH: f64 = 230.0;

/// Plot group: original documents split by label, augmented documents by
/// method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScatterGroup {
    OriginalNegative,
    OriginalPositive,
    Augmented(Source, Label),
}

impl ScatterGroup {
    pub fn of(tag: PointTag) -> Self {
        match (tag.source, tag.label) {
            (Source::Original, Label::Negative) => ScatterGroup::OriginalNegative,
            (Source::Original, Label::Positive) => ScatterGroup::OriginalPositive,
            (s, l) => ScatterGroup::Augmented(s, l),
        }
    }

    pub fn legend(self) -> String {
        match self {
            ScatterGroup::OriginalNegative => "Original non-gender-based HS".into(),
            ScatterGroup::OriginalPositive => "Original gender-based HS".into(),
            ScatterGroup::Augmented(s, Label::Positive) => s.display_name().into(),
            ScatterGroup::Augmented(s, Label::Negative) => format!("{} (non-gender-based HS)", s.display_name()),
        }
    }
}

/// Original positives red, original negatives green, augmented blue.
pub fn group_color(g: ScatterGroup) -> &'static str {
    match g {
        ScatterGroup::OriginalPositive => "#d62728",
        ScatterGroup::OriginalNegative => "#2ca02c",
        ScatterGroup::Augmented(_, Label::Positive) => "#1f77b4",
        ScatterGroup::Augmented(_, Label::Negative) => "#6baed6",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes a self-contained SVG scatter to `path` and the coordinates as CSV
/// next to it (same stem, `.csv`). Returns the CSV path.
pub fn emit_scatter(proj: &Projection2D, path: &Path, title: &str) -> Result<std::path::PathBuf, AnalysisError> {
    let n = proj.n();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for c in &proj.coords {
        x0 = x0.min(c[0]);
        x1 = x1.max(c[0]);
        y0 = y0.min(c[1]);
        y1 = y1.max(c[1]);
    }
    let span = |a: f64, b: f64| if b > a { b - a } else { 1.0 };
    let plot_w = WIDTH - LEGEND_WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - x0) / span(x0, x1) * plot_w;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / span(y0, y1) * plot_h;

    let mut groups: Vec<ScatterGroup> = proj.tags.iter().map(|t| ScatterGroup::of(*t)).collect();
    let point_groups = groups.clone();
    groups.sort();
    groups.dedup();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        MARGIN + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##
    );
    // Draw groups in legend order so augmented points sit on top.
    for g in &groups {
        let _ = writeln!(svg, r#"<g fill="{}" fill-opacity="0.7">"#, group_color(*g));
        for (c, pg) in proj.coords.iter().zip(&point_groups) {
            if pg == g {
                let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#, sx(c[0]), sy(c[1]));
            }
        }
        svg.push_str("</g>\n");
    }
    let lx = WIDTH - LEGEND_WIDTH;
    let _ = writeln!(svg, r#"<g class="legend" font-family="sans-serif" font-size="12">"#);
    for (i, g) in groups.iter().enumerate() {
        let y = MARGIN + 10.0 + 22.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{lx}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{}" y="{:.1}">{}</text>"#,
            y - 10.0,
            group_color(*g),
            lx + 18.0,
            y,
            escape(&g.legend())
        );
    }
    svg.push_str("</g>\n</svg>\n");
    fs::write(path, svg)?;

    let csv_path = path.with_extension("csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(std::io::Error::from)?;
    w.write_record(["id", "x", "y", "source", "label"])
        .map_err(std::io::Error::from)?;
    for i in 0..n {
        w.write_record([
            proj.ids[i].as_str(),
            &format!("{}", proj.coords[i][0]),
            &format!("{}", proj.coords[i][1]),
            proj.tags[i].source.slug(),
            proj.tags[i].label.code(),
        ])
        .map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(csv_path)
}
