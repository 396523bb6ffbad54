//! Self-contained SVG scatter plots of planar image clouds.
//!
//! Fixed 800x800 canvas, data autoscaled with a 5% margin, axes labeled
//! `f1`/`f2`, one dot per sample. No external assets, so the files diff
//! cleanly in review.

use std::io::Write;

use crate::error::{Error, Result};
use crate::oracle::ImageCloud;

const CANVAS: f64 = 800.0;
const MARGIN_FRAC: f64 = 0.05;

/// Writes an SVG scatter of a planar cloud.
pub fn write_scatter_svg(cloud: &ImageCloud, out: &mut impl Write) -> Result<()> {
    if cloud.image_dim() != 2 {
        return Err(Error::Dimension(format!(
            "SVG scatter is planar only (m = 2), image has m = {}",
            cloud.image_dim()
        )));
    }
    if cloud.is_empty() {
        return Err(Error::Validation("empty cloud".into()));
    }
    let (lo, hi) = cloud.bbox();
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-300);
    let margin = MARGIN_FRAC * span;
    let x0 = (lo[0] + hi[0]) / 2.0 - span / 2.0 - margin;
    let y0 = (lo[1] + hi[1]) / 2.0 - span / 2.0 - margin;
    let scale = CANVAS / (span + 2.0 * margin);
    let px = |f1: f64| (f1 - x0) * scale;
    // SVG y axis points down
    let py = |f2: f64| CANVAS - (f2 - y0) * scale;

    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{c}" height="{c}" viewBox="0 0 {c} {c}">"#,
        c = CANVAS
    )?;
    writeln!(out, r#"<rect width="{c}" height="{c}" fill="white"/>"#, c = CANVAS)?;
    // axes through the data origin when visible, else along the frame
    let ax_y = if lo[1] <= 0.0 && hi[1] >= 0.0 { py(0.0) } else { CANVAS - 20.0 };
    let ax_x = if lo[0] <= 0.0 && hi[0] >= 0.0 { px(0.0) } else { 20.0 };
    writeln!(
        out,
        r##"<line x1="0" y1="{ax_y:.2}" x2="{c}" y2="{ax_y:.2}" stroke="#999" stroke-width="1"/>"##,
        c = CANVAS
    )?;
    writeln!(
        out,
        r##"<line x1="{ax_x:.2}" y1="0" x2="{ax_x:.2}" y2="{c}" stroke="#999" stroke-width="1"/>"##,
        c = CANVAS
    )?;
    writeln!(
        out,
        r##"<text x="{}" y="{:.2}" font-family="monospace" font-size="16" fill="#333">f1</text>"##,
        CANVAS - 30.0,
        ax_y - 8.0
    )?;
    writeln!(
        out,
        r##"<text x="{:.2}" y="20" font-family="monospace" font-size="16" fill="#333">f2</text>"##,
        ax_x + 8.0
    )?;
    for i in 0..cloud.len() {
        let f = cloud.fx(i);
        writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="1" fill="#1f77b4"/>"##,
            px(f[0]),
            py(f[1])
        )?;
    }
    writeln!(out, "</svg>")?;
    Ok(())
}

/// File-path convenience wrapper.
pub fn export_scatter_svg(cloud: &ImageCloud, path: &std::path::Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_scatter_svg(cloud, &mut f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{sample_image, SampleScheme};
    use crate::quadmap::{BallSpec, QuadraticMap};

    #[test]
    fn svg_is_self_contained_and_sized() {
        let map = QuadraticMap::parse_problem(
            r#"{"n":2,"m":2,"A":[[[0,1],[1,0]],[[0,1],[1,0]]],"a":[[-1,0],[0,1]]}"#,
        )
        .unwrap();
        let ball = BallSpec::centered(2, 0.3).unwrap();
        let cloud = sample_image(&map, &ball, SampleScheme::Random { count: 100, seed: 2 }).unwrap();
        let mut buf = Vec::new();
        write_scatter_svg(&cloud, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("<svg "));
        assert!(text.contains(r#"width="800""#));
        assert!(text.contains(">f1<") && text.contains(">f2<"));
        assert_eq!(text.matches("<circle").count(), 100);
        assert!(!text.contains("http://") || text.contains("xmlns"));
        assert!(text.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn svg_rejects_non_planar() {
        let map = QuadraticMap::parse_problem(r#"{"n":1,"m":1,"A":[[[1]]],"a":[[0]]}"#).unwrap();
        let ball = BallSpec::centered(1, 1.0).unwrap();
        let cloud = sample_image(&map, &ball, SampleScheme::Grid { resolution: 8 }).unwrap();
        let mut buf = Vec::new();
        assert!(write_scatter_svg(&cloud, &mut buf).is_err());
    }
}
