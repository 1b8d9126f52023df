//! CSV and heatmap output for time-frequency matrices.

use std::path::Path;

use image::{ImageBuffer, Rgb};

use crate::error::Result;

/// Writes rows of numbers as a headerless CSV matrix.
pub fn write_matrix_csv(path: impl AsRef<Path>, rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headerless numeric CSV matrix.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| crate::Error::format(path, format!("bad number {f:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn colormap(v: f64) -> Rgb<u8> {
    // dark blue -> teal -> yellow
    let v = v.clamp(0.0, 1.0);
    let stops = [(0.0, [20.0, 20.0, 80.0]), (0.5, [30.0, 150.0, 140.0]), (1.0, [250.0, 230.0, 40.0])];
    let (lo, hi) = if v < 0.5 { (stops[0], stops[1]) } else { (stops[1], stops[2]) };
    let f = (v - lo.0) / (hi.0 - lo.0);
    let c = |i: usize| (lo.1[i] + f * (hi.1[i] - lo.1[i])).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Renders `rows` (row 0 at the bottom) as a PNG heatmap, each cell
/// `scale × scale` pixels, colour normalized to the matrix range.
pub fn write_heatmap_png(path: impl AsRef<Path>, rows: &[Vec<f64>], scale: u32) -> Result<()> {
    let h = rows.len() as u32;
    let w = rows.first().map_or(0, Vec::len) as u32;
    let scale = scale.max(1);
    let (min, max) = rows
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if max > min { max - min } else { 1.0 };
    let img = ImageBuffer::from_fn((w * scale).max(1), (h * scale).max(1), |x, y| {
        if w == 0 || h == 0 {
            return colormap(0.0);
        }
        let row = (h - 1 - y / scale) as usize;
        let col = (x / scale) as usize;
        colormap((rows[row][col] - min) / span)
    });
    img.save(path.as_ref())?;
    Ok(())
}

/// SVG heatmap with the same layout as [`write_heatmap_png`].
pub fn heatmap_svg(rows: &[Vec<f64>], cell: f64) -> String {
    let h = rows.len();
    let w = rows.first().map_or(0, Vec::len);
    let (min, max) = rows
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if max > min { max - min } else { 1.0 };
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" shape-rendering=\"crispEdges\">\n",
        w as f64 * cell,
        h as f64 * cell
    );
    for (r, row) in rows.iter().enumerate() {
        let y = (h - 1 - r) as f64 * cell;
        for (c, &v) in row.iter().enumerate() {
            let Rgb([red, green, blue]) = colormap((v - min) / span);
            out.push_str(&format!(
                "<rect x=\"{}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({red},{green},{blue})\"/>\n",
                c as f64 * cell
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}
