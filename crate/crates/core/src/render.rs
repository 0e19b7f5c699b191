//! Deterministic SVG heatmaps of grid fields.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::RenderError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Palette {
    Viridis,
    Grayscale,
}

/// Number of colour levels in the ramp.
pub const LEVELS: usize = 256;
const CELL_PX: usize = 10;
const MARGIN_PX: usize = 20;
const FOOTER_PX: usize = 30;

const VIRIDIS: [[u8; 3]; 10] = [
    [0x44, 0x01, 0x54],
    [0x48, 0x28, 0x78],
    [0x3e, 0x49, 0x89],
    [0x31, 0x68, 0x8e],
    [0x26, 0x82, 0x8e],
    [0x1f, 0x9e, 0x89],
    [0x35, 0xb7, 0x79],
    [0x6e, 0xce, 0x58],
    [0xb5, 0xde, 0x2b],
    [0xfd, 0xe7, 0x25],
];

impl Palette {
    /// Colour of ramp level `level` in `0..LEVELS`.
    pub fn color(&self, level: u8) -> [u8; 3] {
        let s = level as f64 / (LEVELS - 1) as f64;
        match self {
            Palette::Grayscale => [level; 3],
            Palette::Viridis => {
                let x = s * (VIRIDIS.len() - 1) as f64;
                let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
                let f = x - i as f64;
                let mut out = [0u8; 3];
                for c in 0..3 {
                    let v = VIRIDIS[i][c] as f64 * (1.0 - f) + VIRIDIS[i + 1][c] as f64 * f;
                    out[c] = v.round() as u8;
                }
                out
            }
        }
    }

    pub fn hex(&self, level: u8) -> String {
        let [r, g, b] = self.color(level);
        format!("#{r:02x}{g:02x}{b:02x}")
    }
}

/// Ramp level of every value: `0` at the minimum, `LEVELS - 1` at the maximum,
/// all `0` for a constant field.
pub fn quantize(values: &[f64]) -> Result<Vec<u8>, RenderError> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(RenderError::NonFinite(i));
    }
    let (lo, hi) = min_max(values);
    let span = hi - lo;
    Ok(values
        .iter()
        .map(|v| {
            if span > 0.0 {
                (((v - lo) / span) * (LEVELS - 1) as f64).round() as u8
            } else {
                0
            }
        })
        .collect())
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
}

/// SVG heatmap of a `points x points` field stored row by row from `x2 = 0`;
/// the `x2 = 0` row is drawn at the bottom.
pub fn render_heatmap(values: &[f64], points: usize, palette: Palette, title: &str) -> Result<String, RenderError> {
    if values.len() != points * points || points == 0 {
        return Err(RenderError::Shape { got: values.len(), expected: points * points });
    }
    let levels = quantize(values)?;
    let (lo, hi) = min_max(values);
    let side = points * CELL_PX;
    let width = side + 2 * MARGIN_PX;
    let height = side + 2 * MARGIN_PX + FOOTER_PX;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
    for j in 0..points {
        let y = MARGIN_PX + (points - 1 - j) * CELL_PX;
        for i in 0..points {
            let x = MARGIN_PX + i * CELL_PX;
            let fill = palette.hex(levels[j * points + i]);
            let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{CELL_PX}" height="{CELL_PX}" fill="{fill}"/>"#);
        }
    }
    s.push_str("</g>\n");
    let text_y = MARGIN_PX + side + 20;
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN_PX}" y="{text_y}" font-family="monospace" font-size="12">{} min={lo:e} max={hi:e}</text>"#,
        escape(title)
    );
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_heatmap(
    path: &Path,
    values: &[f64],
    points: usize,
    palette: Palette,
    title: &str,
) -> Result<(), RenderError> {
    let svg = render_heatmap(values, points, palette, title)?;
    fs::write(path, svg).map_err(|source| RenderError::Io { path: path.to_path_buf(), source })
}
