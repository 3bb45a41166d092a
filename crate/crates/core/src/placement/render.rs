//! Grayscale heat maps of placement fields. Darker means more probable.

use std::fmt::Write as _;
use std::path::Path;

use image::Rgb;

use super::PlacementField;
use crate::raster::{write_ppm, Raster};
use crate::scene::Scene;
use crate::{Error, Result};

const PIXELS_PER_CELL_TARGET: u32 = 400;
const OUTLINE: Rgb<u8> = Rgb([200, 30, 30]);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Ppm,
    Svg,
}

impl RenderFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("ppm") => Ok(Self::Ppm),
            Some("svg") => Ok(Self::Svg),
            _ => Err(Error::InvalidInput(format!(
                "unsupported render format for {}: use .ppm or .svg",
                path.display()
            ))),
        }
    }
}

fn shade(f: &PlacementField, idx: usize, pmax: f64) -> u8 {
    if !f.mask[idx] || pmax <= 0.0 {
        return 255;
    }
    255 - (f.probs[idx] / pmax * 200.0).round() as u8
}

fn scale(f: &PlacementField) -> u32 {
    (PIXELS_PER_CELL_TARGET / f.width_cells as u32).max(1)
}

fn pmax(f: &PlacementField) -> f64 {
    f.probs.iter().copied().fold(0.0, f64::max)
}

/// Raster image, row 0 at the top (behind edge of the table).
pub fn render_ppm(f: &PlacementField, scene: &Scene) -> Raster {
    let s = scale(f);
    let (w, h) = (f.width_cells as u32 * s, f.height_cells as u32 * s);
    let pm = pmax(f);
    let mut img = Raster::from_fn(w, h, |u, v| {
        let i = (u / s) as usize;
        let j = f.height_cells - 1 - (v / s) as usize;
        let g = shade(f, j * f.width_cells + i, pm);
        Rgb([g, g, g])
    });

    let ppm = w as f64 / f.workspace.width;
    let to_px = |x: f64, y: f64| {
        let u = ((x + 0.5 * f.workspace.width) * ppm).round() as i64;
        let v = ((0.5 * f.workspace.height - y) * ppm).round() as i64;
        (u.clamp(0, w as i64 - 1) as u32, v.clamp(0, h as i64 - 1) as u32)
    };
    for o in &scene.objects {
        let (u0, v0) = to_px(o.aabb.min.x, o.aabb.max.y);
        let (u1, v1) = to_px(o.aabb.max.x, o.aabb.min.y);
        for u in u0..=u1 {
            img.put_pixel(u, v0, OUTLINE);
            img.put_pixel(u, v1, OUTLINE);
        }
        for v in v0..=v1 {
            img.put_pixel(u0, v, OUTLINE);
            img.put_pixel(u1, v, OUTLINE);
        }
    }
    img
}

/// SVG document in meters scaled to pixels.
pub fn render_svg(f: &PlacementField, scene: &Scene) -> String {
    let s = scale(f) as f64;
    let (w, h) = (f.width_cells as f64 * s, f.height_cells as f64 * s);
    let pm = pmax(f);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="rgb(255,255,255)"/>"#);
    for idx in 0..f.len() {
        let g = shade(f, idx, pm);
        if g == 255 {
            continue;
        }
        let i = (idx % f.width_cells) as f64;
        let j = (f.height_cells - 1 - idx / f.width_cells) as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{s}" height="{s}" fill="rgb({g},{g},{g})"/>"#,
            i * s,
            j * s
        );
    }
    let ppm = w / f.workspace.width;
    for o in &scene.objects {
        let x = (o.aabb.min.x + 0.5 * f.workspace.width) * ppm;
        let y = (0.5 * f.workspace.height - o.aabb.max.y) * ppm;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="rgb(200,30,30)"><title>{}</title></rect>"#,
            o.aabb.width() * ppm,
            o.aabb.height() * ppm,
            o.name
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Writes a field image, format chosen by extension.
pub fn render_field(f: &PlacementField, scene: &Scene, path: &Path) -> Result<()> {
    match RenderFormat::from_path(path)? {
        RenderFormat::Ppm => write_ppm(&render_ppm(f, scene), path),
        RenderFormat::Svg => {
            std::fs::write(path, render_svg(f, scene)).map_err(|e| Error::io(path, e))
        }
    }
}
