//! 8-bit RGB rasters: PPM I/O and pixel-exact cropping.

use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, RgbImage};

use crate::{Error, Result};

pub type Raster = RgbImage;

/// Pixel rectangle `[u0, u1) x [v0, v1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub u0: u32,
    pub v0: u32,
    pub u1: u32,
    pub v1: u32,
}

impl PixelRect {
    pub fn new(u0: u32, v0: u32, u1: u32, v1: u32) -> Self {
        Self { u0, v0, u1, v1 }
    }

    pub fn width(&self) -> u32 {
        self.u1.saturating_sub(self.u0)
    }

    pub fn height(&self) -> u32 {
        self.v1.saturating_sub(self.v0)
    }
}

impl From<[u32; 4]> for PixelRect {
    fn from([u0, v0, u1, v1]: [u32; 4]) -> Self {
        Self::new(u0, v0, u1, v1)
    }
}

impl From<PixelRect> for [u32; 4] {
    fn from(r: PixelRect) -> Self {
        [r.u0, r.v0, r.u1, r.v1]
    }
}

/// Copies exactly the pixels inside `rect`; no resampling.
pub fn crop_raster(img: &Raster, rect: PixelRect) -> Result<Raster> {
    let (w, h) = img.dimensions();
    if rect.u0 > rect.u1 || rect.v0 > rect.v1 || rect.u1 > w || rect.v1 > h {
        return Err(Error::CropOutOfBounds {
            bbox: rect.into(),
            width: w,
            height: h,
        });
    }
    Ok(image::imageops::crop_imm(img, rect.u0, rect.v0, rect.width(), rect.height()).to_image())
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    Ok(img.to_rgb8())
}

/// Binary (P6) encoding.
pub fn encode_ppm(img: &Raster) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.as_raw().len() + 32);
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
        .write_image(img.as_raw(), img.width(), img.height(), ExtendedColorType::Rgb8)
        .expect("in-memory PPM encoding cannot fail");
    out
}

pub fn write_ppm(img: &Raster, path: impl AsRef<Path>) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_ppm(img)).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
