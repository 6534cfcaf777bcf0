//! 8-bit RGB rasters.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, RgbImage};
use sha2::{Digest, Sha256};

use crate::error::RasterError;
use crate::geometry::BBox;

pub type Rgb = [u8; 3];

pub const WHITE: Rgb = [255, 255, 255];

/// Row-major RGB pixel buffer.
#[derive(Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for Raster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Raster").field("width", &self.width).field("height", &self.height).finish()
    }
}

impl Raster {
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::Empty);
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(RasterError::BufferSize { got: pixels.len(), expected });
        }
        Ok(Self { width, height, pixels })
    }

    /// A raster filled with one color.
    ///
    /// # Panics
    /// If either dimension is zero.
    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        assert!(width > 0 && height > 0, "raster must be non-empty");
        let pixels = color.repeat(width as usize * height as usize);
        Self { width, height, pixels }
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
    pub fn bounds(&self) -> BBox {
        BBox::canvas(self.width, self.height).expect("raster is non-empty")
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, color: Rgb) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&color);
    }

    /// Paints `bbox`, clipped to the raster.
    pub fn fill_rect(&mut self, bbox: &BBox, color: Rgb) {
        let Some(clip) = bbox.intersection(&self.bounds()) else { return };
        for y in clip.y()..clip.bottom() {
            for x in clip.x()..clip.right() {
                self.set_pixel(x, y, color);
            }
        }
    }

    /// Exact pixel copy of `bbox`.
    pub fn crop(&self, bbox: &BBox) -> Result<Raster, RasterError> {
        if !bbox.fits_canvas(self.width, self.height) {
            return Err(RasterError::OutOfBounds { bbox: *bbox, width: self.width, height: self.height });
        }
        let row = self.width as usize * 3;
        let mut pixels = Vec::with_capacity(bbox.area() as usize * 3);
        for y in bbox.y()..bbox.bottom() {
            let start = y as usize * row + bbox.x() as usize * 3;
            pixels.extend_from_slice(&self.pixels[start..start + bbox.w() as usize * 3]);
        }
        Ok(Raster { width: bbox.w(), height: bbox.h(), pixels })
    }

    /// Decodes PNG or JPEG bytes. Alpha is composited over white.
    pub fn decode(bytes: &[u8]) -> Result<Self, RasterError> {
        let img = image::load_from_memory(bytes)?;
        Ok(Self::from_dynamic(img))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| RasterError::Io { path: path.to_path_buf(), source })?;
        Self::decode(&bytes)
    }

    fn from_dynamic(img: DynamicImage) -> Self {
        let rgba = img.to_rgba8();
        let (width, height) = rgba.dimensions();
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for px in rgba.pixels() {
            let a = u32::from(px[3]);
            for c in 0..3 {
                let v = (u32::from(px[c]) * a + 255 * (255 - a) + 127) / 255;
                pixels.push(v as u8);
            }
        }
        Raster { width, height, pixels }
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.pixels.clone()).expect("buffer size checked at construction")
    }

    pub fn from_rgb_image(img: RgbImage) -> Self {
        let (width, height) = img.dimensions();
        Raster { width, height, pixels: img.into_raw() }
    }

    pub fn to_png_bytes(&self) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        self.to_rgb_image()
            .write_to(&mut out, ImageFormat::Png)
            .expect("in-memory PNG encoding does not fail");
        out.into_inner()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_png_bytes()).map_err(|source| RasterError::Io { path: path.to_path_buf(), source })
    }

    /// Bilinear resize.
    pub fn resize(&self, width: u32, height: u32) -> Raster {
        if (width, height) == self.dims() {
            return self.clone();
        }
        let img = image::imageops::resize(&self.to_rgb_image(), width, height, image::imageops::FilterType::Triangle);
        Raster::from_rgb_image(img)
    }

    /// SHA-256 over dimensions and pixels, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.width.to_le_bytes());
        h.update(self.height.to_le_bytes());
        h.update(&self.pixels);
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> Raster {
        let mut r = Raster::filled(w, h, WHITE);
        for y in 0..h {
            for x in 0..w {
                r.set_pixel(x, y, [(x * 7 % 256) as u8, (y * 11 % 256) as u8, ((x + y) % 256) as u8]);
            }
        }
        r
    }

    #[test]
    fn identity_crop() {
        let r = gradient(17, 9);
        assert_eq!(r.crop(&r.bounds()).unwrap(), r);
    }

    #[test]
    fn single_pixel_crop() {
        let r = gradient(17, 9);
        let c = r.crop(&BBox::new(0, 0, 1, 1).unwrap()).unwrap();
        assert_eq!(c.dims(), (1, 1));
        assert_eq!(c.pixel(0, 0), r.pixel(0, 0));
    }

    #[test]
    fn crop_composes() {
        let r = gradient(40, 30);
        let a = BBox::new(5, 3, 20, 20).unwrap();
        let b = BBox::new(2, 4, 10, 7).unwrap();
        let nested = r.crop(&a).unwrap().crop(&b).unwrap();
        assert_eq!(nested, r.crop(&b.offset_by(&a)).unwrap());
    }

    #[test]
    fn crop_out_of_bounds() {
        let r = gradient(10, 10);
        assert!(matches!(r.crop(&BBox::new(5, 5, 6, 2).unwrap()), Err(RasterError::OutOfBounds { .. })));
    }

    #[test]
    fn png_roundtrip_and_alpha_over_white() {
        let r = gradient(8, 5);
        assert_eq!(Raster::decode(&r.to_png_bytes()).unwrap(), r);

        let mut rgba = image::RgbaImage::new(2, 1);
        rgba.put_pixel(0, 0, image::Rgba([0, 0, 0, 0]));
        rgba.put_pixel(1, 0, image::Rgba([0, 0, 0, 255]));
        let mut buf = Cursor::new(Vec::new());
        rgba.write_to(&mut buf, ImageFormat::Png).unwrap();
        let loaded = Raster::decode(buf.get_ref()).unwrap();
        assert_eq!(loaded.pixel(0, 0), WHITE);
        assert_eq!(loaded.pixel(1, 0), [0, 0, 0]);
    }

    #[test]
    fn buffer_length_checked() {
        assert!(Raster::from_pixels(2, 2, vec![0; 11]).is_err());
        assert!(Raster::from_pixels(0, 2, vec![]).is_err());
    }
}
