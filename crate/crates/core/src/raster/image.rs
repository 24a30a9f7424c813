use std::fmt;
use std::io::Cursor;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImageError {
    #[error("invalid image: {0}")]
    Invalid(String),
}

/// 8-bit RGB triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb([r, g, b])
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, g, b] = self.0;
        write!(f, "#{r:02x}{g:02x}{b:02x}")
    }
}

/// Row-major RGB8 raster.
#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("hash", &&self.content_hash()[..12])
            .finish()
    }
}

impl Image {
    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&color.0);
        }
        Image { width, height, pixels }
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Invalid("zero-sized image".into()));
        }
        if pixels.len() != width as usize * height as usize * 3 {
            return Err(ImageError::Invalid(format!(
                "buffer holds {} bytes, expected {}",
                pixels.len(),
                width as usize * height as usize * 3
            )));
        }
        Ok(Image { width, height, pixels })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let i = self.offset(x, y);
        Rgb([self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]])
    }

    pub fn set(&mut self, x: u32, y: u32, c: Rgb) {
        let i = self.offset(x, y);
        self.pixels[i..i + 3].copy_from_slice(&c.0);
    }

    /// Decodes PNG (or JPEG) bytes into RGB8, dropping any alpha channel.
    pub fn decode(bytes: &[u8]) -> Result<Self, ImageError> {
        let img = image::load_from_memory(bytes).map_err(|e| ImageError::Invalid(e.to_string()))?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        Image::from_raw(w, h, rgb.into_raw())
    }

    /// 8-bit RGB PNG, no alpha. Deterministic for equal pixels.
    pub fn encode_png(&self) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        PngEncoder::new(&mut out)
            .write_image(&self.pixels, self.width, self.height, ExtendedColorType::Rgb8)
            .expect("encoding an in-memory RGB8 buffer cannot fail");
        out.into_inner()
    }

    /// SHA-256 over dimensions and pixels, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.width.to_le_bytes());
        h.update(self.height.to_le_bytes());
        h.update(&self.pixels);
        hex::encode(h.finalize())
    }
}
