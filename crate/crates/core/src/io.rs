//! Grayscale PNG and small file helpers.

use std::fs;
use std::path::Path;

use image::{ImageBuffer, Luma};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// 8-bit grayscale raster, row-major, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer size");
        GrayImage {
            width,
            height,
            pixels,
        }
    }

    pub fn at(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}

pub fn write_png8(path: &Path, img: &GrayImage) -> Result<()> {
    ensure_parent(path)?;
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width as u32, img.height as u32, img.pixels.clone())
            .expect("buffer size");
    buf.save(path).map_err(|e| Error::Image {
        path: path.into(),
        source: e,
    })
}

pub fn write_png16(path: &Path, width: usize, height: usize, values: &[u16]) -> Result<()> {
    ensure_parent(path)?;
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width as u32, height as u32, values.to_vec()).expect("buffer size");
    buf.save(path).map_err(|e| Error::Image {
        path: path.into(),
        source: e,
    })
}

/// Reads any PNG and converts it to 8-bit grayscale.
pub fn read_png8(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.into(),
        source: e,
    })?;
    let g = img.to_luma8();
    Ok(GrayImage {
        width: g.width() as usize,
        height: g.height() as usize,
        pixels: g.into_raw(),
    })
}

pub fn read_png16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.into(),
        source: e,
    })?;
    let g = img.to_luma16();
    Ok((g.width() as usize, g.height() as usize, g.into_raw()))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p8 = dir.path().join("a/b.png");
        let img = GrayImage::new(3, 2, vec![0, 10, 255, 7, 8, 9]);
        write_png8(&p8, &img).unwrap();
        assert_eq!(read_png8(&p8).unwrap(), img);
        let p16 = dir.path().join("c.png");
        write_png16(&p16, 2, 2, &[0, 1, 65535, 300]).unwrap();
        assert_eq!(read_png16(&p16).unwrap(), (2, 2, vec![0, 1, 65535, 300]));
    }
}
