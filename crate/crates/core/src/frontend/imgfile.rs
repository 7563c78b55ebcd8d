//! Binary feature-image files.
//!
//! Layout: `"MFCC"`, version (u16), width (u16), height (u16), 6 reserved
//! zero bytes, then `width × height` little-endian f32 pixels. A composite
//! is stored as the concatenation of its members; its header carries the
//! tiled size (Σ widths × common height), or `(total, 1)` when member
//! heights differ.

use std::fs;
use std::path::Path;

use super::image::CompositeImage;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MFCC";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

pub fn header_dims(image: &CompositeImage) -> (usize, usize) {
    let h = image.layout.first().map(|l| l.1).unwrap_or(0);
    if image.layout.iter().all(|l| l.1 == h) {
        (image.layout.iter().map(|l| l.0).sum(), h)
    } else {
        (image.len(), 1)
    }
}

pub fn encode(pixels: &[f64], width: usize, height: usize) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(Error::param("pixel count does not match header dimensions"));
    }
    let dim = |v: usize| u16::try_from(v).map_err(|_| Error::param(format!("dimension {v} exceeds u16")));
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * pixels.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dim(width)?.to_le_bytes());
    out.extend_from_slice(&dim(height)?.to_le_bytes());
    out.extend_from_slice(&[0u8; 6]);
    for &p in pixels {
        out.extend_from_slice(&(p as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(Vec<f64>, usize, usize)> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::format("not an MFCC image file (bad magic)"));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let version = u16_at(4);
    if version != VERSION {
        return Err(Error::format(format!("unsupported image version {version}")));
    }
    let (width, height) = (u16_at(6) as usize, u16_at(8) as usize);
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * width * height {
        return Err(Error::format(format!(
            "image body has {} bytes, header implies {}",
            body.len(),
            4 * width * height
        )));
    }
    let pixels = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok((pixels, width, height))
}

pub fn write_composite(path: &Path, image: &CompositeImage) -> Result<()> {
    let (w, h) = header_dims(image);
    fs::write(path, encode(&image.pixels, w, h)?).map_err(|e| Error::io(path, e))
}

/// Reads an image file and re-attaches the member layout from the manifest.
pub fn read_composite(path: &Path, layout: &[(usize, usize)]) -> Result<CompositeImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (pixels, _, _) = decode(&bytes)?;
    let expected: usize = layout.iter().map(|(w, h)| w * h).sum();
    if pixels.len() != expected {
        return Err(Error::format(format!(
            "{}: {} pixels, layout expects {expected}",
            path.display(),
            pixels.len()
        )));
    }
    Ok(CompositeImage {
        pixels,
        layout: layout.to_vec(),
    })
}
