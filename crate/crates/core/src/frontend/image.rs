use crate::error::{Error, Result};

/// Feature image: rows are DCT coefficients, columns are time frames,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccImage {
    pub pixels: Vec<f64>,
    pub width: usize,
    pub height: usize,
    pub normalized: bool,
}

impl MfccImage {
    pub fn new(pixels: Vec<f64>, width: usize, height: usize) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel count must equal width × height");
        Self {
            pixels,
            width,
            height,
            normalized: false,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.pixels[row * self.width..(row + 1) * self.width]
    }
}

/// Zero-mean, unit-variance per row (population statistics); zero-variance
/// rows become all zeros.
pub fn standardize_rows(img: &MfccImage) -> MfccImage {
    let mut out = img.clone();
    if img.width == 0 {
        return out;
    }
    for r in 0..img.height {
        let row = &mut out.pixels[r * img.width..(r + 1) * img.width];
        let n = row.len() as f64;
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        // Relative guard: rows that are constant up to rounding count as flat.
        if std <= 1e-12 * mean.abs().max(1.0) {
            row.iter_mut().for_each(|x| *x = 0.0);
        } else {
            row.iter_mut().for_each(|x| *x = (*x - mean) / std);
        }
    }
    out
}

/// Affine map of the whole image onto [0, 1]; a flat image maps to 0.5.
pub fn min_max_unit(img: &MfccImage) -> MfccImage {
    let lo = img.pixels.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = img.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = img.clone();
    if !(hi > lo) {
        out.pixels.iter_mut().for_each(|x| *x = 0.5);
    } else {
        let span = hi - lo;
        out.pixels
            .iter_mut()
            .for_each(|x| *x = ((*x - lo) / span).clamp(0.0, 1.0));
    }
    out
}

/// Row standardization followed by per-image [0, 1] scaling.
pub fn normalize(img: &MfccImage) -> MfccImage {
    let mut out = min_max_unit(&standardize_rows(img));
    out.normalized = true;
    out
}

/// Several images laid side by side, stored as the concatenation of their
/// row-major pixel buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeImage {
    pub pixels: Vec<f64>,
    pub layout: Vec<(usize, usize)>,
}

impl CompositeImage {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Side-by-side grid (width = Σ member widths) when all members share a
    /// height; returns (pixels row-major, width, height).
    pub fn to_grid(&self) -> Result<(Vec<f64>, usize, usize)> {
        let height = self.layout.first().map(|l| l.1).unwrap_or(0);
        if self.layout.iter().any(|&(_, h)| h != height) {
            return Err(Error::param("members of different heights cannot be tiled"));
        }
        let width: usize = self.layout.iter().map(|l| l.0).sum();
        let mut grid = vec![0.0; width * height];
        let (mut offset, mut col0) = (0, 0);
        for &(w, h) in &self.layout {
            for r in 0..h {
                grid[r * width + col0..r * width + col0 + w]
                    .copy_from_slice(&self.pixels[offset + r * w..offset + (r + 1) * w]);
            }
            offset += w * h;
            col0 += w;
        }
        Ok((grid, width, height))
    }

    /// Layout string such as `16x16+8x16`.
    pub fn layout_string(&self) -> String {
        format_layout(&self.layout)
    }
}

pub fn format_layout(layout: &[(usize, usize)]) -> String {
    layout
        .iter()
        .map(|(w, h)| format!("{w}x{h}"))
        .collect::<Vec<_>>()
        .join("+")
}

pub fn parse_layout(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split('+')
        .map(|part| {
            let (w, h) = part
                .trim()
                .split_once('x')
                .ok_or_else(|| Error::format(format!("bad image size '{part}'")))?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::format(format!("bad image size '{part}'")))
            };
            Ok((parse(w)?, parse(h)?))
        })
        .collect()
}

pub fn compose(images: &[MfccImage]) -> Result<CompositeImage> {
    if images.is_empty() {
        return Err(Error::param("cannot compose an empty image list"));
    }
    Ok(CompositeImage {
        pixels: images.iter().flat_map(|i| i.pixels.iter().copied()).collect(),
        layout: images.iter().map(|i| (i.width, i.height)).collect(),
    })
}
