//! Grayscale rendering of scalar fields as binary PGM.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::grid::{ScalarField, VectorField};
use crate::ops::divergence;
use crate::scalar::Real;

/// Gray level used for every pixel of a constant field.
pub const FLAT_GRAY: u8 = 128;

/// Value range written next to each image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageRange {
    pub min: f64,
    pub max: f64,
}

/// Maps `[min, max]` linearly onto `0..=255`.
///
/// Pixel rows run from the top of the domain (`j = n - 1`) to the bottom, and
/// columns follow `i`, so the picture has `x` to the right and `y` up.
pub fn render_pgm<T: Real>(field: &ScalarField<T>) -> (Vec<u8>, ImageRange) {
    let n = field.spec().n();
    let (lo, hi) = field.min_max();
    let (lo, hi) = (lo.as_f64(), hi.as_f64());
    let span = hi - lo;
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    out.reserve(n * n);
    for j in (0..n).rev() {
        for i in 0..n {
            let level = if span > 0.0 {
                let s = (field.get(i, j).as_f64() - lo) / span;
                (s * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                FLAT_GRAY
            };
            out.push(level);
        }
    }
    (out, ImageRange { min: lo, max: hi })
}

/// Path of the JSON file holding the range of `image`.
pub fn sidecar_path(image: &Path) -> PathBuf {
    image.with_extension("json")
}

pub fn write_scalar_image<T: Real>(field: &ScalarField<T>, path: &Path) -> io::Result<ImageRange> {
    let (bytes, range) = render_pgm(field);
    fs::write(path, bytes)?;
    let json = serde_json::to_string_pretty(&range).map_err(io::Error::from)?;
    fs::write(sidecar_path(path), json + "\n")?;
    Ok(range)
}

/// Renders the discrete divergence of `v`.
pub fn write_divergence_image<T: Real>(v: &VectorField<T>, path: &Path) -> io::Result<ImageRange> {
    write_scalar_image(&divergence(v), path)
}
