//! Binary PGM (P5) sample grids.

use std::path::Path;

use crate::{Error, Result, Scalar};

/// Tile square `side x side` samples into a `rows x cols` grayscale image.
/// Values are rounded and clamped to `[0, 255]`.
pub fn encode_grid<T: Scalar>(samples: &[Vec<T>], rows: usize, cols: usize) -> Result<Vec<u8>> {
    if rows * cols != samples.len() || samples.is_empty() {
        return Err(Error::invalid(format!(
            "grid {rows}x{cols} needs {} samples, got {}",
            rows * cols,
            samples.len()
        )));
    }
    let d = samples[0].len();
    let side = super::square_side(d)?;
    for s in samples {
        crate::error::check_dim("grid sample", d, s.len())?;
    }
    let (w, h) = (cols * side, rows * side);
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    let header = out.len();
    out.resize(header + w * h, 0);
    for (k, s) in samples.iter().enumerate() {
        let (gr, gc) = (k / cols, k % cols);
        for r in 0..side {
            for c in 0..side {
                let y = gr * side + r;
                let x = gc * side + c;
                out[header + y * w + x] = super::to_byte(s[r * side + c]);
            }
        }
    }
    Ok(out)
}

pub fn save_grid<T: Scalar>(
    samples: &[Vec<T>],
    rows: usize,
    cols: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_grid(samples, rows, cols)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
