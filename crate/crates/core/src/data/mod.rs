//! Dataset container, loaders, synthetic generators and image output.

pub mod csv;
pub mod dataset;
pub mod idx;
pub mod pgm;
pub mod synth;

pub use self::csv::{load_csv, parse_csv, save_csv, to_csv};
pub use dataset::Dataset;
pub use idx::{load_idx, save_idx};
pub use pgm::{encode_grid, save_grid};
pub use synth::{make_blob_images, make_blobs, make_digit_images, make_two_moons};

use crate::{Error, Result, Scalar};

pub(crate) fn square_side(d: usize) -> Result<usize> {
    let side = (d as f64).sqrt().round() as usize;
    if side * side != d {
        return Err(Error::invalid(format!(
            "dimension {d} is not a square image"
        )));
    }
    Ok(side)
}

pub(crate) fn to_byte<T: Scalar>(v: T) -> u8 {
    let v = v.to_f64_lossy();
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 255.0) as u8
    }
}
