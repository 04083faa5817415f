//! IDX container (MNIST distribution format): big-endian header, unsigned-byte
//! payload. Gzip-compressed files are detected by their magic and inflated.

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::Dataset;
use crate::{Error, Result, Scalar};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn format_err(name: &str, offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        source_name: name.to_string(),
        offset: offset as u64,
        message: message.into(),
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| format_err(&path.display().to_string(), 0, format!("gzip: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, name: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| format_err(name, bytes.len(), "truncated header"))
}

/// Parse an image file: returns `(rows, cols, pixels)` with one row-major
/// vector of raw 0..=255 values per image.
pub fn parse_images(bytes: &[u8], name: &str) -> Result<(usize, usize, Vec<Vec<u8>>)> {
    let magic = be_u32(bytes, 0, name)?;
    if magic != IMAGES_MAGIC {
        return Err(format_err(
            name,
            0,
            format!("bad magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x} (u8 images, 3 dims)"),
        ));
    }
    let n = be_u32(bytes, 4, name)? as usize;
    let rows = be_u32(bytes, 8, name)? as usize;
    let cols = be_u32(bytes, 12, name)? as usize;
    if rows == 0 || cols == 0 {
        return Err(format_err(name, 8, "image dimensions must be positive"));
    }
    let d = rows * cols;
    let payload = &bytes[16..];
    let need = n * d;
    if payload.len() < need {
        return Err(format_err(
            name,
            bytes.len(),
            format!("truncated payload: {} of {need} pixel bytes", payload.len()),
        ));
    }
    if payload.len() > need {
        return Err(format_err(name, 16 + need, "trailing bytes after payload"));
    }
    Ok((
        rows,
        cols,
        payload.chunks_exact(d).map(<[u8]>::to_vec).collect(),
    ))
}

pub fn parse_labels(bytes: &[u8], name: &str) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, name)?;
    if magic != LABELS_MAGIC {
        return Err(format_err(
            name,
            0,
            format!("bad magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x} (u8 labels, 1 dim)"),
        ));
    }
    let n = be_u32(bytes, 4, name)? as usize;
    let payload = &bytes[8..];
    if payload.len() < n {
        return Err(format_err(
            name,
            bytes.len(),
            format!("truncated payload: {} of {n} label bytes", payload.len()),
        ));
    }
    if payload.len() > n {
        return Err(format_err(name, 8 + n, "trailing bytes after payload"));
    }
    Ok(payload.to_vec())
}

/// Load IDX images (raw 0..=255 values) with optional IDX labels.
pub fn load_idx<T: Scalar>(images: impl AsRef<Path>, labels: Option<&Path>) -> Result<Dataset<T>> {
    let images = images.as_ref();
    let name = images.display().to_string();
    let (rows, cols, pix) = parse_images(&read_maybe_gz(images)?, &name)?;
    let labels = match labels {
        Some(lp) => {
            let lname = lp.display().to_string();
            let l = parse_labels(&read_maybe_gz(lp)?, &lname)?;
            if l.len() != pix.len() {
                return Err(format_err(
                    &lname,
                    4,
                    format!("{} labels for {} images", l.len(), pix.len()),
                ));
            }
            Some(l.into_iter().map(i64::from).collect())
        }
        None => None,
    };
    let points = pix
        .into_iter()
        .map(|p| p.into_iter().map(|b| T::of(f64::from(b))).collect())
        .collect();
    Dataset::new(points, labels, format!("idx:{name} ({rows}x{cols})"))
}

pub fn encode_images(rows: usize, cols: usize, images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGES_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        out.extend_from_slice(img);
    }
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Write a square-image dataset as IDX (values rounded and clamped to bytes),
/// plus a label file when `labels_path` is given.
pub fn save_idx<T: Scalar>(
    data: &Dataset<T>,
    images_path: &Path,
    labels_path: Option<&Path>,
) -> Result<()> {
    let side = super::square_side(data.dim())?;
    let imgs: Vec<Vec<u8>> = data
        .points()
        .iter()
        .map(|p| p.iter().map(|&v| super::to_byte(v)).collect())
        .collect();
    std::fs::write(images_path, encode_images(side, side, &imgs))
        .map_err(|e| Error::io(images_path, e))?;
    if let Some(lp) = labels_path {
        let labels = data.require_labels()?;
        let mut bytes = Vec::with_capacity(labels.len());
        for &l in labels {
            bytes.push(
                u8::try_from(l)
                    .map_err(|_| Error::invalid(format!("label {l} does not fit in a byte")))?,
            );
        }
        std::fs::write(lp, encode_labels(&bytes)).map_err(|e| Error::io(lp, e))?;
    }
    Ok(())
}
