//! Seeded synthetic datasets.

use std::f64::consts::PI;

use rand::Rng;

use super::Dataset;
use crate::rng::{seeded, standard_normal};
use crate::{Error, Result, Scalar};

/// Two interleaving half circles. The outer arc is `(cos θ, sin θ)` and the
/// inner arc `(1 - cos θ, 0.5 - sin θ)` for `θ` evenly spaced on `[0, π]`,
/// plus isotropic Gaussian noise. Labels are 0 (outer) and 1 (inner).
pub fn make_two_moons<T: Scalar>(n: usize, noise: f64, seed: u64) -> Result<Dataset<T>> {
    if n < 2 {
        return Err(Error::invalid("two moons needs n >= 2"));
    }
    if !(noise >= 0.0) {
        return Err(Error::invalid("noise must be non-negative"));
    }
    let n_out = n / 2;
    let n_in = n - n_out;
    let theta = |i: usize, k: usize| {
        if k > 1 {
            PI * i as f64 / (k - 1) as f64
        } else {
            0.0
        }
    };
    let mut rng = seeded(seed);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n_out {
        let t = theta(i, n_out);
        points.push([t.cos(), t.sin()]);
        labels.push(0);
    }
    for i in 0..n_in {
        let t = theta(i, n_in);
        points.push([1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }
    let points = points
        .into_iter()
        .map(|p| {
            p.iter()
                .map(|&v| T::of(v + noise * standard_normal::<f64, _>(&mut rng)))
                .collect()
        })
        .collect();
    Dataset::new(
        points,
        Some(labels),
        format!("two_moons(n={n}, noise={noise}, seed={seed})"),
    )
}

/// Isotropic Gaussian clusters; point `i` belongs to center `i % centers.len()`.
pub fn make_blobs<T: Scalar>(
    n: usize,
    centers: &[Vec<f64>],
    std: f64,
    seed: u64,
) -> Result<Dataset<T>> {
    if n < 2 {
        return Err(Error::invalid("blobs needs n >= 2"));
    }
    let d = centers
        .first()
        .ok_or(Error::invalid("blobs needs at least one center"))?
        .len();
    for c in centers {
        crate::error::check_dim("blob center", d, c.len())?;
    }
    if !(std >= 0.0) {
        return Err(Error::invalid("blob std must be non-negative"));
    }
    let mut rng = seeded(seed);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let k = i % centers.len();
        points.push(
            centers[k]
                .iter()
                .map(|&c| T::of(c + std * standard_normal::<f64, _>(&mut rng)))
                .collect(),
        );
        labels.push(k as i64);
    }
    Dataset::new(
        points,
        Some(labels),
        format!("blobs(n={n}, k={}, std={std}, seed={seed})", centers.len()),
    )
}

/// `side x side` images holding two Gaussian bumps of random position, width
/// and brightness over a random background level, with additive pixel noise;
/// integer pixel values in `[0, 255]`. Unlabeled.
pub fn make_blob_images<T: Scalar>(n: usize, side: usize, seed: u64) -> Result<Dataset<T>> {
    if n < 1 || side < 2 {
        return Err(Error::invalid("blob images need n >= 1 and side >= 2"));
    }
    let mut rng = seeded(seed);
    let s = side as f64;
    let points = (0..n)
        .map(|_| {
            let bumps: Vec<(f64, f64, f64, f64)> = (0..2)
                .map(|_| {
                    let cx = rng.random_range(0.0..s);
                    let cy = rng.random_range(0.0..s);
                    let width = rng.random_range(0.15 * s..0.45 * s);
                    let amp = rng.random_range(0.3..1.0) * 255.0;
                    (cx, cy, width, amp)
                })
                .collect();
            let background = rng.random_range(0.0..40.0);
            (0..side * side)
                .map(|k| {
                    let (x, y) = ((k % side) as f64 + 0.5, (k / side) as f64 + 0.5);
                    let v: f64 = background
                        + BLOB_NOISE * standard_normal::<f64, _>(&mut rng)
                        + bumps
                            .iter()
                            .map(|&(cx, cy, w, a)| {
                                a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * w * w)).exp()
                            })
                            .sum::<f64>();
                    T::of(v.round().clamp(0.0, 255.0))
                })
                .collect()
        })
        .collect();
    Dataset::new(
        points,
        None,
        format!("blob_images(n={n}, side={side}, seed={seed})"),
    )
}

const BLOB_NOISE: f64 = 8.0;

type Stroke = Vec<(f64, f64)>;

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from_deg: f64, to_deg: f64) -> Stroke {
    let steps = 24;
    (0..=steps)
        .map(|i| {
            let a = (from_deg + (to_deg - from_deg) * i as f64 / steps as f64).to_radians();
            (cx + rx * a.cos(), cy + ry * a.sin())
        })
        .collect()
}

/// Pen strokes for each digit in a unit box (x right, y down).
fn digit_strokes(digit: usize) -> Vec<Stroke> {
    match digit {
        0 => vec![arc(0.5, 0.5, 0.28, 0.4, 0.0, 360.0)],
        1 => vec![vec![(0.35, 0.25), (0.55, 0.1), (0.55, 0.9)]],
        2 => {
            let mut top = arc(0.5, 0.32, 0.25, 0.22, 180.0, 360.0 + 30.0);
            top.push((0.25, 0.9));
            top.push((0.78, 0.9));
            vec![top]
        }
        3 => vec![
            arc(0.48, 0.3, 0.24, 0.2, 200.0, 450.0),
            arc(0.48, 0.7, 0.26, 0.2, 270.0, 520.0),
        ],
        4 => vec![vec![(0.65, 0.9), (0.65, 0.1), (0.2, 0.65), (0.82, 0.65)]],
        5 => {
            let mut s = vec![(0.75, 0.1), (0.32, 0.1), (0.3, 0.45)];
            s.extend(arc(0.5, 0.66, 0.25, 0.24, 230.0, 500.0));
            vec![s]
        }
        6 => vec![
            arc(0.75, 0.55, 0.45, 0.45, 240.0, 180.0 - 20.0),
            arc(0.5, 0.68, 0.22, 0.22, 0.0, 360.0),
        ],
        7 => vec![vec![(0.2, 0.1), (0.8, 0.1), (0.4, 0.9)]],
        8 => vec![
            arc(0.5, 0.3, 0.18, 0.2, 0.0, 360.0),
            arc(0.5, 0.7, 0.23, 0.2, 0.0, 360.0),
        ],
        9 => vec![
            arc(0.48, 0.32, 0.22, 0.22, 0.0, 360.0),
            vec![(0.7, 0.32), (0.62, 0.9)],
        ],
        _ => unreachable!("digit out of range"),
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let (wx, wy) = (p.0 - a.0, p.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (p.0 - (a.0 + t * vx), p.1 - (a.1 + t * vy));
    (dx * dx + dy * dy).sqrt()
}

/// Procedurally drawn handwritten-style digits 0-9 as `side x side` images
/// with integer pixel values in `[0, 255]`: template pen strokes under a
/// random affine distortion, random stroke width and contrast, rendered with
/// 4x supersampling and additive pixel noise. `per_class` images per digit,
/// labels 0-9, ordered by class.
pub fn make_digit_images<T: Scalar>(
    per_class: usize,
    side: usize,
    seed: u64,
) -> Result<Dataset<T>> {
    if per_class < 1 || side < 4 {
        return Err(Error::invalid(
            "digit images need per_class >= 1 and side >= 4",
        ));
    }
    const SUPER: usize = 4;
    let fine = side * SUPER;
    let mut rng = seeded(seed);
    let mut points = Vec::with_capacity(10 * per_class);
    let mut labels = Vec::with_capacity(10 * per_class);
    for digit in 0..10 {
        let strokes = digit_strokes(digit);
        for _ in 0..per_class {
            let rot = 0.18 * standard_normal::<f64, _>(&mut rng);
            let shear = 0.15 * standard_normal::<f64, _>(&mut rng);
            let sx = rng.random_range(0.75..1.05);
            let sy = rng.random_range(0.8..1.05);
            let (tx, ty) = (rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
            let thick = rng.random_range(0.07..0.13);
            let contrast = rng.random_range(0.6..1.0);
            // forward map: q -> R * Shear * S * (q - c) + c + t; invert per fine pixel
            let (c, s) = (rot.cos(), rot.sin());
            let m = [
                [c * sx, c * shear * sy - s * sy],
                [s * sx, s * shear * sy + c * sy],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let inv = [
                [m[1][1] / det, -m[0][1] / det],
                [-m[1][0] / det, m[0][0] / det],
            ];
            let mut coverage = vec![0.0f64; side * side];
            for fy in 0..fine {
                for fx in 0..fine {
                    let px = (fx as f64 + 0.5) / fine as f64 - 0.5 - tx;
                    let py = (fy as f64 + 0.5) / fine as f64 - 0.5 - ty;
                    let q = (
                        inv[0][0] * px + inv[0][1] * py + 0.5,
                        inv[1][0] * px + inv[1][1] * py + 0.5,
                    );
                    let hit = strokes.iter().any(|st| {
                        st.windows(2)
                            .any(|w| segment_distance(q, w[0], w[1]) < thick)
                    });
                    if hit {
                        coverage[(fy / SUPER) * side + fx / SUPER] += 1.0 / (SUPER * SUPER) as f64;
                    }
                }
            }
            let img = coverage
                .into_iter()
                .map(|v| {
                    let noisy = 255.0 * contrast * v + 12.0 * standard_normal::<f64, _>(&mut rng);
                    T::of(noisy.round().clamp(0.0, 255.0))
                })
                .collect();
            points.push(img);
            labels.push(digit as i64);
        }
    }
    Dataset::new(
        points,
        Some(labels),
        format!("digit_images(per_class={per_class}, side={side}, seed={seed})"),
    )
}
