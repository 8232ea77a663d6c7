//! Brute-force reference implementations shared by the integration tests.
//! None of these call into the code under test beyond reading raw grids.

#![allow(dead_code)]

use depthtouch_core::{DepthField, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Bilinear interpolation straight from the corner formula.
pub fn bilinear(field: &DepthField<f64>, x: f64, y: f64) -> f64 {
    let (w, h, s) = (field.width(), field.height(), field.spacing());
    let gx = (x / s).clamp(0.0, (w - 1) as f64);
    let gy = (y / s).clamp(0.0, (h - 1) as f64);
    let i = (gx.floor() as usize).min(w - 2);
    let j = (gy.floor() as usize).min(h - 2);
    let (u, v) = (gx - i as f64, gy - j as f64);
    let z = |i: usize, j: usize| field.values()[j * w + i];
    z(i, j) * (1.0 - u) * (1.0 - v)
        + z(i + 1, j) * u * (1.0 - v)
        + z(i, j + 1) * (1.0 - u) * v
        + z(i + 1, j + 1) * u * v
}

/// Full 2-D convolution with the 5x5 outer-product kernel, clamp-to-edge,
/// then keep every second node.
pub fn convolve_decimate(field: &DepthField<f64>) -> (usize, usize, Vec<f64>) {
    let w1 = [0.05, 0.25, 0.4, 0.25, 0.05];
    let (w, h) = (field.width(), field.height());
    let (ow, oh) = ((w - 1) / 2 + 1, (h - 1) / 2 + 1);
    let mut out = vec![0.0; ow * oh];
    for j in 0..oh {
        for i in 0..ow {
            let mut acc = 0.0;
            for n in -2i64..=2 {
                for m in -2i64..=2 {
                    let si = (2 * i as i64 + m).clamp(0, w as i64 - 1) as usize;
                    let sj = (2 * j as i64 + n).clamp(0, h as i64 - 1) as usize;
                    acc += w1[(m + 2) as usize] * w1[(n + 2) as usize] * field.values()[sj * w + si];
                }
            }
            out[j * ow + i] = acc;
        }
    }
    (ow, oh, out)
}

/// Minimum distance from `p` to the interpolated surface, scanning a square
/// of half-side `radius` around `p` at `density` samples per grid cell.
pub fn brute_force_distance(field: &DepthField<f64>, p: Vec3<f64>, radius: f64, density: usize) -> f64 {
    let step = field.spacing() / density as f64;
    let n = (radius / step).ceil() as i64;
    let mut best = f64::INFINITY;
    for b in -n..=n {
        for a in -n..=n {
            let x = p.x + a as f64 * step;
            let y = p.y + b as f64 * step;
            if x < 0.0 || y < 0.0 || x > field.extent_x() || y > field.extent_y() {
                continue;
            }
            let z = bilinear(field, x, y);
            let d = ((x - p.x).powi(2) + (y - p.y).powi(2) + (z - p.z).powi(2)).sqrt();
            best = best.min(d);
        }
    }
    best
}

/// Distance along the segment to the first sign change of `z - f`, scanning
/// `samples` uniform points. `None` when the whole segment stays above.
pub fn dense_first_crossing(field: &DepthField<f64>, o: Vec3<f64>, t: Vec3<f64>, samples: usize) -> Option<f64> {
    let len = o.distance(t);
    let gap = |k: usize| {
        let s = k as f64 / samples as f64;
        let p = o.lerp(t, s);
        p.z - bilinear(field, p.x, p.y)
    };
    let mut prev = gap(0);
    for k in 1..=samples {
        let g = gap(k);
        if prev >= 0.0 && g < 0.0 {
            return Some(len * (k as f64 - 0.5) / samples as f64);
        }
        prev = g;
    }
    None
}

/// iid uniform heights in `[lo, hi)`.
pub fn random_field(seed: u64, w: usize, h: usize, spacing: f64, lo: f64, hi: f64) -> DepthField<f64> {
    let mut r = rng(seed);
    let values = (0..w * h).map(|_| r.gen_range(lo..hi)).collect();
    DepthField::new(w, h, spacing, values).unwrap()
}

/// RMS of differences between horizontally and vertically adjacent nodes.
pub fn adjacent_rms(field: &DepthField<f64>) -> f64 {
    let (w, h) = (field.width(), field.height());
    let v = field.values();
    let mut acc = 0.0;
    let mut n = 0usize;
    for j in 0..h {
        for i in 0..w {
            if i + 1 < w {
                acc += (v[j * w + i + 1] - v[j * w + i]).powi(2);
                n += 1;
            }
            if j + 1 < h {
                acc += (v[(j + 1) * w + i] - v[j * w + i]).powi(2);
                n += 1;
            }
        }
    }
    (acc / n as f64).sqrt()
}

/// Largest adjacent-node height difference per mm.
pub fn max_slope(field: &DepthField<f64>) -> f64 {
    let (w, h) = (field.width(), field.height());
    let v = field.values();
    let mut m: f64 = 0.0;
    for j in 0..h {
        for i in 0..w {
            if i + 1 < w {
                m = m.max((v[j * w + i + 1] - v[j * w + i]).abs());
            }
            if j + 1 < h {
                m = m.max((v[(j + 1) * w + i] - v[j * w + i]).abs());
            }
        }
    }
    m / field.spacing()
}

/// Random HIP walk over `field`: lateral steps up to 0.15 mm per tick inside
/// a 2 mm margin, height wandering between 2 mm below and 1 mm above the
/// surface with occasional jumps.
pub fn random_walk(seed: u64, field: &DepthField<f64>, ticks: usize) -> depthtouch_core::Trajectory<f64> {
    let mut r = rng(seed);
    let margin = 2.0f64.min(field.extent_x() / 4.0);
    let (lo_x, hi_x) = (margin, field.extent_x() - margin);
    let (lo_y, hi_y) = (margin, field.extent_y() - margin);
    let mut x = r.gen_range(lo_x..hi_x);
    let mut y = r.gen_range(lo_y..hi_y);
    let mut off: f64 = r.gen_range(-1.0..1.0);
    let mut pts = Vec::with_capacity(ticks);
    for _ in 0..ticks {
        x = (x + r.gen_range(-0.15..0.15)).clamp(lo_x, hi_x);
        y = (y + r.gen_range(-0.15..0.15)).clamp(lo_y, hi_y);
        off = if r.gen_bool(0.01) { r.gen_range(-2.0..1.0) } else { (off + r.gen_range(-0.05..0.05)).clamp(-2.0, 1.0) };
        pts.push(Vec3::new(x, y, bilinear(field, x, y) + off));
    }
    depthtouch_core::Trajectory::from_points(pts)
}
