//! Gaussian pyramid of depth grids for multiscale zoom.
//!
//! Each level low-pass filters the previous one with a 5x5 separable kernel
//! and keeps every second node, so level `l` has spacing `2^l` times the
//! original. Borders are clamped to the edge.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::surface::DepthField;

/// 1-D generating kernel with `a = 0.4`.
pub const KERNEL_1D: [f64; 5] = [0.05, 0.25, 0.40, 0.25, 0.05];

/// The 5x5 weights `w(m, n) = w(m) w(n)`, indexed `[m + 2][n + 2]`.
pub fn gaussian_kernel<S: Scalar>() -> [[S; 5]; 5] {
    let mut k = [[S::zero(); 5]; 5];
    for (m, row) in k.iter_mut().enumerate() {
        for (n, w) in row.iter_mut().enumerate() {
            *w = S::lit(KERNEL_1D[m] * KERNEL_1D[n]);
        }
    }
    k
}

/// Node count after one reduction: `floor((n - 1) / 2) + 1`.
#[inline]
pub fn reduced_len(n: usize) -> usize {
    (n - 1) / 2 + 1
}

#[inline]
fn clamp_index(k: isize, n: usize) -> usize {
    k.clamp(0, n as isize - 1) as usize
}

/// One REDUCE step: filter with the 5x5 kernel and decimate by two.
pub fn reduce_level<S: Scalar>(field: &DepthField<S>) -> Result<DepthField<S>> {
    reduce_at(field, 0)
}

fn reduce_at<S: Scalar>(field: &DepthField<S>, level: usize) -> Result<DepthField<S>> {
    let (w, h) = (field.width(), field.height());
    if w < 5 || h < 5 {
        return Err(Error::TooSmall { level, width: w, height: h });
    }
    if !field.is_filled() {
        return Err(Error::UnfilledHoles);
    }
    let (ow, oh) = (reduced_len(w), reduced_len(h));
    let taps: [S; 5] = KERNEL_1D.map(S::lit);
    let src = field.values();

    // Horizontal pass at the kept columns only.
    let mut rows = vec![S::zero(); ow * h];
    for j in 0..h {
        let line = &src[j * w..(j + 1) * w];
        for i in 0..ow {
            let c = 2 * i as isize;
            let mut acc = S::zero();
            for (t, &wt) in taps.iter().enumerate() {
                acc = acc + wt * line[clamp_index(c + t as isize - 2, w)];
            }
            rows[j * ow + i] = acc;
        }
    }

    let mut out = vec![S::zero(); ow * oh];
    for j in 0..oh {
        let c = 2 * j as isize;
        for (t, &wt) in taps.iter().enumerate() {
            let r = clamp_index(c + t as isize - 2, h);
            let src_row = &rows[r * ow..(r + 1) * ow];
            let dst = &mut out[j * ow..(j + 1) * ow];
            for (d, &s) in dst.iter_mut().zip(src_row) {
                *d = *d + wt * s;
            }
        }
    }

    // Hole cells were filled with z_max before filtering; the coarse level
    // carries no mask of its own.
    let z_max = field.explicit_z_max();
    let n = out.len();
    DepthField::with_holes(ow, oh, field.spacing() * S::lit(2.0), out, vec![false; n], z_max)
}

/// Ordered levels, index 0 the original grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthPyramid<S> {
    levels: Vec<DepthField<S>>,
}

impl<S: Scalar> DepthPyramid<S> {
    pub fn levels(&self) -> &[DepthField<S>] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> Option<&DepthField<S>> {
        self.levels.get(l)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn kernel(&self) -> [[S; 5]; 5] {
        gaussian_kernel()
    }

    pub fn from_levels(levels: Vec<DepthField<S>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Input("a pyramid needs at least one level".into()));
        }
        Ok(Self { levels })
    }

    /// Deepest pyramid whose every reduction still has a 5x5 input.
    pub fn max_levels(field: &DepthField<S>) -> usize {
        let (mut w, mut h, mut n) = (field.width(), field.height(), 1);
        while w >= 5 && h >= 5 {
            w = reduced_len(w);
            h = reduced_len(h);
            n += 1;
        }
        n
    }
}

/// Builds `n_levels` levels starting from `field`.
pub fn build_pyramid<S: Scalar>(field: &DepthField<S>, n_levels: usize) -> Result<DepthPyramid<S>> {
    if n_levels == 0 {
        return Err(Error::Input("n_levels must be at least 1".into()));
    }
    if !field.is_filled() {
        return Err(Error::UnfilledHoles);
    }
    let mut levels = Vec::with_capacity(n_levels);
    levels.push(field.clone());
    for l in 1..n_levels {
        let next = reduce_at(&levels[l - 1], l - 1)?;
        levels.push(next);
    }
    Ok(DepthPyramid { levels })
}
