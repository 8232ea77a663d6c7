//! Sampled Monge surface `z = f(x, y)` over a regular grid.
//!
//! Grid node `(i, j)` sits at `(i * spacing, j * spacing)` and stores the
//! height above the reference plane `z = 0`. Between nodes the surface is the
//! bilinear interpolant of the enclosing cell; every continuous query here
//! (height, normal, penetration, segment intersection) works on that same
//! interpolant so collision and force directions agree with each other.
//!
//! Cells are owned half-open, `[i, i + 1)`, except the last column and row,
//! which also own their far edge.

use crate::error::{Error, Result};
use crate::scalar::{from_usize, Scalar};
use crate::vec3::Vec3;

/// Bracket width, in millimetres along the segment, at which bisection hands
/// over to the secant polish in [`DepthField::ray_surface_intersect`].
pub const RAY_BISECT_TOL_MM: f64 = 1e-4;

/// Regular grid of surface heights with an optional hole mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthField<S> {
    width: usize,
    height: usize,
    spacing: S,
    values: Vec<S>,
    holes: Vec<bool>,
    z_max: Option<S>,
    unfilled: bool,
}

/// A point on the surface with its upward unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint<S> {
    pub position: Vec3<S>,
    pub normal: Vec3<S>,
}

#[derive(Debug, Clone, Copy)]
struct Cell<S> {
    i: usize,
    j: usize,
    u: S,
    v: S,
}

/// `a + t (b - a)`, exact at both ends and never outside `[min(a,b), max(a,b)]`.
#[inline]
fn lerp<S: Scalar>(a: S, b: S, t: S) -> S {
    if t == S::one() {
        return b;
    }
    let r = a + t * (b - a);
    r.max(a.min(b)).min(a.max(b))
}

impl<S: Scalar> DepthField<S> {
    /// A hole-free field from row-major `values`.
    pub fn new(width: usize, height: usize, spacing: S, values: Vec<S>) -> Result<Self> {
        let n = values.len();
        Self::with_holes(width, height, spacing, values, vec![false; n], None)
    }

    /// A field with a hole mask. Hole cells may hold any finite placeholder
    /// until [`fill_holes`](Self::fill_holes) runs.
    pub fn with_holes(
        width: usize,
        height: usize,
        spacing: S,
        values: Vec<S>,
        holes: Vec<bool>,
        z_max: Option<S>,
    ) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidField(format!("grid must be at least 2x2, got {width}x{height}")));
        }
        if !(spacing > S::zero()) || !spacing.is_finite() {
            return Err(Error::InvalidField(format!("spacing must be positive and finite, got {spacing}")));
        }
        let n = width * height;
        if values.len() != n || holes.len() != n {
            return Err(Error::InvalidField(format!(
                "expected {n} values and mask entries, got {} and {}",
                values.len(),
                holes.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite value at index {k}")));
        }
        if let Some(z) = z_max {
            if !z.is_finite() {
                return Err(Error::InvalidField("z_max must be finite".into()));
            }
        }
        let mut field = Self { width, height, spacing, values, holes, z_max, unfilled: false };
        field.unfilled = match field.resolved_z_max() {
            Some(z) => field.holes.iter().zip(&field.values).any(|(&h, &v)| h && v != z),
            None => field.holes.iter().any(|&h| h),
        };
        Ok(field)
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(width: usize, height: usize, spacing: S, f: impl Fn(S, S) -> S) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                values.push(f(from_usize::<S>(i) * spacing, from_usize::<S>(j) * spacing));
            }
        }
        Self::new(width, height, spacing, values)
    }

    pub fn constant(width: usize, height: usize, spacing: S, z: S) -> Result<Self> {
        Self::new(width, height, spacing, vec![z; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn spacing(&self) -> S {
        self.spacing
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn hole_mask(&self) -> &[bool] {
        &self.holes
    }

    pub fn hole_count(&self) -> usize {
        self.holes.iter().filter(|&&h| h).count()
    }

    /// The explicit `z_max`, if one was set.
    pub fn explicit_z_max(&self) -> Option<S> {
        self.z_max
    }

    /// Explicit `z_max`, or else the largest non-hole value.
    pub fn resolved_z_max(&self) -> Option<S> {
        self.z_max.or_else(|| self.values.iter().zip(&self.holes).filter(|(_, &h)| !h).map(|(&v, _)| v).reduce(S::max))
    }

    /// True when every hole cell holds `z_max`, i.e. the field can be rendered.
    pub fn is_filled(&self) -> bool {
        !self.unfilled
    }

    /// Replaces every hole by `z_max` so the proxy cannot sink through gaps.
    /// Idempotent; non-hole values are untouched.
    pub fn fill_holes(&self) -> Result<Self> {
        if !self.holes.iter().any(|&h| h) {
            return Ok(self.clone());
        }
        let z = self.resolved_z_max().ok_or(Error::AllHoles)?;
        let values = self.values.iter().zip(&self.holes).map(|(&v, &h)| if h { z } else { v }).collect();
        Ok(Self { values, holes: self.holes.clone(), z_max: Some(z), unfilled: false, ..*self })
    }

    /// Largest stored value, holes included.
    pub fn max_value(&self) -> S {
        self.values.iter().copied().fold(S::neg_infinity(), S::max)
    }

    pub fn min_value(&self) -> S {
        self.values.iter().copied().fold(S::infinity(), S::min)
    }

    /// Lateral extent along x: `(width - 1) * spacing`.
    #[inline]
    pub fn extent_x(&self) -> S {
        from_usize::<S>(self.width - 1) * self.spacing
    }

    #[inline]
    pub fn extent_y(&self) -> S {
        from_usize::<S>(self.height - 1) * self.spacing
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> S {
        self.values[j * self.width + i]
    }

    #[inline]
    pub fn contains(&self, x: S, y: S) -> bool {
        x >= S::zero() && y >= S::zero() && x <= self.extent_x() && y <= self.extent_y()
    }

    /// Clamps a point laterally into the extent; reports whether it moved.
    pub fn clamp_lateral(&self, p: Vec3<S>) -> (Vec3<S>, bool) {
        let x = p.x.max(S::zero()).min(self.extent_x());
        let y = p.y.max(S::zero()).min(self.extent_y());
        let moved = x != p.x || y != p.y;
        (Vec3::new(x, y, p.z), moved)
    }

    fn check(&self, x: S, y: S) -> Result<()> {
        if self.contains(x, y) {
            Ok(())
        } else {
            Err(Error::OutOfExtent {
                x: x.to_f64_lossless(),
                y: y.to_f64_lossless(),
                max_x: self.extent_x().to_f64_lossless(),
                max_y: self.extent_y().to_f64_lossless(),
            })
        }
    }

    /// Cell lookup for an in-extent point. Grid coordinates within a few ulps
    /// of an integer snap to it so node queries hit the node exactly.
    #[inline]
    fn locate(&self, x: S, y: S) -> Cell<S> {
        let (i, u) = Self::axis(x / self.spacing, self.width);
        let (j, v) = Self::axis(y / self.spacing, self.height);
        Cell { i, j, u, v }
    }

    #[inline]
    fn axis(g: S, n: usize) -> (usize, S) {
        let r = g.round();
        let slack = S::epsilon() * S::lit(4.0) * r.abs().max(S::one());
        let g = if (g - r).abs() <= slack { r } else { g };
        let g = g.max(S::zero());
        let k = g.floor().to_usize().unwrap_or(0).min(n - 2);
        let t = (g - from_usize::<S>(k)).min(S::one());
        (k, t)
    }

    #[inline]
    fn corners(&self, c: &Cell<S>) -> (S, S, S, S) {
        let base = c.j * self.width + c.i;
        (self.values[base], self.values[base + 1], self.values[base + self.width], self.values[base + self.width + 1])
    }

    #[inline]
    fn height_in_cell(&self, c: &Cell<S>) -> S {
        let (h00, h10, h01, h11) = self.corners(c);
        lerp(lerp(h00, h10, c.u), lerp(h01, h11, c.u), c.v)
    }

    #[inline]
    fn normal_in_cell(&self, c: &Cell<S>) -> Vec3<S> {
        let (h00, h10, h01, h11) = self.corners(c);
        let fx = ((h10 - h00) + c.v * ((h11 - h01) - (h10 - h00))) / self.spacing;
        let fy = ((h01 - h00) + c.u * ((h11 - h10) - (h01 - h00))) / self.spacing;
        let n = Vec3::new(-fx, -fy, S::one());
        n * n.norm().recip()
    }

    /// Height at a point the caller has already clamped into the extent.
    #[inline]
    pub(crate) fn height_at(&self, x: S, y: S) -> S {
        let x = x.max(S::zero()).min(self.extent_x());
        let y = y.max(S::zero()).min(self.extent_y());
        self.height_in_cell(&self.locate(x, y))
    }

    #[inline]
    pub(crate) fn normal_at(&self, x: S, y: S) -> Vec3<S> {
        let x = x.max(S::zero()).min(self.extent_x());
        let y = y.max(S::zero()).min(self.extent_y());
        self.normal_in_cell(&self.locate(x, y))
    }

    /// Signed height of `p` above the surface; negative means penetrating.
    #[inline]
    pub(crate) fn gap(&self, p: Vec3<S>) -> S {
        p.z - self.height_at(p.x, p.y)
    }

    /// Bilinear height of the surface at `(x, y)`.
    pub fn sample_depth(&self, x: S, y: S) -> Result<S> {
        self.check(x, y)?;
        Ok(self.height_in_cell(&self.locate(x, y)))
    }

    /// Upward unit normal `normalize(-f_x, -f_y, 1)` of the bilinear patch
    /// that owns `(x, y)`.
    pub fn surface_normal(&self, x: S, y: S) -> Result<Vec3<S>> {
        self.check(x, y)?;
        Ok(self.normal_in_cell(&self.locate(x, y)))
    }

    pub fn surface_point(&self, x: S, y: S) -> Result<SurfacePoint<S>> {
        self.check(x, y)?;
        let c = self.locate(x, y);
        Ok(SurfacePoint { position: Vec3::new(x, y, self.height_in_cell(&c)), normal: self.normal_in_cell(&c) })
    }

    /// Strictly below the surface. A point exactly on it is not penetrating.
    pub fn is_penetrating(&self, p: Vec3<S>) -> Result<bool> {
        Ok(p.z < self.sample_depth(p.x, p.y)?)
    }

    /// First crossing of the segment `origin -> target` into the surface.
    ///
    /// Marches in increments of at most `step`, brackets the first sign change
    /// of `z - f`, bisects the bracket down to [`RAY_BISECT_TOL_MM`] and then
    /// polishes it with Illinois regula falsi. The returned point is always on
    /// the non-penetrating side of the crossing. The search stops where the
    /// segment leaves the lateral extent.
    pub fn ray_surface_intersect(&self, origin: Vec3<S>, target: Vec3<S>, step: S) -> Result<Option<Vec3<S>>> {
        if !(step > S::zero()) {
            return Err(Error::Params(format!("ray step must be positive, got {step}")));
        }
        let dir = target - origin;
        let len = dir.norm();
        if !(len > S::zero()) {
            return Err(Error::DegenerateSegment);
        }
        self.check(origin.x, origin.y)?;
        if self.gap(origin) < S::zero() {
            return Err(Error::OriginPenetrating {
                x: origin.x.to_f64_lossless(),
                y: origin.y.to_f64_lossless(),
                z: origin.z.to_f64_lossless(),
            });
        }
        Ok(self.first_crossing(origin, target, len, step))
    }

    /// Parameter at which the segment exits the lateral extent, capped at 1.
    fn exit_param(&self, origin: Vec3<S>, dir: Vec3<S>) -> S {
        let mut t_end = S::one();
        for (o, d, hi) in [(origin.x, dir.x, self.extent_x()), (origin.y, dir.y, self.extent_y())] {
            if d > S::zero() {
                t_end = t_end.min((hi - o) / d);
            } else if d < S::zero() {
                t_end = t_end.min(-o / d);
            }
        }
        t_end.max(S::zero())
    }

    /// Unchecked core of [`ray_surface_intersect`](Self::ray_surface_intersect);
    /// origin must be in extent and non-penetrating.
    pub(crate) fn first_crossing(&self, origin: Vec3<S>, target: Vec3<S>, len: S, step: S) -> Option<Vec3<S>> {
        let t_end = self.exit_param(origin, target - origin);
        if t_end <= S::zero() {
            return None;
        }
        let span = len * t_end;
        let n = (span / step).ceil().to_usize().unwrap_or(1).max(1);
        let at = |t: S| origin.lerp(target, t);

        let mut lo = S::zero();
        let mut g_lo = self.gap(origin);
        for k in 1..=n {
            let t = if k == n { t_end } else { t_end * from_usize::<S>(k) / from_usize::<S>(n) };
            let g = self.gap(at(t));
            if g < S::zero() {
                return Some(self.refine(&at, len, lo, g_lo, t, g));
            }
            lo = t;
            g_lo = g;
        }
        None
    }

    fn refine(&self, at: &impl Fn(S) -> Vec3<S>, len: S, mut lo: S, mut g_lo: S, mut hi: S, mut g_hi: S) -> Vec3<S> {
        let coarse = S::lit(RAY_BISECT_TOL_MM);
        for _ in 0..64 {
            if (hi - lo) * len <= coarse {
                break;
            }
            let mid = (lo + hi) * S::lit(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            let g = self.gap(at(mid));
            if g < S::zero() {
                hi = mid;
                g_hi = g;
            } else {
                lo = mid;
                g_lo = g;
            }
        }

        // Illinois polish: exact in one step on affine patches.
        let mut side = 0i8;
        for _ in 0..48 {
            if g_lo == S::zero() {
                break;
            }
            let mut r = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
            if !(r > lo && r < hi) {
                r = (lo + hi) * S::lit(0.5);
                if !(r > lo && r < hi) {
                    break;
                }
            }
            let g = self.gap(at(r));
            if g < S::zero() {
                hi = r;
                g_hi = g;
                if side == -1 {
                    g_lo = g_lo * S::lit(0.5);
                }
                side = -1;
            } else {
                lo = r;
                g_lo = g;
                if side == 1 {
                    g_hi = g_hi * S::lit(0.5);
                }
                side = 1;
            }
        }
        at(lo)
    }

    /// Copies the node window `[x0, x0 + w) x [y0, y0 + h)` into a new field
    /// whose node `(0, 0)` is the window origin.
    pub fn sub_grid(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::Selection(format!(
                "window {x0},{y0} {w}x{h} exceeds {}x{} grid",
                self.width, self.height
            )));
        }
        let mut values = Vec::with_capacity(w * h);
        let mut holes = Vec::with_capacity(w * h);
        for j in y0..y0 + h {
            let row = j * self.width;
            values.extend_from_slice(&self.values[row + x0..row + x0 + w]);
            holes.extend_from_slice(&self.holes[row + x0..row + x0 + w]);
        }
        Self::with_holes(w, h, self.spacing, values, holes, self.z_max)
    }

    /// Uniform rescale: spacing by `lateral`, heights (and `z_max`) by `depth`.
    pub fn scaled(&self, lateral: S, depth: S) -> Result<Self> {
        let values = self.values.iter().map(|&v| v * depth).collect();
        Self::with_holes(
            self.width,
            self.height,
            self.spacing * lateral,
            values,
            self.holes.clone(),
            self.z_max.map(|z| z * depth),
        )
    }
}
