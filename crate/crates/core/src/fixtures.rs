//! Synthetic surfaces and canonical HIP scripts for tests, benchmarks and demos.
//!
//! Every surface spans the default 101.6 mm workspace regardless of grid
//! resolution, so the same scripts replay on any `n x n` sampling.

use crate::error::Result;
use crate::io::Trajectory;
use crate::scalar::Scalar;
use crate::surface::DepthField;
use crate::vec3::Vec3;
use crate::workspace::DEFAULT_WORKSPACE_MM;

const C: f64 = DEFAULT_WORKSPACE_MM / 2.0;

/// Hole discs `(cx, cy, radius)` of the holed surface, mm.
pub const HOLES: [(f64, f64, f64); 3] = [(30.0, 30.0, 4.0), (70.0, 40.0, 5.0), (50.0, 75.0, 3.5)];

/// Fill level of the holed surface: the top of its generating function.
pub const HOLED_Z_MAX: f64 = 31.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    /// `z = 20`.
    Flat,
    /// `z = 10 + 0.3 x`.
    Ramp,
    /// Dome `z = 40 - 0.006 r^2` about the centre.
    Paraboloid,
    /// Sphere of radius 80 centred 40 mm below the base plane.
    SphereCap,
    /// `z = 20 + 0.5 sin(2 pi x / 4) + 0.3 cos(2 pi y / 6)`.
    SineTexture,
    /// Dome with a gentle texture and three circular holes.
    Holed,
}

impl Surface {
    pub const ALL: [Surface; 6] =
        [Surface::Flat, Surface::Ramp, Surface::Paraboloid, Surface::SphereCap, Surface::SineTexture, Surface::Holed];

    pub fn name(self) -> &'static str {
        match self {
            Surface::Flat => "flat",
            Surface::Ramp => "ramp",
            Surface::Paraboloid => "paraboloid",
            Surface::SphereCap => "sphere-cap",
            Surface::SineTexture => "sine",
            Surface::Holed => "holed",
        }
    }

    /// Generating function; holes are not part of it.
    pub fn height(self, x: f64, y: f64) -> f64 {
        use std::f64::consts::TAU;
        let r2 = (x - C).powi(2) + (y - C).powi(2);
        match self {
            Surface::Flat => 20.0,
            Surface::Ramp => 10.0 + 0.3 * x,
            Surface::Paraboloid => 40.0 - 0.006 * r2,
            Surface::SphereCap => (80.0f64 * 80.0 - r2).max(0.0).sqrt() - 40.0,
            Surface::SineTexture => 20.0 + 0.5 * (TAU * x / 4.0).sin() + 0.3 * (TAU * y / 6.0).cos(),
            Surface::Holed => 30.0 - 0.004 * r2 + 1.5 * (x / 6.0).sin() * (y / 8.0).cos(),
        }
    }

    pub fn is_hole(self, x: f64, y: f64) -> bool {
        self == Surface::Holed && HOLES.iter().any(|&(cx, cy, r)| (x - cx).powi(2) + (y - cy).powi(2) <= r * r)
    }

    /// Height of the rendered surface: holes read as [`HOLED_Z_MAX`].
    pub fn filled_height(self, x: f64, y: f64) -> f64 {
        if self.is_hole(x, y) {
            HOLED_Z_MAX
        } else {
            self.height(x, y)
        }
    }

    /// `n x n` samples with holes marked but not filled.
    pub fn sample<S: Scalar>(self, n: usize) -> Result<DepthField<S>> {
        let spacing = DEFAULT_WORKSPACE_MM / (n - 1) as f64;
        let mut values = Vec::with_capacity(n * n);
        let mut holes = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let (x, y) = (i as f64 * spacing, j as f64 * spacing);
                let hole = self.is_hole(x, y);
                holes.push(hole);
                values.push(S::lit(if hole { 0.0 } else { self.height(x, y) }));
            }
        }
        let z_max = (self == Surface::Holed).then(|| S::lit(HOLED_Z_MAX));
        DepthField::with_holes(n, n, S::lit(spacing), values, holes, z_max)
    }

    /// `n x n` samples ready for rendering.
    pub fn build<S: Scalar>(self, n: usize) -> Result<DepthField<S>> {
        self.sample(n)?.fill_holes()
    }
}

fn to_traj<S: Scalar>(pts: Vec<[f64; 3]>) -> Trajectory<S> {
    Trajectory::from_points(pts.into_iter().map(|[x, y, z]| Vec3::new(S::lit(x), S::lit(y), S::lit(z))))
}

/// Circles at 40 mm above the flat surface; never touches it.
pub fn free_space<S: Scalar>() -> Trajectory<S> {
    let n = 2000;
    let pts = (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            [C + 20.0 * a.cos(), C + 20.0 * a.sin(), 60.0]
        })
        .collect();
    to_traj(pts)
}

/// Flat surface: rest in free space, descend 1.5 mm into the surface at
/// 5 mm/s, then hold.
pub fn descend_hold<S: Scalar>() -> Trajectory<S> {
    let mut pts = Vec::new();
    let top = 25.0;
    let bottom = 18.5;
    for _ in 0..100 {
        pts.push([C, C, top]);
    }
    let steps = 1300;
    for k in 1..=steps {
        pts.push([C, C, top + (bottom - top) * k as f64 / steps as f64]);
    }
    for _ in 0..500 {
        pts.push([C, C, bottom]);
    }
    to_traj(pts)
}

/// Dome: descend to 0.5 mm below the surface, slide 20 mm along x at that
/// depth, then hold.
pub fn curved_slide<S: Scalar>() -> Trajectory<S> {
    let s = Surface::Paraboloid;
    let depth = 0.5;
    let (x0, x1, y) = (40.0, 60.0, C);
    let mut pts = Vec::new();
    for _ in 0..100 {
        pts.push([x0, y, s.height(x0, y) + 5.0]);
    }
    let steps = 1100;
    for k in 1..=steps {
        let z = s.height(x0, y) + 5.0 - (5.0 + depth) * k as f64 / steps as f64;
        pts.push([x0, y, z]);
    }
    let slide = 2000;
    for k in 1..=slide {
        let x = x0 + (x1 - x0) * k as f64 / slide as f64;
        pts.push([x, y, s.height(x, y) - depth]);
    }
    for _ in 0..500 {
        pts.push([x1, y, s.height(x1, y) - depth]);
    }
    to_traj(pts)
}

/// HIP height for a sweep `depth` below the holed surface that hops over
/// the filled holes: `margin` either side of a hole rim it clears the fill
/// level, well inside a hole it presses into the fill.
fn holed_sweep_z(x: f64, y: f64, depth: f64, margin: f64) -> f64 {
    let d =
        HOLES.iter().map(|&(cx, cy, r)| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() - r).fold(f64::INFINITY, f64::min);
    if d < -margin {
        HOLED_Z_MAX - depth
    } else if d < margin {
        HOLED_Z_MAX + 0.5
    } else {
        Surface::Holed.height(x, y) - depth
    }
}

/// Holed surface: 300-tick descent to 1 mm below the surface, then `ticks`
/// of a Lissajous sweep at that depth. The sweep lifts over hole rims rather
/// than ramming the fill walls from the side.
pub fn contact_heavy<S: Scalar>(ticks: usize) -> Trajectory<S> {
    use std::f64::consts::TAU;
    let (depth, margin) = (1.0, 1.5);
    let at = |k: usize| {
        let t = k as f64;
        let x = C + 30.0 * (TAU * t / 5000.0).sin();
        let y = C + 25.0 * (TAU * t / 3700.0 + 0.5).sin();
        (x, y)
    };
    let (x0, y0) = at(0);
    let z0 = holed_sweep_z(x0, y0, depth, margin);
    let mut pts = Vec::new();
    let descent = 300;
    for k in 0..descent {
        let z = z0 + 3.0 - 3.0 * k as f64 / (descent - 1) as f64;
        pts.push([x0, y0, z]);
    }
    for k in 0..ticks {
        let (x, y) = at(k);
        pts.push([x, y, holed_sweep_z(x, y, depth, margin)]);
    }
    to_traj(pts)
}
