//! Proxy-based haptic rendering of depth-grid surfaces.
//!
//! A [`DepthField`] holds the sampled surface `z = f(x, y)`. Each haptic tick
//! moves a proxy along that surface towards the device position and renders a
//! spring force between them ([`proxy`]). Large models are explored through a
//! Gaussian [`pyramid`] whose levels and windows are mapped into the fixed
//! haptic workspace ([`workspace`]). [`harness`] replays scripted
//! trajectories and measures tick latency.
//!
//! All geometry is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the precision for callers that do not care.

// `!(x > 0)` is how NaN gets rejected alongside the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fixtures;
pub mod harness;
pub mod io;
pub mod proxy;
pub mod pyramid;
pub mod scalar;
pub mod surface;
pub mod vec3;
pub mod workspace;

pub use error::{Error, Result};
pub use harness::{
    benchmark_latency, check_phases, run_trajectory, LatencyStats, Phase, PhaseFailure, PhaseLimits, PhaseReport,
    RealtimeGuard, Timing,
};
pub use io::{ForceTrace, GridFormat, PointCloudSample, TraceSample, Trajectory, TrajectorySample};
pub use proxy::{compute_force, resolve_proxy, step_proxy, tick, HapticState, RenderParams, Tick};
pub use pyramid::{build_pyramid, gaussian_kernel, reduce_level, DepthPyramid};
pub use scalar::Scalar;
pub use surface::{DepthField, SurfacePoint};
pub use vec3::Vec3;
pub use workspace::{select_roi, Engine, RoiSelection, WorkspaceMapping};

pub type Vec3f = Vec3<f32>;
pub type Vec3d = Vec3<f64>;
pub type DepthField32 = DepthField<f32>;
pub type DepthField64 = DepthField<f64>;
pub type DepthPyramid32 = DepthPyramid<f32>;
pub type DepthPyramid64 = DepthPyramid<f64>;
pub type HapticState32 = HapticState<f32>;
pub type HapticState64 = HapticState<f64>;
pub type RenderParams32 = RenderParams<f32>;
pub type RenderParams64 = RenderParams<f64>;
pub type Engine64 = Engine<f64>;
pub type ForceTrace64 = ForceTrace<f64>;
pub type Trajectory64 = Trajectory<f64>;
