//! Mapping between model millimetres, a pyramid level's ROI window, and the
//! fixed haptic workspace cube.
//!
//! Model coordinates are shared by all levels: node `(i, j)` of level `l`
//! sits at `(i, j) * spacing_l` with `spacing_l = 2^l * spacing_0`. The
//! selected window is fitted to the workspace cube and heights are scaled by
//! the same factor, so zooming magnifies relief without changing slopes.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proxy::{self, HapticState, RenderParams, Tick};
use crate::pyramid::DepthPyramid;
use crate::scalar::{from_usize, Scalar};
use crate::surface::DepthField;
use crate::vec3::Vec3;

/// A 4-inch cube.
pub const DEFAULT_WORKSPACE_MM: f64 = 101.6;

/// Window side, in nodes, used when zooming without an explicit size.
pub const DEFAULT_ROI_NODES: usize = 200;

/// Pyramid level plus a window of that level's nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiSelection {
    pub level: usize,
    /// Origin node column.
    pub x: usize,
    /// Origin node row.
    pub y: usize,
    /// Width in nodes.
    pub w: usize,
    /// Height in nodes.
    pub h: usize,
}

impl RoiSelection {
    /// The whole of `level`.
    pub fn full<S: Scalar>(pyramid: &DepthPyramid<S>, level: usize) -> Result<Self> {
        let f = pyramid.level(level).ok_or_else(|| Error::Selection(format!("level {level} does not exist")))?;
        Ok(Self { level, x: 0, y: 0, w: f.width(), h: f.height() })
    }

    pub fn validate<S: Scalar>(&self, pyramid: &DepthPyramid<S>) -> Result<()> {
        let f = pyramid.level(self.level).ok_or_else(|| {
            Error::Selection(format!("level {} does not exist (pyramid has {})", self.level, pyramid.len()))
        })?;
        if self.w < 2 || self.h < 2 {
            return Err(Error::Selection(format!("window {}x{} is smaller than 2x2 nodes", self.w, self.h)));
        }
        if self.x + self.w > f.width() || self.y + self.h > f.height() {
            return Err(Error::Selection(format!(
                "window {},{} {}x{} exceeds level {} grid {}x{}",
                self.x,
                self.y,
                self.w,
                self.h,
                self.level,
                f.width(),
                f.height()
            )));
        }
        Ok(())
    }

    /// Window of `w x h` nodes on `level` centred as close as possible to the
    /// model point `(cx, cy)` mm.
    pub fn centered<S: Scalar>(
        pyramid: &DepthPyramid<S>,
        level: usize,
        cx: S,
        cy: S,
        w: usize,
        h: usize,
    ) -> Result<Self> {
        let f = pyramid.level(level).ok_or_else(|| Error::Selection(format!("level {level} does not exist")))?;
        let w = w.min(f.width());
        let h = h.min(f.height());
        let pick = |c: S, span: usize, n: usize| {
            let first = (c / f.spacing() - from_usize::<S>(span - 1) * S::lit(0.5)).round();
            let first = first.max(S::zero()).to_usize().unwrap_or(0);
            first.min(n - span)
        };
        let sel = Self { level, x: pick(cx, w, f.width()), y: pick(cy, h, f.height()), w, h };
        sel.validate(pyramid)?;
        Ok(sel)
    }

    /// Same window centre on the neighbouring level `level + delta`, keeping
    /// the node counts (clamped to the new level). `+1` is coarser.
    pub fn step_level<S: Scalar>(&self, pyramid: &DepthPyramid<S>, delta: i32) -> Result<Self> {
        let target = self.level as i64 + delta as i64;
        if target < 0 || target >= pyramid.len() as i64 {
            return Err(Error::Selection(format!("no level {target}: pyramid has levels 0..{}", pyramid.len() - 1)));
        }
        let cur = pyramid
            .level(self.level)
            .ok_or_else(|| Error::Selection(format!("level {} does not exist", self.level)))?;
        let half = S::lit(0.5);
        let cx = (from_usize::<S>(self.x) + from_usize::<S>(self.w - 1) * half) * cur.spacing();
        let cy = (from_usize::<S>(self.y) + from_usize::<S>(self.h - 1) * half) * cur.spacing();
        Self::centered(pyramid, target as usize, cx, cy, self.w, self.h)
    }
}

/// Affine map from model mm to workspace mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceMapping<S> {
    /// Side of the workspace cube, mm.
    pub workspace_extent: S,
    /// Workspace mm per model mm.
    pub lateral_scale: S,
    /// Multiplier applied to heights.
    pub depth_gain: S,
    /// Model position of the window origin, mm.
    pub origin_x: S,
    pub origin_y: S,
}

impl<S: Scalar> WorkspaceMapping<S> {
    /// Identity map: the field's own coordinates are the workspace frame.
    pub fn identity(workspace_extent: S) -> Self {
        Self {
            workspace_extent,
            lateral_scale: S::one(),
            depth_gain: S::one(),
            origin_x: S::zero(),
            origin_y: S::zero(),
        }
    }

    pub fn model_to_workspace(&self, p: Vec3<S>) -> Vec3<S> {
        Vec3::new(
            (p.x - self.origin_x) * self.lateral_scale,
            (p.y - self.origin_y) * self.lateral_scale,
            p.z * self.depth_gain,
        )
    }

    pub fn workspace_to_model(&self, p: Vec3<S>) -> Vec3<S> {
        Vec3::new(
            p.x / self.lateral_scale + self.origin_x,
            p.y / self.lateral_scale + self.origin_y,
            p.z / self.depth_gain,
        )
    }

    /// Rescales a window-local model field into the workspace frame.
    pub fn to_workspace_field(&self, local: &DepthField<S>) -> Result<DepthField<S>> {
        local.scaled(self.lateral_scale, self.depth_gain)
    }
}

/// Copies the selected window out of the pyramid and fits it to the cube.
///
/// The returned field is in model millimetres with node `(0, 0)` at the
/// window origin; `mapping.to_workspace_field` turns it into the frame the
/// renderer runs in.
pub fn select_roi<S: Scalar>(
    pyramid: &DepthPyramid<S>,
    sel: &RoiSelection,
    workspace_extent: S,
) -> Result<(DepthField<S>, WorkspaceMapping<S>)> {
    sel.validate(pyramid)?;
    if !(workspace_extent > S::zero()) {
        return Err(Error::Selection(format!("workspace extent must be positive, got {workspace_extent}")));
    }
    let level = &pyramid.levels()[sel.level];
    let local = level.sub_grid(sel.x, sel.y, sel.w, sel.h)?;
    let span = from_usize::<S>(sel.w.max(sel.h) - 1) * level.spacing();
    let scale = workspace_extent / span;
    let mapping = WorkspaceMapping {
        workspace_extent,
        lateral_scale: scale,
        depth_gain: scale,
        origin_x: from_usize::<S>(sel.x) * level.spacing(),
        origin_y: from_usize::<S>(sel.y) * level.spacing(),
    };
    Ok((local, mapping))
}

/// A running haptic session over a pyramid: active ROI, its workspace field,
/// and the haptic state. Owned by exactly one tick loop.
#[derive(Debug, Clone)]
pub struct Engine<S> {
    pyramid: Arc<DepthPyramid<S>>,
    roi: RoiSelection,
    mapping: WorkspaceMapping<S>,
    field: Arc<DepthField<S>>,
    mapping_version: u64,
    state: HapticState<S>,
    params: RenderParams<S>,
    last_switch: Option<Duration>,
}

impl<S: Scalar> Engine<S> {
    /// Starts with the HIP parked above the centre of `roi`.
    pub fn new(
        pyramid: Arc<DepthPyramid<S>>,
        roi: RoiSelection,
        params: RenderParams<S>,
        workspace_extent: S,
    ) -> Result<Self> {
        params.validate()?;
        let (local, mapping) = select_roi(&pyramid, &roi, workspace_extent)?;
        let field = Arc::new(mapping.to_workspace_field(&local)?);
        let park = park_point(&field, workspace_extent);
        Ok(Self {
            pyramid,
            roi,
            mapping,
            field,
            mapping_version: 0,
            state: HapticState::at(park),
            params,
            last_switch: None,
        })
    }

    pub fn pyramid(&self) -> &Arc<DepthPyramid<S>> {
        &self.pyramid
    }

    pub fn roi(&self) -> RoiSelection {
        self.roi
    }

    pub fn mapping(&self) -> &WorkspaceMapping<S> {
        &self.mapping
    }

    /// Active surface in workspace coordinates.
    pub fn field(&self) -> &Arc<DepthField<S>> {
        &self.field
    }

    pub fn mapping_version(&self) -> u64 {
        self.mapping_version
    }

    pub fn state(&self) -> &HapticState<S> {
        &self.state
    }

    pub fn params(&self) -> &RenderParams<S> {
        &self.params
    }

    /// Duration of the most recent ROI switch.
    pub fn last_switch(&self) -> Option<Duration> {
        self.last_switch
    }

    pub fn park_point(&self) -> Vec3<S> {
        park_point(&self.field, self.mapping.workspace_extent)
    }

    /// One haptic tick with a new HIP in workspace mm.
    pub fn tick(&mut self, hip: Vec3<S>) -> Result<Tick<S>> {
        let t = proxy::tick(&self.state, hip, &self.field, &self.params)?;
        self.state = t.state;
        Ok(t)
    }

    /// Replaces the active window between ticks. An invalid selection is
    /// rejected and the previous ROI stays active.
    ///
    /// The HIP keeps its model position when that position lies inside the
    /// new window; otherwise it is parked above the new window's centre. The
    /// proxy starts at the HIP, lifted onto the surface if needed, with no
    /// contact and zero force.
    pub fn switch_roi(&mut self, sel: RoiSelection) -> Result<()> {
        let start = Instant::now();
        let (local, mapping) = select_roi(&self.pyramid, &sel, self.mapping.workspace_extent)?;
        let field = mapping.to_workspace_field(&local)?;

        let model_hip = self.mapping.workspace_to_model(self.state.hip);
        let ws = mapping.model_to_workspace(model_hip);
        let hip = if field.contains(ws.x, ws.y) { ws } else { park_point(&field, mapping.workspace_extent) };
        let mut proxy = hip;
        let h = field.height_at(proxy.x, proxy.y);
        if proxy.z < h {
            proxy.z = h;
        }

        self.state = HapticState { hip, proxy, ..HapticState::at(hip) };
        self.field = Arc::new(field);
        self.mapping = mapping;
        self.roi = sel;
        self.mapping_version += 1;
        self.last_switch = Some(start.elapsed());
        Ok(())
    }
}

/// Window centre, 10% of the workspace above the highest point.
fn park_point<S: Scalar>(field: &DepthField<S>, workspace_extent: S) -> Vec3<S> {
    let top = field.resolved_z_max().unwrap_or_else(|| field.max_value()).max(field.max_value());
    Vec3::new(field.extent_x() * S::lit(0.5), field.extent_y() * S::lit(0.5), top + workspace_extent * S::lit(0.1))
}
