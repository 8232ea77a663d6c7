//! JSON messages exchanged over the session WebSocket.

use depthtouch_core::{RoiSelection, Vec3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMsg {
    /// New HIP target in workspace mm.
    SetHip {
        x: f64,
        y: f64,
        z: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cmd_id: Option<u64>,
    },
    SetRoi {
        level: usize,
        x: usize,
        y: usize,
        w: usize,
        h: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cmd_id: Option<u64>,
    },
    /// `+1` is coarser, `-1` finer.
    SetLevel {
        delta: i32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cmd_id: Option<u64>,
    },
}

impl ClientMsg {
    pub fn cmd_id(&self) -> Option<u64> {
        match self {
            ClientMsg::SetHip { cmd_id, .. }
            | ClientMsg::SetRoi { cmd_id, .. }
            | ClientMsg::SetLevel { cmd_id, .. } => *cmd_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TickStats {
    /// Rolling window over the most recent ticks.
    pub mean_us: f64,
    pub p99_us: f64,
    pub overruns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub seq: u64,
    /// Session time in ms (one per tick).
    pub t: u64,
    pub hip: Vec3<f64>,
    pub proxy: Vec3<f64>,
    pub force: Vec3<f64>,
    pub in_contact: bool,
    pub converged: bool,
    pub roi: RoiSelection,
    pub mapping_version: u64,
    /// Side of the workspace cube, mm, and the active mapping's scale.
    pub workspace_extent: f64,
    pub lateral_scale: f64,
    pub tick_stats: TickStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    Snapshot(Snapshot),
    Ack {
        cmd_id: Option<u64>,
        /// First snapshot seq that reflects the command.
        seq: u64,
    },
    Error {
        code: ErrorCode,
        message: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cmd_id: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    InvalidParams,
    InvalidRoi,
    InvalidLevel,
    Gone,
}
