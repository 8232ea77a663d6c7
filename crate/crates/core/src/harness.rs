//! Trajectory replay, latency benchmarking and force-trace phase checks.
//!
//! Replays drive one tick per trajectory sample as fast as possible; the
//! timestamps advance one logical millisecond per tick and wall-clock time is
//! only measured, never waited for.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{ForceTrace, TraceSample, Trajectory};
use crate::proxy::{self, HapticState, RenderParams};
use crate::scalar::Scalar;
use crate::surface::DepthField;

/// Whether `tick_us` is filled from the wall clock. Traces written with
/// [`Timing::Omitted`] are byte-for-byte reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    Measured,
    Omitted,
}

fn check_consecutive<S: Scalar>(traj: &Trajectory<S>) -> Result<()> {
    for (k, w) in traj.samples.windows(2).enumerate() {
        if w[1].t_ms != w[0].t_ms + 1 {
            return Err(Error::Input(format!(
                "trajectory sample {}: t_ms {} does not follow {} by 1 ms",
                k + 1,
                w[1].t_ms,
                w[0].t_ms
            )));
        }
    }
    Ok(())
}

/// Initial state for a replay: proxy at the first HIP, pushed onto the
/// surface if the script starts inside the object.
pub fn initial_state<S: Scalar>(field: &DepthField<S>, traj: &Trajectory<S>) -> Option<HapticState<S>> {
    let first = traj.samples.first()?.hip;
    let (mut p, _) = field.clamp_lateral(first);
    let h = field.height_at(p.x, p.y);
    if p.z < h {
        p.z = h;
    }
    Some(HapticState { hip: first, proxy: p, ..HapticState::at(p) })
}

/// One tick per trajectory sample, recording the post-tick state.
pub fn run_trajectory<S: Scalar>(
    field: &DepthField<S>,
    traj: &Trajectory<S>,
    params: &RenderParams<S>,
    timing: Timing,
) -> Result<ForceTrace<S>> {
    params.validate()?;
    if !field.is_filled() {
        return Err(Error::UnfilledHoles);
    }
    check_consecutive(traj)?;
    let Some(mut state) = initial_state(field, traj) else {
        return Ok(ForceTrace::default());
    };
    let mut samples = Vec::with_capacity(traj.len());
    for s in &traj.samples {
        let t = proxy::tick(&state, s.hip, field, params)?;
        state = t.state;
        samples.push(TraceSample {
            t_ms: s.t_ms,
            hip: state.hip,
            proxy: state.proxy,
            force: state.force,
            in_contact: state.in_contact,
            tick_us: match timing {
                Timing::Measured => t.elapsed.as_secs_f64() * 1e6,
                Timing::Omitted => 0.0,
            },
        });
    }
    Ok(ForceTrace { samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyStats {
    pub ticks: usize,
    pub mean_us: f64,
    pub p50_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
    /// Ticks longer than the budget.
    pub overrun_count: usize,
    pub budget_us: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles over the given durations.
    pub fn from_durations(durations_us: &[f64], budget_us: f64) -> Self {
        if durations_us.is_empty() {
            return Self { budget_us, ..Self::default() };
        }
        let mut sorted = durations_us.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let rank = |p: f64| sorted[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            ticks: n,
            mean_us: sorted.iter().sum::<f64>() / n as f64,
            p50_us: rank(0.50),
            p99_us: rank(0.99),
            max_us: sorted[n - 1],
            overrun_count: sorted.iter().filter(|&&d| d > budget_us).count(),
            budget_us,
        }
    }
}

impl fmt::Display for LatencyStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ticks={} mean_us={:.3} p50_us={:.3} p99_us={:.3} max_us={:.3} overruns={} budget_us={}",
            self.ticks, self.mean_us, self.p50_us, self.p99_us, self.max_us, self.overrun_count, self.budget_us
        )
    }
}

/// Replays the trajectory `repeats` times after one discarded warm-up pass
/// and aggregates every tick duration.
pub fn benchmark_latency<S: Scalar>(
    field: &DepthField<S>,
    traj: &Trajectory<S>,
    params: &RenderParams<S>,
    repeats: usize,
) -> Result<LatencyStats> {
    if repeats == 0 {
        return Err(Error::Input("repeats must be at least 1".into()));
    }
    let budget_us = params.tick_budget.as_secs_f64() * 1e6;
    run_trajectory(field, traj, params, Timing::Omitted)?;
    let mut durations = Vec::with_capacity(traj.len() * repeats);
    for _ in 0..repeats {
        let trace = run_trajectory(field, traj, params, Timing::Measured)?;
        durations.extend(trace.samples.iter().map(|s| s.tick_us));
    }
    Ok(LatencyStats::from_durations(&durations, budget_us))
}

/// Holds the calling thread at real-time FIFO priority, the way a haptic
/// servo loop is normally run, and restores the previous policy on drop.
///
/// Best effort: without the privilege (or off Linux) nothing changes and
/// [`RealtimeGuard::active`] is false. Keep the guarded section short; the
/// kernel throttles real-time threads that hog the CPU for most of a second.
pub struct RealtimeGuard {
    #[cfg(target_os = "linux")]
    prev: Option<(libc::c_int, libc::sched_param)>,
}

impl RealtimeGuard {
    pub fn acquire() -> Self {
        #[cfg(target_os = "linux")]
        {
            // SAFETY: plain syscalls on the current thread with valid out-params.
            unsafe {
                let me = libc::pthread_self();
                let mut policy = 0;
                let mut prev = std::mem::zeroed::<libc::sched_param>();
                if libc::pthread_getschedparam(me, &mut policy, &mut prev) != 0 {
                    return Self { prev: None };
                }
                let mut p = std::mem::zeroed::<libc::sched_param>();
                p.sched_priority = (libc::sched_get_priority_max(libc::SCHED_FIFO) / 2).max(1);
                if libc::pthread_setschedparam(me, libc::SCHED_FIFO, &p) != 0 {
                    return Self { prev: None };
                }
                Self { prev: Some((policy, prev)) }
            }
        }
        #[cfg(not(target_os = "linux"))]
        Self {}
    }

    pub fn active(&self) -> bool {
        #[cfg(target_os = "linux")]
        return self.prev.is_some();
        #[cfg(not(target_os = "linux"))]
        false
    }
}

impl Drop for RealtimeGuard {
    fn drop(&mut self) {
        #[cfg(target_os = "linux")]
        if let Some((policy, p)) = self.prev.take() {
            // SAFETY: restores the parameters read in `acquire`.
            unsafe {
                libc::pthread_setschedparam(libc::pthread_self(), policy, &p);
            }
        }
    }
}

/// Limits used by [`check_phases`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseLimits {
    pub delta_n: f64,
    pub max_iters: u32,
    pub eps_converge: f64,
    /// Ticks allowed for the proxy to settle after the HIP stops.
    pub settle_ticks: usize,
}

impl PhaseLimits {
    pub fn from_params<S: Scalar>(p: &RenderParams<S>) -> Self {
        Self {
            delta_n: p.delta_n.to_f64_lossless(),
            max_iters: p.max_iters,
            eps_converge: p.eps_converge.to_f64_lossless(),
            settle_ticks: 10,
        }
    }

    /// Largest proxy displacement allowed between two moving ticks.
    pub fn motion_cap(&self) -> f64 {
        2.0 * self.max_iters as f64 * self.delta_n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Free space: HIP and proxy together, no force.
    Free,
    /// In contact while the HIP moves.
    Moving,
    /// In contact with the HIP held still.
    Hold,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Free => "OA",
            Phase::Moving => "AB",
            Phase::Hold => "BC",
        }
    }
}

/// Maximal run of ticks with the same phase; indices into the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSegment {
    pub phase: Phase,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseReport {
    pub segments: Vec<PhaseSegment>,
}

impl PhaseReport {
    pub fn phases(&self) -> Vec<Phase> {
        let mut v: Vec<Phase> = self.segments.iter().map(|s| s.phase).collect();
        v.dedup();
        v
    }

    pub fn contains(&self, phase: Phase) -> bool {
        self.segments.iter().any(|s| s.phase == phase)
    }
}

impl fmt::Display for PhaseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.segments {
            writeln!(f, "PASS phase={} ticks={}..{}", s.phase.label(), s.start, s.end)?;
        }
        Ok(())
    }
}

/// A violated phase assertion.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFailure {
    pub phase: Phase,
    pub t_ms: u64,
    pub message: String,
}

impl fmt::Display for PhaseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FAIL phase={} t_ms={} reason={}", self.phase.label(), self.t_ms, self.message)
    }
}

impl std::error::Error for PhaseFailure {}

fn classify<S: Scalar>(trace: &ForceTrace<S>) -> Vec<Phase> {
    trace
        .samples
        .iter()
        .enumerate()
        .map(|(k, s)| {
            if !s.in_contact {
                Phase::Free
            } else if k > 0 && trace.samples[k - 1].hip == s.hip {
                Phase::Hold
            } else {
                Phase::Moving
            }
        })
        .collect()
}

/// Splits a trace into free / moving-contact / hold segments and checks:
/// no force in free space, bounded proxy motion while moving, and a
/// stationary proxy once a hold has lasted `settle_ticks`.
pub fn check_phases<S: Scalar>(trace: &ForceTrace<S>, limits: &PhaseLimits) -> Result<PhaseReport, PhaseFailure> {
    let phases = classify(trace);
    let mut segments: Vec<PhaseSegment> = Vec::new();
    for (k, &phase) in phases.iter().enumerate() {
        match segments.last_mut() {
            Some(seg) if seg.phase == phase => seg.end = k + 1,
            _ => segments.push(PhaseSegment { phase, start: k, end: k + 1 }),
        }
    }

    let s = &trace.samples;
    let fail = |phase, k: usize, message: String| PhaseFailure { phase, t_ms: s[k].t_ms, message };
    let cap = limits.motion_cap();
    for seg in &segments {
        match seg.phase {
            Phase::Free => {
                if let Some(k) = (seg.start..seg.end).find(|&k| s[k].force.norm() != S::zero()) {
                    return Err(fail(Phase::Free, k, format!("force {} N in free space", s[k].force.norm())));
                }
            }
            Phase::Moving => {
                for k in seg.start.max(1)..seg.end {
                    let d = s[k].proxy.distance(s[k - 1].proxy).to_f64_lossless();
                    if d > cap {
                        return Err(fail(Phase::Moving, k, format!("proxy jumped {d} mm, cap {cap} mm")));
                    }
                }
            }
            Phase::Hold => {
                for k in (seg.start + limits.settle_ticks).max(1)..seg.end {
                    let d = s[k].proxy.distance(s[k - 1].proxy).to_f64_lossless();
                    if d >= limits.eps_converge {
                        return Err(fail(
                            Phase::Hold,
                            k,
                            format!("proxy moved {d} mm after {} settle ticks", limits.settle_ticks),
                        ));
                    }
                }
            }
        }
    }
    Ok(PhaseReport { segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::Vec3;

    #[test]
    fn empty_stats_for_empty_input() {
        let s = LatencyStats::from_durations(&[], 1000.0);
        assert_eq!(s.ticks, 0);
        assert_eq!(s.overrun_count, 0);
    }

    #[test]
    fn nearest_rank_percentiles() {
        let d: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = LatencyStats::from_durations(&d, 99.5);
        assert_eq!(s.p50_us, 50.0);
        assert_eq!(s.p99_us, 99.0);
        assert_eq!(s.max_us, 100.0);
        assert_eq!(s.mean_us, 50.5);
        assert_eq!(s.overrun_count, 1);
        assert!(s.mean_us <= s.max_us);
    }

    #[test]
    fn gap_in_trajectory_is_rejected() {
        let f = DepthField::constant(4, 4, 1.0, 0.0).unwrap();
        let mut t = Trajectory::from_points([Vec3::new(1.0, 1.0, 2.0), Vec3::new(1.0, 1.0, 2.0)]);
        t.samples[1].t_ms = 5;
        assert!(matches!(run_trajectory(&f, &t, &RenderParams::default(), Timing::Omitted), Err(Error::Input(_))));
    }

    #[test]
    fn empty_trajectory_gives_empty_trace_and_stats() {
        let f = DepthField::constant(4, 4, 1.0, 0.0).unwrap();
        let t = Trajectory::<f64>::default();
        let p = RenderParams::default();
        assert!(run_trajectory(&f, &t, &p, Timing::Omitted).unwrap().samples.is_empty());
        assert_eq!(benchmark_latency(&f, &t, &p, 1).unwrap().ticks, 0);
    }

    #[test]
    fn force_in_free_space_is_flagged() {
        let z = Vec3::new(0.0, 0.0, 0.0);
        let sample = |t, force| TraceSample { t_ms: t, hip: z, proxy: z, force, in_contact: false, tick_us: 0.0 };
        let trace = ForceTrace { samples: vec![sample(0, z), sample(1, Vec3::new(0.0, 0.0, 1.0))] };
        let err = check_phases(&trace, &PhaseLimits::from_params(&RenderParams::<f64>::default())).unwrap_err();
        assert_eq!((err.phase, err.t_ms), (Phase::Free, 1));
        assert!(err.to_string().starts_with("FAIL phase=OA t_ms=1"));
    }
}
