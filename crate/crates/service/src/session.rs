//! One haptic engine per session, ticked by its own thread.
//!
//! The tick thread is the only writer of the engine. Commands arrive through
//! an unbounded queue drained at each tick boundary; snapshots leave through a
//! `watch` channel, so a slow reader only ever sees the latest one and can
//! never hold up the loop.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use depthtouch_core::{Engine, LatencyStats, RenderParams, RoiSelection, Vec3};
use tokio::sync::{mpsc, oneshot, watch};

use crate::assets::Asset;
use crate::protocol::{Snapshot, TickStats};

#[derive(Debug, Clone, Copy)]
pub struct SessionConfig {
    pub tick_hz: u32,
    pub snapshot_hz: u32,
    /// Tick durations kept for the rolling stats.
    pub stats_window: usize,
    /// A session with no subscriber for this long shuts itself down.
    pub idle_timeout: Duration,
    pub workspace_extent: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            tick_hz: 1000,
            snapshot_hz: 60,
            stats_window: 1000,
            idle_timeout: Duration::from_secs(60),
            workspace_extent: depthtouch_core::workspace::DEFAULT_WORKSPACE_MM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Command {
    Hip(Vec3<f64>),
    Roi(RoiSelection),
    Level(i32),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CommandError {
    InvalidRoi(String),
    InvalidLevel(String),
    Gone,
}

struct Request {
    cmd: Command,
    reply: oneshot::Sender<Result<u64, CommandError>>,
}

pub struct Session {
    pub id: u64,
    pub asset: String,
    commands: mpsc::UnboundedSender<Request>,
    snapshots: watch::Receiver<Snapshot>,
    stop: Arc<AtomicBool>,
    thread: Mutex<Option<JoinHandle<()>>>,
}

impl Session {
    /// Builds the engine (validating `params` and `roi`) and starts ticking.
    pub fn spawn(
        id: u64,
        asset: &Asset,
        roi: RoiSelection,
        params: RenderParams<f64>,
        config: SessionConfig,
    ) -> depthtouch_core::Result<Self> {
        let engine = Engine::new(asset.pyramid.clone(), roi, params, config.workspace_extent)?;
        let (tx, rx) = mpsc::unbounded_channel();
        // The tick thread owns the only sender: once it exits, every
        // subscriber's `changed()` fails.
        let (publish, snapshots) = watch::channel(snapshot(&engine, 0, 0, TickStats::default()));
        let stop = Arc::new(AtomicBool::new(false));
        let thread = {
            let stop = stop.clone();
            std::thread::Builder::new()
                .name(format!("session-{id}"))
                .spawn(move || tick_loop(engine, rx, &publish, &stop, config))
                .map_err(depthtouch_core::Error::Io)?
        };
        Ok(Self { id, asset: asset.id.clone(), commands: tx, snapshots, stop, thread: Mutex::new(Some(thread)) })
    }

    /// Queues a command; resolves once the tick thread has applied it, with
    /// the seq of the first snapshot that reflects it.
    pub async fn command(&self, cmd: Command) -> Result<u64, CommandError> {
        let (reply, rx) = oneshot::channel();
        self.commands.send(Request { cmd, reply }).map_err(|_| CommandError::Gone)?;
        rx.await.unwrap_or(Err(CommandError::Gone))
    }

    pub fn subscribe(&self) -> watch::Receiver<Snapshot> {
        self.snapshots.clone()
    }

    pub fn latest(&self) -> Snapshot {
        *self.snapshots.borrow()
    }

    pub fn is_live(&self) -> bool {
        !self.stop.load(Ordering::Acquire) && !self.commands.is_closed()
    }

    /// Stops the tick thread and waits for it.
    pub fn close(&self) {
        self.stop.store(true, Ordering::Release);
        if let Some(t) = self.thread.lock().unwrap_or_else(|e| e.into_inner()).take() {
            let _ = t.join();
        }
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Release);
    }
}

fn snapshot(engine: &Engine<f64>, seq: u64, t: u64, tick_stats: TickStats) -> Snapshot {
    let s = engine.state();
    Snapshot {
        seq,
        t,
        hip: s.hip,
        proxy: s.proxy,
        force: s.force,
        in_contact: s.in_contact,
        converged: s.converged,
        roi: engine.roi(),
        mapping_version: engine.mapping_version(),
        workspace_extent: engine.mapping().workspace_extent,
        lateral_scale: engine.mapping().lateral_scale,
        tick_stats,
    }
}

/// Linear HIP pursuit of the latest commanded target.
struct HipRamp {
    from: Vec3<f64>,
    to: Vec3<f64>,
    step: u32,
    steps: u32,
}

impl HipRamp {
    fn next(&mut self) -> Vec3<f64> {
        self.step = (self.step + 1).min(self.steps);
        self.from.lerp(self.to, self.step as f64 / self.steps as f64)
    }
}

fn apply(engine: &mut Engine<f64>, cmd: Command, ramp: &mut Option<HipRamp>, steps: u32) -> Result<(), CommandError> {
    match cmd {
        Command::Hip(to) => {
            *ramp = Some(HipRamp { from: engine.state().hip, to, step: 0, steps });
        }
        Command::Roi(sel) => {
            engine.switch_roi(sel).map_err(|e| CommandError::InvalidRoi(e.to_string()))?;
            *ramp = None;
        }
        Command::Level(delta) => {
            if delta != 1 && delta != -1 {
                return Err(CommandError::InvalidLevel(format!("delta must be +1 or -1, got {delta}")));
            }
            let sel = engine
                .roi()
                .step_level(engine.pyramid(), delta)
                .map_err(|e| CommandError::InvalidLevel(e.to_string()))?;
            engine.switch_roi(sel).map_err(|e| CommandError::InvalidLevel(e.to_string()))?;
            *ramp = None;
        }
    }
    Ok(())
}

fn tick_loop(
    mut engine: Engine<f64>,
    mut rx: mpsc::UnboundedReceiver<Request>,
    snapshots: &watch::Sender<Snapshot>,
    stop: &AtomicBool,
    config: SessionConfig,
) {
    let period = Duration::from_secs_f64(1.0 / config.tick_hz as f64);
    let ramp_steps = config.tick_hz.div_ceil(config.snapshot_hz).max(1);
    let budget_us = engine.params().tick_budget.as_secs_f64() * 1e6;
    let idle_ticks = (config.idle_timeout.as_secs_f64() * config.tick_hz as f64) as u64;
    let mut durations = VecDeque::with_capacity(config.stats_window);
    let mut overruns = 0u64;
    let mut ramp: Option<HipRamp> = None;
    let (mut t, mut seq) = (0u64, 0u64);
    let mut idle_since: Option<u64> = None;
    let mut next = Instant::now();

    while !stop.load(Ordering::Acquire) {
        loop {
            match rx.try_recv() {
                Ok(req) => {
                    let r = apply(&mut engine, req.cmd, &mut ramp, ramp_steps).map(|()| seq + 1);
                    let _ = req.reply.send(r);
                }
                Err(mpsc::error::TryRecvError::Empty) => break,
                Err(mpsc::error::TryRecvError::Disconnected) => return,
            }
        }

        let hip = match ramp.as_mut() {
            Some(r) => r.next(),
            None => engine.state().hip,
        };
        if let Ok(tick) = engine.tick(hip) {
            if durations.len() == config.stats_window {
                durations.pop_front();
            }
            durations.push_back(tick.elapsed.as_secs_f64() * 1e6);
            overruns += u64::from(tick.over_budget);
        }
        t += 1;

        // Publish whenever the snapshot clock crosses a boundary.
        if t * config.snapshot_hz as u64 / config.tick_hz as u64
            != (t - 1) * config.snapshot_hz as u64 / config.tick_hz as u64
        {
            seq += 1;
            let window: Vec<f64> = durations.iter().copied().collect();
            let s = LatencyStats::from_durations(&window, budget_us);
            snapshots.send_replace(snapshot(
                &engine,
                seq,
                t,
                TickStats { mean_us: s.mean_us, p99_us: s.p99_us, overruns },
            ));
            // The session handle itself holds one receiver.
            if snapshots.receiver_count() > 1 {
                idle_since = None;
            } else if t - *idle_since.get_or_insert(t) >= idle_ticks {
                stop.store(true, Ordering::Release);
                return;
            }
        }

        next += period;
        let now = Instant::now();
        if next > now {
            std::thread::sleep(next - now);
        } else if now - next > 50 * period {
            // Fell far behind (suspended host): resume the cadence from now.
            next = now;
        }
    }
}
