//! `depthtouch`: replay HIP trajectories against a depth grid, benchmark tick
//! latency, build pyramids and check force-trace phases.
//!
//! Exit status is 0 on success, 1 when a check fails (with a `FAIL ...` line
//! on stdout) and 2 on usage or I/O errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use depthtouch_core::fixtures::{self, Surface};
use depthtouch_core::io::{self, GridFormat};
use depthtouch_core::workspace::DEFAULT_WORKSPACE_MM;
use depthtouch_core::{
    benchmark_latency, build_pyramid, check_phases, run_trajectory, select_roi, DepthField, PhaseLimits, RealtimeGuard,
    RenderParams, RoiSelection, Timing,
};

#[derive(Parser)]
#[command(name = "depthtouch", version, about = "Haptic rendering of depth grids")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Replay a trajectory and write the force trace.
    Run(RunArgs),
    /// Measure per-tick latency over repeated replays.
    Bench(BenchArgs),
    /// Build a Gaussian pyramid and write one .mhdf per level.
    Pyramid(PyramidArgs),
    /// Check the free / moving / hold structure of a force trace.
    CheckPhases(CheckArgs),
    /// Write a synthetic surface and one of the canonical trajectories.
    Demo(DemoArgs),
}

#[derive(Args)]
struct Engine {
    /// Depth grid, `.csv` or `.mhdf`. Holes are filled on load.
    #[arg(long)]
    field: PathBuf,
    /// Trajectory CSV (`t_ms,x_mm,y_mm,z_mm`).
    #[arg(long)]
    trajectory: PathBuf,
    /// Stiffness, N/mm.
    #[arg(long, default_value_t = 0.5)]
    k: f64,
    /// Proxy step length, mm.
    #[arg(long, default_value_t = 0.1)]
    delta_n: f64,
    #[arg(long, default_value_t = 50)]
    max_iters: u32,
    #[arg(long, default_value_t = 1000)]
    budget_us: u64,
    /// Render a pyramid level instead of the raw grid. The trajectory is then
    /// in workspace mm.
    #[arg(long)]
    level: Option<usize>,
    /// Window on that level: `x,y,w,h` in nodes. Defaults to the whole level.
    #[arg(long, value_parser = parse_window, requires = "level")]
    window: Option<[usize; 4]>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    engine: Engine,
    #[arg(long)]
    out: PathBuf,
    /// Record wall-clock tick durations (the trace is then not reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    engine: Engine,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Run at real-time FIFO priority when permitted.
    #[arg(long)]
    realtime: bool,
    /// Fail if the mean tick exceeds this many microseconds.
    #[arg(long)]
    max_mean_us: Option<f64>,
    /// Fail if the p99 tick exceeds this many microseconds.
    #[arg(long)]
    max_p99_us: Option<f64>,
    /// Fail on any tick over the budget.
    #[arg(long)]
    no_overruns: bool,
}

#[derive(Args)]
struct PyramidArgs {
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    levels: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Parameters the trace was rendered with; they set the motion cap.
    #[arg(long, default_value_t = 0.1)]
    delta_n: f64,
    #[arg(long, default_value_t = 50)]
    max_iters: u32,
    #[arg(long, default_value_t = 1e-3)]
    eps_converge: f64,
    #[arg(long, default_value_t = 10)]
    settle_ticks: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Script {
    FreeSpace,
    DescendHold,
    CurvedSlide,
    ContactHeavy,
}

#[derive(Clone, Copy, ValueEnum)]
enum SurfaceArg {
    Flat,
    Ramp,
    Paraboloid,
    SphereCap,
    Sine,
    Holed,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, value_enum)]
    surface: SurfaceArg,
    /// Nodes per side.
    #[arg(long, default_value_t = 101)]
    n: usize,
    /// Grid output; format from the extension. Holes are left unfilled.
    #[arg(long)]
    field_out: PathBuf,
    #[arg(long, value_enum)]
    script: Option<Script>,
    #[arg(long, requires = "script")]
    trajectory_out: Option<PathBuf>,
}

fn parse_window(s: &str) -> Result<[usize; 4], String> {
    let parts: Vec<_> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
    match parts.as_slice() {
        [Ok(x), Ok(y), Ok(w), Ok(h)] => Ok([*x, *y, *w, *h]),
        _ => Err(format!("expected x,y,w,h as four non-negative integers, got {s:?}")),
    }
}

enum Outcome {
    Ok,
    Fail(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(a) => run(a),
        Cmd::Bench(a) => bench(a),
        Cmd::Pyramid(a) => pyramid(a),
        Cmd::CheckPhases(a) => phases(a),
        Cmd::Demo(a) => demo(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Fail(line)) => {
            println!("{line}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_field(path: &Path) -> Result<DepthField<f64>> {
    let raw: DepthField<f64> = io::load_depth_grid(path, GridFormat::from_path(path))
        .with_context(|| format!("loading {}", path.display()))?;
    Ok(raw.fill_holes()?)
}

fn params(e: &Engine) -> Result<RenderParams<f64>> {
    let p = RenderParams {
        stiffness_k: e.k,
        delta_n: e.delta_n,
        max_iters: e.max_iters,
        tick_budget: Duration::from_micros(e.budget_us),
        ..RenderParams::default()
    };
    p.validate()?;
    Ok(p)
}

/// The field the trajectory is replayed against: the raw grid, or a pyramid
/// window fitted to the workspace.
fn render_field(e: &Engine) -> Result<DepthField<f64>> {
    let field = load_field(&e.field)?;
    let Some(level) = e.level else {
        return Ok(field);
    };
    let pyr = Arc::new(build_pyramid(&field, level + 1)?);
    let sel = match e.window {
        Some([x, y, w, h]) => RoiSelection { level, x, y, w, h },
        None => RoiSelection::full(&pyr, level)?,
    };
    let (local, mapping) = select_roi(&pyr, &sel, DEFAULT_WORKSPACE_MM)?;
    Ok(mapping.to_workspace_field(&local)?)
}

fn run(a: RunArgs) -> Result<Outcome> {
    let p = params(&a.engine)?;
    let field = render_field(&a.engine)?;
    let traj = io::read_trajectory(&a.engine.trajectory)?;
    let timing = if a.timing { Timing::Measured } else { Timing::Omitted };
    let trace = run_trajectory(&field, &traj, &p, timing)?;
    io::write_force_trace(&trace, &a.out)?;
    let contact = trace.samples.iter().filter(|s| s.in_contact).count();
    let peak = trace.samples.iter().map(|s| s.force.norm()).fold(0.0, f64::max);
    println!(
        "OK run ticks={} contact_ticks={contact} peak_force_n={peak:.6} out={}",
        trace.samples.len(),
        a.out.display()
    );
    Ok(Outcome::Ok)
}

fn bench(a: BenchArgs) -> Result<Outcome> {
    let p = params(&a.engine)?;
    let field = render_field(&a.engine)?;
    let traj = io::read_trajectory(&a.engine.trajectory)?;
    let (stats, rt) = {
        let guard = a.realtime.then(RealtimeGuard::acquire);
        let stats = benchmark_latency(&field, &traj, &p, a.repeats)?;
        (stats, guard.is_some_and(|g| g.active()))
    };
    println!("{stats} realtime={rt}");
    let mut failures = Vec::new();
    if let Some(limit) = a.max_mean_us {
        if stats.mean_us > limit {
            failures.push(format!("metric=mean_us value={:.3} limit={limit}", stats.mean_us));
        }
    }
    if let Some(limit) = a.max_p99_us {
        if stats.p99_us > limit {
            failures.push(format!("metric=p99_us value={:.3} limit={limit}", stats.p99_us));
        }
    }
    if a.no_overruns && stats.overrun_count > 0 {
        failures.push(format!("metric=overruns value={} limit=0", stats.overrun_count));
    }
    Ok(match failures.first() {
        None => Outcome::Ok,
        Some(f) => Outcome::Fail(format!("FAIL bench {f}")),
    })
}

fn pyramid(a: PyramidArgs) -> Result<Outcome> {
    if a.levels == 0 {
        bail!("--levels must be at least 1");
    }
    let field = load_field(&a.field)?;
    let pyr = build_pyramid(&field, a.levels)?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    for (l, level) in pyr.levels().iter().enumerate() {
        let path = a.out_dir.join(format!("level_{l}.mhdf"));
        io::save_depth_grid(level, &path, GridFormat::Mhdf)?;
        println!(
            "level={l} width={} height={} spacing_mm={} out={}",
            level.width(),
            level.height(),
            level.spacing(),
            path.display()
        );
    }
    Ok(Outcome::Ok)
}

fn phases(a: CheckArgs) -> Result<Outcome> {
    let trace = io::read_force_trace::<f64>(&a.trace)?;
    let limits = PhaseLimits {
        delta_n: a.delta_n,
        max_iters: a.max_iters,
        eps_converge: a.eps_converge,
        settle_ticks: a.settle_ticks,
    };
    Ok(match check_phases(&trace, &limits) {
        Ok(report) => {
            print!("{report}");
            Outcome::Ok
        }
        Err(fail) => Outcome::Fail(fail.to_string()),
    })
}

fn demo(a: DemoArgs) -> Result<Outcome> {
    let surface = match a.surface {
        SurfaceArg::Flat => Surface::Flat,
        SurfaceArg::Ramp => Surface::Ramp,
        SurfaceArg::Paraboloid => Surface::Paraboloid,
        SurfaceArg::SphereCap => Surface::SphereCap,
        SurfaceArg::Sine => Surface::SineTexture,
        SurfaceArg::Holed => Surface::Holed,
    };
    if a.n < 2 {
        bail!("--n must be at least 2");
    }
    let field = surface.sample::<f64>(a.n)?;
    io::save_depth_grid(&field, &a.field_out, GridFormat::from_path(&a.field_out))?;
    println!("field={} n={} out={}", surface.name(), a.n, a.field_out.display());
    if let (Some(script), Some(out)) = (a.script, a.trajectory_out) {
        let traj = match script {
            Script::FreeSpace => fixtures::free_space::<f64>(),
            Script::DescendHold => fixtures::descend_hold(),
            Script::CurvedSlide => fixtures::curved_slide(),
            Script::ContactHeavy => fixtures::contact_heavy(10_000),
        };
        io::write_trajectory(&traj, &out)?;
        println!("trajectory ticks={} out={}", traj.len(), out.display());
    }
    Ok(Outcome::Ok)
}
