//! Depth grid, point cloud, trajectory and force trace files.
//!
//! Formats:
//!
//! * CSV depth grid: a `# spacing=<mm>` line (optionally `# z_max=<mm>`),
//!   then one comma-separated row per grid row. Empty, `nan` or non-finite
//!   cells become holes.
//! * `.mhdf` binary grid: 64-byte little-endian header (`MHDF`, version,
//!   width, height, spacing f64, z_max f64, flags), `width * height` f32
//!   samples in row-major order, then the hole mask packed LSB-first.
//! * Trajectory CSV: `t_ms,x_mm,y_mm,z_mm`.
//! * Force trace CSV: `t_ms,hip_x,hip_y,hip_z,proxy_x,proxy_y,proxy_z,fx,fy,fz,in_contact,tick_us`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scalar::{from_usize, Scalar};
use crate::surface::DepthField;
use crate::vec3::Vec3;

pub const MHDF_MAGIC: &[u8; 4] = b"MHDF";
pub const MHDF_VERSION: u32 = 1;
pub const MHDF_HEADER_LEN: usize = 64;
const FLAG_Z_MAX: u32 = 1;
const FLAG_HOLES: u32 = 2;

pub const TRAJECTORY_HEADER: &str = "t_ms,x_mm,y_mm,z_mm";
pub const TRACE_HEADER: &str = "t_ms,hip_x,hip_y,hip_z,proxy_x,proxy_y,proxy_z,fx,fy,fz,in_contact,tick_us";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    Csv,
    Mhdf,
}

impl GridFormat {
    /// Picks the format from the file extension; anything but `.csv` is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => GridFormat::Csv,
            _ => GridFormat::Mhdf,
        }
    }
}

pub fn load_depth_grid<S: Scalar>(path: &Path, format: GridFormat) -> Result<DepthField<S>> {
    match format {
        GridFormat::Csv => parse_csv_grid(&fs::read_to_string(path)?, path),
        GridFormat::Mhdf => decode_mhdf(&fs::read(path)?, path),
    }
}

pub fn save_depth_grid<S: Scalar>(field: &DepthField<S>, path: &Path, format: GridFormat) -> Result<()> {
    match format {
        GridFormat::Csv => fs::write(path, format_csv_grid(field))?,
        GridFormat::Mhdf => fs::write(path, encode_mhdf(field))?,
    }
    Ok(())
}

pub fn parse_csv_grid<S: Scalar>(text: &str, path: &Path) -> Result<DepthField<S>> {
    let err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut spacing = None;
    let mut z_max = None;
    let mut width = None;
    let mut values = Vec::new();
    let mut holes = Vec::new();

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let Some((key, val)) = meta.split_once('=') else { continue };
            let parsed: f64 = val
                .trim()
                .parse()
                .map_err(|_| err(line_no, format!("cannot parse {} value {:?}", key.trim(), val.trim())))?;
            if !parsed.is_finite() {
                return Err(err(line_no, format!("{} must be finite", key.trim())));
            }
            match key.trim() {
                "spacing" if parsed <= 0.0 => {
                    return Err(err(line_no, format!("spacing must be positive, got {parsed}")))
                }
                "spacing" => spacing = Some(parsed),
                "z_max" => z_max = Some(parsed),
                _ => {}
            }
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(err(line_no, format!("row has {} columns, expected {w}", cells.len())));
            }
            _ => {}
        }
        for (c, cell) in cells.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                values.push(S::zero());
                holes.push(true);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| err(line_no, format!("column {}: cannot parse {cell:?}", c + 1)))?;
            if v.is_finite() {
                values.push(S::lit(v));
                holes.push(false);
            } else {
                values.push(S::zero());
                holes.push(true);
            }
        }
    }

    let spacing = spacing.ok_or_else(|| err(1, "missing `# spacing=<mm>` header".into()))?;
    let width = width.ok_or_else(|| err(1, "no data rows".into()))?;
    let height = values.len() / width;
    DepthField::with_holes(width, height, S::lit(spacing), values, holes, z_max.map(S::lit))
        .map_err(|e| err(0, e.to_string()))
}

pub fn format_csv_grid<S: Scalar>(field: &DepthField<S>) -> String {
    let mut out = format!("# spacing={}\n", field.spacing().to_f64_lossless());
    if let Some(z) = field.explicit_z_max() {
        out.push_str(&format!("# z_max={}\n", z.to_f64_lossless()));
    }
    let w = field.width();
    for j in 0..field.height() {
        let row: Vec<String> = (0..w)
            .map(|i| {
                let k = j * w + i;
                if field.hole_mask()[k] && !field.is_filled() {
                    String::new()
                } else {
                    field.values()[k].to_f64_lossless().to_string()
                }
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn encode_mhdf<S: Scalar>(field: &DepthField<S>) -> Vec<u8> {
    let n = field.width() * field.height();
    let mut out = Vec::with_capacity(MHDF_HEADER_LEN + 4 * n + n.div_ceil(8));
    out.extend_from_slice(MHDF_MAGIC);
    out.extend_from_slice(&MHDF_VERSION.to_le_bytes());
    out.extend_from_slice(&(field.width() as u32).to_le_bytes());
    out.extend_from_slice(&(field.height() as u32).to_le_bytes());
    out.extend_from_slice(&field.spacing().to_f64_lossless().to_le_bytes());
    let z_max = field.explicit_z_max();
    out.extend_from_slice(&z_max.map_or(f64::NAN, |z| z.to_f64_lossless()).to_le_bytes());
    let mut flags = 0u32;
    if z_max.is_some() {
        flags |= FLAG_Z_MAX;
    }
    if field.hole_mask().iter().any(|&h| h) {
        flags |= FLAG_HOLES;
    }
    out.extend_from_slice(&flags.to_le_bytes());
    out.resize(MHDF_HEADER_LEN, 0);

    for v in field.values() {
        out.extend_from_slice(&(v.to_f64_lossless() as f32).to_le_bytes());
    }
    let mut bits = vec![0u8; n.div_ceil(8)];
    for (k, &h) in field.hole_mask().iter().enumerate() {
        if h {
            bits[k / 8] |= 1 << (k % 8);
        }
    }
    out.extend_from_slice(&bits);
    out
}

pub fn decode_mhdf<S: Scalar>(bytes: &[u8], path: &Path) -> Result<DepthField<S>> {
    let err = |offset: usize, message: String| Error::Binary { path: path.to_path_buf(), offset, message };
    if bytes.len() < MHDF_HEADER_LEN {
        return Err(err(bytes.len(), format!("file shorter than the {MHDF_HEADER_LEN}-byte header")));
    }
    if &bytes[0..4] != MHDF_MAGIC {
        return Err(err(0, "bad magic, expected MHDF".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != MHDF_VERSION {
        return Err(err(4, format!("unsupported version {version}")));
    }
    let width = u32_at(8) as usize;
    let height = u32_at(12) as usize;
    let spacing = f64_at(16);
    if !spacing.is_finite() || spacing <= 0.0 {
        return Err(err(16, format!("spacing must be positive and finite, got {spacing}")));
    }
    let flags = u32_at(32);
    let z_max = if flags & FLAG_Z_MAX != 0 {
        let z = f64_at(24);
        if !z.is_finite() {
            return Err(err(24, "z_max flagged but not finite".into()));
        }
        Some(S::lit(z))
    } else {
        None
    };
    let n = width.checked_mul(height).ok_or_else(|| err(8, "grid dimensions overflow".into()))?;
    let expected = MHDF_HEADER_LEN + 4 * n + n.div_ceil(8);
    if bytes.len() != expected {
        return Err(err(
            bytes.len().min(expected),
            format!("size mismatch: {width}x{height} grid needs {expected} bytes, file has {}", bytes.len()),
        ));
    }
    let mut values = Vec::with_capacity(n);
    let mut holes = Vec::with_capacity(n);
    let bits = &bytes[MHDF_HEADER_LEN + 4 * n..];
    for k in 0..n {
        let o = MHDF_HEADER_LEN + 4 * k;
        let v = f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let hole = bits[k / 8] & (1 << (k % 8)) != 0;
        if !v.is_finite() {
            if !hole {
                return Err(err(o, format!("non-finite sample at index {k}")));
            }
            values.push(S::zero());
        } else {
            values.push(S::lit(v as f64));
        }
        holes.push(hole);
    }
    DepthField::with_holes(width, height, S::lit(spacing), values, holes, z_max).map_err(|e| err(0, e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCloudSample<S> {
    pub x: S,
    pub y: S,
    pub z: S,
}

/// Bins points to their nearest grid node and keeps the highest `z` per node.
/// Nodes without points become holes.
pub fn rasterize_point_cloud<S: Scalar>(
    points: &[PointCloudSample<S>],
    width: usize,
    height: usize,
    spacing: S,
) -> Result<DepthField<S>> {
    if points.is_empty() {
        return Err(Error::Input("point cloud is empty".into()));
    }
    if width < 2 || height < 2 || !(spacing > S::zero()) {
        return Err(Error::Input(format!("invalid grid {width}x{height} at spacing {spacing}")));
    }
    let mut best: Vec<Option<S>> = vec![None; width * height];
    for (k, p) in points.iter().enumerate() {
        if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(Error::Input(format!("point {k} has non-finite coordinates")));
        }
        let gx = (p.x / spacing).round();
        let gy = (p.y / spacing).round();
        if gx < S::zero() || gy < S::zero() || gx >= from_usize(width) || gy >= from_usize(height) {
            continue;
        }
        let (i, j) = (gx.to_usize().unwrap_or(0), gy.to_usize().unwrap_or(0));
        let slot = &mut best[j * width + i];
        *slot = Some(slot.map_or(p.z, |z| z.max(p.z)));
    }
    if best.iter().all(Option::is_none) {
        return Err(Error::EmptyCloud { width, height });
    }
    let holes = best.iter().map(Option::is_none).collect();
    let values = best.into_iter().map(|v| v.unwrap_or_else(S::zero)).collect();
    DepthField::with_holes(width, height, spacing, values, holes, None)
}

/// Replaces holes by `z_max` (explicit, or the highest observed sample).
pub fn fill_holes<S: Scalar>(field: &DepthField<S>) -> Result<DepthField<S>> {
    field.fill_holes()
}

/// One HIP sample of a scripted trajectory, workspace coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample<S> {
    pub t_ms: u64,
    pub hip: Vec3<S>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory<S> {
    pub samples: Vec<TrajectorySample<S>>,
}

impl<S: Scalar> Trajectory<S> {
    /// Builds a trajectory with `t_ms = 0, 1, 2, ...`.
    pub fn from_points(points: impl IntoIterator<Item = Vec3<S>>) -> Self {
        let samples = points.into_iter().enumerate().map(|(k, hip)| TrajectorySample { t_ms: k as u64, hip }).collect();
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Sample recorded after each tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample<S> {
    pub t_ms: u64,
    pub hip: Vec3<S>,
    pub proxy: Vec3<S>,
    pub force: Vec3<S>,
    pub in_contact: bool,
    /// Measured tick duration in microseconds; 0 when timing was not recorded.
    pub tick_us: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForceTrace<S> {
    pub samples: Vec<TraceSample<S>>,
}

impl<S: Scalar> ForceTrace<S> {
    /// Checks that `t_ms` advances by exactly one per sample.
    pub fn validate(&self) -> Result<()> {
        for (k, w) in self.samples.windows(2).enumerate() {
            if w[1].t_ms != w[0].t_ms + 1 {
                return Err(Error::Input(format!(
                    "trace sample {}: t_ms {} does not follow {}",
                    k + 1,
                    w[1].t_ms,
                    w[0].t_ms
                )));
            }
        }
        Ok(())
    }
}

fn fields<'a>(line: &'a str, n: usize, path: &Path, line_no: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = line.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: format!("expected {n} columns, found {}", parts.len()),
        });
    }
    Ok(parts)
}

fn num<T: std::str::FromStr>(s: &str, col: &str, path: &Path, line_no: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: line_no,
        message: format!("{col}: cannot parse {s:?}"),
    })
}

fn finite<S: Scalar>(s: &str, col: &str, path: &Path, line_no: usize) -> Result<S> {
    let v: f64 = num(s, col, path, line_no)?;
    if !v.is_finite() {
        return Err(Error::Parse { path: path.to_path_buf(), line: line_no, message: format!("{col}: not finite") });
    }
    Ok(S::lit(v))
}

/// Data lines after the header, with 1-based line numbers.
fn data_lines<'a>(text: &'a str, header: &str, path: &Path) -> Result<impl Iterator<Item = (usize, &'a str)>> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
    match lines.next() {
        Some((_, h)) if h == header => {}
        Some((n, h)) => {
            return Err(Error::Parse { path: path.to_path_buf(), line: n, message: format!("unexpected header {h:?}") })
        }
        None => return Err(Error::Parse { path: path.to_path_buf(), line: 1, message: "empty file".into() }),
    }
    Ok(lines.filter(|(_, l)| !l.is_empty()))
}

pub fn parse_trajectory<S: Scalar>(text: &str, path: &Path) -> Result<Trajectory<S>> {
    let mut samples: Vec<TrajectorySample<S>> = Vec::new();
    for (n, line) in data_lines(text, TRAJECTORY_HEADER, path)? {
        let p = fields(line, 4, path, n)?;
        let t_ms: u64 = num(p[0], "t_ms", path, n)?;
        if let Some(last) = samples.last() {
            if t_ms <= last.t_ms {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n,
                    message: format!("t_ms {t_ms} is not after {}", last.t_ms),
                });
            }
        }
        let hip =
            Vec3::new(finite(p[1], "x_mm", path, n)?, finite(p[2], "y_mm", path, n)?, finite(p[3], "z_mm", path, n)?);
        samples.push(TrajectorySample { t_ms, hip });
    }
    Ok(Trajectory { samples })
}

pub fn read_trajectory<S: Scalar>(path: &Path) -> Result<Trajectory<S>> {
    parse_trajectory(&fs::read_to_string(path)?, path)
}

pub fn format_trajectory<S: Scalar>(traj: &Trajectory<S>) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for s in &traj.samples {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.t_ms,
            s.hip.x.to_f64_lossless(),
            s.hip.y.to_f64_lossless(),
            s.hip.z.to_f64_lossless()
        ));
    }
    out
}

pub fn write_trajectory<S: Scalar>(traj: &Trajectory<S>, path: &Path) -> Result<()> {
    fs::write(path, format_trajectory(traj))?;
    Ok(())
}

fn write_trace_to<S: Scalar>(trace: &ForceTrace<S>, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for s in &trace.samples {
        let f = |v: S| v.to_f64_lossless();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.t_ms,
            f(s.hip.x),
            f(s.hip.y),
            f(s.hip.z),
            f(s.proxy.x),
            f(s.proxy.y),
            f(s.proxy.z),
            f(s.force.x),
            f(s.force.y),
            f(s.force.z),
            u8::from(s.in_contact),
            s.tick_us
        )?;
    }
    Ok(())
}

pub fn format_force_trace<S: Scalar>(trace: &ForceTrace<S>) -> String {
    let mut buf = Vec::new();
    write_trace_to(trace, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("trace is ASCII")
}

pub fn write_force_trace<S: Scalar>(trace: &ForceTrace<S>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_trace_to(trace, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn parse_force_trace<S: Scalar>(text: &str, path: &Path) -> Result<ForceTrace<S>> {
    let mut samples = Vec::new();
    for (n, line) in data_lines(text, TRACE_HEADER, path)? {
        let p = fields(line, 12, path, n)?;
        let v = |a: usize, b: usize, c: usize| -> Result<Vec3<S>> {
            Ok(Vec3::new(finite(p[a], "x", path, n)?, finite(p[b], "y", path, n)?, finite(p[c], "z", path, n)?))
        };
        let in_contact = match p[10] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n,
                    message: format!("in_contact: expected 0 or 1, got {other:?}"),
                })
            }
        };
        samples.push(TraceSample {
            t_ms: num(p[0], "t_ms", path, n)?,
            hip: v(1, 2, 3)?,
            proxy: v(4, 5, 6)?,
            force: v(7, 8, 9)?,
            in_contact,
            tick_us: num(p[11], "tick_us", path, n)?,
        });
    }
    Ok(ForceTrace { samples })
}

pub fn read_force_trace<S: Scalar>(path: &Path) -> Result<ForceTrace<S>> {
    let file = fs::File::open(path)?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    parse_force_trace(&text, path)
}

/// Path used in error messages for in-memory parses.
pub fn memory_path() -> PathBuf {
    PathBuf::from("<memory>")
}
