use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("query ({x}, {y}) lies outside the grid extent [0, {max_x}] x [0, {max_y}]")]
    OutOfExtent { x: f64, y: f64, max_x: f64, max_y: f64 },

    #[error("degenerate segment: origin and target coincide")]
    DegenerateSegment,

    #[error("ray origin ({x}, {y}, {z}) is below the surface")]
    OriginPenetrating { x: f64, y: f64, z: f64 },

    #[error("invalid depth field: {0}")]
    InvalidField(String),

    #[error("level {level} is {width}x{height}; reduction needs at least 5x5")]
    TooSmall { level: usize, width: usize, height: usize },

    #[error("invalid region of interest: {0}")]
    Selection(String),

    #[error("invalid render parameters: {0}")]
    Params(String),

    #[error("field still has unfilled holes")]
    UnfilledHoles,

    #[error("every cell is a hole and no explicit z_max was given")]
    AllHoles,

    #[error("no point falls inside the {width}x{height} grid")]
    EmptyCloud { width: usize, height: usize },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{path}: byte offset {offset}: {message}")]
    Binary { path: PathBuf, offset: usize, message: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
