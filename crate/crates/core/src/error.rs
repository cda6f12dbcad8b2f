use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::Axis;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid wire: {0}")]
    InvalidWire(String),

    #[error("invalid wire set: {0}")]
    InvalidWireSet(String),

    #[error("clearance must be positive and finite, got {0}")]
    InvalidClearance(f64),

    #[error("point lies on the axis of wire {wire}")]
    OnWireAxis { wire: usize },

    #[error("invalid measurement: flux density {0} T must be positive and finite")]
    InvalidMeasurement(f64),

    #[error("{family:?} family: expected at least {expected} wires, got {got}")]
    Arity {
        family: Axis,
        expected: usize,
        got: usize,
    },

    #[error("expected {expected} measurements, got {got}")]
    MeasurementCount { expected: usize, got: usize },

    #[error("{family:?} family: wire projections are collinear, lateration system is singular")]
    Singular { family: Axis },

    #[error("coordinate {0} has zero total fusion weight")]
    Unlocalizable(char),

    #[error("invalid phantom resolution {resolution} m for height {height} m")]
    InvalidResolution { resolution: f64, height: f64 },

    #[error("{path}:{line}: {msg}")]
    VoxelFile {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("body model is empty")]
    EmptyBody,

    #[error("no point results to summarize")]
    EmptyResults,

    #[error("slice {axis:?}={coordinate} m contains no body voxels")]
    EmptySlice { axis: Axis, coordinate: f64 },

    #[error("saturation: max in-body field {max_field:.6e} T exceeds limit {limit:.6e} T")]
    Saturation { max_field: f64, limit: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
