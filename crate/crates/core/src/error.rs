use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulation and control library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("wind speed {v} m/s is at or below the floor of {floor} m/s; tip speed ratio undefined")]
    LowWind { v: f64, floor: f64 },

    #[error("invalid parameter `{key}`: {reason}")]
    Parameter { key: String, reason: String },

    #[error("invalid aerodynamic map {}: {reason}", path.display())]
    MapFile { path: PathBuf, reason: String },

    #[error("no equilibrium: {0}")]
    NoEquilibrium(String),

    #[error("sector decomposition failed: {0}")]
    Decomposition(String),

    #[error("degenerate sector for scheduling term `{0}` (zero width)")]
    DegenerateSector(&'static str),

    #[error("gain synthesis failed for vertex {vertex}: {reason}")]
    Synthesis { vertex: usize, reason: String },

    #[error("participation factor {u_c} outside [-1/2, 1/2]")]
    Participation { u_c: f64 },

    #[error("empty window")]
    EmptyWindow,

    #[error("integration blow-up at t = {t} s: non-finite derivative")]
    Blowup { t: f64 },

    #[error("configuration error in `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parameter {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
