use thiserror::Error;

use crate::mapping::Dims;

#[derive(Debug, Error)]
pub enum Error {
    #[error("channel {channel} = {value} is outside [0, 255]")]
    Domain { channel: &'static str, value: f64 },

    #[error("point ({x}, {y}) is outside the {width}x{height} frame")]
    Bounds {
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },

    #[error("calibration window must be 1, 3 or 5, got {0}")]
    InvalidWindow(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("PPM parse error at byte {offset}: {reason}")]
    Ppm { offset: usize, reason: String },

    #[error("frame stream error at byte {offset}: {reason}")]
    Stream { offset: u64, reason: String },

    #[error("frame index {got} does not follow {prev}")]
    Sequence { prev: u64, got: u64 },

    #[error("frame is {got}, session expects {expected}")]
    DimsMismatch { expected: Dims, got: Dims },

    #[error("scenario script line {line}: {reason}")]
    Script { line: usize, reason: String },

    #[error("bad signature record: {0}")]
    Signature(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
