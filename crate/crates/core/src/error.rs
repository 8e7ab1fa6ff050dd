use std::io;

use thiserror::Error;

/// Errors produced by the calibration and conversion pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("truncated data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("sample out of range: value {value} at index {index} exceeds {bit_depth}-bit range")]
    SampleOutOfRange {
        index: usize,
        value: u32,
        bit_depth: u8,
    },

    #[error("invalid bit depth {0}")]
    InvalidBitDepth(u8),

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("crop rectangle {rect} out of bounds for {width}x{height} image")]
    CropOutOfBounds {
        rect: String,
        width: u32,
        height: u32,
    },

    #[error("png error: {0}")]
    Png(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("wavelength {wavelength} nm outside spectrum support [{min}, {max}]")]
    OutsideSupport { wavelength: f64, min: f64, max: f64 },

    #[error("spectra have no overlapping wavelength range")]
    EmptyIntersection,

    #[error("photon counts not monotone for channel {channel}: L{from} = {from_value} > L{to} = {to_value}")]
    NonMonotone {
        channel: String,
        from: usize,
        to: usize,
        from_value: f64,
        to_value: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("histogram: {0}")]
    Histogram(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("too many defective pixels: {defective} of {total} (> 20%)")]
    TooManyDefects { defective: usize, total: usize },

    #[error("calibration file version {found} not supported (expected {expected})")]
    VersionMismatch { found: u8, expected: u8 },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("level {level} absent from lookup table group {group}")]
    LevelNotInLut { level: u16, group: usize },

    #[error("empty input: {0}")]
    Empty(String),
}

impl Error {
    /// Short stable category name, used for machine-readable error lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::MalformedHeader(_) | Error::Truncated { .. } | Error::Png(_) => "format",
            Error::SampleOutOfRange { .. } | Error::InvalidBitDepth(_) => "range",
            Error::InvalidDimensions(_) | Error::DimensionMismatch(_) => "dimension",
            Error::CropOutOfBounds { .. } => "crop",
            Error::Parse { .. } => "parse",
            Error::InvalidSpectrum(_)
            | Error::OutsideSupport { .. }
            | Error::EmptyIntersection
            | Error::NonMonotone { .. } => "spectrum",
            Error::InvalidParameter(_) => "parameter",
            Error::Histogram(_) => "histogram",
            Error::TooManyDefects { .. } => "calibration",
            Error::VersionMismatch { .. } | Error::Checksum { .. } => "integrity",
            Error::LevelNotInLut { .. } => "lut",
            Error::Empty(_) => "empty",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
