use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("raster {width}x{height} needs {expected} bytes, got {actual}")]
    RasterSize {
        width: u32,
        height: u32,
        expected: usize,
        actual: usize,
    },

    #[error("sprite has no pixel with alpha > 0")]
    EmptySprite,

    #[error("invalid transform: {0}")]
    InvalidTransform(&'static str),

    #[error("transform collapses a {width}x{height} sprite to zero size at scale {scale}")]
    DegenerateTransform { width: u32, height: u32, scale: f64 },

    #[error("sprite {width}x{height} at ({x0}, {y0}) exceeds {bg_width}x{bg_height} background")]
    OutOfBounds {
        x0: u32,
        y0: u32,
        width: u32,
        height: u32,
        bg_width: u32,
        bg_height: u32,
    },

    #[error("invalid box: {0}")]
    InvalidBox(&'static str),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("transformed sprite `{source_id}` is {width}x{height}, larger than the {bg_width}x{bg_height} output")]
    SpriteTooLarge {
        source_id: String,
        width: u32,
        height: u32,
        bg_width: u32,
        bg_height: u32,
    },

    #[error("{skipped} object(s) could not be placed without overlap")]
    CountShortfall { skipped: usize },

    #[error("no sprites available for class {class_id}")]
    EmptyPool { class_id: u32 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("class {class_id} has no ground truth")]
    NoGroundTruth { class_id: u32 },

    #[error("no class with ground truth to evaluate")]
    EmptyEvaluation,

    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
}
