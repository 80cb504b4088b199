use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample rate mismatch: config expects {expected} Hz, signal is {found} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },

    #[error("empty input")]
    EmptyInput,

    #[error("signal of {len} samples is shorter than one frame ({frame_length} samples)")]
    SignalTooShort { len: usize, frame_length: usize },

    #[error("invalid STFT configuration: {0}")]
    InvalidConfig(String),

    #[error("window violates the constant-overlap-add condition (relative deviation {deviation:.3e})")]
    ColaViolation { deviation: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("degenerate shape {rows}x{cols}: need at least 2x2")]
    DegenerateShape { rows: usize, cols: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("silent reference")]
    SilentReference,

    #[error("composite {composite} requires the `{term}` term")]
    MissingTerm {
        composite: &'static str,
        term: &'static str,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
