use thiserror::Error;

/// Which denominator of the boundary-angle expressions vanished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Denominator {
    /// `A − n·A1` (ON/OFF boundary).
    OnOff,
    /// `2A − n·A1` (saturation/triode boundary).
    SatTriode,
    /// `(1 − n)·A − n·A1` (triode NMF auxiliary angle).
    TriodeAux,
}

impl std::fmt::Display for Denominator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Denominator::OnOff => f.write_str("A - n*A1"),
            Denominator::SatTriode => f.write_str("2A - n*A1"),
            Denominator::TriodeAux => f.write_str("(1-n)*A - n*A1"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("degenerate configuration: denominator {0} is zero")]
    DegenerateConfig(Denominator),
    #[error("inconsistent boundary angles: {0}")]
    InconsistentAngles(String),
    #[error("degenerate waveform: {0}")]
    DegenerateWaveform(String),
    #[error("degenerate noise profile: {0}")]
    DegenerateNoise(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("root solver failed: {0}")]
    Solver(String),
    #[error("body bias has no control authority (gamma_body = 0)")]
    NoBodyControl,
    #[error("simulation diverged at step {step} (|v| = {magnitude:.3e} V)")]
    Instability { step: u64, magnitude: f64 },
    #[error("no oscillation: amplitude {amplitude:.3e} V below threshold {threshold:.3e} V at t = {time:.3e} s")]
    NoOscillation {
        amplitude: f64,
        threshold: f64,
        time: f64,
    },
    #[error("trace too short: minimum resolvable offset is {min_offset_hz:.3e} Hz")]
    Resolution { min_offset_hz: f64 },
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code for the error class. Codes are stable and
    /// documented in the README.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } => 2,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => 3,
            Error::Domain(_) | Error::Argument(_) => 4,
            Error::DegenerateConfig(_)
            | Error::InconsistentAngles(_)
            | Error::DegenerateWaveform(_)
            | Error::DegenerateNoise(_)
            | Error::Singularity(_)
            | Error::NoBodyControl => 5,
            Error::Solver(_) => 6,
            Error::Instability { .. } | Error::NoOscillation { .. } => 7,
            Error::Resolution { .. } => 8,
        }
    }
}
