use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode index {index:?} out of range for domain with {modes} modes per axis")]
    ModeOutOfRange { index: Vec<usize>, modes: usize },

    #[error("domain must have 1 to 3 axes, got {0}")]
    BadDimension(usize),

    #[error("edge lengths must be positive, got {0}")]
    BadLength(f64),

    #[error("modes per axis must be at least 4, got {0}")]
    TooFewModes(usize),

    #[error("padding factor must be at least 1")]
    BadPadding,

    #[error("fields live on different domains")]
    DomainMismatch,

    #[error("physical grid resolution {got} is not padding x modes ({expected}) for this domain")]
    ResolutionMismatch { got: usize, expected: usize },

    #[error("multiplier level must be positive, got {0}")]
    BadLevel(f64),

    #[error("non-finite state at step {step} (t = {t})")]
    NonFinite { step: usize, t: f64 },

    #[error("energy grew from {initial:.6e} to {energy:.6e} at step {step} (t = {t}); aborting as unstable")]
    Instability {
        step: usize,
        t: f64,
        initial: f64,
        energy: f64,
    },

    #[error("window [{start}, {end}] is not covered by the trace")]
    WindowOutOfRange { start: f64, end: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
