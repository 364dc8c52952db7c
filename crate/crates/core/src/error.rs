use thiserror::Error;

/// Error surface shared by every module in the crate.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("truncation order exceeded: needed digit {needed}, have {available}")]
    Truncation { needed: usize, available: usize },

    #[error(
        "precision exhausted: radius target 2^-{target_bits} unreachable \
         (achieved 2^-{achieved_bits}) with the available digits"
    )]
    PrecisionExhausted { target_bits: u32, achieved_bits: u32 },

    #[error("invalid continued-fraction digit at position {position}: digits must be >= 1")]
    InvalidDigit { position: usize },

    #[error("comparison undecided at current precision: {context}")]
    Undecided { context: String },

    #[error("six-interval layout degenerate: b = {b:.6} exceeds 1 - alpha = {one_minus_alpha:.6}")]
    DegenerateLayout { b: f64, one_minus_alpha: f64 },

    #[error("slit construction inconsistent: {detail}")]
    ConstructionInvalid { detail: String },

    #[error("ergodic clusters failed to separate: gap {gap:.4} below threshold {threshold:.4}")]
    InconclusiveClusters { gap: f64, threshold: f64 },

    #[error("unsupported curve pair: {a} vs {b}")]
    UnsupportedPair { a: String, b: String },

    #[error("outside model range: {detail}")]
    OutsideModel { detail: String },

    #[error("pairings not invertible: mu_minus(gamma_i) = mu_plus(gamma_i) for both curves")]
    NonInvertible,

    #[error("schedule unavailable: {detail}")]
    Schedule { detail: String },

    #[error("config error: {detail}")]
    Config { detail: String },

    #[error("i/o error: {detail}")]
    Io { detail: String },
}

pub type Result<T> = std::result::Result<T, LabError>;
