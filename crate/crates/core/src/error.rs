use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation scan hit the hard cap {cap} at radius {radius}; the series shows no decaying tail there")]
    TruncationCap { cap: u64, radius: f64 },

    #[error("radius {radius} exceeds the supported maximum {max}")]
    RadiusTooLarge { radius: f64, max: f64 },

    #[error("{name} must be a power of two >= {min}, got {got}")]
    BadGrid {
        name: &'static str,
        min: usize,
        got: usize,
    },

    #[error("{name} must satisfy {requirement} (got {got})")]
    BadParameter {
        name: &'static str,
        requirement: &'static str,
        got: f64,
    },

    #[error("radius grid rejected: {reason}")]
    BadRadiusGrid { reason: String },

    #[error("event evaluation failed at shift {k}: {source}")]
    EventEvaluation {
        k: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("coefficient tail of `{family}` is not summable along the envelope; the bound product degenerates")]
    NonSummableTail { family: &'static str },

    #[error("tail sum for `{family}` converges too slowly to certify cut {cut:e} within {limit} terms")]
    SlowTailDecay {
        family: &'static str,
        cut: f64,
        limit: u64,
    },

    #[error("{op} requires a sub-Gaussian coefficient law, got `{family}`")]
    SubGaussianRequired {
        op: &'static str,
        family: &'static str,
    },

    #[error("expected {expected} Monte Carlo joint estimates for shifts below the factorization threshold, got {got}")]
    MissingJointEstimates { expected: usize, got: usize },

    #[error("need at least {needed} {what}, got {got}")]
    NotEnough {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("all inputs to {op} must share one trace configuration")]
    MixedTraceConfigs { op: &'static str },

    #[error("variance of the hit counts is zero at n = {n}; nothing to fit")]
    DegenerateVariance { n: u64 },

    #[error("no multiple of 0.1 up to {c_max} brought the exceedance frequency under the target")]
    ThresholdSearchExhausted { c_max: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
