use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("space mismatch: [{left}] vs [{right}]")]
    SpaceMismatch { left: String, right: String },

    #[error("unknown factor `{0}`")]
    UnknownFactor(String),

    #[error("operator is not Hermitian (max |A - A^dag| = {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("invalid density operator: {0}")]
    InvalidDensity(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unstable oscillator branch j = {branch}: effective spring constant {spring:.6e} is not positive")]
    UnstableBranch { branch: usize, spring: f64 },

    #[error("truncation leakage in factor `{factor}`: top-level population {population:.3e} at t = {time}")]
    Truncation {
        factor: String,
        population: f64,
        time: f64,
    },

    #[error("step-size failure: halving the step changed a channel by {delta:.3e} (limiting frequency {limit:.6e})")]
    StepSize { delta: f64, limit: f64 },

    #[error("positivity violation: minimum eigenvalue {min_eig:.3e} at t = {time}")]
    Positivity { min_eig: f64, time: f64 },

    #[error("trace drift {drift:.3e} at t = {time}")]
    TraceDrift { drift: f64, time: f64 },

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("no spectral peak above the noise floor")]
    NoPeak,

    #[error("record too short: {0}")]
    TooShort(String),

    #[error("channel changes sign inside the fit window")]
    SignChange,

    #[error("only {got} usable samples (need at least {need})")]
    TooFewSamples { got: usize, need: usize },

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("infeasible pulse request; binding constraint `{constraint}`: {detail}")]
    Infeasible { constraint: String, detail: String },

    #[error("sweep grid has {points} points, above the cap of {cap} (estimated {estimate_s:.1} s)")]
    GridTooLarge {
        points: usize,
        cap: usize,
        estimate_s: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
