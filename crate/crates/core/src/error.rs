use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not Hermitian: max |H - H^dagger| = {max_violation:.3e}")]
    NotHermitian { max_violation: f64 },

    #[error("state is not normalized: norm = {norm:.15}")]
    NotNormalized { norm: f64 },

    #[error("Q-subspace resolvent is near-singular at E = {energy}: condition estimate {condition:.3e} (degenerate intruder level)")]
    SingularResolvent { energy: f64, condition: f64 },

    #[error("level-shift series diverges: term norms non-decreasing up to order {order}")]
    SeriesDivergence { order: usize },

    #[error("implicit energy iteration did not converge after {iterations} steps (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("extremum lies on the window boundary at xi = {xi}; widen or shift the window")]
    ExtremumOnBoundary { xi: f64 },

    #[error("no sign change of {what} on [{lo}, {hi}]")]
    RootNotBracketed {
        what: &'static str,
        lo: f64,
        hi: f64,
    },

    #[error("sideband order {0} is not supported (expected 1..=4)")]
    UnsupportedSideband(usize),

    #[error("error threshold {epsilon_t} is not reachable within eta in [{eta_min}, {eta_max}] for {tuning} tuning")]
    ThresholdUnreachable {
        epsilon_t: f64,
        eta_min: f64,
        eta_max: f64,
        tuning: &'static str,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::SingularResolvent { .. }
                | Error::SeriesDivergence { .. }
                | Error::NoConvergence { .. }
                | Error::ExtremumOnBoundary { .. }
                | Error::RootNotBracketed { .. }
                | Error::ThresholdUnreachable { .. }
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
