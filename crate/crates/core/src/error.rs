use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    InvalidInput,
    Numerical,
    Verification,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("step size underflow at t = {t} (coordinate {coord} dominates the error estimate)")]
    Stiffness { coord: usize, t: f64 },

    #[error("divergence after t = {last_good}: {detail}")]
    Divergence { last_good: f64, detail: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("capacity exceeded: {required} items required, cap is {cap}")]
    Capacity { required: u64, cap: u64 },

    #[error("unsupported target: {0}")]
    UnsupportedTarget(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("trajectory left the simulation box at t = {time} (coordinate {coord}); sup error before escape {sup_error}")]
    BoxEscape { time: f64, coord: usize, sup_error: f64 },

    #[error("tolerance {eps} unachievable at lambda = {lambda}; minimal lambda is {min_lambda}")]
    EpsilonUnachievable { eps: f64, lambda: f64, min_lambda: f64 },

    #[error("no return to the section within {cap} time units")]
    NoReturn { cap: f64 },

    #[error("shadow trajectory collapsed onto the reference at t = {t}")]
    DegeneratePerturbation { t: f64 },

    #[error("singular point at m = {m}: derivative vanishes")]
    SingularPoint { m: f64 },

    #[error("not a fixed point: |F(m) - m| = {residual}")]
    NotFixedPoint { residual: f64 },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_)
            | Error::Precondition(_)
            | Error::UnsupportedTarget(_)
            | Error::Parameter(_)
            | Error::NotFixedPoint { .. } => ErrorClass::InvalidInput,
            Error::Numerical(_)
            | Error::Stiffness { .. }
            | Error::Divergence { .. }
            | Error::NoReturn { .. }
            | Error::DegeneratePerturbation { .. }
            | Error::SingularPoint { .. } => ErrorClass::Numerical,
            Error::Capacity { .. } | Error::BoxEscape { .. } | Error::EpsilonUnachievable { .. } => {
                ErrorClass::Verification
            }
        }
    }
}
