use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("non-positive gap {gap} m")]
    NonPositiveGap { gap: f64 },

    #[error("collision at t = {time} s: vehicle {follower} reached vehicle {leader} (gap {gap} m)")]
    Collision {
        time: f64,
        follower: usize,
        leader: usize,
        gap: f64,
    },

    #[error("vehicles {first} and {second} share position {position} m in lane {lane}")]
    DegenerateOrdering {
        lane: usize,
        first: usize,
        second: usize,
        position: f64,
    },

    #[error("critical curve is singular at a_k = {0}")]
    SingularMode(f64),

    #[error("no sign change of bracketed function on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("no equilibrium: {0}")]
    NoEquilibrium(String),

    #[error("cannot insert vehicle: {0}")]
    Insertion(String),

    #[error("unknown vehicle id {0}")]
    UnknownVehicle(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Config(err.to_string())
    }
}
