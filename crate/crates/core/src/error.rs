//! Error types shared across the simulator.

use thiserror::Error;

/// Failures of the closed-form traffic mathematics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrafficError {
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("invalid uniform draw {0}; expected a value strictly inside (0, 1)")]
    InvalidDraw(f64),

    #[error("moment of order {order} is not finite")]
    NonFiniteMoment { order: u32 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "sum-of-Weibull fit did not converge after {iterations} iterations \
         (variance-ratio residual {residual_first}, fourth-moment residual {residual_second})"
    )]
    FitFailure {
        iterations: usize,
        residual_first: f64,
        residual_second: f64,
    },

    #[error(
        "count series did not converge within j_max = {j_max} \
         (partial sum {partial_sum}, last term magnitude {last_term})"
    )]
    SeriesDivergence {
        j_max: usize,
        partial_sum: f64,
        last_term: f64,
    },
}

/// Kernel ordering violations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("event scheduled at {at_ns} ns but the clock is already at {now_ns} ns")]
    ScheduleInPast { at_ns: u64, now_ns: u64 },
    #[error("run_until({t_end_ns} ns) is before the current clock {now_ns} ns")]
    RunBackwards { t_end_ns: u64, now_ns: u64 },
}

/// Problems with the network description (geometry, routing, slot budgets).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("node {0} has no position")]
    UnplacedNode(usize),
    #[error("nodes {0} and {1} are co-located")]
    CoLocated(usize, usize),
    #[error("routing hole: node {0} has no neighbour closer to the gateway")]
    RoutingHole(usize),
    #[error("insufficient slots: {needed} {region} slots needed, {available} configured")]
    InsufficientSlots {
        region: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("threshold exceeds period (tau = {threshold}, omega = {period})")]
    ThresholdExceedsPeriod { threshold: f64, period: f64 },
    #[error("invalid value for {key}: {reason}")]
    Invalid { key: String, reason: String },
    #[error("unknown topology kind '{0}'")]
    UnknownTopology(String),
    #[error("unknown protocol '{0}'")]
    UnknownProtocol(String),
    #[error("scenario file: {0}")]
    Parse(String),
}

/// Failures of the empirical statistics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("samples are degenerate: {0}")]
    Degenerate(String),
    #[error("shape equation did not converge")]
    NoConvergence,
}

/// Top-level error for running scenarios and writing artifacts.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("invalid configuration: {}", join_errors(.0))]
    Config(Vec<ConfigError>),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialize(String),
}

impl From<ConfigError> for Error {
    fn from(e: ConfigError) -> Self {
        Error::Config(vec![e])
    }
}

fn join_errors(errors: &[ConfigError]) -> String {
    errors
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
