use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("adaptive quadrature exhausted {subdivisions} subdivisions (estimate {log_estimate}, log error {log_error})")]
    NonConvergence {
        subdivisions: usize,
        log_estimate: f64,
        log_error: f64,
    },

    #[error("normalizer failed to converge for rho = {rho:?}, eta = {eta}")]
    NormalizerNonConvergence { rho: Vec<f64>, eta: f64 },

    #[error("seed m = {seed} is not inside the sublevel set (log wealth {log_wealth} >= threshold {threshold})")]
    InfeasibleSeed {
        seed: f64,
        log_wealth: f64,
        threshold: f64,
    },

    #[error("running intersection became empty at t = {t}")]
    EmptyIntersection { t: u64 },

    #[error("wealth table is incomplete: {0}")]
    IncompleteTable(String),

    #[error("wealth is zero on reachable prefix {prefix:?}")]
    DegenerateWealth { prefix: Vec<usize> },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub(crate) fn domain(name: &'static str, value: f64, domain: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        domain,
    }
}

/// Checks `0 < x < 1`.
pub(crate) fn open_unit(name: &'static str, x: f64) -> Result<f64> {
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err(domain(name, x, "(0, 1)"))
    }
}

pub(crate) fn closed_unit(name: &'static str, x: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(domain(name, x, "[0, 1]"))
    }
}

/// Confidence levels are accepted on `(0, 1]`; `delta = 1` gives threshold 0.
pub(crate) fn check_delta(delta: f64) -> Result<f64> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(delta)
    } else {
        Err(domain("delta", delta, "(0, 1]"))
    }
}
