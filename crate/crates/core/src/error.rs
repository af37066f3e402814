use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the model operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("`{name}` = {value} is out of range {allowed}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        allowed: &'static str,
    },
    #[error("state is not normalized: |amp0|^2 + |amp1|^2 = {norm}")]
    Unnormalized { norm: f64 },
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("priors sum to {sum}, expected 1")]
    BadPriors { sum: f64 },
    #[error("sifted key is empty")]
    EmptySift,
    #[error("all sessions aborted")]
    AllAborted,
    #[error("decoy check needs at least two emitted levels, found {found}")]
    NoDecoyStructure { found: usize },
    #[error("pulse has no sampled photon count")]
    PhotonCountMissing,
    #[error("decoy levels must be distinct, level {0} repeats")]
    DuplicateLevel(f64),
    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    allowed: &'static str,
    ok: bool,
) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            allowed,
        })
    }
}

pub(crate) fn check_probability(name: &'static str, p: f64) -> Result<()> {
    check_range(name, p, "[0,1]", (0.0..=1.0).contains(&p))
}
