//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet size {0} is too small (need at least 2 symbols)")]
    AlphabetTooSmall(u8),

    #[error("malformed word: {0}")]
    BadWord(String),

    #[error("malformed point: {0}")]
    BadPoint(String),

    #[error("period must be nonempty")]
    EmptyPeriod,

    #[error("operation on empty clopen set")]
    EmptyClopen,

    #[error("epsilon must be positive")]
    NonPositiveEpsilon,

    #[error("alphabets differ")]
    AlphabetMismatch,

    #[error("point lies outside the map domain: {0}")]
    OutsideDomain(String),

    #[error("no rule matches point {0}")]
    NoRuleMatch(String),

    #[error("malformed rule: {0}")]
    BadRule(String),

    #[error("map is not valid: {0}")]
    InvalidMap(String),

    #[error("map is not surjective")]
    NotSurjective,

    #[error("map is not injective")]
    NotInjective,

    #[error("map is not a homeomorphism")]
    NotHomeomorphism,

    #[error("domain/codomain mismatch: {0}")]
    DomainMismatch(String),

    #[error("pieces do not partition the domain")]
    BadPartition,

    #[error("certificate does not match the map: {0}")]
    CertificateMismatch(String),

    #[error("orbit did not resolve within {0} steps")]
    OrbitUnresolved(usize),

    #[error("graph node {0} has no outgoing edge")]
    DeadEndNode(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("construction failed: {0}")]
    Construction(String),
}

pub type Result<T> = std::result::Result<T, Error>;
