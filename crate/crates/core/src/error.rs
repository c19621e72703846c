//! Error type shared by every module in the crate.
//!
//! Arithmetic failures are values, not panics: panics are reserved for
//! internal invariant violations (mixing elements of different rings,
//! malformed indices). Everything a caller can trigger with legal but
//! unlucky inputs comes back as an `LtError`.

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum LtError {
    #[error("NotPrime: {0} is not prime")]
    NotPrime(u64),

    #[error("ReducibleModulus: residue-field modulus is not irreducible over F_p")]
    ReducibleModulus,

    #[error("NotEisenstein: {0}")]
    NotEisenstein(String),

    #[error("PrecisionExhausted: {0}")]
    PrecisionExhausted(String),

    #[error("NotAUnit: {0}")]
    NotAUnit(String),

    #[error("InexactDivision: {0}")]
    InexactDivision(String),

    #[error("IndistinguishableFromZero: all known digits vanish; valuation only bounded below (>= {0} varpi-digits)")]
    IndistinguishableFromZero(i64),

    #[error("HenselConditionFails: {0}")]
    HenselConditionFails(String),

    #[error("NonzeroConstantInComposition: substituted series has nonzero constant term")]
    NonzeroConstantInComposition,

    #[error("NonUnitLinearTerm: {0}")]
    NonUnitLinearTerm(String),

    #[error("IntegralityViolation: {0}")]
    IntegralityViolation(String),

    #[error("CapTooSmall: needed degree {needed}, cap is {cap}")]
    CapTooSmall { needed: i64, cap: i64 },

    #[error("NotTopologicallyNilpotent: {0}")]
    NotTopologicallyNilpotent(String),

    #[error("CapInsufficient: series cap {cap} gives tail valuation {tail_val}, but target precision is {target}")]
    CapInsufficient {
        cap: i64,
        tail_val: String,
        target: i64,
    },

    #[error("ConjugateNotRoot: {0}")]
    ConjugateNotRoot(String),

    #[error("WindowOverflow: exponent {exp} outside allowed window [{lo}, {hi}]")]
    WindowOverflow { exp: i64, lo: i64, hi: i64 },

    #[error("PerfectionDepthExceeded: needed denominator q^{needed}, depth allows q^{depth}")]
    PerfectionDepthExceeded { needed: u32, depth: u32 },

    #[error("ZeroInput: {0}")]
    ZeroInput(String),

    #[error("NoPthRootHypothesis: {0}")]
    NoPthRootHypothesis(String),

    #[error("OrderNotPPower: {0}")]
    OrderNotPPower(String),

    #[error("MissingRootsOfUnity: {0}")]
    MissingRootsOfUnity(String),

    #[error("BadInput: {0}")]
    BadInput(String),
}

pub type Result<T> = std::result::Result<T, LtError>;
