//! Lubin-Tate formal groups over truncated p-adic arithmetic: base rings,
//! commuting-series solvers, ramified torsion towers, the coefficient rings
//! A_F and E_F, and rank-one (phi,Gamma)-module descent.
//!
//! Everything is exact bookkeeping at a declared working precision; nothing
//! is floating point and no solver returns an unverified witness.

pub mod error;
pub mod rat;
pub mod ff;
pub mod local;
pub mod hensel;
pub mod series;
pub mod report;
pub mod fgroup;
pub mod poly;
pub mod tower;
pub mod ef;
pub mod af;
pub mod descent;

pub use error::{LtError, Result};
pub use rat::{Rat, Val};
