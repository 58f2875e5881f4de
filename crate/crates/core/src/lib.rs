//! Renormalization toolkit for bi-critical circle maps.
//!
//! The numerical core is generic over [`numerics::Real`]; the aliases below
//! fix the scalar to the MPFR-backed [`AdaptiveReal`].

pub mod conjugacy;
pub mod decay;
pub mod error;
pub mod jet;
pub mod maps;
pub mod numerics;
pub mod partitions;
pub mod renorm;
pub mod rotation;
pub mod tubular;

pub use error::{Error, Result};
pub use numerics::AdaptiveReal;

/// Bi-critical map over adaptive-precision reals.
pub type Map = maps::BiCriticalMap<AdaptiveReal>;
/// Bi-critical map over `f64`, for quick experiments.
pub type MapF64 = maps::BiCriticalMap<f64>;
