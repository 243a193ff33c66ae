//! Numerical tolerances shared across the crate.

/// Algebraic identities: Hermiticity, decomposition round trips, term cut-off.
pub const ALGEBRA: f64 = 1e-10;

/// Unitarity of propagators.
pub const UNITARY: f64 = 1e-12;

/// Offsets closer than this (Hz) are merged into one stick.
pub const STICK_MERGE_HZ: f64 = 1e-6;
