//! Liquid-state NMR quantum computing: product-operator algebra, a pulse-sequence
//! language, a rotating-frame spin-dynamics simulator, a gate compiler with
//! refocusing and peephole simplification, and a Deutsch-Jozsa experiment harness.
//!
//! Spins are 0-based inside the library. Everything that faces a human (the
//! sequence language, term expressions, reports) uses 1-based spin numbers.
//!
//! The computational basis orders spin 0 as the most significant bit, so basis
//! index `0b00001` on five spins is `|00001>`, i.e. spins 1..4 in `|0>` (alpha)
//! and spin 5 in `|1>` (beta).

pub mod algebra;
pub mod compiler;
pub mod dj;
pub mod error;
pub mod par;
pub mod sequence;
pub mod sim;
pub mod system;
pub mod tolerance;

pub use algebra::{Axis, BooleanFunction, CMatrix, OperatorTerm, SpinState};
pub use error::{Error, Result};
pub use sequence::{Active, Sequence, SequenceEvent, SpinSet};
pub use system::SpinSystem;
