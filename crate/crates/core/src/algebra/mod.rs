//! Cartesian product-operator algebra on dense `2^n x 2^n` matrices.

mod function;
pub(crate) mod propagator;
pub(crate) mod state;
pub(crate) mod term;

use num_complex::Complex64;

pub use function::BooleanFunction;
pub use propagator::{
    cnot_matrix, conjugate, conjugate_permutation, coupling_phases, coupling_propagator,
    is_unitary, oracle_permutation, overlap_fidelity, permutation_matrix,
    permutation_propagator, phased_rotation_propagator, rotation_propagator,
    single_spin_rotation, swap_matrix, unitarity_error, z_rotation, z_rotation_phases,
};
pub use state::SpinState;
pub use term::{matrix_of_term, matrix_of_terms, parse_terms, Axis, OperatorTerm};

/// Dense complex matrix used for states and propagators.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
