use num_complex::Complex64;

use super::propagator::z_rotation_phases;
use super::term::{matrix_of_terms, spin_bit, Axis, OperatorTerm};
use super::CMatrix;
use crate::error::{Error, Result};
use crate::tolerance;

/// Deviation density operator of `n` spins plus per-spin reference-frame phases.
///
/// `frame_phase[k]` (degrees) records z-rotations of spin `k` that were
/// realised by re-phasing its rotating frame instead of rotating the state.
/// The physical state is recovered with [`SpinState::aligned`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    n: usize,
    matrix: CMatrix,
    frame_phase: Vec<f64>,
}

impl SpinState {
    pub fn zero(n: usize) -> Self {
        let dim = 1usize << n;
        Self {
            n,
            matrix: CMatrix::zeros(dim, dim),
            frame_phase: vec![0.0; n],
        }
    }

    pub fn from_matrix(n: usize, matrix: CMatrix) -> Result<Self> {
        let dim = 1usize << n;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim,
                actual: matrix.nrows(),
            });
        }
        let s = Self {
            n,
            matrix,
            frame_phase: vec![0.0; n],
        };
        s.check_hermitian()?;
        Ok(s)
    }

    pub fn from_terms(n: usize, terms: &[OperatorTerm]) -> Result<Self> {
        Ok(Self {
            n,
            matrix: matrix_of_terms(terms, n)?,
            frame_phase: vec![0.0; n],
        })
    }

    pub fn from_term(n: usize, term: &OperatorTerm) -> Result<Self> {
        Self::from_terms(n, std::slice::from_ref(term))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut CMatrix {
        &mut self.matrix
    }

    /// Frame phase of spin `k` in degrees, reduced to `[0, 360)`.
    pub fn frame_phase(&self, k: usize) -> f64 {
        self.frame_phase[k].rem_euclid(360.0)
    }

    pub fn frame_phases(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.frame_phase(k)).collect()
    }

    pub(crate) fn shift_frame(&mut self, k: usize, degrees: f64) {
        self.frame_phase[k] += degrees;
    }

    pub fn with_frame_phases(mut self, phases: &[f64]) -> Result<Self> {
        if phases.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                actual: phases.len(),
            });
        }
        self.frame_phase = phases.to_vec();
        Ok(self)
    }

    /// Applies the deferred z-rotations recorded in the frame phases and
    /// resets the frames. A frame phase of `p` stands for `exp(+i p I_z)`.
    pub fn aligned(&self) -> SpinState {
        if self.frame_phase.iter().all(|p| *p == 0.0) {
            return self.clone();
        }
        let angles: Vec<f64> = self.frame_phase.iter().map(|p| -p).collect();
        let d = z_rotation_phases(&angles, self.n);
        let mut out = SpinState::zero(self.n);
        out.matrix = conjugate_diagonal(&self.matrix, &d);
        out
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..dim {
            for c in r..dim {
                let d = self.matrix[(r, c)] - self.matrix[(c, r)].conj();
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let err = self.hermiticity_error();
        if err > tolerance::ALGEBRA {
            return Err(Error::Validation(format!(
                "state is not Hermitian (max deviation {err:.3e})"
            )));
        }
        Ok(())
    }

    /// Expansion over the `4^n` product-operator basis; terms with
    /// `|coeff| <= 1e-10` are dropped. Coefficients carry the powers of two,
    /// so `2 I1z I2z` decomposes to coefficient 2 on `I1z I2z`.
    pub fn decompose(&self) -> Result<Vec<OperatorTerm>> {
        self.check_hermitian()?;
        let n = self.n;
        let dim = self.dim();
        let half = Complex64::new(0.5, 0.0);
        let i_half = Complex64::new(0.0, 0.5);
        let one = Complex64::new(1.0, 0.0);
        let mut out = Vec::new();
        // For each flip mask, a per-spin two-point transform of the entries
        // `rho[j ^ mask, j]` gives `tr(rho B)` for every basis element `B`
        // with that mask: x/y on flipped spins, identity/z on the others.
        for mask in 0..dim {
            let mut v: Vec<Complex64> = (0..dim).map(|j| self.matrix[(j ^ mask, j)]).collect();
            for k in 0..n {
                let bit = spin_bit(k, n);
                let (first, second) = if mask & bit != 0 {
                    ([half, half], [-i_half, i_half])
                } else {
                    ([one, one], [half, -half])
                };
                for j in (0..dim).filter(|j| j & bit == 0) {
                    let (v0, v1) = (v[j], v[j | bit]);
                    v[j] = first[0] * v0 + first[1] * v1;
                    v[j | bit] = second[0] * v0 + second[1] * v1;
                }
            }
            for (sel, z) in v.iter().enumerate() {
                let order = (mask | sel).count_ones();
                let c = z.re * (1u64 << (2 * order)) as f64 / dim as f64;
                if c.abs() <= tolerance::ALGEBRA {
                    continue;
                }
                let factors = (0..n).filter_map(|k| {
                    let bit = spin_bit(k, n);
                    match (mask & bit != 0, sel & bit != 0) {
                        (true, false) => Some((k, Axis::X)),
                        (true, true) => Some((k, Axis::Y)),
                        (false, true) => Some((k, Axis::Z)),
                        (false, false) => None,
                    }
                });
                out.push(OperatorTerm::new(c, factors));
            }
        }
        out.sort_by(|a, b| {
            a.order()
                .cmp(&b.order())
                .then_with(|| a.factors().iter().cmp(b.factors().iter()))
        });
        Ok(out)
    }

    /// Coefficient of the bare basis element named by `term` (its own
    /// coefficient is ignored).
    pub fn coefficient(&self, term: &OperatorTerm) -> Result<f64> {
        term.check_spins(self.n)?;
        Ok(self.raw_coefficient(term))
    }

    fn raw_coefficient(&self, basis: &OperatorTerm) -> f64 {
        let z = self.trace_with_basis(basis);
        z.re / basis.basis_norm(self.n)
    }

    /// `tr(rho B)` for the bare basis element `B`.
    pub(crate) fn trace_with_basis(&self, basis: &OperatorTerm) -> Complex64 {
        let n = self.n;
        let mask = basis.flip_mask(n);
        (0..self.dim())
            .map(|j| self.matrix[(j ^ mask, j)] * basis.basis_entry(j, n))
            .sum()
    }

    /// `tr(rho M) / tr(B^2)` with `M = coeff * B`: the decomposition
    /// coefficient on `B`, scaled by the observable's own coefficient.
    pub fn expectation(&self, term: &OperatorTerm) -> Result<f64> {
        term.check_spins(self.n)?;
        let z = self.trace_with_basis(term) * term.coeff / term.basis_norm(self.n);
        if z.im.abs() > tolerance::ALGEBRA {
            return Err(Error::Numerical(format!(
                "expectation of {term} has imaginary part {:.3e}",
                z.im
            )));
        }
        Ok(z.re)
    }

    /// Largest elementwise difference between two states' matrices.
    pub fn max_abs_diff(&self, other: &SpinState) -> f64 {
        (&self.matrix - &other.matrix)
            .iter()
            .fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// `D rho D^dagger` for diagonal `D`.
pub(crate) fn conjugate_diagonal(m: &CMatrix, d: &[Complex64]) -> CMatrix {
    let dim = d.len();
    CMatrix::from_fn(dim, dim, |r, c| m[(r, c)] * d[r] * d[c].conj())
}
