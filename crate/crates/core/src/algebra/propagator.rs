use std::f64::consts::PI;

use num_complex::Complex64;

use super::function::BooleanFunction;
use super::state::{conjugate_diagonal, SpinState};
use super::term::spin_bit;
use super::CMatrix;
use crate::error::{Error, Result};
use crate::tolerance;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn check_spin(k: usize, n: usize) -> Result<()> {
    if k >= n {
        Err(Error::Index { index: k, n })
    } else {
        Ok(())
    }
}

/// `exp(-i theta (Ix cos phi + Iy sin phi))` for one spin.
pub fn single_spin_rotation(angle_deg: f64, phase_deg: f64) -> [[Complex64; 2]; 2] {
    let half = angle_deg.to_radians() / 2.0;
    let (s, c) = half.sin_cos();
    let phi = phase_deg.to_radians();
    let e_minus = Complex64::from_polar(1.0, -phi);
    let e_plus = Complex64::from_polar(1.0, phi);
    [
        [Complex64::new(c, 0.0), -I * s * e_minus],
        [-I * s * e_plus, Complex64::new(c, 0.0)],
    ]
}

/// Tensor product of per-spin 2x2 blocks; spins without a block get the identity.
pub(crate) fn tensor_of_blocks(blocks: &[Option<[[Complex64; 2]; 2]>]) -> CMatrix {
    let n = blocks.len();
    let dim = 1usize << n;
    CMatrix::from_fn(dim, dim, |r, c| {
        let mut v = Complex64::new(1.0, 0.0);
        for (k, b) in blocks.iter().enumerate() {
            let rb = (r >> (n - 1 - k)) & 1;
            let cb = (c >> (n - 1 - k)) & 1;
            match b {
                Some(m) => v *= m[rb][cb],
                None if rb != cb => return Complex64::new(0.0, 0.0),
                None => {}
            }
        }
        v
    })
}

/// `prod_{k in spins} exp(-i theta (I_kx cos phi + I_ky sin phi))`.
pub fn rotation_propagator(spins: &[usize], angle_deg: f64, phase_deg: f64, n: usize) -> Result<CMatrix> {
    let phased: Vec<(usize, f64)> = spins.iter().map(|&k| (k, phase_deg)).collect();
    phased_rotation_propagator(&phased, angle_deg, n)
}

/// Same flip angle on several spins, each with its own phase.
pub fn phased_rotation_propagator(spins: &[(usize, f64)], angle_deg: f64, n: usize) -> Result<CMatrix> {
    let mut blocks = vec![None; n];
    for &(k, phase) in spins {
        check_spin(k, n)?;
        blocks[k] = Some(single_spin_rotation(angle_deg, phase));
    }
    Ok(tensor_of_blocks(&blocks))
}

/// `m <- R m` for the rotation of [`phased_rotation_propagator`], applied
/// one 2x2 block at a time.
pub(crate) fn rotate_rows(m: &mut CMatrix, spins: &[(usize, f64)], angle_deg: f64, n: usize) -> Result<()> {
    for &(k, phase) in spins {
        check_spin(k, n)?;
        let b = single_spin_rotation(angle_deg, phase);
        let bit = spin_bit(k, n);
        for c in 0..m.ncols() {
            for r0 in (0..m.nrows()).filter(|r| r & bit == 0) {
                let (a0, a1) = (m[(r0, c)], m[(r0 | bit, c)]);
                m[(r0, c)] = b[0][0] * a0 + b[0][1] * a1;
                m[(r0 | bit, c)] = b[1][0] * a0 + b[1][1] * a1;
            }
        }
    }
    Ok(())
}

/// `m <- m R^dagger`, the right half of a rotation conjugation.
fn rotate_cols(m: &mut CMatrix, spins: &[(usize, f64)], angle_deg: f64, n: usize) -> Result<()> {
    for &(k, phase) in spins {
        check_spin(k, n)?;
        let b = single_spin_rotation(angle_deg, phase);
        let bit = spin_bit(k, n);
        for c0 in (0..m.ncols()).filter(|c| c & bit == 0) {
            for r in 0..m.nrows() {
                let (a0, a1) = (m[(r, c0)], m[(r, c0 | bit)]);
                m[(r, c0)] = a0 * b[0][0].conj() + a1 * b[0][1].conj();
                m[(r, c0 | bit)] = a0 * b[1][0].conj() + a1 * b[1][1].conj();
            }
        }
    }
    Ok(())
}

/// Conjugation by a (phased) rotation without forming the full propagator.
pub(crate) fn conjugate_by_rotation(state: &mut SpinState, spins: &[(usize, f64)], angle_deg: f64) -> Result<()> {
    let n = state.n();
    let m = state.matrix_mut();
    rotate_rows(m, spins, angle_deg, n)?;
    rotate_cols(m, spins, angle_deg, n)
}

/// Diagonal of `exp(-i 2 pi t sum_{(k,l)} J_kl I_kz I_lz)`.
pub fn coupling_phases(pairs: &[(usize, usize, f64)], t: f64, n: usize) -> Vec<Complex64> {
    (0..1usize << n)
        .map(|idx| {
            let phase: f64 = pairs
                .iter()
                .map(|&(k, l, j)| {
                    let zk = if idx & spin_bit(k, n) == 0 { 0.5 } else { -0.5 };
                    let zl = if idx & spin_bit(l, n) == 0 { 0.5 } else { -0.5 };
                    2.0 * PI * j * t * zk * zl
                })
                .sum();
            Complex64::from_polar(1.0, -phase)
        })
        .collect()
}

/// `exp(-i 2 pi J t I_kz I_lz)`, diagonal in the computational basis.
pub fn coupling_propagator(k: usize, l: usize, j_hz: f64, t: f64, n: usize) -> Result<CMatrix> {
    check_spin(k, n)?;
    check_spin(l, n)?;
    if k == l {
        return Err(Error::Validation("coupling needs two distinct spins".into()));
    }
    if !j_hz.is_finite() {
        return Err(Error::Validation("coupling constant must be finite".into()));
    }
    if t < 0.0 || !t.is_finite() {
        return Err(Error::Validation(format!("evolution time must be >= 0, got {t}")));
    }
    Ok(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(
        coupling_phases(&[(k, l, j_hz)], t, n),
    )))
}

/// Diagonal of `prod_k exp(-i angle_k I_kz)` (angles in degrees, one per spin).
pub fn z_rotation_phases(angles_deg: &[f64], n: usize) -> Vec<Complex64> {
    (0..1usize << n)
        .map(|idx| {
            let phase: f64 = angles_deg
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    let z = if idx & spin_bit(k, n) == 0 { 0.5 } else { -0.5 };
                    a.to_radians() * z
                })
                .sum();
            Complex64::from_polar(1.0, -phase)
        })
        .collect()
}

/// `exp(-i angle I_kz)`.
pub fn z_rotation(k: usize, angle_deg: f64, n: usize) -> Result<CMatrix> {
    check_spin(k, n)?;
    let mut angles = vec![0.0; n];
    angles[k] = angle_deg;
    Ok(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(
        z_rotation_phases(&angles, n),
    )))
}

/// Permutation matrix with `U|i> = |map(i)>`. `map` must be a bijection on `0..2^n`.
pub fn permutation_matrix(n: usize, map: impl Fn(usize) -> usize) -> Result<CMatrix> {
    let perm = permutation_vector(n, map)?;
    let dim = perm.len();
    let mut m = CMatrix::zeros(dim, dim);
    for (i, &p) in perm.iter().enumerate() {
        m[(p, i)] = Complex64::new(1.0, 0.0);
    }
    Ok(m)
}

pub(crate) fn permutation_vector(n: usize, map: impl Fn(usize) -> usize) -> Result<Vec<usize>> {
    let dim = 1usize << n;
    let perm: Vec<usize> = (0..dim).map(map).collect();
    let mut seen = vec![false; dim];
    for &p in &perm {
        if p >= dim || seen[p] {
            return Err(Error::Validation("map is not a permutation of the basis".into()));
        }
        seen[p] = true;
    }
    Ok(perm)
}

/// Basis permutation of `U(f)|x, x_n> = |x, x_n xor f(x)>` as an index map.
pub fn oracle_permutation(f: &BooleanFunction, n: usize) -> Result<Vec<usize>> {
    if f.arity() + 1 != n {
        return Err(Error::Validation(format!(
            "function arity {} does not match {} spins (needs n - 1)",
            f.arity(),
            n
        )));
    }
    permutation_vector(n, |idx| {
        let x = idx >> 1;
        idx ^ usize::from(f.eval(x))
    })
}

/// `U(f)` as a dense permutation matrix.
pub fn permutation_propagator(f: &BooleanFunction, n: usize) -> Result<CMatrix> {
    let perm = oracle_permutation(f, n)?;
    permutation_matrix(n, |i| perm[i])
}

/// Canonical CNOT with control `k` and target `l`.
pub fn cnot_matrix(k: usize, l: usize, n: usize) -> Result<CMatrix> {
    check_spin(k, n)?;
    check_spin(l, n)?;
    if k == l {
        return Err(Error::Validation("control and target must differ".into()));
    }
    let (bk, bl) = (spin_bit(k, n), spin_bit(l, n));
    permutation_matrix(n, |i| if i & bk != 0 { i ^ bl } else { i })
}

/// Canonical SWAP of spins `k` and `l`.
pub fn swap_matrix(k: usize, l: usize, n: usize) -> Result<CMatrix> {
    check_spin(k, n)?;
    check_spin(l, n)?;
    let (bk, bl) = (spin_bit(k, n), spin_bit(l, n));
    permutation_matrix(n, |i| {
        let vk = i & bk != 0;
        let vl = i & bl != 0;
        if vk == vl {
            i
        } else {
            i ^ bk ^ bl
        }
    })
}

/// `rho -> U rho U^dagger`.
pub fn conjugate(state: &SpinState, u: &CMatrix) -> Result<SpinState> {
    let dim = state.dim();
    if u.nrows() != dim || u.ncols() != dim {
        return Err(Error::Dimension {
            expected: dim,
            actual: u.nrows(),
        });
    }
    let mut out = state.clone();
    *out.matrix_mut() = u * state.matrix() * u.adjoint();
    Ok(out)
}

/// Conjugation by a basis permutation `U|i> = |perm[i]>`.
pub fn conjugate_permutation(state: &SpinState, perm: &[usize]) -> Result<SpinState> {
    let dim = state.dim();
    if perm.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            actual: perm.len(),
        });
    }
    let mut out = state.clone();
    let src = state.matrix();
    let dst = out.matrix_mut();
    for r in 0..dim {
        for c in 0..dim {
            dst[(perm[r], perm[c])] = src[(r, c)];
        }
    }
    Ok(out)
}

/// Conjugation by a diagonal unitary given by its diagonal.
pub(crate) fn conjugate_by_diagonal(state: &mut SpinState, d: &[Complex64]) {
    let m = conjugate_diagonal(state.matrix(), d);
    *state.matrix_mut() = m;
}

/// `max |U^dagger U - 1|`.
pub fn unitarity_error(u: &CMatrix) -> f64 {
    let p = u.adjoint() * u;
    let id = CMatrix::identity(u.nrows(), u.ncols());
    (p - id).iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn is_unitary(u: &CMatrix) -> bool {
    unitarity_error(u) < tolerance::UNITARY
}

/// `|tr(A^dagger B)| / dim`, insensitive to global phase.
pub fn overlap_fidelity(target: &CMatrix, actual: &CMatrix) -> f64 {
    let dim = target.nrows() as f64;
    (target.adjoint() * actual).trace().norm() / dim
}
