use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::CMatrix;
use crate::error::{Error, Result};

/// Cartesian axis of a single-spin angular-momentum operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn is_transverse(self) -> bool {
        !matches!(self, Axis::Z)
    }

    pub fn letter(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }

    /// Matrix element `<row|I_axis|col>` of the spin-1/2 operator, where
    /// `col = row ^ 1` for transverse axes and `col = row` for z.
    fn element(self, row_bit: usize) -> Complex64 {
        match (self, row_bit) {
            (Axis::X, _) => Complex64::new(0.5, 0.0),
            (Axis::Y, 0) => Complex64::new(0.0, -0.5),
            (Axis::Y, _) => Complex64::new(0.0, 0.5),
            (Axis::Z, 0) => Complex64::new(0.5, 0.0),
            (Axis::Z, _) => Complex64::new(-0.5, 0.0),
        }
    }
}

/// One Cartesian product-operator term: `coeff * prod_k I_{k,axis}`.
///
/// Spins missing from the factor map carry the identity. The empty map is a
/// multiple of the identity. Spin indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorTerm {
    pub coeff: f64,
    factors: BTreeMap<usize, Axis>,
}

impl OperatorTerm {
    pub fn new(coeff: f64, factors: impl IntoIterator<Item = (usize, Axis)>) -> Self {
        Self {
            coeff,
            factors: factors.into_iter().collect(),
        }
    }

    pub fn identity(coeff: f64) -> Self {
        Self::new(coeff, [])
    }

    pub fn single(coeff: f64, spin: usize, axis: Axis) -> Self {
        Self::new(coeff, [(spin, axis)])
    }

    /// `coeff * prod I_{k z}` over `spins`.
    pub fn longitudinal(coeff: f64, spins: impl IntoIterator<Item = usize>) -> Self {
        Self::new(coeff, spins.into_iter().map(|k| (k, Axis::Z)))
    }

    pub fn factors(&self) -> &BTreeMap<usize, Axis> {
        &self.factors
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn axis_of(&self, spin: usize) -> Option<Axis> {
        self.factors.get(&spin).copied()
    }

    pub fn max_spin(&self) -> Option<usize> {
        self.factors.keys().next_back().copied()
    }

    pub fn is_longitudinal(&self) -> bool {
        self.factors.values().all(|a| *a == Axis::Z)
    }

    pub fn transverse_spins(&self) -> impl Iterator<Item = usize> + '_ {
        self.factors
            .iter()
            .filter(|(_, a)| a.is_transverse())
            .map(|(k, _)| *k)
    }

    /// Same operator product, different coefficient.
    pub fn with_coeff(&self, coeff: f64) -> Self {
        Self {
            coeff,
            factors: self.factors.clone(),
        }
    }

    /// True when both terms name the same basis element (coefficients ignored).
    pub fn same_basis(&self, other: &OperatorTerm) -> bool {
        self.factors == other.factors
    }

    pub fn check_spins(&self, n: usize) -> Result<()> {
        match self.max_spin() {
            Some(k) if k >= n => Err(Error::Index { index: k, n }),
            _ => Ok(()),
        }
    }

    /// Bit mask of spins whose factor flips the basis state (x or y).
    pub(crate) fn flip_mask(&self, n: usize) -> usize {
        self.transverse_spins().fold(0, |m, k| m | spin_bit(k, n))
    }

    /// Nonzero entry of the bare basis element (coefficient 1) in `row`.
    /// The column is `row ^ flip_mask`.
    pub(crate) fn basis_entry(&self, row: usize, n: usize) -> Complex64 {
        self.factors
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, (&k, &axis)| {
                let bit = (row >> (n - 1 - k)) & 1;
                acc * axis.element(bit)
            })
    }

    /// `tr(B^2)` of the bare basis element on `n` spins.
    pub(crate) fn basis_norm(&self, n: usize) -> f64 {
        (1usize << n) as f64 / (1u64 << (2 * self.order())) as f64
    }
}

/// Bit of spin `k` in a basis index on `n` spins (spin 0 is the MSB).
pub(crate) fn spin_bit(k: usize, n: usize) -> usize {
    1 << (n - 1 - k)
}

/// Dense matrix `coeff * (tensor product of 1/2 sigma_axis or identity)`.
pub fn matrix_of_term(term: &OperatorTerm, n: usize) -> Result<CMatrix> {
    term.check_spins(n)?;
    let dim = 1usize << n;
    let mask = term.flip_mask(n);
    let mut m = CMatrix::zeros(dim, dim);
    for row in 0..dim {
        m[(row, row ^ mask)] = term.basis_entry(row, n) * term.coeff;
    }
    Ok(m)
}

/// Matrix of a sum of terms.
pub fn matrix_of_terms<'a>(terms: impl IntoIterator<Item = &'a OperatorTerm>, n: usize) -> Result<CMatrix> {
    let dim = 1usize << n;
    let mut m = CMatrix::zeros(dim, dim);
    for t in terms {
        t.check_spins(n)?;
        let mask = t.flip_mask(n);
        for row in 0..dim {
            m[(row, row ^ mask)] += t.basis_entry(row, n) * t.coeff;
        }
    }
    Ok(m)
}

fn fmt_coeff(c: f64) -> String {
    format!("{c}")
}

impl fmt::Display for OperatorTerm {
    /// `2*I1z*I2z`, `-I5x`, `0.5` (1-based spin numbers).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "{}", fmt_coeff(self.coeff));
        }
        let ops: Vec<String> = self
            .factors
            .iter()
            .map(|(k, a)| format!("I{}{}", k + 1, a.letter()))
            .collect();
        let body = ops.join("*");
        if self.coeff == 1.0 {
            write!(f, "{body}")
        } else if self.coeff == -1.0 {
            write!(f, "-{body}")
        } else {
            write!(f, "{}*{body}", fmt_coeff(self.coeff))
        }
    }
}

impl FromStr for OperatorTerm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let terms = parse_terms(s)?;
        match terms.len() {
            1 => Ok(terms.into_iter().next().unwrap()),
            k => Err(Error::parse(1, 1, format!("expected a single term, found {k}"))),
        }
    }
}

/// Parses a sum of product terms such as `I1x + 2*I1y*I2z - 0.5*I3z`.
///
/// Factors are numbers or `I<spin><axis>` with 1-based spins; `*` separates
/// factors and a leading `-` on any factor negates it (`I5x*-1`).
pub fn parse_terms(s: &str) -> Result<Vec<OperatorTerm>> {
    let mut out = Vec::new();
    let bytes = s.as_bytes();
    let mut start = 0;
    let mut sign = 1.0;
    let mut i = 0;
    let mut depth_has_content = false;
    // split on top-level + and - that are not unary / exponent markers
    while i <= bytes.len() {
        let at_end = i == bytes.len();
        let c = if at_end { b'\0' } else { bytes[i] };
        let splits = (c == b'+' || c == b'-')
            && depth_has_content
            && !prev_is(bytes, i, b'*')
            && !prev_is(bytes, i, b'e')
            && !prev_is(bytes, i, b'E');
        if at_end || splits {
            let piece = &s[start..i];
            if piece.trim().is_empty() {
                return Err(Error::parse(1, start + 1, "empty term"));
            }
            let mut t = parse_product(piece, start)?;
            t.coeff *= sign;
            out.push(t);
            sign = if c == b'-' { -1.0 } else { 1.0 };
            start = i + 1;
            depth_has_content = false;
        } else if !c.is_ascii_whitespace() && !(c == b'+' || c == b'-') {
            depth_has_content = true;
        }
        i += 1;
    }
    Ok(out)
}

fn prev_is(bytes: &[u8], i: usize, want: u8) -> bool {
    bytes[..i]
        .iter()
        .rev()
        .find(|b| !b.is_ascii_whitespace())
        .is_some_and(|b| *b == want)
}

fn parse_product(piece: &str, offset: usize) -> Result<OperatorTerm> {
    let mut coeff = 1.0;
    let mut factors = BTreeMap::new();
    let mut col = offset;
    for raw in piece.split('*') {
        let tok = raw.trim();
        let here = col + 1 + (raw.len() - raw.trim_start().len());
        col += raw.len() + 1;
        if tok.is_empty() {
            return Err(Error::parse(1, here, "empty factor"));
        }
        let (neg, body) = match tok.strip_prefix('-') {
            Some(rest) => (true, rest.trim_start()),
            None => (false, tok.strip_prefix('+').unwrap_or(tok).trim_start()),
        };
        if neg {
            coeff = -coeff;
        }
        if let Some(op) = body.strip_prefix('I') {
            let axis = match op.chars().last() {
                Some('x') => Axis::X,
                Some('y') => Axis::Y,
                Some('z') => Axis::Z,
                _ => return Err(Error::parse(1, here, format!("bad operator `{tok}`"))),
            };
            let spin: usize = op[..op.len() - 1]
                .parse()
                .map_err(|_| Error::parse(1, here, format!("bad spin number in `{tok}`")))?;
            if spin == 0 {
                return Err(Error::parse(1, here, "spin numbers are 1-based"));
            }
            if factors.insert(spin - 1, axis).is_some() {
                return Err(Error::parse(1, here, format!("spin {spin} appears twice")));
            }
        } else {
            let v: f64 = body
                .parse()
                .map_err(|_| Error::parse(1, here, format!("bad factor `{tok}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(1, here, "coefficient must be finite"));
            }
            coeff *= v;
        }
    }
    Ok(OperatorTerm { coeff, factors })
}
