use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boolean function on `arity` bits given by its truth table.
///
/// Inputs are indexed as integers with `x_1` as the most significant bit,
/// matching the spin order of the register.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BooleanFunction {
    arity: usize,
    table: Vec<bool>,
}

impl BooleanFunction {
    pub fn new(arity: usize, table: Vec<bool>) -> Result<Self> {
        if table.len() != 1 << arity {
            return Err(Error::Validation(format!(
                "truth table has {} entries, arity {} needs {}",
                table.len(),
                arity,
                1usize << arity
            )));
        }
        Ok(Self { arity, table })
    }

    pub fn from_fn(arity: usize, f: impl Fn(usize) -> bool) -> Self {
        Self {
            arity,
            table: (0..1usize << arity).map(f).collect(),
        }
    }

    pub fn constant(arity: usize, value: bool) -> Self {
        Self::from_fn(arity, |_| value)
    }

    /// `x_1 xor x_2 xor ... xor x_m`.
    pub fn parity(arity: usize) -> Self {
        Self::from_fn(arity, |x| x.count_ones() % 2 == 1)
    }

    /// Function whose truth table is the low `2^arity` bits of `mask`
    /// (bit `x` holds `f(x)`).
    pub fn from_mask(arity: usize, mask: u64) -> Self {
        Self::from_fn(arity, |x| (mask >> x) & 1 == 1)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn eval(&self, x: usize) -> bool {
        self.table[x]
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    pub fn ones(&self) -> usize {
        self.table.iter().filter(|b| **b).count()
    }

    pub fn is_constant(&self) -> bool {
        let o = self.ones();
        o == 0 || o == self.table.len()
    }

    pub fn is_balanced(&self) -> bool {
        2 * self.ones() == self.table.len()
    }

    /// Every balanced function of the given arity (arity <= 6).
    pub fn balanced(arity: usize) -> impl Iterator<Item = BooleanFunction> {
        assert!(arity <= 6, "enumeration limited to 64-entry tables");
        let size = 1usize << arity;
        let limit: u128 = 1u128 << size;
        (0..limit)
            .filter(move |m| m.count_ones() as usize == size / 2)
            .map(move |m| BooleanFunction::from_mask(arity, m as u64))
    }
}

impl fmt::Display for BooleanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.table {
            write!(f, "{}", u8::from(*b))?;
        }
        Ok(())
    }
}

impl FromStr for BooleanFunction {
    type Err = Error;

    /// Truth-table text: `0`/`1` characters in input order, whitespace
    /// ignored, `#` starts a comment running to the end of the line. The
    /// length must be a power of two.
    fn from_str(s: &str) -> Result<Self> {
        let mut table = Vec::new();
        for (li, line) in s.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("");
            for (ci, ch) in body.char_indices() {
                match ch {
                    '0' => table.push(false),
                    '1' => table.push(true),
                    c if c.is_whitespace() => {}
                    c => {
                        return Err(Error::parse(
                            li + 1,
                            ci + 1,
                            format!("unexpected character `{c}` in truth table"),
                        ))
                    }
                }
            }
        }
        let len = table.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::parse(
                s.lines().count().max(1),
                1,
                format!("truth table length {len} is not a power of two"),
            ));
        }
        Self::new(len.trailing_zeros() as usize, table)
    }
}
