//! Pauli-string algebra.
//!
//! A [`PauliString`] stores one single-qubit operator per qubit with qubit 0
//! leftmost, so `"XZ"` is `X ⊗ Z` and qubit 0 is the most significant bit of
//! a computational-basis index. [`PauliSum`] is a complex-weighted list of
//! strings; [`expand_to_matrix`] turns it into a [`SparseHermitian`] matrix.

mod fermion;
mod matrix;
mod sum;

pub use fermion::{jordan_wigner, jordan_wigner_sum, FermionicTerm};
pub use matrix::{expand_to_matrix, min_eigenvalue, pauli_matrix_entry, SparseHermitian, MAX_QUBITS};
pub use sum::PauliSum;
pub(crate) use sum::parse_term;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients and matrix entries at or below this magnitude are dropped.
pub const PRUNE_TOL: f64 = 1e-12;

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    /// Entry `(row, col)` of the 2×2 matrix, 0-based.
    pub fn entry(self, row: usize, col: usize) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        match (self, row, col) {
            (Pauli::I, 0, 0) | (Pauli::I, 1, 1) => one,
            (Pauli::X, 0, 1) | (Pauli::X, 1, 0) => one,
            (Pauli::Y, 0, 1) => Complex64::new(0.0, -1.0),
            (Pauli::Y, 1, 0) => Complex64::new(0.0, 1.0),
            (Pauli::Z, 0, 0) => one,
            (Pauli::Z, 1, 1) => -one,
            _ => zero,
        }
    }

    /// Whether the operator swaps |0⟩ and |1⟩.
    pub fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    /// Single-qubit product `self · rhs = i^k · P`, returned as `(k, P)`.
    pub fn mul(self, rhs: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, rhs) {
            (I, p) | (p, I) => (0, p),
            (a, b) if a == b => (0, I),
            (X, Y) => (1, Z),
            (Y, Z) => (1, X),
            (Z, X) => (1, Y),
            (Y, X) => (3, Z),
            (Z, Y) => (3, X),
            (X, Z) => (3, Y),
            _ => unreachable!(),
        }
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

impl TryFrom<char> for Pauli {
    type Error = Error;

    fn try_from(c: char) -> Result<Self> {
        match c {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::Validity(format!("not a Pauli letter: {other:?}"))),
        }
    }
}

/// `i^k` for `k` in `0..4`.
pub(crate) fn i_pow(k: u8) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Tensor product of single-qubit Paulis, qubit 0 first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn new(ops: Vec<Pauli>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::Shape("a Pauli string needs at least one qubit".into()));
        }
        Ok(Self(ops))
    }

    pub fn identity(n: usize) -> Self {
        Self(vec![Pauli::I; n.max(1)])
    }

    /// Identity everywhere except the listed `(qubit, op)` sites.
    pub fn with_ops(n: usize, ops: &[(usize, Pauli)]) -> Result<Self> {
        let mut s = Self::identity(n);
        for &(q, p) in ops {
            if q >= n {
                return Err(Error::Index(format!("qubit {q} out of range for {n} qubits")));
            }
            s.0[q] = p;
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&p| p != Pauli::I).count()
    }

    /// Cyclic shift: the operator on qubit `k` moves to qubit `(k + by) mod n`.
    pub fn rotate(&self, by: usize) -> Self {
        let n = self.0.len();
        let mut ops = vec![Pauli::I; n];
        for (k, &p) in self.0.iter().enumerate() {
            ops[(k + by) % n] = p;
        }
        Self(ops)
    }

    /// Basis-index bitmask of the qubits flipped by X or Y factors.
    pub(crate) fn flip_mask(&self) -> usize {
        let n = self.0.len();
        self.0
            .iter()
            .enumerate()
            .filter(|(_, p)| p.flips())
            .fold(0, |m, (k, _)| m | (1 << (n - 1 - k)))
    }
}

/// Product of two strings: `a · b = phase · c`.
pub fn multiply_strings(a: &PauliString, b: &PauliString) -> Result<(Complex64, PauliString)> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "cannot multiply Pauli strings of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut power = 0u8;
    let ops = a
        .0
        .iter()
        .zip(&b.0)
        .map(|(&x, &y)| {
            let (k, p) = x.mul(y);
            power = (power + k) % 4;
            p
        })
        .collect();
    Ok((i_pow(power), PauliString(ops)))
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ops = s.chars().map(Pauli::try_from).collect::<Result<Vec<_>>>()?;
        Self::new(ops)
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn single_qubit_products() {
        assert_eq!(multiply_strings(&ps("X"), &ps("X")).unwrap(), (Complex64::new(1.0, 0.0), ps("I")));
        assert_eq!(multiply_strings(&ps("X"), &ps("Y")).unwrap(), (Complex64::new(0.0, 1.0), ps("Z")));
        assert_eq!(multiply_strings(&ps("Y"), &ps("X")).unwrap(), (Complex64::new(0.0, -1.0), ps("Z")));
    }

    #[test]
    fn qubitwise_phases_multiply() {
        let (phase, c) = multiply_strings(&ps("XZ"), &ps("YZ")).unwrap();
        assert_eq!(phase, Complex64::new(0.0, 1.0));
        assert_eq!(c, ps("ZI"));
    }

    #[test]
    fn length_mismatch_is_shape_error() {
        assert!(matches!(multiply_strings(&ps("X"), &ps("XX")), Err(Error::Shape(_))));
    }

    #[test]
    fn parse_rejects_bad_letters() {
        assert!("XQ".parse::<PauliString>().is_err());
        assert!("".parse::<PauliString>().is_err());
    }

    fn arb_string(n: usize) -> impl Strategy<Value = PauliString> {
        prop::collection::vec(prop::sample::select(Pauli::ALL.to_vec()), n).prop_map(PauliString)
    }

    proptest! {
        #[test]
        fn multiplication_is_associative((a, b, c) in (1usize..6).prop_flat_map(|n| (arb_string(n), arb_string(n), arb_string(n)))) {
            let (p1, ab) = multiply_strings(&a, &b).unwrap();
            let (p2, ab_c) = multiply_strings(&ab, &c).unwrap();
            let (q1, bc) = multiply_strings(&b, &c).unwrap();
            let (q2, a_bc) = multiply_strings(&a, &bc).unwrap();
            prop_assert_eq!(ab_c, a_bc);
            prop_assert_eq!(p1 * p2, q1 * q2);
        }

        #[test]
        fn square_is_identity(a in (1usize..8).prop_flat_map(arb_string)) {
            let (phase, c) = multiply_strings(&a, &a).unwrap();
            prop_assert_eq!(phase, Complex64::new(1.0, 0.0));
            prop_assert!(c.is_identity());
        }
    }
}
