use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{PauliString, PauliSum, PRUNE_TOL};
use crate::error::{Error, Result};

/// Largest qubit count [`expand_to_matrix`] accepts.
pub const MAX_QUBITS: usize = 12;

/// Coordinate-map sparse matrix with 0-based `(row, col)` keys.
///
/// Produced from Hermitian Pauli sums; [`SparseHermitian::is_hermitian`]
/// checks the conjugate-symmetry invariant for inputs of unknown origin.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian {
    dim: usize,
    entries: BTreeMap<(usize, usize), Complex64>,
}

impl SparseHermitian {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates
    /// and dropping entries with magnitude at or below `1e-12`.
    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (usize, usize, Complex64)>) -> Result<Self> {
        let mut map: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
        for (p, q, v) in entries {
            if p >= dim || q >= dim {
                return Err(Error::Index(format!("entry ({p}, {q}) outside a {dim}×{dim} matrix")));
            }
            *map.entry((p, q)).or_default() += v;
        }
        map.retain(|_, v| v.norm() > PRUNE_TOL);
        Ok(Self { dim, entries: map })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries.get(&(row, col)).copied().unwrap_or_default()
    }

    /// Stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.entries.iter().map(|(&(p, q), &v)| (p, q, v))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.entries
            .iter()
            .all(|(&(p, q), v)| (v - self.get(q, p).conj()).norm() <= tol)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (&(p, q), &v) in &self.entries {
            m[(p, q)] = v;
        }
        m
    }
}

/// 1-based row/column of qubit `k`'s 2×2 factor for the 1-based basis
/// index `p` of an `n`-qubit matrix: `(⌈p / 2^(n-k-1)⌉ - 1) mod 2 + 1`.
///
/// For `k = n - 1` this reduces to `(p - 1) mod 2 + 1`, so one map serves
/// every qubit.
fn factor_index(p: usize, k: usize, n: usize) -> usize {
    let block = 1usize << (n - k - 1);
    (p.div_ceil(block) - 1) % 2 + 1
}

/// Entry `(p, q)` (0-based) of the `2^n × 2^n` matrix of `s`.
pub fn pauli_matrix_entry(s: &PauliString, p: usize, q: usize) -> Result<Complex64> {
    let n = s.len();
    let dim = 1usize << n;
    if p >= dim || q >= dim {
        return Err(Error::Index(format!("({p}, {q}) outside a {dim}×{dim} matrix")));
    }
    let (p1, q1) = (p + 1, q + 1);
    Ok(s.ops()
        .iter()
        .enumerate()
        .map(|(k, op)| op.entry(factor_index(p1, k, n) - 1, factor_index(q1, k, n) - 1))
        .product())
}

/// Expands `h` into its sparse matrix.
///
/// Each string has exactly one nonzero per row, at the column obtained by
/// flipping the X/Y qubits, so only those entries are evaluated.
pub fn expand_to_matrix(h: &PauliSum) -> Result<SparseHermitian> {
    let n = h.n_qubits();
    if n > MAX_QUBITS {
        return Err(Error::Capacity(format!("{n} qubits exceeds the {MAX_QUBITS}-qubit limit")));
    }
    let dim = 1usize << n;
    let mut entries = Vec::with_capacity(dim * h.len());
    for (alpha, s) in h.terms() {
        let mask = s.flip_mask();
        for p in 0..dim {
            let q = p ^ mask;
            entries.push((p, q, alpha * pauli_matrix_entry(s, p, q)?));
        }
    }
    SparseHermitian::from_entries(dim, entries)
}

/// Smallest eigenvalue of a Hermitian matrix with dimension at most 4096.
pub fn min_eigenvalue(m: &SparseHermitian) -> Result<f64> {
    if m.dim() > 4096 {
        return Err(Error::Capacity(format!("dimension {} exceeds 4096", m.dim())));
    }
    if !m.is_hermitian(PRUNE_TOL) {
        return Err(Error::Validity("matrix is not Hermitian".into()));
    }
    if m.nnz() == 0 {
        return Ok(0.0);
    }
    let eig = m.to_dense().symmetric_eigenvalues();
    Ok(eig.iter().copied().fold(f64::INFINITY, f64::min))
}
