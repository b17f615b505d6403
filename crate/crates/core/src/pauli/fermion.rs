use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Pauli, PauliString, PauliSum};
use crate::error::{Error, Result};

/// Product of fermionic ladder operators with a coefficient.
///
/// `factors` are applied left to right as written: `[(0, true), (1, false)]`
/// is `c†_0 c_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FermionicTerm {
    pub factors: Vec<(usize, bool)>,
    pub coeff: Complex64,
}

impl FermionicTerm {
    pub fn new(coeff: f64, factors: &[(usize, bool)]) -> Self {
        Self { factors: factors.to_vec(), coeff: Complex64::new(coeff, 0.0) }
    }

    /// Hermitian conjugate: reversed order, daggers toggled, coefficient conjugated.
    pub fn adjoint(&self) -> Self {
        Self {
            factors: self.factors.iter().rev().map(|&(j, d)| (j, !d)).collect(),
            coeff: self.coeff.conj(),
        }
    }
}

/// `I^{⊗j} ⊗ (X ± iY)/2 ⊗ Z^{⊗(n-j-1)}`, with `-` for the creation operator.
fn ladder(j: usize, dagger: bool, n: usize) -> Result<PauliSum> {
    let with = |p: Pauli| {
        let mut ops = vec![Pauli::I; n];
        ops[j] = p;
        ops[j + 1..].fill(Pauli::Z);
        PauliString::new(ops)
    };
    let y_coeff = if dagger { -0.5 } else { 0.5 };
    PauliSum::from_terms(
        n,
        [
            (Complex64::new(0.5, 0.0), with(Pauli::X)?),
            (Complex64::new(0.0, y_coeff), with(Pauli::Y)?),
        ],
    )
}

/// Jordan–Wigner image of a single fermionic term on `n` modes.
pub fn jordan_wigner(term: &FermionicTerm, n: usize) -> Result<PauliSum> {
    if let Some(&(j, _)) = term.factors.iter().find(|(j, _)| *j >= n) {
        return Err(Error::Index(format!("site {j} out of range for {n} modes")));
    }
    let mut acc = PauliSum::from_terms(n, [(term.coeff, PauliString::identity(n))])?;
    for &(j, dagger) in &term.factors {
        acc = acc.mul(&ladder(j, dagger, n)?)?;
    }
    Ok(acc.simplify())
}

/// Jordan–Wigner image of a sum of fermionic terms.
pub fn jordan_wigner_sum(terms: &[FermionicTerm], n: usize) -> Result<PauliSum> {
    let mut acc = PauliSum::new(n)?;
    for t in terms {
        acc = acc.add(&jordan_wigner(t, n)?)?;
    }
    Ok(acc.simplify())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn annihilation_single_mode() {
        let h = jordan_wigner(&FermionicTerm::new(1.0, &[(0, false)]), 1).unwrap();
        assert_eq!(h.coefficient(&"X".parse().unwrap()), c(0.5, 0.0));
        assert_eq!(h.coefficient(&"Y".parse().unwrap()), c(0.0, 0.5));
        assert_eq!(h.len(), 2);
    }

    #[test]
    fn number_operator() {
        let h = jordan_wigner(&FermionicTerm::new(1.0, &[(0, true), (0, false)]), 1).unwrap();
        assert_eq!(h.coefficient(&"I".parse().unwrap()), c(0.5, 0.0));
        assert_eq!(h.coefficient(&"Z".parse().unwrap()), c(-0.5, 0.0));
        assert_eq!(h.len(), 2);
    }

    #[test]
    fn hopping_pair() {
        let hop = FermionicTerm::new(1.0, &[(0, true), (1, false)]);
        let h = jordan_wigner_sum(&[hop.clone(), hop.adjoint()], 2).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.coefficient(&"XX".parse().unwrap()), c(0.5, 0.0));
        assert_eq!(h.coefficient(&"YY".parse().unwrap()), c(0.5, 0.0));
    }

    #[test]
    fn site_out_of_range() {
        let t = FermionicTerm::new(1.0, &[(3, true)]);
        assert!(matches!(jordan_wigner(&t, 2), Err(Error::Index(_))));
    }
}
