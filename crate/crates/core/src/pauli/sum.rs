use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{multiply_strings, PauliString, PRUNE_TOL};
use crate::error::{Error, Result};

/// Weighted sum of equal-length Pauli strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(Complex64, PauliString)>,
}

impl PauliSum {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::Shape("a Pauli sum needs at least one qubit".into()));
        }
        Ok(Self { n_qubits, terms: Vec::new() })
    }

    pub fn from_terms(n_qubits: usize, terms: impl IntoIterator<Item = (Complex64, PauliString)>) -> Result<Self> {
        let mut sum = Self::new(n_qubits)?;
        for (c, s) in terms {
            sum.push(c, s)?;
        }
        Ok(sum)
    }

    /// Sum with real coefficients, strings given as letter words.
    pub fn from_real(n_qubits: usize, terms: &[(f64, &str)]) -> Result<Self> {
        let mut sum = Self::new(n_qubits)?;
        for &(c, s) in terms {
            sum.push(Complex64::new(c, 0.0), s.parse()?)?;
        }
        Ok(sum)
    }

    pub fn push(&mut self, coeff: Complex64, string: PauliString) -> Result<()> {
        if string.len() != self.n_qubits {
            return Err(Error::Shape(format!(
                "Pauli string {string} has length {}, expected {}",
                string.len(),
                self.n_qubits
            )));
        }
        self.terms.push((coeff, string));
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(Complex64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `string`, summing duplicates.
    pub fn coefficient(&self, string: &PauliString) -> Complex64 {
        self.terms.iter().filter(|(_, s)| s == string).map(|(c, _)| *c).sum()
    }

    /// Merges duplicate strings, drops negligible coefficients and sorts
    /// terms by string (I < X < Y < Z, qubit 0 most significant).
    pub fn simplify(&self) -> Self {
        let mut merged: BTreeMap<&PauliString, Complex64> = BTreeMap::new();
        for (c, s) in &self.terms {
            *merged.entry(s).or_default() += *c;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.norm() > PRUNE_TOL)
            .map(|(s, c)| (c, s.clone()))
            .collect();
        Self { n_qubits: self.n_qubits, terms }
    }

    /// True when every coefficient is real to within the pruning tolerance.
    pub fn is_hermitian(&self) -> bool {
        self.terms.iter().all(|(c, _)| c.im.abs() <= PRUNE_TOL)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(c, s)| (c * factor, s.clone())).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_width(other)?;
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().cloned());
        Ok(out.simplify())
    }

    /// Operator product `self · other`, simplified.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_width(other)?;
        let mut out = Self::new(self.n_qubits)?;
        for (ca, sa) in &self.terms {
            for (cb, sb) in &other.terms {
                let (phase, s) = multiply_strings(sa, sb)?;
                out.terms.push((ca * cb * phase, s));
            }
        }
        Ok(out.simplify())
    }

    fn check_width(&self, other: &Self) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Shape(format!(
                "Pauli sums act on {} and {} qubits",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(())
    }

    /// One `<re>±<im>i LETTERS` line per term.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (c, s) in &self.terms {
            writeln!(out, "{} {s}", format_complex(*c)).unwrap();
        }
        out
    }

    /// Parses the line-oriented text format. Blank lines and `#` comments
    /// are skipped; at least one term is required to fix the qubit count.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut sum: Option<Self> = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (c, s) = parse_term(line).map_err(|msg| Error::Parse { line: i + 1, msg })?;
            let target = sum.get_or_insert_with(|| Self { n_qubits: s.len(), terms: Vec::new() });
            target.push(c, s).map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
        }
        sum.ok_or_else(|| Error::Parse { line: 0, msg: "no Pauli terms found".into() })
    }
}

pub(crate) fn format_complex(c: Complex64) -> String {
    format!("{:?}{:+?}i", c.re, c.im)
}

/// Parses `<re>[+-]<im>i`.
pub(crate) fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let body = s.strip_suffix('i').ok_or_else(|| format!("coefficient {s:?} must end in 'i'"))?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'))
        .ok_or_else(|| format!("coefficient {s:?} lacks an imaginary part"))?;
    let re: f64 = body[..split].parse().map_err(|_| format!("bad real part in {s:?}"))?;
    let im: f64 = body[split..].parse().map_err(|_| format!("bad imaginary part in {s:?}"))?;
    Ok(Complex64::new(re, im))
}

pub(crate) fn parse_term(line: &str) -> std::result::Result<(Complex64, PauliString), String> {
    let mut parts = line.split_whitespace();
    let (Some(coeff), Some(letters), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(format!("expected `<coefficient> <LETTERS>`, got {line:?}"));
    };
    let c = parse_complex(coeff)?;
    let s = letters.parse::<PauliString>().map_err(|e| e.to_string())?;
    Ok((c, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn simplify_merges_and_prunes() {
        let h = PauliSum::from_real(2, &[(1.0, "ZZ"), (0.5, "XI"), (-1.0, "ZZ"), (1e-13, "YY")]).unwrap();
        let s = h.simplify();
        assert_eq!(s.len(), 1);
        assert_eq!(s.terms()[0], (Complex64::new(0.5, 0.0), "XI".parse().unwrap()));
    }

    #[test]
    fn width_mismatch_rejected() {
        let mut h = PauliSum::new(2).unwrap();
        assert!(matches!(h.push(Complex64::new(1.0, 0.0), "X".parse().unwrap()), Err(Error::Shape(_))));
    }

    #[test]
    fn parses_documented_example() {
        let (c, s) = parse_term("0.5+0.0i XXIZ").unwrap();
        assert_eq!(c, Complex64::new(0.5, 0.0));
        assert_eq!(s.to_string(), "XXIZ");
        assert_eq!(parse_complex("-1.5e-3-2E+2i").unwrap(), Complex64::new(-1.5e-3, -200.0));
        assert_eq!(parse_complex("+3.7e-01+0.0i").unwrap(), Complex64::new(0.37, 0.0));
    }

    #[test]
    fn text_parse_errors_carry_line_numbers() {
        let err = PauliSum::from_text("# header\n1.0+0.0i XX\n\n2.0 ZZ\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        let err = PauliSum::from_text("1.0+0.0i XX\n1.0+0.0i XXX\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    proptest! {
        #[test]
        fn text_round_trip(terms in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3, "[IXYZ]{3}"), 1..8)) {
            let h = PauliSum::from_terms(3, terms.iter().map(|(re, im, s)| (Complex64::new(*re, *im), s.parse().unwrap()))).unwrap();
            prop_assert_eq!(PauliSum::from_text(&h.to_text()).unwrap(), h);
        }
    }
}
