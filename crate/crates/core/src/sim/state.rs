use num_complex::Complex64;

use crate::error::{Error, Result};

/// Amplitudes of an `n`-qubit pure state. Qubit 0 is the most significant
/// bit of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    /// Wraps raw amplitudes; the length must be a power of two and the
    /// vector must be normalized within `1e-10`.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(Error::Shape(format!("{} amplitudes is not a power of two", amps.len())));
        }
        let n_qubits = amps.len().trailing_zeros() as usize;
        let s = Self { n_qubits, amps };
        if (s.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::Validity(format!("state norm {} is not 1", s.norm())));
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probability(&self, basis: usize) -> f64 {
        self.amps[basis].norm_sqr()
    }

    fn mask(&self, q: usize) -> usize {
        1 << (self.n_qubits - 1 - q)
    }

    /// Applies the 2×2 unitary `[[a, b], [c, d]]` to qubit `q`.
    fn apply_1q(&mut self, q: usize, a: Complex64, b: Complex64, c: Complex64, d: Complex64) {
        let m = self.mask(q);
        for i in 0..self.amps.len() {
            if i & m == 0 {
                let (x, y) = (self.amps[i], self.amps[i | m]);
                self.amps[i] = a * x + b * y;
                self.amps[i | m] = c * x + d * y;
            }
        }
    }

    pub fn rx(&mut self, q: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let cc = Complex64::new(c, 0.0);
        let ms = Complex64::new(0.0, -s);
        self.apply_1q(q, cc, ms, ms, cc);
    }

    pub fn ry(&mut self, q: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        self.apply_1q(q, c.into(), (-s).into(), s.into(), c.into());
    }

    pub fn rz(&mut self, q: usize, theta: f64) {
        let m = self.mask(q);
        let lo = Complex64::from_polar(1.0, -theta / 2.0);
        let hi = Complex64::from_polar(1.0, theta / 2.0);
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= if i & m == 0 { lo } else { hi };
        }
    }

    pub fn cnot(&mut self, control: usize, target: usize) {
        let (mc, mt) = (self.mask(control), self.mask(target));
        for i in 0..self.amps.len() {
            if i & mc != 0 && i & mt == 0 {
                self.amps.swap(i, i | mt);
            }
        }
    }

    pub fn cz(&mut self, a: usize, b: usize) {
        let m = self.mask(a) | self.mask(b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & m == m {
                *amp = -*amp;
            }
        }
    }
}
