use serde::{Deserialize, Serialize};

use super::StateVector;
use crate::error::{Error, Result};
use crate::models::Application;

/// Circuit families. Parameters are laid out layer by layer, then qubit by
/// qubit, then by rotation slot in gate order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnsatzFamily {
    /// RY, RZ on each qubit, then a CNOT ring.
    ManyBody,
    /// RX, RY, RZ on each qubit, then a CNOT ring.
    Molecular,
    /// RX, RY, RZ, a CZ ring, then RX, RY, RZ again.
    Random,
}

impl AnsatzFamily {
    pub fn params_per_qubit(self) -> usize {
        match self {
            AnsatzFamily::ManyBody => 2,
            AnsatzFamily::Molecular => 3,
            AnsatzFamily::Random => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub family: AnsatzFamily,
    pub n_qubits: usize,
    pub n_layers: usize,
}

impl AnsatzSpec {
    pub fn new(family: AnsatzFamily, n_qubits: usize, n_layers: usize) -> Result<Self> {
        if n_qubits == 0 || n_layers == 0 {
            return Err(Error::Domain("ansatz needs at least one qubit and one layer".into()));
        }
        Ok(Self { family, n_qubits, n_layers })
    }

    /// The circuit used for each application's dataset.
    pub fn for_application(app: Application) -> Self {
        let (family, layers) = match app {
            Application::HeisenbergXYZ | Application::Ising2D | Application::FermiHubbard => (AnsatzFamily::ManyBody, 1),
            Application::H2 => (AnsatzFamily::Molecular, 2),
            Application::RandomVQE => (AnsatzFamily::Random, 2),
        };
        Self { family, n_qubits: app.n_qubits(), n_layers: layers }
    }

    pub fn params_per_qubit(&self) -> usize {
        self.family.params_per_qubit()
    }

    pub fn n_params(&self) -> usize {
        self.n_layers * self.params_per_qubit() * self.n_qubits
    }

    /// Position of rotation `slot` on `qubit` in `layer`.
    pub fn param_index(&self, layer: usize, qubit: usize, slot: usize) -> usize {
        let ppq = self.params_per_qubit();
        layer * ppq * self.n_qubits + qubit * ppq + slot
    }
}

/// Nearest-neighbour pairs `(i, i+1 mod n)`. Two qubits share one bond, so
/// the ring degenerates to a single pair; one qubit has none.
fn ring(n: usize) -> impl Iterator<Item = (usize, usize)> {
    let bonds = match n {
        0 | 1 => 0,
        2 => 1,
        _ => n,
    };
    (0..bonds).map(move |i| (i, (i + 1) % n))
}

/// Prepares the ansatz state from `|0…0⟩`.
pub fn apply_ansatz(spec: &AnsatzSpec, params: &[f64]) -> Result<StateVector> {
    if params.len() != spec.n_params() {
        return Err(Error::Shape(format!(
            "ansatz expects {} parameters, got {}",
            spec.n_params(),
            params.len()
        )));
    }
    let n = spec.n_qubits;
    let mut psi = StateVector::zero(n);
    let at = |l, q, s| params[spec.param_index(l, q, s)];
    for l in 0..spec.n_layers {
        match spec.family {
            AnsatzFamily::ManyBody => {
                for q in 0..n {
                    psi.ry(q, at(l, q, 0));
                    psi.rz(q, at(l, q, 1));
                }
                ring(n).for_each(|(c, t)| psi.cnot(c, t));
            }
            AnsatzFamily::Molecular => {
                for q in 0..n {
                    psi.rx(q, at(l, q, 0));
                    psi.ry(q, at(l, q, 1));
                    psi.rz(q, at(l, q, 2));
                }
                ring(n).for_each(|(c, t)| psi.cnot(c, t));
            }
            AnsatzFamily::Random => {
                for q in 0..n {
                    psi.rx(q, at(l, q, 0));
                    psi.ry(q, at(l, q, 1));
                    psi.rz(q, at(l, q, 2));
                }
                ring(n).for_each(|(a, b)| psi.cz(a, b));
                for q in 0..n {
                    psi.rx(q, at(l, q, 3));
                    psi.ry(q, at(l, q, 4));
                    psi.rz(q, at(l, q, 5));
                }
            }
        }
    }
    Ok(psi)
}
