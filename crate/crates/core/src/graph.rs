//! Hamiltonian → directed weighted graph conversion.
//!
//! Every computational basis state becomes a node; every nonzero matrix
//! entry `H[p][q]` becomes an edge `p → q` carrying the complex entry. Node
//! features are `[(p + 1) / 2^n, n_qubits, instance params…]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Application, InstanceMeta};
use crate::pauli::{expand_to_matrix, PauliSum, SparseHermitian};

/// Node feature width per application: index, qubit count, then the
/// instance parameters.
pub fn feature_dim(app: Application) -> usize {
    2 + app.param_names().len()
}

/// Real adjacency weight of a complex edge: its magnitude.
pub fn adjacency_weight(w: (f64, f64)) -> f64 {
    w.0.hypot(w.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64, f64)", into = "(usize, usize, f64, f64)")]
pub struct GraphEdge {
    pub src: usize,
    pub dst: usize,
    /// `(re, im)` of the matrix entry.
    pub weight: (f64, f64),
}

impl From<(usize, usize, f64, f64)> for GraphEdge {
    fn from((src, dst, re, im): (usize, usize, f64, f64)) -> Self {
        Self { src, dst, weight: (re, im) }
    }
}

impl From<GraphEdge> for (usize, usize, f64, f64) {
    fn from(e: GraphEdge) -> Self {
        (e.src, e.dst, e.weight.0, e.weight.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianGraph {
    pub meta: InstanceMeta,
    pub n_nodes: usize,
    /// Row-major `n_nodes × feature_dim`.
    pub features: Vec<f64>,
    pub edges: Vec<GraphEdge>,
}

impl HamiltonianGraph {
    pub fn feature_dim(&self) -> usize {
        self.features.len().checked_div(self.n_nodes).unwrap_or(0)
    }

    pub fn feature_row(&self, node: usize) -> &[f64] {
        let d = self.feature_dim();
        &self.features[node * d..(node + 1) * d]
    }

    /// Places each edge weight back at `(src, dst)`.
    pub fn to_sparse(&self) -> Result<SparseHermitian> {
        SparseHermitian::from_entries(
            self.n_nodes,
            self.edges
                .iter()
                .map(|e| (e.src, e.dst, num_complex::Complex64::new(e.weight.0, e.weight.1))),
        )
    }

    /// Relabels node `i` as `perm[i]`, moving its feature row and edges.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_nodes;
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Validity("not a permutation of the node set".into()));
        }
        let d = self.feature_dim();
        let mut features = vec![0.0; self.features.len()];
        for (old, &new) in perm.iter().enumerate() {
            features[new * d..(new + 1) * d].copy_from_slice(self.feature_row(old));
        }
        let edges = self
            .edges
            .iter()
            .map(|e| GraphEdge { src: perm[e.src], dst: perm[e.dst], weight: e.weight })
            .collect();
        Ok(Self { meta: self.meta.clone(), n_nodes: n, features, edges })
    }

    pub fn to_json_line(&self) -> Result<String> {
        crate::jsonl::to_line(self)
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        Ok(serde_json::from_str(line)?)
    }
}

/// Builds the graph of a Hermitian Pauli sum.
pub fn hamiltonian_to_graph(h: &PauliSum, meta: &InstanceMeta) -> Result<HamiltonianGraph> {
    if !h.is_hermitian() {
        return Err(Error::Validity("Hamiltonian has complex coefficients".into()));
    }
    if meta.n_qubits != h.n_qubits() {
        return Err(Error::Shape(format!(
            "metadata declares {} qubits, Hamiltonian acts on {}",
            meta.n_qubits,
            h.n_qubits()
        )));
    }
    if meta.params.len() != meta.application.param_names().len() {
        return Err(Error::Shape(format!("{} expects parameters {:?}", meta.application, meta.application.param_names())));
    }
    let m = expand_to_matrix(h)?;
    let n_nodes = m.dim();
    let d = feature_dim(meta.application);
    let mut features = Vec::with_capacity(n_nodes * d);
    for p in 0..n_nodes {
        features.push((p + 1) as f64 / n_nodes as f64);
        features.push(meta.n_qubits as f64);
        features.extend(meta.param_values());
    }
    let edges = m
        .iter()
        .map(|(src, dst, w)| GraphEdge { src, dst, weight: (w.re, w.im) })
        .collect();
    Ok(HamiltonianGraph { meta: meta.clone(), n_nodes, features, edges })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(n: usize) -> InstanceMeta {
        InstanceMeta::new(Application::RandomVQE, 0, n, &[]).unwrap()
    }

    #[test]
    fn feature_dims() {
        assert_eq!(feature_dim(Application::HeisenbergXYZ), 5);
        assert_eq!(feature_dim(Application::Ising2D), 4);
        assert_eq!(feature_dim(Application::FermiHubbard), 4);
        assert_eq!(feature_dim(Application::H2), 3);
        assert_eq!(feature_dim(Application::RandomVQE), 2);
    }

    #[test]
    fn adjacency_weights() {
        assert_eq!(adjacency_weight((1.0, 0.0)), 1.0);
        assert_eq!(adjacency_weight((0.0, -1.0)), 1.0);
        assert_eq!(adjacency_weight((3.0, 4.0)), 5.0);
    }

    #[test]
    fn identity_graph() {
        let g = hamiltonian_to_graph(&PauliSum::from_real(2, &[(1.0, "II")]).unwrap(), &meta(2)).unwrap();
        assert_eq!(g.n_nodes, 4);
        assert_eq!(g.edges.len(), 4);
        assert!(g.edges.iter().all(|e| e.src == e.dst && e.weight == (1.0, 0.0)));
        assert_eq!(g.feature_row(0), &[0.25, 2.0]);
        assert_eq!(g.feature_row(3), &[1.0, 2.0]);
    }

    #[test]
    fn z_and_x_graphs() {
        let z = hamiltonian_to_graph(&PauliSum::from_real(1, &[(1.0, "Z")]).unwrap(), &meta(1)).unwrap();
        let ws: Vec<_> = z.edges.iter().map(|e| (e.src, e.dst, e.weight)).collect();
        assert_eq!(ws, [(0, 0, (1.0, 0.0)), (1, 1, (-1.0, 0.0))]);

        let x = hamiltonian_to_graph(&PauliSum::from_real(1, &[(1.0, "X")]).unwrap(), &meta(1)).unwrap();
        let ws: Vec<_> = x.edges.iter().map(|e| (e.src, e.dst, e.weight)).collect();
        assert_eq!(ws, [(0, 1, (1.0, 0.0)), (1, 0, (1.0, 0.0))]);
    }

    #[test]
    fn rejects_complex_coefficients() {
        let h = PauliSum::from_terms(1, [(num_complex::Complex64::new(0.0, 1.0), "X".parse().unwrap())]).unwrap();
        assert!(matches!(hamiltonian_to_graph(&h, &meta(1)), Err(Error::Validity(_))));
    }

    #[test]
    fn json_line_round_trip() {
        let h = PauliSum::from_real(2, &[(0.1, "XY"), (-1.0 / 3.0, "ZZ"), (0.7, "YX")]).unwrap();
        let m = InstanceMeta::new(Application::Ising2D, 3, 2, &[0.1, 0.3]).unwrap();
        let g = hamiltonian_to_graph(&h, &m).unwrap();
        let line = g.to_json_line().unwrap();
        assert!(line.starts_with("{\"meta\":"));
        assert_eq!(HamiltonianGraph::from_json_line(&line).unwrap(), g);
    }
}
