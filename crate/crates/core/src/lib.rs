//! Hamiltonian graphs, statevector VQE and a from-scratch GNN that predicts
//! VQE initial parameters.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod gnn;
pub mod graph;
pub mod jsonl;
pub mod models;
pub mod pauli;
pub mod sim;
pub mod tensor;

pub use error::{Error, Result};
