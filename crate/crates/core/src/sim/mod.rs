//! Dense statevector simulation of the three ansatz families and the VQE
//! optimization loop.

mod ansatz;
mod state;
mod vqe;

pub use ansatz::{apply_ansatz, AnsatzFamily, AnsatzSpec};
pub use state::StateVector;
pub use vqe::{
    convergence_step, energy, expectation, parameter_shift_grad, run_vqe, Observable, Scheduler, VqeConfig,
    VqeTrace, DEFAULT_CONVERGENCE_TOL,
};
