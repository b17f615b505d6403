use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{apply_ansatz, AnsatzSpec, StateVector};
use crate::error::{Error, Result};
use crate::models::Application;
use crate::pauli::SparseHermitian;
use crate::tensor::{AdamConfig, AdamState};

pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-5;

/// Imaginary residue of ⟨ψ|H|ψ⟩ above which the matrix is treated as
/// non-Hermitian.
const IMAG_TOL: f64 = 1e-8;

/// A Hamiltonian flattened for repeated expectation values.
#[derive(Debug, Clone)]
pub struct Observable {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl Observable {
    pub fn new(h: &SparseHermitian) -> Self {
        Self { dim: h.dim(), entries: h.iter().collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        if psi.dim() != self.dim {
            return Err(Error::Shape(format!("state of dim {} against a {}-dim operator", psi.dim(), self.dim)));
        }
        let a = psi.amplitudes();
        let mut acc = Complex64::new(0.0, 0.0);
        for &(p, q, v) in &self.entries {
            acc += a[p].conj() * v * a[q];
        }
        if acc.im.abs() > IMAG_TOL {
            return Err(Error::Numerical(format!("⟨ψ|H|ψ⟩ has imaginary part {}", acc.im)));
        }
        Ok(acc.re)
    }
}

/// ⟨ψ|H|ψ⟩ for a single evaluation.
pub fn expectation(h: &SparseHermitian, psi: &StateVector) -> Result<f64> {
    Observable::new(h).expectation(psi)
}

/// Energy of the ansatz state at `params`.
pub fn energy(obs: &Observable, spec: &AnsatzSpec, params: &[f64]) -> Result<f64> {
    obs.expectation(&apply_ansatz(spec, params)?)
}

fn shift_grad(obs: &Observable, spec: &AnsatzSpec, params: &[f64]) -> Result<Vec<f64>> {
    let mut shifted = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        shifted[k] = params[k] + FRAC_PI_2;
        let plus = energy(obs, spec, &shifted)?;
        shifted[k] = params[k] - FRAC_PI_2;
        let minus = energy(obs, spec, &shifted)?;
        shifted[k] = params[k];
        grad.push((plus - minus) / 2.0);
    }
    Ok(grad)
}

/// Exact gradient of the energy by the two-term shift rule.
pub fn parameter_shift_grad(h: &SparseHermitian, spec: &AnsatzSpec, params: &[f64]) -> Result<Vec<f64>> {
    if params.len() != spec.n_params() {
        return Err(Error::Shape(format!("expected {} parameters, got {}", spec.n_params(), params.len())));
    }
    shift_grad(&Observable::new(h), spec, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheduler {
    Constant,
    CosineAnnealing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    pub weight_decay: f64,
    pub scheduler: Scheduler,
    pub convergence_rel_tol: f64,
    pub seed: u64,
    /// Stop at the convergence step instead of running to `max_steps`.
    #[serde(default)]
    pub early_stop: bool,
}

impl Default for VqeConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            max_steps: 2000,
            weight_decay: 0.0,
            scheduler: Scheduler::Constant,
            convergence_rel_tol: DEFAULT_CONVERGENCE_TOL,
            seed: 0,
            early_stop: false,
        }
    }
}

impl VqeConfig {
    pub fn for_application(app: Application) -> Self {
        match app {
            Application::RandomVQE => Self {
                learning_rate: 5e-3,
                weight_decay: 1e-4,
                scheduler: Scheduler::CosineAnnealing,
                ..Self::default()
            },
            _ => Self::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validity(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.max_steps == 0 {
            return Err(Error::Validity("max_steps must be at least 1".into()));
        }
        if !(self.weight_decay >= 0.0) || !(self.convergence_rel_tol > 0.0) {
            return Err(Error::Validity("weight decay and convergence tolerance must be non-negative".into()));
        }
        Ok(())
    }

    /// Learning rate applied at update `t` (0-based).
    pub fn lr_at(&self, t: usize) -> f64 {
        match self.scheduler {
            Scheduler::Constant => self.learning_rate,
            Scheduler::CosineAnnealing => {
                self.learning_rate * (1.0 + (PI * t as f64 / self.max_steps as f64).cos()) / 2.0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeTrace {
    /// Energy at the start of each step, before that step's update.
    pub loss_history: Vec<f64>,
    pub final_params: Vec<f64>,
    /// Energy at `final_params`.
    pub final_loss: f64,
    pub converged_step: Option<usize>,
    pub config: VqeConfig,
    pub seed: u64,
}

impl VqeTrace {
    pub fn initial_loss(&self) -> f64 {
        self.loss_history[0]
    }
}

/// First `t ≥ 1` whose relative loss change falls below `tol`.
pub fn convergence_step(history: &[f64], tol: f64) -> Option<usize> {
    (1..history.len()).find(|&t| {
        let prev = history[t - 1];
        (history[t] - prev).abs() / prev.abs().max(1e-12) < tol
    })
}

/// Minimizes ⟨H⟩ over the ansatz parameters with Adam, starting at `init`.
pub fn run_vqe(h: &SparseHermitian, spec: &AnsatzSpec, cfg: &VqeConfig, init: &[f64]) -> Result<VqeTrace> {
    cfg.validate()?;
    if init.len() != spec.n_params() {
        return Err(Error::Shape(format!("expected {} initial parameters, got {}", spec.n_params(), init.len())));
    }
    if h.dim() != 1 << spec.n_qubits {
        return Err(Error::Shape(format!("{}-qubit ansatz against a {}-dim Hamiltonian", spec.n_qubits, h.dim())));
    }
    let obs = Observable::new(h);
    let adam = AdamConfig { lr: cfg.learning_rate, weight_decay: cfg.weight_decay, ..AdamConfig::default() };
    let mut state = AdamState::new(init.len());
    let mut params = init.to_vec();
    let mut history = Vec::with_capacity(cfg.max_steps);
    let mut converged = None;

    for t in 0..cfg.max_steps {
        let loss = energy(&obs, spec, &params)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { step: t, loss });
        }
        history.push(loss);
        if converged.is_none() && t >= 1 {
            converged = convergence_step(&history[t - 1..], cfg.convergence_rel_tol).map(|_| t);
            if converged.is_some() && cfg.early_stop {
                break;
            }
        }
        let grad = shift_grad(&obs, spec, &params)?;
        state.update(&mut params, &grad, &adam, cfg.lr_at(t));
    }

    let final_loss = energy(&obs, spec, &params)?;
    if !final_loss.is_finite() {
        return Err(Error::Divergence { step: history.len(), loss: final_loss });
    }
    Ok(VqeTrace {
        loss_history: history,
        final_params: params,
        final_loss,
        converged_step: converged,
        config: cfg.clone(),
        seed: cfg.seed,
    })
}
