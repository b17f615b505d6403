//! Dataset construction: sample instances, run the label-generating VQE,
//! serialize records and split them.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{hamiltonian_to_graph, HamiltonianGraph};
use crate::jsonl;
use crate::models::{
    fermi_hubbard, heisenberg_xyz, ising_2d, ising_lattice, random_hamiltonian, reference_h2, sample_grid,
    Application, InstanceMeta,
};
use crate::pauli::{expand_to_matrix, min_eigenvalue, PauliSum};
use crate::sim::{run_vqe, AnsatzSpec, VqeConfig};

pub const SCHEMA: &str = "qracle-v1";

/// Fraction of instances whose VQE may diverge before the build fails.
pub const MAX_SKIP_FRACTION: f64 = 0.05;

/// Slack allowed below the exact ground energy.
pub const VARIATIONAL_TOL: f64 = 1e-9;

const STREAM_INIT: u64 = 1;
const STREAM_INSTANCE: u64 = 2;
const STREAM_SUBSET: u64 = 3;

/// Independent ChaCha8 stream for one `(purpose, index)` pair.
pub fn stream_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 48) | index);
    rng
}

/// Standard-normal vector of length `n`.
pub fn standard_normal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Where the label-generating VQE starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPolicy {
    /// One standard-normal draw shared by every instance of the dataset.
    Shared,
    /// A fresh standard-normal draw per instance.
    PerInstance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub application: Application,
    pub count: usize,
    pub seed: u64,
    pub vqe: VqeConfig,
    pub init: InitPolicy,
    /// Inclusive range of term counts for random Hamiltonians.
    pub random_terms: (usize, usize),
    pub random_coeff: (f64, f64),
    /// Histories longer than this are stored every 10th step plus the last.
    pub history_cap: usize,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl DatasetConfig {
    pub fn new(application: Application, count: usize, seed: u64) -> Self {
        Self {
            application,
            count,
            seed,
            vqe: VqeConfig { seed, ..VqeConfig::for_application(application) },
            init: InitPolicy::Shared,
            random_terms: (4, 20),
            random_coeff: (-1.0, 1.0),
            history_cap: 1000,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeRecord {
    pub graph: HamiltonianGraph,
    /// Optimized parameters.
    pub label: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub ground_energy: f64,
    /// Computed on the full history before any decimation.
    pub converged_step: Option<usize>,
    /// Steps actually run.
    pub steps: usize,
    /// Spacing of the stored history; the last step is always kept.
    pub history_stride: usize,
    pub loss_history: Vec<f64>,
}

impl VqeRecord {
    pub fn meta(&self) -> &InstanceMeta {
        &self.graph.meta
    }

    /// Step index of every stored history entry.
    pub fn history_steps(&self) -> Vec<usize> {
        decimated_steps(self.steps, self.history_stride)
    }

    /// Lowest stored or final loss minus the ground energy.
    pub fn bound_margin(&self) -> f64 {
        self.loss_history.iter().copied().fold(self.final_loss, f64::min) - self.ground_energy
    }
}

fn decimated_steps(len: usize, stride: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = (0..len).step_by(stride.max(1)).collect();
    if len > 0 && steps.last() != Some(&(len - 1)) {
        steps.push(len - 1);
    }
    steps
}

/// One instance before its VQE run.
#[derive(Debug, Clone)]
pub struct Instance {
    pub meta: InstanceMeta,
    pub hamiltonian: PauliSum,
}

/// Samples the Hamiltonians of a dataset.
pub fn sample_instances(cfg: &DatasetConfig) -> Result<Vec<Instance>> {
    let app = cfg.application;
    let n = app.n_qubits();
    match app {
        Application::HeisenbergXYZ | Application::Ising2D | Application::FermiHubbard => {
            let grid = app.default_grid(cfg.count, cfg.seed).expect("lattice models have grids");
            sample_grid(&grid)?
                .into_iter()
                .enumerate()
                .map(|(i, v)| {
                    let h = match app {
                        Application::HeisenbergXYZ => heisenberg_xyz(n, v[0], v[1], v[2])?,
                        Application::Ising2D => {
                            let (r, c) = ising_lattice(n);
                            ising_2d(n, r, c, v[0], v[1])?
                        }
                        _ => fermi_hubbard(n, v[0], v[1])?,
                    };
                    Ok(Instance { meta: InstanceMeta::new(app, i, n, &v)?, hamiltonian: h })
                })
                .collect()
        }
        Application::H2 => {
            let all = reference_h2()?;
            if cfg.count > all.len() {
                return Err(Error::Capacity(format!("{} H2 instances requested, {} available", cfg.count, all.len())));
            }
            let mut picks: Vec<usize> = if cfg.count == all.len() {
                (0..all.len()).collect()
            } else {
                let mut rng = stream_rng(cfg.seed, STREAM_SUBSET, 0);
                rand::seq::index::sample(&mut rng, all.len(), cfg.count).into_vec()
            };
            picks.sort_unstable();
            Ok(picks
                .into_iter()
                .enumerate()
                .map(|(i, k)| {
                    let (mut meta, h) = all[k].clone();
                    meta.index = i;
                    Instance { meta, hamiltonian: h }
                })
                .collect())
        }
        Application::RandomVQE => {
            let (lo, hi) = cfg.random_terms;
            if lo == 0 || lo > hi {
                return Err(Error::Domain(format!("term-count range {lo}..={hi}")));
            }
            (0..cfg.count)
                .map(|i| {
                    let mut rng = stream_rng(cfg.seed, STREAM_INSTANCE, i as u64);
                    let terms = rng.random_range(lo..=hi);
                    let h = random_hamiltonian(n, terms, cfg.random_coeff, rng.random())?;
                    Ok(Instance { meta: InstanceMeta::new(app, i, n, &[])?, hamiltonian: h })
                })
                .collect()
        }
    }
}

/// Starting parameters of the label VQE for instance `index`.
pub fn label_init(cfg: &DatasetConfig, index: usize) -> Vec<f64> {
    let n = AnsatzSpec::for_application(cfg.application).n_params();
    let stream = match cfg.init {
        InitPolicy::Shared => 0,
        InitPolicy::PerInstance => index as u64 + 1,
    };
    standard_normal(&mut stream_rng(cfg.seed, STREAM_INIT, stream), n)
}

/// Runs one instance end to end. `Ok(None)` means the VQE diverged.
fn build_record(cfg: &DatasetConfig, inst: &Instance) -> Result<Option<VqeRecord>> {
    let spec = AnsatzSpec::for_application(cfg.application);
    let matrix = expand_to_matrix(&inst.hamiltonian)?;
    let ground = min_eigenvalue(&matrix)?;
    let graph = hamiltonian_to_graph(&inst.hamiltonian, &inst.meta)?;
    let trace = match run_vqe(&matrix, &spec, &cfg.vqe, &label_init(cfg, inst.meta.index)) {
        Ok(t) => t,
        Err(Error::Divergence { step, loss }) => {
            log::warn!("instance {} diverged at step {step} (loss {loss}); skipped", inst.meta.index);
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let lowest = trace.loss_history.iter().copied().fold(trace.final_loss, f64::min);
    if lowest < ground - VARIATIONAL_TOL {
        return Err(Error::Numerical(format!(
            "instance {}: loss {lowest} below ground energy {ground}",
            inst.meta.index
        )));
    }
    let steps = trace.loss_history.len();
    let stride = if steps > cfg.history_cap { 10 } else { 1 };
    let loss_history = if stride == 1 {
        trace.loss_history
    } else {
        decimated_steps(steps, stride).into_iter().map(|s| trace.loss_history[s]).collect()
    };
    Ok(Some(VqeRecord {
        graph,
        label: trace.final_params,
        initial_loss: loss_history[0],
        final_loss: trace.final_loss,
        ground_energy: ground,
        converged_step: trace.converged_step,
        steps,
        history_stride: stride,
        loss_history,
    }))
}

/// Runs `f` on a pool of `jobs` threads (0 = pool default).
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Pipeline(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Summary of a build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub requested: usize,
    pub skipped: Vec<usize>,
}

/// Builds every record of a dataset, ordered by instance index.
pub fn build_dataset(cfg: &DatasetConfig) -> Result<(Vec<VqeRecord>, BuildStats)> {
    cfg.vqe.validate()?;
    let instances = sample_instances(cfg)?;
    let results: Vec<Result<Option<VqeRecord>>> =
        with_pool(cfg.jobs, || instances.par_iter().map(|inst| build_record(cfg, inst)).collect())?;
    let mut records = Vec::with_capacity(instances.len());
    let mut skipped = Vec::new();
    for (inst, r) in instances.iter().zip(results) {
        match r? {
            Some(rec) => records.push(rec),
            None => skipped.push(inst.meta.index),
        }
    }
    if skipped.len() as f64 > MAX_SKIP_FRACTION * instances.len() as f64 {
        return Err(Error::Pipeline(format!(
            "{} of {} instances diverged (limit {:.0}%)",
            skipped.len(),
            instances.len(),
            MAX_SKIP_FRACTION * 100.0
        )));
    }
    Ok((records, BuildStats { requested: instances.len(), skipped }))
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
}

pub fn save_dataset(records: &[VqeRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", jsonl::to_line(&Header { schema: SCHEMA.into() })?)?;
    for r in records {
        writeln!(out, "{}", jsonl::to_line(r)?)?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<VqeRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| Error::Format("dataset file has no header line".into()))??;
    match serde_json::from_str::<Header>(&header) {
        Ok(h) if h.schema == SCHEMA => {}
        Ok(h) => return Err(Error::Format(format!("schema {:?}, expected {SCHEMA:?}", h.schema))),
        Err(e) => return Err(Error::Format(format!("bad header line: {e}"))),
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() })?;
        records.push(rec);
    }
    Ok(records)
}

/// Seeded 70/30 partition of record indices.
/// A graph paired with its label parameters.
pub type Example = (HamiltonianGraph, Vec<f64>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

pub const TRAIN_FRACTION: f64 = 0.7;

pub fn split(n_records: usize, seed: u64) -> Result<SplitManifest> {
    if n_records < 2 {
        return Err(Error::Size(format!("cannot split {n_records} records")));
    }
    let mut idx: Vec<usize> = (0..n_records).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (TRAIN_FRACTION * n_records as f64).round() as usize;
    let test = idx.split_off(n_train);
    Ok(SplitManifest { seed, train_indices: idx, test_indices: test })
}

impl SplitManifest {
    pub fn validate(&self, n_records: usize) -> Result<()> {
        let mut seen = vec![false; n_records];
        for &i in self.train_indices.iter().chain(&self.test_indices) {
            if i >= n_records || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Consistency(format!("split index {i} repeated or out of range")));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Consistency("split does not cover every record".into()));
        }
        Ok(())
    }

    /// `(train, test)` pairs of graph and label.
    pub fn select(&self, records: &[VqeRecord]) -> Result<(Vec<Example>, Vec<Example>)> {
        self.validate(records.len())?;
        let pick = |ix: &[usize]| ix.iter().map(|&i| (records[i].graph.clone(), records[i].label.clone())).collect();
        Ok((pick(&self.train_indices), pick(&self.test_indices)))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(app: Application, count: usize, seed: u64) -> DatasetConfig {
        let mut cfg = DatasetConfig::new(app, count, seed);
        cfg.vqe.max_steps = 20;
        cfg
    }

    #[test]
    fn two_distinct_heisenberg_records() {
        let (recs, stats) = build_dataset(&quick(Application::HeisenbergXYZ, 2, 7)).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(stats.skipped.is_empty());
        assert_ne!(recs[0].meta().params, recs[1].meta().params);
        assert!(recs.iter().all(|r| r.label.len() == 8 && r.bound_margin() >= -VARIATIONAL_TOL));
    }

    #[test]
    fn label_lengths_follow_the_ansatz() {
        let (recs, _) = build_dataset(&quick(Application::H2, 2, 1)).unwrap();
        assert!(recs.iter().all(|r| r.label.len() == 24));
        let (recs, _) = build_dataset(&quick(Application::RandomVQE, 2, 1)).unwrap();
        assert!(recs.iter().all(|r| r.label.len() == 48 && r.graph.feature_dim() == 2));
    }

    #[test]
    fn init_policies() {
        let mut cfg = quick(Application::HeisenbergXYZ, 3, 5);
        assert_eq!(label_init(&cfg, 0), label_init(&cfg, 2));
        cfg.init = InitPolicy::PerInstance;
        assert_ne!(label_init(&cfg, 0), label_init(&cfg, 2));
    }

    #[test]
    fn long_histories_are_decimated() {
        let mut cfg = quick(Application::HeisenbergXYZ, 1, 3);
        cfg.vqe.max_steps = 25;
        cfg.history_cap = 20;
        let (recs, _) = build_dataset(&cfg).unwrap();
        let r = &recs[0];
        assert_eq!(r.history_steps(), vec![0, 10, 20, 24]);
        assert_eq!(r.loss_history.len(), 4);
        assert_eq!(r.steps, 25);
    }

    #[test]
    fn save_load_round_trip_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick(Application::FermiHubbard, 2, 11);
        let (a, _) = build_dataset(&cfg).unwrap();
        let (b, _) = build_dataset(&DatasetConfig { jobs: 1, ..cfg }).unwrap();
        let (pa, pb) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        save_dataset(&a, &pa).unwrap();
        save_dataset(&b, &pb).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
        assert_eq!(load_dataset(&pa).unwrap(), a);
    }

    #[test]
    fn empty_and_broken_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.jsonl");
        save_dataset(&[], &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "{\"schema\":\"qracle-v1\"}\n");
        assert!(load_dataset(&p).unwrap().is_empty());

        let (recs, _) = build_dataset(&quick(Application::HeisenbergXYZ, 2, 2)).unwrap();
        save_dataset(&recs, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        std::fs::write(&p, &text[..text.len() - 40]).unwrap();
        assert!(matches!(load_dataset(&p), Err(Error::Parse { line: 3, .. })));

        std::fs::write(&p, "{\"schema\":\"qracle-v0\"}\n").unwrap();
        assert!(matches!(load_dataset(&p), Err(Error::Format(_))));
    }

    #[test]
    fn split_sizes() {
        let s = split(10, 4).unwrap();
        assert_eq!((s.train_indices.len(), s.test_indices.len()), (7, 3));
        s.validate(10).unwrap();
        let s = split(2000, 4).unwrap();
        assert_eq!((s.train_indices.len(), s.test_indices.len()), (1400, 600));
        assert!(matches!(split(1, 0), Err(Error::Size(_))));
        assert_eq!(split(50, 9).unwrap(), split(50, 9).unwrap());
    }

    #[test]
    fn h2_subset_is_sorted_and_bounded() {
        let insts = sample_instances(&quick(Application::H2, 5, 3)).unwrap();
        let bonds: Vec<f64> = insts.iter().map(|i| i.meta.param_values().next().unwrap()).collect();
        assert!(bonds.windows(2).all(|w| w[0] < w[1]));
        assert!(matches!(sample_instances(&quick(Application::H2, 151, 3)), Err(Error::Capacity(_))));
    }
}
