//! Metrics and the Random-vs-GNN initialization comparison.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{standard_normal, stream_rng, with_pool, VqeRecord};
use crate::error::{Error, Result};
use crate::gnn::GnnModel;
use crate::models::Application;
use crate::sim::{run_vqe, AnsatzSpec, VqeConfig};

const DEGENERATE: f64 = 1e-12;
const STREAM_EVAL: u64 = 4;

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!("metric inputs of lengths {} and {}", a.len(), b.len())));
    }
    Ok(())
}

/// Symmetric mean absolute percentage error with the half-sum denominator,
/// in percent. Pairs with `|p| + |t| < 1e-12` contribute 0.
pub fn smape(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let total: f64 = pred
        .iter()
        .zip(truth)
        .map(|(&p, &t)| {
            let denom = p.abs() + t.abs();
            if denom < DEGENERATE {
                0.0
            } else {
                2.0 * (p - t).abs() / denom
            }
        })
        .sum();
    Ok(100.0 * total / pred.len() as f64)
}

/// Mean relative error in percent.
pub fn mre(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred, truth)?;
    if let Some(t) = truth.iter().find(|t| t.abs() <= DEGENERATE) {
        return Err(Error::Domain(format!("relative error against a reference of {t}")));
    }
    let total: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs() / t.abs()).sum();
    Ok(100.0 * total / pred.len() as f64)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    check_lengths(a, b)?;
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let (sa, sb) = (sq(a), sq(b));
    if sa.sqrt() <= DEGENERATE || sb.sqrt() <= DEGENERATE {
        return Err(Error::Domain("cosine similarity of a zero vector".into()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    // A single square root keeps cos(a, a) exactly 1.
    Ok((dot / (sa * sb).sqrt()).clamp(-1.0, 1.0))
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Random,
    Gnn,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Random => "random",
            Scheme::Gnn => "gnn",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Scheme::Random),
            "gnn" => Ok(Scheme::Gnn),
            _ => Err(Error::Validity(format!("unknown scheme {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    /// Instance index from the record metadata.
    pub index: usize,
    pub init: Vec<f64>,
    pub initial_loss: f64,
    pub final_energy: f64,
    pub ground_energy: f64,
    /// `max_steps` when the tolerance was never met.
    pub converged_step: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub application: Application,
    pub instances: Vec<InstanceResult>,
    pub mean_initial_loss: f64,
    pub mean_final_energy: f64,
    pub mean_ground_energy: f64,
    pub mean_converged_step: f64,
    /// SMAPE of final energies against ground energies, in percent.
    pub smape: f64,
}

impl SchemeResult {
    fn from_instances(scheme: Scheme, application: Application, instances: Vec<InstanceResult>) -> Result<Self> {
        let finals: Vec<f64> = instances.iter().map(|r| r.final_energy).collect();
        let grounds: Vec<f64> = instances.iter().map(|r| r.ground_energy).collect();
        Ok(Self {
            scheme,
            application,
            mean_initial_loss: mean(instances.iter().map(|r| r.initial_loss)),
            mean_final_energy: mean(finals.iter().copied()),
            mean_ground_energy: mean(grounds.iter().copied()),
            mean_converged_step: mean(instances.iter().map(|r| r.converged_step as f64)),
            smape: smape(&finals, &grounds)?,
            instances,
        })
    }

    pub fn initial_losses(&self) -> Vec<f64> {
        self.instances.iter().map(|r| r.initial_loss).collect()
    }
}

/// Initial parameters the scheme assigns to `rec`.
pub fn scheme_init(scheme: Scheme, model: Option<&GnnModel>, rec: &VqeRecord, seed: u64) -> Result<Vec<f64>> {
    match scheme {
        Scheme::Random => {
            let n = AnsatzSpec::for_application(rec.meta().application).n_params();
            Ok(standard_normal(&mut stream_rng(seed, STREAM_EVAL, rec.meta().index as u64), n))
        }
        Scheme::Gnn => model
            .ok_or_else(|| Error::Validity("the gnn scheme needs a trained model".into()))?
            .predict_init(&rec.graph),
    }
}

/// Runs VQE from the scheme's initialization on every test record.
pub fn evaluate_scheme(
    scheme: Scheme,
    model: Option<&GnnModel>,
    records: &[VqeRecord],
    vqe: &VqeConfig,
    seed: u64,
    jobs: usize,
) -> Result<SchemeResult> {
    let app = records
        .first()
        .ok_or_else(|| Error::Size("no test records".into()))?
        .meta()
        .application;
    if let Some(r) = records.iter().find(|r| r.meta().application != app) {
        return Err(Error::Consistency(format!("test set mixes {app} and {}", r.meta().application)));
    }
    let spec = AnsatzSpec::for_application(app);
    let one = |rec: &VqeRecord| -> Result<InstanceResult> {
        let init = scheme_init(scheme, model, rec, seed)?;
        let h = rec.graph.to_sparse()?;
        let trace = run_vqe(&h, &spec, vqe, &init)?;
        Ok(InstanceResult {
            index: rec.meta().index,
            initial_loss: trace.initial_loss(),
            final_energy: trace.final_loss,
            ground_energy: rec.ground_energy,
            converged_step: trace.converged_step.unwrap_or(vqe.max_steps),
            converged: trace.converged_step.is_some(),
            init,
        })
    };
    let results: Vec<Result<InstanceResult>> = with_pool(jobs, || records.par_iter().map(one).collect())?;
    let instances = results.into_iter().collect::<Result<Vec<_>>>()?;
    SchemeResult::from_instances(scheme, app, instances)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scheme: String,
    pub metric: String,
    pub mean: f64,
    pub n: usize,
}

pub const METRICS: [&str; 3] = ["initial_loss", "smape", "convergence_step"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub application: Application,
    pub rows: Vec<ReportRow>,
}

fn metric_value(r: &SchemeResult, metric: &str) -> f64 {
    match metric {
        "initial_loss" => r.mean_initial_loss,
        "smape" => r.smape,
        _ => r.mean_converged_step,
    }
}

/// Per-scheme means plus `delta` rows (gnn − random) when both schemes are
/// present.
pub fn report(results: &[SchemeResult]) -> Result<ComparisonReport> {
    let first = results.first().ok_or_else(|| Error::Size("nothing to report".into()))?;
    let key = |r: &SchemeResult| -> Vec<(usize, u64)> {
        r.instances.iter().map(|i| (i.index, i.ground_energy.to_bits())).collect()
    };
    for r in &results[1..] {
        if r.application != first.application || key(r) != key(first) {
            return Err(Error::Consistency("scheme results cover different test sets".into()));
        }
    }
    let mut rows = Vec::new();
    for r in results {
        for m in METRICS {
            rows.push(ReportRow { scheme: r.scheme.name().into(), metric: m.into(), mean: metric_value(r, m), n: r.instances.len() });
        }
    }
    let find = |s| results.iter().find(|r| r.scheme == s);
    if let (Some(g), Some(r)) = (find(Scheme::Gnn), find(Scheme::Random)) {
        for m in METRICS {
            rows.push(ReportRow {
                scheme: "delta".into(),
                metric: m.into(),
                mean: metric_value(g, m) - metric_value(r, m),
                n: g.instances.len(),
            });
        }
    }
    Ok(ComparisonReport { application: first.application, rows })
}

impl ComparisonReport {
    pub fn get(&self, scheme: &str, metric: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.scheme == scheme && r.metric == metric).map(|r| r.mean)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(application: Application, path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<ReportRow>, _>>()?;
        Ok(Self { application, rows })
    }

    /// Plain-text table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<8} {:<18} {:>16} {:>6}\n", "scheme", "metric", "mean", "n");
        for r in &self.rows {
            let _ = writeln!(out, "{:<8} {:<18} {:>16.6} {:>6}", r.scheme, r.metric, r.mean, r.n);
        }
        out
    }
}

/// Creates `<parent>/run_<unix seconds>_seed<seed>`, appending `_2`, `_3`,
/// ... when that directory already exists.
pub fn create_run_dir(parent: impl AsRef<Path>, seed: u64) -> Result<PathBuf> {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let parent = parent.as_ref();
    std::fs::create_dir_all(parent)?;
    let base = format!("run_{secs}_seed{seed}");
    for k in 1.. {
        let dir = parent.join(if k == 1 { base.clone() } else { format!("{base}_{k}") });
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}
