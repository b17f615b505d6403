//! Graph network mapping Hamiltonian graphs to VQE parameter vectors:
//! two graph convolutions, three attention layers, a graph readout and a
//! two-layer MLP head.

mod layers;
mod train;

pub use layers::{gat_forward, gcn_forward, GraphStructure, HeadVars, ATTENTION_SLOPE};
pub use train::{train, EpochLog, TrainReport};

use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{feature_dim, HamiltonianGraph};
use crate::models::Application;
use crate::sim::AnsatzSpec;
use crate::tensor::{load_checkpoint, save_checkpoint, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Readout {
    Mean,
    Sum,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnConfig {
    pub application: Application,
    pub in_dim: usize,
    pub gcn_hidden: usize,
    pub gat_hidden: usize,
    pub mlp_hidden: usize,
    pub out_dim: usize,
    pub gat_heads: usize,
    pub readout: Readout,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl GnnConfig {
    /// Full-size network for `app`.
    pub fn for_application(app: Application, seed: u64) -> Self {
        Self {
            application: app,
            in_dim: feature_dim(app),
            gcn_hidden: 256,
            gat_hidden: 512,
            mlp_hidden: 1024,
            out_dim: AnsatzSpec::for_application(app).n_params(),
            gat_heads: 4,
            readout: Readout::Mean,
            lr: 1e-3,
            epochs: 100,
            batch_size: 32,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.in_dim, self.gcn_hidden, self.gat_hidden, self.mlp_hidden, self.out_dim, self.gat_heads];
        if dims.contains(&0) || self.batch_size == 0 {
            return Err(Error::Validity("layer widths, head count and batch size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Validity(format!("learning rate {} must be positive", self.lr)));
        }
        let n = AnsatzSpec::for_application(self.application).n_params();
        if self.out_dim != n {
            return Err(Error::Compatibility(format!(
                "out_dim {} but the {} ansatz has {n} parameters",
                self.out_dim, self.application
            )));
        }
        if self.in_dim != feature_dim(self.application) {
            return Err(Error::Compatibility(format!(
                "in_dim {} but {} graphs have {} features",
                self.in_dim,
                self.application,
                feature_dim(self.application)
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Linear {
    w: Tensor,
    b: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
struct Head {
    w: Tensor,
    a_dst: Tensor,
    a_src: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
struct Attention {
    heads: Vec<Head>,
    b: Tensor,
}

/// Glorot-uniform matrix.
fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::from_array(Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))).tracked()
}

fn zeros(cols: usize) -> Tensor {
    Tensor::zeros(1, cols).tracked()
}

impl Linear {
    fn new(rng: &mut ChaCha8Rng, i: usize, o: usize) -> Self {
        Self { w: glorot(rng, i, o), b: zeros(o) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub config: GnnConfig,
    gcn: [Linear; 2],
    gat: [Attention; 3],
    mlp: [Linear; 2],
}

/// Tape handles for every weight, in [`GnnModel::named_params`] order.
struct ParamVars {
    gcn: Vec<(Var, Var)>,
    gat: Vec<(Vec<HeadVars>, Var)>,
    mlp: Vec<(Var, Var)>,
}

/// One recorded forward pass.
pub struct ForwardPass<'a> {
    pub tape: Tape<'a>,
    pub output: Var,
    /// Attention coefficients per attention layer, per head.
    pub attention: Vec<Vec<Var>>,
    params: Vec<Var>,
}

impl ForwardPass<'_> {
    pub fn output_values(&self) -> Vec<f64> {
        self.tape.value(self.output).iter().copied().collect()
    }

    /// Tape handles of the weights, in [`GnnModel::named_params`] order.
    pub fn param_vars(&self) -> &[Var] {
        &self.params
    }
}

impl GnnModel {
    /// Freshly initialized weights drawn from `config.seed`.
    pub fn new(config: GnnConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let c = &config;
        let gcn = [Linear::new(&mut rng, c.in_dim, c.gcn_hidden), Linear::new(&mut rng, c.gcn_hidden, c.gcn_hidden)];
        let mut attention = |i: usize| Attention {
            heads: (0..c.gat_heads)
                .map(|_| Head {
                    w: glorot(&mut rng, i, c.gat_hidden),
                    a_dst: glorot(&mut rng, c.gat_hidden, 1),
                    a_src: glorot(&mut rng, c.gat_hidden, 1),
                })
                .collect(),
            b: zeros(c.gat_hidden),
        };
        let gat = [attention(c.gcn_hidden), attention(c.gat_hidden), attention(c.gat_hidden)];
        let mlp = [Linear::new(&mut rng, c.gat_hidden, c.mlp_hidden), Linear::new(&mut rng, c.mlp_hidden, c.out_dim)];
        Ok(Self { config, gcn, gat, mlp })
    }

    /// Every weight tensor with a stable name.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, l) in self.gcn.iter().enumerate() {
            out.push((format!("gcn{i}.weight"), &l.w));
            out.push((format!("gcn{i}.bias"), &l.b));
        }
        for (i, l) in self.gat.iter().enumerate() {
            for (k, h) in l.heads.iter().enumerate() {
                out.push((format!("gat{i}.head{k}.weight"), &h.w));
                out.push((format!("gat{i}.head{k}.att_dst"), &h.a_dst));
                out.push((format!("gat{i}.head{k}.att_src"), &h.a_src));
            }
            out.push((format!("gat{i}.bias"), &l.b));
        }
        for (i, l) in self.mlp.iter().enumerate() {
            out.push((format!("mlp{i}.weight"), &l.w));
            out.push((format!("mlp{i}.bias"), &l.b));
        }
        out
    }

    /// Same order as [`GnnModel::named_params`].
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for l in &mut self.gcn {
            out.push(&mut l.w);
            out.push(&mut l.b);
        }
        for l in &mut self.gat {
            for h in &mut l.heads {
                out.push(&mut h.w);
                out.push(&mut h.a_dst);
                out.push(&mut h.a_src);
            }
            out.push(&mut l.b);
        }
        for l in &mut self.mlp {
            out.push(&mut l.w);
            out.push(&mut l.b);
        }
        out
    }

    pub fn n_weights(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    fn check_graph(&self, g: &HamiltonianGraph) -> Result<()> {
        if g.n_nodes == 0 {
            return Err(Error::Shape("graph has no nodes".into()));
        }
        if g.feature_dim() != self.config.in_dim || g.features.len() != g.n_nodes * self.config.in_dim {
            return Err(Error::Shape(format!(
                "graph features of width {} for a model expecting {}",
                g.feature_dim(),
                self.config.in_dim
            )));
        }
        Ok(())
    }

    fn record_params<'a>(&'a self, tape: &mut Tape<'a>) -> (ParamVars, Vec<Var>) {
        let mut flat = Vec::new();
        let mut p = |tape: &mut Tape<'a>, t: &'a Tensor| {
            let v = tape.param(t);
            flat.push(v);
            v
        };
        let gcn = self.gcn.iter().map(|l| (p(tape, &l.w), p(tape, &l.b))).collect();
        let gat = self
            .gat
            .iter()
            .map(|l| {
                let heads = l
                    .heads
                    .iter()
                    .map(|h| HeadVars { w: p(tape, &h.w), a_dst: p(tape, &h.a_dst), a_src: p(tape, &h.a_src) })
                    .collect();
                (heads, p(tape, &l.b))
            })
            .collect();
        let mlp = self.mlp.iter().map(|l| (p(tape, &l.w), p(tape, &l.b))).collect();
        (ParamVars { gcn, gat, mlp }, flat)
    }

    /// Records the full network on a new tape for a batch of graphs whose
    /// layout is `s` (see [`GraphStructure::batch`]). Output row `k` belongs
    /// to `graphs[k]`.
    pub fn forward<'a>(&'a self, graphs: &[&HamiltonianGraph], s: &GraphStructure) -> Result<ForwardPass<'a>> {
        let d = self.config.in_dim;
        let mut features = Vec::with_capacity(s.n_nodes * d);
        for (g, &n) in graphs.iter().zip(&s.nodes_per_graph) {
            self.check_graph(g)?;
            if g.n_nodes != n {
                return Err(Error::Shape("graph structure does not belong to these graphs".into()));
            }
            features.extend_from_slice(&g.features);
        }
        if graphs.len() != s.n_graphs() {
            return Err(Error::Shape(format!("{} graphs for a structure of {}", graphs.len(), s.n_graphs())));
        }
        let mut tape = Tape::new();
        let (vars, params) = self.record_params(&mut tape);
        let x0 = Array2::from_shape_vec((s.n_nodes, d), features).map_err(|e| Error::Shape(e.to_string()))?;
        let mut h = tape.constant(x0);
        for &(w, b) in &vars.gcn {
            h = gcn_forward(&mut tape, h, s, w, b)?;
        }
        let mut attention = Vec::new();
        for (heads, b) in &vars.gat {
            let (next, alphas) = gat_forward(&mut tape, h, s, heads, *b)?;
            h = next;
            attention.push(alphas);
        }
        let pooled = self.readout(&mut tape, h, s)?;
        let (w0, b0) = vars.mlp[0];
        let z = tape.matmul(pooled, w0)?;
        let z = tape.add_row(z, b0)?;
        let z = tape.relu(z);
        let (w1, b1) = vars.mlp[1];
        let z = tape.matmul(z, w1)?;
        let output = tape.add_row(z, b1)?;
        Ok(ForwardPass { tape, output, attention, params })
    }

    /// One row per graph.
    fn readout(&self, tape: &mut Tape<'_>, h: Var, s: &GraphStructure) -> Result<Var> {
        let k = s.n_graphs();
        let ids: std::rc::Rc<[usize]> = s.graph_of_node.clone().into();
        match self.config.readout {
            Readout::Max => tape.segment_max_rows(h, &s.graph_of_node, k),
            Readout::Sum | Readout::Mean => {
                let w = match self.config.readout {
                    Readout::Mean => s.graph_of_node.iter().map(|&g| 1.0 / s.nodes_per_graph[g] as f64).collect(),
                    _ => vec![1.0; s.n_nodes],
                };
                let w = tape.constant(Array2::from_shape_vec((s.n_nodes, 1), w).expect("column"));
                let rows: std::rc::Rc<[usize]> = (0..s.n_nodes).collect::<Vec<_>>().into();
                tape.edge_aggregate(h, w, rows, ids, k)
            }
        }
    }

    /// Output rows for many graphs in one pass.
    pub fn forward_batch(&self, graphs: &[&HamiltonianGraph]) -> Result<Array2<f64>> {
        let s = GraphStructure::batch(graphs)?;
        let pass = self.forward(graphs, &s)?;
        Ok(pass.tape.value(pass.output).clone())
    }

    /// Output vector of length `out_dim`.
    pub fn model_forward(&self, g: &HamiltonianGraph) -> Result<Vec<f64>> {
        let s = GraphStructure::new(g)?;
        Ok(self.forward(&[g], &s)?.output_values())
    }

    /// Predicted VQE initialization for `g`.
    pub fn predict_init(&self, g: &HamiltonianGraph) -> Result<Vec<f64>> {
        let app = g.meta.application;
        let n = AnsatzSpec::for_application(app).n_params();
        if app != self.config.application || n != self.config.out_dim {
            return Err(Error::Compatibility(format!(
                "model trained for {} ({} outputs), graph is {app} ({n} parameters)",
                self.config.application, self.config.out_dim
            )));
        }
        self.model_forward(g)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let meta = serde_json::json!({ "config": self.config });
        save_checkpoint(dir.as_ref(), &self.named_params(), meta)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let (tensors, meta) = load_checkpoint(dir.as_ref())?;
        let config: GnnConfig = serde_json::from_value(meta["config"].clone())
            .map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
        let mut model = Self::new(config)?;
        let expected: Vec<(String, [usize; 2])> =
            model.named_params().iter().map(|(n, t)| (n.clone(), t.shape())).collect();
        if expected.len() != tensors.len() {
            return Err(Error::Format(format!("checkpoint has {} tensors, model {}", tensors.len(), expected.len())));
        }
        for ((slot, (name, shape)), (got_name, t)) in model.params_mut().into_iter().zip(expected).zip(tensors) {
            if name != got_name || shape != t.shape() {
                return Err(Error::Format(format!("checkpoint tensor {got_name} {:?} where {name} {shape:?} expected", t.shape())));
            }
            *slot = t;
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests;
