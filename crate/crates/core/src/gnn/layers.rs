//! Message-passing layers recorded on a [`Tape`].

use std::collections::BTreeSet;
use std::rc::Rc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{adjacency_weight, HamiltonianGraph};
use crate::tensor::{Tape, Var};

/// LeakyReLU slope inside attention scores.
pub const ATTENTION_SLOPE: f64 = 0.2;

/// Edge lists of one graph, or of several graphs laid out as one
/// block-diagonal graph, prepared for both layer types. Messages flow from
/// `src` to `dst`; `dst` is the aggregating node.
#[derive(Debug, Clone)]
pub struct GraphStructure {
    pub n_nodes: usize,
    /// Graph id of every node, in stacking order.
    pub graph_of_node: Vec<usize>,
    pub nodes_per_graph: Vec<usize>,
    /// Graph edges plus one unit self-loop per node.
    gcn_src: Rc<[usize]>,
    gcn_dst: Rc<[usize]>,
    /// `w̃_{vu} / √(d̃(v) d̃(u))` per GCN edge, `E × 1`.
    gcn_coef: Array2<f64>,
    /// Distinct `(dst, src)` neighbour pairs with every self-loop present.
    att_dst: Rc<[usize]>,
    att_src: Rc<[usize]>,
}

impl GraphStructure {
    pub fn new(g: &HamiltonianGraph) -> Result<Self> {
        Self::batch(&[g])
    }

    /// Stacks `graphs` into one disconnected graph; node `i` of graph `k`
    /// becomes node `offset_k + i`.
    pub fn batch(graphs: &[&HamiltonianGraph]) -> Result<Self> {
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut w = Vec::new();
        let mut pairs = BTreeSet::new();
        let mut graph_of_node = Vec::new();
        let mut nodes_per_graph = Vec::with_capacity(graphs.len());
        let mut offset = 0;
        for (k, g) in graphs.iter().enumerate() {
            let n = g.n_nodes;
            if let Some(e) = g.edges.iter().find(|e| e.src >= n || e.dst >= n) {
                return Err(Error::Index(format!("edge ({}, {}) in a {n}-node graph", e.src, e.dst)));
            }
            for e in &g.edges {
                src.push(offset + e.src);
                dst.push(offset + e.dst);
                w.push(adjacency_weight(e.weight));
                pairs.insert((offset + e.dst, offset + e.src));
            }
            for i in offset..offset + n {
                src.push(i);
                dst.push(i);
                w.push(1.0);
                pairs.insert((i, i));
            }
            graph_of_node.extend(std::iter::repeat_n(k, n));
            nodes_per_graph.push(n);
            offset += n;
        }
        let mut deg = vec![0.0; offset];
        for (&d, &wi) in dst.iter().zip(&w) {
            deg[d] += wi;
        }
        let coef: Vec<f64> = src
            .iter()
            .zip(&dst)
            .zip(&w)
            .map(|((&s, &d), &wi)| wi / (deg[d] * deg[s]).sqrt())
            .collect();
        let gcn_coef = Array2::from_shape_vec((coef.len(), 1), coef).expect("column");
        let (att_dst, att_src): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        Ok(Self {
            n_nodes: offset,
            graph_of_node,
            nodes_per_graph,
            gcn_src: src.into(),
            gcn_dst: dst.into(),
            gcn_coef,
            att_dst: att_dst.into(),
            att_src: att_src.into(),
        })
    }

    pub fn n_graphs(&self) -> usize {
        self.nodes_per_graph.len()
    }

    /// `(dst, src)` pairs over which attention is normalized, grouped by `dst`.
    pub fn attention_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.att_dst.iter().copied().zip(self.att_src.iter().copied())
    }

    /// Normalized aggregation `D̃^{-1/2} Ã D̃^{-1/2} x`.
    fn propagate(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let coef = tape.constant(self.gcn_coef.clone());
        tape.edge_aggregate(x, coef, self.gcn_src.clone(), self.gcn_dst.clone(), self.n_nodes)
    }
}

/// Weights of one attention head.
#[derive(Debug, Clone, Copy)]
pub struct HeadVars {
    pub w: Var,
    /// `F × 1` half of the attention vector applied to the aggregating node.
    pub a_dst: Var,
    /// `F × 1` half applied to the neighbour.
    pub a_src: Var,
}

fn check_rows(tape: &Tape<'_>, x: Var, s: &GraphStructure) -> Result<()> {
    let rows = tape.value(x).nrows();
    if rows != s.n_nodes {
        return Err(Error::Shape(format!("{rows} feature rows for a {}-node graph", s.n_nodes)));
    }
    Ok(())
}

/// Graph convolution with symmetric normalization and self-loops, then ReLU.
pub fn gcn_forward(tape: &mut Tape<'_>, x: Var, s: &GraphStructure, w: Var, b: Var) -> Result<Var> {
    check_rows(tape, x, s)?;
    let (in_dim, w_rows) = (tape.value(x).ncols(), tape.value(w).nrows());
    if in_dim != w_rows {
        return Err(Error::Shape(format!("features of width {in_dim} against a {w_rows}-row weight")));
    }
    // Aggregating before the projection is cheaper whenever in_dim < out_dim.
    let agg = s.propagate(tape, x)?;
    let h = tape.matmul(agg, w)?;
    let h = tape.add_row(h, b)?;
    Ok(tape.relu(h))
}

/// Multi-head graph attention with heads averaged, bias added, then ReLU.
/// Also returns each head's attention coefficients in
/// [`GraphStructure::attention_pairs`] order.
pub fn gat_forward(
    tape: &mut Tape<'_>,
    x: Var,
    s: &GraphStructure,
    heads: &[HeadVars],
    bias: Var,
) -> Result<(Var, Vec<Var>)> {
    check_rows(tape, x, s)?;
    if heads.is_empty() {
        return Err(Error::Shape("attention layer without heads".into()));
    }
    let mut sum: Option<Var> = None;
    let mut alphas = Vec::with_capacity(heads.len());
    for head in heads {
        let wh = tape.matmul(x, head.w)?;
        let score_dst = tape.matmul(wh, head.a_dst)?;
        let score_src = tape.matmul(wh, head.a_src)?;
        let e_dst = tape.gather_rows(score_dst, s.att_dst.clone())?;
        let e_src = tape.gather_rows(score_src, s.att_src.clone())?;
        let e = tape.add(e_dst, e_src)?;
        let e = tape.leaky_relu(e, ATTENTION_SLOPE);
        let alpha = tape.segment_softmax(e, s.att_dst.clone())?;
        let out = tape.edge_aggregate(wh, alpha, s.att_src.clone(), s.att_dst.clone(), s.n_nodes)?;
        sum = Some(match sum {
            Some(acc) => tape.add(acc, out)?,
            None => out,
        });
        alphas.push(alpha);
    }
    let mean = tape.scale(sum.expect("at least one head"), 1.0 / heads.len() as f64);
    let h = tape.add_row(mean, bias)?;
    Ok((tape.relu(h), alphas))
}
