//! Dense 2-D tensors with tape-based reverse-mode differentiation.
//!
//! A [`Tape`] records primitive applications in execution order. Trainable
//! [`Tensor`]s enter a tape by reference through [`Tape::param`], so a
//! forward pass never copies weights. [`Tape::backward`] walks the tape in
//! exact reverse and returns vector-Jacobian products for every node that
//! depends on a tracked input.

mod checkpoint;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use optim::{Adam, AdamConfig, AdamState};

use std::borrow::Cow;
use std::rc::Rc;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

/// Row-major matrix of `f64` with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    value: Array2<f64>,
    requires_grad: bool,
    grad: Option<Array2<f64>>,
}

impl Tensor {
    pub fn from_array(value: Array2<f64>) -> Self {
        let value = value.as_standard_layout().into_owned();
        Self { value, requires_grad: false, grad: None }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        let len = values.len();
        Array2::from_shape_vec((rows, cols), values)
            .map(Self::from_array)
            .map_err(|_| Error::Shape(format!("{len} values do not fill a {rows}×{cols} tensor")))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_array(Array2::zeros((rows, cols)))
    }

    /// Marks the tensor as trainable.
    pub fn tracked(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn shape(&self) -> [usize; 2] {
        let (r, c) = self.value.dim();
        [r, c]
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn value(&self) -> &Array2<f64> {
        &self.value
    }

    pub fn values(&self) -> &[f64] {
        self.value.as_slice().expect("tensors are kept in standard layout")
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.value.as_slice_mut().expect("tensors are kept in standard layout")
    }

    pub fn grad(&self) -> Option<&Array2<f64>> {
        self.grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    /// Adds `g` into the gradient buffer, allocating it on first use.
    pub fn accumulate_grad(&mut self, g: &Array2<f64>) -> Result<()> {
        if g.dim() != self.value.dim() {
            return Err(Error::Shape(format!(
                "gradient {:?} does not match tensor {:?}",
                g.dim(),
                self.value.dim()
            )));
        }
        match &mut self.grad {
            Some(acc) => *acc += g,
            None => self.grad = Some(g.as_standard_layout().into_owned()),
        }
        Ok(())
    }

    /// Multiplies the gradient buffer in place.
    pub fn scale_grad(&mut self, factor: f64) {
        if let Some(g) = &mut self.grad {
            g.mapv_inplace(|v| v * factor);
        }
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    RowSoftmax(Var),
    SegmentSoftmax(Var, Rc<[usize]>),
    GatherRows(Var, Rc<[usize]>),
    ScatterAddRows(Var, Rc<[usize]>),
    MulRows(Var, Var),
    EdgeAggregate { x: Var, w: Var, src: Rc<[usize]>, dst: Rc<[usize]> },
    MeanRows(Var),
    SegmentMaxRows(Var, Vec<usize>),
    SumAll(Var),
    MeanAll(Var),
    Mse(Var, Var),
}

struct Node<'a> {
    value: Cow<'a, Array2<f64>>,
    op: Op,
    needs_grad: bool,
}

/// Records a forward computation for one backward pass.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

fn shape_err(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Shape(format!("{op}: incompatible shapes {a:?} and {b:?}"))
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Cow<'a, Array2<f64>>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    fn dim(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Untracked input owned by the tape.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(Cow::Owned(value), Op::Leaf, false)
    }

    /// Input whose gradient is wanted, owned by the tape.
    pub fn variable(&mut self, value: Array2<f64>) -> Var {
        self.push(Cow::Owned(value), Op::Leaf, true)
    }

    /// Borrows a tensor; tracked when the tensor requires a gradient.
    pub fn param(&mut self, t: &'a Tensor) -> Var {
        self.push(Cow::Borrowed(&t.value), Op::Leaf, t.requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (da, db) = (self.dim(a), self.dim(b));
        if da.1 != db.0 {
            return Err(shape_err("matmul", da, db));
        }
        let out = self.value(a).dot(self.value(b));
        let g = self.needs(&[a, b]);
        Ok(self.push(Cow::Owned(out), Op::MatMul(a, b), g))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (da, db) = (self.dim(a), self.dim(b));
        if da != db {
            return Err(shape_err("add", da, db));
        }
        let out = self.value(a) + self.value(b);
        let g = self.needs(&[a, b]);
        Ok(self.push(Cow::Owned(out), Op::Add(a, b), g))
    }

    /// Adds the `1 × d` row `bias` to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (dx, db) = (self.dim(x), self.dim(bias));
        if db.0 != 1 || db.1 != dx.1 {
            return Err(shape_err("add_row", dx, db));
        }
        let out = self.value(x) + self.value(bias);
        let g = self.needs(&[x, bias]);
        Ok(self.push(Cow::Owned(out), Op::AddRow(x, bias), g))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let out = self.value(x) * factor;
        let g = self.needs(&[x]);
        self.push(Cow::Owned(out), Op::Scale(x, factor), g)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(|v| if v > 0.0 { v } else { 0.0 });
        let g = self.needs(&[x]);
        self.push(Cow::Owned(out), Op::Relu(x), g)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let out = self.value(x).mapv(|v| if v > 0.0 { v } else { slope * v });
        let g = self.needs(&[x]);
        self.push(Cow::Owned(out), Op::LeakyRelu(x, slope), g)
    }

    /// Softmax across each row.
    pub fn row_softmax(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for mut row in out.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            row.mapv_inplace(|v| (v - max).exp());
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        let g = self.needs(&[x]);
        self.push(Cow::Owned(out), Op::RowSoftmax(x), g)
    }

    /// Softmax of the entries of an `E × 1` column within groups sharing the
    /// same `segments[e]` id. Every group is normalized independently.
    pub fn segment_softmax(&mut self, x: Var, segments: Rc<[usize]>) -> Result<Var> {
        let dx = self.dim(x);
        if dx.1 != 1 || dx.0 != segments.len() {
            return Err(shape_err("segment_softmax", dx, (segments.len(), 1)));
        }
        let n_seg = segments.iter().max().map_or(0, |m| m + 1);
        let xs = self.value(x).column(0).to_vec();
        let mut max = vec![f64::NEG_INFINITY; n_seg];
        for (&s, &v) in segments.iter().zip(&xs) {
            max[s] = max[s].max(v);
        }
        let exps: Vec<f64> = segments.iter().zip(&xs).map(|(&s, &v)| (v - max[s]).exp()).collect();
        let mut sums = vec![0.0; n_seg];
        for (&s, &e) in segments.iter().zip(&exps) {
            sums[s] += e;
        }
        let out: Vec<f64> = segments.iter().zip(&exps).map(|(&s, &e)| e / sums[s]).collect();
        let out = Array2::from_shape_vec((dx.0, 1), out).expect("column shape");
        let g = self.needs(&[x]);
        Ok(self.push(Cow::Owned(out), Op::SegmentSoftmax(x, segments), g))
    }

    /// Row `e` of the output is row `index[e]` of `x`.
    pub fn gather_rows(&mut self, x: Var, index: Rc<[usize]>) -> Result<Var> {
        let dx = self.dim(x);
        if let Some(&bad) = index.iter().find(|&&i| i >= dx.0) {
            return Err(Error::Shape(format!("gather_rows: row {bad} out of range for {dx:?}")));
        }
        let out = self.value(x).select(Axis(0), &index);
        let g = self.needs(&[x]);
        Ok(self.push(Cow::Owned(out), Op::GatherRows(x, index), g))
    }

    /// Sums row `e` of `x` into output row `index[e]`; the output has
    /// `n_rows` rows.
    pub fn scatter_add_rows(&mut self, x: Var, index: Rc<[usize]>, n_rows: usize) -> Result<Var> {
        let dx = self.dim(x);
        if dx.0 != index.len() {
            return Err(shape_err("scatter_add_rows", dx, (index.len(), dx.1)));
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= n_rows) {
            return Err(Error::Shape(format!("scatter_add_rows: target row {bad} ≥ {n_rows}")));
        }
        let mut out = Array2::zeros((n_rows, dx.1));
        let xv = self.value(x);
        for (e, &i) in index.iter().enumerate() {
            let mut row = out.row_mut(i);
            row += &xv.row(e);
        }
        let g = self.needs(&[x]);
        Ok(self.push(Cow::Owned(out), Op::ScatterAddRows(x, index), g))
    }

    /// Scales row `e` of `x` by `s[e, 0]`.
    pub fn mul_rows(&mut self, x: Var, s: Var) -> Result<Var> {
        let (dx, ds) = (self.dim(x), self.dim(s));
        if ds != (dx.0, 1) {
            return Err(shape_err("mul_rows", dx, ds));
        }
        let out = self.value(x) * self.value(s);
        let g = self.needs(&[x, s]);
        Ok(self.push(Cow::Owned(out), Op::MulRows(x, s), g))
    }

    /// Column means, `1 × d`.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let dx = self.dim(x);
        if dx.0 == 0 {
            return Err(Error::Shape("mean_rows of an empty tensor".into()));
        }
        let out = self.value(x).mean_axis(Axis(0)).expect("non-empty").insert_axis(Axis(0));
        let g = self.needs(&[x]);
        Ok(self.push(Cow::Owned(out), Op::MeanRows(x), g))
    }

    /// Column maxima within each row group: output row `k` holds the
    /// maxima over rows `i` with `segments[i] == k`. Ties resolve to the
    /// lowest row; every group must be non-empty.
    pub fn segment_max_rows(&mut self, x: Var, segments: &[usize], n_segments: usize) -> Result<Var> {
        let dx = self.dim(x);
        if dx.0 != segments.len() {
            return Err(shape_err("segment_max_rows", dx, (segments.len(), dx.1)));
        }
        let xv = self.value(x);
        let mut arg: Vec<Option<usize>> = vec![None; n_segments * dx.1];
        for (i, &k) in segments.iter().enumerate() {
            if k >= n_segments {
                return Err(Error::Shape(format!("segment_max_rows: segment {k} ≥ {n_segments}")));
            }
            for j in 0..dx.1 {
                let slot = &mut arg[k * dx.1 + j];
                if slot.is_none_or(|b| xv[(i, j)] > xv[(b, j)]) {
                    *slot = Some(i);
                }
            }
        }
        let arg: Vec<usize> = arg
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Shape("segment_max_rows: empty segment".into()))?;
        let out = Array2::from_shape_fn((n_segments, dx.1), |(k, j)| xv[(arg[k * dx.1 + j], j)]);
        let g = self.needs(&[x]);
        Ok(self.push(Cow::Owned(out), Op::SegmentMaxRows(x, arg), g))
    }

    /// Column maxima, `1 × d`.
    pub fn max_rows(&mut self, x: Var) -> Result<Var> {
        let n = self.dim(x).0;
        if n == 0 {
            return Err(Error::Shape("max_rows of an empty tensor".into()));
        }
        self.segment_max_rows(x, &vec![0; n], 1)
    }

    /// Weighted message passing: `out[dst[e]] += w[e] · x[src[e]]` over all
    /// edges `e`, with `w` an `E × 1` column. Equivalent to gather, row
    /// scaling and scatter-add without the `E × d` intermediates.
    pub fn edge_aggregate(&mut self, x: Var, w: Var, src: Rc<[usize]>, dst: Rc<[usize]>, n_rows: usize) -> Result<Var> {
        let (dx, dw) = (self.dim(x), self.dim(w));
        if src.len() != dst.len() || dw != (src.len(), 1) {
            return Err(shape_err("edge_aggregate", dw, (src.len(), 1)));
        }
        if src.iter().any(|&s| s >= dx.0) || dst.iter().any(|&d| d >= n_rows) {
            return Err(Error::Shape(format!("edge_aggregate: edge endpoint outside {dx:?} → {n_rows} rows")));
        }
        let (xv, wv) = (self.value(x), self.value(w));
        let mut out = Array2::zeros((n_rows, dx.1));
        for e in 0..src.len() {
            let c = wv[(e, 0)];
            out.row_mut(dst[e]).scaled_add(c, &xv.row(src[e]));
        }
        let g = self.needs(&[x, w]);
        Ok(self.push(Cow::Owned(out), Op::EdgeAggregate { x, w, src, dst }, g))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let out = Array2::from_elem((1, 1), self.value(x).sum());
        let g = self.needs(&[x]);
        self.push(Cow::Owned(out), Op::SumAll(x), g)
    }

    pub fn mean_all(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        if v.is_empty() {
            return Err(Error::Shape("mean_all of an empty tensor".into()));
        }
        let out = Array2::from_elem((1, 1), v.sum() / v.len() as f64);
        let g = self.needs(&[x]);
        Ok(self.push(Cow::Owned(out), Op::MeanAll(x), g))
    }

    /// Mean squared error, `1 × 1`.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        let (dp, dt) = (self.dim(pred), self.dim(target));
        if dp != dt || dp.0 * dp.1 == 0 {
            return Err(shape_err("mse", dp, dt));
        }
        let diff = self.value(pred) - self.value(target);
        let out = Array2::from_elem((1, 1), diff.mapv(|d| d * d).sum() / diff.len() as f64);
        let g = self.needs(&[pred, target]);
        Ok(self.push(Cow::Owned(out), Op::Mse(pred, target), g))
    }

    /// Reverse pass from the `1 × 1` node `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.dim(root) != (1, 1) {
            return Err(Error::Shape(format!("backward needs a scalar root, got {:?}", self.dim(root))));
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Array2::ones((1, 1)));
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(dy) = grads[idx].take() else { continue };
            self.propagate(&node.op, &node.value, &dy, &mut grads);
            grads[idx] = Some(dy);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, op: &Op, y: &Array2<f64>, dy: &Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        let mut send = |v: Var, g: Array2<f64>| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => *acc += &g,
                slot @ None => *slot = Some(g),
            }
        };
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.nodes[a.0].needs_grad {
                    send(*a, dy.dot(&self.value(*b).t()));
                }
                if self.nodes[b.0].needs_grad {
                    send(*b, self.value(*a).t().dot(dy));
                }
            }
            Op::Add(a, b) => {
                send(*a, dy.clone());
                send(*b, dy.clone());
            }
            Op::AddRow(x, bias) => {
                send(*x, dy.clone());
                send(*bias, dy.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Scale(x, c) => send(*x, dy * *c),
            Op::Relu(x) => {
                let mask = self.value(*x).mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                send(*x, dy * &mask);
            }
            Op::LeakyRelu(x, slope) => {
                let mask = self.value(*x).mapv(|v| if v > 0.0 { 1.0 } else { *slope });
                send(*x, dy * &mask);
            }
            Op::RowSoftmax(x) => {
                let mut dx = dy * y;
                for (mut row, yr) in dx.rows_mut().into_iter().zip(y.rows()) {
                    let s = row.sum();
                    row.zip_mut_with(&yr, |d, &yv| *d -= yv * s);
                }
                send(*x, dx);
            }
            Op::SegmentSoftmax(x, segments) => {
                let n_seg = segments.iter().max().map_or(0, |m| m + 1);
                let mut dots = vec![0.0; n_seg];
                for (e, &s) in segments.iter().enumerate() {
                    dots[s] += dy[(e, 0)] * y[(e, 0)];
                }
                let dx = Array2::from_shape_fn(y.dim(), |(e, _)| y[(e, 0)] * (dy[(e, 0)] - dots[segments[e]]));
                send(*x, dx);
            }
            Op::GatherRows(x, index) => {
                let mut dx = Array2::zeros(self.dim(*x));
                for (e, &i) in index.iter().enumerate() {
                    let mut row = dx.row_mut(i);
                    row += &dy.row(e);
                }
                send(*x, dx);
            }
            Op::ScatterAddRows(x, index) => send(*x, dy.select(Axis(0), index)),
            Op::MulRows(x, s) => {
                let sv = self.value(*s);
                if self.nodes[x.0].needs_grad {
                    send(*x, dy * sv);
                }
                if self.nodes[s.0].needs_grad {
                    let xv = self.value(*x);
                    let ds = (dy * xv).sum_axis(Axis(1)).insert_axis(Axis(1));
                    send(*s, ds);
                }
            }
            Op::MeanRows(x) => {
                let (n, d) = self.dim(*x);
                let row = dy / n as f64;
                send(*x, row.broadcast((n, d)).expect("1×d row").to_owned());
            }
            Op::SegmentMaxRows(x, arg) => {
                let mut dx = Array2::zeros(self.dim(*x));
                let d = dy.ncols();
                for (slot, &i) in arg.iter().enumerate() {
                    dx[(i, slot % d)] += dy[(slot / d, slot % d)];
                }
                send(*x, dx);
            }
            Op::EdgeAggregate { x, w, src, dst } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                if self.nodes[x.0].needs_grad {
                    let mut dx = Array2::zeros(xv.dim());
                    for e in 0..src.len() {
                        dx.row_mut(src[e]).scaled_add(wv[(e, 0)], &dy.row(dst[e]));
                    }
                    send(*x, dx);
                }
                if self.nodes[w.0].needs_grad {
                    let dw = Array2::from_shape_fn((src.len(), 1), |(e, _)| dy.row(dst[e]).dot(&xv.row(src[e])));
                    send(*w, dw);
                }
            }
            Op::SumAll(x) => send(*x, Array2::from_elem(self.dim(*x), dy[(0, 0)])),
            Op::MeanAll(x) => {
                let d = self.dim(*x);
                send(*x, Array2::from_elem(d, dy[(0, 0)] / (d.0 * d.1) as f64));
            }
            Op::Mse(p, t) => {
                let diff = self.value(*p) - self.value(*t);
                let n = self.value(*p).len() as f64;
                let dp = diff * (2.0 * dy[(0, 0)] / n);
                send(*t, -&dp);
                send(*p, dp);
            }
        }
    }
}

/// Per-node gradients from one backward pass.
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Moves the gradient of `v` out of the set.
    pub fn take(&mut self, v: Var) -> Option<Array2<f64>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
