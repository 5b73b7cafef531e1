//! Minimal tape-based reverse-mode differentiation over f64 vectors.
//!
//! Nodes hold eagerly-computed values; `backward` walks the tape in
//! reverse accumulating gradients for every named parameter leaf.
//! Supported primitives: matrix-vector products, elementwise add/sub/mul,
//! tanh, (masked) log-softmax, indexing, sums, scaling, min, clip, exp,
//! negation, concatenation, embedding-row reads and stop-gradient.
//!
//! Kink conventions: `min` routes the gradient to its first argument on
//! ties and `clip` passes the gradient through at its boundaries, so the
//! unclipped branch wins whenever a value sits exactly on a boundary.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Dense row-major matrix (vectors are `len x 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Tensor { rows, cols, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Named tensors with a version tag; the unit of checkpointing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    pub version: u32,
    pub tensors: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new(version: u32) -> Self {
        ParamStore {
            version,
            tensors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) {
        self.tensors.insert(name.to_string(), tensor);
    }

    pub fn get(&self, name: &str) -> &Tensor {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn param_count(&self) -> usize {
        self.tensors.values().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors
            .values()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

/// Gradients, one tensor per parameter (zero-filled when untouched).
#[derive(Debug, Clone, PartialEq)]
pub struct GradStore {
    pub tensors: BTreeMap<String, Tensor>,
}

impl GradStore {
    pub fn zeros_like(params: &ParamStore) -> Self {
        GradStore {
            tensors: params
                .tensors
                .iter()
                .map(|(k, t)| (k.clone(), Tensor::zeros(t.rows, t.cols)))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> &Tensor {
        &self.tensors[name]
    }

    /// `self += scale * other`, elementwise over every tensor.
    pub fn add_scaled(&mut self, other: &GradStore, scale: f64) {
        for (name, t) in &mut self.tensors {
            let o = &other.tensors[name];
            for (a, b) in t.data.iter_mut().zip(&o.data) {
                *a += scale * b;
            }
        }
    }
}

pub type NodeId = usize;

enum Op {
    Param(String),
    Const,
    /// `W x` with `W` an `m x n` parameter node and `x` a length-n vector.
    MatVec { w: NodeId, x: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { x: NodeId, c: f64 },
    Tanh { x: NodeId },
    /// Log-softmax over the full vector; masked entries are forced to
    /// probability exactly zero (output -inf, zero gradient).
    LogSoftmax { x: NodeId, mask: Option<Vec<bool>> },
    Pick { x: NodeId, index: usize },
    Sum { x: NodeId },
    Min { a: NodeId, b: NodeId },
    Clip { x: NodeId, lo: f64, hi: f64 },
    Exp { x: NodeId },
    Neg { x: NodeId },
    Detach { x: NodeId },
    Concat { parts: Vec<NodeId> },
    /// Mean of selected rows of a matrix parameter node.
    RowsMean { table: NodeId, indices: Vec<usize> },
    /// One row of a matrix parameter node.
    Row { table: NodeId, index: usize },
}

struct Node {
    value: Vec<f64>,
    op: Op,
}

/// A computation tape bound to one parameter store. Values are computed
/// eagerly at construction; `backward` yields parameter gradients.
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_ids: BTreeMap<String, NodeId>,
    /// Shape of matrix-valued nodes (only parameters need 2-D shapes).
    shapes: BTreeMap<NodeId, (usize, usize)>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            param_ids: BTreeMap::new(),
            shapes: BTreeMap::new(),
        }
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].value
    }

    pub fn scalar_value(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id].value.len(), 1);
        self.nodes[id].value[0]
    }

    /// Leaf bound to a named parameter tensor.
    pub fn param(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.param_ids.get(name) {
            return id;
        }
        let t = self.params.get(name);
        let id = self.push(t.data.clone(), Op::Param(name.to_string()));
        self.shapes.insert(id, (t.rows, t.cols));
        self.param_ids.insert(name.to_string(), id);
        id
    }

    pub fn constant(&mut self, vals: &[f64]) -> NodeId {
        self.push(vals.to_vec(), Op::Const)
    }

    pub fn scalar(&mut self, v: f64) -> NodeId {
        self.push(vec![v], Op::Const)
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> NodeId {
        let (rows, cols) = self.shapes[&w];
        let xv = &self.nodes[x].value;
        assert_eq!(cols, xv.len(), "matvec shape mismatch");
        let wv = &self.nodes[w].value;
        let mut out = vec![0.0; rows];
        for r in 0..rows {
            let row = &wv[r * cols..(r + 1) * cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(xv.iter()) {
                acc += a * b;
            }
            out[r] = acc;
        }
        self.push(out, Op::MatVec { w, x })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v: Vec<f64> = self.nodes[a]
            .value
            .iter()
            .zip(&self.nodes[b].value)
            .map(|(x, y)| x + y)
            .collect();
        self.push(v, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v: Vec<f64> = self.nodes[a]
            .value
            .iter()
            .zip(&self.nodes[b].value)
            .map(|(x, y)| x - y)
            .collect();
        self.push(v, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v: Vec<f64> = self.nodes[a]
            .value
            .iter()
            .zip(&self.nodes[b].value)
            .map(|(x, y)| x * y)
            .collect();
        self.push(v, Op::Mul { a, b })
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let v: Vec<f64> = self.nodes[x].value.iter().map(|a| a * c).collect();
        self.push(v, Op::Scale { x, c })
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v: Vec<f64> = self.nodes[x].value.iter().map(|a| a.tanh()).collect();
        self.push(v, Op::Tanh { x })
    }

    pub fn log_softmax(&mut self, x: NodeId, mask: Option<&[bool]>) -> NodeId {
        let xv = &self.nodes[x].value;
        let mask_vec = mask.map(|m| {
            assert_eq!(m.len(), xv.len());
            m.to_vec()
        });
        let allowed = |i: usize| mask_vec.as_ref().map_or(true, |m| m[i]);
        let mut max = f64::NEG_INFINITY;
        for (i, &v) in xv.iter().enumerate() {
            if allowed(i) && v > max {
                max = v;
            }
        }
        let mut lse = 0.0;
        for (i, &v) in xv.iter().enumerate() {
            if allowed(i) {
                lse += (v - max).exp();
            }
        }
        let lse = max + lse.ln();
        let out: Vec<f64> = xv
            .iter()
            .enumerate()
            .map(|(i, &v)| if allowed(i) { v - lse } else { f64::NEG_INFINITY })
            .collect();
        self.push(out, Op::LogSoftmax { x, mask: mask_vec })
    }

    pub fn pick(&mut self, x: NodeId, index: usize) -> NodeId {
        let v = self.nodes[x].value[index];
        self.push(vec![v], Op::Pick { x, index })
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let v: f64 = self.nodes[x].value.iter().sum();
        self.push(vec![v], Op::Sum { x })
    }

    pub fn min(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v: Vec<f64> = self.nodes[a]
            .value
            .iter()
            .zip(&self.nodes[b].value)
            .map(|(x, y)| if x <= y { *x } else { *y })
            .collect();
        self.push(v, Op::Min { a, b })
    }

    pub fn clip(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        let v: Vec<f64> = self.nodes[x].value.iter().map(|a| a.clamp(lo, hi)).collect();
        self.push(v, Op::Clip { x, lo, hi })
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let v: Vec<f64> = self.nodes[x].value.iter().map(|a| a.exp()).collect();
        self.push(v, Op::Exp { x })
    }

    pub fn neg(&mut self, x: NodeId) -> NodeId {
        let v: Vec<f64> = self.nodes[x].value.iter().map(|a| -a).collect();
        self.push(v, Op::Neg { x })
    }

    /// Stop-gradient: forwards the value, blocks the backward pass.
    pub fn detach(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x].value.clone();
        self.push(v, Op::Detach { x })
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut v = Vec::new();
        for &p in parts {
            v.extend_from_slice(&self.nodes[p].value);
        }
        self.push(
            v,
            Op::Concat {
                parts: parts.to_vec(),
            },
        )
    }

    /// Mean of the given rows of a matrix parameter (zeros for an empty
    /// index list).
    pub fn rows_mean(&mut self, table: NodeId, indices: &[usize]) -> NodeId {
        let (_rows, cols) = self.shapes[&table];
        let tv = &self.nodes[table].value;
        let mut v = vec![0.0; cols];
        if !indices.is_empty() {
            for &i in indices {
                for c in 0..cols {
                    v[c] += tv[i * cols + c];
                }
            }
            let n = indices.len() as f64;
            for x in &mut v {
                *x /= n;
            }
        }
        self.push(
            v,
            Op::RowsMean {
                table,
                indices: indices.to_vec(),
            },
        )
    }

    pub fn row(&mut self, table: NodeId, index: usize) -> NodeId {
        let (_rows, cols) = self.shapes[&table];
        let tv = &self.nodes[table].value;
        let v = tv[index * cols..(index + 1) * cols].to_vec();
        self.push(v, Op::Row { table, index })
    }

    /// Mean of scalar nodes (zero for an empty list).
    pub fn mean_scalars(&mut self, xs: &[NodeId]) -> NodeId {
        if xs.is_empty() {
            return self.scalar(0.0);
        }
        let cat = self.concat(xs);
        let s = self.sum(cat);
        self.scale(s, 1.0 / xs.len() as f64)
    }

    /// Reverse pass from a scalar loss node.
    pub fn backward(&self, loss: NodeId) -> GradStore {
        assert_eq!(self.nodes[loss].value.len(), 1, "loss must be scalar");
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss] = Some(vec![1.0]);
        let mut out = GradStore::zeros_like(self.params);
        for id in (0..self.nodes.len()).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[id];
            let mut accum = |target: NodeId, delta: Vec<f64>| {
                match &mut grads[target] {
                    Some(existing) => {
                        for (a, b) in existing.iter_mut().zip(&delta) {
                            *a += b;
                        }
                    }
                    slot @ None => *slot = Some(delta),
                }
            };
            match &node.op {
                Op::Param(name) => {
                    let t = out.tensors.get_mut(name).expect("param grad slot");
                    for (a, b) in t.data.iter_mut().zip(&g) {
                        *a += b;
                    }
                }
                Op::Const => {}
                Op::MatVec { w, x } => {
                    let (rows, cols) = self.shapes[w];
                    let wv = &self.nodes[*w].value;
                    let xv = &self.nodes[*x].value;
                    let mut gw = vec![0.0; rows * cols];
                    let mut gx = vec![0.0; cols];
                    for r in 0..rows {
                        let gr = g[r];
                        for c in 0..cols {
                            gw[r * cols + c] += gr * xv[c];
                            gx[c] += gr * wv[r * cols + c];
                        }
                    }
                    accum(*w, gw);
                    accum(*x, gx);
                }
                Op::Add { a, b } => {
                    accum(*a, g.clone());
                    accum(*b, g);
                }
                Op::Sub { a, b } => {
                    accum(*a, g.clone());
                    accum(*b, g.iter().map(|v| -v).collect());
                }
                Op::Mul { a, b } => {
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    accum(*a, g.iter().zip(bv).map(|(gi, bi)| gi * bi).collect());
                    accum(*b, g.iter().zip(av).map(|(gi, ai)| gi * ai).collect());
                }
                Op::Scale { x, c } => {
                    accum(*x, g.iter().map(|v| v * c).collect());
                }
                Op::Tanh { x } => {
                    let yv = &node.value;
                    accum(
                        *x,
                        g.iter().zip(yv).map(|(gi, yi)| gi * (1.0 - yi * yi)).collect(),
                    );
                }
                Op::LogSoftmax { x, mask } => {
                    // dx_i = g_i - p_i * sum(g); masked entries get exactly 0.
                    let yv = &node.value;
                    let allowed = |i: usize| mask.as_ref().map_or(true, |m| m[i]);
                    let gsum: f64 = g
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| allowed(*i))
                        .map(|(_, v)| v)
                        .sum();
                    let gx: Vec<f64> = yv
                        .iter()
                        .enumerate()
                        .map(|(i, &lyi)| {
                            if allowed(i) {
                                g[i] - lyi.exp() * gsum
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    accum(*x, gx);
                }
                Op::Pick { x, index } => {
                    let mut gx = vec![0.0; self.nodes[*x].value.len()];
                    gx[*index] = g[0];
                    accum(*x, gx);
                }
                Op::Sum { x } => {
                    accum(*x, vec![g[0]; self.nodes[*x].value.len()]);
                }
                Op::Min { a, b } => {
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    let mut ga = vec![0.0; av.len()];
                    let mut gb = vec![0.0; bv.len()];
                    for i in 0..av.len() {
                        if av[i] <= bv[i] {
                            ga[i] = g[i];
                        } else {
                            gb[i] = g[i];
                        }
                    }
                    accum(*a, ga);
                    accum(*b, gb);
                }
                Op::Clip { x, lo, hi } => {
                    let xv = &self.nodes[*x].value;
                    accum(
                        *x,
                        g.iter()
                            .zip(xv)
                            .map(|(gi, &v)| if v >= *lo && v <= *hi { *gi } else { 0.0 })
                            .collect(),
                    );
                }
                Op::Exp { x } => {
                    let yv = &node.value;
                    accum(*x, g.iter().zip(yv).map(|(gi, yi)| gi * yi).collect());
                }
                Op::Neg { x } => {
                    accum(*x, g.iter().map(|v| -v).collect());
                }
                Op::Detach { .. } => {}
                Op::Concat { parts } => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.nodes[p].value.len();
                        accum(p, g[offset..offset + len].to_vec());
                        offset += len;
                    }
                }
                Op::RowsMean { table, indices } => {
                    if indices.is_empty() {
                        continue;
                    }
                    let (rows, cols) = self.shapes[table];
                    let mut gt = vec![0.0; rows * cols];
                    let scale = 1.0 / indices.len() as f64;
                    for &i in indices {
                        for c in 0..cols {
                            gt[i * cols + c] += g[c] * scale;
                        }
                    }
                    accum(*table, gt);
                }
                Op::Row { table, index } => {
                    let (rows, cols) = self.shapes[table];
                    let mut gt = vec![0.0; rows * cols];
                    gt[index * cols..(index + 1) * cols].copy_from_slice(&g);
                    accum(*table, gt);
                }
            }
        }
        out
    }
}

/// Builds a scalar loss over `params` and returns `(loss, gradients)`.
pub fn grad<F>(params: &ParamStore, build: F) -> (f64, GradStore)
where
    F: FnOnce(&mut Graph) -> NodeId,
{
    let mut g = Graph::new(params);
    let loss = build(&mut g);
    let value = g.scalar_value(loss);
    let grads = g.backward(loss);
    (value, grads)
}

/// Plain SGD with momentum over a parameter store.
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    velocity: BTreeMap<String, Vec<f64>>,
}

impl SgdMomentum {
    pub fn new(lr: f64, momentum: f64) -> Self {
        SgdMomentum {
            lr,
            momentum,
            velocity: BTreeMap::new(),
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &GradStore) {
        for (name, tensor) in &mut params.tensors {
            let g = &grads.tensors[name];
            let v = self
                .velocity
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; tensor.len()]);
            for i in 0..tensor.len() {
                v[i] = self.momentum * v[i] + g.data[i];
                tensor.data[i] -= self.lr * v[i];
            }
        }
    }
}
