//! Dense tensors and a tape-based reverse-mode differentiator.
//!
//! A [`Graph`] records every operation executed during a forward pass in
//! creation order. Since a node can only reference nodes created before it,
//! the creation order is already a topological order, and a single reverse
//! sweep from the loss visits every node after all of its consumers.
//!
//! Parameters live outside the graph as [`Tensor`]s. They enter a graph via
//! [`Graph::leaf`]; after [`Graph::backward`] their gradients are read back
//! with [`Graph::grad`] and folded into the owning tensor. Graphs are cheap
//! and are rebuilt for every forward pass.

mod gradcheck;

pub use gradcheck::{check_gradient, grad_check, GradCheckReport};

use crate::error::{DadaError, Result};

/// Default negative slope of [`Graph::leaky_relu`].
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

/// Row-major dense array of `f64` with an optional gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(DadaError::Dimension(format!(
                "shape {shape:?} holds {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Tensor { shape, values, requires_grad: false, grad: None })
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![], values: vec![value], requires_grad: false, grad: None }
    }

    pub fn vector(values: Vec<f64>) -> Self {
        Tensor { shape: vec![values.len()], values, requires_grad: false, grad: None }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, values: vec![0.0; n], requires_grad: false, grad: None }
    }

    /// Builds a rank-2 tensor from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(DadaError::Dimension("ragged rows".into()));
        }
        let values = rows.iter().flatten().copied().collect();
        Tensor::new(vec![rows.len(), cols], values)
    }

    /// Marks the tensor as a trainable parameter.
    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn set_requires_grad(&mut self, on: bool) {
        self.requires_grad = on;
        if !on {
            self.grad = None;
        }
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    /// Adds `g` into the gradient accumulator, allocating it on first use.
    pub fn accumulate_grad(&mut self, g: &[f64]) -> Result<()> {
        if g.len() != self.values.len() {
            return Err(DadaError::Dimension(format!(
                "gradient of length {} for tensor of shape {:?}",
                g.len(),
                self.shape
            )));
        }
        match &mut self.grad {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None => self.grad = Some(g.to_vec()),
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Tags accepted by [`Graph::elementwise`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
    Relu,
    LeakyRelu(f64),
    Tanh,
    Exp,
    Log,
    Scale(f64),
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    AddBias(Var, Var),
    Concat { a: Var, b: Var, outer: usize, a_chunk: usize, b_chunk: usize },
    Softmax { x: Var, cols: usize },
    LogSumExpRows { x: Var, cols: usize },
    GatherCols { x: Var, cols: usize, index: Vec<usize> },
    SelectRows { x: Var, cols: usize, rows: Vec<usize> },
    MeanRows { x: Var, rows: usize },
    Sum(Var),
    L2Norm(Var),
}

#[derive(Debug, Clone)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    requires_grad: bool,
    /// Accumulated gradient; only kept for leaves.
    grad: Option<Vec<f64>>,
}

/// Record of executed operations for one reverse traversal.
#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn rows_cols(shape: &[usize]) -> Option<(usize, usize)> {
    match shape {
        [n] => Some((1, *n)),
        [r, c] => Some((*r, *c)),
        _ => None,
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every recorded node. Parameter tensors are owned elsewhere and
    /// are unaffected.
    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        if cfg!(debug_assertions) && value.iter().any(|v| !v.is_finite()) {
            let inputs_finite = self.inputs(&op).iter().all(|&i| self.node(i).value.iter().all(|v| v.is_finite()));
            debug_assert!(!inputs_finite, "non-finite output of {op:?} on finite inputs");
        }
        self.nodes.push(Node { shape, value, op, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    fn inputs(&self, op: &Op) -> Vec<Var> {
        match op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddBias(a, b) => vec![*a, *b],
            Op::Concat { a, b, .. } => vec![*a, *b],
            Op::Scale(x, _)
            | Op::Relu(x)
            | Op::LeakyRelu(x, _)
            | Op::Tanh(x)
            | Op::Exp(x)
            | Op::Log(x)
            | Op::Sum(x)
            | Op::L2Norm(x) => vec![*x],
            Op::Softmax { x, .. }
            | Op::LogSumExpRows { x, .. }
            | Op::GatherCols { x, .. }
            | Op::SelectRows { x, .. }
            | Op::MeanRows { x, .. } => vec![*x],
        }
    }

    /// Inserts a tensor as a leaf. The leaf tracks gradients iff the tensor does.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.shape.clone(), t.values.clone(), Op::Leaf, t.requires_grad)
    }

    /// Inserts a tensor as a constant leaf regardless of its `requires_grad` flag.
    pub fn constant(&mut self, t: &Tensor) -> Var {
        self.push(t.shape.clone(), t.values.clone(), Op::Leaf, false)
    }

    pub fn constant_from(&mut self, shape: Vec<usize>, values: Vec<f64>) -> Result<Var> {
        let t = Tensor::new(shape, values)?;
        Ok(self.push(t.shape, t.values, Op::Leaf, false))
    }

    /// Copies the current value of `v` into a new constant node.
    pub fn detach(&mut self, v: Var) -> Var {
        let n = self.node(v);
        let (shape, value) = (n.shape.clone(), n.value.clone());
        self.push(shape, value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::new(n.shape.clone(), n.value.clone()).expect("node shape invariant")
    }

    /// Value of a single-element node.
    pub fn item(&self, v: Var) -> f64 {
        self.node(v).value[0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.node(v).requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.node(v).grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let ([n, k], [k2, m]) = (sa, sb) else {
            return Err(DadaError::Dimension(format!("matmul needs rank-2 operands, got {sa:?} and {sb:?}")));
        };
        if k != k2 {
            return Err(DadaError::Dimension(format!("matmul inner extents differ: {sa:?} x {sb:?}")));
        }
        let (n, k, m) = (*n, *k, *m);
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let aip = av[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &bv[p * m..(p + 1) * m];
                row.iter_mut().zip(brow).for_each(|(o, b)| *o += aip * b);
            }
        }
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(vec![n, m], out, Op::MatMul(a, b), rg))
    }

    fn binary(&mut self, a: Var, b: Var, tag: &str, f: impl Fn(f64, f64) -> f64) -> Result<(Vec<usize>, Vec<f64>)> {
        let (na, nb) = (self.node(a), self.node(b));
        let (la, lb) = (na.value.len(), nb.value.len());
        if na.shape == nb.shape {
            let v = na.value.iter().zip(&nb.value).map(|(x, y)| f(*x, *y)).collect();
            Ok((na.shape.clone(), v))
        } else if lb == 1 {
            let y = nb.value[0];
            Ok((na.shape.clone(), na.value.iter().map(|x| f(*x, y)).collect()))
        } else if la == 1 {
            let x = na.value[0];
            Ok((nb.shape.clone(), nb.value.iter().map(|y| f(x, *y)).collect()))
        } else {
            Err(DadaError::Dimension(format!("{tag}: shapes {:?} and {:?} do not match", na.shape, nb.shape)))
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, v) = self.binary(a, b, "add", |x, y| x + y)?;
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(shape, v, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, v) = self.binary(a, b, "sub", |x, y| x - y)?;
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(shape, v, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, v) = self.binary(a, b, "mul", |x, y| x * y)?;
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(shape, v, Op::Mul(a, b), rg))
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let n = self.node(x);
        let (shape, v) = (n.shape.clone(), n.value.iter().map(|&a| f(a)).collect());
        let rg = n.requires_grad;
        self.push(shape, v, op, rg)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, Op::Scale(x, c), |a| a * c)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, Op::Relu(x), |a| a.max(0.0))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        self.unary(x, Op::LeakyRelu(x, slope), |a| if a >= 0.0 { a } else { slope * a })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), f64::tanh)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, Op::Exp(x), f64::exp)
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        if let Some(bad) = self.value(x).iter().find(|v| !(**v > 0.0)) {
            return Err(DadaError::Domain(format!("log of non-positive value {bad}")));
        }
        Ok(self.unary(x, Op::Log(x), f64::ln))
    }

    /// Dispatches an elementwise operation by tag. Binary tags take two
    /// inputs, unary tags one.
    pub fn elementwise(&mut self, tag: Elementwise, inputs: &[Var]) -> Result<Var> {
        let arity = match tag {
            Elementwise::Add | Elementwise::Sub | Elementwise::Mul => 2,
            _ => 1,
        };
        if inputs.len() != arity {
            return Err(DadaError::Usage(format!("{tag:?} takes {arity} inputs, got {}", inputs.len())));
        }
        let x = inputs[0];
        match tag {
            Elementwise::Add => self.add(x, inputs[1]),
            Elementwise::Sub => self.sub(x, inputs[1]),
            Elementwise::Mul => self.mul(x, inputs[1]),
            Elementwise::Relu => Ok(self.relu(x)),
            Elementwise::LeakyRelu(s) => Ok(self.leaky_relu(x, s)),
            Elementwise::Tanh => Ok(self.tanh(x)),
            Elementwise::Exp => Ok(self.exp(x)),
            Elementwise::Log => self.log(x),
            Elementwise::Scale(c) => Ok(self.scale(x, c)),
        }
    }

    /// Adds a bias vector of length `m` to every row of an `[n, m]` tensor.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xs, bl) = (self.shape(x).to_vec(), self.value(bias).len());
        let Some((_, m)) = rows_cols(&xs) else {
            return Err(DadaError::Dimension(format!("add_bias needs rank 1 or 2, got {xs:?}")));
        };
        if bl != m {
            return Err(DadaError::Dimension(format!(
                "bias of shape {:?} does not fit rows of {xs:?}",
                self.shape(bias)
            )));
        }
        let bv = self.value(bias);
        let v = self.value(x).chunks(m.max(1)).flat_map(|row| row.iter().zip(bv).map(|(a, b)| a + b)).collect();
        let rg = self.requires_grad(x) || self.requires_grad(bias);
        Ok(self.push(xs, v, Op::AddBias(x, bias), rg))
    }

    /// Joins two tensors along `axis`. All other extents must agree.
    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let err = || DadaError::Dimension(format!("cannot concat {sa:?} and {sb:?} along axis {axis}"));
        // A zero-element rank-1 tensor joins anything as the identity.
        if sb == [0] {
            let (shape, v) = (sa.clone(), self.value(a).to_vec());
            let rg = self.requires_grad(a);
            return Ok(self.push(shape, v, Op::Concat { a, b, outer: 1, a_chunk: v_len(&sa), b_chunk: 0 }, rg));
        }
        if sa == [0] {
            let (shape, v) = (sb.clone(), self.value(b).to_vec());
            let rg = self.requires_grad(b);
            return Ok(self.push(shape, v, Op::Concat { a, b, outer: 1, a_chunk: 0, b_chunk: v_len(&sb) }, rg));
        }
        if sa.len() != sb.len() || axis >= sa.len() {
            return Err(err());
        }
        if (0..sa.len()).any(|d| d != axis && sa[d] != sb[d]) {
            return Err(err());
        }
        let outer: usize = sa[..axis].iter().product();
        let inner: usize = sa[axis + 1..].iter().product();
        let (a_chunk, b_chunk) = (sa[axis] * inner, sb[axis] * inner);
        let (av, bv) = (self.value(a), self.value(b));
        let mut v = Vec::with_capacity(av.len() + bv.len());
        for o in 0..outer {
            v.extend_from_slice(&av[o * a_chunk..(o + 1) * a_chunk]);
            v.extend_from_slice(&bv[o * b_chunk..(o + 1) * b_chunk]);
        }
        let mut shape = sa.clone();
        shape[axis] += sb[axis];
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(shape, v, Op::Concat { a, b, outer, a_chunk, b_chunk }, rg))
    }

    /// Row-wise softmax of a rank-1 or rank-2 tensor.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (_, cols) = rows_cols(&shape)
            .ok_or_else(|| DadaError::Dimension(format!("softmax needs rank 1 or 2, got {shape:?}")))?;
        let mut v = self.value(x).to_vec();
        for row in v.chunks_mut(cols.max(1)) {
            softmax_in_place(row);
        }
        let rg = self.requires_grad(x);
        Ok(self.push(shape, v, Op::Softmax { x, cols }, rg))
    }

    /// `log(sum(exp(row)))` for every row; returns a rank-1 tensor of row count.
    pub fn logsumexp_rows(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (rows, cols) = rows_cols(&shape)
            .ok_or_else(|| DadaError::Dimension(format!("logsumexp needs rank 1 or 2, got {shape:?}")))?;
        if cols == 0 {
            return Err(DadaError::Dimension("logsumexp over empty rows".into()));
        }
        let v = self.value(x).chunks(cols).map(logsumexp).collect();
        let rg = self.requires_grad(x);
        Ok(self.push(vec![rows], v, Op::LogSumExpRows { x, cols }, rg))
    }

    /// Picks `per_row` columns from every row of an `[n, m]` tensor.
    /// `index` holds `n * per_row` column indices, row-major.
    pub fn gather_cols(&mut self, x: Var, index: &[usize], per_row: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (rows, cols) = rows_cols(&shape)
            .ok_or_else(|| DadaError::Dimension(format!("gather needs rank 1 or 2, got {shape:?}")))?;
        if index.len() != rows * per_row {
            return Err(DadaError::Dimension(format!(
                "gather: {} indices for {rows} rows x {per_row}",
                index.len()
            )));
        }
        if let Some(bad) = index.iter().find(|&&c| c >= cols) {
            return Err(DadaError::Dimension(format!("gather: column {bad} out of range for width {cols}")));
        }
        let xv = self.value(x);
        let v = index.iter().enumerate().map(|(i, &c)| xv[(i / per_row.max(1)) * cols + c]).collect();
        let rg = self.requires_grad(x);
        Ok(self.push(vec![rows, per_row], v, Op::GatherCols { x, cols, index: index.to_vec() }, rg))
    }

    /// Picks whole rows (with repetition allowed) of a rank-2 tensor.
    pub fn select_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let [n, cols] = shape[..] else {
            return Err(DadaError::Dimension(format!("select_rows needs rank 2, got {shape:?}")));
        };
        if let Some(bad) = rows.iter().find(|&&r| r >= n) {
            return Err(DadaError::Dimension(format!("select_rows: row {bad} out of range for {n} rows")));
        }
        let xv = self.value(x);
        let v = rows.iter().flat_map(|&r| xv[r * cols..(r + 1) * cols].iter().copied()).collect();
        let rg = self.requires_grad(x);
        Ok(self.push(vec![rows.len(), cols], v, Op::SelectRows { x, cols, rows: rows.to_vec() }, rg))
    }

    /// Column means of a rank-2 tensor, as a rank-1 tensor.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let [rows, cols] = shape[..] else {
            return Err(DadaError::Dimension(format!("mean_rows needs rank 2, got {shape:?}")));
        };
        if rows == 0 {
            return Err(DadaError::Usage("mean over zero rows".into()));
        }
        let mut v = vec![0.0; cols];
        for row in self.value(x).chunks(cols.max(1)) {
            v.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        v.iter_mut().for_each(|a| *a /= rows as f64);
        let rg = self.requires_grad(x);
        Ok(self.push(vec![cols], v, Op::MeanRows { x, rows }, rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        let rg = self.requires_grad(x);
        self.push(vec![], vec![s], Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len();
        if n == 0 {
            return Err(DadaError::Usage("mean of an empty tensor".into()));
        }
        let s = self.sum(x);
        Ok(self.scale(s, 1.0 / n as f64))
    }

    /// Euclidean norm of all elements. The gradient at the origin is taken as zero.
    pub fn l2_norm(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().map(|a| a * a).sum::<f64>().sqrt();
        let rg = self.requires_grad(x);
        self.push(vec![], vec![s], Op::L2Norm(x), rg)
    }

    /// Reverse sweep from a single-element `loss`. Leaf gradients are added to
    /// whatever previous backward calls left there.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.node(loss).value.len() != 1 {
            return Err(DadaError::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.node(loss).shape
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(dout) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    let n = &mut self.nodes[i];
                    match &mut n.grad {
                        Some(acc) => acc.iter_mut().zip(&dout).for_each(|(a, b)| *a += b),
                        None => n.grad = Some(dout),
                    }
                }
                op => {
                    for (input, g) in self.local_grads(op, node, &dout) {
                        if !self.nodes[input.0].requires_grad {
                            continue;
                        }
                        match &mut grads[input.0] {
                            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                            slot => *slot = Some(g),
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Vector-Jacobian products of one node with respect to its inputs.
    fn local_grads(&self, op: &Op, node: &Node, dout: &[f64]) -> Vec<(Var, Vec<f64>)> {
        let val = |v: Var| self.value(v);
        let wants = |v: Var| self.requires_grad(v);
        let broadcast_back = |target: Var, g: Vec<f64>| -> Vec<f64> {
            if val(target).len() == g.len() {
                g
            } else {
                vec![g.iter().sum()]
            }
        };
        match op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (n, k, m) = (sa[0], sa[1], sb[1]);
                let (av, bv) = (val(*a), val(*b));
                let mut out = Vec::new();
                if wants(*a) {
                    let mut ga = vec![0.0; n * k];
                    for i in 0..n {
                        let drow = &dout[i * m..(i + 1) * m];
                        for p in 0..k {
                            let brow = &bv[p * m..(p + 1) * m];
                            ga[i * k + p] = drow.iter().zip(brow).map(|(x, y)| x * y).sum();
                        }
                    }
                    out.push((*a, ga));
                }
                if wants(*b) {
                    let mut gb = vec![0.0; k * m];
                    for i in 0..n {
                        let drow = &dout[i * m..(i + 1) * m];
                        for p in 0..k {
                            let aip = av[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            gb[p * m..(p + 1) * m].iter_mut().zip(drow).for_each(|(g, d)| *g += aip * d);
                        }
                    }
                    out.push((*b, gb));
                }
                out
            }
            Op::Add(a, b) => vec![
                (*a, broadcast_back(*a, dout.to_vec())),
                (*b, broadcast_back(*b, dout.to_vec())),
            ],
            Op::Sub(a, b) => vec![
                (*a, broadcast_back(*a, dout.to_vec())),
                (*b, broadcast_back(*b, dout.iter().map(|d| -d).collect())),
            ],
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let pick = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };
                let ga = dout.iter().enumerate().map(|(i, d)| d * pick(bv, i)).collect();
                let gb = dout.iter().enumerate().map(|(i, d)| d * pick(av, i)).collect();
                vec![(*a, broadcast_back(*a, ga)), (*b, broadcast_back(*b, gb))]
            }
            Op::Scale(x, c) => vec![(*x, dout.iter().map(|d| d * c).collect())],
            Op::Relu(x) => {
                let g = dout.iter().zip(val(*x)).map(|(d, a)| if *a > 0.0 { *d } else { 0.0 }).collect();
                vec![(*x, g)]
            }
            Op::LeakyRelu(x, s) => {
                let g = dout.iter().zip(val(*x)).map(|(d, a)| if *a >= 0.0 { *d } else { s * d }).collect();
                vec![(*x, g)]
            }
            Op::Tanh(x) => {
                let g = dout.iter().zip(&node.value).map(|(d, y)| d * (1.0 - y * y)).collect();
                vec![(*x, g)]
            }
            Op::Exp(x) => vec![(*x, dout.iter().zip(&node.value).map(|(d, y)| d * y).collect())],
            Op::Log(x) => vec![(*x, dout.iter().zip(val(*x)).map(|(d, a)| d / a).collect())],
            Op::AddBias(x, b) => {
                let m = val(*b).len();
                let mut gb = vec![0.0; m];
                for row in dout.chunks(m.max(1)) {
                    gb.iter_mut().zip(row).for_each(|(g, d)| *g += d);
                }
                vec![(*x, dout.to_vec()), (*b, gb)]
            }
            Op::Concat { a, b, outer, a_chunk, b_chunk } => {
                let mut ga = Vec::with_capacity(outer * a_chunk);
                let mut gb = Vec::with_capacity(outer * b_chunk);
                let step = a_chunk + b_chunk;
                for o in 0..*outer {
                    ga.extend_from_slice(&dout[o * step..o * step + a_chunk]);
                    gb.extend_from_slice(&dout[o * step + a_chunk..(o + 1) * step]);
                }
                vec![(*a, ga), (*b, gb)]
            }
            Op::Softmax { x, cols } => {
                let mut g = vec![0.0; dout.len()];
                for ((grow, drow), yrow) in
                    g.chunks_mut(*cols).zip(dout.chunks(*cols)).zip(node.value.chunks(*cols))
                {
                    let dot: f64 = drow.iter().zip(yrow).map(|(d, y)| d * y).sum();
                    grow.iter_mut().zip(drow.iter().zip(yrow)).for_each(|(g, (d, y))| *g = y * (d - dot));
                }
                vec![(*x, g)]
            }
            Op::LogSumExpRows { x, cols } => {
                let mut g = val(*x).to_vec();
                for (row, d) in g.chunks_mut(*cols).zip(dout) {
                    softmax_in_place(row);
                    row.iter_mut().for_each(|p| *p *= d);
                }
                vec![(*x, g)]
            }
            Op::GatherCols { x, cols, index } => {
                let per_row = node.shape[1].max(1);
                let mut g = vec![0.0; val(*x).len()];
                for (i, (&c, d)) in index.iter().zip(dout).enumerate() {
                    g[(i / per_row) * cols + c] += d;
                }
                vec![(*x, g)]
            }
            Op::SelectRows { x, cols, rows } => {
                let mut g = vec![0.0; val(*x).len()];
                for (&r, drow) in rows.iter().zip(dout.chunks(*cols)) {
                    g[r * cols..(r + 1) * cols].iter_mut().zip(drow).for_each(|(a, d)| *a += d);
                }
                vec![(*x, g)]
            }
            Op::MeanRows { x, rows } => {
                let scale = 1.0 / *rows as f64;
                let g = (0..*rows).flat_map(|_| dout.iter().map(|d| d * scale)).collect();
                vec![(*x, g)]
            }
            Op::Sum(x) => vec![(*x, vec![dout[0]; val(*x).len()])],
            Op::L2Norm(x) => {
                let norm = node.value[0];
                let g = if norm > 0.0 {
                    val(*x).iter().map(|a| dout[0] * a / norm).collect()
                } else {
                    vec![0.0; val(*x).len()]
                };
                vec![(*x, g)]
            }
        }
    }
}

fn v_len(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

fn logsumexp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Softmax of a plain slice, outside of any graph.
pub fn softmax(row: &[f64]) -> Vec<f64> {
    let mut out = row.to_vec();
    softmax_in_place(&mut out);
    out
}
