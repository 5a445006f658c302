//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! Operations are evaluated eagerly and recorded on a [`Tape`] in the order
//! they are issued, so the tape is topologically sorted by construction.
//! [`Tape::backward`] walks it in reverse and accumulates adjoints for every
//! parameter leaf. The tape can also be replayed forward after leaf values
//! change, which is what [`grad_check`] uses to take central differences.
//!
//! ```
//! use ganlab::autodiff::Tape;
//! use ganlab::Tensor;
//!
//! let mut tape = Tape::new();
//! let x = tape.param(Tensor::scalar(3.0));
//! let y = tape.mul(x, x).unwrap();
//! assert_eq!(tape.value(y).item(), 9.0);
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads[x].item(), 6.0);
//! ```
//!
//! Broadcasting is deliberately narrow: matrix·vector products, affine layers
//! (row-wise bias), and scaling by a constant. Everything else must agree in
//! shape exactly.

use std::fmt;
use std::ops::Index;
use std::sync::Arc;

use crate::error::{Error, Result, ShapeError};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise primitives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Unary {
    Exp,
    Log,
    Tanh,
    Sigmoid,
    Relu,
    LeakyRelu(f64),
    Softplus,
    Abs,
    Square,
    /// `max(x, floor)`; gradient is zero where the floor is active.
    ClampMin(f64),
}

impl Unary {
    fn name(self) -> &'static str {
        match self {
            Unary::Exp => "exp",
            Unary::Log => "log",
            Unary::Tanh => "tanh",
            Unary::Sigmoid => "sigmoid",
            Unary::Relu => "relu",
            Unary::LeakyRelu(_) => "leaky_relu",
            Unary::Softplus => "softplus",
            Unary::Abs => "abs",
            Unary::Square => "square",
            Unary::ClampMin(_) => "clamp_min",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Unary::Exp => x.exp(),
            Unary::Log => x.ln(),
            Unary::Tanh => x.tanh(),
            Unary::Sigmoid => sigmoid(x),
            Unary::Relu => x.max(0.0),
            Unary::LeakyRelu(a) => {
                if x > 0.0 {
                    x
                } else {
                    a * x
                }
            }
            Unary::Softplus => softplus(x),
            Unary::Abs => x.abs(),
            Unary::Square => x * x,
            Unary::ClampMin(lo) => x.max(lo),
        }
    }

    /// Derivative at `x`, given the already computed output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::Exp => y,
            Unary::Log => 1.0 / x,
            Unary::Tanh => 1.0 - y * y,
            Unary::Sigmoid => y * (1.0 - y),
            Unary::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Unary::LeakyRelu(a) => {
                if x > 0.0 {
                    1.0
                } else {
                    a
                }
            }
            Unary::Softplus => sigmoid(x),
            Unary::Abs => x.signum(),
            Unary::Square => 2.0 * x,
            Unary::ClampMin(lo) => {
                if x > lo {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// A user-supplied differentiable scalar map, applied elementwise.
///
/// `value` returns `None` when its argument is outside the map's domain.
#[derive(Clone)]
pub struct ScalarMap {
    name: String,
    value: Arc<dyn Fn(f64) -> Option<f64> + Send + Sync>,
    derivative: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ScalarMap {
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(f64) -> Option<f64> + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarMap {
            name: name.into(),
            value: Arc::new(value),
            derivative: Arc::new(derivative),
        }
    }
}

impl fmt::Debug for ScalarMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarMap({})", self.name)
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param,
    Constant,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Shift(Var, f64),
    MatMul(Var, Var),
    Affine { x: Var, w: Var, b: Var },
    Sum(Var),
    Mean(Var),
    Unary(Var, Unary),
    Map(Var, ScalarMap),
}

impl Op {
    fn name(&self) -> &str {
        match self {
            Op::Input => "input",
            Op::Param => "param",
            Op::Constant => "constant",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Shift(..) => "shift",
            Op::MatMul(..) => "matmul",
            Op::Affine { .. } => "affine",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::Unary(_, u) => u.name(),
            Op::Map(_, m) => &m.name,
        }
    }

    fn is_leaf(&self) -> bool {
        matches!(self, Op::Input | Op::Param | Op::Constant)
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Recorded computation: leaves (inputs, parameters, constants) followed by
/// primitive operations in evaluation order.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    inputs: Vec<Var>,
    params: Vec<Var>,
}

/// Gradients of a scalar output with respect to every parameter leaf.
#[derive(Clone, Debug)]
pub struct GradientMap {
    params: Vec<Var>,
    grads: Vec<Tensor>,
}

impl GradientMap {
    pub fn get(&self, param: Var) -> Option<&Tensor> {
        self.params
            .iter()
            .position(|&p| p == param)
            .map(|i| &self.grads[i])
    }

    /// Gradients in parameter registration order.
    pub fn iter(&self) -> impl Iterator<Item = (Var, &Tensor)> {
        self.params.iter().copied().zip(self.grads.iter())
    }

    /// Gradients for `params`, in that order.
    pub fn collect(&self, params: &[Var]) -> Vec<Tensor> {
        params.iter().map(|&p| self[p].clone()).collect()
    }

    /// Euclidean norm over all listed parameters' gradients.
    pub fn norm_over(&self, params: &[Var]) -> f64 {
        params
            .iter()
            .map(|&p| self[p].data().iter().map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

impl Index<Var> for GradientMap {
    type Output = Tensor;

    fn index(&self, param: Var) -> &Tensor {
        self.get(param)
            .expect("variable is not a parameter of this tape")
    }
}

fn shape_err(node: usize, op: &str, msg: impl fmt::Display) -> Error {
    Error::Shape(ShapeError::new(format!("node {node} ({op}): {msg}")))
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Declares an input slot; [`Tape::forward`] fills slots in declaration order.
    pub fn input(&mut self, value: Tensor) -> Var {
        let v = self.push_leaf(Op::Input, value);
        self.inputs.push(v);
        v
    }

    /// Declares a trainable leaf. [`Tape::backward`] reports a gradient for each one.
    pub fn param(&mut self, value: Tensor) -> Var {
        let v = self.push_leaf(Op::Param, value);
        self.params.push(v);
        v
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(Op::Constant, value)
    }

    pub fn params(&self) -> &[Var] {
        &self.params
    }

    pub fn inputs(&self) -> &[Var] {
        &self.inputs
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Overwrites the value of a leaf. Dependent nodes are stale until the
    /// next [`Tape::replay`] or [`Tape::forward`].
    pub fn set_value(&mut self, v: Var, value: Tensor) -> Result<()> {
        let node = &mut self.nodes[v.0];
        if !node.op.is_leaf() {
            return Err(Error::InvalidConfig(format!(
                "node {} ({}) is not a leaf",
                v.0,
                node.op.name()
            )));
        }
        if node.value.shape() != value.shape() {
            return Err(shape_err(
                v.0,
                node.op.name(),
                format!("expected {:?}, got {:?}", node.value.shape(), value.shape()),
            ));
        }
        node.value = value;
        Ok(())
    }

    fn push_leaf(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, op: Op) -> Result<Var> {
        let id = self.nodes.len();
        let value = self.eval(id, &op)?;
        self.nodes.push(Node { op, value });
        Ok(Var(id))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Mul(a, b))
    }

    /// Multiplies every entry by the constant `c`.
    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.record(Op::Scale(a, c))
    }

    /// Adds the constant `c` to every entry.
    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        self.record(Op::Shift(a, c))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.scale(a, -1.0)
    }

    /// Matrix product of a `[m, k]` matrix with a `[k, n]` matrix or a `[k]` vector.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::MatMul(a, b))
    }

    /// Dense layer `x·Wᵀ + b` for `x` of shape `[batch, in]` or `[in]`,
    /// `W` of shape `[out, in]` and `b` of shape `[out]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        self.record(Op::Affine { x, w, b })
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Mean(a))
    }

    pub fn unary(&mut self, a: Var, u: Unary) -> Result<Var> {
        self.record(Op::Unary(a, u))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Exp)
    }

    /// Natural log; fails with a domain error on any entry `<= 0`.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Log)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Sigmoid)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Relu)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.unary(a, Unary::LeakyRelu(slope))
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Softplus)
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Abs)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Unary::Square)
    }

    pub fn clamp_min(&mut self, a: Var, floor: f64) -> Result<Var> {
        self.unary(a, Unary::ClampMin(floor))
    }

    pub fn map(&mut self, a: Var, f: ScalarMap) -> Result<Var> {
        self.record(Op::Map(a, f))
    }

    fn eval(&self, id: usize, op: &Op) -> Result<Tensor> {
        let val = |v: &Var| -> Result<&Tensor> {
            if v.0 >= id {
                return Err(shape_err(
                    id,
                    op.name(),
                    format!("operand {} is not earlier on the tape", v.0),
                ));
            }
            Ok(&self.nodes[v.0].value)
        };
        let out = match op {
            Op::Input | Op::Param | Op::Constant => return Ok(self.nodes[id].value.clone()),
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => {
                let (ta, tb) = (val(a)?, val(b)?);
                if ta.shape() != tb.shape() {
                    return Err(shape_err(
                        id,
                        op.name(),
                        format!(
                            "operand shapes {:?} and {:?} differ",
                            ta.shape(),
                            tb.shape()
                        ),
                    ));
                }
                let f: fn(f64, f64) -> f64 = match op {
                    Op::Add(..) => |x, y| x + y,
                    Op::Sub(..) => |x, y| x - y,
                    _ => |x, y| x * y,
                };
                let data = ta
                    .data()
                    .iter()
                    .zip(tb.data())
                    .map(|(&x, &y)| f(x, y))
                    .collect();
                Tensor::new(ta.shape().to_vec(), data)?
            }
            Op::Scale(a, c) => val(a)?.map(|x| c * x),
            Op::Shift(a, c) => val(a)?.map(|x| x + c),
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(a)?, val(b)?);
                matmul_forward(ta, tb).map_err(|m| shape_err(id, op.name(), m))?
            }
            Op::Affine { x, w, b } => {
                let (tx, tw, tb) = (val(x)?, val(w)?, val(b)?);
                affine_forward(tx, tw, tb).map_err(|m| shape_err(id, op.name(), m))?
            }
            Op::Sum(a) => Tensor::scalar(val(a)?.sum()),
            Op::Mean(a) => {
                let t = val(a)?;
                Tensor::scalar(t.sum() / t.len() as f64)
            }
            Op::Unary(a, u) => {
                let t = val(a)?;
                if let Unary::Log = u {
                    if let Some(bad) = t.data().iter().find(|&&x| x <= 0.0 || x.is_nan()) {
                        return Err(Error::Domain(format!(
                            "node {id} (log): argument {bad} is not positive"
                        )));
                    }
                }
                t.map(|x| u.apply(x))
            }
            Op::Map(a, f) => {
                let t = val(a)?;
                let mut data = Vec::with_capacity(t.len());
                for &x in t.data() {
                    match (f.value)(x) {
                        Some(y) => data.push(y),
                        None => {
                            return Err(Error::Domain(format!(
                                "node {id} ({}): argument {x} outside domain",
                                f.name
                            )))
                        }
                    }
                }
                Tensor::new(t.shape().to_vec(), data)?
            }
        };
        if !out.is_finite() {
            return Err(Error::NonFinite(format!(
                "node {id} ({}) produced a non-finite value",
                op.name()
            )));
        }
        Ok(out)
    }

    /// Recomputes every non-leaf node from the current leaf values.
    pub fn replay(&mut self) -> Result<()> {
        for id in 0..self.nodes.len() {
            if self.nodes[id].op.is_leaf() {
                continue;
            }
            let op = self.nodes[id].op.clone();
            let value = self.eval(id, &op)?;
            self.nodes[id].value = value;
        }
        Ok(())
    }

    /// Assigns `inputs` to the declared input slots (in order), replays the
    /// tape and returns the value of the last recorded node.
    pub fn forward(&mut self, inputs: &[Tensor]) -> Result<Tensor> {
        if inputs.len() != self.inputs.len() {
            return Err(Error::Shape(ShapeError::new(format!(
                "tape declares {} inputs, {} supplied",
                self.inputs.len(),
                inputs.len()
            ))));
        }
        for (slot, t) in inputs.iter().enumerate() {
            let v = self.inputs[slot];
            self.set_value(v, t.clone())?;
        }
        self.replay()?;
        self.nodes
            .last()
            .map(|n| n.value.clone())
            .ok_or_else(|| Error::InvalidConfig("empty tape".into()))
    }

    /// Reverse sweep from the scalar node `output`.
    ///
    /// Parameters that `output` does not depend on receive zero gradients.
    pub fn backward(&self, output: Var) -> Result<GradientMap> {
        let out = &self.nodes[output.0].value;
        if !out.is_scalar() {
            return Err(Error::NotScalar(out.shape().to_vec()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        adj[output.0] = Some(vec![1.0]);

        fn acc(adj: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
            match &mut adj[v.0] {
                Some(existing) => existing.iter_mut().zip(&g).for_each(|(e, x)| *e += x),
                slot @ None => *slot = Some(g),
            }
        }

        for id in (0..=output.0).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Input | Op::Param | Op::Constant => {
                    adj[id] = Some(g);
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *a, g.clone());
                    acc(&mut adj, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, *b, g.iter().map(|x| -x).collect());
                    acc(&mut adj, *a, g);
                }
                Op::Mul(a, b) => {
                    let va = self.nodes[a.0].value.data();
                    let vb = self.nodes[b.0].value.data();
                    let ga = g.iter().zip(vb).map(|(g, y)| g * y).collect();
                    let gb = g.iter().zip(va).map(|(g, x)| g * x).collect();
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::Scale(a, c) => acc(&mut adj, *a, g.iter().map(|x| c * x).collect()),
                Op::Shift(a, _) => acc(&mut adj, *a, g),
                Op::MatMul(a, b) => {
                    let (ga, gb) =
                        matmul_backward(&self.nodes[a.0].value, &self.nodes[b.0].value, &g);
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::Affine { x, w, b } => {
                    let (gx, gw, gb) =
                        affine_backward(&self.nodes[x.0].value, &self.nodes[w.0].value, &g);
                    acc(&mut adj, *x, gx);
                    acc(&mut adj, *w, gw);
                    acc(&mut adj, *b, gb);
                }
                Op::Sum(a) => {
                    let n = self.nodes[a.0].value.len();
                    acc(&mut adj, *a, vec![g[0]; n]);
                }
                Op::Mean(a) => {
                    let n = self.nodes[a.0].value.len();
                    acc(&mut adj, *a, vec![g[0] / n as f64; n]);
                }
                Op::Unary(a, u) => {
                    let x = self.nodes[a.0].value.data();
                    let y = node.value.data();
                    let ga = g
                        .iter()
                        .zip(x.iter().zip(y))
                        .map(|(g, (&x, &y))| g * u.derivative(x, y))
                        .collect();
                    acc(&mut adj, *a, ga);
                }
                Op::Map(a, f) => {
                    let x = self.nodes[a.0].value.data();
                    let ga = g
                        .iter()
                        .zip(x)
                        .map(|(g, &x)| g * (f.derivative)(x))
                        .collect();
                    acc(&mut adj, *a, ga);
                }
            }
        }

        let mut grads = Vec::with_capacity(self.params.len());
        for &p in &self.params {
            let shape = self.nodes[p.0].value.shape().to_vec();
            let g = match adj.get_mut(p.0).and_then(Option::take) {
                Some(data) => Tensor::new(shape, data)?,
                None => Tensor::zeros(&shape),
            };
            if !g.is_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient of parameter node {}",
                    p.0
                )));
            }
            grads.push(g);
        }
        Ok(GradientMap {
            params: self.params.clone(),
            grads,
        })
    }
}

fn matmul_forward(a: &Tensor, b: &Tensor) -> std::result::Result<Tensor, String> {
    if a.shape().len() != 2 {
        return Err(format!(
            "left operand must be a matrix, got {:?}",
            a.shape()
        ));
    }
    let (m, k) = (a.shape()[0], a.shape()[1]);
    match b.shape() {
        [kb] if *kb == k => {
            let data = (0..m)
                .map(|i| a.row(i).iter().zip(b.data()).map(|(x, y)| x * y).sum())
                .collect();
            Ok(Tensor::vector(data))
        }
        [kb, n] if *kb == k => {
            let n = *n;
            let mut out = vec![0.0; m * n];
            for i in 0..m {
                for p in 0..k {
                    let aip = a.data()[i * k + p];
                    let brow = &b.data()[p * n..(p + 1) * n];
                    for (o, &bv) in out[i * n..(i + 1) * n].iter_mut().zip(brow) {
                        *o += aip * bv;
                    }
                }
            }
            Ok(Tensor::matrix(m, n, out))
        }
        s => Err(format!("cannot multiply {:?} by {:?}", a.shape(), s)),
    }
}

fn matmul_backward(a: &Tensor, b: &Tensor, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = if b.shape().len() == 1 {
        1
    } else {
        b.shape()[1]
    };
    let mut ga = vec![0.0; m * k];
    let mut gb = vec![0.0; k * n];
    for i in 0..m {
        for p in 0..k {
            let mut s = 0.0;
            for j in 0..n {
                let gij = g[i * n + j];
                s += gij * b.data()[p * n + j];
                gb[p * n + j] += a.data()[i * k + p] * gij;
            }
            ga[i * k + p] = s;
        }
    }
    (ga, gb)
}

fn affine_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> std::result::Result<Tensor, String> {
    if w.shape().len() != 2 {
        return Err(format!("weight must be a matrix, got {:?}", w.shape()));
    }
    let (out, inp) = (w.shape()[0], w.shape()[1]);
    if b.shape() != [out] {
        return Err(format!(
            "bias shape {:?} does not match {out} outputs",
            b.shape()
        ));
    }
    let (rows, vector_in) = match x.shape() {
        [n] if *n == inp => (1, true),
        [r, n] if *n == inp => (*r, false),
        s => return Err(format!("input shape {s:?} does not match {inp} inputs")),
    };
    let mut data = Vec::with_capacity(rows * out);
    for r in 0..rows {
        let xr = &x.data()[r * inp..(r + 1) * inp];
        for o in 0..out {
            let wr = &w.data()[o * inp..(o + 1) * inp];
            data.push(b.data()[o] + xr.iter().zip(wr).map(|(a, c)| a * c).sum::<f64>());
        }
    }
    Ok(if vector_in {
        Tensor::vector(data)
    } else {
        Tensor::matrix(rows, out, data)
    })
}

fn affine_backward(x: &Tensor, w: &Tensor, g: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (out, inp) = (w.shape()[0], w.shape()[1]);
    let rows = x.len() / inp;
    let mut gx = vec![0.0; rows * inp];
    let mut gw = vec![0.0; out * inp];
    let mut gb = vec![0.0; out];
    for r in 0..rows {
        let xr = &x.data()[r * inp..(r + 1) * inp];
        for o in 0..out {
            let gro = g[r * out + o];
            if gro == 0.0 {
                continue;
            }
            gb[o] += gro;
            let wr = &w.data()[o * inp..(o + 1) * inp];
            for i in 0..inp {
                gx[r * inp + i] += gro * wr[i];
                gw[o * inp + i] += gro * xr[i];
            }
        }
    }
    (gx, gw, gb)
}

/// Largest relative discrepancy between the analytic gradient of `output`
/// with respect to `param` and a central finite difference with step `epsilon`.
///
/// The error for each entry is `|analytic − numeric| / max(1, |analytic|)`.
/// The tape is left holding the original parameter value.
pub fn grad_check(tape: &mut Tape, output: Var, param: Var, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::InvalidConfig(format!(
            "epsilon {epsilon} not in (0, 1e-2]"
        )));
    }
    tape.replay()?;
    let analytic = tape.backward(output)?[param].clone();
    let original = tape.value(param).clone();
    let mut worst = 0.0f64;
    for i in 0..original.len() {
        let mut plus = original.clone();
        plus.data_mut()[i] += epsilon;
        tape.set_value(param, plus)?;
        tape.replay()?;
        let f_plus = tape.value(output).item();

        let mut minus = original.clone();
        minus.data_mut()[i] -= epsilon;
        tape.set_value(param, minus)?;
        tape.replay()?;
        let f_minus = tape.value(output).item();

        let numeric = (f_plus - f_minus) / (2.0 * epsilon);
        let a = analytic.data()[i];
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }
    tape.set_value(param, original)?;
    tape.replay()?;
    Ok(worst)
}
