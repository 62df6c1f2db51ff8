use std::sync::Arc;

use crate::autodiff::{Matrix, SparseMatrix};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation kinds, as reported by gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    MatMul,
    SpMM,
    Add,
    Sub,
    Mul,
    MulScalar,
    AddScalar,
    Relu,
    Sigmoid,
    Log,
    Square,
    Clamp,
    Sum,
    Mean,
    RowSum,
    CosineRows,
    GatherRows,
    ScaleRows,
}

impl OpKind {
    pub fn name(self) -> &'static str {
        match self {
            OpKind::Leaf => "leaf",
            OpKind::MatMul => "matmul",
            OpKind::SpMM => "spmm",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::MulScalar => "mul_scalar",
            OpKind::AddScalar => "add_scalar",
            OpKind::Relu => "relu",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Log => "log",
            OpKind::Square => "square",
            OpKind::Clamp => "clamp",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::RowSum => "row_sum",
            OpKind::CosineRows => "cosine_rows",
            OpKind::GatherRows => "gather_rows",
            OpKind::ScaleRows => "scale_rows",
        }
    }

    pub fn from_name(name: &str) -> Option<OpKind> {
        const ALL: [OpKind; 19] = [
            OpKind::Leaf,
            OpKind::MatMul,
            OpKind::SpMM,
            OpKind::Add,
            OpKind::Sub,
            OpKind::Mul,
            OpKind::MulScalar,
            OpKind::AddScalar,
            OpKind::Relu,
            OpKind::Sigmoid,
            OpKind::Log,
            OpKind::Square,
            OpKind::Clamp,
            OpKind::Sum,
            OpKind::Mean,
            OpKind::RowSum,
            OpKind::CosineRows,
            OpKind::GatherRows,
            OpKind::ScaleRows,
        ];
        ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Elementwise operations accepted by [`Tape::ew`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
    MulScalar(f64),
    AddScalar(f64),
    Relu,
    Sigmoid,
    Log,
    Square,
}

/// Reductions accepted by [`Tape::reduce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
    RowSum,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMM(Arc<SparseMatrix>, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulScalar(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Sigmoid(Var),
    Log(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    CosineRows(Var, Var, f64),
    GatherRows(Var, Vec<usize>),
    ScaleRows(Var, Vec<f64>),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::SpMM(..) => OpKind::SpMM,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::MulScalar(..) => OpKind::MulScalar,
            Op::AddScalar(..) => OpKind::AddScalar,
            Op::Relu(..) => OpKind::Relu,
            Op::Sigmoid(..) => OpKind::Sigmoid,
            Op::Log(..) => OpKind::Log,
            Op::Square(..) => OpKind::Square,
            Op::Clamp(..) => OpKind::Clamp,
            Op::Sum(..) => OpKind::Sum,
            Op::Mean(..) => OpKind::Mean,
            Op::RowSum(..) => OpKind::RowSum,
            Op::CosineRows(..) => OpKind::CosineRows,
            Op::GatherRows(..) => OpKind::GatherRows,
            Op::ScaleRows(..) => OpKind::ScaleRows,
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run recording of dense matrix operations.
///
/// Nodes are stored in recording order, which is a topological order of the
/// computation. [`Tape::backward`] walks them once, in reverse.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    fault: Option<OpKind>,
}

/// Gradients of a scalar with respect to every node on the tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient with respect to `var`; zeros when `var` does not reach the loss.
    pub fn wrt(&self, var: Var) -> Matrix {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.0];
                Matrix::zeros(r, c)
            }
        }
    }
}

fn finite(op: &'static str, m: Matrix) -> Result<Matrix> {
    if m.is_finite() {
        Ok(m)
    } else {
        Err(Error::NonFinite(op))
    }
}

fn same_shape(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            op,
            lhs: a.shape(),
            rhs: b.shape(),
        })
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Flips the sign of every backward contribution of `kind`. Used to check
    /// that gradient checking actually catches a broken rule.
    #[doc(hidden)]
    pub fn inject_fault(&mut self, kind: OpKind) {
        self.fault = Some(kind);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Matrix {
        &self.nodes[var.0].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, var: Var) -> Result<f64> {
        let v = self.value(var);
        v.item().ok_or(Error::NotScalar {
            rows: v.rows(),
            cols: v.cols(),
        })
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        let requires_grad = match &op {
            Op::Leaf => false,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::CosineRows(a, b, _) => {
                self.nodes[a.0].requires_grad || self.nodes[b.0].requires_grad
            }
            Op::SpMM(_, a)
            | Op::MulScalar(a, _)
            | Op::AddScalar(a)
            | Op::Relu(a)
            | Op::Sigmoid(a)
            | Op::Log(a)
            | Op::Square(a)
            | Op::Clamp(a, ..)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::RowSum(a)
            | Op::GatherRows(a, _)
            | Op::ScaleRows(a, _) => self.nodes[a.0].requires_grad,
        };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Differentiable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        let var = self.push(value, Op::Leaf);
        self.nodes[var.0].requires_grad = true;
        var
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = finite("matmul", self.value(a).matmul(self.value(b))?)?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn spmm(&mut self, s: &Arc<SparseMatrix>, d: Var) -> Result<Var> {
        let out = finite("spmm", s.matmul(self.value(d))?)?;
        Ok(self.push(out, Op::SpMM(Arc::clone(s), d)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = finite("add", self.value(a).zip_map(self.value(b), "add", |x, y| x + y)?)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = finite("sub", self.value(a).zip_map(self.value(b), "sub", |x, y| x - y)?)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = finite("mul", self.value(a).zip_map(self.value(b), "mul", |x, y| x * y)?)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn mul_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = finite("mul_scalar", self.value(a).scale(c))?;
        Ok(self.push(out, Op::MulScalar(a, c)))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = finite("add_scalar", self.value(a).map(|x| x + c))?;
        Ok(self.push(out, Op::AddScalar(a)))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let out = finite("relu", out)?;
        Ok(self.push(out, Op::Relu(a)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = finite("sigmoid", self.value(a).map(sigmoid))?;
        Ok(self.push(out, Op::Sigmoid(a)))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        if let Some(&bad) = self.value(a).as_slice().iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::LogDomain(bad));
        }
        let out = finite("log", self.value(a).map(f64::ln))?;
        Ok(self.push(out, Op::Log(a)))
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        let out = finite("square", self.value(a).map(|x| x * x))?;
        Ok(self.push(out, Op::Square(a)))
    }

    /// Clamps into `[lo, hi]`; the gradient is zero wherever the clamp binds.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        if !(lo <= hi) {
            return Err(Error::InvalidArgument(format!("clamp bounds [{lo}, {hi}]")));
        }
        let out = finite("clamp", self.value(a).map(|x| x.clamp(lo, hi)))?;
        Ok(self.push(out, Op::Clamp(a, lo, hi)))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        if v.is_empty() {
            return Err(Error::EmptyTensor("sum"));
        }
        let out = finite("sum", Matrix::scalar(v.sum()))?;
        Ok(self.push(out, Op::Sum(a)))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        if v.is_empty() {
            return Err(Error::EmptyTensor("mean"));
        }
        let out = finite("mean", Matrix::scalar(v.sum() / v.len() as f64))?;
        Ok(self.push(out, Op::Mean(a)))
    }

    /// Sums each row into an `rows x 1` column.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a);
        if v.is_empty() {
            return Err(Error::EmptyTensor("row_sum"));
        }
        let sums = (0..v.rows()).map(|r| v.row(r).iter().sum()).collect();
        let out = finite("row_sum", Matrix::from_vec(v.rows(), 1, sums)?)?;
        Ok(self.push(out, Op::RowSum(a)))
    }

    /// Row-wise cosine similarity, `⟨a_i,b_i⟩ / (max(‖a_i‖,eps)·max(‖b_i‖,eps))`.
    pub fn cosine_rows(&mut self, a: Var, b: Var, eps: f64) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        same_shape("cosine_rows", va, vb)?;
        let sims = (0..va.rows())
            .map(|r| {
                let (x, y) = (va.row(r), vb.row(r));
                let nx = norm(x).max(eps);
                let ny = norm(y).max(eps);
                super::matrix::dot(x, y) / (nx * ny)
            })
            .collect();
        let out = finite("cosine_rows", Matrix::from_vec(va.rows(), 1, sims)?)?;
        Ok(self.push(out, Op::CosineRows(a, b, eps)))
    }

    /// Gathers rows by index (duplicates allowed).
    pub fn gather_rows(&mut self, a: Var, indices: Vec<usize>) -> Result<Var> {
        let v = self.value(a);
        if let Some(&bad) = indices.iter().find(|&&i| i >= v.rows()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                num_nodes: v.rows(),
            });
        }
        let out = v.select_rows(&indices);
        Ok(self.push(out, Op::GatherRows(a, indices)))
    }

    /// Multiplies row `i` by the constant `weights[i]`.
    pub fn scale_rows(&mut self, a: Var, weights: Vec<f64>) -> Result<Var> {
        let v = self.value(a);
        if weights.len() != v.rows() {
            return Err(Error::ShapeMismatch {
                op: "scale_rows",
                lhs: v.shape(),
                rhs: (weights.len(), 1),
            });
        }
        let mut out = v.clone();
        for (r, &w) in weights.iter().enumerate() {
            out.row_mut(r).iter_mut().for_each(|x| *x *= w);
        }
        let out = finite("scale_rows", out)?;
        Ok(self.push(out, Op::ScaleRows(a, weights)))
    }

    pub fn ew(&mut self, op: Elementwise, operands: &[Var]) -> Result<Var> {
        let arity = match op {
            Elementwise::Add | Elementwise::Sub | Elementwise::Mul => 2,
            _ => 1,
        };
        if operands.len() != arity {
            return Err(Error::InvalidArgument(format!(
                "{op:?} takes {arity} operand(s), got {}",
                operands.len()
            )));
        }
        let a = operands[0];
        match op {
            Elementwise::Add => self.add(a, operands[1]),
            Elementwise::Sub => self.sub(a, operands[1]),
            Elementwise::Mul => self.mul(a, operands[1]),
            Elementwise::MulScalar(c) => self.mul_scalar(a, c),
            Elementwise::AddScalar(c) => self.add_scalar(a, c),
            Elementwise::Relu => self.relu(a),
            Elementwise::Sigmoid => self.sigmoid(a),
            Elementwise::Log => self.log(a),
            Elementwise::Square => self.square(a),
        }
    }

    pub fn reduce(&mut self, op: Reduction, a: Var) -> Result<Var> {
        match op {
            Reduction::Sum => self.sum(a),
            Reduction::Mean => self.mean(a),
            Reduction::RowSum => self.row_sum(a),
        }
    }

    /// Reverse-mode pass from a 1x1 `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::NotScalar {
                rows: lv.rows(),
                cols: lv.cols(),
            });
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let sign = if self.fault == Some(node.op.kind()) { -1.0 } else { 1.0 };
            let contributions = self.local_grads(node, &g)?;
            for (var, mut contrib) in contributions {
                if !self.nodes[var.0].requires_grad {
                    continue;
                }
                if sign < 0.0 {
                    contrib = contrib.scale(-1.0);
                }
                match &mut grads[var.0] {
                    Some(acc) => acc.add_assign(&contrib),
                    slot @ None => *slot = Some(contrib),
                }
            }
            grads[idx] = Some(g);
        }

        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }

    fn local_grads(&self, node: &Node, g: &Matrix) -> Result<Vec<(Var, Matrix)>> {
        let val = |v: Var| &self.nodes[v.0].value;
        Ok(match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) => {
                let mut out = Vec::with_capacity(2);
                if self.nodes[a.0].requires_grad {
                    out.push((*a, g.matmul_t(val(*b))?));
                }
                if self.nodes[b.0].requires_grad {
                    out.push((*b, val(*a).t_matmul(g)?));
                }
                out
            }
            Op::SpMM(s, d) => vec![(*d, s.t_matmul(g)?)],
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.scale(-1.0))],
            Op::Mul(a, b) => vec![
                (*a, g.zip_map(val(*b), "mul_backward", |x, y| x * y)?),
                (*b, g.zip_map(val(*a), "mul_backward", |x, y| x * y)?),
            ],
            Op::MulScalar(a, c) => vec![(*a, g.scale(*c))],
            Op::AddScalar(a) => vec![(*a, g.clone())],
            Op::Relu(a) => vec![(
                *a,
                g.zip_map(val(*a), "relu_backward", |gi, x| if x > 0.0 { gi } else { 0.0 })?,
            )],
            Op::Sigmoid(a) => vec![(
                *a,
                g.zip_map(&node.value, "sigmoid_backward", |gi, y| gi * y * (1.0 - y))?,
            )],
            Op::Log(a) => vec![(*a, g.zip_map(val(*a), "log_backward", |gi, x| gi / x)?)],
            Op::Square(a) => vec![(*a, g.zip_map(val(*a), "square_backward", |gi, x| 2.0 * gi * x)?)],
            Op::Clamp(a, lo, hi) => vec![(
                *a,
                g.zip_map(val(*a), "clamp_backward", |gi, x| {
                    if x > *lo && x < *hi {
                        gi
                    } else {
                        0.0
                    }
                })?,
            )],
            Op::Sum(a) => {
                let (r, c) = val(*a).shape();
                vec![(*a, Matrix::filled(r, c, g.as_slice()[0]))]
            }
            Op::Mean(a) => {
                let (r, c) = val(*a).shape();
                vec![(*a, Matrix::filled(r, c, g.as_slice()[0] / (r * c) as f64))]
            }
            Op::RowSum(a) => {
                let (r, c) = val(*a).shape();
                let mut out = Matrix::zeros(r, c);
                for i in 0..r {
                    let gi = g.get(i, 0);
                    out.row_mut(i).iter_mut().for_each(|x| *x = gi);
                }
                vec![(*a, out)]
            }
            Op::CosineRows(a, b, eps) => {
                let (va, vb) = (val(*a), val(*b));
                let mut ga = Matrix::zeros(va.rows(), va.cols());
                let mut gb = Matrix::zeros(vb.rows(), vb.cols());
                for r in 0..va.rows() {
                    let (x, y) = (va.row(r), vb.row(r));
                    let (nx_raw, ny_raw) = (norm(x), norm(y));
                    let (nx, ny) = (nx_raw.max(*eps), ny_raw.max(*eps));
                    let cos = node.value.get(r, 0);
                    let gi = g.get(r, 0);
                    // Where a norm is clamped to eps it is a constant.
                    let kx = if nx_raw > *eps { cos / (nx * nx) } else { 0.0 };
                    let ky = if ny_raw > *eps { cos / (ny * ny) } else { 0.0 };
                    let inv = 1.0 / (nx * ny);
                    for (k, (gx, gy)) in ga.row_mut(r).iter_mut().zip(gb.row_mut(r)).enumerate() {
                        *gx = gi * (y[k] * inv - kx * x[k]);
                        *gy = gi * (x[k] * inv - ky * y[k]);
                    }
                }
                vec![(*a, ga), (*b, gb)]
            }
            Op::GatherRows(a, indices) => {
                let (r, c) = val(*a).shape();
                let mut out = Matrix::zeros(r, c);
                for (k, &i) in indices.iter().enumerate() {
                    for (o, &v) in out.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                vec![(*a, out)]
            }
            Op::ScaleRows(a, weights) => {
                let mut out = g.clone();
                for (r, &w) in weights.iter().enumerate() {
                    out.row_mut(r).iter_mut().for_each(|x| *x *= w);
                }
                vec![(*a, out)]
            }
        })
    }
}

#[inline]
fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
