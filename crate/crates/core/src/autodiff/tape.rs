use super::tensor::{broadcast_shape, gemm, gemm_bias, reduce_to, zip_broadcast};
use super::{AutodiffError, ParamId, ParamStore, Result, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
enum Unary {
    Neg,
    Scale(f64),
    AddScalar(f64),
    Exp,
    Log,
    Softplus,
    Elu,
    Sigmoid,
    Square,
    Sqrt,
    ClampMin(f64),
}

#[derive(Debug, Clone, Copy)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Unary(Unary, Var),
    Binary(Binary, Var, Var),
    MatMul(Var, Var),
    Linear(Var, Var, Var),
    BroadcastTo(Var),
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    SumRows(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Record of evaluated operations, consumed by a single backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(ParamId, usize)>,
}

impl Gradients {
    /// Gradient with respect to `v`, or `None` if the loss does not depend
    /// on it.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Adds every parameter gradient into the store's buffers.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for &(id, node) in &self.params {
            if let Some(g) = &self.grads[node] {
                store.accumulate_grad(id, g);
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn map_into(x: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    x.iter().map(|&v| f(v)).collect()
}

fn zip_into(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&p, &q)| f(p, q)).collect()
}

fn unary_forward(u: Unary, x: &[f64]) -> Vec<f64> {
    match u {
        Unary::Neg => map_into(x, |v| -v),
        Unary::Scale(c) => map_into(x, |v| c * v),
        Unary::AddScalar(c) => map_into(x, |v| v + c),
        Unary::Exp => map_into(x, f64::exp),
        Unary::Log => map_into(x, f64::ln),
        Unary::Softplus => map_into(x, softplus),
        // exp(x) − 1 rather than exp_m1: several times cheaper, absolute error ~1e-16
        Unary::Elu => map_into(x, |v| if v > 0.0 { v } else { v.exp() - 1.0 }),
        Unary::Sigmoid => map_into(x, sigmoid),
        Unary::Square => map_into(x, |v| v * v),
        Unary::Sqrt => map_into(x, f64::sqrt),
        Unary::ClampMin(c) => map_into(x, |v| v.max(c)),
    }
}

/// Upstream gradient `g` times dy/dx, given input `x` and output `y`.
fn unary_backward(u: Unary, g: &[f64], x: &[f64], y: &[f64]) -> Vec<f64> {
    match u {
        Unary::Neg => map_into(g, |v| -v),
        Unary::Scale(c) => map_into(g, |v| c * v),
        Unary::AddScalar(_) => g.to_vec(),
        Unary::Exp => zip_into(g, y, |p, q| p * q),
        Unary::Log => zip_into(g, x, |p, q| p / q),
        Unary::Softplus => zip_into(g, x, |p, q| p * sigmoid(q)),
        // y > 0 exactly when x > 0, and for x ≤ 0 the slope is exp(x) = y + 1
        Unary::Elu => zip_into(g, y, |p, q| if q > 0.0 { p } else { p * (q + 1.0) }),
        Unary::Sigmoid => zip_into(g, y, |p, q| p * q * (1.0 - q)),
        Unary::Square => zip_into(g, x, |p, q| 2.0 * p * q),
        Unary::Sqrt => zip_into(g, y, |p, q| 0.5 * p / q),
        Unary::ClampMin(c) => zip_into(g, x, |p, q| if q > c { p } else { 0.0 }),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    /// Records a constant input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Records a copy of a parameter's current value.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).value.clone(), Op::Param(id))
    }

    fn unary(&mut self, u: Unary, a: Var) -> Var {
        let v = self.value(a);
        let value = Tensor::new(v.rows(), v.cols(), unary_forward(u, v.data())).expect("same shape");
        self.push(value, Op::Unary(u, a))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(Unary::Neg, a)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(Unary::Scale(c), a)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(Unary::AddScalar(c), a)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(Unary::Exp, a)
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(Unary::Log, a)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(Unary::Softplus, a)
    }

    /// ELU with α = 1.
    pub fn elu(&mut self, a: Var) -> Var {
        self.unary(Unary::Elu, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(Unary::Sigmoid, a)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(Unary::Square, a)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(Unary::Sqrt, a)
    }

    /// `max(a, c)` elementwise; the gradient is zero where the floor binds.
    pub fn clamp_min(&mut self, a: Var, c: f64) -> Var {
        self.unary(Unary::ClampMin(c), a)
    }

    fn binary(&mut self, b: Binary, name: &'static str, x: Var, y: Var) -> Result<Var> {
        let shape = broadcast_shape(name, self.shape(x), self.shape(y))?;
        let (vx, vy) = (self.value(x), self.value(y));
        let value = match b {
            Binary::Add => zip_broadcast(vx, vy, shape, |p, q| p + q),
            Binary::Sub => zip_broadcast(vx, vy, shape, |p, q| p - q),
            Binary::Mul => zip_broadcast(vx, vy, shape, |p, q| p * q),
            Binary::Div => zip_broadcast(vx, vy, shape, |p, q| p / q),
        };
        Ok(self.push(value, Op::Binary(b, x, y)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, "add", a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, "sub", a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, "mul", a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Div, "div", a, b)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa[1] != sb[0] {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                left: sa,
                right: sb,
            });
        }
        let value = gemm(self.value(a), false, self.value(b), false);
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    /// `x·w + b` with `b` a `1 × cols(w)` row added to every output row.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (sx, sw, sb) = (self.shape(x), self.shape(w), self.shape(b));
        if sx[1] != sw[0] {
            return Err(AutodiffError::ShapeMismatch {
                op: "linear",
                left: sx,
                right: sw,
            });
        }
        if sb != [1, sw[1]] {
            return Err(AutodiffError::ShapeMismatch {
                op: "linear",
                left: sw,
                right: sb,
            });
        }
        let value = gemm_bias(self.value(x), self.value(w), self.value(b));
        Ok(self.push(value, Op::Linear(x, w, b)))
    }

    pub fn broadcast_to(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let sa = self.shape(a);
        let shape = broadcast_shape("broadcast", sa, [rows, cols])?;
        if shape != [rows, cols] {
            return Err(AutodiffError::ShapeMismatch {
                op: "broadcast",
                left: sa,
                right: [rows, cols],
            });
        }
        let value = zip_broadcast(self.value(a), &Tensor::zeros(1, 1), shape, |p, _| p);
        Ok(self.push(value, Op::BroadcastTo(a)))
    }

    /// Sum of all entries, `1×1`.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Mean of all entries, `1×1`.
    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.data().iter().sum::<f64>() / v.len() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a))
    }

    /// Row sums, `n×m → n×1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let value = reduce_to(v.clone(), [v.rows(), 1]);
        self.push(value, Op::SumCols(a))
    }

    /// Column sums, `n×m → 1×m`.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let value = reduce_to(v.clone(), [1, v.cols()]);
        self.push(value, Op::SumRows(a))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let v = self.value(a);
        if start >= end || end > v.cols() {
            return Err(AutodiffError::ShapeMismatch {
                op: "slice_cols",
                left: v.shape(),
                right: [start, end],
            });
        }
        let w = end - start;
        let mut data = Vec::with_capacity(v.rows() * w);
        for i in 0..v.rows() {
            data.extend_from_slice(&v.row(i)[start..end]);
        }
        let value = Tensor::new(v.rows(), w, data)?;
        Ok(self.push(value, Op::SliceCols(a, start)))
    }

    /// Horizontal concatenation of tensors with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(AutodiffError::ShapeMismatch {
            op: "concat_cols",
            left: [0, 0],
            right: [0, 0],
        })?;
        let n = self.shape(*first)[0];
        for p in parts {
            if self.shape(*p)[0] != n {
                return Err(AutodiffError::ShapeMismatch {
                    op: "concat_cols",
                    left: self.shape(*first),
                    right: self.shape(*p),
                });
            }
        }
        let total: usize = parts.iter().map(|p| self.shape(*p)[1]).sum();
        let mut data = Vec::with_capacity(n * total);
        for i in 0..n {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(i));
            }
        }
        let value = Tensor::new(n, total, data)?;
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    /// Reverse pass from a `1×1` loss. The tape cannot be reused afterwards.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(AutodiffError::TapeConsumed);
        }
        let shape = self.shape(loss);
        if shape != [1, 1] {
            return Err(AutodiffError::NonScalarLoss(shape));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut params = Vec::new();
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let send = |grads: &mut Vec<Option<Tensor>>, v: Var, t: Tensor| match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&t),
                slot @ None => *slot = Some(t),
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => params.push((*id, i)),
                Op::Unary(u, a) => {
                    let x = &self.nodes[a.0].value;
                    let y = &node.value;
                    let data = unary_backward(*u, g.data(), x.data(), y.data());
                    send(&mut grads, *a, Tensor::new(x.rows(), x.cols(), data)?);
                }
                Op::Binary(b, x, y) => {
                    let (vx, vy) = (&self.nodes[x.0].value, &self.nodes[y.0].value);
                    let s = g.shape();
                    let (gx, gy) = match b {
                        Binary::Add => (g.clone(), g.clone()),
                        Binary::Sub => (g.clone(), g.map(|v| -v)),
                        Binary::Mul => (
                            zip_broadcast(&g, vy, s, |p, q| p * q),
                            zip_broadcast(&g, vx, s, |p, q| p * q),
                        ),
                        Binary::Div => {
                            let gx = zip_broadcast(&g, vy, s, |p, q| p / q);
                            // ∂(x/y)/∂y = −(x/y)/y
                            let t = zip_broadcast(&g, &node.value, s, |p, q| -p * q);
                            (gx, zip_broadcast(&t, vy, s, |p, q| p / q))
                        }
                    };
                    send(&mut grads, *x, reduce_to(gx, vx.shape()));
                    send(&mut grads, *y, reduce_to(gy, vy.shape()));
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga = gemm(&g, false, vb, true);
                    let gb = gemm(va, true, &g, false);
                    send(&mut grads, *a, ga);
                    send(&mut grads, *b, gb);
                }
                Op::Linear(x, w, b) => {
                    let (vx, vw) = (&self.nodes[x.0].value, &self.nodes[w.0].value);
                    send(&mut grads, *x, gemm(&g, false, vw, true));
                    send(&mut grads, *w, gemm(vx, true, &g, false));
                    send(&mut grads, *b, reduce_to(g.clone(), [1, g.cols()]));
                }
                Op::BroadcastTo(a) => {
                    let s = self.nodes[a.0].value.shape();
                    send(&mut grads, *a, reduce_to(g.clone(), s));
                }
                Op::Sum(a) | Op::Mean(a) => {
                    let v = &self.nodes[a.0].value;
                    let mut gv = g.data()[0];
                    if matches!(node.op, Op::Mean(_)) {
                        gv /= v.len() as f64;
                    }
                    send(&mut grads, *a, Tensor::full(v.rows(), v.cols(), gv));
                }
                Op::SumCols(a) | Op::SumRows(a) => {
                    let s = self.nodes[a.0].value.shape();
                    send(&mut grads, *a, zip_broadcast(&g, &Tensor::zeros(1, 1), s, |p, _| p));
                }
                Op::SliceCols(a, start) => {
                    let v = &self.nodes[a.0].value;
                    let mut t = Tensor::zeros(v.rows(), v.cols());
                    let w = g.cols();
                    let cols = v.cols();
                    for r in 0..g.rows() {
                        t.data_mut()[r * cols + start..r * cols + start + w].copy_from_slice(g.row(r));
                    }
                    send(&mut grads, *a, t);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let w = self.nodes[p.0].value.cols();
                        let mut data = Vec::with_capacity(g.rows() * w);
                        for r in 0..g.rows() {
                            data.extend_from_slice(&g.row(r)[offset..offset + w]);
                        }
                        send(&mut grads, *p, Tensor::new(g.rows(), w, data)?);
                        offset += w;
                    }
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads, params })
    }

    /// Backward pass whose parameter gradients are added into `store`.
    pub fn backward_into(&mut self, loss: Var, store: &mut ParamStore) -> Result<Gradients> {
        let g = self.backward(loss)?;
        g.accumulate_into(store);
        Ok(g)
    }
}
