use serde::{Deserialize, Serialize};

use super::{AutodiffError, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor")]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawTensor> for Tensor {
    type Error = AutodiffError;

    fn try_from(r: RawTensor) -> Result<Self> {
        Tensor::new(r.rows, r.cols, r.data)
    }
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(AutodiffError::BadBuffer {
                shape: [rows, cols],
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::full(rows, cols, 0.0)
    }

    pub fn full(rows: usize, cols: usize, v: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self::full(1, 1, v)
    }

    /// Builds an `n × k` tensor from `k` columns of length `n`.
    pub fn from_columns(cols: &[&[f64]]) -> Result<Self> {
        let n = cols.first().map_or(0, |c| c.len());
        let k = cols.len();
        if let Some(c) = cols.iter().find(|c| c.len() != n) {
            return Err(AutodiffError::BadBuffer {
                shape: [n, k],
                len: c.len() * k,
            });
        }
        let mut data = Vec::with_capacity(n * k);
        for i in 0..n {
            data.extend(cols.iter().map(|c| c[i]));
        }
        Ok(Self {
            rows: n,
            cols: k,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Value of a `1×1` tensor.
    pub fn item(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    /// Rows `idx` gathered into a new tensor.
    pub fn select_rows(&self, idx: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Tensor {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Shape produced by broadcasting `a` against `b`: each extent must match or
/// be 1.
pub(crate) fn broadcast_shape(op: &'static str, a: [usize; 2], b: [usize; 2]) -> Result<[usize; 2]> {
    let dim = |x: usize, y: usize| {
        if x == y || y == 1 {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else {
            None
        }
    };
    match (dim(a[0], b[0]), dim(a[1], b[1])) {
        (Some(r), Some(c)) => Ok([r, c]),
        _ => Err(AutodiffError::ShapeMismatch {
            op,
            left: a,
            right: b,
        }),
    }
}

/// Elementwise `f(a, b)` with both operands broadcast to `shape`.
pub(crate) fn zip_broadcast(a: &Tensor, b: &Tensor, shape: [usize; 2], f: impl Fn(f64, f64) -> f64) -> Tensor {
    let [r, c] = shape;
    if a.shape() == shape && b.shape() == shape {
        return Tensor {
            rows: r,
            cols: c,
            data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
        };
    }
    let mut data = Vec::with_capacity(r * c);
    let (ar, ac) = (a.rows == 1, a.cols == 1);
    let (br, bc) = (b.rows == 1, b.cols == 1);
    for i in 0..r {
        let ai = if ar { 0 } else { i * a.cols };
        let bi = if br { 0 } else { i * b.cols };
        for j in 0..c {
            let x = a.data[ai + if ac { 0 } else { j }];
            let y = b.data[bi + if bc { 0 } else { j }];
            data.push(f(x, y));
        }
    }
    Tensor { rows: r, cols: c, data }
}

/// Sums `t` over the axes along which a tensor of `shape` was broadcast.
pub(crate) fn reduce_to(t: Tensor, shape: [usize; 2]) -> Tensor {
    if t.shape() == shape {
        return t;
    }
    let mut out = Tensor::zeros(shape[0], shape[1]);
    let (rr, cc) = (shape[0] == 1, shape[1] == 1);
    for i in 0..t.rows {
        let oi = if rr { 0 } else { i * shape[1] };
        for j in 0..t.cols {
            out.data[oi + if cc { 0 } else { j }] += t.data[i * t.cols + j];
        }
    }
    out
}

/// `C = op(A)·op(B)` with optional transposes, via `dgemm`.
pub(crate) fn gemm(a: &Tensor, ta: bool, b: &Tensor, tb: bool) -> Tensor {
    let (m, n) = (if ta { a.cols } else { a.rows }, if tb { b.rows } else { b.cols });
    gemm_acc(a, ta, b, tb, Tensor::zeros(m, n))
}

/// `A·B + 1·bias` for a `1 × n` bias row.
pub(crate) fn gemm_bias(a: &Tensor, b: &Tensor, bias: &Tensor) -> Tensor {
    let mut c = Vec::with_capacity(a.rows * b.cols);
    for _ in 0..a.rows {
        c.extend_from_slice(&bias.data);
    }
    gemm_acc(a, false, b, false, Tensor { rows: a.rows, cols: b.cols, data: c })
}

/// `C + op(A)·op(B)`.
fn gemm_acc(a: &Tensor, ta: bool, b: &Tensor, tb: bool, mut c: Tensor) -> Tensor {
    let (m, k) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (k2, n) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
    debug_assert_eq!(k, k2);
    debug_assert_eq!(c.shape(), [m, n]);
    // row-major strides of A (rows × cols) are (cols, 1); transposing swaps them
    let (rsa, csa) = if ta { (1, a.cols as isize) } else { (a.cols as isize, 1) };
    let (rsb, csb) = if tb { (1, b.cols as isize) } else { (b.cols as isize, 1) };
    if m > 0 && n > 0 && k > 0 {
        // SAFETY: the pointers cover m×k, k×n and m×n elements with the given strides.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                n,
                1.0,
                a.data.as_ptr(),
                rsa,
                csa,
                b.data.as_ptr(),
                rsb,
                csb,
                1.0,
                c.data.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
    c
}
