//! Reverse-mode automatic differentiation over matrix-valued nodes.
//!
//! The tape is an append-only list of primitive operations; topological
//! order is free because an operation can only reference already-recorded
//! inputs. A reverse pass from a scalar root accumulates adjoints into
//! every reachable node and returns the gradient of the root with respect
//! to the registered parameter leaves, flattened in registration order.
//!
//! Nodes hold whole matrices rather than scalars so a batch of hedging
//! episodes runs as a handful of matmuls per time step instead of
//! millions of scalar nodes.

use super::matrix::Matrix;
use crate::{Error, Result};

/// Handle to a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorId(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Mul(TensorId, TensorId),
    Div(TensorId, TensorId),
    /// `[m,n] + [1,n]` broadcast over rows (bias add).
    AddRow(TensorId, TensorId),
    /// `[m,n] + [m,1]` broadcast over columns.
    AddCol(TensorId, TensorId),
    /// `[m,n] - [m,1]` broadcast over columns.
    SubCol(TensorId, TensorId),
    Scale(TensorId, f64),
    AddScalar(TensorId),
    MatMul(TensorId, TensorId),
    Relu(TensorId),
    Tanh(TensorId),
    Logistic(TensorId),
    Exp(TensorId),
    Ln(TensorId),
    Sqrt(TensorId),
    Neg(TensorId),
    Clip(TensorId, f64, f64),
    Max(TensorId, TensorId),
    Min(TensorId, TensorId),
    /// Row-wise mean: `[m,n] -> [m,1]`.
    RowMean(TensorId),
    /// Mean of all entries: `-> [1,1]`.
    Mean(TensorId),
    /// Sum of all entries: `-> [1,1]`.
    Sum(TensorId),
    /// Per-row column select: `[m,n], idx[m] -> [m,1]`.
    Gather(TensorId, Vec<usize>),
    /// Column slice `[m, start..start+len]`.
    SliceCols(TensorId, usize, usize),
    /// Column concatenation `[m,p],[m,q] -> [m,p+q]`.
    ConcatCols(TensorId, TensorId),
}

struct Node {
    op: Op,
    value: Matrix,
}

/// Append-only operation tape.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<TensorId>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Clears all nodes and parameter registrations; the tape is reusable.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.params.clear();
    }

    pub fn value(&self, id: TensorId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: TensorId) -> f64 {
        let m = self.value(id);
        assert_eq!((m.rows(), m.cols()), (1, 1), "scalar() on non-scalar node");
        m.data()[0]
    }

    fn push(&mut self, op: Op, value: Matrix) -> TensorId {
        self.nodes.push(Node { op, value });
        TensorId(self.nodes.len() - 1)
    }

    /// Registers a differentiable parameter leaf. Gradients come back in
    /// registration order.
    pub fn param(&mut self, value: Matrix) -> TensorId {
        let id = self.push(Op::Leaf, value);
        self.params.push(id);
        id
    }

    /// A constant leaf: participates in the forward value, receives no
    /// gradient slot.
    pub fn constant(&mut self, value: Matrix) -> TensorId {
        self.push(Op::Leaf, value)
    }

    pub fn constant_col(&mut self, col: &[f64]) -> TensorId {
        self.constant(Matrix::from_col(col))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let v = self.zip(a, b, |x, y| x + y);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let v = self.zip(a, b, |x, y| x - y);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let v = self.zip(a, b, |x, y| x * y);
        self.push(Op::Mul(a, b), v)
    }

    pub fn div(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let v = self.zip(a, b, |x, y| x / y);
        self.push(Op::Div(a, b), v)
    }

    pub fn add_row(&mut self, a: TensorId, row: TensorId) -> TensorId {
        let (m, r) = (self.value(a), self.value(row));
        assert_eq!(r.rows(), 1);
        assert_eq!(m.cols(), r.cols());
        let mut out = m.clone();
        for i in 0..out.rows() {
            for (o, &b) in out.row_mut(i).iter_mut().zip(r.data()) {
                *o += b;
            }
        }
        self.push(Op::AddRow(a, row), out)
    }

    pub fn add_col(&mut self, a: TensorId, col: TensorId) -> TensorId {
        let v = self.broadcast_col(a, col, |x, y| x + y);
        self.push(Op::AddCol(a, col), v)
    }

    pub fn sub_col(&mut self, a: TensorId, col: TensorId) -> TensorId {
        let v = self.broadcast_col(a, col, |x, y| x - y);
        self.push(Op::SubCol(a, col), v)
    }

    pub fn scale(&mut self, a: TensorId, k: f64) -> TensorId {
        let v = self.map(a, |x| k * x);
        self.push(Op::Scale(a, k), v)
    }

    pub fn add_scalar(&mut self, a: TensorId, k: f64) -> TensorId {
        let v = self.map(a, |x| x + k);
        self.push(Op::AddScalar(a), v)
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let v = self.value(a).matmul(self.value(b));
        self.push(Op::MatMul(a, b), v)
    }

    pub fn relu(&mut self, a: TensorId) -> TensorId {
        let v = self.map(a, |x| x.max(0.0));
        self.push(Op::Relu(a), v)
    }

    pub fn tanh(&mut self, a: TensorId) -> TensorId {
        let v = self.map(a, f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn logistic(&mut self, a: TensorId) -> TensorId {
        let v = self.map(a, logistic);
        self.push(Op::Logistic(a), v)
    }

    pub fn exp(&mut self, a: TensorId) -> TensorId {
        let v = self.map(a, f64::exp);
        self.push(Op::Exp(a), v)
    }

    pub fn ln(&mut self, a: TensorId) -> TensorId {
        let v = self.map(a, f64::ln);
        self.push(Op::Ln(a), v)
    }

    pub fn sqrt(&mut self, a: TensorId) -> TensorId {
        let v = self.map(a, f64::sqrt);
        self.push(Op::Sqrt(a), v)
    }

    pub fn neg(&mut self, a: TensorId) -> TensorId {
        let v = self.map(a, |x| -x);
        self.push(Op::Neg(a), v)
    }

    pub fn clip(&mut self, a: TensorId, lo: f64, hi: f64) -> TensorId {
        let v = self.map(a, |x| x.clamp(lo, hi));
        self.push(Op::Clip(a, lo, hi), v)
    }

    pub fn max(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let v = self.zip(a, b, f64::max);
        self.push(Op::Max(a, b), v)
    }

    pub fn min(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let v = self.zip(a, b, f64::min);
        self.push(Op::Min(a, b), v)
    }

    pub fn row_mean(&mut self, a: TensorId) -> TensorId {
        let m = self.value(a);
        let inv = 1.0 / m.cols() as f64;
        let col: Vec<f64> = (0..m.rows())
            .map(|i| m.row(i).iter().sum::<f64>() * inv)
            .collect();
        self.push(Op::RowMean(a), Matrix::from_col(&col))
    }

    pub fn mean(&mut self, a: TensorId) -> TensorId {
        let m = self.value(a);
        let v = m.data().iter().sum::<f64>() / m.data().len() as f64;
        self.push(Op::Mean(a), Matrix::from_vec(1, 1, vec![v]))
    }

    pub fn sum(&mut self, a: TensorId) -> TensorId {
        let m = self.value(a);
        let v = m.data().iter().sum::<f64>();
        self.push(Op::Sum(a), Matrix::from_vec(1, 1, vec![v]))
    }

    /// Per-row indexed select: output row i is `a[i, idx[i]]`.
    pub fn gather(&mut self, a: TensorId, idx: Vec<usize>) -> TensorId {
        let m = self.value(a);
        assert_eq!(idx.len(), m.rows());
        let col: Vec<f64> = idx.iter().enumerate().map(|(i, &j)| m.get(i, j)).collect();
        self.push(Op::Gather(a, idx), Matrix::from_col(&col))
    }

    pub fn slice_cols(&mut self, a: TensorId, start: usize, len: usize) -> TensorId {
        let m = self.value(a);
        assert!(start + len <= m.cols());
        let mut out = Matrix::zeros(m.rows(), len);
        for i in 0..m.rows() {
            out.row_mut(i).copy_from_slice(&m.row(i)[start..start + len]);
        }
        self.push(Op::SliceCols(a, start, len), out)
    }

    pub fn concat_cols(&mut self, a: TensorId, b: TensorId) -> TensorId {
        let (ma, mb) = (self.value(a), self.value(b));
        assert_eq!(ma.rows(), mb.rows());
        let mut out = Matrix::zeros(ma.rows(), ma.cols() + mb.cols());
        for i in 0..ma.rows() {
            let r = out.row_mut(i);
            r[..ma.cols()].copy_from_slice(ma.row(i));
            r[ma.cols()..].copy_from_slice(mb.row(i));
        }
        self.push(Op::ConcatCols(a, b), out)
    }

    fn map(&self, a: TensorId, f: impl Fn(f64) -> f64) -> Matrix {
        let m = self.value(a);
        Matrix::from_vec(m.rows(), m.cols(), m.data().iter().map(|&x| f(x)).collect())
    }

    fn zip(&self, a: TensorId, b: TensorId, f: impl Fn(f64, f64) -> f64) -> Matrix {
        let (ma, mb) = (self.value(a), self.value(b));
        assert_eq!((ma.rows(), ma.cols()), (mb.rows(), mb.cols()), "shape mismatch");
        Matrix::from_vec(
            ma.rows(),
            ma.cols(),
            ma.data().iter().zip(mb.data()).map(|(&x, &y)| f(x, y)).collect(),
        )
    }

    fn broadcast_col(&self, a: TensorId, col: TensorId, f: impl Fn(f64, f64) -> f64) -> Matrix {
        let (m, c) = (self.value(a), self.value(col));
        assert_eq!(c.cols(), 1);
        assert_eq!(m.rows(), c.rows());
        let mut out = m.clone();
        for i in 0..out.rows() {
            let cv = c.data()[i];
            for o in out.row_mut(i) {
                *o = f(*o, cv);
            }
        }
        out
    }

    /// Reverse pass from a scalar root. Returns the gradient with respect
    /// to every registered parameter, flattened in registration order.
    pub fn backward(&self, root: TensorId) -> Result<Vec<f64>> {
        let rv = self.value(root);
        if rv.rows() != 1 || rv.cols() != 1 {
            return Err(Error::Contract(format!(
                "backward root must be scalar, got {}x{}",
                rv.rows(),
                rv.cols()
            )));
        }
        let mut adj: Vec<Matrix> = self
            .nodes
            .iter()
            .map(|n| Matrix::zeros(n.value.rows(), n.value.cols()))
            .collect();
        adj[root.0].data_mut()[0] = 1.0;

        for i in (0..=root.0).rev() {
            if adj[i].data().iter().all(|&x| x == 0.0) {
                continue;
            }
            let d = std::mem::replace(&mut adj[i], Matrix::zeros(0, 0));
            self.accumulate(i, &d, &mut adj);
            adj[i] = d;
        }

        let mut grad = Vec::new();
        for &p in &self.params {
            grad.extend_from_slice(adj[p.0].data());
        }
        Ok(grad)
    }

    fn accumulate(&self, i: usize, d: &Matrix, adj: &mut [Matrix]) {
        let node = &self.nodes[i];
        let val = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                axpy(&mut adj[a.0], 1.0, d.data());
                axpy(&mut adj[b.0], 1.0, d.data());
            }
            Op::Sub(a, b) => {
                axpy(&mut adj[a.0], 1.0, d.data());
                axpy(&mut adj[b.0], -1.0, d.data());
            }
            Op::Mul(a, b) => {
                if a == b {
                    let av = self.value(*a).data().to_vec();
                    let da = adj[a.0].data_mut();
                    for ((g, &x), &dv) in da.iter_mut().zip(&av).zip(d.data()) {
                        *g += 2.0 * x * dv;
                    }
                } else {
                    let av = self.value(*a).data().to_vec();
                    let bv = self.value(*b).data().to_vec();
                    for ((g, &y), &dv) in adj[a.0].data_mut().iter_mut().zip(&bv).zip(d.data()) {
                        *g += y * dv;
                    }
                    for ((g, &x), &dv) in adj[b.0].data_mut().iter_mut().zip(&av).zip(d.data()) {
                        *g += x * dv;
                    }
                }
            }
            Op::Div(a, b) => {
                let bv = self.value(*b).data().to_vec();
                let cv = val.data().to_vec();
                for ((g, &y), &dv) in adj[a.0].data_mut().iter_mut().zip(&bv).zip(d.data()) {
                    *g += dv / y;
                }
                for (((g, &y), &c), &dv) in adj[b.0]
                    .data_mut()
                    .iter_mut()
                    .zip(&bv)
                    .zip(&cv)
                    .zip(d.data())
                {
                    *g -= dv * c / y;
                }
            }
            Op::AddRow(a, row) => {
                axpy(&mut adj[a.0], 1.0, d.data());
                let cols = val.cols();
                let g = adj[row.0].data_mut();
                for (k, &dv) in d.data().iter().enumerate() {
                    g[k % cols] += dv;
                }
            }
            Op::AddCol(a, col) => {
                axpy(&mut adj[a.0], 1.0, d.data());
                let g = adj[col.0].data_mut();
                for i in 0..d.rows() {
                    g[i] += d.row(i).iter().sum::<f64>();
                }
            }
            Op::SubCol(a, col) => {
                axpy(&mut adj[a.0], 1.0, d.data());
                let g = adj[col.0].data_mut();
                for i in 0..d.rows() {
                    g[i] -= d.row(i).iter().sum::<f64>();
                }
            }
            Op::Scale(a, k) => axpy(&mut adj[a.0], *k, d.data()),
            Op::AddScalar(a) => axpy(&mut adj[a.0], 1.0, d.data()),
            Op::MatMul(a, b) => {
                let da = d.matmul_nt(self.value(*b));
                axpy(&mut adj[a.0], 1.0, da.data());
                let db = self.value(*a).matmul_tn(d);
                axpy(&mut adj[b.0], 1.0, db.data());
            }
            Op::Relu(a) => {
                let av = self.value(*a).data().to_vec();
                for ((g, &x), &dv) in adj[a.0].data_mut().iter_mut().zip(&av).zip(d.data()) {
                    if x > 0.0 {
                        *g += dv;
                    }
                }
            }
            Op::Tanh(a) => {
                let cv = val.data().to_vec();
                for ((g, &c), &dv) in adj[a.0].data_mut().iter_mut().zip(&cv).zip(d.data()) {
                    *g += dv * (1.0 - c * c);
                }
            }
            Op::Logistic(a) => {
                let cv = val.data().to_vec();
                for ((g, &c), &dv) in adj[a.0].data_mut().iter_mut().zip(&cv).zip(d.data()) {
                    *g += dv * c * (1.0 - c);
                }
            }
            Op::Exp(a) => {
                let cv = val.data().to_vec();
                for ((g, &c), &dv) in adj[a.0].data_mut().iter_mut().zip(&cv).zip(d.data()) {
                    *g += dv * c;
                }
            }
            Op::Ln(a) => {
                let av = self.value(*a).data().to_vec();
                for ((g, &x), &dv) in adj[a.0].data_mut().iter_mut().zip(&av).zip(d.data()) {
                    *g += dv / x;
                }
            }
            Op::Sqrt(a) => {
                // subgradient 0 at sqrt(0): the RSQP root of an all-gain
                // batch must not blow up the reverse pass
                let cv = val.data().to_vec();
                for ((g, &c), &dv) in adj[a.0].data_mut().iter_mut().zip(&cv).zip(d.data()) {
                    if c > 0.0 {
                        *g += dv / (2.0 * c);
                    }
                }
            }
            Op::Neg(a) => axpy(&mut adj[a.0], -1.0, d.data()),
            Op::Clip(a, lo, hi) => {
                let av = self.value(*a).data().to_vec();
                for ((g, &x), &dv) in adj[a.0].data_mut().iter_mut().zip(&av).zip(d.data()) {
                    if x >= *lo && x <= *hi {
                        *g += dv;
                    }
                }
            }
            Op::Max(a, b) => {
                let av = self.value(*a).data().to_vec();
                let bv = self.value(*b).data().to_vec();
                for (((g, &x), &y), &dv) in adj[a.0]
                    .data_mut()
                    .iter_mut()
                    .zip(&av)
                    .zip(&bv)
                    .zip(d.data())
                {
                    if x >= y {
                        *g += dv;
                    }
                }
                for (((g, &x), &y), &dv) in adj[b.0]
                    .data_mut()
                    .iter_mut()
                    .zip(&av)
                    .zip(&bv)
                    .zip(d.data())
                {
                    if x < y {
                        *g += dv;
                    }
                }
            }
            Op::Min(a, b) => {
                let av = self.value(*a).data().to_vec();
                let bv = self.value(*b).data().to_vec();
                for (((g, &x), &y), &dv) in adj[a.0]
                    .data_mut()
                    .iter_mut()
                    .zip(&av)
                    .zip(&bv)
                    .zip(d.data())
                {
                    if x <= y {
                        *g += dv;
                    }
                }
                for (((g, &x), &y), &dv) in adj[b.0]
                    .data_mut()
                    .iter_mut()
                    .zip(&av)
                    .zip(&bv)
                    .zip(d.data())
                {
                    if x > y {
                        *g += dv;
                    }
                }
            }
            Op::RowMean(a) => {
                let n = self.value(*a).cols();
                let inv = 1.0 / n as f64;
                let g = &mut adj[a.0];
                for i in 0..d.rows() {
                    let dv = d.data()[i] * inv;
                    for o in g.row_mut(i) {
                        *o += dv;
                    }
                }
            }
            Op::Mean(a) => {
                let g = &mut adj[a.0];
                let dv = d.data()[0] / g.data().len() as f64;
                for o in g.data_mut() {
                    *o += dv;
                }
            }
            Op::Sum(a) => {
                let dv = d.data()[0];
                for o in adj[a.0].data_mut() {
                    *o += dv;
                }
            }
            Op::Gather(a, idx) => {
                let g = &mut adj[a.0];
                for (i, &j) in idx.iter().enumerate() {
                    let v = g.get(i, j) + d.data()[i];
                    g.set(i, j, v);
                }
            }
            Op::SliceCols(a, start, len) => {
                let g = &mut adj[a.0];
                for i in 0..d.rows() {
                    let src = d.row(i);
                    let dst = &mut g.row_mut(i)[*start..start + len];
                    for (o, &dv) in dst.iter_mut().zip(src) {
                        *o += dv;
                    }
                }
            }
            Op::ConcatCols(a, b) => {
                let p = self.value(*a).cols();
                {
                    let g = &mut adj[a.0];
                    for i in 0..d.rows() {
                        for (o, &dv) in g.row_mut(i).iter_mut().zip(&d.row(i)[..p]) {
                            *o += dv;
                        }
                    }
                }
                let g = &mut adj[b.0];
                for i in 0..d.rows() {
                    for (o, &dv) in g.row_mut(i).iter_mut().zip(&d.row(i)[p..]) {
                        *o += dv;
                    }
                }
            }
        }
    }
}

/// Numerically stable logistic, clamped into the open interval so the
/// (0,1) output-head contract survives f64 saturation at |x| > ~37.
pub(crate) fn logistic(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn axpy(dst: &mut Matrix, k: f64, src: &[f64]) {
    for (o, &s) in dst.data_mut().iter_mut().zip(src) {
        *o += k * s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_root_has_zero_gradient() {
        let mut t = Tape::new();
        let w = t.param(Matrix::from_vec(1, 1, vec![3.0]));
        let _ = w;
        let c = t.constant(Matrix::from_vec(1, 1, vec![5.0]));
        let g = t.backward(c).unwrap();
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn product_rule() {
        let mut t = Tape::new();
        let w = t.param(Matrix::from_vec(1, 1, vec![3.0]));
        let x = t.constant(Matrix::from_vec(1, 1, vec![2.0]));
        let y = t.mul(w, x);
        assert_eq!(t.scalar(y), 6.0);
        let g = t.backward(y).unwrap();
        assert_eq!(g, vec![2.0]);
    }

    #[test]
    fn non_scalar_root_is_contract_error() {
        let mut t = Tape::new();
        let w = t.param(Matrix::from_vec(2, 1, vec![1.0, 2.0]));
        assert!(matches!(t.backward(w), Err(Error::Contract(_))));
    }

    #[test]
    fn reset_makes_tape_reusable() {
        let mut t = Tape::new();
        let w = t.param(Matrix::from_vec(1, 1, vec![1.0]));
        let y = t.mul(w, w);
        assert_eq!(t.backward(y).unwrap(), vec![2.0]);
        t.reset();
        assert!(t.is_empty());
        let w = t.param(Matrix::from_vec(1, 1, vec![4.0]));
        let y = t.sqrt(w);
        assert_eq!(t.scalar(y), 2.0);
        assert_eq!(t.backward(y).unwrap(), vec![0.25]);
    }

    #[test]
    fn sqrt_at_zero_yields_finite_adjoints() {
        let mut t = Tape::new();
        let w = t.param(Matrix::from_vec(1, 1, vec![0.0]));
        let r = t.relu(w);
        let s = t.mul(r, r);
        let y = t.sqrt(s);
        let g = t.backward(y).unwrap();
        assert!(g[0].is_finite());
        assert_eq!(g[0], 0.0);
    }

    /// Central finite differences on a composite expression touching most ops.
    #[test]
    fn gradient_matches_finite_differences() {
        let eval = |p: &[f64]| -> f64 {
            let mut t = Tape::new();
            let w = t.param(Matrix::from_vec(2, 2, p[..4].to_vec()));
            let b = t.param(Matrix::from_vec(1, 2, p[4..6].to_vec()));
            let x = t.constant(Matrix::from_vec(3, 2, vec![0.4, -0.2, 1.1, 0.7, -0.5, 0.3]));
            let h = t.matmul(x, w);
            let h = t.add_row(h, b);
            let h = t.tanh(h);
            let l = t.logistic(h);
            let e = t.exp(l);
            let s1 = t.slice_cols(e, 0, 1);
            let s2 = t.slice_cols(e, 1, 1);
            let c = t.concat_cols(s1, s2);
            let mx = t.max(s1, s2);
            let mn = t.min(s1, s2);
            let r = t.div(mx, mn);
            let cc = t.concat_cols(c, r);
            let rm = t.row_mean(cc);
            let sq = t.mul(rm, rm);
            let sum = t.sum(sq);
            let root = t.sqrt(sum);
            t.scalar(root)
        };
        let grad = {
            let mut t = Tape::new();
            let p0 = [0.3, -0.7, 0.9, 0.2, 0.1, -0.4];
            let w = t.param(Matrix::from_vec(2, 2, p0[..4].to_vec()));
            let b = t.param(Matrix::from_vec(1, 2, p0[4..6].to_vec()));
            let x = t.constant(Matrix::from_vec(3, 2, vec![0.4, -0.2, 1.1, 0.7, -0.5, 0.3]));
            let h = t.matmul(x, w);
            let h = t.add_row(h, b);
            let h = t.tanh(h);
            let l = t.logistic(h);
            let e = t.exp(l);
            let s1 = t.slice_cols(e, 0, 1);
            let s2 = t.slice_cols(e, 1, 1);
            let c = t.concat_cols(s1, s2);
            let mx = t.max(s1, s2);
            let mn = t.min(s1, s2);
            let r = t.div(mx, mn);
            let cc = t.concat_cols(c, r);
            let rm = t.row_mean(cc);
            let sq = t.mul(rm, rm);
            let sum = t.sum(sq);
            let root = t.sqrt(sum);
            t.backward(root).unwrap()
        };
        let p0 = [0.3, -0.7, 0.9, 0.2, 0.1, -0.4];
        let h = 1e-6;
        for k in 0..6 {
            let mut pp = p0;
            pp[k] += h;
            let mut pm = p0;
            pm[k] -= h;
            let fd = (eval(&pp) - eval(&pm)) / (2.0 * h);
            assert!(
                (grad[k] - fd).abs() < 1e-6 * fd.abs().max(1.0),
                "k={k}: ad {} fd {}",
                grad[k],
                fd
            );
        }
    }
}
