//! Row-major `f64` matrices with the three multiplication kernels the
//! reverse pass needs (`A·B`, `A·Bᵀ`, `Aᵀ·B`).

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major data. Panics if `data.len() != rows*cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn from_row(row: &[f64]) -> Self {
        Matrix::from_vec(1, row.len(), row.to_vec())
    }

    pub fn from_col(col: &[f64]) -> Self {
        Matrix::from_vec(col.len(), 1, col.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self · b`. The k-loop sits in the middle so the inner loop walks
    /// both operand rows contiguously and vectorizes.
    pub fn matmul(&self, b: &Matrix) -> Matrix {
        assert_eq!(self.cols, b.rows, "matmul shape mismatch");
        let mut c = Matrix::zeros(self.rows, b.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let c_row = c.row_mut(i);
            for (l, &a) in a_row.iter().enumerate() {
                let b_row = b.row(l);
                for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                    *cv += a * bv;
                }
            }
        }
        c
    }

    /// `self · bᵀ`, with `b` stored untransposed: rows of both operands
    /// are dotted pairwise.
    pub fn matmul_nt(&self, b: &Matrix) -> Matrix {
        assert_eq!(self.cols, b.cols, "matmul_nt shape mismatch");
        let mut c = Matrix::zeros(self.rows, b.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let c_row = c.row_mut(i);
            for (j, cv) in c_row.iter_mut().enumerate() {
                *cv = dot(a_row, b.row(j));
            }
        }
        c
    }

    /// `selfᵀ · b`.
    pub fn matmul_tn(&self, b: &Matrix) -> Matrix {
        assert_eq!(self.rows, b.rows, "matmul_tn shape mismatch");
        let mut c = Matrix::zeros(self.cols, b.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let b_row = b.row(i);
            for (l, &a) in a_row.iter().enumerate() {
                let c_row = c.row_mut(l);
                for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                    *cv += a * bv;
                }
            }
        }
        c
    }
}

/// Dot product with four independent accumulators; the summation order is
/// part of the crate's determinism contract and must not change.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4 * 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i < chunks {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        i += 4;
    }
    while i < n {
        s0 += a[i] * b[i];
        i += 1;
    }
    (s0 + s1) + (s2 + s3)
}
