//! Small dense helpers: symmetric eigenproblems and fixed-rank tensors.

use nalgebra::{DMatrix, DVector};

/// Symmetric eigen-decomposition with eigenvalues in ascending order.
///
/// Columns of the returned matrix are the matching unit eigenvectors.
pub fn sym_eigen_ascending(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = symmetrize(m);
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Solves `a v = lambda b v` for symmetric `a` and positive-definite `b`.
///
/// Uses the Cholesky factor of `b`; eigenvectors come back `b`-orthonormal
/// and eigenvalues ascending. Returns `None` when `b` is not positive definite.
pub fn generalized_sym_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<(Vec<f64>, DMatrix<f64>)> {
    let chol = symmetrize(b).cholesky()?;
    let l = chol.l();
    let l_inv = l.clone().try_inverse()?;
    let reduced = &l_inv * symmetrize(a) * l_inv.transpose();
    let (values, w) = sym_eigen_ascending(&reduced);
    let vectors = l_inv.transpose() * w;
    Some((values, vectors))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `u^T m v`.
pub fn bilinear(m: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    (u.transpose() * m * v)[(0, 0)]
}

/// Rank-3 array over `0..d` in each slot, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim * dim] }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.dim + b) * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        let d = self.dim;
        self.data[(a * d + b) * d + c] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

/// Rank-4 array over `0..d` in each slot, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim * dim * dim] }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.dim;
        self.data[((a * n + b) * n + c) * n + d]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        let n = self.dim;
        self.data[((a * n + b) * n + c) * n + d] = v;
    }

    /// Full contraction `T(u, v, w, z)`.
    pub fn contract(&self, u: &[f64], v: &[f64], w: &[f64], z: &[f64]) -> f64 {
        let n = self.dim;
        let mut total = 0.0;
        for a in 0..n {
            if u[a] == 0.0 {
                continue;
            }
            for b in 0..n {
                if v[b] == 0.0 {
                    continue;
                }
                for c in 0..n {
                    if w[c] == 0.0 {
                        continue;
                    }
                    let base = ((a * n + b) * n + c) * n;
                    let mut inner = 0.0;
                    for d in 0..n {
                        inner += self.data[base + d] * z[d];
                    }
                    total += u[a] * v[b] * w[c] * inner;
                }
            }
        }
        total
    }

    /// Contract the first three slots, leaving a covector in the last.
    pub fn contract3(&self, u: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let s = u[a] * v[b] * w[c];
                    if s == 0.0 {
                        continue;
                    }
                    let base = ((a * n + b) * n + c) * n;
                    for (d, o) in out.iter_mut().enumerate() {
                        *o += s * self.data[base + d];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}
