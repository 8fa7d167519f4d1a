//! Small dense linear algebra.
//!
//! Everything here operates on tall `n × r` or square `r × r` matrices with
//! `r` at most a few dozen: the compact quasi-Newton machinery never forms an
//! `n × n` matrix. Storage is column-major so that the columns of a tall
//! matrix (the stored curvature vectors) are contiguous slices.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative magnitude below which an `R` diagonal entry marks a dependent column.
pub const QR_RANK_TOL: f64 = 1e-10;

/// Relative asymmetry tolerated by the symmetric routines.
pub const SYMMETRY_TOL: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense column-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix whose columns are the given vectors, all of length `rows`.
    pub fn from_columns<C: AsRef<[f64]>>(rows: usize, columns: &[C]) -> Self {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            let c = c.as_ref();
            assert_eq!(c.len(), rows, "column length mismatch");
            data.extend_from_slice(c);
        }
        Self {
            rows,
            cols: columns.len(),
            data,
        }
    }

    /// Builds a matrix from row slices (convenient for literals in tests and fixtures).
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.as_ref().len());
        Self::from_fn(n, m, |i, j| {
            let r = rows[i].as_ref();
            assert_eq!(r.len(), m, "ragged rows");
            r[j]
        })
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = out.col_mut(j);
            for k in 0..self.cols {
                let b = other[(k, j)];
                if b != 0.0 {
                    axpy(b, self.col(k), dst);
                }
            }
        }
        out
    }

    /// `A v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        let mut out = vec![0.0; self.rows];
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                axpy(vj, self.col(j), &mut out);
            }
        }
        out
    }

    /// `Aᵀ v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "dimension mismatch");
        (0..self.cols).map(|j| dot(self.col(j), v)).collect()
    }

    /// `AᵀA`.
    pub fn gram(&self) -> Matrix {
        let k = self.cols;
        let mut g = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let v = dot(self.col(i), self.col(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| alpha * x).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.add(&other.scale(-1.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    /// Largest absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `‖A − Aᵀ‖∞`; zero for non-square input is meaningless so it panics.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "asymmetry of a non-square matrix");
        self.sub(&self.transpose()).inf_norm()
    }

    pub fn symmetrize(&self) -> Matrix {
        self.add(&self.transpose()).scale(0.5)
    }

    /// Keeps only the listed columns, in order.
    pub fn select_columns(&self, keep: &[usize]) -> Matrix {
        let cols: Vec<&[f64]> = keep.iter().map(|&j| self.col(j)).collect();
        Matrix::from_columns(self.rows, &cols)
    }

    /// Keeps the listed rows and columns of a square matrix.
    pub fn select_principal(&self, keep: &[usize]) -> Matrix {
        Matrix::from_fn(keep.len(), keep.len(), |i, j| self[(keep[i], keep[j])])
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y ← y + alpha·x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scaled(alpha: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| alpha * x).collect()
}

/// Thin QR factorization `A = Q R` of a tall matrix.
#[derive(Clone, Debug)]
pub struct ThinQr {
    /// `n × r`, orthonormal columns.
    pub q: Matrix,
    /// `r × r`, upper triangular with a nonnegative diagonal.
    pub r: Matrix,
    /// Number of columns whose `R` diagonal clears the rank threshold.
    pub rank: usize,
    /// Indices of the columns that failed the threshold.
    pub dependent: Vec<usize>,
}

/// Householder thin QR.
///
/// Column `j` is reported dependent when `|R[j,j]| < 1e-10 · max_i |R[i,i]|`.
/// Rank deficiency is reported, never raised.
pub fn thin_qr(a: &Matrix) -> ThinQr {
    let (n, r) = (a.rows(), a.cols());
    assert!(n >= r, "thin_qr needs n >= r (got {n} x {r})");
    let mut work = a.clone();
    let mut reflectors: Vec<Option<Vec<f64>>> = Vec::with_capacity(r);

    for j in 0..r {
        let x = &work.col(j)[j..];
        let alpha = norm(x);
        if alpha == 0.0 {
            reflectors.push(None);
            continue;
        }
        let beta = if x[0] >= 0.0 { -alpha } else { alpha };
        let mut v = x.to_vec();
        v[0] -= beta;
        let vnorm = norm(&v);
        if vnorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        v.iter_mut().for_each(|vi| *vi /= vnorm);
        for c in j..r {
            let col = &mut work.col_mut(c)[j..];
            let t = 2.0 * dot(&v, col);
            axpy(-t, &v, col);
        }
        reflectors.push(Some(v));
    }

    let mut rmat = Matrix::from_fn(r, r, |i, k| if i <= k { work[(i, k)] } else { 0.0 });

    let mut q = Matrix::from_fn(n, r, |i, k| if i == k { 1.0 } else { 0.0 });
    for (j, v) in reflectors.iter().enumerate().rev() {
        if let Some(v) = v {
            for c in 0..r {
                let col = &mut q.col_mut(c)[j..];
                let t = 2.0 * dot(v, col);
                axpy(-t, v, col);
            }
        }
    }

    for j in 0..r {
        if rmat[(j, j)] < 0.0 {
            for k in 0..r {
                rmat[(j, k)] = -rmat[(j, k)];
            }
            q.col_mut(j).iter_mut().for_each(|x| *x = -*x);
        }
    }

    let max_diag = (0..r).map(|j| rmat[(j, j)].abs()).fold(0.0, f64::max);
    let dependent: Vec<usize> = (0..r)
        .filter(|&j| !(rmat[(j, j)].abs() >= QR_RANK_TOL * max_diag) || max_diag == 0.0)
        .collect();
    ThinQr {
        q,
        r: rmat,
        rank: r - dependent.len(),
        dependent,
    }
}

/// Eigendecomposition `A = V diag(values) Vᵀ` of a small symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymEig {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, one per column, matching `values`.
    pub vectors: Matrix,
}

impl SymEig {
    pub fn min(&self) -> Option<f64> {
        self.values.first().copied()
    }

    /// Smallest absolute eigenvalue.
    pub fn min_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Solves `A x = b` through the decomposition. The caller is responsible
    /// for checking that no eigenvalue vanishes.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut c = self.vectors.tr_mul_vec(b);
        for (ci, lam) in c.iter_mut().zip(&self.values) {
            *ci /= lam;
        }
        self.vectors.mul_vec(&c)
    }
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    if a.rows() != a.cols() {
        return Err(Error::InvalidArgument(format!(
            "expected a square matrix, got {} x {}",
            a.rows(),
            a.cols()
        )));
    }
    let scale = a.inf_norm();
    let asymmetry = a.asymmetry();
    if asymmetry > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { asymmetry, scale });
    }
    Ok(())
}

/// Cyclic Jacobi eigensolver for small symmetric matrices.
///
/// Eigenvalues come back ascending; each eigenvector is normalized so that its
/// first non-negligible entry is positive.
pub fn sym_eig_small(a: &Matrix) -> Result<SymEig> {
    check_symmetric(a)?;
    if !a.is_finite() {
        return Err(Error::NonFinite("sym_eig_small input"));
    }
    let n = a.rows();
    let mut m = a.symmetrize();
    let mut v = Matrix::identity(n);
    let scale = m.frobenius_norm();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * akp - s * akq;
                    m[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * apk - s * aqk;
                    m[(q, k)] = s * apk + c * aqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = v.select_columns(&order);
    for j in 0..n {
        let col = vectors.col_mut(j);
        let big = col.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-8 * big) {
            if *first < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
    Ok(SymEig { values, vectors })
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`.
///
/// Fails when a pivot drops to `1e-12 · trace(A)` or below.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    check_symmetric(a)?;
    let n = a.rows();
    let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
    let floor = 1e-12 * trace.abs();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let d = a[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if !(d > floor) {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let v = a[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = v / ljj;
        }
    }
    Ok(l)
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn forward_substitute(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[(i, k)] * x[k]).sum();
        x[i] = (x[i] - s) / l[(i, i)];
    }
    x
}

/// Smallest eigenvalue of the pencil `A u = λ B u` with `B` symmetric positive
/// definite, computed as `min eig(L⁻¹ A L⁻ᵀ)` with `B = L Lᵀ`.
pub fn gen_eig_min(a: &Matrix, b: &Matrix) -> Result<f64> {
    check_symmetric(a)?;
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::InvalidArgument("pencil dimension mismatch".into()));
    }
    let l = cholesky(b)?;
    let n = a.rows();
    // X = L⁻¹ A, then C = L⁻¹ Xᵀ = L⁻¹ A L⁻ᵀ.
    let cols: Vec<Vec<f64>> = (0..n).map(|j| forward_substitute(&l, a.col(j))).collect();
    let x = Matrix::from_columns(n, &cols);
    let xt = x.transpose();
    let cols: Vec<Vec<f64>> = (0..n).map(|j| forward_substitute(&l, xt.col(j))).collect();
    let c = Matrix::from_columns(n, &cols).symmetrize();
    let eig = sym_eig_small(&c)?;
    eig.min()
        .ok_or_else(|| Error::InvalidArgument("empty pencil".into()))
}

/// Gaussian elimination with partial pivoting for a small square system.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.as_slice().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tiny = (n.max(1) as f64) * f64::EPSILON * scale;
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| m[(i, k)].abs().total_cmp(&m[(j, k)].abs()))
            .unwrap();
        if !(m[(piv, k)].abs() > tiny) {
            return Err(Error::Defect(format!(
                "singular {n}x{n} system (pivot {:e} at column {k}, scale {scale:e})",
                m[(piv, k)]
            )));
        }
        if piv != k {
            for j in 0..n {
                let t = m[(k, j)];
                m[(k, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            x.swap(k, piv);
        }
        for i in k + 1..n {
            let f = m[(i, k)] / m[(k, k)];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                m[(i, j)] -= f * m[(k, j)];
            }
            x[i] -= f * x[k];
        }
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[(i, j)] * x[j]).sum();
        x[i] = (x[i] - s) / m[(i, i)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn orthonormality_defect(q: &Matrix) -> f64 {
        q.gram().sub(&Matrix::identity(q.cols())).inf_norm()
    }

    #[test]
    fn qr_identity() {
        let qr = thin_qr(&Matrix::identity(2));
        assert_eq!(qr.rank, 2);
        assert_abs_diff_eq!(qr.q.sub(&Matrix::identity(2)).inf_norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(qr.r.sub(&Matrix::identity(2)).inf_norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn qr_single_column() {
        let qr = thin_qr(&Matrix::from_columns(2, &[[3.0, 4.0]]));
        assert_eq!(qr.rank, 1);
        assert_abs_diff_eq!(qr.q[(0, 0)], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(qr.q[(1, 0)], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(qr.r[(0, 0)], 5.0, epsilon = 1e-14);
    }

    #[test]
    fn qr_dependent_columns() {
        let qr = thin_qr(&Matrix::from_columns(2, &[[1.0, 0.0], [1.0, 0.0]]));
        assert_eq!(qr.rank, 1);
        assert_eq!(qr.dependent, vec![1]);
    }

    #[test]
    fn qr_zero_matrix_has_rank_zero() {
        let qr = thin_qr(&Matrix::zeros(3, 2));
        assert_eq!(qr.rank, 0);
    }

    #[test]
    fn eig_diagonal() {
        let e = sym_eig_small(&Matrix::diag(&[2.0, 1.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0]);
    }

    #[test]
    fn eig_swap_matrix() {
        let e = sym_eig_small(&Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]])).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors[(0, 0)], h, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors[(1, 0)], -h, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors[(0, 1)], h, epsilon = 1e-14);
        assert_abs_diff_eq!(e.vectors[(1, 1)], h, epsilon = 1e-14);
    }

    #[test]
    fn eig_identity() {
        let e = sym_eig_small(&Matrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn eig_rejects_nonsymmetric() {
        let err = sym_eig_small(&Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]])).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { .. }));
    }

    #[test]
    fn gen_eig_examples() {
        let m = |v: f64| Matrix::from_rows(&[[v]]);
        assert_abs_diff_eq!(gen_eig_min(&m(2.0), &m(1.0)).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gen_eig_min(&m(4.0), &m(2.0)).unwrap(), 2.0, epsilon = 1e-15);
        let v = gen_eig_min(&Matrix::diag(&[2.0, -3.0]), &Matrix::identity(2)).unwrap();
        assert_abs_diff_eq!(v, -3.0, epsilon = 1e-15);
    }

    #[test]
    fn gen_eig_rejects_indefinite_metric() {
        let err = gen_eig_min(&Matrix::identity(2), &Matrix::diag(&[1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { index: 1, .. }));
    }

    #[test]
    fn lu_solves_and_flags_singular() {
        let a = Matrix::from_rows(&[[0.0, 2.0], [3.0, 1.0]]);
        let x = lu_solve(&a, &[4.0, 5.0]).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-15);
        assert!(lu_solve(&Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]), &[1.0, 1.0]).is_err());
    }

    fn tall_matrix() -> impl Strategy<Value = Matrix> {
        (1usize..=8)
            .prop_flat_map(|r| (Just(r), r..=50))
            .prop_flat_map(|(r, n)| {
                proptest::collection::vec(-10.0f64..10.0, n * r)
                    .prop_map(move |d| Matrix::from_fn(n, r, |i, j| d[j * n + i]))
            })
    }

    fn symmetric_matrix() -> impl Strategy<Value = Matrix> {
        (1usize..=8).prop_flat_map(|r| {
            proptest::collection::vec(-10.0f64..10.0, r * r)
                .prop_map(move |d| Matrix::from_fn(r, r, |i, j| d[i * r + j]).symmetrize())
        })
    }

    proptest! {
        #[test]
        fn qr_reconstructs(a in tall_matrix()) {
            let qr = thin_qr(&a);
            let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
            prop_assert!(qr.q.matmul(&qr.r).sub(&a).frobenius_norm() <= 1e-10 * scale);
            prop_assert!(orthonormality_defect(&qr.q) <= 1e-12);
            for i in 0..qr.r.rows() {
                for j in 0..i {
                    prop_assert_eq!(qr.r[(i, j)], 0.0);
                }
            }
        }

        #[test]
        fn eig_reconstructs(a in symmetric_matrix()) {
            let e = sym_eig_small(&a).unwrap();
            let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
            let rebuilt = e.vectors.matmul(&Matrix::diag(&e.values)).matmul(&e.vectors.transpose());
            prop_assert!(rebuilt.sub(&a).frobenius_norm() <= 1e-9 * scale);
            let av = a.matmul(&e.vectors);
            let vl = e.vectors.matmul(&Matrix::diag(&e.values));
            prop_assert!(av.sub(&vl).frobenius_norm() <= 1e-10 * scale);
            prop_assert!(orthonormality_defect(&e.vectors) <= 1e-12);
            prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn gen_eig_with_identity_matches_min_eig(a in symmetric_matrix()) {
            let n = a.rows();
            let lam = gen_eig_min(&a, &Matrix::identity(n)).unwrap();
            let e = sym_eig_small(&a).unwrap();
            prop_assert!((lam - e.values[0]).abs() <= 1e-10 * a.frobenius_norm().max(1.0));
        }
    }
}
