//! Limited-memory SR1 matrices in compact form.
//!
//! `B = γI + Ψ M Ψᵀ` with `Ψ = Y − γS` and `M⁻¹ = D + L + Lᵀ − γ SᵀS`, where
//! `D`, `L` are the diagonal and strictly lower parts of `SᵀY`. Pairs are
//! stored oldest first.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm, thin_qr, Matrix, SymEig};

/// Default number of stored pairs.
pub const DEFAULT_MEMORY: usize = 8;

/// Relative threshold on `|sᵀ(y − Bs)|` below which an update is skipped.
pub const SKIP_TOL: f64 = 1e-8;

/// `γ = GAMMA_FRACTION · λ̂` when `λ̂` is usable.
pub const GAMMA_FRACTION: f64 = 0.9;
pub const GAMMA_MIN: f64 = 1e-8;
pub const GAMMA_MAX: f64 = 1e8;
/// Below this `λ̂` the scaling falls back to `γ = 1`.
pub const LAMBDA_HAT_FLOOR: f64 = 1e-8;

/// `M⁻¹` counts as singular when `min |eig| < MIDDLE_SINGULAR_TOL · max |eig|`.
pub const MIDDLE_SINGULAR_TOL: f64 = 1e-12;

/// Ring buffer of the most recent curvature pairs with cached inner products.
#[derive(Clone, Debug)]
pub struct PairBuffer {
    dim: usize,
    capacity: usize,
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    /// `(SᵀY)[i][j] = s_iᵀ y_j`
    sty: Vec<Vec<f64>>,
    /// `(SᵀS)[i][j] = s_iᵀ s_j`
    sts: Vec<Vec<f64>>,
}

impl PairBuffer {
    pub fn new(dim: usize, capacity: usize) -> Self {
        Self {
            dim,
            capacity,
            s: VecDeque::with_capacity(capacity),
            y: VecDeque::with_capacity(capacity),
            sty: Vec::new(),
            sts: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn clear(&mut self) {
        self.s.clear();
        self.y.clear();
        self.sty.clear();
        self.sts.clear();
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.s.iter().zip(&self.y).map(|(s, y)| (s.as_slice(), y.as_slice()))
    }

    pub fn last(&self) -> Option<(&[f64], &[f64])> {
        Some((self.s.back()?.as_slice(), self.y.back()?.as_slice()))
    }

    /// Appends a pair, evicting the oldest one when full. Does no acceptance test.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        assert_eq!(s.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        if self.capacity == 0 {
            return;
        }
        if self.len() == self.capacity {
            self.remove(0);
        }
        let sty_row: Vec<f64> = self.y.iter().map(|yj| dot(&s, yj)).collect();
        let sty_col: Vec<f64> = self.s.iter().map(|si| dot(si, &y)).collect();
        let sts_col: Vec<f64> = self.s.iter().map(|si| dot(si, &s)).collect();
        for (row, v) in self.sty.iter_mut().zip(&sty_col) {
            row.push(*v);
        }
        for (row, v) in self.sts.iter_mut().zip(&sts_col) {
            row.push(*v);
        }
        let mut new_sty = sty_row;
        new_sty.push(dot(&s, &y));
        let mut new_sts = sts_col;
        new_sts.push(dot(&s, &s));
        self.sty.push(new_sty);
        self.sts.push(new_sts);
        self.s.push_back(s);
        self.y.push_back(y);
    }

    /// Removes the pair at position `idx` (0 = oldest).
    pub fn remove(&mut self, idx: usize) {
        self.s.remove(idx);
        self.y.remove(idx);
        self.sty.remove(idx);
        self.sts.remove(idx);
        for row in self.sty.iter_mut().chain(self.sts.iter_mut()) {
            row.remove(idx);
        }
    }

    pub fn pop_oldest(&mut self) {
        if !self.is_empty() {
            self.remove(0);
        }
    }

    pub fn s_matrix(&self) -> Matrix {
        Matrix::from_columns(self.dim, &self.s.iter().collect::<Vec<_>>())
    }

    pub fn y_matrix(&self) -> Matrix {
        Matrix::from_columns(self.dim, &self.y.iter().collect::<Vec<_>>())
    }

    /// Cached `SᵀY`.
    pub fn sty(&self) -> Matrix {
        let k = self.len();
        Matrix::from_fn(k, k, |i, j| self.sty[i][j])
    }

    /// Cached `SᵀS`.
    pub fn sts(&self) -> Matrix {
        let k = self.len();
        Matrix::from_fn(k, k, |i, j| self.sts[i][j])
    }

    /// `D + L + Lᵀ`: the symmetric matrix built from the lower triangle of `SᵀY`.
    pub fn sty_lower_symmetric(&self) -> Matrix {
        let k = self.len();
        Matrix::from_fn(k, k, |i, j| if i >= j { self.sty[i][j] } else { self.sty[j][i] })
    }
}

/// Compact representation `B = γI + Ψ M Ψᵀ`.
#[derive(Clone, Debug)]
pub struct CompactSr1 {
    dim: usize,
    gamma: f64,
    psi: Matrix,
    minv: Matrix,
    minv_eig: SymEig,
}

impl CompactSr1 {
    /// `B = γI`.
    pub fn scaled_identity(dim: usize, gamma: f64) -> Self {
        Self {
            dim,
            gamma,
            psi: Matrix::zeros(dim, 0),
            minv: Matrix::zeros(0, 0),
            minv_eig: SymEig {
                values: Vec::new(),
                vectors: Matrix::zeros(0, 0),
            },
        }
    }

    /// Builds `B` directly from its parts.
    pub fn from_parts(gamma: f64, psi: Matrix, minv: Matrix) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        if minv.rows() != psi.cols() || minv.cols() != psi.cols() {
            return Err(Error::InvalidArgument(format!(
                "Minv must be {k}x{k} to match Psi with {k} columns",
                k = psi.cols()
            )));
        }
        if !psi.is_finite() || !minv.is_finite() {
            return Err(Error::NonFinite("compact matrix parts"));
        }
        let minv = minv.symmetrize();
        let minv_eig = linalg::sym_eig_small(&minv)?;
        Ok(Self {
            dim: psi.rows(),
            gamma,
            psi,
            minv,
            minv_eig,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn psi(&self) -> &Matrix {
        &self.psi
    }

    pub fn minv(&self) -> &Matrix {
        &self.minv
    }

    /// Number of low-rank columns.
    pub fn rank(&self) -> usize {
        self.psi.cols()
    }

    pub fn is_middle_singular(&self) -> bool {
        self.rank() > 0
            && !(self.minv_eig.min_abs() >= MIDDLE_SINGULAR_TOL * self.minv_eig.max_abs()
                && self.minv_eig.max_abs() > 0.0)
    }

    fn check_middle(&self) -> Result<()> {
        if self.is_middle_singular() {
            return Err(Error::SingularMiddle {
                min_abs: self.minv_eig.min_abs(),
                norm: self.minv_eig.max_abs(),
            });
        }
        Ok(())
    }

    /// Solves `M⁻¹ x = b`, i.e. returns `M b`.
    pub fn apply_middle(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_middle()?;
        Ok(self.minv_eig.solve(b))
    }

    /// `B v` in `O(nk + k²)`.
    pub fn mat_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "vector has length {}, matrix dimension is {}",
                v.len(),
                self.dim
            )));
        }
        let mut out: Vec<f64> = v.iter().map(|x| self.gamma * x).collect();
        if self.rank() > 0 {
            let z = self.apply_middle(&self.psi.tr_mul_vec(v))?;
            for (j, zj) in z.iter().enumerate() {
                linalg::axpy(*zj, self.psi.col(j), &mut out);
            }
        }
        Ok(out)
    }

    /// `M = (M⁻¹)⁻¹`, for spectral work on `R M Rᵀ`.
    pub fn middle(&self) -> Result<Matrix> {
        self.check_middle()?;
        let k = self.rank();
        let cols: Vec<Vec<f64>> = (0..k)
            .map(|j| {
                let mut e = vec![0.0; k];
                e[j] = 1.0;
                self.minv_eig.solve(&e)
            })
            .collect();
        Ok(Matrix::from_columns(k, &cols).symmetrize())
    }

    /// Dense `n × n` copy. Only for small problems and tests.
    pub fn to_dense(&self) -> Result<Matrix> {
        let n = self.dim;
        let mut b = Matrix::identity(n).scale(self.gamma);
        if self.rank() > 0 {
            let m = self.middle()?;
            let pm = self.psi.matmul(&m);
            b = b.add(&pm.matmul(&self.psi.transpose()));
        }
        Ok(b.symmetrize())
    }
}

/// Outcome of [`try_update`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateStatus {
    Accepted,
    Skipped,
}

/// Stores `(s, y)` if the SR1 denominator is safely away from zero:
/// `|sᵀ(y − Bs)| ≥ 1e-8 · ‖s‖ · ‖y − Bs‖` with `y − Bs ≠ 0`.
pub fn try_update(buf: &mut PairBuffer, s: &[f64], y: &[f64], b: &CompactSr1) -> Result<UpdateStatus> {
    if s.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("curvature pair"));
    }
    let s_norm = norm(s);
    if s_norm == 0.0 {
        return Err(Error::InvalidArgument("zero step in curvature pair".into()));
    }
    let bs = b.mat_vec(s)?;
    let resid = linalg::sub(y, &bs);
    let r_norm = norm(&resid);
    let denom = dot(s, &resid);
    if r_norm > 0.0 && denom.abs() >= SKIP_TOL * s_norm * r_norm {
        buf.push(s.to_vec(), y.to_vec());
        Ok(UpdateStatus::Accepted)
    } else {
        Ok(UpdateStatus::Skipped)
    }
}

/// Assembles the compact matrix for the stored pairs and the given `γ`.
///
/// Pairs whose `Ψ` column is numerically dependent on the others are removed
/// from the buffer. When there are more pairs than dimensions the oldest ones
/// go first.
pub fn assemble_compact(buf: &mut PairBuffer, gamma: f64) -> Result<CompactSr1> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let n = buf.dim();
    while buf.len() > n {
        buf.pop_oldest();
    }
    loop {
        if buf.is_empty() {
            return Ok(CompactSr1::scaled_identity(n, gamma));
        }
        let psi = buf.y_matrix().sub(&buf.s_matrix().scale(gamma));
        let qr = thin_qr(&psi);
        if qr.rank < psi.cols() {
            for &j in qr.dependent.iter().rev() {
                buf.remove(j);
            }
            continue;
        }
        let minv = buf.sty_lower_symmetric().sub(&buf.sts().scale(gamma));
        return CompactSr1::from_parts(gamma, psi, minv);
    }
}

/// Like [`assemble_compact`], but also drops the oldest pairs while the middle
/// matrix is numerically singular, so that the result supports products and solves.
pub fn assemble_usable(buf: &mut PairBuffer, gamma: f64) -> Result<CompactSr1> {
    loop {
        let b = assemble_compact(buf, gamma)?;
        if !b.is_middle_singular() {
            return Ok(b);
        }
        buf.pop_oldest();
    }
}

/// Result of [`lambda_hat_and_gamma`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaChoice {
    /// Smallest eigenvalue of `(D + L + Lᵀ) u = λ̂ SᵀS u`; `None` for an empty buffer.
    pub lambda_hat: Option<f64>,
    pub gamma: f64,
}

/// Initial-matrix scaling from the generalized eigenvalue `λ̂`.
///
/// `γ = clamp(0.9 λ̂, 1e-8, 1e8)` when `λ̂ > 1e-8`, otherwise `γ = 1`. If `SᵀS`
/// is not positive definite the oldest pair is dropped and the computation
/// retried; an empty buffer keeps `gamma_prev`.
pub fn lambda_hat_and_gamma(buf: &mut PairBuffer, gamma_prev: f64) -> Result<GammaChoice> {
    loop {
        if buf.is_empty() {
            return Ok(GammaChoice {
                lambda_hat: None,
                gamma: gamma_prev,
            });
        }
        match linalg::gen_eig_min(&buf.sty_lower_symmetric(), &buf.sts()) {
            Ok(lambda_hat) => {
                let gamma = if lambda_hat > LAMBDA_HAT_FLOOR {
                    (GAMMA_FRACTION * lambda_hat).clamp(GAMMA_MIN, GAMMA_MAX)
                } else {
                    1.0
                };
                return Ok(GammaChoice {
                    lambda_hat: Some(lambda_hat),
                    gamma,
                });
            }
            Err(Error::NotPositiveDefinite { .. }) => buf.pop_oldest(),
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    fn scaled(a: f64, v: &[f64]) -> Vec<f64> {
        v.iter().map(|x| a * x).collect()
    }

    fn to_na(m: &Matrix) -> DMatrix<f64> {
        DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
    }

    fn dense_min_eig(m: &Matrix) -> f64 {
        SymmetricEigen::new(to_na(m)).eigenvalues.min()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Random symmetric positive definite `H` with a controlled spectrum.
    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let q = a.qr().q();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
            rng.random_range(0.5..5.0)
        }));
        &q * d * q.transpose()
    }

    fn mul(h: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
        (h * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec()
    }

    /// Dense SR1 recursion from `B₀ = γI`.
    fn recursion(n: usize, gamma: f64, pairs: &[(Vec<f64>, Vec<f64>)]) -> DMatrix<f64> {
        let mut b = DMatrix::identity(n, n) * gamma;
        for (s, y) in pairs {
            let s = nalgebra::DVector::from_column_slice(s);
            let y = nalgebra::DVector::from_column_slice(y);
            let r = &y - &b * &s;
            b += &r * r.transpose() / r.dot(&s);
        }
        b
    }

    #[test]
    fn update_accepted_when_denominator_is_large() {
        let mut buf = PairBuffer::new(2, 8);
        let b = CompactSr1::scaled_identity(2, 1.0);
        let st = try_update(&mut buf, &e(2, 0), &scaled(2.0, &e(2, 0)), &b).unwrap();
        assert_eq!(st, UpdateStatus::Accepted);
        assert_eq!(buf.len(), 1);
    }

    #[test]
    fn update_skipped_when_secant_already_holds() {
        let mut buf = PairBuffer::new(2, 8);
        let b = CompactSr1::scaled_identity(2, 1.0);
        let st = try_update(&mut buf, &e(2, 0), &e(2, 0), &b).unwrap();
        assert_eq!(st, UpdateStatus::Skipped);
        assert!(buf.is_empty());
    }

    #[test]
    fn update_rejects_non_finite() {
        let mut buf = PairBuffer::new(2, 8);
        let b = CompactSr1::scaled_identity(2, 1.0);
        assert!(try_update(&mut buf, &[f64::NAN, 0.0], &[1.0, 0.0], &b).is_err());
    }

    #[test]
    fn ring_buffer_evicts_oldest() {
        let mut buf = PairBuffer::new(3, 2);
        for i in 0..3 {
            buf.push(e(3, i), scaled(2.0, &e(3, i)));
        }
        assert_eq!(buf.len(), 2);
        let firsts: Vec<Vec<f64>> = buf.pairs().map(|(s, _)| s.to_vec()).collect();
        assert_eq!(firsts, vec![e(3, 1), e(3, 2)]);
        assert_abs_diff_eq!(buf.sty()[(0, 0)], 2.0);
        assert_abs_diff_eq!(buf.sty()[(1, 0)], 0.0);
    }

    #[test]
    fn caches_track_incremental_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut buf = PairBuffer::new(6, 3);
        for _ in 0..7 {
            buf.push(random_vec(&mut rng, 6), random_vec(&mut rng, 6));
            let s = buf.s_matrix();
            let y = buf.y_matrix();
            let sty = s.transpose().matmul(&y);
            let sts = s.gram();
            assert!(buf.sty().sub(&sty).frobenius_norm() <= 1e-12 * sty.frobenius_norm());
            assert!(buf.sts().sub(&sts).frobenius_norm() <= 1e-12 * sts.frobenius_norm());
        }
    }

    #[test]
    fn assemble_empty_is_scaled_identity() {
        let mut buf = PairBuffer::new(3, 4);
        let b = assemble_compact(&mut buf, 2.5).unwrap();
        assert_eq!(b.rank(), 0);
        assert_eq!(b.mat_vec(&[1.0, -2.0, 4.0]).unwrap(), vec![2.5, -5.0, 10.0]);
    }

    #[test]
    fn assemble_single_pair() {
        let mut buf = PairBuffer::new(2, 4);
        buf.push(e(2, 0), scaled(2.0, &e(2, 0)));
        let b = assemble_compact(&mut buf, 1.0).unwrap();
        assert_eq!(b.psi().col(0), &[1.0, 0.0]);
        assert_eq!(b.minv()[(0, 0)], 1.0);
        assert_eq!(b.mat_vec(&e(2, 0)).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn assemble_drops_dependent_pairs() {
        let mut buf = PairBuffer::new(3, 4);
        buf.push(e(3, 0), scaled(2.0, &e(3, 0)));
        buf.push(scaled(2.0, &e(3, 0)), scaled(4.0, &e(3, 0)));
        let b = assemble_compact(&mut buf, 1.0).unwrap();
        assert_eq!(b.rank(), 1);
        assert_eq!(buf.len(), 1);
    }

    #[test]
    fn negative_curvature_product() {
        let b = CompactSr1::from_parts(
            1.0,
            Matrix::from_columns(2, &[[2f64.sqrt(), 0.0]]),
            Matrix::from_rows(&[[-1.0]]),
        )
        .unwrap();
        let v = b.mat_vec(&e(2, 0)).unwrap();
        assert_abs_diff_eq!(v[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_middle_is_reported() {
        let b = CompactSr1::from_parts(
            1.0,
            Matrix::from_columns(2, &[[1.0, 0.0]]),
            Matrix::from_rows(&[[0.0]]),
        )
        .unwrap();
        assert!(matches!(b.mat_vec(&[1.0, 1.0]), Err(Error::SingularMiddle { .. })));
    }

    #[test]
    fn two_pairs_match_dense_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(2..10);
            let gamma = rng.random_range(0.2..3.0);
            let pairs: Vec<_> = (0..2)
                .map(|_| (random_vec(&mut rng, n), random_vec(&mut rng, n)))
                .collect();
            let mut buf = PairBuffer::new(n, 8);
            for (s, y) in &pairs {
                buf.push(s.clone(), y.clone());
            }
            let b = assemble_compact(&mut buf, gamma).unwrap();
            assert_eq!(b.rank(), 2);
            let dense = recursion(n, gamma, &pairs);
            let v = random_vec(&mut rng, n);
            let got = b.mat_vec(&v).unwrap();
            let want = mul(&dense, &v);
            let scale = 1.0 + want.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-10 * scale, "{g} vs {w}");
            }
        }
    }

    #[test]
    fn mat_vec_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(3..20);
            let mut buf = PairBuffer::new(n, 4);
            for _ in 0..3 {
                buf.push(random_vec(&mut rng, n), random_vec(&mut rng, n));
            }
            let b = assemble_usable(&mut buf, rng.random_range(0.5..2.0)).unwrap();
            let (v, w) = (random_vec(&mut rng, n), random_vec(&mut rng, n));
            let (a, c) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let combo: Vec<f64> = v.iter().zip(&w).map(|(x, y)| a * x + c * y).collect();
            let lhs = b.mat_vec(&combo).unwrap();
            let bv = b.mat_vec(&v).unwrap();
            let bw = b.mat_vec(&w).unwrap();
            let scale = 1.0 + lhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for i in 0..n {
                assert!((lhs[i] - (a * bv[i] + c * bw[i])).abs() <= 1e-12 * scale * 10.0);
            }
        }
    }

    #[test]
    fn secant_condition_for_latest_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.random_range(3..15);
            let gamma = rng.random_range(0.3..2.0);
            let mut buf = PairBuffer::new(n, 5);
            for _ in 0..rng.random_range(1..7) {
                let b = assemble_usable(&mut buf, gamma).unwrap();
                let (s, y) = (random_vec(&mut rng, n), random_vec(&mut rng, n));
                if try_update(&mut buf, &s, &y, &b).unwrap() == UpdateStatus::Skipped {
                    continue;
                }
                let b = assemble_compact(&mut buf, gamma).unwrap();
                if buf.last().map(|(ls, _)| ls != s.as_slice()).unwrap_or(true) {
                    // The new pair was filtered out as dependent.
                    continue;
                }
                let bs = b.mat_vec(&s).unwrap();
                let err = norm(&linalg::sub(&bs, &y));
                assert!(err <= 1e-8 * (norm(&y) + gamma * norm(&s)), "secant residual {err}");
            }
        }
    }

    #[test]
    fn lambda_hat_single_pair() {
        let mut buf = PairBuffer::new(2, 4);
        buf.push(e(2, 0), scaled(2.0, &e(2, 0)));
        let g = lambda_hat_and_gamma(&mut buf, 1.0).unwrap();
        assert_abs_diff_eq!(g.lambda_hat.unwrap(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g.gamma, 1.8, epsilon = 1e-14);
    }

    #[test]
    fn lambda_hat_diagonal_quadratic() {
        let mut buf = PairBuffer::new(2, 4);
        buf.push(e(2, 0), e(2, 0));
        buf.push(e(2, 1), scaled(3.0, &e(2, 1)));
        let g = lambda_hat_and_gamma(&mut buf, 1.0).unwrap();
        assert_abs_diff_eq!(g.lambda_hat.unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g.gamma, 0.9, epsilon = 1e-14);
    }

    #[test]
    fn lambda_hat_negative_falls_back() {
        let mut buf = PairBuffer::new(2, 4);
        buf.push(e(2, 0), scaled(-1.0, &e(2, 0)));
        let g = lambda_hat_and_gamma(&mut buf, 3.0).unwrap();
        assert_abs_diff_eq!(g.lambda_hat.unwrap(), -1.0, epsilon = 1e-14);
        assert_eq!(g.gamma, 1.0);
    }

    #[test]
    fn lambda_hat_empty_keeps_previous() {
        let mut buf = PairBuffer::new(2, 4);
        let g = lambda_hat_and_gamma(&mut buf, 3.0).unwrap();
        assert_eq!(g, GammaChoice { lambda_hat: None, gamma: 3.0 });
    }

    #[test]
    fn lambda_hat_drops_oldest_on_dependent_steps() {
        let mut buf = PairBuffer::new(2, 4);
        buf.push(e(2, 0), e(2, 0));
        buf.push(e(2, 0), scaled(2.0, &e(2, 0)));
        let g = lambda_hat_and_gamma(&mut buf, 1.0).unwrap();
        assert_eq!(buf.len(), 1);
        assert_abs_diff_eq!(g.lambda_hat.unwrap(), 2.0, epsilon = 1e-14);
    }

    fn quadratic_pairs(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (DMatrix<f64>, PairBuffer) {
        let h = random_spd(rng, n);
        let mut buf = PairBuffer::new(n, k);
        for _ in 0..k {
            let s = random_vec(rng, n);
            let y = mul(&h, &s);
            buf.push(s, y);
        }
        (h, buf)
    }

    #[test]
    fn gamma_below_lambda_hat_gives_positive_definite_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let n = rng.random_range(6..30);
            let k = rng.random_range(1..6);
            let (_, mut buf) = quadratic_pairs(&mut rng, n, k);
            let lam = lambda_hat_and_gamma(&mut buf, 1.0).unwrap().lambda_hat.unwrap();
            assert!(lam > 0.0);
            let below = assemble_compact(&mut buf.clone(), 0.99 * lam).unwrap();
            assert!(dense_min_eig(&below.to_dense().unwrap()) > 0.0);
            let above = assemble_compact(&mut buf.clone(), 1.01 * lam).unwrap();
            assert!(dense_min_eig(&above.to_dense().unwrap()) < 0.0);
        }
    }

    #[test]
    fn min_eigenvalue_is_gamma_below_rayleigh_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..30 {
            let n = rng.random_range(6..30);
            let k = rng.random_range(1..5);
            let (h, mut buf) = quadratic_pairs(&mut rng, n, k);
            let lam = lambda_hat_and_gamma(&mut buf, 1.0).unwrap().lambda_hat.unwrap();
            let gamma = 0.5 * lam;
            let b = assemble_compact(&mut buf, gamma).unwrap();
            let min_b = dense_min_eig(&b.to_dense().unwrap());
            assert!((min_b - gamma).abs() <= 1e-8 * gamma.max(1.0));
            // Smallest Rayleigh quotient of H over span(S) is λ̂ itself.
            let s = to_na(&buf.s_matrix());
            let shs = s.transpose() * &h * &s;
            let sts = s.transpose() * &s;
            let l = sts.cholesky().unwrap().l();
            let li = l.clone().try_inverse().unwrap();
            let rq_min = SymmetricEigen::new(&li * shs * li.transpose()).eigenvalues.min();
            assert!(min_b <= rq_min + 1e-10);
        }
    }

    #[test]
    fn quadratic_hessian_recovered_on_span() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 8;
        let (h, mut buf) = quadratic_pairs(&mut rng, n, n);
        let gamma = lambda_hat_and_gamma(&mut buf, 1.0).unwrap().gamma;
        let b = assemble_compact(&mut buf, gamma).unwrap();
        assert_eq!(b.rank(), n);
        let diff = to_na(&b.to_dense().unwrap()) - &h;
        let s = to_na(&buf.s_matrix());
        let q = s.qr().q();
        let restricted = q.transpose() * diff * &q;
        assert!(restricted.norm() <= 1e-6 * h.norm());
    }
}
