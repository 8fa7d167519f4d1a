//! Exact trust-region subproblem solver for compact L-SR1 matrices.
//!
//! Minimizes `Q(p) = gᵀp + ½ pᵀBp` subject to `‖p‖ ≤ δ` using the partial
//! spectral decomposition of `B = γI + ΨMΨᵀ`: with `Ψ = QR` and
//! `R M Rᵀ = U Λ̂ Uᵀ`, the eigenvalues of `B` are `Λ̂ + γ` on `span(QU)` and `γ`
//! on its orthogonal complement. The multiplier `σ*` is the root of the
//! secular equation `φ(σ) = 1/‖v(σ)‖ − 1/δ`, found by safeguarded Newton.

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm, sym_eig_small, thin_qr, Matrix};
use crate::lsr1::CompactSr1;

/// Newton iterations allowed before switching to pure bisection.
pub const MAX_NEWTON_ITERS: usize = 50;
const MAX_BISECTION_ITERS: usize = 200;
/// Relative accuracy `|φ(σ)|·δ` at which the root is accepted.
const SECULAR_REL_TOL: f64 = 1e-13;
/// Relative tolerance for eigenvalue coincidence and vanishing gradient components.
pub const COINCIDENCE_TOL: f64 = 1e-10;

/// Partial spectral decomposition of `B` together with the projected gradient.
#[derive(Clone, Debug)]
pub struct SpectralData {
    /// `λ̂ᵢ + γ`, ascending.
    pub lambda1: Vec<f64>,
    /// Eigenvalue on the complement of `span(basis)`.
    pub gamma: f64,
    /// `basisᵀ g`.
    pub g_par: Vec<f64>,
    /// `‖g‖² − ‖g_par‖²`, clamped at zero.
    pub a_perp_sq: f64,
    /// `n × k` orthonormal eigenvectors matching `lambda1`.
    pub basis: Matrix,
    pub g_norm: f64,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    /// Dimension of the eigenspace belonging to `γ`.
    pub fn complement_dim(&self) -> usize {
        self.dim() - self.lambda1.len()
    }

    pub fn lambda_min(&self) -> f64 {
        let gamma = if self.complement_dim() > 0 { self.gamma } else { f64::INFINITY };
        self.lambda1.first().copied().unwrap_or(f64::INFINITY).min(gamma)
    }

    /// Eigenvector for the smallest eigenvalue when it lies in the low-rank block.
    pub fn min_eigenvector(&self) -> Option<&[f64]> {
        match self.lambda1.first() {
            Some(&l) if l <= self.lambda_min() => Some(self.basis.col(0)),
            _ => None,
        }
    }

    /// Pairs `(eigenvalue, squared gradient component)` over the whole spectrum,
    /// with the complement collapsed into one entry.
    fn components(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let perp = (self.complement_dim() > 0).then_some((self.gamma, self.a_perp_sq));
        self.lambda1
            .iter()
            .zip(&self.g_par)
            .map(|(&l, &c)| (l, c * c))
            .chain(perp)
    }

    /// `‖v(σ)‖² = Σ cᵢ² / (λᵢ + σ)²`; components with a vanishing coefficient are
    /// skipped even when their denominator vanishes.
    pub fn norm_v_sq(&self, sigma: f64) -> f64 {
        self.components()
            .filter(|&(_, c2)| c2 > 0.0)
            .map(|(l, c2)| {
                let d = l + sigma;
                if d == 0.0 {
                    f64::INFINITY
                } else {
                    c2 / (d * d)
                }
            })
            .sum()
    }

    /// `φ(σ) = 1/‖v(σ)‖ − 1/δ`.
    pub fn phi(&self, sigma: f64, delta: f64) -> f64 {
        let nv = self.norm_v_sq(sigma).sqrt();
        if nv == 0.0 {
            f64::INFINITY
        } else {
            1.0 / nv - 1.0 / delta
        }
    }

    /// `φ(σ)` and `φ′(σ) = ‖v‖⁻³ Σ cᵢ² / (λᵢ + σ)³`.
    fn phi_and_slope(&self, sigma: f64, delta: f64) -> (f64, f64) {
        let (mut s2, mut s3) = (0.0, 0.0);
        for (l, c2) in self.components().filter(|&(_, c2)| c2 > 0.0) {
            let d = l + sigma;
            s2 += c2 / (d * d);
            s3 += c2 / (d * d * d);
        }
        let nv = s2.sqrt();
        if nv == 0.0 {
            return (f64::INFINITY, 0.0);
        }
        (1.0 / nv - 1.0 / delta, s3 / (nv * nv * nv))
    }

    /// `φ(−λ_min)`, treating the minimal eigenspace through the pseudoinverse.
    /// Returns `-1/δ` (the limit) when `g` has a component in that eigenspace.
    fn phi_at_shift(&self, delta: f64) -> f64 {
        let lmin = self.lambda_min();
        let eig_tol = COINCIDENCE_TOL * lmin.abs().max(1.0);
        let g_tol = COINCIDENCE_TOL * self.g_norm.max(1.0);
        let mut nv2 = 0.0;
        for (l, c2) in self.components() {
            if (l - lmin).abs() <= eig_tol {
                if c2.sqrt() > g_tol {
                    return -1.0 / delta;
                }
            } else if c2 > 0.0 {
                let d = l - lmin;
                nv2 += c2 / (d * d);
            }
        }
        if nv2 == 0.0 {
            f64::INFINITY
        } else {
            1.0 / nv2.sqrt() - 1.0 / delta
        }
    }
}

/// Solution of one trust-region subproblem.
#[derive(Clone, Debug)]
pub struct SubproblemSolution {
    pub p_star: Vec<f64>,
    pub sigma_star: f64,
    pub hard_case: bool,
    /// `Q(p*) = gᵀp* + ½ p*ᵀBp*`.
    pub q_value: f64,
    pub newton_iters: usize,
    /// Smallest eigenvalue of `B`, kept for certification.
    pub lambda_min: f64,
}

/// Computes the partial spectral decomposition of `B` and projects `g` onto it.
pub fn spectral_prep(b: &CompactSr1, g: &[f64]) -> Result<SpectralData> {
    let n = b.dim();
    if g.len() != n {
        return Err(Error::InvalidArgument(format!(
            "gradient has length {}, matrix dimension is {n}",
            g.len()
        )));
    }
    let g_norm = norm(g);
    let k = b.rank();
    if k == 0 {
        return Ok(SpectralData {
            lambda1: Vec::new(),
            gamma: b.gamma(),
            g_par: Vec::new(),
            a_perp_sq: g_norm * g_norm,
            basis: Matrix::zeros(n, 0),
            g_norm,
        });
    }
    let qr = thin_qr(b.psi());
    if qr.rank < k {
        return Err(Error::RankDeficient { rank: qr.rank, cols: k });
    }
    let rmr = qr.r.matmul(&b.middle()?).matmul(&qr.r.transpose()).symmetrize();
    let eig = sym_eig_small(&rmr)?;
    let basis = qr.q.matmul(&eig.vectors);
    let g_par = basis.tr_mul_vec(g);
    let a_perp_sq = if k < n {
        (g_norm * g_norm - dot(&g_par, &g_par)).max(0.0)
    } else {
        0.0
    };
    Ok(SpectralData {
        lambda1: eig.values.iter().map(|l| l + b.gamma()).collect(),
        gamma: b.gamma(),
        g_par,
        a_perp_sq,
        basis,
        g_norm,
    })
}

/// Largest root of the secular equation on `(max(−λ_min, 0), ∞)`.
///
/// Safeguarded Newton inside the bracket `[max(0, −λ_min), max(0, −λ_min) + ‖g‖/δ]`,
/// with a bisection fallback once the Newton budget is spent. Returns the root
/// and the total number of iterations.
pub fn secular_root(sd: &SpectralData, delta: f64) -> Result<(f64, usize)> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("trust radius must be positive, got {delta}")));
    }
    let lmin = sd.lambda_min();
    let mut lo = (-lmin).max(0.0);
    let mut hi = lo + sd.g_norm / delta;
    if !(hi > lo) {
        return Err(Error::Defect("secular equation has an empty bracket (zero gradient?)".into()));
    }
    let tol = SECULAR_REL_TOL / delta;
    let mut sigma = lo + 1e-4 * lmin.abs().max(1.0);
    if sigma >= hi {
        sigma = 0.5 * (lo + hi);
    }

    for iter in 1..=MAX_NEWTON_ITERS + MAX_BISECTION_ITERS {
        let (f, slope) = sd.phi_and_slope(sigma, delta);
        if f.abs() <= tol {
            return Ok((sigma, iter));
        }
        if f < 0.0 {
            lo = sigma;
        } else {
            hi = sigma;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1e-300) {
            return Ok((sigma, iter));
        }
        let newton = sigma - f / slope;
        sigma = if iter <= MAX_NEWTON_ITERS && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Defect(format!(
        "secular equation did not converge (bracket [{lo:e}, {hi:e}], delta {delta:e})"
    )))
}

/// Solves `(B + σI) p = −g` through `(B+σI)⁻¹ = τ⁻¹ [I − Ψ(τM⁻¹ + ΨᵀΨ)⁻¹Ψᵀ]`, `τ = γ + σ`.
pub fn solve_shifted(b: &CompactSr1, sigma: f64, g: &[f64]) -> Result<Vec<f64>> {
    let tau = b.gamma() + sigma;
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("shift gives gamma + sigma = {tau} <= 0")));
    }
    let mut p = linalg::scaled(-1.0 / tau, g);
    if b.rank() > 0 {
        let psi = b.psi();
        let inner = b.minv().scale(tau).add(&psi.gram());
        let z = linalg::lu_solve(&inner, &psi.tr_mul_vec(g)).map_err(|e| {
            Error::Defect(format!("shifted solve with sigma = {sigma:e}, tau = {tau:e}: {e}"))
        })?;
        for (j, zj) in z.iter().enumerate() {
            linalg::axpy(zj / tau, psi.col(j), &mut p);
        }
    }
    Ok(p)
}

/// `p = −(B + σI)† g` from the spectral data; eigencomponents with
/// `|λᵢ + σ| ≤ 1e-10·max(1, |σ|)` are dropped.
pub fn solve_shifted_pinv(sd: &SpectralData, sigma: f64, g: &[f64]) -> Vec<f64> {
    let tol = COINCIDENCE_TOL * sigma.abs().max(1.0);
    let mut p = vec![0.0; g.len()];
    let mut perp = g.to_vec();
    for (j, (&l, &c)) in sd.lambda1.iter().zip(&sd.g_par).enumerate() {
        let u = sd.basis.col(j);
        linalg::axpy(-c, u, &mut perp);
        let d = l + sigma;
        if d.abs() > tol {
            linalg::axpy(-c / d, u, &mut p);
        }
    }
    let d = sd.gamma + sigma;
    if sd.complement_dim() > 0 && d.abs() > tol {
        linalg::axpy(-1.0 / d, &perp, &mut p);
    }
    p
}

/// `Q(p) = gᵀp + ½ pᵀBp`.
pub fn model_value(b: &CompactSr1, g: &[f64], p: &[f64]) -> Result<f64> {
    let bp = b.mat_vec(p)?;
    Ok(dot(g, p) + 0.5 * dot(p, &bp))
}

/// Globally solves the trust-region subproblem for a compact L-SR1 matrix.
pub fn solve_subproblem(b: &CompactSr1, g: &[f64], delta: f64) -> Result<SubproblemSolution> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("trust radius must be positive, got {delta}")));
    }
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    let sd = spectral_prep(b, g)?;
    let lmin = sd.lambda_min();
    let eig_tol = COINCIDENCE_TOL * lmin.abs().max(1.0);

    let (p, sigma, hard_case, newton_iters) = if lmin > 0.0 && sd.phi(0.0, delta) >= 0.0 {
        (solve_shifted(b, 0.0, g)?, 0.0, false, 0)
    } else if lmin <= 0.0 && sd.phi_at_shift(delta) >= 0.0 {
        let sigma = -lmin;
        let mut p = solve_shifted_pinv(&sd, sigma, g);
        let hard = lmin < -eig_tol;
        if hard {
            let u = sd.min_eigenvector().ok_or_else(|| {
                Error::Defect("negative curvature outside the low-rank block".into())
            })?;
            let pn = norm(&p);
            let alpha = (delta * delta - pn * pn).max(0.0).sqrt();
            linalg::axpy(alpha, u, &mut p);
        }
        (p, sigma, hard, 0)
    } else {
        let (sigma, iters) = secular_root(&sd, delta)?;
        (solve_shifted(b, sigma, g)?, sigma, false, iters)
    };

    Ok(SubproblemSolution {
        q_value: model_value(b, g, &p)?,
        p_star: p,
        sigma_star: sigma,
        hard_case,
        newton_iters,
        lambda_min: lmin,
    })
}

/// Residuals of the global optimality conditions for a computed solution.
#[derive(Clone, Copy, Debug)]
pub struct Certificate {
    /// `‖p*‖ / δ − 1`; must not exceed `1e-8`.
    pub norm_excess: f64,
    /// `σ*·(δ − ‖p*‖)`.
    pub complementarity: f64,
    /// `‖(B + σ*I)p* + g‖`.
    pub residual: f64,
    /// `λ_min(B) + σ*`.
    pub psd_margin: f64,
    delta: f64,
    g_norm: f64,
    lambda_scale: f64,
    sigma: f64,
}

impl Certificate {
    pub fn compute(b: &CompactSr1, g: &[f64], delta: f64, sol: &SubproblemSolution) -> Result<Self> {
        let pn = norm(&sol.p_star);
        let mut r = b.mat_vec(&sol.p_star)?;
        linalg::axpy(sol.sigma_star, &sol.p_star, &mut r);
        linalg::axpy(1.0, g, &mut r);
        Ok(Self {
            norm_excess: pn / delta - 1.0,
            complementarity: sol.sigma_star * (delta - pn),
            residual: norm(&r),
            psd_margin: sol.lambda_min + sol.sigma_star,
            delta,
            g_norm: norm(g),
            lambda_scale: sol.lambda_min.abs().max(1.0),
            sigma: sol.sigma_star,
        })
    }

    /// Names the first violated condition, if any.
    pub fn violation(&self) -> Option<String> {
        if !(self.norm_excess <= 1e-8) {
            return Some(format!("step outside trust region: ||p||/delta - 1 = {:e}", self.norm_excess));
        }
        if !(self.sigma >= 0.0) {
            return Some(format!("negative multiplier sigma = {:e}", self.sigma));
        }
        if !(self.complementarity.abs() <= 1e-6 * self.delta.max(1.0)) {
            return Some(format!("complementarity sigma*(delta-||p||) = {:e}", self.complementarity));
        }
        if !(self.residual <= 1e-6 * self.g_norm.max(1.0)) {
            return Some(format!("stationarity residual ||(B+sigma I)p+g|| = {:e}", self.residual));
        }
        if !(self.psd_margin >= -1e-8 * self.lambda_scale) {
            return Some(format!("B + sigma I not PSD: lambda_min + sigma = {:e}", self.psd_margin));
        }
        None
    }

    pub fn check(&self) -> Result<()> {
        match self.violation() {
            None => Ok(()),
            Some(msg) => Err(Error::Defect(format!("optimality certificate failed: {msg}"))),
        }
    }
}
