//! Strong Wolfe line search (bracketing phase followed by zoom).

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};

#[derive(Clone, Copy, Debug)]
pub struct WolfeParams {
    pub c1: f64,
    pub c2: f64,
    pub max_iter: usize,
    /// Largest step multiplier tried.
    pub alpha_max: f64,
}

impl Default for WolfeParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 0.9,
            max_iter: 20,
            alpha_max: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub f: f64,
    pub g: Vec<f64>,
    pub evals: usize,
    /// `false` when only sufficient decrease could be established within the budget.
    pub strong_wolfe: bool,
}

struct Probe {
    alpha: f64,
    f: f64,
    d: f64,
    g: Vec<f64>,
}

/// Finds `α ∈ (0, alpha_max]` with
/// `f(w+αp) ≤ f0 + c1·α·d0` and `|∇f(w+αp)ᵀp| ≤ c2·|d0|`, starting from `α = 1`.
///
/// `eval` returns `(f, ∇f)` at a point. Non-finite probes shrink the step. When
/// the budget runs out the best point satisfying sufficient decrease is
/// returned with `strong_wolfe == false`; if there is none the search fails.
pub fn strong_wolfe_search<F>(
    mut eval: F,
    w: &[f64],
    p: &[f64],
    f0: f64,
    d0: f64,
    params: &WolfeParams,
) -> Result<LineSearchResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    if !(d0 < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "line search needs a descent direction (g'p = {d0:e})"
        )));
    }
    let WolfeParams { c1, c2, max_iter, mut alpha_max } = *params;
    let mut evals = 0;
    let mut probe = |alpha: f64, evals: &mut usize| -> Option<Probe> {
        *evals += 1;
        let mut x = w.to_vec();
        axpy(alpha, p, &mut x);
        let (f, g) = eval(&x);
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let d = dot(&g, p);
        Some(Probe { alpha, f, d, g })
    };
    let armijo = |alpha: f64, f: f64| f <= f0 + c1 * alpha * d0;
    let curvature = |d: f64| d.abs() <= -c2 * d0;
    let done = |pr: Probe, evals: usize, strong_wolfe: bool| LineSearchResult {
        alpha: pr.alpha,
        f: pr.f,
        g: pr.g,
        evals,
        strong_wolfe,
    };

    let mut prev = Probe { alpha: 0.0, f: f0, d: d0, g: Vec::new() };
    let mut alpha = alpha_max.min(1.0);
    let mut iter = 0;
    let (mut lo, mut hi) = loop {
        if iter >= max_iter {
            return if prev.alpha > 0.0 {
                Ok(done(prev, evals, false))
            } else {
                Err(Error::LineSearch(format!("no acceptable step after {evals} probes")))
            };
        }
        iter += 1;
        let Some(cur) = probe(alpha, &mut evals) else {
            alpha_max = alpha;
            alpha = prev.alpha + 0.5 * (alpha - prev.alpha);
            continue;
        };
        if !armijo(cur.alpha, cur.f) || (prev.alpha > 0.0 && cur.f >= prev.f) {
            break (prev, cur);
        }
        if curvature(cur.d) {
            return Ok(done(cur, evals, true));
        }
        if cur.d >= 0.0 {
            break (cur, prev);
        }
        if cur.alpha >= alpha_max {
            return Ok(done(cur, evals, false));
        }
        alpha = (2.0 * cur.alpha).min(alpha_max);
        prev = cur;
    };

    // Zoom: `lo` satisfies sufficient decrease and has the lowest f seen so far.
    while iter < max_iter {
        iter += 1;
        let width = hi.alpha - lo.alpha;
        let denom = 2.0 * (hi.f - lo.f - lo.d * width);
        let mut alpha = if denom > 0.0 && hi.f.is_finite() {
            lo.alpha - lo.d * width * width / denom
        } else {
            lo.alpha + 0.5 * width
        };
        let (a, b) = if width > 0.0 { (lo.alpha, hi.alpha) } else { (hi.alpha, lo.alpha) };
        let margin = 0.1 * (b - a);
        if !(alpha > a + margin && alpha < b - margin) {
            alpha = 0.5 * (a + b);
        }
        let Some(cur) = probe(alpha, &mut evals) else {
            hi = Probe { alpha, f: f64::INFINITY, d: 0.0, g: Vec::new() };
            continue;
        };
        if !armijo(cur.alpha, cur.f) || cur.f >= lo.f {
            hi = cur;
        } else {
            if curvature(cur.d) {
                return Ok(done(cur, evals, true));
            }
            if cur.d * (hi.alpha - lo.alpha) >= 0.0 {
                hi = std::mem::replace(&mut lo, cur);
            } else {
                lo = cur;
            }
        }
    }
    if lo.alpha > 0.0 {
        Ok(done(lo, evals, false))
    } else {
        Err(Error::LineSearch(format!("no sufficient decrease after {evals} probes")))
    }
}
