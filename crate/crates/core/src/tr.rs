//! Deterministic L-SR1 trust-region method.
//!
//! Each iteration solves the trust-region subproblem exactly, scales the
//! step with a strong Wolfe line search (the step is always taken), and uses
//! the ratio of actual to predicted change only to steer the radius.

use std::time::Instant;

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::line_search::{strong_wolfe_search, WolfeParams};
use crate::linalg::{self, dot, norm};
use crate::lsr1::{self, CompactSr1, PairBuffer, UpdateStatus};
use crate::objective::{Monitor, NoMonitor, Objective, Run, StopReason, TraceRecord};
use crate::obs;

/// Trust-region parameters.
///
/// `tau1` is carried for completeness; the radius update never reads it.
#[derive(Clone, Debug, PartialEq)]
pub struct TrConfig {
    pub delta0: f64,
    pub eps: f64,
    pub gamma0: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub eta4: f64,
    pub memory: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_iter: usize,
    pub max_ls_iter: usize,
}

impl Default for TrConfig {
    fn default() -> Self {
        Self {
            delta0: 1.0,
            eps: 1e-5,
            gamma0: 1.0,
            tau1: 0.0,
            tau2: 0.25,
            tau3: 0.75,
            eta1: 0.25,
            eta2: 0.5,
            eta3: 0.8,
            eta4: 2.0,
            memory: lsr1::DEFAULT_MEMORY,
            c1: 1e-4,
            c2: 0.9,
            max_iter: 1000,
            max_ls_iter: 20,
        }
    }
}

impl TrConfig {
    /// Checks `0 ≤ τ₁ < τ₂ < 0.5 < τ₃ < 1`, `0 < η₁ < η₂ ≤ 0.5 < η₃ < 1 < η₄`
    /// and the remaining positivity constraints.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if !(0.0 <= self.tau1 && self.tau1 < self.tau2 && self.tau2 < 0.5 && 0.5 < self.tau3 && self.tau3 < 1.0) {
            return bad("need 0 <= tau1 < tau2 < 0.5 < tau3 < 1");
        }
        if !(0.0 < self.eta1
            && self.eta1 < self.eta2
            && self.eta2 <= 0.5
            && 0.5 < self.eta3
            && self.eta3 < 1.0
            && 1.0 < self.eta4)
        {
            return bad("need 0 < eta1 < eta2 <= 0.5 < eta3 < 1 < eta4");
        }
        if !(self.delta0 > 0.0 && self.delta0.is_finite()) {
            return bad("delta0 must be positive");
        }
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return bad("gamma0 must be positive");
        }
        if !(self.eps >= 0.0) {
            return bad("eps must be nonnegative");
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return bad("need 0 < c1 < c2 < 1");
        }
        if self.max_ls_iter == 0 {
            return bad("max_ls_iter must be at least 1");
        }
        Ok(())
    }

    pub(crate) fn wolfe(&self, alpha_max: f64) -> WolfeParams {
        WolfeParams {
            c1: self.c1,
            c2: self.c2,
            max_iter: self.max_ls_iter,
            alpha_max,
        }
    }
}

/// Next trust radius from the ratio `ρ` and the step length.
pub fn tr_radius_update(rho: f64, s_norm: f64, delta: f64, cfg: &TrConfig) -> f64 {
    if rho < cfg.tau2 {
        (cfg.eta1 * delta).min(cfg.eta2 * s_norm)
    } else if rho >= cfg.tau3 && s_norm >= cfg.eta3 * delta {
        cfg.eta4 * delta
    } else {
        delta
    }
}

/// Predicted reductions smaller than this count as a converged model.
pub(crate) const MODEL_FLOOR: f64 = 1e-16;

/// State shared by the deterministic and stochastic drivers: the pair buffer,
/// the current scaling and radius.
pub(crate) struct QuasiNewtonState {
    pub buf: PairBuffer,
    pub gamma: f64,
    pub delta: f64,
}

impl QuasiNewtonState {
    pub fn new(dim: usize, cfg: &TrConfig) -> Self {
        Self {
            buf: PairBuffer::new(dim, cfg.memory),
            gamma: cfg.gamma0,
            delta: cfg.delta0,
        }
    }

    pub fn model(&mut self) -> Result<CompactSr1> {
        lsr1::assemble_usable(&mut self.buf, self.gamma)
    }

    /// Offers `(s, y)` to the buffer and refreshes `γ`.
    pub fn absorb(&mut self, s: &[f64], y: &[f64], b: &CompactSr1) -> Result<bool> {
        if norm(s) == 0.0 {
            return Ok(false);
        }
        let accepted = lsr1::try_update(&mut self.buf, s, y, b)? == UpdateStatus::Accepted;
        self.gamma = lsr1::lambda_hat_and_gamma(&mut self.buf, self.gamma)?.gamma;
        Ok(accepted)
    }
}

/// Runs the deterministic method from `w0`.
pub fn minimize<O: Objective + ?Sized>(obj: &O, w0: &[f64], cfg: &TrConfig) -> Result<Run> {
    minimize_with(obj, w0, cfg, &mut NoMonitor)
}

/// [`minimize`] with a per-iteration monitor.
pub fn minimize_with<O: Objective + ?Sized>(
    obj: &O,
    w0: &[f64],
    cfg: &TrConfig,
    monitor: &mut dyn Monitor,
) -> Result<Run> {
    cfg.validate()?;
    let start = Instant::now();
    let mut w = w0.to_vec();
    let (mut f, mut g) = obj.value_and_gradient(&w);
    if !f.is_finite() || g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("objective at the starting point"));
    }
    let mut state = QuasiNewtonState::new(w.len(), cfg);
    let mut trace = Vec::new();
    let finish = |w, trace, stop| Ok(Run { w, trace, stop });

    for k in 0..cfg.max_iter {
        if norm(&g) <= cfg.eps {
            return finish(w, trace, StopReason::GradientTolerance);
        }
        if state.delta <= f64::EPSILON * (1.0 + norm(&w)) {
            return finish(w, trace, StopReason::RadiusCollapsed);
        }
        let b = state.model()?;
        let sol = match obs::solve_subproblem(&b, &g, state.delta) {
            Ok(sol) => sol,
            Err(e) => return finish(w, trace, StopReason::Defect(e.to_string())),
        };
        let mut p = sol.p_star;
        let mut d0 = dot(&g, &p);
        if d0 > 0.0 {
            p.iter_mut().for_each(|x| *x = -*x);
            d0 = -d0;
        }
        if !(d0 < 0.0) || sol.q_value > -MODEL_FLOOR {
            return finish(w, trace, StopReason::ModelConverged);
        }

        let record_base = TraceRecord {
            iter: k,
            f,
            grad_norm: norm(&g),
            delta: Some(state.delta),
            step_norm: 0.0,
            rho: None,
            alpha: 0.0,
            batch_size: obj.n_obs(),
            wall_seconds: 0.0,
            accepted_update: false,
            full_loss: None,
        };

        let ls = strong_wolfe_search(
            |x| obj.value_and_gradient(x),
            &w,
            &p,
            f,
            d0,
            &cfg.wolfe(1.0),
        );
        let mut record = match ls {
            Ok(ls) => {
                if !ls.strong_wolfe {
                    debug!("iteration {k}: curvature condition not met, alpha = {}", ls.alpha);
                }
                let step = linalg::scaled(ls.alpha, &p);
                let q = obs::model_value(&b, &g, &step)?;
                if !(q < 0.0) {
                    if q.abs() < MODEL_FLOOR {
                        return finish(w, trace, StopReason::ModelConverged);
                    }
                    return finish(
                        w,
                        trace,
                        StopReason::Defect(format!("predicted change {q:e} is not negative")),
                    );
                }
                let rho = (ls.f - f) / q;
                linalg::axpy(1.0, &step, &mut w);
                let y = linalg::sub(&ls.g, &g);
                let accepted = state.absorb(&step, &y, &b)?;
                let s_norm = norm(&step);
                let delta_next = tr_radius_update(rho, s_norm, state.delta, cfg);
                f = ls.f;
                g = ls.g;
                state.delta = delta_next;
                TraceRecord {
                    f,
                    grad_norm: norm(&g),
                    step_norm: s_norm,
                    rho: Some(rho),
                    alpha: ls.alpha,
                    accepted_update: accepted,
                    ..record_base
                }
            }
            Err(Error::LineSearch(msg)) => {
                warn!("iteration {k}: {msg}; shrinking radius");
                state.delta *= cfg.eta1;
                record_base
            }
            Err(e) => return Err(e),
        };
        record.wall_seconds = start.elapsed().as_secs_f64();
        let flow = monitor.observe(&mut record, &w);
        trace.push(record);
        if flow.is_break() {
            return finish(w, trace, StopReason::Monitor);
        }
    }
    let stop = if norm(&g) <= cfg.eps {
        StopReason::GradientTolerance
    } else {
        StopReason::MaxIterations
    };
    finish(w, trace, stop)
}
