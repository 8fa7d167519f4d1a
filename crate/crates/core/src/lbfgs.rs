//! Limited-memory BFGS baseline with a strong Wolfe line search.

use std::collections::VecDeque;
use std::time::Instant;

use log::warn;

use crate::error::{Error, Result};
use crate::line_search::{strong_wolfe_search, WolfeParams};
use crate::linalg::{self, dot, norm};
use crate::objective::{Monitor, NoMonitor, Objective, Run, StopReason, TraceRecord};

/// Pairs with `yᵀs < CURVATURE_TOL·‖y‖‖s‖` are skipped.
pub const CURVATURE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub eps: f64,
    pub max_iter: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_ls_iter: usize,
    /// Initial inverse-Hessian scale before any pair is stored.
    pub gamma0: f64,
    pub alpha_max: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 8,
            eps: 1e-5,
            max_iter: 1000,
            c1: 1e-4,
            c2: 0.9,
            max_ls_iter: 20,
            gamma0: 1.0,
            alpha_max: 1e6,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.memory == 0 {
            return bad("memory must be at least 1");
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return bad("need 0 < c1 < c2 < 1");
        }
        if !(self.gamma0 > 0.0 && self.alpha_max >= 1.0) {
            return bad("gamma0 must be positive and alpha_max at least 1");
        }
        if self.max_ls_iter == 0 {
            return bad("max_ls_iter must be at least 1");
        }
        Ok(())
    }
}

/// Stored `(s, y, 1/yᵀs)` triples, oldest first.
#[derive(Clone, Debug)]
pub struct LbfgsMemory {
    capacity: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    gamma0: f64,
}

impl LbfgsMemory {
    pub fn new(capacity: usize, gamma0: f64) -> Self {
        Self {
            capacity,
            pairs: VecDeque::with_capacity(capacity),
            gamma0,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Stores the pair if it has enough positive curvature; returns whether it did.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let ys = dot(&y, &s);
        if !(ys >= CURVATURE_TOL * norm(&y) * norm(&s)) || ys <= 0.0 {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / ys));
        true
    }

    /// Scale of the initial inverse Hessian, `sᵀy / yᵀy` of the newest pair.
    pub fn initial_scale(&self) -> f64 {
        match self.pairs.back() {
            Some((_, y, rho)) => 1.0 / (rho * dot(y, y)),
            None => self.gamma0,
        }
    }

    /// `H·v` by the two-loop recursion.
    pub fn apply_inverse(&self, v: &[f64]) -> Vec<f64> {
        let mut q = v.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            linalg::axpy(-a, y, &mut q);
            alphas.push(a);
        }
        let h0 = self.initial_scale();
        q.iter_mut().for_each(|x| *x *= h0);
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            linalg::axpy(a - b, s, &mut q);
        }
        q
    }

    /// `−H·g`.
    pub fn two_loop_direction(&self, g: &[f64]) -> Vec<f64> {
        let mut p = self.apply_inverse(g);
        p.iter_mut().for_each(|x| *x = -*x);
        p
    }
}

pub fn minimize_lbfgs<O: Objective + ?Sized>(obj: &O, w0: &[f64], cfg: &LbfgsConfig) -> Result<Run> {
    minimize_lbfgs_with(obj, w0, cfg, &mut NoMonitor)
}

pub fn minimize_lbfgs_with<O: Objective + ?Sized>(
    obj: &O,
    w0: &[f64],
    cfg: &LbfgsConfig,
    monitor: &mut dyn Monitor,
) -> Result<Run> {
    cfg.validate()?;
    let start = Instant::now();
    let mut w = w0.to_vec();
    let (mut f, mut g) = obj.value_and_gradient(&w);
    if !f.is_finite() || g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("objective at the starting point"));
    }
    let mut mem = LbfgsMemory::new(cfg.memory, cfg.gamma0);
    let params = WolfeParams {
        c1: cfg.c1,
        c2: cfg.c2,
        max_iter: cfg.max_ls_iter,
        alpha_max: cfg.alpha_max,
    };
    let mut trace = Vec::new();

    for k in 0..cfg.max_iter {
        if norm(&g) <= cfg.eps {
            return Ok(Run { w, trace, stop: StopReason::GradientTolerance });
        }
        let mut p = mem.two_loop_direction(&g);
        let mut d0 = dot(&g, &p);
        if !(d0 < 0.0) {
            warn!("iteration {k}: not a descent direction; restarting from steepest descent");
            mem = LbfgsMemory::new(cfg.memory, cfg.gamma0);
            p = linalg::scaled(-1.0, &g);
            d0 = -dot(&g, &g);
        }
        let ls = match strong_wolfe_search(|x| obj.value_and_gradient(x), &w, &p, f, d0, &params) {
            Ok(ls) => ls,
            Err(Error::LineSearch(msg)) => {
                return Ok(Run { w, trace, stop: StopReason::Defect(msg) });
            }
            Err(e) => return Err(e),
        };
        let step = linalg::scaled(ls.alpha, &p);
        linalg::axpy(1.0, &step, &mut w);
        let y = linalg::sub(&ls.g, &g);
        let step_norm = norm(&step);
        let accepted = mem.push(step, y);
        f = ls.f;
        g = ls.g;
        let mut record = TraceRecord {
            iter: k,
            f,
            grad_norm: norm(&g),
            delta: None,
            step_norm,
            rho: None,
            alpha: ls.alpha,
            batch_size: obj.n_obs(),
            wall_seconds: start.elapsed().as_secs_f64(),
            accepted_update: accepted,
            full_loss: None,
        };
        let flow = monitor.observe(&mut record, &w);
        trace.push(record);
        if flow.is_break() {
            return Ok(Run { w, trace, stop: StopReason::Monitor });
        }
    }
    let stop = if norm(&g) <= cfg.eps {
        StopReason::GradientTolerance
    } else {
        StopReason::MaxIterations
    };
    Ok(Run { w, trace, stop })
}
