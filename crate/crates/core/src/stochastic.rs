//! Mini-batch L-SR1 trust-region method with overlapping batches, momentum
//! grafting and stall-triggered batch growth.

use std::ops::ControlFlow;
use std::time::Instant;

use log::warn;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::line_search::strong_wolfe_search;
use crate::linalg::{self, dot, norm};
use crate::objective::{Monitor, NoMonitor, Objective, Run, StopReason, TraceRecord};
use crate::obs;
use crate::tr::{tr_radius_update, QuasiNewtonState, TrConfig, MODEL_FLOOR};

/// Mini-batch sampling and growth schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchSchedule {
    pub batch_size: usize,
    /// Fraction of each batch carried over from the previous one.
    pub overlap: f64,
    /// Factor applied to the batch size on a stall.
    pub growth: f64,
    /// Stall threshold, relative to `max(1, f(w₀))`.
    pub stall_tau: f64,
    /// Full objective evaluated every this many iterations.
    pub full_eval_period: usize,
    pub seed: u64,
    /// Form `y` from gradients on the overlap of consecutive batches instead
    /// of differencing the two batch gradients.
    pub overlap_pairs: bool,
}

impl Default for BatchSchedule {
    fn default() -> Self {
        Self {
            batch_size: 100,
            overlap: 0.33,
            growth: 1.5,
            stall_tau: 1e-4,
            full_eval_period: 10,
            seed: 0,
            overlap_pairs: false,
        }
    }
}

impl BatchSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return bad("overlap must lie in [0, 1)");
        }
        if !(self.growth > 1.0) {
            return bad("growth must exceed 1");
        }
        if !(self.stall_tau > 0.0) {
            return bad("stall_tau must be positive");
        }
        if self.full_eval_period < 2 {
            return bad("full_eval_period must be greater than 1");
        }
        Ok(())
    }
}

/// Exponentially averaged step.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumState {
    pub v: Vec<f64>,
    pub mu: f64,
}

impl MomentumState {
    pub fn new(dim: usize, mu: f64) -> Self {
        Self { v: vec![0.0; dim], mu }
    }
}

/// Draws the next batch: `round(overlap·n_b)` indices (at most `|prev|`) from
/// the previous batch, the rest from its complement. Returned sorted.
pub fn sample_overlapping_batch(
    prev: &[usize],
    n_b: usize,
    n_obs: usize,
    overlap: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n_b = n_b.min(n_obs);
    if n_b == n_obs {
        return (0..n_obs).collect();
    }
    let mut in_prev = vec![false; n_obs];
    for &i in prev {
        in_prev[i] = true;
    }
    let complement: Vec<usize> = (0..n_obs).filter(|&i| !in_prev[i]).collect();
    let mut carry = ((overlap * n_b as f64).round() as usize).min(prev.len());
    // Not enough fresh observations: carry more over.
    carry = carry.max(n_b.saturating_sub(complement.len()));
    let mut batch: Vec<usize> = index::sample(rng, prev.len(), carry)
        .into_iter()
        .map(|i| prev[i])
        .collect();
    batch.extend(
        index::sample(rng, complement.len(), n_b - carry)
            .into_iter()
            .map(|i| complement[i]),
    );
    batch.sort_unstable();
    batch
}

/// Grafts the momentum term onto the trust-region step:
/// `v ← μv + last_step`, `v ← μ·min(1, δ/‖v‖)·v`, `p ← min(1, δ/‖p*+v‖)·(p*+v)`.
pub fn momentum_graft(p_star: &[f64], state: &mut MomentumState, last_step: &[f64], delta: f64) -> Vec<f64> {
    let mu = state.mu;
    for (v, s) in state.v.iter_mut().zip(last_step) {
        *v = mu * *v + s;
    }
    let vn = norm(&state.v);
    if vn > 0.0 {
        let scale = mu * (delta / vn).min(1.0);
        state.v.iter_mut().for_each(|v| *v *= scale);
    }
    if state.v.iter().all(|&v| v == 0.0) {
        // Nothing to graft; `p*` already lies in the region.
        return p_star.to_vec();
    }
    let p: Vec<f64> = p_star.iter().zip(&state.v).map(|(a, b)| a + b).collect();
    project_to_region(p, delta)
}

/// `min(1, δ/‖p‖)·p`.
pub fn project_to_region(mut p: Vec<f64>, delta: f64) -> Vec<f64> {
    let pn = norm(&p);
    if pn > delta {
        let scale = delta / pn;
        p.iter_mut().for_each(|x| *x *= scale);
    }
    p
}

/// Grows the batch by `growth` (capped at `n_obs`) when the full objective
/// failed to drop by more than `tau` since the previous checkpoint.
pub fn stall_and_grow(f_curr_full: f64, f_prev_full: f64, tau: f64, sched: &BatchSchedule, n_obs: usize) -> BatchSchedule {
    let mut next = sched.clone();
    if f_curr_full > f_prev_full - tau {
        let grown = (sched.growth * sched.batch_size as f64).ceil() as usize;
        next.batch_size = grown.min(n_obs).max(sched.batch_size.min(n_obs));
    }
    next
}

/// Runs the mini-batch method.
pub fn minimize_stochastic<O: Objective + ?Sized>(
    obj: &O,
    w0: &[f64],
    cfg: &TrConfig,
    sched: &BatchSchedule,
    mom: &MomentumState,
) -> Result<Run> {
    minimize_stochastic_with(obj, w0, cfg, sched, mom, &mut NoMonitor)
}

/// [`minimize_stochastic`] with a per-iteration monitor.
pub fn minimize_stochastic_with<O: Objective + ?Sized>(
    obj: &O,
    w0: &[f64],
    cfg: &TrConfig,
    sched: &BatchSchedule,
    mom: &MomentumState,
    monitor: &mut dyn Monitor,
) -> Result<Run> {
    cfg.validate()?;
    sched.validate()?;
    if !(0.0..1.0).contains(&mom.mu) {
        return Err(Error::InvalidArgument(format!("momentum must lie in [0, 1), got {}", mom.mu)));
    }
    if mom.v.len() != w0.len() {
        return Err(Error::InvalidArgument("momentum vector has the wrong length".into()));
    }
    let start = Instant::now();
    let n_obs = obj.n_obs();
    let mut rng = ChaCha8Rng::seed_from_u64(sched.seed);
    let mut sched = BatchSchedule {
        batch_size: sched.batch_size.min(n_obs),
        ..sched.clone()
    };
    let mut mom = mom.clone();
    let mut w = w0.to_vec();

    let mut f_full_prev = obj.value(&w);
    if !f_full_prev.is_finite() {
        return Err(Error::NonFinite("objective at the starting point"));
    }
    let tau = sched.stall_tau * f_full_prev.max(1.0);

    let mut batch = sample_overlapping_batch(&[], sched.batch_size, n_obs, sched.overlap, &mut rng);
    let (mut fb, mut gb) = obj.batch_value_and_gradient(&w, &batch);
    if !fb.is_finite() || gb.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("batch objective at the starting point"));
    }
    let mut state = QuasiNewtonState::new(w.len(), cfg);
    let mut last_step = vec![0.0; w.len()];
    let mut trace = Vec::new();
    let finish = |w, trace, stop| Ok(Run { w, trace, stop });

    for k in 0..cfg.max_iter {
        if norm(&gb) <= cfg.eps {
            return finish(w, trace, StopReason::GradientTolerance);
        }
        if state.delta <= f64::EPSILON * (1.0 + norm(&w)) {
            return finish(w, trace, StopReason::RadiusCollapsed);
        }
        let b = state.model()?;
        let sol = match obs::solve_subproblem(&b, &gb, state.delta) {
            Ok(sol) => sol,
            Err(e) => return finish(w, trace, StopReason::Defect(e.to_string())),
        };
        let mut p = momentum_graft(&sol.p_star, &mut mom, &last_step, state.delta);
        let mut d0 = dot(&gb, &p);
        if d0 > 0.0 {
            p.iter_mut().for_each(|x| *x = -*x);
            d0 = -d0;
        }
        if !(d0 < 0.0) || sol.q_value > -MODEL_FLOOR {
            return finish(w, trace, StopReason::ModelConverged);
        }

        let batch_size = batch.len();
        let ls = strong_wolfe_search(
            |x| obj.batch_value_and_gradient(x, &batch),
            &w,
            &p,
            fb,
            d0,
            &cfg.wolfe(1.0),
        );
        let mut record = TraceRecord {
            iter: k,
            f: fb,
            grad_norm: norm(&gb),
            delta: Some(state.delta),
            step_norm: 0.0,
            rho: None,
            alpha: 0.0,
            batch_size,
            wall_seconds: 0.0,
            accepted_update: false,
            full_loss: None,
        };
        let step = match ls {
            Ok(ls) => {
                let step = linalg::scaled(ls.alpha, &p);
                let q = obs::model_value(&b, &gb, &step)?;
                let rho = if q.abs() >= MODEL_FLOOR { (ls.f - fb) / q } else { 0.0 };
                record.rho = Some(rho);
                record.alpha = ls.alpha;
                Some((step, rho))
            }
            Err(Error::LineSearch(msg)) => {
                warn!("iteration {k}: {msg}; shrinking radius");
                None
            }
            Err(e) => return Err(e),
        };

        let w_prev = w.clone();
        if let Some((step, _)) = &step {
            linalg::axpy(1.0, step, &mut w);
        }

        if (k + 1) % sched.full_eval_period == 0 {
            let f_full = obj.value(&w);
            record.full_loss = Some(f_full);
            sched = stall_and_grow(f_full, f_full_prev, tau, &sched, n_obs);
            f_full_prev = f_full;
        }
        let next_batch = sample_overlapping_batch(&batch, sched.batch_size, n_obs, sched.overlap, &mut rng);
        let (fb_next, gb_next) = obj.batch_value_and_gradient(&w, &next_batch);

        match step {
            Some((step, rho)) => {
                let y = if sched.overlap_pairs {
                    let common: Vec<usize> = next_batch
                        .iter()
                        .copied()
                        .filter(|i| batch.binary_search(i).is_ok())
                        .collect();
                    if common.is_empty() {
                        linalg::sub(&gb_next, &gb)
                    } else {
                        let (_, g_new) = obj.batch_value_and_gradient(&w, &common);
                        let (_, g_old) = obj.batch_value_and_gradient(&w_prev, &common);
                        linalg::sub(&g_new, &g_old)
                    }
                } else {
                    linalg::sub(&gb_next, &gb)
                };
                record.accepted_update = state.absorb(&step, &y, &b)?;
                record.step_norm = norm(&step);
                state.delta = tr_radius_update(rho, record.step_norm, state.delta, cfg);
                last_step = step;
            }
            None => {
                state.delta *= cfg.eta1;
                last_step.iter_mut().for_each(|x| *x = 0.0);
            }
        }

        batch = next_batch;
        fb = fb_next;
        gb = gb_next;
        record.f = fb;
        record.grad_norm = norm(&gb);
        record.wall_seconds = start.elapsed().as_secs_f64();
        let flow = monitor.observe(&mut record, &w);
        trace.push(record);
        if let ControlFlow::Break(()) = flow {
            return finish(w, trace, StopReason::Monitor);
        }
    }
    let stop = if norm(&gb) <= cfg.eps {
        StopReason::GradientTolerance
    } else {
        StopReason::MaxIterations
    };
    finish(w, trace, stop)
}
