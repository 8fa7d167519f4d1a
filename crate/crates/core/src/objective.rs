//! The evaluation contract shared by every driver, plus per-iteration traces.

use std::ops::ControlFlow;

/// A differentiable empirical risk `f(w) = (1/n) Σ fᵢ(w)`.
///
/// Objectives without an observation structure report `n_obs() == 1` and
/// ignore the index set in the batch methods.
pub trait Objective {
    fn dim(&self) -> usize;

    fn n_obs(&self) -> usize {
        1
    }

    fn value(&self, w: &[f64]) -> f64 {
        self.value_and_gradient(w).0
    }

    fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>);

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        self.value_and_gradient(w).1
    }

    /// `f̂(w) = (1/|I|) Σ_{i∈I} fᵢ(w)`.
    fn batch_value(&self, w: &[f64], _batch: &[usize]) -> f64 {
        self.value(w)
    }

    /// `(f̂(w), g̃(w))` over the index set.
    fn batch_value_and_gradient(&self, w: &[f64], _batch: &[usize]) -> (f64, Vec<f64>) {
        self.value_and_gradient(w)
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn n_obs(&self) -> usize {
        (**self).n_obs()
    }

    fn value(&self, w: &[f64]) -> f64 {
        (**self).value(w)
    }

    fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>) {
        (**self).value_and_gradient(w)
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        (**self).gradient(w)
    }

    fn batch_value(&self, w: &[f64], batch: &[usize]) -> f64 {
        (**self).batch_value(w, batch)
    }

    fn batch_value_and_gradient(&self, w: &[f64], batch: &[usize]) -> (f64, Vec<f64>) {
        (**self).batch_value_and_gradient(w, batch)
    }
}

/// One row of an optimizer trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    /// Objective after the step (the sampled objective for mini-batch runs).
    pub f: f64,
    pub grad_norm: f64,
    /// Trust radius used in this iteration.
    pub delta: Option<f64>,
    pub step_norm: f64,
    pub rho: Option<f64>,
    pub alpha: f64,
    pub batch_size: usize,
    pub wall_seconds: f64,
    pub accepted_update: bool,
    /// Full objective, filled at checkpoints.
    pub full_loss: Option<f64>,
}

/// Why a driver returned.
#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// The monitor asked to stop (time budget, for instance).
    Monitor,
    /// The model predicts no further decrease.
    ModelConverged,
    /// The trust radius collapsed below machine precision.
    RadiusCollapsed,
    /// A numerical defect aborted the run; the trace up to that point is kept.
    Defect(String),
}

/// Final iterate and trace of a run.
#[derive(Clone, Debug)]
pub struct Run {
    pub w: Vec<f64>,
    pub trace: Vec<TraceRecord>,
    pub stop: StopReason,
}

/// Called after every iteration with the new record and iterate.
pub trait Monitor {
    fn observe(&mut self, record: &mut TraceRecord, w: &[f64]) -> ControlFlow<()>;
}

impl<F: FnMut(&mut TraceRecord, &[f64]) -> ControlFlow<()>> Monitor for F {
    fn observe(&mut self, record: &mut TraceRecord, w: &[f64]) -> ControlFlow<()> {
        self(record, w)
    }
}

/// Monitor that never interrupts.
pub struct NoMonitor;

impl Monitor for NoMonitor {
    fn observe(&mut self, _record: &mut TraceRecord, _w: &[f64]) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}
