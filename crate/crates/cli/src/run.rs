//! Training runs and CSV traces.

use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use sr1tr::dataset::{load_dataset_shifted, subset, Dataset};
use sr1tr::lbfgs::minimize_lbfgs_with;
use sr1tr::nn::{init_params, Classifier, NetworkSpec};
use sr1tr::stochastic::minimize_stochastic_with;
use sr1tr::tr::minimize_with;
use sr1tr::{Objective, StopReason, TraceRecord};

use crate::config::{Method, RunConfig};

pub const HEADER: [&str; 10] = [
    "iter",
    "wall_seconds",
    "train_loss",
    "test_loss",
    "grad_norm",
    "delta",
    "rho",
    "alpha",
    "batch_size",
    "full_loss",
];

/// A failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Data(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Data(e) | Failure::Numerical(e) => e,
        }
    }
}

impl From<sr1tr::Error> for Failure {
    fn from(e: sr1tr::Error) -> Self {
        use sr1tr::Error as E;
        match e {
            E::Io(_) | E::Parse { .. } | E::Validation(_) => Failure::Data(e.into()),
            E::InvalidArgument(_) => Failure::Config(e.into()),
            _ => Failure::Numerical(e.into()),
        }
    }
}

/// Training and (optional) held-out data for one config.
pub struct Experiment {
    pub train: Dataset,
    pub test: Option<Dataset>,
}

impl Experiment {
    /// Loads the data named in `cfg`, resolving relative paths against `base`.
    pub fn load(cfg: &RunConfig, base: &Path) -> Result<Self, Failure> {
        let path = |p: &Path| RunConfig::resolve(base, p);
        let train = load_dataset_shifted(&path(&cfg.train_images), &path(&cfg.train_labels), cfg.classes, cfg.label_offset)?;
        let train = match cfg.subset_size {
            Some(size) => subset(&train, size, cfg.seed).map_err(|e| Failure::Config(e.into()))?,
            None => train,
        };
        let test = match (&cfg.test_images, &cfg.test_labels) {
            (Some(i), Some(l)) => Some(load_dataset_shifted(&path(i), &path(l), cfg.classes, cfg.label_offset)?),
            _ => None,
        };
        Ok(Self { train, test })
    }
}

/// Outcome of one run.
#[derive(Clone, Debug)]
pub struct Summary {
    pub method: Method,
    pub iterations: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub wall_seconds: f64,
    pub stop: StopReason,
    pub trace_path: PathBuf,
}

struct Row {
    record: TraceRecord,
    test_loss: Option<f64>,
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_trace(path: &Path, rows: &[Row]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for Row { record: r, test_loss } in rows {
        w.write_record([
            r.iter.to_string(),
            r.wall_seconds.to_string(),
            r.f.to_string(),
            fmt(*test_loss),
            r.grad_norm.to_string(),
            fmt(r.delta),
            fmt(r.rho),
            r.alpha.to_string(),
            r.batch_size.to_string(),
            fmt(r.full_loss),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Trains the configured network with `method` and writes the trace to `out`.
pub fn run(cfg: &RunConfig, exp: &Experiment, method: Method, out: &Path) -> Result<Summary, Failure> {
    let spec = NetworkSpec::new(&cfg.network).map_err(|e| Failure::Config(e.into()))?;
    let obj = Classifier::new(spec.clone(), &exp.train).map_err(|e| Failure::Config(e.into()))?;
    let test = exp
        .test
        .as_ref()
        .map(|t| Classifier::new(spec.clone(), t))
        .transpose()
        .map_err(|e| Failure::Config(e.into()))?;
    let w0 = init_params(&spec, cfg.seed);
    let period = cfg.schedule().full_eval_period;
    let budget = cfg.time_budget_seconds;
    let full_batch = method != Method::Lssr1Tr;

    let mut rows = Vec::new();
    let mut monitor = |r: &mut TraceRecord, w: &[f64]| {
        let checkpoint = (r.iter + 1) % period == 0;
        if checkpoint && full_batch {
            r.full_loss = Some(r.f);
        }
        let test_loss = if checkpoint { test.as_ref().map(|t| t.value(w)) } else { None };
        rows.push(Row { record: r.clone(), test_loss });
        match budget {
            Some(b) if r.wall_seconds >= b => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        }
    };
    let result = match method {
        Method::Lsr1Tr => minimize_with(&obj, &w0, &cfg.tr_config(), &mut monitor),
        Method::Lssr1Tr => minimize_stochastic_with(
            &obj,
            &w0,
            &cfg.tr_config(),
            &cfg.schedule(),
            &cfg.momentum_state(w0.len()),
            &mut monitor,
        ),
        Method::Lbfgs => minimize_lbfgs_with(&obj, &w0, &cfg.lbfgs_config(), &mut monitor),
    };
    let run = result?;

    let train_loss = obj.value(&run.w);
    let test_loss = test.as_ref().map(|t| t.value(&run.w));
    if let Some(last) = rows.last_mut() {
        last.test_loss = last.test_loss.or(test_loss);
        last.record.full_loss = last.record.full_loss.or(Some(train_loss));
    }
    write_trace(out, &rows).map_err(Failure::Data)?;
    let summary = Summary {
        method,
        iterations: rows.len(),
        train_loss,
        test_loss,
        wall_seconds: rows.last().map_or(0.0, |r| r.record.wall_seconds),
        stop: run.stop,
        trace_path: out.to_path_buf(),
    };
    if let StopReason::Defect(msg) = &summary.stop {
        return Err(Failure::Numerical(anyhow::anyhow!(
            "{} stopped on a numerical defect after {} iterations: {msg} (trace written to {})",
            method.name(),
            summary.iterations,
            out.display()
        )));
    }
    Ok(summary)
}
