//! Flat JSON run configuration.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sr1tr::lbfgs::LbfgsConfig;
use sr1tr::stochastic::{BatchSchedule, MomentumState};
use sr1tr::TrConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
pub enum Method {
    #[serde(rename = "lsr1-tr")]
    Lsr1Tr,
    #[serde(rename = "lssr1-tr")]
    Lssr1Tr,
    #[serde(rename = "lbfgs")]
    Lbfgs,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Lsr1Tr, Method::Lssr1Tr, Method::Lbfgs];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lsr1Tr => "lsr1-tr",
            Method::Lssr1Tr => "lssr1-tr",
            Method::Lbfgs => "lbfgs",
        }
    }
}

fn default_method() -> Method {
    Method::Lsr1Tr
}

fn default_classes() -> usize {
    10
}

/// Every key of the JSON object maps to one field; unknown keys are rejected.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_method")]
    pub method: Method,
    /// Layer sizes including input and output, e.g. `[784, 20, 10]`.
    pub network: Vec<usize>,
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    #[serde(default)]
    pub test_images: Option<PathBuf>,
    #[serde(default)]
    pub test_labels: Option<PathBuf>,
    #[serde(default = "default_classes")]
    pub classes: usize,
    /// Subtracted from raw labels (1 for EMNIST letters).
    #[serde(default)]
    pub label_offset: u8,
    #[serde(default)]
    pub subset_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,

    #[serde(default)]
    pub delta0: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub gamma0: Option<f64>,
    #[serde(default)]
    pub tau1: Option<f64>,
    #[serde(default)]
    pub tau2: Option<f64>,
    #[serde(default)]
    pub tau3: Option<f64>,
    #[serde(default)]
    pub eta1: Option<f64>,
    #[serde(default)]
    pub eta2: Option<f64>,
    #[serde(default)]
    pub eta3: Option<f64>,
    #[serde(default)]
    pub eta4: Option<f64>,
    #[serde(default)]
    pub memory: Option<usize>,
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default)]
    pub c2: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub max_ls_iter: Option<usize>,

    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub overlap: Option<f64>,
    #[serde(default)]
    pub growth: Option<f64>,
    #[serde(default)]
    pub stall_tau: Option<f64>,
    #[serde(default)]
    pub full_eval_period: Option<usize>,
    #[serde(default)]
    pub overlap_pairs: Option<bool>,
    #[serde(default)]
    pub momentum: Option<f64>,

    #[serde(default)]
    pub time_budget_seconds: Option<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// Parses the JSON text and validates every parameter group.
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.tr_config().validate()?;
        self.schedule().validate()?;
        self.lbfgs_config().validate()?;
        let mu = self.momentum();
        anyhow::ensure!((0.0..1.0).contains(&mu), "momentum must lie in [0, 1), got {mu}");
        anyhow::ensure!(self.network.len() >= 2, "network needs at least an input and an output size");
        anyhow::ensure!(
            self.network.last() == Some(&self.classes),
            "network output size {:?} does not match classes = {}",
            self.network.last(),
            self.classes
        );
        anyhow::ensure!(
            self.test_images.is_some() == self.test_labels.is_some(),
            "test_images and test_labels must be given together"
        );
        if let Some(t) = self.time_budget_seconds {
            anyhow::ensure!(t > 0.0, "time_budget_seconds must be positive");
        }
        Ok(())
    }

    pub fn tr_config(&self) -> TrConfig {
        let d = TrConfig::default();
        TrConfig {
            delta0: self.delta0.unwrap_or(d.delta0),
            eps: self.eps.unwrap_or(d.eps),
            gamma0: self.gamma0.unwrap_or(d.gamma0),
            tau1: self.tau1.unwrap_or(d.tau1),
            tau2: self.tau2.unwrap_or(d.tau2),
            tau3: self.tau3.unwrap_or(d.tau3),
            eta1: self.eta1.unwrap_or(d.eta1),
            eta2: self.eta2.unwrap_or(d.eta2),
            eta3: self.eta3.unwrap_or(d.eta3),
            eta4: self.eta4.unwrap_or(d.eta4),
            memory: self.memory.unwrap_or(d.memory),
            c1: self.c1.unwrap_or(d.c1),
            c2: self.c2.unwrap_or(d.c2),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            max_ls_iter: self.max_ls_iter.unwrap_or(d.max_ls_iter),
        }
    }

    pub fn lbfgs_config(&self) -> LbfgsConfig {
        let tr = self.tr_config();
        LbfgsConfig {
            memory: tr.memory,
            eps: tr.eps,
            max_iter: tr.max_iter,
            c1: tr.c1,
            c2: tr.c2,
            max_ls_iter: tr.max_ls_iter,
            gamma0: tr.gamma0,
            ..Default::default()
        }
    }

    pub fn schedule(&self) -> BatchSchedule {
        let d = BatchSchedule::default();
        BatchSchedule {
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            overlap: self.overlap.unwrap_or(d.overlap),
            growth: self.growth.unwrap_or(d.growth),
            stall_tau: self.stall_tau.unwrap_or(d.stall_tau),
            full_eval_period: self.full_eval_period.unwrap_or(d.full_eval_period),
            seed: self.seed,
            overlap_pairs: self.overlap_pairs.unwrap_or(d.overlap_pairs),
        }
    }

    pub fn momentum(&self) -> f64 {
        self.momentum.unwrap_or(0.9)
    }

    pub fn momentum_state(&self, dim: usize) -> MomentumState {
        MomentumState::new(dim, self.momentum())
    }

    /// Resolves a data path relative to the directory holding the config file.
    pub fn resolve(base: &Path, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            base.join(path)
        }
    }
}
