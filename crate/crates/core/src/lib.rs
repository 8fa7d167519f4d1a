//! Limited-memory SR1 trust-region optimization.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`]: small dense factorizations (thin QR, Jacobi eigensolver, Cholesky).
//! * [`lsr1`]: the curvature-pair buffer and the compact L-SR1 matrix.
//! * [`obs`]: the exact trust-region subproblem solver, hard case included.
//! * [`tr`], [`stochastic`], [`lbfgs`]: the deterministic and mini-batch
//!   trust-region drivers and an L-BFGS baseline sharing one line search.
//! * [`nn`], [`dataset`]: a logistic/softmax classifier exposed as an
//!   [`Objective`] and an IDX loader for MNIST-style data.

pub mod dataset;
pub mod error;
pub mod lbfgs;
pub mod linalg;
pub mod lsr1;
pub mod line_search;
pub mod objective;
pub mod nn;
pub mod obs;
pub mod problems;
pub mod stochastic;
pub mod tr;

pub use error::{Error, Result};
pub use objective::{Monitor, NoMonitor, Objective, Run, StopReason, TraceRecord};
pub use tr::TrConfig;
