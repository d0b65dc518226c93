//! Hierarchic kernel recursive least-squares (H-KRLS) regression for evenly
//! sampled n-dimensional grid datasets, together with the flat batch solver
//! and the online/budgeted kernel baselines it is benchmarked against.
//!
//! The hierarchic model fits one kernel regression per grid axis: the first
//! axis is fitted at every combination of the remaining coordinates, and each
//! subsequent level fits the previous level's weights over the next axis.
//! On a full grid this reproduces flat kernel least-squares with the
//! product (separable) kernel while factoring only per-axis Gram matrices,
//! which is where the speedup comes from.
//!
//! Modules:
//! - [`kernels`]: kernel functions, Gram matrices, cross-kernel vectors.
//! - [`solver`]: batch positive-definite solves and the recursive
//!   dictionary-based online update.
//! - [`hierarchy`]: the hierarchic fit/predict for 2-D, 3-D, and general
//!   grids.
//! - [`baselines`]: the comparison methods (full/sparse/sliding-window/
//!   fixed-budget KRLS, NORMA, QKLMS, and the nonstationary space-time
//!   covariance variant).
//! - [`datasets`]: grid construction, synthetic generators, per-axis splits,
//!   the 2-D Gaussian pre-filter, and gridded CSV ingestion.
//! - [`metrics`]: error metrics, the training-cost model, and wall-clock
//!   timing helpers.
//! - [`storage`]: versioned save/load of fitted hierarchic models.

pub mod baselines;
pub mod datasets;
mod error;
pub mod hierarchy;
pub mod kernels;
pub mod metrics;
pub mod solver;
pub mod storage;

pub use error::{Error, Result};
pub use hierarchy::HkrlsModel;
pub use kernels::KernelConfig;
