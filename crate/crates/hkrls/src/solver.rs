//! Batch least-squares weight solves against Gram matrices, and the
//! recursive dictionary-based update used by the online baselines.
//!
//! Gram matrices from dense grids are routinely near-singular, so every
//! batch solve accepts a ridge (`jitter`) added to the diagonal; the default
//! is `1e-8 * trace(K) / m`, and oracle tests override it to 0. The primary
//! factorization is Cholesky; if it fails the solve falls back to a
//! truncated-SVD least-squares solution and logs the fallback.

use nalgebra::{DMatrix, DVector};

use crate::kernels::{self, GramMatrix, KernelConfig};
use crate::{Error, Result};

/// Default ridge term for a Gram matrix: `1e-8 * trace(K) / m`.
pub fn default_jitter(gram: &GramMatrix) -> f64 {
    1e-8 * gram.entries().trace() / gram.point_count() as f64
}

/// Solve `(K + jitter I) W = targets` for `W`.
///
/// `targets` may have any number of columns; all right-hand sides share one
/// factorization. Returns an error if the inputs are non-finite or if even
/// the fallback factorization cannot produce a finite solution.
pub fn solve_psd(gram: &GramMatrix, targets: &DMatrix<f64>, jitter: f64) -> Result<DMatrix<f64>> {
    let m = gram.point_count();
    if targets.nrows() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: targets.nrows(),
        });
    }
    if !(jitter >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "jitter must be nonnegative, got {jitter}"
        )));
    }
    if gram.entries().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gram matrix"));
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("solve targets"));
    }

    let mut a = gram.entries().clone();
    for i in 0..m {
        a[(i, i)] += jitter;
    }

    if let Some(chol) = a.clone().cholesky() {
        let solution = chol.solve(targets);
        // a singular matrix can slip past the factorization when a pivot
        // rounds to a tiny positive value; accept only solutions whose
        // residual is consistent with a usable factor
        let residual = &a * &solution - targets;
        let max_resid = residual.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let scale = 1.0 + targets.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if max_resid <= 1e-4 * scale {
            return Ok(solution);
        }
        log::warn!(
            "cholesky residual {max_resid:.3e} too large on {m}x{m} system; using SVD fallback"
        );
    } else {
        log::warn!("cholesky failed on {m}x{m} system (jitter {jitter:.3e}); using SVD fallback");
    }

    // Numerically indefinite even with the ridge: fall back to a truncated
    // SVD least-squares solve.
    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = max_sv * 1e-12;
    let solution = svd
        .solve(targets, eps)
        .map_err(|e| Error::SolveFailure {
            level: None,
            reason: e.to_string(),
        })?;
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolveFailure {
            level: None,
            reason: "fallback produced non-finite weights".into(),
        });
    }
    Ok(solution)
}

/// A flat batch kernel model: dictionary points, per-point weights (one
/// column per target component), and the kernel it was fitted with.
#[derive(Debug, Clone)]
pub struct KrlsModel {
    pub dictionary: Vec<Vec<f64>>,
    pub weights: DMatrix<f64>,
    pub kernel: KernelConfig,
    pub jitter: f64,
}

impl KrlsModel {
    pub fn target_width(&self) -> usize {
        self.weights.ncols()
    }
}

/// Fit a batch kernel least-squares model: assemble the Gram over `points`
/// and solve for the weights. `targets` has one row per point; vector-valued
/// targets (more than one column) are solved with a single factorization.
///
/// `jitter = None` applies the default ridge rule.
pub fn krls_fit(
    points: &[Vec<f64>],
    targets: &DMatrix<f64>,
    kernel: KernelConfig,
    jitter: Option<f64>,
) -> Result<KrlsModel> {
    if points.len() != targets.nrows() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            actual: targets.nrows(),
        });
    }
    let gram = kernels::gram(&kernel, points)?;
    let jitter = jitter.unwrap_or_else(|| default_jitter(&gram));
    let weights = solve_psd(&gram, targets, jitter)?;
    Ok(KrlsModel {
        dictionary: points.to_vec(),
        weights,
        kernel,
        jitter,
    })
}

/// Evaluate the kernel expansion at one query point; returns one value per
/// target component.
pub fn krls_predict(model: &KrlsModel, query: &[f64]) -> Result<DVector<f64>> {
    let k = kernels::cross_kernel_vector(&model.kernel, &model.dictionary, query)?;
    Ok(model.weights.transpose() * k)
}

/// Recursive dictionary state for the sparse online update: the dictionary,
/// the inverse of its Gram matrix, the projection matrix of the recursion,
/// and the current weights.
///
/// A new sample is admitted to the dictionary only when its approximate
/// linear dependency (ALD) error against the current dictionary exceeds
/// `ald_threshold`; otherwise the weights are updated with the dictionary
/// fixed.
#[derive(Debug, Clone)]
pub struct OnlineState {
    dictionary: Vec<Vec<f64>>,
    gram_inverse: DMatrix<f64>,
    projection: DMatrix<f64>,
    weights: DMatrix<f64>,
    ald_threshold: f64,
    kernel: KernelConfig,
}

/// Near-dependent samples below this ALD error are never admitted, even at
/// threshold 0, to keep the inverse-Gram recursion finite.
const ALD_FLOOR: f64 = 1e-12;

impl OnlineState {
    /// Initialize from the first sample. `target` is one row of the target
    /// matrix (length q >= 1).
    pub fn new(kernel: KernelConfig, ald_threshold: f64, z: &[f64], target: &[f64]) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::EmptyInput("online target"));
        }
        if !(ald_threshold >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ALD threshold must be nonnegative, got {ald_threshold}"
            )));
        }
        if z.iter().any(|v| !v.is_finite()) || target.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("online sample"));
        }
        let kzz = kernels::eval_kernel(&kernel, z, z)?;
        let q = target.len();
        let mut weights = DMatrix::zeros(1, q);
        for (c, &t) in target.iter().enumerate() {
            weights[(0, c)] = t / kzz;
        }
        Ok(OnlineState {
            dictionary: vec![z.to_vec()],
            gram_inverse: DMatrix::from_element(1, 1, 1.0 / kzz),
            projection: DMatrix::from_element(1, 1, 1.0),
            weights,
            ald_threshold,
            kernel,
        })
    }

    pub fn dictionary(&self) -> &[Vec<f64>] {
        &self.dictionary
    }

    pub fn gram_inverse(&self) -> &DMatrix<f64> {
        &self.gram_inverse
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// One recursive update. If the ALD error of `z` against the dictionary
    /// exceeds the threshold the dictionary grows and the inverse Gram and
    /// projection are rank-1 updated; otherwise only the weights move.
    pub fn update(&mut self, z: &[f64], target: &[f64]) -> Result<()> {
        if z.iter().any(|v| !v.is_finite()) || target.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("online sample"));
        }
        if target.len() != self.weights.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.ncols(),
                actual: target.len(),
            });
        }
        let kvec = kernels::cross_kernel_vector(&self.kernel, &self.dictionary, z)?;
        let kzz = kernels::eval_kernel(&self.kernel, z, z)?;
        let a = &self.gram_inverse * &kvec;
        let ald = kzz - kvec.dot(&a);
        let target = DVector::from_column_slice(target);
        // prediction residual with the current weights
        let residual = &target - self.weights.transpose() * &kvec;

        if ald > self.ald_threshold.max(ALD_FLOOR) {
            let m = self.dictionary.len();
            // grow the inverse Gram
            let mut ginv = DMatrix::zeros(m + 1, m + 1);
            let scaled = &a * (1.0 / ald);
            ginv.view_mut((0, 0), (m, m))
                .copy_from(&(&self.gram_inverse + &scaled * a.transpose()));
            for i in 0..m {
                ginv[(i, m)] = -scaled[i];
                ginv[(m, i)] = -scaled[i];
            }
            ginv[(m, m)] = 1.0 / ald;
            self.gram_inverse = ginv;
            // grow the projection with a unit diagonal block
            let mut proj = DMatrix::zeros(m + 1, m + 1);
            proj.view_mut((0, 0), (m, m)).copy_from(&self.projection);
            proj[(m, m)] = 1.0;
            self.projection = proj;
            // grow the weights
            let mut w = DMatrix::zeros(m + 1, self.weights.ncols());
            for c in 0..self.weights.ncols() {
                for r in 0..m {
                    w[(r, c)] = self.weights[(r, c)] - a[r] * residual[c] / ald;
                }
                w[(m, c)] = residual[c] / ald;
            }
            self.weights = w;
            self.dictionary.push(z.to_vec());
        } else {
            let pa = &self.projection * &a;
            let denom = 1.0 + a.dot(&pa);
            let q = &pa * (1.0 / denom);
            let correction = &q * (a.transpose() * &self.projection);
            self.projection -= correction;
            let gain = &self.gram_inverse * &q;
            self.weights += &gain * residual.transpose();
        }
        Ok(())
    }

    /// Freeze the state into a batch-style model.
    pub fn into_model(self) -> KrlsModel {
        KrlsModel {
            dictionary: self.dictionary,
            weights: self.weights,
            kernel: self.kernel,
            jitter: 0.0,
        }
    }
}
