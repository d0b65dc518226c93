//! Hierarchic fit and predict for 2-D, 3-D, and general (n+1)-dimensional
//! grid datasets.
//!
//! Level 0 fits the first axis at every combination of the remaining
//! coordinates; each level `i > 0` fits the previous level's recorded
//! weights over axis `i`. Only the final level's weight matrix is kept:
//! prediction walks back down, alternating cross-kernel contractions with
//! one devectorization per level.
//!
//! Weight vectorization is column stacking throughout: the matrix column
//! `c` occupies vector entries `[c*rows, (c+1)*rows)`. This is the single
//! canonical order for all levels and dimensions, and it makes the
//! between-level reshape a no-op on column-major storage.
//!
//! Each level solves all of its weight columns against one factorization,
//! which is algebraically identical to running one kernel solve per column
//! but refactorizes nothing.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Dyn};

use crate::datasets::GridDataset;
use crate::kernels::{self, GramMatrix, KernelConfig};
use crate::solver;
use crate::{Error, Result};

/// A fitted hierarchy: the training axes, one kernel per level, and the
/// final-level weight matrix of shape `(m_n, m_0 * m_1 * ... * m_{n-1})`.
#[derive(Debug, Clone)]
pub struct HkrlsModel {
    axes: Vec<Vec<f64>>,
    kernels: Vec<KernelConfig>,
    top_weight: DMatrix<f64>,
    jitter: Vec<f64>,
    level_times: Vec<f64>,
}

impl HkrlsModel {
    /// Reassemble a model from stored parts, revalidating the shape
    /// invariants.
    pub fn from_parts(
        axes: Vec<Vec<f64>>,
        kernels: Vec<KernelConfig>,
        top_weight: DMatrix<f64>,
        jitter: Vec<f64>,
        level_times: Vec<f64>,
    ) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::EmptyInput("model axes"));
        }
        if kernels.len() != axes.len() {
            return Err(Error::DimensionMismatch {
                expected: axes.len(),
                actual: kernels.len(),
            });
        }
        for (k, axis) in axes.iter().enumerate() {
            if axis.len() < 2 {
                return Err(Error::AxisTooShort {
                    axis: k,
                    len: axis.len(),
                });
            }
        }
        let n = axes.len() - 1;
        let inner: usize = axes[..n].iter().map(Vec::len).product();
        if top_weight.nrows() != axes[n].len() || top_weight.ncols() != inner {
            return Err(Error::DimensionMismatch {
                expected: axes[n].len() * inner,
                actual: top_weight.nrows() * top_weight.ncols(),
            });
        }
        if jitter.len() != axes.len() {
            return Err(Error::DimensionMismatch {
                expected: axes.len(),
                actual: jitter.len(),
            });
        }
        Ok(HkrlsModel {
            axes,
            kernels,
            top_weight,
            jitter,
            level_times,
        })
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn kernels(&self) -> &[KernelConfig] {
        &self.kernels
    }

    /// The recorded final-level weight matrix.
    pub fn top_weight(&self) -> &DMatrix<f64> {
        &self.top_weight
    }

    /// Ridge value actually used at each level.
    pub fn jitter(&self) -> &[f64] {
        &self.jitter
    }

    /// Wall-clock seconds spent fitting each level.
    pub fn level_times(&self) -> &[f64] {
        &self.level_times
    }

    pub fn axis_count(&self) -> usize {
        self.axes.len()
    }
}

fn check_kernels(data: &GridDataset, kernels: &[KernelConfig]) -> Result<()> {
    if kernels.len() != data.axes().len() {
        return Err(Error::DimensionMismatch {
            expected: data.axes().len(),
            actual: kernels.len(),
        });
    }
    Ok(())
}

fn solve_level(
    gram: &GramMatrix,
    targets: &DMatrix<f64>,
    jitter: Option<f64>,
    level: usize,
) -> Result<(DMatrix<f64>, f64)> {
    let j = match jitter {
        Some(j) => j,
        None => solver::default_jitter(gram),
    };
    let solved = solver::solve_psd(gram, targets, j).map_err(|e| Error::SolveFailure {
        level: Some(level),
        reason: e.to_string(),
    })?;
    Ok((solved, j))
}

/// Targets for level `i`: transpose each `mi`-column block of the previous
/// level's weights, so that every weight component becomes one regression
/// target over axis `i`.
fn level_targets(prev: &DMatrix<f64>, mi: usize) -> DMatrix<f64> {
    let d_prev = prev.nrows();
    let groups = prev.ncols() / mi;
    let mut out = DMatrix::zeros(mi, d_prev * groups);
    for g in 0..groups {
        for j in 0..mi {
            for a in 0..d_prev {
                out[(j, a + d_prev * g)] = prev[(a, j + mi * g)];
            }
        }
    }
    out
}

/// Fit a two-axis grid: axis-0 solves at every second-axis sample, then one
/// multi-column solve models every weight row over the second axis.
pub fn fit_2d(
    data: &GridDataset,
    kernels: &[KernelConfig],
    jitter: Option<f64>,
) -> Result<HkrlsModel> {
    if data.axes().len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: data.axes().len(),
        });
    }
    check_kernels(data, kernels)?;

    // level 0: one weight column per second-axis sample
    let t = Instant::now();
    let gram0 = kernels::gram_axis(&kernels[0], &data.axes()[0])?;
    let values = data.values_matrix()?;
    let (stacked, j0) = solve_level(&gram0, &values, jitter, 0)?;
    let t0 = t.elapsed().as_secs_f64();

    // level 1: model every row of the stacked weights over the second axis
    let t = Instant::now();
    let gram1 = kernels::gram_axis(&kernels[1], &data.axes()[1])?;
    let (top, j1) = solve_level(&gram1, &stacked.transpose(), jitter, 1)?;
    let t1 = t.elapsed().as_secs_f64();

    HkrlsModel::from_parts(
        data.axes().to_vec(),
        kernels.to_vec(),
        top,
        vec![j0, j1],
        vec![t0, t1],
    )
}

/// Predict from a two-axis model at one query point.
pub fn predict_2d(model: &HkrlsModel, x_q: f64, d1_q: f64) -> Result<f64> {
    if model.axes.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: model.axes.len(),
        });
    }
    if !x_q.is_finite() || !d1_q.is_finite() {
        return Err(Error::NonFinite("query"));
    }
    let second = kernels::cross_axis(&model.kernels[1], &model.axes[1], &[d1_q])?;
    let first_weights = model.top_weight.transpose() * second.column(0);
    let first = kernels::cross_axis(&model.kernels[0], &model.axes[0], &[x_q])?;
    Ok(first_weights.dot(&first.column(0).into_owned()))
}

/// Fit a three-axis grid: axis-0 solves at every (d1, d2) sample, axis-1
/// solves per d2 sample with the level-0 weights as targets, and one final
/// solve over axis 2 with the vectorized level-1 weights.
pub fn fit_3d(
    data: &GridDataset,
    kernels: &[KernelConfig],
    jitter: Option<f64>,
) -> Result<HkrlsModel> {
    if data.axes().len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            actual: data.axes().len(),
        });
    }
    check_kernels(data, kernels)?;
    let (m0, m1, m2) = (data.axis_len(0), data.axis_len(1), data.axis_len(2));

    // level 0: columns are the axis-0 weights at each (d1, d2) pair
    let t = Instant::now();
    let gram0 = kernels::gram_axis(&kernels[0], &data.axes()[0])?;
    let values = DMatrix::from_column_slice(m0, m1 * m2, data.values());
    let (theta, j0) = solve_level(&gram0, &values, jitter, 0)?;
    let t0 = t.elapsed().as_secs_f64();

    // level 1: per d2 sample, model each weight component over d1, then
    // column-stack the solved block into one column of the next targets
    let t = Instant::now();
    let gram1 = kernels::gram_axis(&kernels[1], &data.axes()[1])?;
    let j1 = match jitter {
        Some(j) => j,
        None => solver::default_jitter(&gram1),
    };
    let mut omega = DMatrix::zeros(m1 * m0, m2);
    for i in 0..m2 {
        let mut targets = DMatrix::zeros(m1, m0);
        for j in 0..m1 {
            for a in 0..m0 {
                targets[(j, a)] = theta[(a, j + m1 * i)];
            }
        }
        let beta = solver::solve_psd(&gram1, &targets, j1).map_err(|e| Error::SolveFailure {
            level: Some(1),
            reason: e.to_string(),
        })?;
        omega.column_mut(i).copy_from(&vectorize_weights(&beta));
    }
    let t1 = t.elapsed().as_secs_f64();

    // level 2: model the vectorized weights over d2
    let t = Instant::now();
    let gram2 = kernels::gram_axis(&kernels[2], &data.axes()[2])?;
    let (top, j2) = solve_level(&gram2, &omega.transpose(), jitter, 2)?;
    let t2 = t.elapsed().as_secs_f64();

    HkrlsModel::from_parts(
        data.axes().to_vec(),
        kernels.to_vec(),
        top,
        vec![j0, j1, j2],
        vec![t0, t1, t2],
    )
}

/// Predict from a three-axis model at one query point.
pub fn predict_3d(model: &HkrlsModel, x_q: f64, d1_q: f64, d2_q: f64) -> Result<f64> {
    if model.axes.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            actual: model.axes.len(),
        });
    }
    if !x_q.is_finite() || !d1_q.is_finite() || !d2_q.is_finite() {
        return Err(Error::NonFinite("query"));
    }
    let (m0, m1) = (model.axes[0].len(), model.axes[1].len());
    let eta = kernels::cross_axis(&model.kernels[2], &model.axes[2], &[d2_q])?;
    let beta_vec = model.top_weight.transpose() * eta.column(0);
    let beta = devectorize_weights(&beta_vec, m1, m0)?;
    let tau = kernels::cross_axis(&model.kernels[1], &model.axes[1], &[d1_q])?;
    let theta_hat = beta.transpose() * tau.column(0);
    let iota = kernels::cross_axis(&model.kernels[0], &model.axes[0], &[x_q])?;
    Ok(theta_hat.dot(&iota.column(0).into_owned()))
}

/// Fit a grid with any number of axes. Degenerates to a flat kernel solve
/// for a single axis.
pub fn fit_general(
    data: &GridDataset,
    kernels: &[KernelConfig],
    jitter: Option<f64>,
) -> Result<HkrlsModel> {
    check_kernels(data, kernels)?;
    let axes = data.axes();
    let n_axes = axes.len();
    let mut jitters = Vec::with_capacity(n_axes);
    let mut times = Vec::with_capacity(n_axes);

    // level 0: the value tensor in first-axis-fastest layout is already the
    // (m0 x remaining) target matrix
    let t = Instant::now();
    let m0 = axes[0].len();
    let rest: usize = axes[1..].iter().map(Vec::len).product();
    let gram0 = kernels::gram_axis(&kernels[0], &axes[0])?;
    let values = DMatrix::from_column_slice(m0, rest, data.values());
    let (mut weights, j0) = solve_level(&gram0, &values, jitter, 0)?;
    jitters.push(j0);
    times.push(t.elapsed().as_secs_f64());

    for level in 1..n_axes {
        let t = Instant::now();
        let mi = axes[level].len();
        let gram = kernels::gram_axis(&kernels[level], &axes[level])?;
        let targets = level_targets(&weights, mi);
        let (solved, ji) = solve_level(&gram, &targets, jitter, level)?;
        jitters.push(ji);
        weights = if level < n_axes - 1 {
            // stack each solved block into one column; a no-op reshape on
            // column-major storage
            let d_prev = weights.nrows();
            let groups = solved.ncols() / d_prev;
            solved.reshape_generic(Dyn(mi * d_prev), Dyn(groups))
        } else {
            solved
        };
        times.push(t.elapsed().as_secs_f64());
    }

    HkrlsModel::from_parts(axes.to_vec(), kernels.to_vec(), weights, jitters, times)
}

/// Predict from a general model at one query point (one coordinate per
/// axis).
pub fn predict_general(model: &HkrlsModel, query: &[f64]) -> Result<f64> {
    let n_axes = model.axes.len();
    if query.len() != n_axes {
        return Err(Error::DimensionMismatch {
            expected: n_axes,
            actual: query.len(),
        });
    }
    if query.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("query"));
    }
    let last = n_axes - 1;
    let cross = kernels::cross_axis(&model.kernels[last], &model.axes[last], &[query[last]])?;
    let mut w: DVector<f64> = model.top_weight.transpose() * cross.column(0);
    for level in (0..last).rev() {
        let mi = model.axes[level].len();
        let d = w.len() / mi;
        let mat = devectorize_weights(&w, mi, d)?;
        let cross = kernels::cross_axis(&model.kernels[level], &model.axes[level], &[query[level]])?;
        w = mat.transpose() * cross.column(0);
    }
    Ok(w[0])
}

/// Evaluate the model on a full query grid (one coordinate list per axis).
/// Returns the predicted value tensor in first-axis-fastest layout, equal to
/// [`predict_general`] at every grid combination.
pub fn predict_grid(model: &HkrlsModel, queries: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n_axes = model.axes.len();
    if queries.len() != n_axes {
        return Err(Error::DimensionMismatch {
            expected: n_axes,
            actual: queries.len(),
        });
    }
    for q in queries {
        if q.is_empty() {
            return Err(Error::EmptyInput("query axis"));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("query axis"));
        }
    }
    let last = n_axes - 1;
    let cross = kernels::cross_axis(&model.kernels[last], &model.axes[last], &queries[last])?;
    let mut acc: DMatrix<f64> = model.top_weight.transpose() * cross;
    for level in (0..last).rev() {
        let mi = model.axes[level].len();
        let d = acc.nrows() / mi;
        let cross = kernels::cross_axis(&model.kernels[level], &model.axes[level], &queries[level])?;
        let vi = cross.ncols();
        let mut next = DMatrix::zeros(d, vi * acc.ncols());
        for c in 0..acc.ncols() {
            let mat = DMatrix::from_column_slice(mi, d, acc.column(c).into_owned().as_slice());
            next.view_mut((0, c * vi), (d, vi))
                .copy_from(&(mat.transpose() * &cross));
        }
        acc = next;
    }
    Ok(acc.row(0).iter().copied().collect())
}

/// Column-stack a weight matrix into a vector: column `c` occupies entries
/// `[c*rows, (c+1)*rows)`.
pub fn vectorize_weights(weights: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(weights.as_slice())
}

/// Exact inverse of [`vectorize_weights`].
pub fn devectorize_weights(v: &DVector<f64>, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            actual: v.len(),
        });
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}
