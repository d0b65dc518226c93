//! The comparison methods the hierarchic model is benchmarked against, all
//! operating on flattened (point, value) samples: the flat batch solve, the
//! ALD-sparsified recursive solve, sliding-window and fixed-budget variants,
//! NORMA, QKLMS, and the nonstationary space-time covariance solve.
//!
//! Online methods consume samples in the order given; the experiment
//! harness presents the flattened training grid shuffled by the experiment
//! seed (see [`shuffle_samples`]), and that seed is echoed in reports.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kernels::{self, GramMatrix, KernelConfig};
use crate::solver::{self, KrlsModel, OnlineState};
use crate::{Error, Result};

/// Method selection and hyperparameters, one variant per comparison method.
/// Every variant carries exactly the fields its method consumes.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselineConfig {
    /// Plain batch kernel least-squares over every sample.
    FullKrls { sigma: f64 },
    /// Recursive solve that admits a sample to the dictionary only when its
    /// approximate linear dependency error exceeds `ald_delta`.
    SparseKrls { sigma: f64, ald_delta: f64 },
    /// Keeps only the `window` most recent samples, solved with ridge
    /// `reg_c`.
    SlidingWindowKrls {
        sigma: f64,
        window: usize,
        reg_c: f64,
    },
    /// Grows to `budget` samples, then evicts the sample whose omission
    /// changes predictions least. `lambda` is the ridge; `mu` scales the
    /// stored-label update toward each new residual.
    FixedBudgetKrls {
        sigma: f64,
        budget: usize,
        lambda: f64,
        mu: f64,
    },
    /// Stochastic gradient descent in the kernel feature space with step
    /// `eta`, per-step weight shrinkage `1 - eta*lambda`, truncated to the
    /// `window` most recent terms.
    Norma {
        sigma: f64,
        window: usize,
        eta: f64,
        lambda: f64,
    },
    /// Least-mean-squares with step `mu`; samples within `epsilon_q` of an
    /// existing center merge into that center instead of growing the
    /// dictionary.
    Qklms {
        sigma: f64,
        mu: f64,
        epsilon_q: f64,
    },
    /// Batch solve whose Gram entries are the space-time covariance of
    /// pairwise absolute lags; samples must carry (space, time) coordinates.
    NonstillKrls { a_scale: f64, b_scale: f64 },
}

impl BaselineConfig {
    pub fn method_name(&self) -> &'static str {
        match self {
            BaselineConfig::FullKrls { .. } => "krls",
            BaselineConfig::SparseKrls { .. } => "skrls",
            BaselineConfig::SlidingWindowKrls { .. } => "swkrls",
            BaselineConfig::FixedBudgetKrls { .. } => "fbkrls",
            BaselineConfig::Norma { .. } => "norma",
            BaselineConfig::Qklms { .. } => "qklms",
            BaselineConfig::NonstillKrls { .. } => "nonstill",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            BaselineConfig::FullKrls { sigma } if sigma <= 0.0 => {
                bad(format!("krls: sigma must be positive, got {sigma}"))
            }
            BaselineConfig::SparseKrls { sigma, ald_delta } if sigma <= 0.0 || ald_delta < 0.0 => {
                bad(format!(
                    "skrls: need sigma > 0 and ald_delta >= 0, got ({sigma}, {ald_delta})"
                ))
            }
            BaselineConfig::SlidingWindowKrls {
                sigma,
                window,
                reg_c,
            } if sigma <= 0.0 || window == 0 || reg_c < 0.0 => bad(format!(
                "swkrls: need sigma > 0, window >= 1, reg_c >= 0, got ({sigma}, {window}, {reg_c})"
            )),
            BaselineConfig::FixedBudgetKrls {
                sigma,
                budget,
                lambda,
                ..
            } if sigma <= 0.0 || budget == 0 || lambda < 0.0 => bad(format!(
                "fbkrls: need sigma > 0, budget >= 1, lambda >= 0, got ({sigma}, {budget}, {lambda})"
            )),
            BaselineConfig::Norma {
                sigma, window, eta, ..
            } if sigma <= 0.0 || window == 0 || eta <= 0.0 => bad(format!(
                "norma: need sigma > 0, window >= 1, eta > 0, got ({sigma}, {window}, {eta})"
            )),
            BaselineConfig::Qklms {
                sigma, epsilon_q, ..
            } if sigma <= 0.0 || epsilon_q < 0.0 => bad(format!(
                "qklms: need sigma > 0, epsilon_q >= 0, got ({sigma}, {epsilon_q})"
            )),
            BaselineConfig::NonstillKrls { a_scale, b_scale }
                if a_scale <= 0.0 || b_scale <= 0.0 =>
            {
                bad(format!(
                    "nonstill: scalings must be positive, got ({a_scale}, {b_scale})"
                ))
            }
            _ => Ok(()),
        }
    }
}

/// Shuffle a flattened sample list in place, deterministically from the
/// experiment seed.
pub fn shuffle_samples(samples: &mut [(Vec<f64>, f64)], seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    samples.shuffle(&mut rng);
}

fn check_samples(samples: &[(Vec<f64>, f64)]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("baseline samples"));
    }
    Ok(())
}

fn split_points_targets(samples: &[(Vec<f64>, f64)]) -> (Vec<Vec<f64>>, DMatrix<f64>) {
    let points: Vec<Vec<f64>> = samples.iter().map(|(p, _)| p.clone()).collect();
    let targets = DMatrix::from_fn(samples.len(), 1, |r, _| samples[r].1);
    (points, targets)
}

/// Fit the method selected by `cfg`. `jitter` applies to the batch solves
/// (full and nonstill); `None` uses the default ridge rule.
pub fn fit(
    samples: &[(Vec<f64>, f64)],
    cfg: &BaselineConfig,
    jitter: Option<f64>,
) -> Result<KrlsModel> {
    cfg.validate()?;
    check_samples(samples)?;
    match cfg {
        BaselineConfig::FullKrls { sigma } => {
            let (points, targets) = split_points_targets(samples);
            solver::krls_fit(&points, &targets, KernelConfig::gaussian(*sigma)?, jitter)
        }
        BaselineConfig::SparseKrls { .. } => fit_sparse_krls(samples, cfg),
        BaselineConfig::SlidingWindowKrls { .. } => fit_sliding_window_krls(samples, cfg),
        BaselineConfig::FixedBudgetKrls { .. } => fit_fixed_budget_krls(samples, cfg),
        BaselineConfig::Norma { .. } => fit_norma(samples, cfg),
        BaselineConfig::Qklms { .. } => fit_qklms(samples, cfg),
        BaselineConfig::NonstillKrls { .. } => fit_nonstill_krls(samples, cfg, jitter),
    }
}

/// Stream every sample through the recursive ALD update.
pub fn fit_sparse_krls(samples: &[(Vec<f64>, f64)], cfg: &BaselineConfig) -> Result<KrlsModel> {
    let (sigma, delta) = match cfg {
        BaselineConfig::SparseKrls { sigma, ald_delta } => (*sigma, *ald_delta),
        _ => {
            return Err(Error::InvalidParameter(
                "fit_sparse_krls requires a SparseKrls config".into(),
            ))
        }
    };
    check_samples(samples)?;
    let kernel = KernelConfig::gaussian(sigma)?;
    let (first, rest) = samples.split_first().unwrap();
    let mut state = OnlineState::new(kernel, delta, &first.0, &[first.1])?;
    for (z, y) in rest {
        state.update(z, &[*y])?;
    }
    Ok(state.into_model())
}

/// Regularized inverse kept alongside a growing/shrinking dictionary.
struct InverseWindow {
    dict: Vec<Vec<f64>>,
    targets: Vec<f64>,
    inverse: DMatrix<f64>,
    kernel: KernelConfig,
    ridge: f64,
}

impl InverseWindow {
    fn new(kernel: KernelConfig, ridge: f64, z: &[f64], y: f64) -> Result<Self> {
        let kzz = kernels::eval_kernel(&kernel, z, z)? + ridge;
        Ok(InverseWindow {
            dict: vec![z.to_vec()],
            targets: vec![y],
            inverse: DMatrix::from_element(1, 1, 1.0 / kzz),
            kernel,
            ridge,
        })
    }

    fn len(&self) -> usize {
        self.dict.len()
    }

    fn cross(&self, z: &[f64]) -> Result<DVector<f64>> {
        kernels::cross_kernel_vector(&self.kernel, &self.dict, z)
    }

    fn weights(&self) -> DVector<f64> {
        &self.inverse * DVector::from_column_slice(&self.targets)
    }

    /// Append a sample, extending the inverse by one row and column.
    fn grow(&mut self, z: &[f64], y: f64) -> Result<()> {
        let b = self.cross(z)?;
        let d = kernels::eval_kernel(&self.kernel, z, z)? + self.ridge;
        let gb = &self.inverse * &b;
        let e = d - b.dot(&gb);
        if e <= 1e-12 {
            return Err(Error::SolveFailure {
                level: None,
                reason: format!(
                    "window update became singular (pivot {e:.3e}); raise the ridge or drop duplicate samples"
                ),
            });
        }
        let m = self.len();
        let mut next = DMatrix::zeros(m + 1, m + 1);
        next.view_mut((0, 0), (m, m))
            .copy_from(&(&self.inverse + (&gb * gb.transpose()) / e));
        for i in 0..m {
            next[(i, m)] = -gb[i] / e;
            next[(m, i)] = -gb[i] / e;
        }
        next[(m, m)] = 1.0 / e;
        self.inverse = next;
        self.dict.push(z.to_vec());
        self.targets.push(y);
        Ok(())
    }

    /// Remove dictionary entry `idx`, downdating the inverse.
    fn drop_index(&mut self, idx: usize) {
        let m = self.len();
        let g = self.inverse[(idx, idx)];
        let keep: Vec<usize> = (0..m).filter(|&i| i != idx).collect();
        let mut next = DMatrix::zeros(m - 1, m - 1);
        for (r, &i) in keep.iter().enumerate() {
            for (c, &j) in keep.iter().enumerate() {
                next[(r, c)] = self.inverse[(i, j)] - self.inverse[(i, idx)] * self.inverse[(idx, j)] / g;
            }
        }
        self.inverse = next;
        self.dict.remove(idx);
        self.targets.remove(idx);
    }

    fn into_model(self) -> KrlsModel {
        let weights = DMatrix::from_column_slice(self.len(), 1, self.weights().as_slice());
        KrlsModel {
            dictionary: self.dict,
            weights,
            kernel: self.kernel,
            jitter: self.ridge,
        }
    }
}

/// Keep at most `window` most recent samples, dropping the oldest on each
/// advance past the window.
pub fn fit_sliding_window_krls(
    samples: &[(Vec<f64>, f64)],
    cfg: &BaselineConfig,
) -> Result<KrlsModel> {
    let (sigma, window, reg_c) = match cfg {
        BaselineConfig::SlidingWindowKrls {
            sigma,
            window,
            reg_c,
        } => (*sigma, *window, *reg_c),
        _ => {
            return Err(Error::InvalidParameter(
                "fit_sliding_window_krls requires a SlidingWindowKrls config".into(),
            ))
        }
    };
    check_samples(samples)?;
    let kernel = KernelConfig::gaussian(sigma)?;
    let (first, rest) = samples.split_first().unwrap();
    let mut state = InverseWindow::new(kernel, reg_c, &first.0, first.1)?;
    for (z, y) in rest {
        state.grow(z, *y)?;
        if state.len() > window {
            state.drop_index(0);
        }
        debug_assert!(state.len() <= window.max(1));
    }
    Ok(state.into_model())
}

/// Index of the sample whose omission changes predictions least:
/// `argmin |weight_i| / inverse[i,i]`, first index on ties.
fn least_significant(weights: &DVector<f64>, inverse: &DMatrix<f64>) -> usize {
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for i in 0..weights.len() {
        let score = weights[i].abs() / inverse[(i, i)];
        if score < best_score {
            best_score = score;
            best = i;
        }
    }
    best
}

/// Grow to the budget; beyond it, evict the least significant sample and
/// downdate. Stored labels drift toward each new residual at rate `mu`.
pub fn fit_fixed_budget_krls(
    samples: &[(Vec<f64>, f64)],
    cfg: &BaselineConfig,
) -> Result<KrlsModel> {
    let (sigma, budget, lambda, mu) = match cfg {
        BaselineConfig::FixedBudgetKrls {
            sigma,
            budget,
            lambda,
            mu,
        } => (*sigma, *budget, *lambda, *mu),
        _ => {
            return Err(Error::InvalidParameter(
                "fit_fixed_budget_krls requires a FixedBudgetKrls config".into(),
            ))
        }
    };
    check_samples(samples)?;
    let kernel = KernelConfig::gaussian(sigma)?;
    let (first, rest) = samples.split_first().unwrap();
    let mut state = InverseWindow::new(kernel, lambda, &first.0, first.1)?;
    for (z, y) in rest {
        if mu != 0.0 {
            let kv = state.cross(z)?;
            let residual = y - kv.dot(&state.weights());
            for (t, k) in state.targets.iter_mut().zip(kv.iter()) {
                *t += mu * k * residual;
            }
        }
        state.grow(z, *y)?;
        if state.len() > budget {
            let weights = state.weights();
            let evict = least_significant(&weights, &state.inverse);
            state.drop_index(evict);
        }
        debug_assert!(state.len() <= budget.max(1));
    }
    Ok(state.into_model())
}

/// Stochastic gradient descent in feature space: per-step shrinkage of all
/// existing weights by `1 - eta*lambda`, a new term `eta * residual`, and
/// truncation to the `window` most recent terms.
pub fn fit_norma(samples: &[(Vec<f64>, f64)], cfg: &BaselineConfig) -> Result<KrlsModel> {
    let (sigma, window, eta, lambda) = match cfg {
        BaselineConfig::Norma {
            sigma,
            window,
            eta,
            lambda,
        } => (*sigma, *window, *eta, *lambda),
        _ => {
            return Err(Error::InvalidParameter(
                "fit_norma requires a Norma config".into(),
            ))
        }
    };
    check_samples(samples)?;
    let kernel = KernelConfig::gaussian(sigma)?;
    let shrink = 1.0 - eta * lambda;
    let mut dict: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (z, y) in samples {
        let mut fz = 0.0;
        for (p, w) in dict.iter().zip(&weights) {
            fz += w * kernels::eval_kernel(&kernel, p, z)?;
        }
        let residual = y - fz;
        for w in weights.iter_mut() {
            *w *= shrink;
        }
        dict.push(z.clone());
        weights.push(eta * residual);
        if dict.len() > window {
            dict.remove(0);
            weights.remove(0);
        }
    }
    let weights = DMatrix::from_column_slice(dict.len(), 1, &weights);
    Ok(KrlsModel {
        dictionary: dict,
        weights,
        kernel,
        jitter: 0.0,
    })
}

/// Quantized least-mean-squares: a sample within `epsilon_q` of an existing
/// center adds its update to that center's weight (nearest center, lowest
/// index on ties) instead of growing the dictionary.
pub fn fit_qklms(samples: &[(Vec<f64>, f64)], cfg: &BaselineConfig) -> Result<KrlsModel> {
    let (sigma, mu, epsilon_q) = match cfg {
        BaselineConfig::Qklms {
            sigma,
            mu,
            epsilon_q,
        } => (*sigma, *mu, *epsilon_q),
        _ => {
            return Err(Error::InvalidParameter(
                "fit_qklms requires a Qklms config".into(),
            ))
        }
    };
    check_samples(samples)?;
    let kernel = KernelConfig::gaussian(sigma)?;
    let mut dict: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (z, y) in samples {
        let mut fz = 0.0;
        for (p, w) in dict.iter().zip(&weights) {
            fz += w * kernels::eval_kernel(&kernel, p, z)?;
        }
        let residual = y - fz;
        let nearest = dict
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 = p.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                (i, d2.sqrt())
            })
            .fold(None::<(usize, f64)>, |best, (i, d)| match best {
                Some((_, bd)) if d >= bd => best,
                _ => Some((i, d)),
            });
        match nearest {
            Some((i, d)) if d <= epsilon_q => weights[i] += mu * residual,
            _ => {
                dict.push(z.clone());
                weights.push(mu * residual);
            }
        }
    }
    let weights = DMatrix::from_column_slice(dict.len(), 1, &weights);
    Ok(KrlsModel {
        dictionary: dict,
        weights,
        kernel,
        jitter: 0.0,
    })
}

/// Batch solve with the space-time covariance Gram over pairwise absolute
/// (time, space) lags. Samples must be two-dimensional, ordered (space,
/// time).
pub fn fit_nonstill_krls(
    samples: &[(Vec<f64>, f64)],
    cfg: &BaselineConfig,
    jitter: Option<f64>,
) -> Result<KrlsModel> {
    let (a_scale, b_scale) = match cfg {
        BaselineConfig::NonstillKrls { a_scale, b_scale } => (*a_scale, *b_scale),
        _ => {
            return Err(Error::InvalidParameter(
                "fit_nonstill_krls requires a NonstillKrls config".into(),
            ))
        }
    };
    check_samples(samples)?;
    let kernel = KernelConfig::space_time(a_scale, b_scale)?;
    if samples.iter().any(|(p, _)| p.len() != 2) {
        return Err(Error::DimensionMismatch {
            expected: 2,
            actual: samples.iter().map(|(p, _)| p.len()).find(|&l| l != 2).unwrap_or(2),
        });
    }
    let m = samples.len();
    let mut entries = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let u = (samples[i].0[1] - samples[j].0[1]).abs();
            let h = (samples[i].0[0] - samples[j].0[0]).abs();
            let v = kernels::nonstill_covariance(&kernel, u, h)?;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    let gram = GramMatrix::from_symmetric(entries)?;
    let jitter = jitter.unwrap_or_else(|| solver::default_jitter(&gram));
    let (points, targets) = split_points_targets(samples);
    let weights = solver::solve_psd(&gram, &targets, jitter)?;
    Ok(KrlsModel {
        dictionary: points,
        weights,
        kernel,
        jitter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{krls_fit, krls_predict};
    use approx::assert_relative_eq;

    fn stream_1d(n: usize) -> Vec<(Vec<f64>, f64)> {
        (0..n)
            .map(|i| {
                let x = i as f64 * 0.8;
                (vec![x], x.sin())
            })
            .collect()
    }

    #[test]
    fn sparse_zero_delta_admits_all_distinct_points() {
        let samples = stream_1d(25);
        let cfg = BaselineConfig::SparseKrls {
            sigma: 1.0,
            ald_delta: 0.0,
        };
        let model = fit_sparse_krls(&samples, &cfg).unwrap();
        assert_eq!(model.dictionary.len(), 25);
    }

    #[test]
    fn sparse_huge_delta_keeps_one() {
        let samples = stream_1d(25);
        let cfg = BaselineConfig::SparseKrls {
            sigma: 1.0,
            ald_delta: 100.0,
        };
        let model = fit_sparse_krls(&samples, &cfg).unwrap();
        assert_eq!(model.dictionary.len(), 1);
    }

    #[test]
    fn sliding_window_matches_batch_when_window_covers_stream() {
        let samples = stream_1d(40);
        let cfg = BaselineConfig::SlidingWindowKrls {
            sigma: 1.0,
            window: 40,
            reg_c: 0.05,
        };
        let model = fit_sliding_window_krls(&samples, &cfg).unwrap();
        let (points, targets) = split_points_targets(&samples);
        let batch = krls_fit(&points, &targets, KernelConfig::gaussian(1.0).unwrap(), Some(0.05)).unwrap();
        for q in [0.3, 7.7, 18.4, 31.0] {
            let a = krls_predict(&model, &[q]).unwrap()[0];
            let b = krls_predict(&batch, &[q]).unwrap()[0];
            assert_relative_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn sliding_window_of_one_keeps_only_last_sample() {
        let samples = stream_1d(10);
        let cfg = BaselineConfig::SlidingWindowKrls {
            sigma: 1.0,
            window: 1,
            reg_c: 0.0,
        };
        let model = fit_sliding_window_krls(&samples, &cfg).unwrap();
        assert_eq!(model.dictionary.len(), 1);
        assert_eq!(model.dictionary[0], samples[9].0);
        // prediction is the last target at the last point
        let p = krls_predict(&model, &samples[9].0).unwrap()[0];
        assert_relative_eq!(p, samples[9].1, max_relative = 1e-12);
    }

    #[test]
    fn sliding_window_never_exceeds_window() {
        let samples = stream_1d(30);
        let kernel = KernelConfig::gaussian(1.0).unwrap();
        let mut state = InverseWindow::new(kernel, 0.01, &samples[0].0, samples[0].1).unwrap();
        for (z, y) in &samples[1..] {
            state.grow(z, *y).unwrap();
            if state.len() > 7 {
                state.drop_index(0);
            }
            assert!(state.len() <= 7);
        }
    }

    #[test]
    fn fixed_budget_matches_batch_without_evictions() {
        let samples = stream_1d(35);
        let cfg = BaselineConfig::FixedBudgetKrls {
            sigma: 1.0,
            budget: 35,
            lambda: 0.02,
            mu: 0.0,
        };
        let model = fit_fixed_budget_krls(&samples, &cfg).unwrap();
        let (points, targets) = split_points_targets(&samples);
        let batch = krls_fit(&points, &targets, KernelConfig::gaussian(1.0).unwrap(), Some(0.02)).unwrap();
        for q in [0.1, 9.9, 24.2] {
            let a = krls_predict(&model, &[q]).unwrap()[0];
            let b = krls_predict(&batch, &[q]).unwrap()[0];
            assert_relative_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn fixed_budget_respects_budget() {
        let samples = stream_1d(50);
        let cfg = BaselineConfig::FixedBudgetKrls {
            sigma: 1.0,
            budget: 12,
            lambda: 0.01,
            mu: 0.0,
        };
        let model = fit_fixed_budget_krls(&samples, &cfg).unwrap();
        assert_eq!(model.dictionary.len(), 12);
    }

    #[test]
    fn fixed_budget_evicts_duplicate_and_preserves_predictions() {
        // duplicate-point omission oracle: the eviction criterion must pick
        // one of the duplicated points, and min-norm batch solves over the
        // dictionary with and without the duplicate realize the same
        // function
        let kernel = KernelConfig::gaussian(1.0).unwrap();
        let pts = [0.0, 1.0, 2.0, 1.0, 3.5]; // index 3 duplicates index 1
        let mut state = InverseWindow::new(kernel, 1e-9, &[pts[0]], pts[0].cos()).unwrap();
        for &p in &pts[1..] {
            state.grow(&[p], p.cos()).unwrap();
        }
        let weights = state.weights();
        let evict = least_significant(&weights, &state.inverse);
        assert!(evict == 1 || evict == 3, "evicted non-duplicate {evict}");

        let full: Vec<Vec<f64>> = pts.iter().map(|&p| vec![p]).collect();
        let full_t = DMatrix::from_fn(5, 1, |r, _| pts[r].cos());
        let reduced: Vec<Vec<f64>> = pts
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != evict)
            .map(|(_, &p)| vec![p])
            .collect();
        let reduced_t = DMatrix::from_fn(4, 1, |r, _| reduced[r][0].cos());
        // min-norm solves (ridge 0, duplicate makes the Gram exactly
        // singular, so the SVD fallback path resolves it)
        let wf = krls_fit(&full, &full_t, kernel, Some(0.0)).unwrap();
        let wr = krls_fit(&reduced, &reduced_t, kernel, Some(0.0)).unwrap();
        for &q in &pts {
            let a = krls_predict(&wf, &[q]).unwrap()[0];
            let b = krls_predict(&wr, &[q]).unwrap()[0];
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn norma_single_sample_weight_is_target() {
        let cfg = BaselineConfig::Norma {
            sigma: 1.0,
            window: 10,
            eta: 1.0,
            lambda: 0.0,
        };
        let model = fit_norma(&[(vec![0.5], 2.5)], &cfg).unwrap();
        assert_eq!(model.weights[(0, 0)], 2.5);
    }

    #[test]
    fn norma_shrinks_old_weights_geometrically() {
        // place samples far apart so each residual equals its target and
        // the first weight only decays
        let samples: Vec<(Vec<f64>, f64)> =
            (0..5).map(|i| (vec![i as f64 * 100.0], 1.0)).collect();
        let (eta, lambda) = (0.5, 0.2);
        let cfg = BaselineConfig::Norma {
            sigma: 1.0,
            window: 10,
            eta,
            lambda,
        };
        let model = fit_norma(&samples, &cfg).unwrap();
        let shrink: f64 = 1.0 - eta * lambda;
        for age in 0..5 {
            let idx = 4 - age;
            assert_relative_eq!(
                model.weights[(idx, 0)],
                eta * shrink.powi(age as i32),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn norma_truncates_to_window() {
        let samples = stream_1d(30);
        let cfg = BaselineConfig::Norma {
            sigma: 1.0,
            window: 6,
            eta: 0.1,
            lambda: 0.01,
        };
        let model = fit_norma(&samples, &cfg).unwrap();
        assert_eq!(model.dictionary.len(), 6);
        assert_eq!(model.dictionary[5], samples[29].0);
    }

    #[test]
    fn qklms_zero_epsilon_admits_all_distinct() {
        let samples = stream_1d(20);
        let cfg = BaselineConfig::Qklms {
            sigma: 1.0,
            mu: 0.2,
            epsilon_q: 0.0,
        };
        let model = fit_qklms(&samples, &cfg).unwrap();
        assert_eq!(model.dictionary.len(), 20);
    }

    #[test]
    fn qklms_huge_epsilon_merges_everything() {
        let samples = stream_1d(20);
        let cfg = BaselineConfig::Qklms {
            sigma: 1.0,
            mu: 0.2,
            epsilon_q: 1e6,
        };
        let model = fit_qklms(&samples, &cfg).unwrap();
        assert_eq!(model.dictionary.len(), 1);
    }

    #[test]
    fn qklms_tie_breaks_to_lowest_index() {
        // two centers equidistant from the new sample: the update must land
        // on index 0
        let samples = vec![(vec![0.0], 1.0), (vec![2.0], 1.0), (vec![1.0], 5.0)];
        let cfg = BaselineConfig::Qklms {
            sigma: 1.0,
            mu: 0.5,
            epsilon_q: 1.5,
        };
        let model = fit_qklms(&samples, &cfg).unwrap();
        assert_eq!(model.dictionary.len(), 2);
        // index 1's weight is untouched since both later samples merged
        // into index 0
        let w1_initial = 0.5 * (1.0 - 0.5 * (-2.0_f64).exp());
        assert_relative_eq!(model.weights[(1, 0)], w1_initial, max_relative = 1e-12);
    }

    #[test]
    fn nonstill_gram_has_unit_diagonal_and_symmetry() {
        let samples: Vec<(Vec<f64>, f64)> = (0..6)
            .map(|i| (vec![i as f64 * 0.3, i as f64 * 0.5], (i as f64).sin()))
            .collect();
        let cfg = BaselineConfig::NonstillKrls {
            a_scale: 1.0,
            b_scale: 1.0,
        };
        let model = fit_nonstill_krls(&samples, &cfg, None).unwrap();
        // the model predicts through the same covariance; at a dictionary
        // point the cross vector's own entry is C(0,0) = 1
        let k = kernels::eval_kernel(&model.kernel, &samples[2].0, &samples[2].0).unwrap();
        assert_eq!(k, 1.0);
        let kij = kernels::eval_kernel(&model.kernel, &samples[1].0, &samples[4].0).unwrap();
        let kji = kernels::eval_kernel(&model.kernel, &samples[4].0, &samples[1].0).unwrap();
        assert_eq!(kij, kji);
    }

    #[test]
    fn nonstill_rejects_non_2d_samples() {
        let cfg = BaselineConfig::NonstillKrls {
            a_scale: 1.0,
            b_scale: 1.0,
        };
        let samples = vec![(vec![0.0, 0.0, 0.0], 1.0)];
        assert!(fit_nonstill_krls(&samples, &cfg, None).is_err());
    }

    #[test]
    fn shuffle_is_deterministic() {
        let mut a = stream_1d(15);
        let mut b = stream_1d(15);
        shuffle_samples(&mut a, 42);
        shuffle_samples(&mut b, 42);
        assert_eq!(a, b);
        let mut c = stream_1d(15);
        shuffle_samples(&mut c, 43);
        assert_ne!(a, c);
    }

    #[test]
    fn dispatch_rejects_invalid_config() {
        let cfg = BaselineConfig::Qklms {
            sigma: -1.0,
            mu: 0.1,
            epsilon_q: 0.0,
        };
        assert!(fit(&stream_1d(3), &cfg, None).is_err());
    }
}
