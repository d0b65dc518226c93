//! Kernel functions, Gram matrices, and cross-kernel vectors.
//!
//! Every fit and predict path in the crate goes through these functions.
//! Two kernel families are supported: the Gaussian kernel
//! `k(z, z') = exp(-||z - z'||^2 / (2 sigma^2))` and the nonstationary
//! space-time covariance
//! `C(u, h) = (a^2 u^2 + 1)^(-1/2) * exp(-b^2 h^2 / (a^2 u^2 + 1))`
//! over a (time lag, space lag) pair.
//!
//! All functions here are pure and free of shared state; they are safe to
//! call concurrently.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Kernel family and its parameters.
///
/// `sigma` is the Gaussian bandwidth (the `sigma` in
/// `exp(-||z - z'||^2 / (2 sigma^2))`), in coordinate units. The space-time
/// family carries the dimensionless time and space scalings instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelConfig {
    Gaussian { sigma: f64 },
    SpaceTimeNonstationary { a_scale: f64, b_scale: f64 },
}

impl KernelConfig {
    /// Gaussian kernel with bandwidth `sigma > 0`.
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gaussian bandwidth must be a positive finite real, got {sigma}"
            )));
        }
        Ok(KernelConfig::Gaussian { sigma })
    }

    /// Nonstationary space-time covariance with time scaling `a_scale > 0`
    /// and space scaling `b_scale > 0`.
    pub fn space_time(a_scale: f64, b_scale: f64) -> Result<Self> {
        if !(a_scale > 0.0) || !a_scale.is_finite() || !(b_scale > 0.0) || !b_scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "space-time scalings must be positive finite reals, got a={a_scale}, b={b_scale}"
            )));
        }
        Ok(KernelConfig::SpaceTimeNonstationary { a_scale, b_scale })
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            KernelConfig::Gaussian { .. } => "gaussian",
            KernelConfig::SpaceTimeNonstationary { .. } => "space-time-nonstationary",
        }
    }
}

/// A symmetric kernel matrix over one point set.
///
/// Symmetry holds by construction (each off-diagonal pair is written from a
/// single evaluation). For Mercer kernels the matrix is positive
/// semi-definite up to floating-point accumulation; that property is checked
/// by tests with tolerance `1e-10 * m`, not enforced at runtime.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
}

impl GramMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn point_count(&self) -> usize {
        self.entries.nrows()
    }

    /// Wrap an externally assembled symmetric kernel matrix.
    ///
    /// Used by baselines that build their Gram from precomputed lag pairs.
    pub fn from_symmetric(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                actual: entries.ncols(),
            });
        }
        if entries.is_empty() {
            return Err(Error::EmptyInput("gram matrix"));
        }
        Ok(GramMatrix { entries })
    }
}

fn check_point(z: &[f64], what: &'static str) -> Result<()> {
    if z.is_empty() {
        return Err(Error::EmptyInput(what));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// Evaluate the kernel at a pair of coordinate vectors.
///
/// For the space-time family the inputs must be two-dimensional and ordered
/// (space, time); the pair is reduced to absolute lags before evaluating the
/// covariance.
pub fn eval_kernel(cfg: &KernelConfig, z: &[f64], z2: &[f64]) -> Result<f64> {
    check_point(z, "kernel input")?;
    check_point(z2, "kernel input")?;
    if z.len() != z2.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            actual: z2.len(),
        });
    }
    match cfg {
        KernelConfig::Gaussian { sigma } => {
            let sq: f64 = z.iter().zip(z2).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok((-sq / (2.0 * sigma * sigma)).exp())
        }
        KernelConfig::SpaceTimeNonstationary { .. } => {
            if z.len() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    actual: z.len(),
                });
            }
            let h = (z[0] - z2[0]).abs();
            let u = (z[1] - z2[1]).abs();
            nonstill_covariance(cfg, u, h)
        }
    }
}

/// The nonstationary space-time covariance `C(u, h)` at time lag `u` and
/// space lag `h`.
pub fn nonstill_covariance(cfg: &KernelConfig, u: f64, h: f64) -> Result<f64> {
    let (a, b) = match cfg {
        KernelConfig::SpaceTimeNonstationary { a_scale, b_scale } => (*a_scale, *b_scale),
        KernelConfig::Gaussian { .. } => {
            return Err(Error::WrongKernelFamily {
                expected: "space-time-nonstationary",
            })
        }
    };
    if !u.is_finite() || !h.is_finite() {
        return Err(Error::NonFinite("covariance lag"));
    }
    let den = a * a * u * u + 1.0;
    Ok(den.powf(-0.5) * (-(b * b * h * h) / den).exp())
}

/// Assemble the Gram matrix `K[i, j] = k(points[i], points[j])`.
pub fn gram(cfg: &KernelConfig, points: &[Vec<f64>]) -> Result<GramMatrix> {
    if points.is_empty() {
        return Err(Error::EmptyInput("gram point set"));
    }
    let dim = points[0].len();
    for p in points {
        check_point(p, "gram point")?;
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.len(),
            });
        }
    }
    let m = points.len();
    let mut entries = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = eval_kernel(cfg, &points[i], &points[j])?;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(GramMatrix { entries })
}

/// Kernel evaluations of one query against every training point:
/// entry `i` is `k(train_points[i], query)`.
pub fn cross_kernel_vector(
    cfg: &KernelConfig,
    train_points: &[Vec<f64>],
    query: &[f64],
) -> Result<DVector<f64>> {
    if train_points.is_empty() {
        return Err(Error::EmptyInput("cross-kernel training set"));
    }
    let mut out = DVector::zeros(train_points.len());
    for (i, p) in train_points.iter().enumerate() {
        out[i] = eval_kernel(cfg, p, query)?;
    }
    Ok(out)
}

/// Gram matrix over a single coordinate axis (one-dimensional points).
pub(crate) fn gram_axis(cfg: &KernelConfig, axis: &[f64]) -> Result<GramMatrix> {
    if axis.is_empty() {
        return Err(Error::EmptyInput("gram axis"));
    }
    let m = axis.len();
    let mut entries = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = eval_kernel(cfg, &[axis[i]], &[axis[j]])?;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(GramMatrix { entries })
}

/// Cross-kernel matrix between a training axis and a list of query
/// coordinates; column `q` holds the cross-kernel vector of query `q`.
pub(crate) fn cross_axis(cfg: &KernelConfig, axis: &[f64], queries: &[f64]) -> Result<DMatrix<f64>> {
    if axis.is_empty() {
        return Err(Error::EmptyInput("cross-kernel axis"));
    }
    let mut out = DMatrix::zeros(axis.len(), queries.len());
    for (q, &qv) in queries.iter().enumerate() {
        for (i, &t) in axis.iter().enumerate() {
            out[(i, q)] = eval_kernel(cfg, &[t], &[qv])?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;
    use proptest::prelude::*;

    fn gaussian(sigma: f64) -> KernelConfig {
        KernelConfig::gaussian(sigma).unwrap()
    }

    #[test]
    fn identical_arguments_give_one() {
        let k = eval_kernel(&gaussian(1.0), &[0.3, -2.0], &[0.3, -2.0]).unwrap();
        assert_eq!(k, 1.0);
    }

    #[test]
    fn direct_formula_values() {
        // ||z - z2||^2 = 2 at sigma 1, and ||z - z2||^2 = 8 at sigma 2,
        // both evaluate to e^-1.
        let k1 = eval_kernel(&gaussian(1.0), &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_relative_eq!(k1, (-1.0_f64).exp(), max_relative = 1e-15);
        let k2 = eval_kernel(&gaussian(2.0), &[2.0, 2.0], &[0.0, 0.0]).unwrap();
        assert_relative_eq!(k2, (-1.0_f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(k1, 0.3678794, max_relative = 1e-6);
    }

    #[test]
    fn rejects_dimension_mismatch_and_non_finite() {
        assert!(matches!(
            eval_kernel(&gaussian(1.0), &[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            eval_kernel(&gaussian(1.0), &[f64::NAN], &[0.0]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn nonstill_zero_lag_is_one() {
        let cfg = KernelConfig::space_time(1.0, 1.0).unwrap();
        assert_eq!(nonstill_covariance(&cfg, 0.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn nonstill_unit_lags() {
        let cfg = KernelConfig::space_time(1.0, 1.0).unwrap();
        let c = nonstill_covariance(&cfg, 1.0, 1.0).unwrap();
        let expected = (1.0 / 2.0_f64.sqrt()) * (-0.5_f64).exp();
        assert_relative_eq!(c, expected, max_relative = 1e-15);
        assert_relative_eq!(c, 0.4288819, max_relative = 1e-6);
    }

    #[test]
    fn nonstill_decays_monotonically_in_time_lag() {
        let cfg = KernelConfig::space_time(1.0, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for step in 0..60 {
            let u = step as f64 * 5.0;
            let c = nonstill_covariance(&cfg, u, 0.7).unwrap();
            assert!(c > 0.0 && c <= 1.0);
            assert!(c < prev || step == 0);
            prev = c;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn nonstill_rejects_gaussian_family() {
        assert!(matches!(
            nonstill_covariance(&gaussian(1.0), 0.0, 0.0),
            Err(Error::WrongKernelFamily { .. })
        ));
    }

    #[test]
    fn gram_single_point_is_unit() {
        let g = gram(&gaussian(1.0), &[vec![3.0]]).unwrap();
        assert_eq!(g.point_count(), 1);
        assert_eq!(g.entries()[(0, 0)], 1.0);
    }

    #[test]
    fn gram_duplicate_points_rank_one() {
        let g = gram(&gaussian(1.0), &[vec![2.0, 2.0], vec![2.0, 2.0]]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(g.entries()[(i, j)], 1.0);
            }
        }
        let eig = SymmetricEigen::new(g.entries().clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // rank 1: one eigenvalue at 2, one at 0
        assert!(ev[0].abs() < 1e-14);
        assert_relative_eq!(ev[1], 2.0, max_relative = 1e-14);
    }

    #[test]
    fn gram_empty_point_list_errors() {
        assert!(matches!(gram(&gaussian(1.0), &[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn gram_psd_by_eigendecomposition() {
        // Eigenvalue oracle: assemble the Gram over 5 fixed distinct points
        // and check the smallest eigenvalue against -1e-10 * m.
        let pts: Vec<Vec<f64>> = vec![
            vec![0.13, -1.2],
            vec![2.4, 0.77],
            vec![-0.9, 1.5],
            vec![1.1, 1.1],
            vec![-2.2, -0.4],
        ];
        let g = gram(&gaussian(1.0), &pts).unwrap();
        let eig = SymmetricEigen::new(g.entries().clone());
        let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -5e-10, "smallest eigenvalue {min} below tolerance");
    }

    #[test]
    fn cross_kernel_matches_direct_formula() {
        let train = vec![vec![0.0], vec![1.0], vec![2.0]];
        let v = cross_kernel_vector(&gaussian(1.0), &train, &[0.0]).unwrap();
        assert_eq!(v[0], 1.0);
        assert_relative_eq!(v[1], (-0.5_f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(v[2], (-2.0_f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn cross_kernel_empty_train_errors() {
        assert!(matches!(
            cross_kernel_vector(&gaussian(1.0), &[], &[0.0]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn gram_agrees_with_eval_kernel_exhaustively() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.7, (i * i) as f64 * 0.1]).collect();
        let cfg = gaussian(0.9);
        let g = gram(&cfg, &pts).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                assert_eq!(g.entries()[(i, j)], eval_kernel(&cfg, &pts[i], &pts[j]).unwrap());
            }
        }
    }

    #[test]
    fn cross_kernel_reproduces_gram_columns() {
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.5]).collect();
        let cfg = gaussian(1.3);
        let g = gram(&cfg, &pts).unwrap();
        for j in 0..pts.len() {
            let col = cross_kernel_vector(&cfg, &pts, &pts[j]).unwrap();
            for i in 0..pts.len() {
                assert_eq!(col[i], g.entries()[(i, j)]);
            }
        }
    }

    proptest! {
        #[test]
        fn gaussian_in_unit_interval(a in -5.0..5.0f64, b in -5.0..5.0f64, s in 0.3..5.0f64) {
            // ranges chosen so the exponent stays above the f64 underflow
            // threshold and the open lower bound is observable
            let k = eval_kernel(&gaussian(s), &[a], &[b]).unwrap();
            prop_assert!(k > 0.0 && k <= 1.0);
        }

        #[test]
        fn gaussian_translation_invariant(
            a in -10.0..10.0f64,
            b in -10.0..10.0f64,
            c in -10.0..10.0f64,
            s in 0.2..3.0f64,
        ) {
            let cfg = gaussian(s);
            let k0 = eval_kernel(&cfg, &[a], &[b]).unwrap();
            let k1 = eval_kernel(&cfg, &[a + c], &[b + c]).unwrap();
            // shifted differences agree up to the rounding of (a+c)-(b+c)
            prop_assert!((k0 - k1).abs() <= 1e-11 * k0.max(1e-300));
        }

        #[test]
        fn nonstill_is_even_in_lags(u in -20.0..20.0f64, h in -20.0..20.0f64) {
            let cfg = KernelConfig::space_time(1.0, 1.0).unwrap();
            let c1 = nonstill_covariance(&cfg, u.abs(), h.abs()).unwrap();
            let c2 = nonstill_covariance(&cfg, u, h).unwrap();
            prop_assert_eq!(c1, c2);
            prop_assert!(c2 > 0.0 && c2 <= 1.0);
        }
    }
}
