//! Error metrics, wall-clock timing, and the training-cost model.
//!
//! The cost model counts Gram-solve work the way the hierarchy's accounting
//! does: the hierarchic cost is `sum_i (prod_{k>i} m_k) * m_i^2` and the
//! flat cost is `(prod_k m_k)^2`. These are exact integer models of solve
//! dominance, not FLOP counts.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Max/avg absolute error plus the max error normalized by the largest
/// training magnitude (absent when that magnitude is zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub max_abs_error: f64,
    pub avg_abs_error: f64,
    pub normalized_error: Option<f64>,
}

/// Compare predictions against actual values. `train_max` is the largest
/// absolute training value, used for normalization.
pub fn error_metrics(predicted: &[f64], actual: &[f64], train_max: f64) -> Result<ErrorSummary> {
    if predicted.is_empty() {
        return Err(Error::EmptyInput("error metrics"));
    }
    if predicted.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    let mut max = 0.0_f64;
    let mut sum = 0.0_f64;
    for (p, a) in predicted.iter().zip(actual) {
        let e = (p - a).abs();
        max = max.max(e);
        sum += e;
    }
    let avg = sum / predicted.len() as f64;
    let normalized = if train_max != 0.0 { Some(max / train_max) } else { None };
    Ok(ErrorSummary {
        max_abs_error: max,
        avg_abs_error: avg,
        normalized_error: normalized,
    })
}

/// Hierarchic training cost `sum_i (prod_{k>i} m_k) * m_i^2` in exact
/// integer arithmetic.
pub fn hkrls_cost(axis_counts: &[u64]) -> Result<u128> {
    check_counts(axis_counts)?;
    let mut total: u128 = 0;
    for i in 0..axis_counts.len() {
        let mut term = (axis_counts[i] as u128)
            .checked_mul(axis_counts[i] as u128)
            .ok_or(Error::Overflow("hierarchic cost"))?;
        for &m in &axis_counts[i + 1..] {
            term = term
                .checked_mul(m as u128)
                .ok_or(Error::Overflow("hierarchic cost"))?;
        }
        total = total
            .checked_add(term)
            .ok_or(Error::Overflow("hierarchic cost"))?;
    }
    Ok(total)
}

/// Flat training cost `(prod_k m_k)^2` in exact integer arithmetic.
pub fn krls_cost(axis_counts: &[u64]) -> Result<u128> {
    check_counts(axis_counts)?;
    let mut prod: u128 = 1;
    for &m in axis_counts {
        prod = prod
            .checked_mul(m as u128)
            .ok_or(Error::Overflow("flat cost"))?;
    }
    prod.checked_mul(prod).ok_or(Error::Overflow("flat cost"))
}

fn check_counts(axis_counts: &[u64]) -> Result<()> {
    if axis_counts.is_empty() {
        return Err(Error::EmptyInput("axis counts"));
    }
    if axis_counts.iter().any(|&m| m == 0) {
        return Err(Error::InvalidParameter(
            "axis counts must be at least 1".into(),
        ));
    }
    Ok(())
}

/// One checked configuration of the dominance scan.
#[derive(Debug, Clone)]
pub struct DominanceViolation {
    pub axis_counts: Vec<u64>,
    pub hierarchic: u128,
    pub flat: u128,
}

/// Result of [`cost_dominance_check`].
#[derive(Debug, Clone)]
pub struct DominanceReport {
    pub configurations_checked: usize,
    pub violations: Vec<DominanceViolation>,
}

impl DominanceReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verify that the hierarchic cost stays strictly below the flat cost:
/// exhaustively for every equal-count configuration with `m in [2, m_max]`
/// and `n in [1, n_max]` extra axes, plus 1000 seeded random unequal
/// configurations with every count at least 2.
pub fn cost_dominance_check(n_max: usize, m_max: u64) -> Result<DominanceReport> {
    if n_max < 1 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    if m_max < 2 {
        return Err(Error::InvalidParameter("m_max must be at least 2".into()));
    }
    let mut checked = 0usize;
    let mut violations = Vec::new();
    let record = |counts: &[u64], checked: &mut usize, violations: &mut Vec<DominanceViolation>| -> Result<()> {
        let a = hkrls_cost(counts)?;
        let b = krls_cost(counts)?;
        *checked += 1;
        if a >= b {
            violations.push(DominanceViolation {
                axis_counts: counts.to_vec(),
                hierarchic: a,
                flat: b,
            });
        }
        Ok(())
    };
    for n in 1..=n_max {
        for m in 2..=m_max {
            let counts = vec![m; n + 1];
            record(&counts, &mut checked, &mut violations)?;
        }
    }
    // the equal-count proof does not cover unequal counts; scan those
    // empirically with a fixed seed
    let mut rng = ChaCha8Rng::seed_from_u64(0x4b52_4c53);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=n_max);
        let counts: Vec<u64> = (0..n + 1).map(|_| rng.gen_range(2..=m_max.max(3))).collect();
        record(&counts, &mut checked, &mut violations)?;
    }
    Ok(DominanceReport {
        configurations_checked: checked,
        violations,
    })
}

/// Run a closure under a monotonic wall clock.
pub fn timed<T, F: FnOnce() -> T>(f: F) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// One benchmark row: training time plus validation errors for a method.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub method: String,
    pub train_seconds: f64,
    pub max_abs_error: f64,
    pub avg_abs_error: f64,
    pub normalized_error: Option<f64>,
    pub config_echo: String,
    pub sample_counts: Vec<usize>,
    pub seed: u64,
}

impl BenchReport {
    pub fn new(
        method: impl Into<String>,
        train_seconds: f64,
        errors: ErrorSummary,
        config_echo: impl Into<String>,
        sample_counts: Vec<usize>,
        seed: u64,
    ) -> Self {
        BenchReport {
            method: method.into(),
            train_seconds,
            max_abs_error: errors.max_abs_error,
            avg_abs_error: errors.avg_abs_error,
            normalized_error: errors.normalized_error,
            config_echo: config_echo.into(),
            sample_counts,
            seed,
        }
    }

    pub fn csv_header() -> &'static str {
        "method,train_seconds,max_error,avg_error,normalized_error,train_counts,seed,config"
    }

    pub fn csv_row(&self) -> String {
        let counts = self
            .sample_counts
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("x");
        format!(
            "{},{:.6},{},{},{},{},{},{}",
            self.method,
            self.train_seconds,
            fmt(self.max_abs_error),
            fmt(self.avg_abs_error),
            self.normalized_error.map_or(String::from(""), fmt),
            counts,
            self.seed,
            self.config_echo
        )
    }

    pub fn markdown_header() -> &'static str {
        "| Method | Training Time (s) | Maximum Validation Error | Average Validation Error |\n|---|---|---|---|"
    }

    pub fn markdown_row(&self) -> String {
        format!(
            "| {} | {:.4} | {:.6} | {:.6} |",
            self.method, self.train_seconds, self.max_abs_error, self.avg_abs_error
        )
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identical_arrays_give_zero_errors() {
        let s = error_metrics(&[1.0, 2.0], &[1.0, 2.0], 5.0).unwrap();
        assert_eq!(s.max_abs_error, 0.0);
        assert_eq!(s.avg_abs_error, 0.0);
        assert_eq!(s.normalized_error, Some(0.0));
    }

    #[test]
    fn residual_arithmetic() {
        let s = error_metrics(&[1.0, 0.0], &[0.0, 3.0], 1.0).unwrap();
        assert_eq!(s.max_abs_error, 3.0);
        assert_eq!(s.avg_abs_error, 2.0);
    }

    #[test]
    fn normalized_error_matches_reported_case() {
        // max error 3.11 over training max 25 gives 0.1244
        let s = error_metrics(&[3.11], &[0.0], 25.0).unwrap();
        assert_relative_eq!(s.normalized_error.unwrap(), 0.1244, max_relative = 1e-12);
    }

    #[test]
    fn zero_train_max_reports_absent() {
        let s = error_metrics(&[1.0], &[0.5], 0.0).unwrap();
        assert_eq!(s.normalized_error, None);
        assert!(s.max_abs_error >= 0.0 && s.avg_abs_error >= 0.0);
    }

    #[test]
    fn empty_input_errors() {
        assert!(error_metrics(&[], &[], 1.0).is_err());
    }

    #[test]
    fn cost_small_cases() {
        assert_eq!(hkrls_cost(&[2, 2]).unwrap(), 12);
        assert_eq!(krls_cost(&[2, 2]).unwrap(), 16);
        assert_eq!(hkrls_cost(&[2, 2, 2]).unwrap(), 28);
        assert_eq!(krls_cost(&[2, 2, 2]).unwrap(), 64);
    }

    #[test]
    fn cost_paper_2d_case() {
        assert_eq!(hkrls_cost(&[116, 120]).unwrap(), 120 * 116 * 116 + 120 * 120);
        assert_eq!(krls_cost(&[116, 120]).unwrap(), 13_920u128 * 13_920);
        assert_eq!(krls_cost(&[116, 120]).unwrap(), 193_766_400);
    }

    #[test]
    fn cost_overflow_is_detected() {
        assert!(matches!(
            krls_cost(&[u64::MAX, u64::MAX, u64::MAX]),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn dominance_base_case() {
        assert!(hkrls_cost(&[2, 2]).unwrap() < krls_cost(&[2, 2]).unwrap());
    }

    #[test]
    fn dominance_scan_is_clean() {
        let report = cost_dominance_check(4, 10).unwrap();
        assert!(report.holds(), "violations: {:?}", report.violations);
        // 9 equal-m configs per n, 4 values of n, plus the 1000 random draws
        assert_eq!(report.configurations_checked, 4 * 9 + 1000);
    }

    #[test]
    fn hierarchic_cost_approaches_leading_term() {
        // at large equal counts the level-0 term dominates within 2%
        for n in 1..=3usize {
            let counts = vec![200u64; n + 1];
            let total = hkrls_cost(&counts).unwrap() as f64;
            let leading = 200f64.powi(n as i32) * 200f64 * 200f64;
            let ratio = total / leading;
            assert!(
                (ratio - 1.0).abs() < 0.02,
                "n={n}: leading-term ratio {ratio}"
            );
        }
    }

    #[test]
    fn timed_noop_is_fast_and_nonnegative() {
        let (value, secs) = timed(|| 21 * 2);
        assert_eq!(value, 42);
        assert!(secs >= 0.0);
        assert!(secs < 1e-3);
    }

    #[test]
    fn timed_composes_additively() {
        // spin for a fixed wall-clock duration so additivity is inherent;
        // min-of-5 suppresses scheduler preemption spikes
        fn spin(ms: u64) {
            let start = Instant::now();
            while start.elapsed().as_millis() < ms as u128 {
                std::hint::spin_loop();
            }
        }
        fn min_time<F: Fn()>(f: F) -> f64 {
            (0..5).map(|_| timed(&f).1).fold(f64::INFINITY, f64::min)
        }
        let t1 = min_time(|| spin(30));
        let t2 = min_time(|| spin(30));
        let t12 = min_time(|| {
            spin(30);
            spin(30);
        });
        let sum = t1 + t2;
        assert!(
            (t12 - sum).abs() <= 0.05 * sum.max(t12),
            "composed {t12} vs parts {sum}"
        );
    }

    #[test]
    fn report_rows_have_table_column_order() {
        let errors = error_metrics(&[1.0], &[0.5], 2.0).unwrap();
        let r = BenchReport::new("hkrls", 0.25, errors, "sigma=1", vec![10, 12], 7);
        assert!(BenchReport::csv_header().starts_with("method,train_seconds,max_error"));
        let row = r.csv_row();
        assert!(row.starts_with("hkrls,0.250000,0.5,"));
        assert!(r.markdown_row().starts_with("| hkrls | 0.2500 | 0.500000 |"));
    }
}
