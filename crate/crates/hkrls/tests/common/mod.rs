//! Shared helpers for the integration suites: the flat product-kernel
//! oracle the hierarchy is checked against, and grid evaluation utilities.

use hkrls::datasets::{GridDataset, Part, SplitSpec};
use hkrls::kernels::{self, KernelConfig};
use hkrls::solver::{krls_predict, KrlsModel};
use nalgebra::{DMatrix, DVector};

/// Flat kernel least-squares over every grid sample with the per-axis
/// kernel product, solved by dense LU. This route shares no code with the
/// hierarchy's per-axis factorizations.
pub struct ProductKernelOracle {
    points: Vec<Vec<f64>>,
    weights: DVector<f64>,
    kernels: Vec<KernelConfig>,
}

impl ProductKernelOracle {
    pub fn fit(data: &GridDataset, kernels: &[KernelConfig]) -> Self {
        let samples = data.flatten_samples();
        let points: Vec<Vec<f64>> = samples.iter().map(|(p, _)| p.clone()).collect();
        let m = points.len();
        let mut gram = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                gram[(i, j)] = Self::product_kernel(kernels, &points[i], &points[j]);
            }
        }
        let targets = DVector::from_iterator(m, samples.iter().map(|(_, v)| *v));
        let weights = gram
            .lu()
            .solve(&targets)
            .expect("oracle grid must be well conditioned");
        ProductKernelOracle {
            points,
            weights,
            kernels: kernels.to_vec(),
        }
    }

    pub fn product_kernel(kernels: &[KernelConfig], a: &[f64], b: &[f64]) -> f64 {
        kernels
            .iter()
            .enumerate()
            .map(|(d, k)| kernels::eval_kernel(k, &[a[d]], &[b[d]]).unwrap())
            .product()
    }

    pub fn predict(&self, q: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(self.weights.iter())
            .map(|(p, w)| w * Self::product_kernel(&self.kernels, p, q))
            .sum()
    }
}

/// Validation cells of a split: every coordinate combination of the
/// validation indices, paired with the recorded values.
pub fn validation_cells(data: &GridDataset, split: &SplitSpec) -> (Vec<Vec<f64>>, Vec<f64>) {
    let idx_lists: Vec<&[usize]> = split
        .axes
        .iter()
        .map(|ax| ax.indices(Part::Validation))
        .collect();
    let lens: Vec<usize> = idx_lists.iter().map(|l| l.len()).collect();
    let total: usize = lens.iter().product();
    let mut coords = vec![0usize; lens.len()];
    let mut points = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total);
    let mut full = vec![0usize; lens.len()];
    for _ in 0..total {
        for (d, &c) in coords.iter().enumerate() {
            full[d] = idx_lists[d][c];
        }
        points.push(
            full.iter()
                .enumerate()
                .map(|(d, &i)| data.axes()[d][i])
                .collect::<Vec<f64>>(),
        );
        values.push(data.value_at(&full));
        for d in 0..coords.len() {
            coords[d] += 1;
            if coords[d] < lens[d] {
                break;
            }
            coords[d] = 0;
        }
    }
    (points, values)
}

/// Per-axis validation coordinates of a split.
pub fn validation_axes(data: &GridDataset, split: &SplitSpec) -> Vec<Vec<f64>> {
    split
        .axes
        .iter()
        .enumerate()
        .map(|(d, ax)| {
            ax.indices(Part::Validation)
                .iter()
                .map(|&i| data.axes()[d][i])
                .collect()
        })
        .collect()
}

/// Largest absolute value of the training cells.
pub fn train_max(data: &GridDataset, split: &SplitSpec) -> f64 {
    let idx_lists: Vec<&[usize]> = split.axes.iter().map(|ax| ax.indices(Part::Train)).collect();
    let lens: Vec<usize> = idx_lists.iter().map(|l| l.len()).collect();
    let total: usize = lens.iter().product();
    let mut coords = vec![0usize; lens.len()];
    let mut full = vec![0usize; lens.len()];
    let mut max = 0.0_f64;
    for _ in 0..total {
        for (d, &c) in coords.iter().enumerate() {
            full[d] = idx_lists[d][c];
        }
        max = max.max(data.value_at(&full).abs());
        for d in 0..coords.len() {
            coords[d] += 1;
            if coords[d] < lens[d] {
                break;
            }
            coords[d] = 0;
        }
    }
    max
}

/// Max absolute prediction error of a flat model over query points.
pub fn flat_max_error(model: &KrlsModel, points: &[Vec<f64>], actual: &[f64]) -> f64 {
    points
        .iter()
        .zip(actual)
        .map(|(p, a)| (krls_predict(model, p).unwrap()[0] - a).abs())
        .fold(0.0, f64::max)
}
