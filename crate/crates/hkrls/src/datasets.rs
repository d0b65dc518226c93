//! Grid construction, synthetic generators, per-axis random splits, the 2-D
//! Gaussian pre-filter, and gridded CSV ingestion.
//!
//! Grid CSV format (two axes): line 1 is `axis0\axis1, c1, c2, ...` where
//! the `c_j` are the second-axis coordinates; each following line is
//! `r_i, v_i1, v_i2, ...` with the first-axis coordinate followed by the
//! values of that row. UTF-8, `.` decimal separator, comma delimiter.
//! Datasets with three or more axes store axis 0 down the rows as before,
//! flatten the remaining axes across the columns, and carry the higher axes
//! in a sidecar file at `<path>.axes` with one `axis<k>, c1, c2, ...` line
//! per axis.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// An evenly or unevenly sampled grid dataset: one strictly increasing
/// coordinate axis per dimension plus a value tensor over their Cartesian
/// product.
///
/// Values are stored first-axis-fastest: index `(i0, i1, ..., in)` maps to
/// flat position `i0 + m0*(i1 + m1*(i2 + ...))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDataset {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl GridDataset {
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::EmptyInput("grid axes"));
        }
        for (k, axis) in axes.iter().enumerate() {
            if axis.len() < 2 {
                return Err(Error::AxisTooShort {
                    axis: k,
                    len: axis.len(),
                });
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("axis coordinates"));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "axis {k} is not strictly increasing"
                )));
            }
        }
        let expected: usize = axes.iter().map(Vec::len).product();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid values"));
        }
        Ok(GridDataset { axes, values })
    }

    /// Build a grid by evaluating `f` at every coordinate combination.
    pub fn from_fn<F: FnMut(&[f64]) -> f64>(axes: Vec<Vec<f64>>, mut f: F) -> Result<Self> {
        let lens: Vec<usize> = axes.iter().map(Vec::len).collect();
        let total: usize = lens.iter().product();
        let mut coords = vec![0usize; axes.len()];
        let mut point = vec![0.0; axes.len()];
        let mut values = Vec::with_capacity(total);
        for _ in 0..total {
            for (d, &i) in coords.iter().enumerate() {
                point[d] = axes[d][i];
            }
            values.push(f(&point));
            // advance the multi-index, first axis fastest
            for d in 0..coords.len() {
                coords[d] += 1;
                if coords[d] < lens[d] {
                    break;
                }
                coords[d] = 0;
            }
        }
        GridDataset::new(axes, values)
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn axis_len(&self, k: usize) -> usize {
        self.axes[k].len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, index: &[usize]) -> f64 {
        self.values[self.flat_index(index)]
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.axes.len());
        let mut flat = 0usize;
        for d in (0..index.len()).rev() {
            flat = flat * self.axes[d].len() + index[d];
        }
        flat
    }

    /// Values of a two-axis grid as an `m0 x m1` matrix.
    pub fn values_matrix(&self) -> Result<DMatrix<f64>> {
        if self.axes.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: self.axes.len(),
            });
        }
        Ok(DMatrix::from_column_slice(
            self.axes[0].len(),
            self.axes[1].len(),
            &self.values,
        ))
    }

    /// Replace the values of a two-axis grid from an `m0 x m1` matrix.
    pub fn with_values_matrix(&self, values: &DMatrix<f64>) -> Result<Self> {
        if self.axes.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                actual: self.axes.len(),
            });
        }
        if values.nrows() != self.axes[0].len() || values.ncols() != self.axes[1].len() {
            return Err(Error::DimensionMismatch {
                expected: self.axes[0].len() * self.axes[1].len(),
                actual: values.nrows() * values.ncols(),
            });
        }
        GridDataset::new(self.axes.clone(), values.as_slice().to_vec())
    }

    /// Flatten every grid cell into an (n-dimensional point, value) list in
    /// canonical (first-axis-fastest) order.
    pub fn flatten_samples(&self) -> Vec<(Vec<f64>, f64)> {
        let lens: Vec<usize> = self.axes.iter().map(Vec::len).collect();
        let total = self.values.len();
        let mut coords = vec![0usize; self.axes.len()];
        let mut out = Vec::with_capacity(total);
        for &value in &self.values {
            let point: Vec<f64> = coords
                .iter()
                .enumerate()
                .map(|(d, &i)| self.axes[d][i])
                .collect();
            out.push((point, value));
            for d in 0..coords.len() {
                coords[d] += 1;
                if coords[d] < lens[d] {
                    break;
                }
                coords[d] = 0;
            }
        }
        out
    }
}

/// Evenly spaced axes: axis `k` holds `counts[k]` points from `ranges[k].0`
/// to `ranges[k].1` inclusive.
pub fn make_grid(ranges: &[(f64, f64)], counts: &[usize]) -> Result<Vec<Vec<f64>>> {
    if ranges.len() != counts.len() {
        return Err(Error::DimensionMismatch {
            expected: ranges.len(),
            actual: counts.len(),
        });
    }
    let mut axes = Vec::with_capacity(ranges.len());
    for (k, (&(lo, hi), &m)) in ranges.iter().zip(counts).enumerate() {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "axis {k}: range [{lo}, {hi}] is invalid"
            )));
        }
        if m < 2 {
            return Err(Error::AxisTooShort { axis: k, len: m });
        }
        let step = (hi - lo) / (m - 1) as f64;
        let mut axis: Vec<f64> = (0..m).map(|i| lo + step * i as f64).collect();
        axis[m - 1] = hi;
        axes.push(axis);
    }
    Ok(axes)
}

/// The synthetic two-dimensional field `sin(x) * cos(d/2)` (radians).
pub fn synth_2d(x: f64, d: f64) -> f64 {
    x.sin() * (d / 2.0).cos()
}

/// The synthetic three-dimensional field `cos(x) * sin(d1/2) * sin(d2/3)`
/// (radians).
pub fn synth_3d(x: f64, d1: f64, d2: f64) -> f64 {
    x.cos() * (d1 / 2.0).sin() * (d2 / 3.0).sin()
}

/// Which part of a split to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Validation,
}

/// One axis of a split: either a random partition into train/validation
/// index lists, or the whole axis assigned to both parts (for protocols
/// that split only selected axes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxisSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub split: bool,
}

impl AxisSplit {
    pub fn indices(&self, part: Part) -> &[usize] {
        match part {
            Part::Train => &self.train,
            Part::Validation => &self.validation,
        }
    }
}

/// Per-axis train/validation index lists, produced deterministically from a
/// seed. For split axes the two lists partition the index set and the train
/// list holds `round(fraction * m)` indices; both lists are kept in
/// ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub axes: Vec<AxisSplit>,
    pub seed: u64,
    pub fraction: f64,
}

/// Randomly partition every axis.
pub fn split_axes(axes: &[Vec<f64>], fraction: f64, seed: u64) -> Result<SplitSpec> {
    split_axes_selective(axes, fraction, seed, None)
}

/// Randomly partition the axes selected by `mask` (all axes when `None`);
/// unselected axes contribute every index to both parts.
pub fn split_axes_selective(
    axes: &[Vec<f64>],
    fraction: f64,
    seed: u64,
    mask: Option<&[bool]>,
) -> Result<SplitSpec> {
    if axes.is_empty() {
        return Err(Error::EmptyInput("split axes"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    if let Some(m) = mask {
        if m.len() != axes.len() {
            return Err(Error::DimensionMismatch {
                expected: axes.len(),
                actual: m.len(),
            });
        }
        if m.iter().all(|&s| !s) {
            return Err(Error::InvalidParameter(
                "at least one axis must be split".into(),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(axes.len());
    for (k, axis) in axes.iter().enumerate() {
        let m = axis.len();
        let selected = mask.map_or(true, |ms| ms[k]);
        if !selected {
            let all: Vec<usize> = (0..m).collect();
            out.push(AxisSplit {
                train: all.clone(),
                validation: all,
                split: false,
            });
            continue;
        }
        let n_train = (fraction * m as f64).round() as usize;
        if n_train == 0 || n_train >= m {
            return Err(Error::InvalidParameter(format!(
                "axis {k}: fraction {fraction} of {m} samples leaves an empty part"
            )));
        }
        let mut idx: Vec<usize> = (0..m).collect();
        idx.shuffle(&mut rng);
        let mut train: Vec<usize> = idx[..n_train].to_vec();
        let mut validation: Vec<usize> = idx[n_train..].to_vec();
        train.sort_unstable();
        validation.sort_unstable();
        out.push(AxisSplit {
            train,
            validation,
            split: true,
        });
    }
    Ok(SplitSpec {
        axes: out,
        seed,
        fraction,
    })
}

/// The sub-grid over the selected part's index Cartesian product.
pub fn restrict(data: &GridDataset, split: &SplitSpec, part: Part) -> Result<GridDataset> {
    if split.axes.len() != data.axes().len() {
        return Err(Error::DimensionMismatch {
            expected: data.axes().len(),
            actual: split.axes.len(),
        });
    }
    for (k, ax) in split.axes.iter().enumerate() {
        let m = data.axis_len(k);
        if ax.train.iter().chain(&ax.validation).any(|&i| i >= m) {
            return Err(Error::InvalidParameter(format!(
                "split indices for axis {k} exceed axis length {m}"
            )));
        }
    }
    let sub_axes: Vec<Vec<f64>> = split
        .axes
        .iter()
        .enumerate()
        .map(|(k, ax)| {
            ax.indices(part)
                .iter()
                .map(|&i| data.axes()[k][i])
                .collect()
        })
        .collect();
    let lens: Vec<usize> = sub_axes.iter().map(Vec::len).collect();
    let total: usize = lens.iter().product();
    let mut coords = vec![0usize; lens.len()];
    let mut full_index = vec![0usize; lens.len()];
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        for (d, &i) in coords.iter().enumerate() {
            full_index[d] = split.axes[d].indices(part)[i];
        }
        values.push(data.value_at(&full_index));
        for d in 0..coords.len() {
            coords[d] += 1;
            if coords[d] < lens[d] {
                break;
            }
            coords[d] = 0;
        }
    }
    GridDataset::new(sub_axes, values)
}

/// Smooth a matrix with a normalized sampled-Gaussian kernel of the given
/// variance and side length, replicating edge values at the boundary.
///
/// The kernel sums to one, so constant fields pass through unchanged and the
/// output never leaves the input's value range.
pub fn gaussian_filter_2d(grid: &DMatrix<f64>, variance: f64, size: usize) -> Result<DMatrix<f64>> {
    if grid.nrows() == 0 || grid.ncols() == 0 {
        return Err(Error::EmptyInput("filter grid"));
    }
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "filter variance must be positive, got {variance}"
        )));
    }
    if size < 1 {
        return Err(Error::InvalidParameter("filter size must be >= 1".into()));
    }
    // sample at offsets centered on the kernel: integers for odd sizes,
    // half-integers for even sizes
    let center = (size as f64 - 1.0) / 2.0;
    let mut weights = DMatrix::zeros(size, size);
    let mut sum = 0.0;
    for i in 0..size {
        for j in 0..size {
            let di = i as f64 - center;
            let dj = j as f64 - center;
            let w = (-(di * di + dj * dj) / (2.0 * variance)).exp();
            weights[(i, j)] = w;
            sum += w;
        }
    }
    weights /= sum;

    let (rows, cols) = (grid.nrows(), grid.ncols());
    let anchor = size / 2;
    let mut out = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for i in 0..size {
                for j in 0..size {
                    let rr = (r + i).saturating_sub(anchor).min(rows - 1);
                    let cc = (c + j).saturating_sub(anchor).min(cols - 1);
                    acc += weights[(i, j)] * grid[(rr, cc)];
                }
            }
            out[(r, c)] = acc;
        }
    }
    Ok(out)
}

fn fmt_f64(v: f64) -> String {
    // shortest representation that parses back to the same bits
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// Write a grid dataset in the grid CSV format (plus the `.axes` sidecar
/// when the dataset has three or more axes).
pub fn save_grid_csv(data: &GridDataset, path: &Path) -> Result<()> {
    let m0 = data.axis_len(0);
    let n_axes = data.axes().len();
    let cols: usize = data.axes().iter().skip(1).map(Vec::len).product();
    let mut out = String::new();
    out.push_str("axis0\\axis1");
    if n_axes == 2 {
        for c in data.axes()[1].iter() {
            let _ = write!(out, ", {}", fmt_f64(*c));
        }
    } else {
        for c in 0..cols {
            let _ = write!(out, ", {c}");
        }
    }
    out.push('\n');
    for r in 0..m0 {
        let _ = write!(out, "{}", fmt_f64(data.axes()[0][r]));
        for c in 0..cols {
            let _ = write!(out, ", {}", fmt_f64(data.values()[r + m0 * c]));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    if n_axes > 2 {
        let mut sidecar = String::new();
        for (k, axis) in data.axes().iter().enumerate().skip(1) {
            let _ = write!(sidecar, "axis{k}");
            for c in axis {
                let _ = write!(sidecar, ", {}", fmt_f64(*c));
            }
            sidecar.push('\n');
        }
        std::fs::write(sidecar_path(path), sidecar)?;
    }
    Ok(())
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".axes");
    std::path::PathBuf::from(os)
}

fn parse_cell(cell: &str, line: usize) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| Error::Csv {
        line,
        reason: format!("non-numeric cell '{}'", cell.trim()),
    })
}

/// Read a grid dataset from the grid CSV format. If `<path>.axes` exists the
/// dataset is reconstructed with the sidecar's higher axes; otherwise the
/// header row is taken as the second-axis coordinates.
pub fn load_grid_csv(path: &Path) -> Result<GridDataset> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Csv {
        line: 1,
        reason: "empty file".into(),
    })?;
    let header_cells: Vec<&str> = header.split(',').collect();
    if header_cells.len() < 2 {
        return Err(Error::Csv {
            line: 1,
            reason: "header must name at least one column".into(),
        });
    }
    let n_cols = header_cells.len() - 1;

    let mut axis0 = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n_cols + 1 {
            return Err(Error::Csv {
                line: line_no,
                reason: format!(
                    "ragged row: expected {} cells, found {}",
                    n_cols + 1,
                    cells.len()
                ),
            });
        }
        axis0.push(parse_cell(cells[0], line_no)?);
        let row: Vec<f64> = cells[1..]
            .iter()
            .map(|c| parse_cell(c, line_no))
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    if axis0.len() < 2 {
        return Err(Error::Csv {
            line: 1,
            reason: "grid needs at least two rows".into(),
        });
    }
    if axis0.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Csv {
            line: 1,
            reason: "first-axis coordinates are not strictly increasing".into(),
        });
    }

    let sidecar = sidecar_path(path);
    let mut axes: Vec<Vec<f64>> = vec![axis0];
    if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar)?;
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() < 3 {
                return Err(Error::Csv {
                    line: idx + 1,
                    reason: "sidecar axis needs at least two coordinates".into(),
                });
            }
            let axis: Vec<f64> = cells[1..]
                .iter()
                .map(|c| parse_cell(c, idx + 1))
                .collect::<Result<_>>()?;
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Csv {
                    line: idx + 1,
                    reason: "sidecar axis is not strictly increasing".into(),
                });
            }
            axes.push(axis);
        }
        let expected: usize = axes.iter().skip(1).map(Vec::len).product();
        if expected != n_cols {
            return Err(Error::Csv {
                line: 1,
                reason: format!(
                    "sidecar axes imply {expected} value columns, file has {n_cols}"
                ),
            });
        }
    } else {
        let axis1: Vec<f64> = header_cells[1..]
            .iter()
            .map(|c| parse_cell(c, 1))
            .collect::<Result<_>>()?;
        if axis1.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Csv {
                line: 1,
                reason: "second-axis coordinates are not strictly increasing".into(),
            });
        }
        axes.push(axis1);
    }

    // values arrive row-major (axis0 down the rows); convert to the
    // first-axis-fastest layout
    let m0 = axes[0].len();
    let mut values = vec![0.0; m0 * n_cols];
    for (r, row) in rows.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            values[r + m0 * c] = v;
        }
    }
    GridDataset::new(axes, values)
}
