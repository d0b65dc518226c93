//! Versioned model persistence: a line-oriented text header describing the
//! shapes and kernels, followed by a raw little-endian f64 block holding the
//! axes and the final-level weight matrix (column-major). The binary block
//! makes save/load round trips bit-exact.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::hierarchy::HkrlsModel;
use crate::kernels::KernelConfig;
use crate::{Error, Result};

const MAGIC: &str = "HKRLS-MODEL v1";

/// Write a fitted model to `path`.
pub fn save_model(model: &HkrlsModel, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "{MAGIC}")?;
    writeln!(out, "axes {}", model.axes().len())?;
    for axis in model.axes() {
        writeln!(out, "axis-len {}", axis.len())?;
    }
    for kernel in model.kernels() {
        match kernel {
            KernelConfig::Gaussian { sigma } => writeln!(out, "kernel gaussian {sigma}")?,
            KernelConfig::SpaceTimeNonstationary { a_scale, b_scale } => {
                writeln!(out, "kernel space-time {a_scale} {b_scale}")?
            }
        }
    }
    let jitters: Vec<String> = model.jitter().iter().map(|j| format!("{j}")).collect();
    writeln!(out, "jitter {}", jitters.join(" "))?;
    let times: Vec<String> = model.level_times().iter().map(|t| format!("{t}")).collect();
    writeln!(out, "level-times {}", times.join(" "))?;
    writeln!(
        out,
        "top-weight {} {}",
        model.top_weight().nrows(),
        model.top_weight().ncols()
    )?;
    writeln!(out, "data")?;
    for axis in model.axes() {
        for &v in axis {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for &v in model.top_weight().as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

fn parse_usize(token: Option<&str>, what: &str) -> Result<usize> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad(format!("missing or invalid {what}")))
}

fn parse_f64(token: Option<&str>, what: &str) -> Result<f64> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad(format!("missing or invalid {what}")))
}

/// Read a model previously written by [`save_model`].
pub fn load_model(path: &Path) -> Result<HkrlsModel> {
    let file = std::fs::File::open(path)?;
    let mut reader = BufReader::new(file);

    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(bad(format!(
            "unrecognized header '{}'; expected '{MAGIC}'",
            line.trim_end()
        )));
    }

    line.clear();
    reader.read_line(&mut line)?;
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("axes") {
        return Err(bad("expected 'axes <count>'"));
    }
    let n_axes = parse_usize(tokens.next(), "axis count")?;
    if n_axes == 0 {
        return Err(bad("model must have at least one axis"));
    }

    let mut axis_lens = Vec::with_capacity(n_axes);
    for _ in 0..n_axes {
        line.clear();
        reader.read_line(&mut line)?;
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("axis-len") {
            return Err(bad("expected 'axis-len <n>'"));
        }
        axis_lens.push(parse_usize(tokens.next(), "axis length")?);
    }

    let mut kernels = Vec::with_capacity(n_axes);
    for _ in 0..n_axes {
        line.clear();
        reader.read_line(&mut line)?;
        let mut tokens = line.split_whitespace();
        if tokens.next() != Some("kernel") {
            return Err(bad("expected 'kernel <family> ...'"));
        }
        match tokens.next() {
            Some("gaussian") => {
                let sigma = parse_f64(tokens.next(), "gaussian bandwidth")?;
                kernels.push(KernelConfig::gaussian(sigma)?);
            }
            Some("space-time") => {
                let a = parse_f64(tokens.next(), "time scaling")?;
                let b = parse_f64(tokens.next(), "space scaling")?;
                kernels.push(KernelConfig::space_time(a, b)?);
            }
            other => return Err(bad(format!("unknown kernel family {other:?}"))),
        }
    }

    line.clear();
    reader.read_line(&mut line)?;
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("jitter") {
        return Err(bad("expected 'jitter <values...>'"));
    }
    let jitter: Vec<f64> = tokens
        .map(|t| t.parse().map_err(|_| bad("invalid jitter value")))
        .collect::<Result<_>>()?;

    line.clear();
    reader.read_line(&mut line)?;
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("level-times") {
        return Err(bad("expected 'level-times <values...>'"));
    }
    let level_times: Vec<f64> = tokens
        .map(|t| t.parse().map_err(|_| bad("invalid level time")))
        .collect::<Result<_>>()?;

    line.clear();
    reader.read_line(&mut line)?;
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("top-weight") {
        return Err(bad("expected 'top-weight <rows> <cols>'"));
    }
    let rows = parse_usize(tokens.next(), "weight rows")?;
    let cols = parse_usize(tokens.next(), "weight cols")?;

    line.clear();
    reader.read_line(&mut line)?;
    if line.trim_end() != "data" {
        return Err(bad("expected 'data' marker"));
    }

    let scalar_count: usize = axis_lens.iter().sum::<usize>() + rows * cols;
    let mut buf = vec![0u8; scalar_count * 8];
    reader
        .read_exact(&mut buf)
        .map_err(|_| bad("binary block truncated"))?;
    let mut trailing = [0u8; 1];
    if reader.read(&mut trailing)? != 0 {
        return Err(bad("trailing bytes after binary block"));
    }

    let mut scalars = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut axes = Vec::with_capacity(n_axes);
    for &len in &axis_lens {
        axes.push((0..len).map(|_| scalars.next().unwrap()).collect::<Vec<f64>>());
    }
    let weights: Vec<f64> = scalars.collect();
    let top_weight = DMatrix::from_column_slice(rows, cols, &weights);

    HkrlsModel::from_parts(axes, kernels, top_weight, jitter, level_times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{make_grid, synth_2d, GridDataset};
    use crate::hierarchy::{fit_general, predict_general};

    fn fitted_model() -> HkrlsModel {
        let axes = make_grid(&[(0.0, 5.0), (0.0, 4.0)], &[8, 7]).unwrap();
        let data = GridDataset::from_fn(axes, |p| synth_2d(p[0], p[1])).unwrap();
        fit_general(
            &data,
            &[
                KernelConfig::gaussian(1.0).unwrap(),
                KernelConfig::gaussian(0.7).unwrap(),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_preserves_predictions_bitwise() {
        let dir = std::env::temp_dir().join("hkrls_model_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.hkm");
        let model = fitted_model();
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(model.top_weight().as_slice(), loaded.top_weight().as_slice());
        assert_eq!(model.axes(), loaded.axes());
        for &q in &[[0.37, 0.81], [3.3, 2.0], [4.99, 3.99]] {
            let a = predict_general(&model, &q).unwrap();
            let b = predict_general(&loaded, &q).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let dir = std::env::temp_dir().join("hkrls_model_corrupt");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.hkm");
        std::fs::write(&path, b"NOT-A-MODEL\n").unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn truncated_binary_block_is_rejected() {
        let dir = std::env::temp_dir().join("hkrls_model_trunc");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trunc.hkm");
        let model = fitted_model();
        save_model(&model, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelFormat(_))));
    }
}
