//! On-disk dataset layout.
//!
//! A dataset is a directory with `x_train.bin`, `y_train.bin` and, when a test
//! split exists, `x_test.bin` and `y_test.bin`, plus a `dataset.json` sidecar.
//! Each `.bin` file is a 32-byte header (magic `LOCODMAT`, rows, cols, layout
//! code, all little-endian `u64` after the magic) followed by the entries as
//! little-endian `f64` in column-major order.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{SimSpec, SimulatedDataset};
use crate::linalg::DenseMatrix;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"LOCODMAT";
const COLUMN_MAJOR: u64 = 0;
const SIDECAR: &str = "dataset.json";

#[derive(Serialize, Deserialize)]
struct Sidecar {
    spec: SimSpec,
    beta_star: Vec<f64>,
    signal_std: f64,
    noise_scale: f64,
    permutation: Vec<usize>,
    feature_block: Vec<usize>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), message: message.into() }
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut header = Vec::with_capacity(32);
    header.extend_from_slice(MAGIC);
    for v in [m.rows() as u64, m.cols() as u64, COLUMN_MAJOR] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&header).map_err(io_err(path))?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 32];
    r.read_exact(&mut header)
        .map_err(|_| format_err(path, "file too short for a matrix header"))?;
    if &header[..8] != MAGIC {
        return Err(format_err(path, "bad magic"));
    }
    let word = |i: usize| u64::from_le_bytes(header[8 * i..8 * i + 8].try_into().unwrap());
    let (rows, cols, layout) = (word(1) as usize, word(2) as usize, word(3));
    if layout != COLUMN_MAJOR {
        return Err(format_err(path, format!("unsupported layout code {layout}")));
    }
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| format_err(path, "shape overflows"))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err(path))?;
    if bytes.len() != len * 8 {
        return Err(format_err(
            path,
            format!("expected {} bytes of data for {rows}x{cols}, found {}", len * 8, bytes.len()),
        ));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseMatrix::new(rows, cols, data).map_err(|e| format_err(path, e.to_string()))
}

fn file(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn write_dataset(dir: &Path, ds: &SimulatedDataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_matrix(&file(dir, "x_train.bin"), &ds.x_train)?;
    write_matrix(&file(dir, "y_train.bin"), &DenseMatrix::column_vector(&ds.y_train)?)?;
    if let Some(x) = &ds.x_test {
        write_matrix(&file(dir, "x_test.bin"), x)?;
        write_matrix(&file(dir, "y_test.bin"), &DenseMatrix::column_vector(&ds.y_test)?)?;
    }
    let sidecar = Sidecar {
        spec: ds.spec.clone(),
        beta_star: ds.beta_star.clone(),
        signal_std: ds.signal_std,
        noise_scale: ds.noise_scale,
        permutation: ds.permutation.clone(),
        feature_block: ds.feature_block.clone(),
    };
    let path = file(dir, SIDECAR);
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&path, text).map_err(io_err(&path))
}

pub fn read_dataset(dir: &Path) -> Result<SimulatedDataset> {
    let path = file(dir, SIDECAR);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let sc: Sidecar = serde_json::from_str(&text).map_err(|e| format_err(&path, e.to_string()))?;
    let x_train = read_matrix(&file(dir, "x_train.bin"))?;
    let y_path = file(dir, "y_train.bin");
    let y_train = read_matrix(&y_path)?.into_vec();
    if y_train.len() != x_train.rows() || sc.beta_star.len() != x_train.cols() {
        return Err(format_err(&y_path, "dataset files disagree on shape"));
    }
    let xt_path = file(dir, "x_test.bin");
    let (x_test, y_test) = if xt_path.exists() {
        let x = read_matrix(&xt_path)?;
        let y = read_matrix(&file(dir, "y_test.bin"))?.into_vec();
        if y.len() != x.rows() || x.cols() != x_train.cols() {
            return Err(format_err(&xt_path, "test split disagrees on shape"));
        }
        (Some(x), y)
    } else {
        (None, Vec::new())
    };
    Ok(SimulatedDataset {
        spec: sc.spec,
        x_train,
        y_train,
        x_test,
        y_test,
        beta_star: sc.beta_star,
        signal_std: sc.signal_std,
        noise_scale: sc.noise_scale,
        permutation: sc.permutation,
        feature_block: sc.feature_block,
    })
}
