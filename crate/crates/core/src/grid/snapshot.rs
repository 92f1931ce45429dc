//! Binary field snapshots: `"SPFL"`, format version (u32), `N` (u32), kind
//! tag (u8), then little-endian `f64` node data, x fastest.

use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use super::{Field, Grid, MetricField, ScalarField, Spinor, SpinorField, SymTensorField, VectorField};
use crate::error::{Error, Result};
use crate::spin::Configuration;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"SPFL";
pub const SNAPSHOT_VERSION: u32 = 1;

const KIND_SCALAR: u8 = 1;
const KIND_VECTOR: u8 = 2;
const KIND_SYM_TENSOR: u8 = 3;
const KIND_SPINOR: u8 = 4;
const KIND_CONFIGURATION: u8 = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot {
    Scalar(ScalarField),
    Vector(VectorField),
    /// Stored as the six components `xx, xy, xz, yy, yz, zz`.
    SymTensor(SymTensorField),
    /// Stored as `(re, im)` pairs of both components.
    Spinor(SpinorField),
    /// Metric (six components) followed by spinor (four reals) per node.
    Configuration(Configuration),
}

impl Snapshot {
    fn kind(&self) -> u8 {
        match self {
            Snapshot::Scalar(_) => KIND_SCALAR,
            Snapshot::Vector(_) => KIND_VECTOR,
            Snapshot::SymTensor(_) => KIND_SYM_TENSOR,
            Snapshot::Spinor(_) => KIND_SPINOR,
            Snapshot::Configuration(_) => KIND_CONFIGURATION,
        }
    }

    fn grid(&self) -> Grid {
        match self {
            Snapshot::Scalar(f) => f.grid(),
            Snapshot::Vector(f) => f.grid(),
            Snapshot::SymTensor(f) => f.grid(),
            Snapshot::Spinor(f) => f.grid(),
            Snapshot::Configuration(c) => c.grid(),
        }
    }
}

fn push_sym(out: &mut Vec<f64>, m: &Matrix3<f64>) {
    out.extend_from_slice(&[m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 1)], m[(1, 2)], m[(2, 2)]]);
}

fn push_spinor(out: &mut Vec<f64>, p: &Spinor) {
    out.extend_from_slice(&[p[0].re, p[0].im, p[1].re, p[1].im]);
}

fn sym_from(v: &[f64]) -> Matrix3<f64> {
    Matrix3::new(v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5])
}

fn spinor_from(v: &[f64]) -> Spinor {
    Spinor::new(Complex64::new(v[0], v[1]), Complex64::new(v[2], v[3]))
}

pub fn write_snapshot<W: Write>(mut w: W, snap: &Snapshot) -> Result<()> {
    let grid = snap.grid();
    let mut values = Vec::new();
    match snap {
        Snapshot::Scalar(f) => values.extend(f.iter().copied()),
        Snapshot::Vector(f) => f.iter().for_each(|v| values.extend(v.iter().copied())),
        Snapshot::SymTensor(f) => f.iter().for_each(|m| push_sym(&mut values, m)),
        Snapshot::Spinor(f) => f.iter().for_each(|p| push_spinor(&mut values, p)),
        Snapshot::Configuration(c) => {
            for idx in 0..grid.len() {
                push_sym(&mut values, c.metric().at(idx));
                push_spinor(&mut values, &c.spinor()[idx]);
            }
        }
    }
    let mut bytes = Vec::with_capacity(13 + 8 * values.len());
    bytes.extend_from_slice(SNAPSHOT_MAGIC);
    bytes.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(grid.n_per_axis() as u32).to_le_bytes());
    bytes.push(snap.kind());
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Snapshot> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 13 || &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(Error::Snapshot("missing SPFL header".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!("unsupported format version {version}")));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let grid = Grid::new(n).map_err(|e| Error::Snapshot(e.to_string()))?;
    let kind = bytes[12];
    let per_node = match kind {
        KIND_SCALAR => 1,
        KIND_VECTOR => 3,
        KIND_SYM_TENSOR => 6,
        KIND_SPINOR => 4,
        KIND_CONFIGURATION => 10,
        other => return Err(Error::Snapshot(format!("unknown field kind {other}"))),
    };
    let body = &bytes[13..];
    if body.len() != 8 * per_node * grid.len() {
        return Err(Error::Snapshot(format!(
            "expected {} data bytes for N = {n}, found {}",
            8 * per_node * grid.len(),
            body.len()
        )));
    }
    let values: Vec<f64> =
        body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let node = |idx: usize| &values[idx * per_node..(idx + 1) * per_node];
    Ok(match kind {
        KIND_SCALAR => Snapshot::Scalar(Field::from_fn(grid, |i| node(i)[0])),
        KIND_VECTOR => Snapshot::Vector(Field::from_fn(grid, |i| Vector3::from_column_slice(node(i)))),
        KIND_SYM_TENSOR => Snapshot::SymTensor(Field::from_fn(grid, |i| sym_from(node(i)))),
        KIND_SPINOR => Snapshot::Spinor(Field::from_fn(grid, |i| spinor_from(node(i)))),
        _ => {
            let metric = MetricField::new(Field::from_fn(grid, |i| sym_from(node(i))))
                .map_err(|e| Error::Snapshot(e.to_string()))?;
            let spinor = Field::from_fn(grid, |i| spinor_from(&node(i)[6..]));
            Snapshot::Configuration(
                Configuration::new(metric, spinor).map_err(|e| Error::Snapshot(e.to_string()))?,
            )
        }
    })
}
