//! Versioned JSON schemas for POVMs, matrices, probe ensembles and count
//! tables. Complex matrices serialize as nested arrays of [re, im] pairs;
//! floats round-trip exactly through serde_json's shortest-representation
//! encoding, so identical inputs produce byte-identical files.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::operator::{DensityMatrix, HermitianOperator};
use crate::povm::Povm;
use crate::tomography::{CountsTable, ProbeEnsemble};
use crate::{C64, CMatrix, Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// [re, im] pair rows; row-major.
pub type ComplexRows = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_rows(m: &CMatrix) -> ComplexRows {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

pub fn rows_to_matrix(rows: &ComplexRows) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("matrix rows must be non-empty and square"));
    }
    Ok(CMatrix::from_fn(n, n, |r, c| C64::new(rows[r][c][0], rows[r][c][1])))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MatrixFile {
    pub schema_version: u32,
    pub dim: usize,
    pub matrix: ComplexRows,
}

impl MatrixFile {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self { schema_version: SCHEMA_VERSION, dim: m.nrows(), matrix: matrix_to_rows(m) }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let m = rows_to_matrix(&self.matrix)?;
        if m.nrows() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: m.nrows() });
        }
        Ok(m)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PovmFile {
    pub schema_version: u32,
    pub dim: usize,
    pub elements: Vec<ComplexRows>,
}

impl PovmFile {
    pub fn from_povm(p: &Povm) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dim: p.dim(),
            elements: p.elements().iter().map(|e| matrix_to_rows(e.matrix())).collect(),
        }
    }

    pub fn to_povm(&self) -> Result<Povm> {
        let elements = self
            .elements
            .iter()
            .map(|rows| {
                let m = rows_to_matrix(rows)?;
                if m.nrows() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, got: m.nrows() });
                }
                HermitianOperator::new(m)
            })
            .collect::<Result<Vec<_>>>()?;
        Povm::new(elements)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProbeEnsembleFile {
    pub schema_version: u32,
    pub dim: usize,
    pub labels: Vec<String>,
    pub states: Vec<ComplexRows>,
}

impl ProbeEnsembleFile {
    pub fn from_ensemble(p: &ProbeEnsemble) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dim: p.dim(),
            labels: p.labels.clone(),
            states: p.states.iter().map(|s| matrix_to_rows(s.matrix())).collect(),
        }
    }

    pub fn to_ensemble(&self) -> Result<ProbeEnsemble> {
        let states = self
            .states
            .iter()
            .map(|rows| {
                let m = rows_to_matrix(rows)?;
                if m.nrows() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, got: m.nrows() });
                }
                DensityMatrix::new(HermitianOperator::new(m)?)
            })
            .collect::<Result<Vec<_>>>()?;
        ProbeEnsemble::new(states, self.labels.clone())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CountsFile {
    pub schema_version: u32,
    pub shots_per_state: u64,
    /// L rows of M counts.
    pub counts: Vec<Vec<u64>>,
}

impl CountsFile {
    pub fn from_counts(c: &CountsTable) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            shots_per_state: c.shots_per_state,
            counts: (0..c.counts.nrows())
                .map(|l| c.counts.row(l).iter().copied().collect())
                .collect(),
        }
    }

    pub fn to_counts(&self) -> Result<CountsTable> {
        let rows = self.counts.len();
        let cols = self.counts.first().map_or(0, |r| r.len());
        if rows == 0 || cols == 0 || self.counts.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("counts must form a non-empty rectangular table"));
        }
        let m = DMatrix::from_fn(rows, cols, |l, c| self.counts[l][c]);
        CountsTable::new(m, self.shots_per_state)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
