//! Sparse-triplet CSV interchange (`i,j,re,im`, 0-based, zeros omitted) with
//! a JSON metadata companion describing the grading.

use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{GradedOperator, GradedSpace, Parity};
use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorMetadata {
    pub n_plus: usize,
    pub n_minus: usize,
    pub parity: Parity,
    pub hermitian: bool,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    i: usize,
    j: usize,
    re: f64,
    im: f64,
}

pub fn write_matrix_csv<W: Write>(writer: W, matrix: &Array2<C64>) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    out.write_record(["i", "j", "re", "im"])
        .map_err(csv_error)?;
    for ((i, j), z) in matrix.indexed_iter() {
        if z.re != 0.0 || z.im != 0.0 {
            out.serialize(Entry {
                i,
                j,
                re: z.re,
                im: z.im,
            })
            .map_err(csv_error)?;
        }
    }
    out.flush().map_err(|e| Error::Parse(e.to_string()))
}

/// Reads a `dim × dim` matrix; entries not listed are zero.
pub fn read_matrix_csv<R: Read>(reader: R, dim: usize) -> Result<Array2<C64>> {
    let mut input = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = input.headers().map_err(csv_error)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["i", "j", "re", "im"] {
        return Err(Error::Parse(format!("unexpected header {headers:?}")));
    }
    let mut matrix = Array2::zeros((dim, dim));
    for record in input.deserialize::<Entry>() {
        let e = record.map_err(csv_error)?;
        if e.i >= dim || e.j >= dim {
            return Err(Error::Parse(format!(
                "entry ({}, {}) outside {dim}x{dim}",
                e.i, e.j
            )));
        }
        matrix[[e.i, e.j]] = C64::new(e.re, e.im);
    }
    Ok(matrix)
}

fn csv_error(err: csv::Error) -> Error {
    Error::Parse(err.to_string())
}

impl GradedOperator {
    pub fn metadata(&self) -> OperatorMetadata {
        OperatorMetadata {
            n_plus: self.space.n_plus(),
            n_minus: self.space.n_minus(),
            parity: self.parity,
            hermitian: self.hermitian,
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_matrix_csv(writer, &self.matrix)
    }

    /// Rebuild an operator from its CSV triplets and metadata; the declared
    /// parity and hermiticity are re-validated.
    pub fn read_csv<R: Read>(reader: R, metadata: &OperatorMetadata) -> Result<Self> {
        let space = GradedSpace::new(metadata.n_plus, metadata.n_minus)?;
        let matrix = read_matrix_csv(reader, space.dim())?;
        if metadata.hermitian {
            GradedOperator::hermitian(space, matrix, metadata.parity)
        } else {
            GradedOperator::general(space, matrix, metadata.parity)
        }
    }
}
