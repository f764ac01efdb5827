//! JSON problem files.
//!
//! ```json
//! {
//!   "schema_version": "1.0",
//!   "d": 1,
//!   "scale": [-1.0, 0.0, 1.0, 2.0],
//!   "P": [[[[1.0, 0.0]]], ...],
//!   "Q": [...], "omega": [...],
//!   "R": [[[1.0, 0.0], [0.0, 0.0]], ...], "S": [...]
//! }
//! ```
//!
//! Complex entries are `[re, im]`; matrices are row-major nested arrays;
//! `P` holds `N + 1` matrices for `ρ(a), …, b`, `Q` and `omega` hold `N`
//! matrices for `a, …, b`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SpectralProblem;
use crate::error::{Error, Result};
use crate::matrixkit::{CMatrix, C64};
use crate::timescale::IsolatedTimeScale;

pub const SCHEMA_VERSION: &str = "1.0";

/// Row-major nested `[re, im]` pairs.
pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

pub fn matrix_from_json(rows: &JsonMatrix, field: &str) -> Result<CMatrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "field `{field}`: row {i} has {} entries, expected {ncols}",
            rows[i].len()
        )));
    }
    let m = CMatrix::from_fn(rows.len(), ncols, |i, j| {
        C64::new(rows[i][j][0], rows[i][j][1])
    });
    crate::matrixkit::ensure_finite(&m)
        .map_err(|e| Error::Parse(format!("field `{field}`: {e}")))?;
    Ok(m)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    schema_version: String,
    d: usize,
    scale: Vec<f64>,
    #[serde(rename = "P")]
    p: Vec<JsonMatrix>,
    #[serde(rename = "Q")]
    q: Vec<JsonMatrix>,
    omega: Vec<JsonMatrix>,
    #[serde(rename = "R")]
    r: JsonMatrix,
    #[serde(rename = "S")]
    s: JsonMatrix,
}

fn matrices(list: &[JsonMatrix], field: &str) -> Result<Vec<CMatrix>> {
    list.iter()
        .enumerate()
        .map(|(i, m)| matrix_from_json(m, &format!("{field}[{i}]")))
        .collect()
}

pub fn problem_to_json(p: &SpectralProblem) -> String {
    let file = ProblemFile {
        schema_version: SCHEMA_VERSION.into(),
        d: p.d(),
        scale: p.scale().points().to_vec(),
        p: p.p_all().iter().map(matrix_to_json).collect(),
        q: p.q_all().iter().map(matrix_to_json).collect(),
        omega: p.omega_all().iter().map(matrix_to_json).collect(),
        r: matrix_to_json(p.r()),
        s: matrix_to_json(p.s()),
    };
    serde_json::to_string_pretty(&file).expect("problem serialization is infallible")
}

pub fn problem_from_json(text: &str) -> Result<SpectralProblem> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersionMismatch {
            found: file.schema_version,
            expected: SCHEMA_VERSION.into(),
        });
    }
    let scale = IsolatedTimeScale::new(file.scale)
        .map_err(|e| Error::Parse(format!("field `scale`: {e}")))?;
    SpectralProblem::new(
        scale,
        file.d,
        matrices(&file.p, "P")?,
        matrices(&file.q, "Q")?,
        matrices(&file.omega, "omega")?,
        matrix_from_json(&file.r, "R")?,
        matrix_from_json(&file.s, "S")?,
    )
    .map_err(|e| match e {
        Error::InvalidParameter(msg) => Error::Parse(msg),
        other => other,
    })
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<SpectralProblem> {
    problem_from_json(&fs::read_to_string(path)?)
}

pub fn save_problem(p: &SpectralProblem, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, problem_to_json(p))?;
    Ok(())
}
