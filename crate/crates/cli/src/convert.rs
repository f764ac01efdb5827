//! Input formats and drivers for `convert`.
//!
//! All inputs carry `schema_version` and `scale` (the full point list).
//! Matrices are row-major nested `[re, im]` pairs.
//!
//! * `second-order-to-symplectic`: `P` (indices −1..N−1) and `Q` (0..N−1),
//!   laid out as in a problem file (other problem fields are ignored), and
//!   optional initial values `X0`, `X1` at `ρ(a)`, `a` (default `I`).
//! * `sl-to-hamiltonian`: `lo`, `p` (`p_0..p_n`, each a list of scalars
//!   `[re, im]` from index `lo`) and `y` (scalars from `lo`).
//! * `hamiltonian-to-symplectic`: `lo` and `A`, `B`, `C` (matrices from `lo`).

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tsspec::hamiltonian::{
    generate_solution, hamiltonian_check, hamiltonian_to_symplectic, second_order_hamiltonian,
    second_order_to_z_system, sturm_liouville_to_hamiltonian, HamiltonianSystem,
};
use tsspec::problem::{matrix_from_json, matrix_to_json, JsonMatrix, SCHEMA_VERSION};
use tsspec::{CMatrix, Error, GridFunction, IsolatedTimeScale, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    SecondOrderToSymplectic,
    SlToHamiltonian,
    HamiltonianToSymplectic,
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn check_version(found: &str) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::SchemaVersionMismatch {
            found: found.into(),
            expected: SCHEMA_VERSION.into(),
        });
    }
    Ok(())
}

fn scale_from(points: Vec<f64>) -> Result<Arc<IsolatedTimeScale>> {
    IsolatedTimeScale::new(points)
        .map(Arc::new)
        .map_err(|e| Error::Parse(format!("field `scale`: {e}")))
}

fn grid(
    scale: &Arc<IsolatedTimeScale>,
    lo: isize,
    mats: &[JsonMatrix],
    field: &str,
) -> Result<GridFunction> {
    let values = mats
        .iter()
        .enumerate()
        .map(|(i, m)| matrix_from_json(m, &format!("{field}[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::Parse(format!("field `{field}` is empty")));
    }
    let shape = values[0].shape();
    if let Some(i) = values.iter().position(|v| v.shape() != shape) {
        return Err(Error::Parse(format!("field `{field}[{i}]` changes shape")));
    }
    GridFunction::new(scale.clone(), lo, values)
        .map_err(|e| Error::Parse(format!("field `{field}`: {e}")))
}

fn scalar_grid(
    scale: &Arc<IsolatedTimeScale>,
    lo: isize,
    values: &[[f64; 2]],
    field: &str,
) -> Result<GridFunction> {
    let mats: Vec<JsonMatrix> = values.iter().map(|v| vec![vec![*v]]).collect();
    grid(scale, lo, &mats, field)
}

#[derive(Debug, Serialize)]
struct PointMatrix {
    index: isize,
    t: f64,
    matrix: JsonMatrix,
}

fn series(f: &GridFunction) -> Vec<PointMatrix> {
    (f.lo()..=f.hi())
        .map(|k| PointMatrix {
            index: k,
            t: f.scale().t(k),
            matrix: matrix_to_json(f.at(k)),
        })
        .collect()
}

fn residual_list(rs: &[(isize, f64)]) -> Value {
    Value::Array(
        rs.iter()
            .map(|(k, v)| json!({ "index": k, "value": v }))
            .collect(),
    )
}

#[derive(Debug, Deserialize)]
struct SecondOrderInput {
    schema_version: String,
    scale: Vec<f64>,
    #[serde(rename = "P")]
    p: Vec<JsonMatrix>,
    #[serde(rename = "Q")]
    q: Vec<JsonMatrix>,
    #[serde(rename = "X0", default)]
    x0: Option<JsonMatrix>,
    #[serde(rename = "X1", default)]
    x1: Option<JsonMatrix>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SturmLiouvilleInput {
    schema_version: String,
    scale: Vec<f64>,
    lo: isize,
    p: Vec<Vec<[f64; 2]>>,
    y: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HamiltonianInput {
    schema_version: String,
    scale: Vec<f64>,
    lo: isize,
    #[serde(rename = "A")]
    a: Vec<JsonMatrix>,
    #[serde(rename = "B")]
    b: Vec<JsonMatrix>,
    #[serde(rename = "C")]
    c: Vec<JsonMatrix>,
}

/// Parses without converting, so parse failures can be told apart from
/// invariant violations.
pub enum Parsed {
    SecondOrder {
        p: GridFunction,
        q: GridFunction,
        x0: CMatrix,
        x1: CMatrix,
    },
    SturmLiouville {
        coefficients: Vec<GridFunction>,
        y: GridFunction,
    },
    Hamiltonian {
        a: GridFunction,
        b: GridFunction,
        c: GridFunction,
    },
}

pub fn parse_input(mode: Mode, text: &str) -> Result<Parsed> {
    match mode {
        Mode::SecondOrderToSymplectic => {
            let inp: SecondOrderInput = parse(text)?;
            check_version(&inp.schema_version)?;
            let scale = scale_from(inp.scale)?;
            let p = grid(&scale, -1, &inp.p, "P")?;
            let q = grid(&scale, 0, &inp.q, "Q")?;
            let d = p.shape().0;
            let init = |m: &Option<JsonMatrix>, field: &str| match m {
                Some(m) => matrix_from_json(m, field),
                None => Ok(CMatrix::identity(d, d)),
            };
            let (x0, x1) = (init(&inp.x0, "X0")?, init(&inp.x1, "X1")?);
            if x0.nrows() != d || x1.shape() != x0.shape() {
                return Err(Error::Parse(format!(
                    "X0, X1 must both have {d} rows and equal shapes"
                )));
            }
            Ok(Parsed::SecondOrder { p, q, x0, x1 })
        }
        Mode::SlToHamiltonian => {
            let inp: SturmLiouvilleInput = parse(text)?;
            check_version(&inp.schema_version)?;
            let scale = scale_from(inp.scale)?;
            let coefficients = inp
                .p
                .iter()
                .enumerate()
                .map(|(j, vals)| scalar_grid(&scale, inp.lo, vals, &format!("p[{j}]")))
                .collect::<Result<Vec<_>>>()?;
            let y = scalar_grid(&scale, inp.lo, &inp.y, "y")?;
            Ok(Parsed::SturmLiouville { coefficients, y })
        }
        Mode::HamiltonianToSymplectic => {
            let inp: HamiltonianInput = parse(text)?;
            check_version(&inp.schema_version)?;
            let scale = scale_from(inp.scale)?;
            Ok(Parsed::Hamiltonian {
                a: grid(&scale, inp.lo, &inp.a, "A")?,
                b: grid(&scale, inp.lo, &inp.b, "B")?,
                c: grid(&scale, inp.lo, &inp.c, "C")?,
            })
        }
    }
}

fn max_abs_diff(a: &GridFunction, b: &GridFunction) -> f64 {
    let lo = a.lo().max(b.lo());
    let hi = a.hi().min(b.hi());
    let size = (lo..=hi).map(|k| a.at(k).norm()).fold(1.0, f64::max);
    (lo..=hi)
        .map(|k| (a.at(k) - b.at(k)).norm())
        .fold(0.0, f64::max)
        / size
}

/// Runs the conversion; `Ok((result, pass))`, or `Err` on an invariant
/// violation that prevents it.
pub fn run(parsed: Parsed, tol: f64) -> Result<(Value, bool)> {
    match parsed {
        Parsed::SecondOrder { p, q, x0, x1 } => {
            let x = generate_solution(&p, &q, &x0, &x1)?;
            let zs = second_order_to_z_system(&p, &q, &x)?;
            let h = second_order_hamiltonian(&p, &q, tol)?;
            let conv = hamiltonian_to_symplectic(&h)?;
            // Propagating z from its first point reproduces X.
            let z_lo = zs.z.lo();
            let prop = zs.s.propagate(zs.z.at(zs.s.window().0 - 1))?;
            let d = x0.nrows();
            let x_prop = prop.map(|_, z| z.rows(0, d).into_owned())?;
            let propagation = max_abs_diff(&x_prop, &x);
            let block_agreement = {
                let (lo, hi) = zs.s.window();
                (lo..=hi)
                    .filter(|k| conv.system.s.get(*k).is_some())
                    .map(|k| {
                        (zs.s.s.at(k) - conv.system.s.at(k)).norm() / (1.0 + zs.s.s.at(k).norm())
                    })
                    .fold(0.0, f64::max)
            };
            let max_residual = zs.max_residual();
            let symplectic = zs.s.max_symplectic_defect();
            let pass = max_residual <= tol
                && symplectic <= tol
                && propagation <= tol
                && block_agreement <= tol;
            Ok((
                json!({
                    "mode": "second-order-to-symplectic",
                    "window": [zs.s.window().0, zs.s.window().1],
                    "S": series(&zs.s.s),
                    "Z": series(&zs.z),
                    "Z_window_start": z_lo,
                    "X": series(&x),
                    "residuals": residual_list(&zs.residuals),
                    "max_residual": max_residual,
                    "symplectic_defect": symplectic,
                    "propagation_defect": propagation,
                    "hamiltonian_embedding_disagreement": block_agreement,
                }),
                pass,
            ))
        }
        Parsed::SturmLiouville { coefficients, y } => {
            let conv = sturm_liouville_to_hamiltonian(coefficients, &y)?;
            let max_residual = conv.max_residual();
            let scale = conv.my.max_abs().max(1.0);
            let consistency = conv.my_consistency / scale;
            let pass = max_residual <= tol && consistency <= tol;
            let (lo, hi) = conv.frame.relation_window();
            Ok((
                json!({
                    "mode": "sl-to-hamiltonian",
                    "n": conv.frame.n,
                    "window": [lo, hi],
                    "A": series(&conv.system.a),
                    "B": series(&conv.system.b),
                    "C": series(&conv.system.c),
                    "x": series(&conv.x),
                    "u": series(&conv.u),
                    "My": series(&conv.my),
                    "residuals": residual_list(&conv.residuals),
                    "max_residual": max_residual,
                    "my_consistency": consistency,
                }),
                pass,
            ))
        }
        Parsed::Hamiltonian { a, b, c } => {
            let h = HamiltonianSystem::new(a, b, c, tol)?;
            let check = hamiltonian_check(&h.h_blocks(), tol)?;
            if let Some(k) = check.singular_at {
                return Err(Error::Singular(format!("I + μ_ρHM*M at index {k}")));
            }
            let conv = hamiltonian_to_symplectic(&h)?;
            let pass =
                check.holds && conv.symplectic_defect <= tol && conv.formula_disagreement <= tol;
            Ok((
                json!({
                    "mode": "hamiltonian-to-symplectic",
                    "window": [h.window().0, h.window().1],
                    "S": series(&conv.system.s),
                    "hamiltonian_defect": check.hamiltonian_defect,
                    "symplectic_defects": residual_list(&conv.system.symplectic_defects()),
                    "symplectic_defect": conv.symplectic_defect,
                    "formula_disagreement": conv.formula_disagreement,
                }),
                pass,
            ))
        }
    }
}
