//! Dense complex matrix kernels.
//!
//! Everything downstream consumes matrices through the contracts here:
//! Hermitian eigendecomposition with ascending real eigenvalues, full SVD
//! with unitary factors, thresholded rank, orthonormal null spaces and a
//! conditioned linear solve. Norms are Frobenius norms unless stated
//! otherwise.

use nalgebra::{DMatrix, DVector, SymmetricEigen, LU, QR, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default relative threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Reciprocal condition number below which `solve_linear` refuses.
const SINGULAR_RCOND: f64 = 1e-14;

const SVD_MAX_ITER: usize = 10_000;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Builds a matrix from row slices, rejecting ragged input and non-finite entries.
pub fn from_rows(rows: &[Vec<C64>]) -> Result<CMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::InvalidParameter(format!(
            "row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        )));
    }
    let m = CMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    ensure_finite(&m)?;
    Ok(m)
}

/// Builds a real-valued complex matrix from real row slices.
pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(nrows, ncols, |i, j| cr(rows[i][j]))
}

pub fn ensure_finite(m: &CMatrix) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// Real diagonal matrix.
pub fn real_diag(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            cr(values[i])
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `‖A − A*‖` (Frobenius).
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm()
}

/// Largest entry modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn hconcat(blocks: &[&CMatrix]) -> CMatrix {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hconcat: row count mismatch");
        out.view_mut((0, at), (rows, b.ncols())).copy_from(*b);
        at += b.ncols();
    }
    out
}

pub fn vconcat(blocks: &[&CMatrix]) -> CMatrix {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vconcat: column count mismatch");
        out.view_mut((at, 0), (b.nrows(), cols)).copy_from(*b);
        at += b.nrows();
    }
    out
}

pub fn block_diag(blocks: &[&CMatrix]) -> CMatrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Eigenpairs of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns, in eigenvalue order.
    pub eigenvectors: CMatrix,
    /// `‖A − A*‖` of the input before symmetrization.
    pub asymmetry: f64,
}

impl HermitianEigen {
    /// `max_j ‖A v_j − λ_j v_j‖`.
    pub fn max_residual(&self, a: &CMatrix) -> f64 {
        (0..self.eigenvalues.len())
            .map(|j| {
                let v = self.eigenvectors.column(j);
                (a * v - v * cr(self.eigenvalues[j])).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Eigendecomposition of a matrix that is Hermitian up to `tol·‖A‖`.
///
/// The input is replaced by `(A + A*)/2` before solving, so the returned
/// eigenvalues are real by construction.
pub fn hermitian_eigendecompose(a: &CMatrix, tol: f64) -> Result<HermitianEigen> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    ensure_finite(a)?;
    let asymmetry = hermitian_defect(a);
    if asymmetry > tol * a.norm() {
        return Err(Error::NotHermitian { defect: asymmetry });
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(HermitianEigen {
            eigenvalues: Vec::new(),
            eigenvectors: CMatrix::zeros(0, 0),
            asymmetry,
        });
    }
    let sym = (a + a.adjoint()) * cr(0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(Error::ConvergenceFailure("Hermitian eigensolver"))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    Ok(HermitianEigen {
        eigenvalues,
        eigenvectors,
        asymmetry,
    })
}

/// Full singular value decomposition `A = U Σ V*`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// `rows × rows` unitary.
    pub u: CMatrix,
    /// `min(rows, cols)` values, descending.
    pub singular_values: Vec<f64>,
    /// `cols × cols` unitary.
    pub v: CMatrix,
}

impl SvdResult {
    pub fn sigma(&self) -> CMatrix {
        let (m, n) = (self.u.nrows(), self.v.nrows());
        let mut s = CMatrix::zeros(m, n);
        for (i, &sv) in self.singular_values.iter().enumerate() {
            s[(i, i)] = cr(sv);
        }
        s
    }

    pub fn reconstruct(&self) -> CMatrix {
        &self.u * self.sigma() * self.v.adjoint()
    }

    /// Number of singular values above `rel_tol · σ_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        if top == 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .filter(|&&s| s > rel_tol * top)
            .count()
    }

    /// Number of singular values above `rel_tol · max(σ_max, reference)`.
    ///
    /// For a matrix formed as a sum of terms that may cancel, `reference`
    /// is the size of the terms, so that cancellation noise is not counted.
    pub fn rank_against(&self, rel_tol: f64, reference: f64) -> usize {
        let top = self
            .singular_values
            .first()
            .copied()
            .unwrap_or(0.0)
            .max(reference);
        if top == 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .filter(|&&s| s > rel_tol * top)
            .count()
    }
}

/// Extends orthonormal columns `q` (n × k) to an n × n unitary matrix.
fn complete_unitary(q: &CMatrix) -> CMatrix {
    let (n, k) = q.shape();
    if k == n {
        return q.clone();
    }
    let stacked = hconcat(&[q, &identity(n)]);
    let full = QR::new(stacked).q();
    let mut out = CMatrix::zeros(n, n);
    out.view_mut((0, 0), (n, k)).copy_from(q);
    out.view_mut((0, k), (n, n - k))
        .copy_from(&full.view((0, k), (n, n - k)));
    out
}

pub fn svd(a: &CMatrix) -> Result<SvdResult> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("svd of an empty matrix".into()));
    }
    ensure_finite(a)?;
    if m < n {
        // Jacobi works on columns; run it on the tall adjoint instead.
        let t = svd(&a.adjoint())?;
        return Ok(SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    let dec = SVD::try_new(a.clone(), true, true, f64::EPSILON, SVD_MAX_ITER)
        .ok_or(Error::ConvergenceFailure("SVD"))?;
    let v_t = dec.v_t.expect("v_t requested");
    let v0 = complete_unitary(&CMatrix::from_fn(n, v_t.nrows(), |r, c| v_t[(c, r)].conj()));
    let (w, v) = jacobi_polish(a * &v0, v0);
    let norms: Vec<f64> = (0..n).map(|c| w.column(c).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let k = m.min(n);
    let top = norms[order[0]];
    // Left vectors of (numerically) zero singular values are not
    // well-determined; keep the others and complete orthogonally.
    let keep = order
        .iter()
        .take(k)
        .take_while(|&&i| norms[i] > (m.max(n) as f64) * f64::EPSILON * top)
        .count();
    let u_sorted = CMatrix::from_fn(m, keep, |r, c| w[(r, order[c])].unscale(norms[order[c]]));
    let v_sorted = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SvdResult {
        u: complete_unitary(&u_sorted),
        singular_values: order.iter().take(k).map(|&i| norms[i]).collect(),
        v: v_sorted,
    })
}

/// One-sided (Hestenes) Jacobi sweeps making the columns of `w = A v`
/// mutually orthogonal; rotations are accumulated into `v`.
fn jacobi_polish(mut w: CMatrix, mut v: CMatrix) -> (CMatrix, CMatrix) {
    let n = w.ncols();
    for _ in 0..SVD_MAX_ITER.min(60) {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let a = w.column(i).norm_squared();
                let b = w.column(j).norm_squared();
                let c = w.column(i).dotc(&w.column(j));
                let cabs = c.norm();
                if cabs <= f64::EPSILON * (a * b).sqrt() || cabs == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = c.unscale(cabs);
                let zeta = (b - a) / (2.0 * cabs);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut w, &mut v] {
                    for r in 0..mat.nrows() {
                        let (xi, xj) = (mat[(r, i)], mat[(r, j)]);
                        mat[(r, i)] = xi * cs - xj * phase.conj() * sn;
                        mat[(r, j)] = xi * phase * sn + xj * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (w, v)
}

pub fn rank_with_tolerance(a: &CMatrix, rel_tol: f64) -> Result<usize> {
    Ok(svd(a)?.rank(rel_tol))
}

/// Orthonormal basis of `ker A` as columns; `cols − rank` of them.
pub fn null_space_basis(a: &CMatrix, rel_tol: f64) -> Result<CMatrix> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Ok(identity(n));
    }
    let dec = svd(a)?;
    let rank = dec.rank(rel_tol);
    Ok(dec.v.columns(rank, n - rank).into_owned())
}

/// As [`null_space_basis`], with the rank measured against
/// `max(σ_max, reference)` so an all-roundoff matrix has full kernel.
pub fn null_space_basis_against(a: &CMatrix, rel_tol: f64, reference: f64) -> Result<CMatrix> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return Ok(identity(n));
    }
    let dec = svd(a)?;
    let rank = dec.rank_against(rel_tol, reference);
    Ok(dec.v.columns(rank, n - rank).into_owned())
}

/// Reciprocal 2-norm condition number, `σ_min / σ_max`.
pub fn rcond(a: &CMatrix) -> Result<f64> {
    let s = svd(a)?.singular_values;
    let top = s[0];
    Ok(if top == 0.0 {
        0.0
    } else {
        s[s.len() - 1] / top
    })
}

/// Solves `A X = B` by partial-pivot LU, refusing ill-conditioned `A`.
pub fn solve_linear(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if b.nrows() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    if a.nrows() == 0 {
        return Ok(CMatrix::zeros(0, b.ncols()));
    }
    let rc = rcond(a)?;
    if rc <= SINGULAR_RCOND {
        return Err(Error::Singular(format!("reciprocal condition {rc:.3e}")));
    }
    LU::new(a.clone())
        .solve(b)
        .ok_or_else(|| Error::Singular("LU pivot breakdown".into()))
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    solve_linear(a, &identity(a.nrows()))
}

/// Least-squares solution of `A x = b` through the pseudoinverse, with the residual norm.
pub fn least_squares(a: &CMatrix, b: &CMatrix, rel_tol: f64) -> Result<(CMatrix, f64)> {
    let dec = svd(a)?;
    let rank = dec.rank(rel_tol);
    let ut_b = dec.u.columns(0, rank).adjoint() * b;
    let mut scaled = ut_b;
    for i in 0..rank {
        let s = cr(1.0 / dec.singular_values[i]);
        scaled.row_mut(i).iter_mut().for_each(|z| *z *= s);
    }
    let x = dec.v.columns(0, rank) * scaled;
    let residual = (a * &x - b).norm();
    Ok((x, residual))
}
