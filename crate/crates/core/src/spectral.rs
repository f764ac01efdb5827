//! Eigenpairs of `L`, eigenfunction expansions, the spectral resolution and
//! dual orthogonality, plus an independent pencil oracle.

use serde::Serialize;

use crate::boundary::{build_admissible_space, AdmissibleSpace};
use crate::error::{Error, Result};
use crate::matrixkit::{
    block_diag, cr, hermitian_defect, hermitian_eigendecompose, inverse, null_space_basis,
    null_space_basis_against, solve_linear, vconcat, CMatrix, CVector, C64, DEFAULT_RANK_TOL,
};
use crate::operator::{build_operator_matrix, difference_operator, OperatorMatrix};
use crate::problem::{check_self_adjoint_bc, SpectralProblem, DEFAULT_TOL};
use crate::timescale::GridFunction;

/// Eigenvalues closer than `1e−8·(1+|λ|)` share an eigenspace.
pub const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SpectralResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// On `[ρ(a), σ(b)]`, orthonormal in the weighted inner product.
    pub eigenfunctions: Vec<GridFunction>,
    /// Eigenvectors in the coordinates of `space.basis`.
    pub coefficients: CMatrix,
    /// `max_{t∈[a,b]} ‖ω(t)(ℓx(t) − λx(t))‖` per pair.
    pub residuals: Vec<f64>,
    /// The same, divided by the largest magnitude of the terms entering it.
    pub relative_residuals: Vec<f64>,
    /// `‖A − A*‖ / ‖A‖` before symmetrization.
    pub asymmetry: f64,
    pub r: usize,
    pub m: usize,
    pub space: AdmissibleSpace,
    pub operator: OperatorMatrix,
}

impl SpectralResult {
    /// Stacked eigenfunctions, one per column.
    pub fn eigenfunction_matrix(&self) -> CMatrix {
        &self.space.basis * &self.coefficients
    }
}

pub fn solve_spectrum(p: &SpectralProblem) -> Result<SpectralResult> {
    solve_spectrum_with_tol(p, DEFAULT_TOL)
}

/// The unit factor that makes the largest-magnitude entry real and positive.
fn phase_factor(v: &CVector) -> C64 {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        // Near-ties go to the earliest index, so rounding cannot flip the choice.
        if z.norm() > best_abs * (1.0 + 1e-9) {
            best = i;
            best_abs = z.norm();
        }
    }
    if best_abs > 0.0 {
        (v[best] / cr(best_abs)).conj()
    } else {
        cr(1.0)
    }
}

pub fn solve_spectrum_with_tol(p: &SpectralProblem, tol: f64) -> Result<SpectralResult> {
    let (sa, defect) = check_self_adjoint_bc(p.r(), p.s(), tol)?;
    if !sa {
        return Err(Error::NotSelfAdjoint { defect });
    }
    let space = build_admissible_space(p, tol)?;
    let operator = build_operator_matrix(p, &space, tol)?;
    let m = space.m;
    let anorm = operator.a.norm();
    let asymmetry = if anorm > 0.0 {
        operator.hermiticity_defect / anorm
    } else {
        0.0
    };
    let eig = hermitian_eigendecompose(&operator.a, tol.max(1e-10))?;
    let mut coefficients = eig.eigenvectors;
    let full = &space.basis * &coefficients;
    for j in 0..m {
        let phase = phase_factor(&full.column(j).into_owned());
        let mut cj = coefficients.column_mut(j);
        cj *= phase;
    }

    let t = difference_operator(p);
    let full = &space.basis * &coefficients;
    let d = p.d();
    let mut eigenfunctions = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    let mut relative_residuals = Vec::with_capacity(m);
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = full.column(j).into_owned();
        let tv = &t * &v;
        let mut worst: f64 = 0.0;
        let mut size: f64 = 0.0;
        for k in 0..=p.b() {
            let xk = v.rows(p.col(k), d).into_owned();
            let wx = p.omega(k) * &xk * cr(lambda);
            let lhs = tv.rows(k as usize * d, d).into_owned();
            let res = (&lhs - &wx).norm();
            size = size.max(lhs.norm() + wx.norm() + p.p_tilde(k).norm() * xk.norm());
            worst = worst.max(res);
        }
        residuals.push(worst);
        relative_residuals.push(if size > 0.0 { worst / size } else { worst });
        eigenfunctions.push(space.function(p, &v));
    }

    Ok(SpectralResult {
        eigenvalues: eig.eigenvalues,
        eigenfunctions,
        coefficients,
        residuals,
        relative_residuals,
        asymmetry,
        r: space.decomposition.r,
        m,
        space,
        operator,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub pencil_dimension: usize,
    /// Smallest eigenvalue of the weighted Gram matrix `B'`.
    pub gram_min_eigenvalue: f64,
    /// `‖A' − A'*‖ / ‖A'‖`.
    pub asymmetry: f64,
}

/// Eigenvalues from the full pencil restricted to an unweighted orthonormal
/// basis of the admissible space.
///
/// The `λ`-free combinations are found directly: a row `c` of the first and
/// last equations carries no `λ` on the boundary set exactly when
/// `c*(x(a); −x(b))` vanishes for every `x` satisfying the boundary
/// conditions. No part of the `Γ` machinery is used.
pub fn brute_force_oracle(p: &SpectralProblem) -> Result<OracleResult> {
    let d = p.d();
    let b = p.b();
    let bc = p.boundary_rows();
    let bc_null = null_space_basis(&bc, DEFAULT_RANK_TOL)?;

    // (x(a); −x(b)) as a linear map on stacked vectors.
    let mut select = CMatrix::zeros(2 * d, p.full_len());
    for i in 0..d {
        select[(i, p.col(0) + i)] = cr(1.0);
        select[(d + i, p.col(b) + i)] = cr(-1.0);
    }
    // Entries are O(1) (orthonormal basis, unit selection), so rank is absolute.
    let lambda_free =
        null_space_basis_against(&(&select * &bc_null).adjoint(), DEFAULT_RANK_TOL, 1.0)?;

    let t = difference_operator(p);
    let mut ends = CMatrix::zeros(2 * d, p.full_len());
    ends.rows_mut(0, d).copy_from(&t.rows(0, d));
    ends.rows_mut(d, d).copy_from(&(-t.rows(b as usize * d, d)));
    let omega_inv = block_diag(&[&inverse(p.omega(0))?, &inverse(p.omega(b))?]);
    let extra = lambda_free.adjoint() * omega_inv * ends;

    let constraints = vconcat(&[&bc, &extra]);
    let basis = null_space_basis(&constraints, DEFAULT_RANK_TOL)?;
    let m = basis.ncols();

    // ⟨Tx, y⟩ with the ω-free stencil placed at [a, b] and weighted by μ_ρ.
    let s = p.scale();
    let mut placed = CMatrix::zeros(p.full_len(), p.full_len());
    for k in 0..=b {
        let rows = t.rows(k as usize * d, d) * cr(s.mu_rho(k));
        placed.rows_mut(p.col(k), d).copy_from(&rows);
    }
    let a_raw = basis.adjoint() * placed * &basis;
    let anorm = a_raw.norm();
    let asymmetry = if anorm > 0.0 {
        hermitian_defect(&a_raw) / anorm
    } else {
        0.0
    };
    let a = (&a_raw + a_raw.adjoint()) * cr(0.5);
    let w = crate::operator::weight_matrix(p);
    let gram = basis.adjoint() * w * &basis;
    let gram = (&gram + gram.adjoint()) * cr(0.5);
    let gram_min_eigenvalue = hermitian_eigendecompose(&gram, 1e-10)?
        .eigenvalues
        .first()
        .copied()
        .unwrap_or(f64::INFINITY);
    if m == 0 {
        return Ok(OracleResult {
            eigenvalues: vec![],
            pencil_dimension: 0,
            gram_min_eigenvalue,
            asymmetry,
        });
    }
    let chol = nalgebra::Cholesky::new(gram).ok_or(Error::ToleranceFailure {
        what: "pencil Gram matrix positive definiteness",
        residual: gram_min_eigenvalue,
        tol: 0.0,
    })?;
    let l = chol.l();
    // C = L⁻¹ A L^{−*}
    let left = solve_linear(&l, &a)?;
    let c = solve_linear(&l, &left.adjoint())?.adjoint();
    let c = (&c + c.adjoint()) * cr(0.5);
    let eig = hermitian_eigendecompose(&c, 1e-8)?;
    Ok(OracleResult {
        eigenvalues: eig.eigenvalues,
        pencil_dimension: m,
        gram_min_eigenvalue,
        asymmetry,
    })
}

fn stacked_full(p: &SpectralProblem, x: &GridFunction) -> Result<CVector> {
    Ok(x.restrict(-1, p.b() + 1)?.stacked())
}

/// `c_j = ⟨x, x_j⟩` for an admissible `x`.
pub fn expand(
    p: &SpectralProblem,
    result: &SpectralResult,
    x: &GridFunction,
    tol: f64,
) -> Result<Vec<C64>> {
    let v = stacked_full(p, x)?;
    let residual = result.space.membership_residual(&v);
    if residual > tol {
        return Err(Error::NotAdmissible { residual });
    }
    let coeffs = result.eigenfunction_matrix().adjoint() * result.space.weight() * v;
    Ok(coeffs.iter().copied().collect())
}

/// `Σ c_j x_j` on the full window.
pub fn reconstruct(p: &SpectralProblem, result: &SpectralResult, coeffs: &[C64]) -> GridFunction {
    let c = CVector::from_column_slice(coeffs);
    result
        .space
        .function(p, &(result.eigenfunction_matrix() * c))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParsevalCheck {
    /// `⟨x, x⟩`.
    pub lhs: f64,
    /// `Σ |c_j|²`.
    pub rhs: f64,
    pub defect: f64,
}

pub fn parseval_check(
    p: &SpectralProblem,
    result: &SpectralResult,
    x: &GridFunction,
    tol: f64,
) -> Result<ParsevalCheck> {
    let coeffs = expand(p, result, x, tol)?;
    let lhs = crate::operator::inner_product(p, x, x)?.re;
    let rhs: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    Ok(ParsevalCheck {
        lhs,
        rhs,
        defect: (lhs - rhs).abs(),
    })
}

/// Eigenvalues that coincide within [`DEGENERACY_TOL`], with the projector
/// onto their eigenspace.
#[derive(Debug, Clone)]
pub struct EigenGroup {
    pub lambda: f64,
    pub indices: Vec<usize>,
    /// In the coordinates of the admissible basis.
    pub projector: CMatrix,
}

#[derive(Debug, Clone)]
pub struct SpectralResolution {
    pub eigenvalues: Vec<f64>,
    /// `π_j = v_j v_j*` in basis coordinates.
    pub projectors: Vec<CMatrix>,
    pub groups: Vec<EigenGroup>,
}

impl SpectralResolution {
    /// `E_λ = Σ_{0<λ_j≤λ} π_j` for `λ ≥ 0` and `−Σ_{λ<λ_j≤0} π_j` for `λ < 0`.
    pub fn e_lambda(&self, lambda: f64) -> CMatrix {
        let m = self.eigenvalues.len();
        let mut e = CMatrix::zeros(m, m);
        for (lj, pj) in self.eigenvalues.iter().zip(&self.projectors) {
            if lambda >= 0.0 {
                if *lj > 0.0 && *lj <= lambda {
                    e += pj;
                }
            } else if *lj > lambda && *lj <= 0.0 {
                e -= pj;
            }
        }
        e
    }

    /// `Σ_j π_j`.
    pub fn completeness(&self) -> CMatrix {
        let m = self.eigenvalues.len();
        self.projectors
            .iter()
            .fold(CMatrix::zeros(m, m), |acc, pj| acc + pj)
    }

    /// `Σ_j λ_j π_j`.
    pub fn operator(&self) -> CMatrix {
        let m = self.eigenvalues.len();
        self.eigenvalues
            .iter()
            .zip(&self.projectors)
            .fold(CMatrix::zeros(m, m), |acc, (l, pj)| acc + pj * cr(*l))
    }

    /// `max ‖Π_gΠ_h − δ_{gh}Π_g‖` over eigenspace projectors.
    pub fn projector_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (g, pg) in self.groups.iter().enumerate() {
            for (h, ph) in self.groups.iter().enumerate() {
                let prod = &pg.projector * &ph.projector;
                let d = if g == h {
                    (prod - &pg.projector).norm()
                } else {
                    prod.norm()
                };
                worst = worst.max(d);
            }
        }
        worst
    }
}

pub fn spectral_resolution(result: &SpectralResult) -> SpectralResolution {
    let v = &result.coefficients;
    let projectors: Vec<CMatrix> = (0..result.m)
        .map(|j| {
            let col = v.column(j);
            col * col.adjoint()
        })
        .collect();
    let mut groups: Vec<EigenGroup> = Vec::new();
    for (j, &l) in result.eigenvalues.iter().enumerate() {
        match groups.last_mut() {
            Some(g)
                if (l - result.eigenvalues[*g.indices.last().unwrap()]).abs()
                    <= DEGENERACY_TOL * (1.0 + l.abs()) =>
            {
                g.indices.push(j);
                g.projector += &projectors[j];
            }
            _ => groups.push(EigenGroup {
                lambda: l,
                indices: vec![j],
                projector: projectors[j].clone(),
            }),
        }
    }
    for g in &mut groups {
        g.lambda = g
            .indices
            .iter()
            .map(|&j| result.eigenvalues[j])
            .sum::<f64>()
            / g.indices.len() as f64;
    }
    SpectralResolution {
        eigenvalues: result.eigenvalues.clone(),
        projectors,
        groups,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DualOrthogonality {
    /// `max |X*WX − I|`.
    pub orthonormality_defect: f64,
    /// `max |XX* − W⁻¹|`, the weighted dual orthogonality.
    pub defect: f64,
    /// `max |XX* − blockdiag(ω⁻¹)|`; coincides with `defect` when `μ_ρ ≡ 1`.
    pub unweighted_defect: f64,
}

pub fn dual_orthogonality_check(
    p: &SpectralProblem,
    result: &SpectralResult,
) -> Result<DualOrthogonality> {
    let d = p.d();
    if result.r < 2 * d {
        return Err(Error::NotProper {
            r: result.r,
            two_d: 2 * d,
        });
    }
    let n = p.n();
    let full = result.eigenfunction_matrix();
    let x = full.rows(d, d * n).into_owned();
    let s = p.scale();
    let mut w = CMatrix::zeros(d * n, d * n);
    let mut w_inv = CMatrix::zeros(d * n, d * n);
    let mut omega_inv = CMatrix::zeros(d * n, d * n);
    for k in 0..n {
        let oi = inverse(p.omega(k as isize))?;
        let mr = s.mu_rho(k as isize);
        w.view_mut((k * d, k * d), (d, d))
            .copy_from(&(p.omega(k as isize) * cr(mr)));
        w_inv
            .view_mut((k * d, k * d), (d, d))
            .copy_from(&(&oi * cr(1.0 / mr)));
        omega_inv.view_mut((k * d, k * d), (d, d)).copy_from(&oi);
    }
    let max_abs = |m: CMatrix| m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let xx = &x * x.adjoint();
    Ok(DualOrthogonality {
        orthonormality_defect: max_abs(x.adjoint() * &w * &x - CMatrix::identity(d * n, d * n)),
        defect: max_abs(&xx - w_inv),
        unweighted_defect: max_abs(xx - omega_inv),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_problem, rng, ProblemSpec, ScaleChoice};
    use crate::matrixkit::{identity, zeros};
    use crate::operator::inner_product;
    use crate::timescale::{make_scale, ScaleKind};
    use rand::Rng;

    fn neumann(n: usize) -> SpectralProblem {
        let scale = make_scale(&ScaleKind::Uniform { h: 1.0 }, n).unwrap();
        let one = identity(1);
        SpectralProblem::new(
            scale,
            1,
            vec![one.clone(); n + 1],
            vec![zeros(1, 1); n],
            vec![one; n],
            zeros(2, 2),
            identity(2),
        )
        .unwrap()
    }

    #[test]
    fn neumann_chain_matches_oracle_and_closed_form() {
        let p = neumann(4);
        let res = solve_spectrum(&p).unwrap();
        let oracle = brute_force_oracle(&p).unwrap();
        assert_eq!(res.m, 4);
        for (a, b) in res.eigenvalues.iter().zip(&oracle.eigenvalues) {
            assert!((a - b).abs() < 1e-10);
        }
        // Reflecting path: 2 − 2cos(πj/N).
        for (j, l) in res.eigenvalues.iter().enumerate() {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * j as f64 / 4.0).cos();
            assert!((l - exact).abs() < 1e-12, "{l} vs {exact}");
        }
    }

    #[test]
    fn oracle_agrees_on_random_problems() {
        for seed in 0..30 {
            let d = 1 + (seed % 3) as usize;
            let n = 2 + (seed % 6) as usize;
            let r = (seed as usize * 7) % (2 * d + 1);
            let p = random_problem(&ProblemSpec::new(d, n).with_r(r), seed).problem;
            let res = solve_spectrum(&p).unwrap();
            let oracle = brute_force_oracle(&p).unwrap();
            assert_eq!(oracle.pencil_dimension, res.m, "seed {seed}");
            assert_eq!(res.m, d * (n - 2) + r);
            assert!(oracle.gram_min_eigenvalue > 0.0);
            for (a, b) in res.eigenvalues.iter().zip(&oracle.eigenvalues) {
                assert!(
                    (a - b).abs() <= 1e-9 * (1.0 + a.abs()),
                    "seed {seed}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn eigenfunctions_are_orthonormal_with_small_residuals() {
        let p = random_problem(&ProblemSpec::new(2, 6).with_r(3), 11).problem;
        let res = solve_spectrum(&p).unwrap();
        for (j, xj) in res.eigenfunctions.iter().enumerate() {
            for (k, xk) in res.eigenfunctions.iter().enumerate() {
                let g = inner_product(&p, xj, xk).unwrap();
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((g - cr(expect)).norm() < 1e-10);
            }
            assert!(res.relative_residuals[j] < 1e-9);
        }
    }

    #[test]
    fn shift_moves_every_eigenvalue() {
        let p = random_problem(&ProblemSpec::new(2, 5), 4).problem;
        let a = solve_spectrum(&p).unwrap();
        let b = solve_spectrum(&p.with_shifted_q(3.0)).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((y - x - 3.0).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn expansion_and_parseval() {
        let p = random_problem(&ProblemSpec::new(2, 5).with_r(2), 6).problem;
        let res = solve_spectrum(&p).unwrap();
        let c = expand(&p, &res, &res.eigenfunctions[1], 1e-9).unwrap();
        for (j, cj) in c.iter().enumerate() {
            assert!((cj - cr(if j == 1 { 1.0 } else { 0.0 })).norm() < 1e-10);
        }
        let mut g = rng(2);
        let coeffs: Vec<C64> = (0..res.m)
            .map(|_| C64::new(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)))
            .collect();
        let x = res.space.combine(&p, &CVector::from_column_slice(&coeffs));
        let c = expand(&p, &res, &x, 1e-9).unwrap();
        let back = reconstruct(&p, &res, &c);
        let err = back.zip_with(&x, |_, u, v| u - v).unwrap().max_abs();
        assert!(err <= 1e-10 * x.max_abs());
        let pc = parseval_check(&p, &res, &x, 1e-9).unwrap();
        assert!(pc.defect <= 1e-10 * pc.lhs);

        let junk = crate::generate::random_grid_function(&mut g, p.scale(), -1, 5, 2, 1);
        assert!(matches!(
            expand(&p, &res, &junk, 1e-9),
            Err(Error::NotAdmissible { .. })
        ));
    }

    #[test]
    fn resolution_identities() {
        let p = random_problem(&ProblemSpec::new(2, 5), 12).problem;
        let res = solve_spectrum(&p).unwrap();
        let sr = spectral_resolution(&res);
        let m = res.m;
        assert!((sr.completeness() - CMatrix::identity(m, m)).norm() < 1e-10);
        assert!((sr.operator() - &res.operator.a).norm() < 1e-10 * res.operator.a.norm().max(1.0));
        assert!(sr.projector_defect() < 1e-10);
        let below = res.eigenvalues[0] - 1.0;
        let e = sr.e_lambda(below.min(-1e-3));
        // Negative branch: −Σ_{λ<λ_j≤0} π_j.
        let expect = res
            .eigenvalues
            .iter()
            .zip(&sr.projectors)
            .filter(|(l, _)| **l > below.min(-1e-3) && **l <= 0.0)
            .fold(CMatrix::zeros(m, m), |acc, (_, pj)| acc - pj);
        assert!((e - expect).norm() < 1e-14);
        let top = sr.e_lambda(res.eigenvalues[m - 1] + 1.0);
        let positive = res
            .eigenvalues
            .iter()
            .zip(&sr.projectors)
            .filter(|(l, _)| **l > 0.0)
            .fold(CMatrix::zeros(m, m), |acc, (_, pj)| acc + pj);
        assert!((top - positive).norm() < 1e-14);
    }

    #[test]
    fn degenerate_groups_merge() {
        // Two uncoupled copies of the same scalar problem give double eigenvalues.
        let n = 4;
        let scale = make_scale(&ScaleKind::Uniform { h: 1.0 }, n).unwrap();
        let i2 = identity(2);
        let p = SpectralProblem::new(
            scale,
            2,
            vec![i2.clone(); n + 1],
            vec![zeros(2, 2); n],
            vec![i2; n],
            zeros(4, 4),
            identity(4),
        )
        .unwrap();
        let res = solve_spectrum(&p).unwrap();
        let sr = spectral_resolution(&res);
        assert_eq!(sr.groups.len(), 4);
        assert!(sr.groups.iter().all(|g| g.indices.len() == 2));
        assert!(sr.projector_defect() < 1e-10);
    }

    #[test]
    fn dual_orthogonality() {
        let p = random_problem(&ProblemSpec::new(2, 5).with_scale(ScaleChoice::Q), 3).problem;
        let res = solve_spectrum(&p).unwrap();
        assert_eq!(res.r, 4);
        let chk = dual_orthogonality_check(&p, &res).unwrap();
        assert!(
            chk.defect < 1e-9 && chk.orthonormality_defect < 1e-9,
            "{chk:?}"
        );
        assert!(chk.unweighted_defect > 1e-6);

        let unit = neumann(5);
        let res = solve_spectrum(&unit).unwrap();
        let chk = dual_orthogonality_check(&unit, &res).unwrap();
        assert!((chk.defect - chk.unweighted_defect).abs() < 1e-15);

        let improper = random_problem(&ProblemSpec::new(1, 4).with_r(1), 1).problem;
        let res = solve_spectrum(&improper).unwrap();
        assert!(matches!(
            dual_orthogonality_check(&improper, &res),
            Err(Error::NotProper { .. })
        ));
    }

    #[test]
    fn phase_is_reproducible() {
        let p = random_problem(&ProblemSpec::new(2, 5), 9).problem;
        let a = solve_spectrum(&p).unwrap();
        let b = solve_spectrum(&p).unwrap();
        for (x, y) in a.eigenfunctions.iter().zip(&b.eigenfunctions) {
            assert_eq!(x, y);
            let v = x.stacked();
            let big = v.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
            let z = v.iter().find(|z| z.norm() >= big * (1.0 - 1e-9)).unwrap();
            assert!(z.im.abs() <= 1e-14 * z.re && z.re > 0.0);
        }
    }
}
