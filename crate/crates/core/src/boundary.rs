//! The admissible function space.
//!
//! The boundary conditions are rewritten around the coefficient matrix
//! `Γ = (R₁P^ρ(a)⁻¹ + S₁/μ_ρ(a), S₂/μ_σ(b))`, whose rank `r` counts how many
//! of the first/last equations genuinely carry `λ`. When `r < 2d` the
//! remaining `2d − r` combinations of those two equations are `λ`-free and
//! become extra constraints. The space is the null space of the stacked
//! boundary and admissibility rows, orthonormalized in the weighted inner
//! product; its dimension is `d(N−2) + r`.
//!
//! For a function satisfying the boundary conditions,
//! `(x(a); −x(b)) = D Γ* η` with `D = diag(μ_ρ(a) I, μ_σ(b) I)`, so the
//! `λ`-free rows are `V₁* D⁻¹ diag(ω(a), ω(b))⁻¹ (first; last stencil)`.
//! The same `D` enters the boundary reconstruction and `J`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrixkit::{
    block_diag, cr, hconcat, null_space_basis, solve_linear, svd, vconcat, CMatrix, CVector,
    DEFAULT_RANK_TOL,
};
use crate::operator::weight_matrix;
use crate::problem::SpectralProblem;
use crate::timescale::GridFunction;

/// `Γ`.
pub fn build_gamma(p: &SpectralProblem) -> Result<CMatrix> {
    let s = p.scale();
    let (r1, _) = p.r_blocks();
    let (s1, s2) = p.s_blocks();
    let p_inv = crate::matrixkit::inverse(p.p(-1))
        .map_err(|e| Error::Singular(format!("P at rho(a): {e}")))?;
    let left = r1 * p_inv + s1 * cr(1.0 / s.mu_rho(0));
    let right = s2 * cr(1.0 / s.mu_sigma(p.b()));
    Ok(hconcat(&[&left, &right]))
}

/// Size of the terms that make up `Γ`; the rank threshold is relative to it
/// so that exact cancellation (e.g. `Γ = 0`) is recognized.
fn gamma_reference(p: &SpectralProblem) -> Result<f64> {
    let s = p.scale();
    let (r1, _) = p.r_blocks();
    let (s1, s2) = p.s_blocks();
    let p_inv = crate::matrixkit::inverse(p.p(-1))?;
    Ok((&r1 * p_inv).norm() + s1.norm() / s.mu_rho(0) + s2.norm() / s.mu_sigma(p.b()))
}

/// `r = rank(R₁ + S₁P^ρ(a)/μ_ρ(a), S₂/μ_σ(b))`, cross-checked against `rank Γ`.
pub fn compute_r(p: &SpectralProblem) -> Result<usize> {
    let s = p.scale();
    let (r1, _) = p.r_blocks();
    let (s1, s2) = p.s_blocks();
    let left_terms = (r1.norm(), (&s1 * p.p(-1)).norm() / s.mu_rho(0));
    let left = r1 + s1 * p.p(-1) * cr(1.0 / s.mu_rho(0));
    let right = s2 * cr(1.0 / s.mu_sigma(p.b()));
    let reference = left_terms.0 + left_terms.1 + right.norm();
    let r = svd(&hconcat(&[&left, &right]))?.rank_against(DEFAULT_RANK_TOL, reference);
    let via_gamma = svd(&build_gamma(p)?)?.rank_against(DEFAULT_RANK_TOL, gamma_reference(p)?);
    if r != via_gamma {
        return Err(Error::DimensionMismatch {
            expected: r,
            found: via_gamma,
        });
    }
    Ok(r)
}

/// `m = d(N−2) + r`.
pub fn expected_dimension(d: usize, n: usize, r: usize) -> usize {
    d * (n - 2) + r
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionResiduals {
    /// `‖U*ΓV − diag{0, M}‖ / ‖Γ‖`.
    pub block_form: f64,
    /// `‖V*V − I‖`, covering all three block relations between `V₁` and `V₂`.
    pub v_orthonormality: f64,
    /// `‖U₁*Γ‖ / ‖Γ‖`.
    pub u1_gamma: f64,
    /// `‖V₂ − Γ*U₂M^{*−1}‖`.
    pub v2_relation: f64,
}

/// `U*ΓV = diag{0, M}` with the zero block leading.
#[derive(Debug, Clone)]
pub struct GammaDecomposition {
    pub gamma: CMatrix,
    pub r: usize,
    pub u: CMatrix,
    pub v: CMatrix,
    /// `r × r`, invertible.
    pub m: CMatrix,
    pub u1: CMatrix,
    pub u2: CMatrix,
    pub v1: CMatrix,
    pub v2: CMatrix,
    /// `M V₂* diag{μ_ρ(a)³ω(a), μ_ρ(b)μ_σ(b)²ω(b)} V₂`.
    pub j: CMatrix,
    pub residuals: DecompositionResiduals,
}

/// `diag{μ_ρ(a)³ω(a), μ_ρ(b)μ_σ(b)²ω(b)}`, the weight coupling `γ` to the
/// boundary equations.
fn gamma_weight(p: &SpectralProblem) -> CMatrix {
    let s = p.scale();
    let b = p.b();
    let (mra, mrb, msb) = (s.mu_rho(0), s.mu_rho(b), s.mu_sigma(b));
    block_diag(&[
        &(p.omega(0) * cr(mra.powi(3))),
        &(p.omega(b) * cr(mrb * msb * msb)),
    ])
}

pub fn decompose_gamma(p: &SpectralProblem, tol: f64) -> Result<GammaDecomposition> {
    let gamma = build_gamma(p)?;
    let n2 = 2 * p.d();
    let dec = svd(&gamma)?;
    let reference = gamma_reference(p)?;
    let r = dec.rank_against(DEFAULT_RANK_TOL, reference);
    let z = n2 - r;

    // Reverse to ascending singular values so the zero block leads.
    let u = CMatrix::from_fn(n2, n2, |i, j| dec.u[(i, n2 - 1 - j)]);
    let v = CMatrix::from_fn(n2, n2, |i, j| dec.v[(i, n2 - 1 - j)]);
    let (u1, u2) = (u.columns(0, z).into_owned(), u.columns(z, r).into_owned());
    let (v1, v2) = (v.columns(0, z).into_owned(), v.columns(z, r).into_owned());
    let m = u2.adjoint() * &gamma * &v2;

    let gnorm = gamma.norm().max(reference).max(f64::MIN_POSITIVE);
    let mut expected = CMatrix::zeros(n2, n2);
    expected.view_mut((z, z), (r, r)).copy_from(&m);
    let block_form = (u.adjoint() * &gamma * &v - expected).norm() / gnorm;
    let v_orthonormality = (v.adjoint() * &v - CMatrix::identity(n2, n2)).norm();
    let u1_gamma = (u1.adjoint() * &gamma).norm() / gnorm;
    let v2_relation = if r == 0 {
        0.0
    } else {
        let m_adj_inv = crate::matrixkit::inverse(&m.adjoint())?;
        (&v2 - gamma.adjoint() * &u2 * m_adj_inv).norm()
    };
    let residuals = DecompositionResiduals {
        block_form,
        v_orthonormality,
        u1_gamma,
        v2_relation,
    };
    for (what, value) in [
        ("U*ΓV block form", block_form),
        ("V unitarity", v_orthonormality),
        ("U1*Γ = 0", u1_gamma),
        ("V2 = Γ*U2 M^{*-1}", v2_relation),
    ] {
        if value > tol {
            return Err(Error::ToleranceFailure {
                what,
                residual: value,
                tol,
            });
        }
    }

    let j = &m * v2.adjoint() * gamma_weight(p) * &v2;
    if r > 0 && crate::matrixkit::rcond(&j)? <= 1e-14 {
        return Err(Error::Singular("J".into()));
    }
    Ok(GammaDecomposition {
        gamma,
        r,
        u,
        v,
        m,
        u1,
        u2,
        v1,
        v2,
        j,
        residuals,
    })
}

/// The `2d × d(N+2)` rows `(first stencil; last stencil)`, i.e.
/// `(ω(a)ℓx(a); −ω(b)ℓx(b))` in stacked coordinates.
pub fn end_stencil_rows(p: &SpectralProblem) -> CMatrix {
    let d = p.d();
    let s = p.scale();
    let b = p.b();
    let mut rows = CMatrix::zeros(2 * d, p.full_len());
    let mut put = |row: usize, k: isize, block: CMatrix| {
        let mut view = rows.view_mut((row, p.col(k)), (d, d));
        view += block;
    };
    let (mra, msa) = (s.mu_rho(0), s.mu_sigma(0));
    put(0, -1, p.p(-1) * cr(-1.0 / (mra * mra)));
    put(0, 0, p.p_tilde(0));
    put(0, 1, p.p(0) * cr(-1.0 / (mra * msa)));
    let (mrb, msb) = (s.mu_rho(b), s.mu_sigma(b));
    put(d, b - 1, p.p(b - 1) * cr(1.0 / (mrb * mrb)));
    put(d, b, -p.p_tilde(b));
    put(d, b + 1, p.p(b) * cr(1.0 / (mrb * msb)));
    rows
}

/// The `(2d − r) × d(N+2)` `λ`-free constraint rows.
pub fn admissibility_constraints(p: &SpectralProblem, dec: &GammaDecomposition) -> Result<CMatrix> {
    let s = p.scale();
    let b = p.b();
    let scale_a = p.omega_inverse(0)? * cr(1.0 / s.mu_rho(0));
    let scale_b = p.omega_inverse(b)? * cr(1.0 / s.mu_sigma(b));
    let weight = block_diag(&[&scale_a, &scale_b]);
    Ok(dec.v1.adjoint() * weight * end_stencil_rows(p))
}

/// `L²_ω` with an orthonormal basis in the weighted inner product.
#[derive(Debug, Clone)]
pub struct AdmissibleSpace {
    pub m: usize,
    /// `d(N+2) × m`, columns are stacked basis functions on `[ρ(a), σ(b)]`.
    pub basis: CMatrix,
    /// Boundary rows stacked over admissibility rows.
    pub constraint_matrix: CMatrix,
    pub decomposition: GammaDecomposition,
    /// Smallest eigenvalue of the weighted Gram matrix of the raw null-space basis.
    pub gram_min_eigenvalue: f64,
    weight: CMatrix,
    d: usize,
}

impl AdmissibleSpace {
    pub fn d(&self) -> usize {
        self.d
    }

    /// The weighted inner product as a matrix on stacked vectors.
    pub fn weight(&self) -> &CMatrix {
        &self.weight
    }

    pub fn basis_function(&self, p: &SpectralProblem, j: usize) -> GridFunction {
        self.function(p, &self.basis.column(j).into_owned())
    }

    pub fn basis_functions(&self, p: &SpectralProblem) -> Vec<GridFunction> {
        (0..self.m).map(|j| self.basis_function(p, j)).collect()
    }

    /// A full-window grid function from a stacked vector.
    pub fn function(&self, p: &SpectralProblem, stacked: &CVector) -> GridFunction {
        GridFunction::from_stacked(p.scale().clone(), -1, self.d, stacked.iter().copied())
            .expect("stacked vector has full length")
    }

    /// `Σ c_j e_j`.
    pub fn combine(&self, p: &SpectralProblem, coeffs: &CVector) -> GridFunction {
        self.function(p, &(&self.basis * coeffs))
    }

    /// Coordinates `⟨x, e_j⟩`.
    pub fn coordinates(&self, stacked: &CVector) -> CVector {
        self.basis.adjoint() * &self.weight * stacked
    }

    /// Relative distance between `x` and its projection onto the space,
    /// measured on the full window.
    pub fn membership_residual(&self, stacked: &CVector) -> f64 {
        let proj = &self.basis * self.coordinates(stacked);
        let norm = stacked.norm();
        if norm == 0.0 {
            0.0
        } else {
            (proj - stacked).norm() / norm
        }
    }

    pub fn contains(&self, x: &GridFunction, tol: f64) -> Result<(bool, f64)> {
        let b = x.scale().b_index();
        let stacked = x.restrict(-1, b + 1)?.stacked();
        let res = self.membership_residual(&stacked);
        Ok((res <= tol, res))
    }
}

pub fn build_admissible_space(p: &SpectralProblem, tol: f64) -> Result<AdmissibleSpace> {
    let dec = decompose_gamma(p, tol)?;
    let mut constraints = vconcat(&[&p.boundary_rows(), &admissibility_constraints(p, &dec)?]);
    for mut row in constraints.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= cr(n);
        }
    }
    let raw = null_space_basis(&constraints, DEFAULT_RANK_TOL)?;
    let expected = expected_dimension(p.d(), p.n(), dec.r);
    if raw.ncols() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: raw.ncols(),
        });
    }

    let weight = weight_matrix(p);
    let gram = raw.adjoint() * &weight * &raw;
    let gram_eig = crate::matrixkit::hermitian_eigendecompose(&gram, 1e-8)?;
    let gram_min_eigenvalue = gram_eig
        .eigenvalues
        .first()
        .copied()
        .unwrap_or(f64::INFINITY);
    if expected > 0 && gram_min_eigenvalue <= 0.0 {
        return Err(Error::ToleranceFailure {
            what: "weighted Gram matrix positive definiteness",
            residual: gram_min_eigenvalue,
            tol: 0.0,
        });
    }
    let basis = if expected == 0 {
        raw
    } else {
        let gram = (&gram + gram.adjoint()) * cr(0.5);
        let chol = nalgebra::Cholesky::new(gram).ok_or(Error::ToleranceFailure {
            what: "Cholesky of the weighted Gram matrix",
            residual: gram_min_eigenvalue,
            tol: 0.0,
        })?;
        let l_adj = chol.l().adjoint();
        // E = raw · L^{−*}, so E* W E = I.
        solve_linear(&l_adj.transpose(), &raw.transpose())?.transpose()
    };

    Ok(AdmissibleSpace {
        m: expected,
        basis,
        constraint_matrix: constraints,
        decomposition: dec,
        gram_min_eigenvalue,
        weight,
        d: p.d(),
    })
}

/// Result of reconstructing a function's boundary values from its interior.
#[derive(Debug, Clone)]
pub struct BoundaryCompletion {
    pub gamma: CMatrix,
    pub x_rho_a: CMatrix,
    pub x_sigma_b: CMatrix,
    /// `U₁*(S₁P^ρ(a)x(a)/μ_ρ(a) + R₂x(b))`.
    pub interior_constraint: CMatrix,
}

/// Computes `γ` from the interior traces, then the boundary values
/// `x^ρ(a)`, `x^σ(b)` the admissible space assigns to them. Only
/// `x(a), x^σ(a), x^ρ(b), x(b)` are read.
pub fn complete_boundary(
    p: &SpectralProblem,
    dec: &GammaDecomposition,
    x: &GridFunction,
) -> Result<BoundaryCompletion> {
    let s = p.scale();
    let b = p.b();
    if !x.covers(0, b) {
        return Err(Error::WindowMismatch(format!(
            "interior [0, {b}] not covered by [{}, {}]",
            x.lo(),
            x.hi()
        )));
    }
    let (mra, msa) = (s.mu_rho(0), s.mu_sigma(0));
    let (mrb, msb) = (s.mu_rho(b), s.mu_sigma(b));
    let (xa, xsa, xrb, xb) = (x.at(0), x.at(1), x.at(b - 1), x.at(b));

    let g_a = p.p_tilde(0) * xa * cr(mra * mra) - p.p(0) * xsa * cr(mra / msa);
    let g_b = p.p(b - 1) * xrb * cr(msb / mrb) - p.p_tilde(b) * xb * cr(mrb * msb);
    let g = vconcat(&[&g_a, &g_b]);

    let (_, r2) = p.r_blocks();
    let (s1, s2) = p.s_blocks();
    let s1p = &s1 * p.p(-1) * cr(1.0 / mra);
    let c_rhs = &s1p * xa + (&r2 - &s2 * p.p(b) * cr(1.0 / msb)) * xb;
    let f = &dec.gamma * g - c_rhs;

    let gamma = if dec.r == 0 {
        CMatrix::zeros(0, xa.ncols())
    } else {
        solve_linear(&dec.j, &(dec.u2.adjoint() * &f))?
    };
    let interior_constraint = dec.u1.adjoint() * (&s1p * xa + &r2 * xb);

    let d = p.d();
    let v2g = &dec.v2 * &gamma;
    let (top, bottom) = if dec.r == 0 {
        (CMatrix::zeros(d, xa.ncols()), CMatrix::zeros(d, xa.ncols()))
    } else {
        (v2g.rows(0, d).into_owned(), v2g.rows(d, d).into_owned())
    };
    let pa_inv = crate::matrixkit::inverse(p.p(-1))?;
    let pb_inv = crate::matrixkit::inverse(p.p(b))?;
    let x_rho_a = &pa_inv * (&g_a - p.omega(0) * top * cr(mra.powi(3)));
    let x_sigma_b = &pb_inv * (-&g_b + p.omega(b) * bottom * cr(mrb * msb * msb));
    Ok(BoundaryCompletion {
        gamma,
        x_rho_a,
        x_sigma_b,
        interior_constraint,
    })
}

#[derive(Debug, Clone)]
pub struct Characterization {
    pub holds: bool,
    pub gamma: CMatrix,
    /// Relative mismatch between the given and reconstructed boundary values.
    pub boundary_residual: f64,
    /// Relative size of the `U₁*` interior constraint.
    pub interior_residual: f64,
    /// Membership in the span of the basis, the independent route.
    pub in_span: bool,
    pub span_residual: f64,
}

impl Characterization {
    pub fn agrees(&self) -> bool {
        self.holds == self.in_span
    }
}

/// Membership through the boundary reconstruction, alongside the null-space route.
pub fn characterization_crosscheck(
    p: &SpectralProblem,
    space: &AdmissibleSpace,
    x: &GridFunction,
    tol: f64,
) -> Result<Characterization> {
    let b = p.b();
    let comp = complete_boundary(p, &space.decomposition, x)?;
    let xnorm = x.restrict(-1, b + 1)?.stacked().norm();
    let rel = |v: f64| if xnorm == 0.0 { v } else { v / xnorm };
    let boundary_residual = rel(((x.at(-1) - &comp.x_rho_a).norm().powi(2)
        + (x.at(b + 1) - &comp.x_sigma_b).norm().powi(2))
    .sqrt());
    let (_, r2) = p.r_blocks();
    let (s1, _) = p.s_blocks();
    let coef =
        (dec_u1_norm(&space.decomposition) * (s1.norm() * p.p(-1).norm() + r2.norm())).max(1.0);
    let interior_residual = rel(comp.interior_constraint.norm()) / coef;
    let (in_span, span_residual) = space.contains(x, tol)?;
    Ok(Characterization {
        holds: boundary_residual <= tol && interior_residual <= tol,
        gamma: comp.gamma,
        boundary_residual,
        interior_residual,
        in_span,
        span_residual,
    })
}

fn dec_u1_norm(dec: &GammaDecomposition) -> f64 {
    if dec.u1.ncols() == 0 {
        0.0
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_grid_function, random_problem, rng, ProblemSpec, ScaleChoice};
    use crate::matrixkit::{from_real_rows, identity, rank_with_tolerance, zeros};
    use crate::problem::{eta_parametrization_check, DEFAULT_TOL};
    use crate::timescale::{make_scale, ScaleKind};

    fn unit_problem(n: usize, r: CMatrix, s: CMatrix) -> SpectralProblem {
        let scale = make_scale(&ScaleKind::Uniform { h: 1.0 }, n).unwrap();
        let one = identity(1);
        SpectralProblem::new(
            scale,
            1,
            vec![one.clone(); n + 1],
            vec![zeros(1, 1); n],
            vec![one; n],
            r,
            s,
        )
        .unwrap()
    }

    #[test]
    fn gamma_examples() {
        let p = unit_problem(4, identity(2), zeros(2, 2));
        assert_eq!(
            build_gamma(&p).unwrap(),
            from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]])
        );
        assert_eq!(compute_r(&p).unwrap(), 1);

        let p = unit_problem(4, zeros(2, 2), identity(2));
        let g = build_gamma(&p).unwrap();
        assert_eq!(g, identity(2));
        assert_eq!(compute_r(&p).unwrap(), 2);

        // Γ ignores ω.
        let scaled = p.with_omega(vec![identity(1) * cr(3.0); 4]).unwrap();
        assert_eq!(build_gamma(&scaled).unwrap(), g);
    }

    #[test]
    fn gamma_with_nonunit_graininess() {
        let scale =
            crate::timescale::IsolatedTimeScale::new(vec![-0.5, 0.0, 1.0, 3.0, 6.0]).unwrap();
        let one = identity(1);
        let p = SpectralProblem::new(
            scale,
            1,
            vec![one.clone(); 4],
            vec![zeros(1, 1); 3],
            vec![one; 3],
            zeros(2, 2),
            identity(2),
        )
        .unwrap();
        // ((1/μ_ρ(a)) [1;0], (1/μ_σ(b)) [0;1]) with μ_ρ(a) = 0.5, μ_σ(b) = 3.
        let g = build_gamma(&p).unwrap();
        assert_eq!(g, from_real_rows(&[&[2.0, 0.0], &[0.0, 1.0 / 3.0]]));
    }

    #[test]
    fn dimension_formula_instance() {
        assert_eq!(expected_dimension(2, 5, 4), 10);
        assert_eq!(expected_dimension(1, 2, 2), 2);
    }

    #[test]
    fn proper_decomposition_has_empty_zero_block() {
        let p = unit_problem(4, zeros(2, 2), identity(2));
        let dec = decompose_gamma(&p, 1e-9).unwrap();
        assert_eq!(dec.r, 2);
        assert_eq!(dec.u1.ncols(), 0);
        assert_eq!(dec.v1.ncols(), 0);
        assert_eq!(dec.m.shape(), (2, 2));
        let space = build_admissible_space(&p, 1e-9).unwrap();
        assert_eq!(admissibility_constraints(&p, &dec).unwrap().nrows(), 0);
        assert_eq!(space.m, 4);
    }

    #[test]
    fn rank_zero_gamma_instance() {
        // With P ≡ 1 and unit graininess, R = I and S = (−e₁, 0) cancel Γ
        // exactly while (R, S) keeps full rank.
        let r = identity(2);
        let s = from_real_rows(&[&[-1.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(rank_with_tolerance(&hconcat(&[&r, &s]), 1e-10).unwrap(), 2);
        assert!(matches!(
            crate::problem::check_self_adjoint_bc(&r, &s, 1e-12),
            Ok((true, _))
        ));
        let p = unit_problem(4, r, s);
        assert_eq!(build_gamma(&p).unwrap().norm(), 0.0);
        assert_eq!(compute_r(&p).unwrap(), 0);
        let dec = decompose_gamma(&p, 1e-9).unwrap();
        assert_eq!(dec.r, 0);
        assert_eq!(dec.m.shape(), (0, 0));
        assert_eq!(dec.v1, dec.v);
        let space = build_admissible_space(&p, 1e-9).unwrap();
        assert_eq!(space.m, 2);
    }

    #[test]
    fn random_decomposition_residuals() {
        for seed in 0..20 {
            let p = random_problem(&ProblemSpec::new(2, 5), seed).problem;
            let dec = decompose_gamma(&p, 1e-9).unwrap();
            let r = &dec.residuals;
            assert!(
                r.block_form <= 1e-11 && r.v_orthonormality <= 1e-11 && r.u1_gamma <= 1e-11,
                "{r:?}"
            );
        }
    }

    #[test]
    fn stencil_rows_unit_dirichlet_like() {
        // d = 1, R = I, S = 0, unit scale, P = ω = 1, Q = 0, N = 4.
        let p = unit_problem(4, identity(2), zeros(2, 2));
        let rows = end_stencil_rows(&p);
        let expect = from_real_rows(&[
            &[-1.0, 2.0, -1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0, -2.0, 1.0],
        ]);
        assert_eq!(rows, expect);
        let dec = decompose_gamma(&p, 1e-9).unwrap();
        assert_eq!(dec.r, 1);
        // Γ = diag(1, 0): V₁ spans the second coordinate, so the row is the last stencil.
        let adm = admissibility_constraints(&p, &dec).unwrap();
        assert_eq!(adm.nrows(), 1);
        let phase = adm[(0, 4)] / cr(-2.0);
        assert!((phase.norm() - 1.0).abs() < 1e-14);
        assert!((adm - expect.rows(1, 1) * phase).norm() < 1e-14);
        let space = build_admissible_space(&p, 1e-9).unwrap();
        assert_eq!(space.m, 3);
    }

    #[test]
    fn null_space_dimension_brute_force() {
        // R = I, S = 0 imposes x(ρ(a)) = 0 and x(b) = 0; the λ-free row is the
        // last equation with x(b) = 0, which pins x(σ(b)) = −x(ρ(b)).
        // Free: x(a), x(σ(a)), x(ρ(b)) → 3.
        let p = unit_problem(4, identity(2), zeros(2, 2));
        let space = build_admissible_space(&p, 1e-9).unwrap();
        let rank = rank_with_tolerance(&space.constraint_matrix, 1e-10).unwrap();
        assert_eq!(6 - rank, 3);
        assert_eq!(space.m, 3);
    }

    #[test]
    fn basis_is_weighted_orthonormal_and_eta_parametrized() {
        for (seed, r) in [(1, 0), (2, 1), (3, 2), (4, 3), (5, 4)] {
            let spec = ProblemSpec::new(2, 5).with_r(r);
            let p = random_problem(&spec, seed).problem;
            let space = build_admissible_space(&p, 1e-9).unwrap();
            assert_eq!(space.decomposition.r, r);
            let g = space.basis.adjoint() * space.weight() * &space.basis;
            assert!((g - CMatrix::identity(space.m, space.m)).norm() < 1e-11);
            assert!(space.gram_min_eigenvalue > 0.0);
            for x in space.basis_functions(&p) {
                let chk = eta_parametrization_check(&p, &x, 1e-9).unwrap();
                assert!(chk.holds, "seed {seed}: {}", chk.residual);
                let ch = characterization_crosscheck(&p, &space, &x, 1e-9).unwrap();
                assert!(ch.holds && ch.in_span, "{ch:?}");
            }
        }
    }

    #[test]
    fn characterization_rejects_and_accepts() {
        let p = random_problem(&ProblemSpec::new(1, 4).with_r(1), 9).problem;
        let space = build_admissible_space(&p, 1e-9).unwrap();
        let zero = GridFunction::zeros(p.scale().clone(), -1, 4, 1, 1).unwrap();
        let ch = characterization_crosscheck(&p, &space, &zero, 1e-9).unwrap();
        assert!(ch.holds && ch.in_span);
        assert_eq!(ch.gamma.norm(), 0.0);
        let mut g = rng(3);
        let junk = random_grid_function(&mut g, p.scale(), -1, 4, 1, 1);
        let ch = characterization_crosscheck(&p, &space, &junk, 1e-9).unwrap();
        assert!(!ch.holds && !ch.in_span);
    }

    #[test]
    fn unscaled_constraint_excludes_eigenfunctions_on_nonuniform_scales() {
        // Dropping D from the λ-free rows gives a different space when
        // μ_ρ(a) ≠ μ_σ(b) and the row couples both ends. With R = I and
        // S = ((1 − μ_ρ(a)/P, 1), (1, 1)), Γ = (1/μ_ρ(a), 1/μ_σ(b)) in both rows.
        let spec = ProblemSpec::new(1, 5).with_scale(ScaleChoice::Q);
        let base = random_problem(&spec, 21).problem;
        let s = base.scale();
        let (mra, msb) = (s.mu_rho(0), s.mu_sigma(base.b()));
        assert!((mra - msb).abs() > 1e-3);
        let p0 = base.p(-1)[(0, 0)].re;
        let bc_s = from_real_rows(&[&[1.0 - mra / p0, 1.0], &[1.0, 1.0]]);
        let p = base.with_boundary(identity(2), bc_s).unwrap();
        assert_eq!(compute_r(&p).unwrap(), 1);
        let res = crate::spectral::solve_spectrum(&p).unwrap();
        let dec = &res.space.decomposition;
        let b = p.b();
        let weight = block_diag(&[&p.omega_inverse(0).unwrap(), &p.omega_inverse(b).unwrap()]);
        let unscaled = dec.v1.adjoint() * weight * end_stencil_rows(&p);
        let scaled = admissibility_constraints(&p, dec).unwrap();
        let mut worst_unscaled: f64 = 0.0;
        for x in &res.eigenfunctions {
            let v = x.stacked();
            assert!((&scaled * &v).norm() < 1e-9 * scaled.norm());
            worst_unscaled = worst_unscaled.max((&unscaled * &v).norm() / unscaled.norm());
        }
        assert!(worst_unscaled > 1e-3, "{worst_unscaled}");
        let _ = DEFAULT_TOL;
    }
}
