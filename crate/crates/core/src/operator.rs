//! The dynamic operator `ℓx = ω⁻¹[−(Px^Δ)^∇ + Qx]`, the weighted inner
//! product `⟨x, y⟩ = Σ_{t∈[a,b]} y*(t)ω(t)x(t)μ_ρ(t)`, the Lagrange identity
//! and the matrix of `L` in an orthonormal admissible basis.

use serde::Serialize;

use crate::boundary::{complete_boundary, AdmissibleSpace};
use crate::error::{Error, Result};
use crate::matrixkit::{cr, hermitian_defect, CMatrix, C64};
use crate::problem::{check_self_adjoint_bc, SpectralProblem};
use crate::timescale::{delta, nabla, GridFunction};

fn require_full(p: &SpectralProblem, x: &GridFunction) -> Result<()> {
    let b = p.b();
    if !x.covers(-1, b + 1) {
        return Err(Error::WindowMismatch(format!(
            "need [-1, {}], got [{}, {}]",
            b + 1,
            x.lo(),
            x.hi()
        )));
    }
    Ok(())
}

/// `W = blockdiag(ω(t)μ_ρ(t))` on `[a, b]`, zero at `ρ(a)` and `σ(b)`, so
/// that `⟨x, y⟩ = y* W x` on stacked vectors.
pub fn weight_matrix(p: &SpectralProblem) -> CMatrix {
    let d = p.d();
    let s = p.scale();
    let mut w = CMatrix::zeros(p.full_len(), p.full_len());
    for k in 0..=p.b() {
        let c = p.col(k);
        w.view_mut((c, c), (d, d))
            .copy_from(&(p.omega(k) * cr(s.mu_rho(k))));
    }
    w
}

/// `ωℓ` on stacked vectors: the `dN × d(N+2)` matrix of
/// `−(Px^Δ)^∇ + Qx` at `a, …, b`.
pub fn difference_operator(p: &SpectralProblem) -> CMatrix {
    let d = p.d();
    let s = p.scale();
    let n = p.n();
    let mut t = CMatrix::zeros(d * n, p.full_len());
    for k in 0..=p.b() {
        let row = k as usize * d;
        let (mr, ms) = (s.mu_rho(k), s.mu_sigma(k));
        let mut put = |j: isize, block: CMatrix| {
            let mut view = t.view_mut((row, p.col(j)), (d, d));
            view += block;
        };
        put(k - 1, p.p(k - 1) * cr(-1.0 / (mr * mr)));
        put(k, p.p_tilde(k));
        put(k + 1, p.p(k) * cr(-1.0 / (mr * ms)));
    }
    t
}

/// `ℓx` on `[a, b]` through the three-term stencil.
pub fn apply_ell(p: &SpectralProblem, x: &GridFunction) -> Result<GridFunction> {
    require_full(p, x)?;
    let s = p.scale();
    let mut out = Vec::with_capacity(p.n());
    for k in 0..=p.b() {
        let (mr, ms) = (s.mu_rho(k), s.mu_sigma(k));
        let wx = -(p.p(k) * x.at(k + 1)) * cr(1.0 / (mr * ms)) + p.p_tilde(k) * x.at(k)
            - p.p(k - 1) * x.at(k - 1) * cr(1.0 / (mr * mr));
        out.push(p.omega_inverse(k)? * wx);
    }
    GridFunction::new(s.clone(), 0, out)
}

/// `ℓx` on `[a, b]` through the composed Δ and ∇ of the scale.
pub fn apply_ell_composed(p: &SpectralProblem, x: &GridFunction) -> Result<GridFunction> {
    require_full(p, x)?;
    let b = p.b();
    let x = x.restrict(-1, b + 1)?;
    let flux = delta(&x)?.map(|k, v| p.p(k) * v)?;
    let div = nabla(&flux)?;
    div.map(|k, v| {
        p.omega_inverse(k)
            .map(|oi| oi * (-v + p.q(k) * x.at(k)))
            .expect("ω invertible")
    })
}

/// `⟨x, y⟩`, linear in `x` and conjugate-linear in `y`.
pub fn inner_product(p: &SpectralProblem, x: &GridFunction, y: &GridFunction) -> Result<C64> {
    let b = p.b();
    if !x.covers(0, b) || !y.covers(0, b) {
        return Err(Error::WindowMismatch(format!(
            "inner product needs [0, {b}]"
        )));
    }
    let s = p.scale();
    Ok((0..=b).fold(C64::new(0.0, 0.0), |acc, k| {
        acc + (y.at(k).adjoint() * p.omega(k) * x.at(k))[(0, 0)] * s.mu_rho(k)
    }))
}

/// `[(Py^Δ)*x − y*Px^Δ](t_k)`.
fn boundary_term(p: &SpectralProblem, x: &GridFunction, y: &GridFunction, k: isize) -> C64 {
    let ms = p.scale().mu_sigma(k);
    let xd = (x.at(k + 1) - x.at(k)) * cr(1.0 / ms);
    let yd = (y.at(k + 1) - y.at(k)) * cr(1.0 / ms);
    ((p.p(k) * yd).adjoint() * x.at(k) - y.at(k).adjoint() * p.p(k) * xd)[(0, 0)]
}

/// `[(Py^Δ)*x − y*Px^Δ]` evaluated from `ρ(a)` to `b`.
pub fn boundary_form(p: &SpectralProblem, x: &GridFunction, y: &GridFunction) -> Result<C64> {
    require_full(p, x)?;
    require_full(p, y)?;
    Ok(boundary_term(p, x, y, p.b()) - boundary_term(p, x, y, -1))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LagrangeCheck {
    pub lhs: C64,
    pub rhs: C64,
    /// `lhs − rhs`.
    pub residual: C64,
    /// Sum of the magnitudes of all terms entering both sides.
    pub scale: f64,
}

/// `⟨ℓx, y⟩ − ⟨x, ℓy⟩` against the boundary form; holds for every pair.
pub fn lagrange_residual(
    p: &SpectralProblem,
    x: &GridFunction,
    y: &GridFunction,
) -> Result<LagrangeCheck> {
    let lx = apply_ell(p, x)?;
    let ly = apply_ell(p, y)?;
    let a = inner_product(p, &lx, y)?;
    let b_ = inner_product(p, x, &ly)?;
    let lhs = a - b_;
    let rhs = boundary_form(p, x, y)?;
    let mut scale = 0.0;
    let s = p.scale();
    for k in 0..=p.b() {
        let w = s.mu_rho(k);
        scale += w * (y.at(k).adjoint() * p.omega(k) * lx.at(k)).norm();
        scale += w * (ly.at(k).adjoint() * p.omega(k) * x.at(k)).norm();
    }
    scale += boundary_term(p, x, y, p.b()).norm() + boundary_term(p, x, y, -1).norm();
    Ok(LagrangeCheck {
        lhs,
        rhs,
        residual: lhs - rhs,
        scale,
    })
}

/// The matrix of `L` in an orthonormal admissible basis.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    /// `A_{jk} = ⟨Le_k, e_j⟩`.
    pub a: CMatrix,
    /// `‖A − A*‖` before symmetrization.
    pub hermiticity_defect: f64,
    /// Largest relative distance of `Le_k` from the admissible space.
    pub closure_residual: f64,
    /// Stacked `Le_k` on the full window, one column per basis function.
    pub images: CMatrix,
}

/// `Le` on the full window: `ℓe` on `[a, b]`, completed at `ρ(a)`, `σ(b)`.
pub fn apply_operator(
    p: &SpectralProblem,
    space: &AdmissibleSpace,
    x: &GridFunction,
) -> Result<GridFunction> {
    let inner = apply_ell(p, x)?;
    let comp = complete_boundary(p, &space.decomposition, &inner)?;
    let mut values = Vec::with_capacity(p.n() + 2);
    values.push(comp.x_rho_a);
    values.extend(inner.values().iter().cloned());
    values.push(comp.x_sigma_b);
    GridFunction::new(p.scale().clone(), -1, values)
}

pub fn build_operator_matrix(
    p: &SpectralProblem,
    space: &AdmissibleSpace,
    tol: f64,
) -> Result<OperatorMatrix> {
    let (sa, defect) = check_self_adjoint_bc(p.r(), p.s(), tol)?;
    if !sa {
        return Err(Error::NotSelfAdjoint { defect });
    }
    let m = space.m;
    let mut images = CMatrix::zeros(p.full_len(), m);
    let mut closure_residual: f64 = 0.0;
    for k in 0..m {
        let le = apply_operator(p, space, &space.basis_function(p, k))?.stacked();
        closure_residual = closure_residual.max(space.membership_residual(&le));
        images.set_column(k, &le);
    }
    if closure_residual > tol {
        return Err(Error::ClosureFailure {
            residual: closure_residual,
        });
    }
    let a = space.basis.adjoint() * space.weight() * &images;
    let hermiticity_defect = hermitian_defect(&a);
    if hermiticity_defect > tol * a.norm().max(1.0) {
        return Err(Error::NotSelfAdjoint {
            defect: hermiticity_defect,
        });
    }
    Ok(OperatorMatrix {
        a,
        hermiticity_defect,
        closure_residual,
        images,
    })
}
