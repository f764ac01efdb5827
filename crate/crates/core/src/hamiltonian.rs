//! First-order forms: the `Z = (X; PX^Δ)` system of the second-order matrix
//! equation, Hamiltonian nabla systems `x^∇ = 𝒜x + 𝓑u^ρ, u^∇ = 𝒞x − 𝒜*u^ρ`,
//! their symplectic form `z^∇ = 𝒮z`, the pseudo-derivative reduction of
//! even-order Sturm–Liouville equations, and the Lagrange identity of the
//! Hamiltonian operator `ℓ(x, u) = J(x^∇; u^∇) − H(x; u^ρ)`.
//!
//! Two skew matrices appear: `𝒥 = (0, I; −I, 0)` for the Hamiltonian and
//! symplectic conditions, and `J = (0, −I; I, 0)` for the operator form.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrixkit::{
    block_diag, cr, hconcat, hermitian_defect, inverse, rcond, solve_linear, vconcat, CMatrix,
};
use crate::operator::LagrangeCheck;
use crate::problem::SpectralProblem;
use crate::timescale::{
    delta, iterated_derivative, nabla, Derivative, GridFunction, IsolatedTimeScale,
};

/// Reciprocal condition number below which a matrix counts as singular.
const SINGULAR: f64 = 1e-14;

/// `𝒥 = (0, I; −I, 0)`.
pub fn symplectic_j(n: usize) -> CMatrix {
    let i = CMatrix::identity(n, n);
    let z = CMatrix::zeros(n, n);
    vconcat(&[&hconcat(&[&z, &i]), &hconcat(&[&-&i, &z])])
}

/// `J = (0, −I; I, 0)`.
pub fn operator_j(n: usize) -> CMatrix {
    -symplectic_j(n)
}

/// `𝓜*𝓜 = diag(0, I)` for `𝓜 = (0, I; 0, 0)`.
fn m_star_m(n: usize) -> CMatrix {
    block_diag(&[&CMatrix::zeros(n, n), &CMatrix::identity(n, n)])
}

fn window_of(fs: &[&GridFunction]) -> (isize, isize) {
    let lo = fs.iter().map(|f| f.lo()).max().unwrap_or(0);
    let hi = fs.iter().map(|f| f.hi()).min().unwrap_or(-1);
    (lo, hi)
}

fn ensure_invertible(m: &CMatrix, what: &str, k: isize) -> Result<()> {
    if rcond(m)? <= SINGULAR {
        return Err(Error::Singular(format!("{what} at index {k}")));
    }
    Ok(())
}

/// `P` on `[ρ(a), b]` and `Q` on `[a, b]` as grid functions.
pub fn problem_coefficients(p: &SpectralProblem) -> (GridFunction, GridFunction) {
    let s = p.scale().clone();
    let pg = GridFunction::new(s.clone(), -1, p.p_all().to_vec()).expect("P spans [ρ(a), b]");
    let qg = GridFunction::new(s, 0, p.q_all().to_vec()).expect("Q spans [a, b]");
    (pg, qg)
}

/// `Z = (X; PX^Δ)` with `S = (−μ_ρP^{ρ−1}Q, P^{ρ−1}; Q, 0)` and the
/// pointwise residual of `Z^∇ = SZ`.
#[derive(Debug, Clone)]
pub struct ZSystem {
    pub z: GridFunction,
    pub s: SymplecticSystem,
    /// `(index, ‖Z^∇ − SZ‖ / (‖Z^∇‖ + ‖S‖‖Z‖))`; absolute when the scale vanishes.
    pub residuals: Vec<(isize, f64)>,
}

impl ZSystem {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

/// `S(t_k) = (−μ_ρP_{k−1}⁻¹Q_k, P_{k−1}⁻¹; Q_k, 0)`.
fn second_order_s(pg: &GridFunction, qg: &GridFunction, k: isize) -> Result<CMatrix> {
    let mr = pg.scale().mu_rho(k);
    let prev = pg.at(k - 1);
    ensure_invertible(prev, "P", k - 1)?;
    let pinv = inverse(prev)?;
    let q = qg.at(k);
    let n = q.nrows();
    Ok(vconcat(&[
        &hconcat(&[&(-(&pinv * q) * cr(mr)), &pinv]),
        &hconcat(&[q, &CMatrix::zeros(n, n)]),
    ]))
}

pub fn second_order_to_z_system(
    pg: &GridFunction,
    qg: &GridFunction,
    x: &GridFunction,
) -> Result<ZSystem> {
    // Z at k needs X_{k+1} and P_k.
    let (zlo, zhi) = (x.lo().max(pg.lo()), (x.hi() - 1).min(pg.hi()));
    if zhi < zlo + 1 {
        return Err(Error::WindowTooSmall {
            lo: zlo,
            hi: zhi,
            what: "Z system needs two consecutive points",
        });
    }
    let s = x.scale().clone();
    let mut zs = Vec::new();
    for k in zlo..=zhi {
        let xd = (x.at(k + 1) - x.at(k)) * cr(1.0 / s.mu_sigma(k));
        zs.push(vconcat(&[x.at(k), &(pg.at(k) * xd)]));
    }
    let z = GridFunction::new(s.clone(), zlo, zs)?;
    let (slo, shi) = ((zlo + 1).max(qg.lo()), zhi.min(qg.hi()));
    if shi < slo {
        return Err(Error::WindowTooSmall {
            lo: slo,
            hi: shi,
            what: "no point where Z^∇, S and Z are all defined",
        });
    }
    let mut smats = Vec::new();
    let mut residuals = Vec::new();
    for k in slo..=shi {
        let sk = second_order_s(pg, qg, k)?;
        let znab = (z.at(k) - z.at(k - 1)) * cr(1.0 / s.mu_rho(k));
        let rhs = &sk * z.at(k);
        let res = (&znab - &rhs).norm();
        let size = znab.norm() + sk.norm() * z.at(k).norm();
        residuals.push((k, if size > 0.0 { res / size } else { res }));
        smats.push(sk);
    }
    Ok(ZSystem {
        z,
        s: SymplecticSystem::new(GridFunction::new(s, slo, smats)?)?,
        residuals,
    })
}

/// Solves `−(PX^Δ)^∇ + QX = 0` forward from `X(t_lo)`, `X(t_lo+1)`, where
/// `lo` is the first index of `P`. The result covers `[lo, hi(P) + 1]`.
pub fn generate_solution(
    pg: &GridFunction,
    qg: &GridFunction,
    x0: &CMatrix,
    x1: &CMatrix,
) -> Result<GridFunction> {
    let s = pg.scale().clone();
    let (lo, hi) = (pg.lo(), pg.hi());
    if !qg.covers(lo + 1, hi) {
        return Err(Error::WindowMismatch(format!(
            "Q must cover [{}, {hi}], got [{}, {}]",
            lo + 1,
            qg.lo(),
            qg.hi()
        )));
    }
    if !s.contains_index(hi + 1) {
        return Err(Error::WindowMismatch(format!(
            "index {} outside the scale",
            hi + 1
        )));
    }
    let mut xs = vec![x0.clone(), x1.clone()];
    ensure_invertible(pg.at(lo), "P", lo)?;
    let mut u = pg.at(lo) * (x1 - x0) * cr(1.0 / s.mu_sigma(lo));
    for k in (lo + 1)..=hi {
        let xk = xs.last().unwrap().clone();
        u += qg.at(k) * &xk * cr(s.mu_rho(k));
        ensure_invertible(pg.at(k), "P", k)?;
        let step = solve_linear(pg.at(k), &u)? * cr(s.mu_sigma(k));
        xs.push(&xk + step);
    }
    GridFunction::new(s, lo, xs)
}

/// `x^∇ = 𝒜x + 𝓑u^ρ, u^∇ = 𝒞x − 𝒜*u^ρ` on a window.
#[derive(Debug, Clone)]
pub struct HamiltonianSystem {
    pub a: GridFunction,
    pub b: GridFunction,
    pub c: GridFunction,
}

impl HamiltonianSystem {
    /// Checks that `𝓑`, `𝒞` are Hermitian and `I − μ_ρ𝒜*` is invertible.
    pub fn new(a: GridFunction, b: GridFunction, c: GridFunction, tol: f64) -> Result<Self> {
        if a.lo() != b.lo() || a.lo() != c.lo() || a.hi() != b.hi() || a.hi() != c.hi() {
            return Err(Error::WindowMismatch("A, B, C must share a window".into()));
        }
        let n = a.shape().0;
        if a.shape() != (n, n) || b.shape() != (n, n) || c.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.shape().0.max(c.shape().0),
            });
        }
        let s = a.scale().clone();
        for k in a.lo()..=a.hi() {
            for m in [b.at(k), c.at(k)] {
                let defect = hermitian_defect(m);
                if defect > tol * m.norm().max(1.0) {
                    return Err(Error::NotHermitian { defect });
                }
            }
            let shifted = CMatrix::identity(n, n) - a.at(k).adjoint() * cr(s.mu_rho(k));
            ensure_invertible(&shifted, "I − μ_ρA*", k)?;
        }
        Ok(Self { a, b, c })
    }

    pub fn n(&self) -> usize {
        self.a.shape().0
    }

    pub fn scale(&self) -> &Arc<IsolatedTimeScale> {
        self.a.scale()
    }

    pub fn window(&self) -> (isize, isize) {
        (self.a.lo(), self.a.hi())
    }

    /// `𝓗 = (𝒜, 𝓑; 𝒞, −𝒜*)`.
    pub fn h_block(&self, k: isize) -> CMatrix {
        let a = self.a.at(k);
        vconcat(&[
            &hconcat(&[a, self.b.at(k)]),
            &hconcat(&[self.c.at(k), &-a.adjoint()]),
        ])
    }

    pub fn h_blocks(&self) -> GridFunction {
        let (lo, hi) = self.window();
        GridFunction::from_fn(self.scale().clone(), lo, hi, |k, _| self.h_block(k))
            .expect("same window")
    }

    /// `H = (−𝒞, 𝒜*; 𝒜, 𝓑)` of the operator form.
    pub fn operator_h(&self) -> GridFunction {
        let (lo, hi) = self.window();
        GridFunction::from_fn(self.scale().clone(), lo, hi, |k, _| {
            let a = self.a.at(k);
            vconcat(&[
                &hconcat(&[&-self.c.at(k), &a.adjoint()]),
                &hconcat(&[a, self.b.at(k)]),
            ])
        })
        .expect("same window")
    }

    /// Residuals of both rows at every point where `(x, u)` and their
    /// `∇` and `ρ` are defined; `forcing` is added to the `u` row.
    pub fn residuals(
        &self,
        x: &GridFunction,
        u: &GridFunction,
        forcing: Option<&GridFunction>,
    ) -> Result<Vec<(isize, f64)>> {
        let (lo, hi) = self.window();
        let lo = lo.max(x.lo() + 1).max(u.lo() + 1);
        let hi = hi.min(x.hi()).min(u.hi());
        let s = self.scale();
        let mut out = Vec::new();
        for k in lo..=hi {
            let mr = s.mu_rho(k);
            let xn = (x.at(k) - x.at(k - 1)) * cr(1.0 / mr);
            let un = (u.at(k) - u.at(k - 1)) * cr(1.0 / mr);
            let ur = u.at(k - 1);
            let rx = self.a.at(k) * x.at(k) + self.b.at(k) * ur;
            let mut ru = self.c.at(k) * x.at(k) - self.a.at(k).adjoint() * ur;
            if let Some(f) = forcing {
                ru += f.at(k);
            }
            let res = ((&xn - &rx).norm().powi(2) + (&un - &ru).norm().powi(2)).sqrt();
            let size = xn.norm() + rx.norm() + un.norm() + ru.norm();
            out.push((k, if size > 0.0 { res / size } else { res }));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HamiltonianCheck {
    pub holds: bool,
    /// `max ‖𝓗*𝒥 + 𝒥𝓗‖`.
    pub hamiltonian_defect: f64,
    /// First index where `I + μ_ρ𝓗𝓜*𝓜` is singular.
    pub singular_at: Option<isize>,
}

/// Both parts of the Hamiltonian condition at every point of `h`.
pub fn hamiltonian_check(h: &GridFunction, tol: f64) -> Result<HamiltonianCheck> {
    let (rows, cols) = h.shape();
    if rows != cols || rows % 2 != 0 {
        return Err(Error::NotSquare { rows, cols });
    }
    let n = rows / 2;
    let j = symplectic_j(n);
    let mm = m_star_m(n);
    let s = h.scale();
    let mut defect: f64 = 0.0;
    let mut singular_at = None;
    for k in h.lo()..=h.hi() {
        let hk = h.at(k);
        defect = defect.max((hk.adjoint() * &j + &j * hk).norm() / hk.norm().max(1.0));
        let m = CMatrix::identity(rows, rows) + hk * &mm * cr(s.mu_rho(k));
        if singular_at.is_none() && rcond(&m)? <= SINGULAR {
            singular_at = Some(k);
        }
    }
    Ok(HamiltonianCheck {
        holds: defect <= tol && singular_at.is_none(),
        hamiltonian_defect: defect,
        singular_at,
    })
}

/// `z^∇ = 𝒮z` on a window.
#[derive(Debug, Clone)]
pub struct SymplecticSystem {
    pub s: GridFunction,
}

impl SymplecticSystem {
    pub fn new(s: GridFunction) -> Result<Self> {
        let (rows, cols) = s.shape();
        if rows != cols || rows % 2 != 0 {
            return Err(Error::NotSquare { rows, cols });
        }
        Ok(Self { s })
    }

    pub fn window(&self) -> (isize, isize) {
        (self.s.lo(), self.s.hi())
    }

    /// `‖𝒮*𝒥 + 𝒥𝒮 − μ_ρ𝒮*𝒥𝒮‖ / (1 + ‖𝒮‖ + μ_ρ‖𝒮‖²)` per point.
    pub fn symplectic_defects(&self) -> Vec<(isize, f64)> {
        let n = self.s.shape().0 / 2;
        let j = symplectic_j(n);
        let sc = self.s.scale();
        (self.s.lo()..=self.s.hi())
            .map(|k| {
                let m = self.s.at(k);
                let mr = sc.mu_rho(k);
                let lhs = m.adjoint() * &j + &j * m;
                let rhs = m.adjoint() * &j * m * cr(mr);
                let size = 1.0 + m.norm() + mr * m.norm_squared();
                (k, (lhs - rhs).norm() / size)
            })
            .collect()
    }

    pub fn max_symplectic_defect(&self) -> f64 {
        self.symplectic_defects()
            .iter()
            .map(|d| d.1)
            .fold(0.0, f64::max)
    }

    /// `z_k = (I − μ_ρ𝒮_k)⁻¹ z_{k−1}` from `z` at `lo − 1` through `hi`.
    pub fn propagate(&self, z_start: &CMatrix) -> Result<GridFunction> {
        let (lo, hi) = self.window();
        let sc = self.s.scale();
        let dim = self.s.shape().0;
        let mut zs = vec![z_start.clone()];
        for k in lo..=hi {
            let m = CMatrix::identity(dim, dim) - self.s.at(k) * cr(sc.mu_rho(k));
            ensure_invertible(&m, "I − μ_ρS", k)?;
            let next = solve_linear(&m, zs.last().unwrap())?;
            zs.push(next);
        }
        GridFunction::new(sc.clone(), lo - 1, zs)
    }
}

#[derive(Debug, Clone)]
pub struct SymplecticConversion {
    pub system: SymplecticSystem,
    /// `max ‖resolvent form − block form‖ / (1 + ‖𝒮‖)`.
    pub formula_disagreement: f64,
    pub symplectic_defect: f64,
}

/// `𝒮 = (I + μ_ρ𝓗𝓜*𝓜)⁻¹𝓗`, cross-checked against the explicit block form.
pub fn hamiltonian_to_symplectic(h: &HamiltonianSystem) -> Result<SymplecticConversion> {
    let n = h.n();
    let mm = m_star_m(n);
    let sc = h.scale().clone();
    let (lo, hi) = h.window();
    let mut mats = Vec::new();
    let mut disagreement: f64 = 0.0;
    for k in lo..=hi {
        let mr = sc.mu_rho(k);
        let hk = h.h_block(k);
        let res = CMatrix::identity(2 * n, 2 * n) + &hk * &mm * cr(mr);
        ensure_invertible(&res, "I + μ_ρHM*M", k)?;
        let s_res = solve_linear(&res, &hk)?;

        let (a, b, c) = (h.a.at(k), h.b.at(k), h.c.at(k));
        let e = CMatrix::identity(n, n) - a.adjoint() * cr(mr);
        let e_inv = inverse(&e)?;
        let s_block = vconcat(&[
            &hconcat(&[&(a - b * &e_inv * c * cr(mr)), &(b * &e_inv)]),
            &hconcat(&[&(&e_inv * c), &-(&e_inv * a.adjoint())]),
        ]);
        disagreement = disagreement.max((&s_res - &s_block).norm() / (1.0 + s_res.norm()));
        mats.push(s_res);
    }
    let system = SymplecticSystem::new(GridFunction::new(sc, lo, mats)?)?;
    let symplectic_defect = system.max_symplectic_defect();
    Ok(SymplecticConversion {
        system,
        formula_disagreement: disagreement,
        symplectic_defect,
    })
}

/// `𝒜 = 0, 𝓑 = P^{ρ−1}, 𝒞 = Q` on the points where `Q` and `P^ρ` exist.
pub fn second_order_hamiltonian(
    pg: &GridFunction,
    qg: &GridFunction,
    tol: f64,
) -> Result<HamiltonianSystem> {
    let lo = qg.lo().max(pg.lo() + 1);
    let hi = qg.hi().min(pg.hi() + 1);
    let s = pg.scale().clone();
    let d = qg.shape().0;
    let a = GridFunction::zeros(s.clone(), lo, hi, d, d)?;
    let mut bs = Vec::new();
    for k in lo..=hi {
        ensure_invertible(pg.at(k - 1), "P", k - 1)?;
        bs.push(inverse(pg.at(k - 1))?);
    }
    let b = GridFunction::new(s, lo, bs)?;
    HamiltonianSystem::new(a, b, qg.restrict(lo, hi)?, tol)
}

/// `y^{[0]}, …, y^{[2n]}` with their windows.
#[derive(Debug, Clone)]
pub struct PseudoDerivativeFrame {
    pub n: usize,
    pub y: GridFunction,
    /// `p_0, …, p_n`.
    pub coefficients: Vec<GridFunction>,
    /// `y^{[k]}` for `k = 0, …, 2n`.
    pub derivatives: Vec<GridFunction>,
}

impl PseudoDerivativeFrame {
    pub fn new(coefficients: Vec<GridFunction>, y: &GridFunction) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::InvalidParameter(
                "need coefficients p_0, …, p_n with n ≥ 1".into(),
            ));
        }
        let n = coefficients.len() - 1;
        let (lo, hi) = (y.lo(), y.hi());
        if hi - lo < 2 * n as isize {
            return Err(Error::WindowTooSmall {
                lo,
                hi,
                what: "pseudo-derivatives of order 2n need 2n + 1 points",
            });
        }
        if let Some(j) = coefficients.iter().position(|p| !p.covers(lo, hi)) {
            return Err(Error::WindowMismatch(format!(
                "p_{j} must cover [{lo}, {hi}]"
            )));
        }
        let pn = &coefficients[n];
        for k in lo..hi {
            if pn.at(k).norm() == 0.0 {
                return Err(Error::ZeroLeadingCoefficient { index: k });
            }
        }
        let times = |p: &GridFunction, f: &GridFunction| f.map(|k, v| p.at(k) * v);
        // y^{∇^{j}Δ}
        let nabla_delta = |j: usize| -> Result<GridFunction> {
            let mut word = vec![Derivative::Nabla; j];
            word.push(Derivative::Delta);
            iterated_derivative(y, &word)
        };

        let mut ds = Vec::with_capacity(2 * n + 1);
        ds.push(y.clone());
        for _ in 1..n {
            let next = nabla(ds.last().unwrap())?;
            ds.push(next);
        }
        ds.push(times(pn, &nabla_delta(n - 1)?)?);
        for k in 1..n {
            let term = times(&coefficients[n - k], &nabla_delta(n - k - 1)?)?;
            let prev = delta(ds.last().unwrap())?;
            let lo = term.lo().max(prev.lo());
            let hi = term.hi().min(prev.hi());
            ds.push(
                term.restrict(lo, hi)?
                    .zip_with(&prev.restrict(lo, hi)?, |_, a, b| a - b)?,
            );
        }
        let last = nabla(ds.last().unwrap())?;
        let p0y = times(&coefficients[0], y)?.restrict(last.lo(), last.hi())?;
        ds.push(p0y.zip_with(&last, |_, a, b| a - b)?);
        Ok(Self {
            n,
            y: y.clone(),
            coefficients,
            derivatives: ds,
        })
    }

    pub fn get(&self, k: usize) -> &GridFunction {
        &self.derivatives[k]
    }

    /// The window on which every relation can be evaluated.
    pub fn relation_window(&self) -> (isize, isize) {
        let n = self.n as isize;
        (self.y.lo() + n, self.y.hi() - n)
    }
}

/// `My = Σ_{j=0}^{n} (−1)^j (p_j y^{∇^{j−1}Δ})^{Δ^{j−1}∇}` evaluated term by
/// term, independently of the pseudo-derivative recursion.
pub fn sturm_liouville_operator(
    coefficients: &[GridFunction],
    y: &GridFunction,
) -> Result<GridFunction> {
    let n = coefficients.len() - 1;
    let (lo, hi) = (y.lo() + n as isize, y.hi() - n as isize);
    let mut acc = coefficients[0]
        .restrict(lo, hi)?
        .zip_with(&y.restrict(lo, hi)?, |_, p, v| p * v)?;
    for (j, cj) in coefficients.iter().enumerate().skip(1) {
        let mut inner = vec![Derivative::Nabla; j - 1];
        inner.push(Derivative::Delta);
        let f = iterated_derivative(y, &inner)?;
        let pf = f.map(|k, v| cj.at(k) * v)?;
        let mut outer = vec![Derivative::Delta; j - 1];
        outer.push(Derivative::Nabla);
        let term = iterated_derivative(&pf, &outer)?.restrict(lo, hi)?;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc = acc.zip_with(&term, |_, a, t| a + t * cr(sign))?;
    }
    Ok(acc)
}

#[derive(Debug, Clone)]
pub struct SturmLiouvilleConversion {
    pub frame: PseudoDerivativeFrame,
    /// `(y^{[0]}; …; y^{[n−1]})` on the relation window extended one point left.
    pub x: GridFunction,
    /// `(y^{[2n−1]}; …; y^{[n]})` on the same window.
    pub u: GridFunction,
    pub system: HamiltonianSystem,
    /// `My` on the relation window.
    pub my: GridFunction,
    /// Pointwise residuals of the Hamiltonian rows with `−My` in the first
    /// `u` row.
    pub residuals: Vec<(isize, f64)>,
    /// `max |y^{[2n]} − My|`, the recursion against the direct sum.
    pub my_consistency: f64,
}

impl SturmLiouvilleConversion {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

/// `𝒜` (ones above the diagonal), `𝓑 = diag(0, …, 1/p_n^ρ)`,
/// `𝒞 = diag(p_0, p_1^ρ, …, p_{n−1}^ρ)` on `[lo, hi]`.
pub fn sturm_liouville_system(
    coefficients: &[GridFunction],
    lo: isize,
    hi: isize,
) -> Result<HamiltonianSystem> {
    let n = coefficients.len() - 1;
    let s = coefficients[0].scale().clone();
    let a = GridFunction::from_fn(s.clone(), lo, hi, |_, _| {
        CMatrix::from_fn(n, n, |i, j| if j == i + 1 { cr(1.0) } else { cr(0.0) })
    })?;
    let mut bs = Vec::new();
    for k in lo..=hi {
        let pn = coefficients[n].at(k - 1)[(0, 0)];
        if pn.norm() == 0.0 {
            return Err(Error::ZeroLeadingCoefficient { index: k - 1 });
        }
        let mut b = CMatrix::zeros(n, n);
        b[(n - 1, n - 1)] = cr(1.0) / pn;
        bs.push(b);
    }
    let b = GridFunction::new(s.clone(), lo, bs)?;
    let c = GridFunction::from_fn(s, lo, hi, |k, _| {
        CMatrix::from_fn(n, n, |i, j| {
            if i != j {
                cr(0.0)
            } else if i == 0 {
                coefficients[0].at(k)[(0, 0)]
            } else {
                coefficients[i].at(k - 1)[(0, 0)]
            }
        })
    })?;
    HamiltonianSystem::new(a, b, c, 1e-12)
}

pub fn sturm_liouville_to_hamiltonian(
    coefficients: Vec<GridFunction>,
    y: &GridFunction,
) -> Result<SturmLiouvilleConversion> {
    let frame = PseudoDerivativeFrame::new(coefficients, y)?;
    let n = frame.n;
    let (rlo, rhi) = frame.relation_window();
    let s = y.scale().clone();
    let stack = |idx: &dyn Fn(usize) -> usize| {
        GridFunction::from_fn(s.clone(), rlo - 1, rhi, |k, _| {
            CMatrix::from_fn(n, 1, |i, _| frame.get(idx(i)).at(k)[(0, 0)])
        })
    };
    let x = stack(&|i| i)?;
    let u = stack(&|i| 2 * n - 1 - i)?;
    let system = sturm_liouville_system(&frame.coefficients, rlo, rhi)?;
    let my = sturm_liouville_operator(&frame.coefficients, y)?;
    let forcing = GridFunction::from_fn(s.clone(), rlo, rhi, |k, _| {
        CMatrix::from_fn(
            n,
            1,
            |i, _| if i == 0 { -my.at(k)[(0, 0)] } else { cr(0.0) },
        )
    })?;
    let residuals = system.residuals(&x, &u, Some(&forcing))?;
    let top = frame.get(2 * n);
    let my_consistency = (rlo..=rhi)
        .map(|k| (top.at(k) - my.at(k)).norm())
        .fold(0.0, f64::max);
    Ok(SturmLiouvilleConversion {
        frame,
        x,
        u,
        system,
        my,
        residuals,
        my_consistency,
    })
}

/// `ℓ(x, u)(t_k) = J(x^∇; u^∇) − H(x; u^ρ)`.
pub fn hamiltonian_ell(h: &GridFunction, x: &GridFunction, u: &GridFunction, k: isize) -> CMatrix {
    let d = x.shape().0;
    let mr = x.scale().mu_rho(k);
    let grad = vconcat(&[
        &((x.at(k) - x.at(k - 1)) * cr(1.0 / mr)),
        &((u.at(k) - u.at(k - 1)) * cr(1.0 / mr)),
    ]);
    operator_j(d) * grad - h.at(k) * vconcat(&[x.at(k), u.at(k - 1)])
}

/// `∫_{ρ(a)}^{b} {(y*, v^{ρ*})ℓ(x,u) − ℓ(y,v)*(x; u^ρ)} ∇t` against
/// `(y*, v*)J(x; u)|_{ρ(a)}^{b}`, where `[ρ(a), b]` is the common window of
/// the four functions and `H` covers its interior points.
pub fn hamiltonian_lagrange_residual(
    h: &GridFunction,
    x: &GridFunction,
    u: &GridFunction,
    y: &GridFunction,
    v: &GridFunction,
) -> Result<LagrangeCheck> {
    let (lo, hi) = window_of(&[x, u, y, v]);
    if hi <= lo {
        return Err(Error::WindowMismatch(format!(
            "common window [{lo}, {hi}] is too small"
        )));
    }
    if !h.covers(lo + 1, hi) {
        return Err(Error::WindowMismatch(format!(
            "H must cover [{}, {hi}], got [{}, {}]",
            lo + 1,
            h.lo(),
            h.hi()
        )));
    }
    let d = x.shape().0;
    if u.shape().0 != d || y.shape().0 != d || v.shape().0 != d || h.shape() != (2 * d, 2 * d) {
        return Err(Error::WindowMismatch("incompatible value shapes".into()));
    }
    let s = x.scale().clone();
    let mut terms = Vec::new();
    let mut scale = 0.0;
    for k in (lo + 1)..=hi {
        let left = vconcat(&[y.at(k), v.at(k - 1)]).adjoint() * hamiltonian_ell(h, x, u, k);
        let right = hamiltonian_ell(h, y, v, k).adjoint() * vconcat(&[x.at(k), u.at(k - 1)]);
        let mr = s.mu_rho(k);
        scale += mr * (left.norm() + right.norm());
        terms.push(left - right);
    }
    let integrand = GridFunction::new(s, lo + 1, terms)?;
    let lhs = crate::timescale::nabla_integral(&integrand, lo, hi)?[(0, 0)];
    let j = operator_j(d);
    let at = |k: isize| {
        (vconcat(&[y.at(k), v.at(k)]).adjoint() * &j * vconcat(&[x.at(k), u.at(k)]))[(0, 0)]
    };
    let (top, bottom) = (at(hi), at(lo));
    scale += top.norm() + bottom.norm();
    let rhs = top - bottom;
    Ok(LagrangeCheck {
        lhs,
        rhs,
        residual: lhs - rhs,
        scale,
    })
}
