//! Spectral problem instances: coefficients, boundary matrices and the
//! standing-hypothesis checks.

mod io;

use std::sync::Arc;

use serde::Serialize;

pub use io::{
    load_problem, matrix_from_json, matrix_to_json, problem_from_json, problem_to_json,
    save_problem, JsonMatrix, SCHEMA_VERSION,
};

use crate::error::{Error, Result};
use crate::matrixkit::{
    cr, hconcat, hermitian_defect, hermitian_eigendecompose, inverse, least_squares, svd, vconcat,
    CMatrix, DEFAULT_RANK_TOL,
};
use crate::timescale::{GridFunction, IsolatedTimeScale};

/// Default tolerance for hypothesis checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// `−(P x^Δ)^∇ + Q x = λ ω x` on `[a, b]` with boundary conditions
/// `R(−x^ρ(a); x(b)) + S(P^ρ(a)x^∇(a); P(b)x^Δ(b)) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProblem {
    scale: Arc<IsolatedTimeScale>,
    d: usize,
    /// Indices −1..=N−1.
    p: Vec<CMatrix>,
    /// Indices 0..=N−1.
    q: Vec<CMatrix>,
    /// Indices 0..=N−1.
    omega: Vec<CMatrix>,
    r: CMatrix,
    s: CMatrix,
}

impl SpectralProblem {
    /// Checks only the shapes; the analytic hypotheses are left to [`validate`].
    pub fn new(
        scale: IsolatedTimeScale,
        d: usize,
        p: Vec<CMatrix>,
        q: Vec<CMatrix>,
        omega: Vec<CMatrix>,
        r: CMatrix,
        s: CMatrix,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter(
                "dimension d must be positive".into(),
            ));
        }
        let n = scale.n();
        let counts = [
            ("P", p.len(), n + 1),
            ("Q", q.len(), n),
            ("omega", omega.len(), n),
        ];
        for (name, found, expected) in counts {
            if found != expected {
                return Err(Error::InvalidParameter(format!(
                    "{name}: expected {expected} matrices for N = {n}, found {found}"
                )));
            }
        }
        for (name, mats) in [("P", &p), ("Q", &q), ("omega", &omega)] {
            if let Some(i) = mats.iter().position(|m| m.shape() != (d, d)) {
                return Err(Error::InvalidParameter(format!(
                    "{name}[{i}] has shape {:?}, expected {d}x{d}",
                    mats[i].shape()
                )));
            }
        }
        for (name, m) in [("R", &r), ("S", &s)] {
            if m.shape() != (2 * d, 2 * d) {
                return Err(Error::InvalidParameter(format!(
                    "{name} has shape {:?}, expected {1}x{1}",
                    m.shape(),
                    2 * d
                )));
            }
        }
        for m in p.iter().chain(&q).chain(&omega).chain([&r, &s]) {
            crate::matrixkit::ensure_finite(m)?;
        }
        Ok(Self {
            scale: Arc::new(scale),
            d,
            p,
            q,
            omega,
            r,
            s,
        })
    }

    pub fn scale(&self) -> &Arc<IsolatedTimeScale> {
        &self.scale
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.scale.n()
    }

    /// Index of `b`.
    pub fn b(&self) -> isize {
        self.scale.b_index()
    }

    /// Length of the stacked vector `(x(t_{−1}); …; x(t_N))`.
    pub fn full_len(&self) -> usize {
        self.d * (self.n() + 2)
    }

    /// Column offset of `x(t_k)` in the stacked vector.
    pub fn col(&self, k: isize) -> usize {
        (k + 1) as usize * self.d
    }

    /// `P(t_k)`, `k ∈ [−1, N−1]`.
    pub fn p(&self, k: isize) -> &CMatrix {
        &self.p[(k + 1) as usize]
    }

    /// `Q(t_k)`, `k ∈ [0, N−1]`.
    pub fn q(&self, k: isize) -> &CMatrix {
        &self.q[k as usize]
    }

    /// `ω(t_k)`, `k ∈ [0, N−1]`.
    pub fn omega(&self, k: isize) -> &CMatrix {
        &self.omega[k as usize]
    }

    pub fn p_all(&self) -> &[CMatrix] {
        &self.p
    }

    pub fn q_all(&self) -> &[CMatrix] {
        &self.q
    }

    pub fn omega_all(&self) -> &[CMatrix] {
        &self.omega
    }

    pub fn r(&self) -> &CMatrix {
        &self.r
    }

    pub fn s(&self) -> &CMatrix {
        &self.s
    }

    /// `(R₁, R₂)`, the two `2d × d` column blocks of `R`.
    pub fn r_blocks(&self) -> (CMatrix, CMatrix) {
        let d = self.d;
        (
            self.r.columns(0, d).into_owned(),
            self.r.columns(d, d).into_owned(),
        )
    }

    pub fn s_blocks(&self) -> (CMatrix, CMatrix) {
        let d = self.d;
        (
            self.s.columns(0, d).into_owned(),
            self.s.columns(d, d).into_owned(),
        )
    }

    /// `P̃(t) = Q(t) + P(t)/(μ_ρ μ_σ)(t) + P^ρ(t)/μ_ρ²(t)` for `k ∈ [0, N−1]`.
    pub fn p_tilde(&self, k: isize) -> CMatrix {
        let mr = self.scale.mu_rho(k);
        let ms = self.scale.mu_sigma(k);
        self.q(k) + self.p(k) * cr(1.0 / (mr * ms)) + self.p(k - 1) * cr(1.0 / (mr * mr))
    }

    /// The same problem with `Q` replaced by `Q + c·ω`.
    pub fn with_shifted_q(&self, c: f64) -> Self {
        let mut out = self.clone();
        for (q, w) in out.q.iter_mut().zip(&self.omega) {
            *q += w * cr(c);
        }
        out
    }

    pub fn with_boundary(&self, r: CMatrix, s: CMatrix) -> Result<Self> {
        Self::new(
            (*self.scale).clone(),
            self.d,
            self.p.clone(),
            self.q.clone(),
            self.omega.clone(),
            r,
            s,
        )
    }

    pub fn with_omega(&self, omega: Vec<CMatrix>) -> Result<Self> {
        Self::new(
            (*self.scale).clone(),
            self.d,
            self.p.clone(),
            self.q.clone(),
            omega,
            self.r.clone(),
            self.s.clone(),
        )
    }

    /// The `2d × d(N+2)` matrix of the boundary conditions acting on the
    /// stacked vector.
    pub fn boundary_rows(&self) -> CMatrix {
        let d = self.d;
        let b = self.b();
        let mra = self.scale.mu_rho(0);
        let msb = self.scale.mu_sigma(b);
        let (r1, r2) = self.r_blocks();
        let (s1, s2) = self.s_blocks();
        let s1p = &s1 * self.p(-1) * cr(1.0 / mra);
        let s2p = &s2 * self.p(b) * cr(1.0 / msb);

        let mut rows = CMatrix::zeros(2 * d, self.full_len());
        let mut put = |k: isize, block: &CMatrix| {
            let c = self.col(k);
            let mut view = rows.view_mut((0, c), (2 * d, d));
            view += block;
        };
        put(-1, &(-(&r1) - &s1p));
        put(0, &s1p);
        put(b, &(&r2 - &s2p));
        put(b + 1, &s2p);
        rows
    }

    /// `(−x^ρ(a); x(b))` and `(P^ρ(a)x^∇(a); P(b)x^Δ(b))`.
    pub fn boundary_traces(&self, x: &GridFunction) -> Result<(CMatrix, CMatrix)> {
        let b = self.b();
        if !x.covers(-1, b + 1) {
            return Err(Error::WindowMismatch(format!(
                "boundary traces need [-1, {}], got [{}, {}]",
                b + 1,
                x.lo(),
                x.hi()
            )));
        }
        let s = &self.scale;
        let values = vconcat(&[&-x.at(-1), x.at(b)]);
        let grad_a = self.p(-1) * (x.at(0) - x.at(-1)) * cr(1.0 / s.mu_rho(0));
        let grad_b = self.p(b) * (x.at(b + 1) - x.at(b)) * cr(1.0 / s.mu_sigma(b));
        Ok((values, vconcat(&[&grad_a, &grad_b])))
    }

    /// `ω(t_k)⁻¹`.
    pub fn omega_inverse(&self, k: isize) -> Result<CMatrix> {
        inverse(self.omega(k))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub mandatory: bool,
    pub passed: bool,
    /// Measured quantity; its meaning depends on the check.
    pub value: f64,
    /// Grid index of the worst offender, when the check is per point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<isize>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub tol: f64,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| c.mandatory && !c.passed)
    }
}

fn hermiticity_check(name: &str, mats: &[CMatrix], first_index: isize, tol: f64) -> CheckResult {
    let (worst_i, worst) = mats
        .iter()
        .enumerate()
        .map(|(i, m)| (i, hermitian_defect(m) / m.norm().max(1.0)))
        .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
    let index = first_index + worst_i as isize;
    CheckResult {
        name: format!("{name}_hermitian"),
        mandatory: true,
        passed: worst <= tol,
        value: worst,
        index: Some(index),
        detail: format!("max relative ‖{name} − {name}*‖ = {worst:.3e} at index {index}"),
    }
}

fn invertibility_check(name: &str, m: &CMatrix, index: isize, tol: f64) -> CheckResult {
    let sv = svd(m).map(|s| s.singular_values).unwrap_or_default();
    let top = sv.first().copied().unwrap_or(0.0);
    let bottom = sv.last().copied().unwrap_or(0.0);
    let rel = if top > 0.0 { bottom / top } else { 0.0 };
    CheckResult {
        name: format!("{name}_invertible"),
        mandatory: true,
        passed: bottom > 0.0 && rel > tol,
        value: bottom,
        index: Some(index),
        detail: format!("singular values {sv:?}"),
    }
}

/// Numerically checks every standing hypothesis. Never fails; problems
/// live in the report.
pub fn validate(p: &SpectralProblem, tol: f64) -> ValidationReport {
    let mut checks = vec![
        hermiticity_check("P", &p.p, -1, tol),
        hermiticity_check("Q", &p.q, 0, tol),
        hermiticity_check("omega", &p.omega, 0, tol),
    ];

    let (worst_k, min_eig) = p
        .omega
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let e = hermitian_eigendecompose(w, f64::INFINITY)
                .map(|e| e.eigenvalues[0])
                .unwrap_or(f64::NAN);
            (k as isize, e)
        })
        .fold((0, f64::INFINITY), |acc, cur| {
            // NaN (a failed decomposition) wins, so it is reported.
            if cur.1.is_nan() || cur.1 < acc.1 {
                cur
            } else {
                acc
            }
        });
    let scale_w = p.omega.iter().map(|w| w.norm()).fold(0.0, f64::max);
    checks.push(CheckResult {
        name: "omega_positive_definite".into(),
        mandatory: true,
        passed: min_eig > tol * scale_w.max(1.0),
        value: min_eig,
        index: Some(worst_k),
        detail: format!("min eigenvalue of omega = {min_eig:.6e} at index {worst_k}"),
    });

    checks.push(invertibility_check("P_rho_a", p.p(-1), -1, tol));
    checks.push(invertibility_check("P_b", p.p(p.b()), p.b(), tol));

    let rs = hconcat(&[&p.r, &p.s]);
    let rank = crate::matrixkit::rank_with_tolerance(&rs, DEFAULT_RANK_TOL).unwrap_or(0);
    checks.push(CheckResult {
        name: "rank_RS".into(),
        mandatory: true,
        passed: rank == 2 * p.d,
        value: rank as f64,
        index: None,
        detail: format!("rank(R, S) = {rank}, required {}", 2 * p.d),
    });

    let defect = self_adjoint_defect(&p.r, &p.s);
    let bound = tol * (p.r.norm() * p.s.norm() + 1.0);
    checks.push(CheckResult {
        name: "self_adjoint_bc".into(),
        mandatory: false,
        passed: defect <= bound,
        value: defect,
        index: None,
        detail: format!("‖SR* − RS*‖ = {defect:.3e} (bound {bound:.3e})"),
    });

    let pass = checks.iter().all(|c| !c.mandatory || c.passed);
    ValidationReport { pass, tol, checks }
}

fn self_adjoint_defect(r: &CMatrix, s: &CMatrix) -> f64 {
    (s * r.adjoint() - r * s.adjoint()).norm()
}

/// `SR* = RS*` test; returns the verdict and `‖SR* − RS*‖`.
pub fn check_self_adjoint_bc(r: &CMatrix, s: &CMatrix, tol: f64) -> Result<(bool, f64)> {
    let rows = r.nrows();
    let rank = crate::matrixkit::rank_with_tolerance(&hconcat(&[r, s]), DEFAULT_RANK_TOL)?;
    if rank < rows {
        return Err(Error::RankDeficient {
            rank,
            expected: rows,
        });
    }
    let defect = self_adjoint_defect(r, s);
    Ok((defect <= tol * (r.norm() * s.norm() + 1.0), defect))
}

/// Outcome of the η-parametrization test.
#[derive(Debug, Clone)]
pub struct EtaCheck {
    pub holds: bool,
    pub eta: CMatrix,
    /// Relative least-squares residual.
    pub residual: f64,
    /// Whether `(−S*; R*)` has full column rank.
    pub unique: bool,
}

/// Finds `η` with `(−x^ρ(a); x(b)) = −S*η` and
/// `(P^ρ(a)x^∇(a); P(b)x^Δ(b)) = R*η` by least squares.
pub fn eta_parametrization_check(
    p: &SpectralProblem,
    x: &GridFunction,
    tol: f64,
) -> Result<EtaCheck> {
    let (values, grads) = p.boundary_traces(x)?;
    let bc = &p.r * &values + &p.s * &grads;
    let size = (p.r.norm() + p.s.norm()) * (values.norm() + grads.norm()).max(x.max_abs());
    let bc_rel = if size > 0.0 {
        bc.norm() / size
    } else {
        bc.norm()
    };
    if bc_rel > tol {
        return Err(Error::NotInBoundarySet { residual: bc_rel });
    }
    let stacked = vconcat(&[&-p.s.adjoint(), &p.r.adjoint()]);
    let rhs = vconcat(&[&values, &grads]);
    let (eta, res) = least_squares(&stacked, &rhs, DEFAULT_RANK_TOL)?;
    let unique = crate::matrixkit::rank_with_tolerance(&stacked, DEFAULT_RANK_TOL)? == 2 * p.d;
    let scale = rhs.norm().max(x.max_abs());
    let residual = if scale == 0.0 { res } else { res / scale };
    Ok(EtaCheck {
        holds: residual <= tol && unique,
        eta,
        residual,
        unique,
    })
}
