//! Seeded random instances: matrices, grid functions and self-adjoint
//! spectral problems with a prescribed `r`.
//!
//! Boundary matrices come in two flavours. Without a target `r`, `S = G`
//! is a random invertible matrix and `R = K G^{−*}` for a random Hermitian
//! `K`, so `SR* = K = RS*`. With a target `r`, `(R, S) = G (diag(cos θ) W,
//! diag(sin θ) W)` for a unitary `W`; rows of `W` aligned with an
//! eigenvector of `P^ρ(a)` (with `tan θ = −μ_ρ(a)/p`) impose `v*x(a) = 0`,
//! rows supported on the `x(b)` block with `θ = 0` impose `f*x(b) = 0`, and
//! each such row removes one from the rank of `Γ`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrixkit::{c, cr, hermitian_eigendecompose, inverse, vconcat, CMatrix, C64};
use crate::problem::SpectralProblem;
use crate::timescale::{make_scale, GridFunction, IsolatedTimeScale, ScaleKind};

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut impl Rng) -> C64 {
    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| random_complex(rng))
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> CMatrix {
    let x = random_matrix(rng, n, n);
    (&x + x.adjoint()) * cr(0.5)
}

/// Random unitary from the eigenvectors of a random Hermitian matrix.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
    hermitian_eigendecompose(&random_hermitian(rng, n), 1e-12)
        .expect("Hermitian by construction")
        .eigenvectors
}

/// `U diag(s) V` with singular values drawn from `[lo, hi]`.
pub fn random_conditioned(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> CMatrix {
    let u = random_unitary(rng, n);
    let v = random_unitary(rng, n);
    let s: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    u * crate::matrixkit::real_diag(&s) * v
}

/// Hermitian with eigenvalues of random sign and modulus in `[lo, hi]`.
pub fn random_hermitian_invertible(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> CMatrix {
    let u = random_unitary(rng, n);
    let e: Vec<f64> = (0..n)
        .map(|_| {
            let m = rng.gen_range(lo..hi);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    &u * crate::matrixkit::real_diag(&e) * u.adjoint()
}

pub fn random_positive_definite(rng: &mut impl Rng, n: usize) -> CMatrix {
    let y = random_matrix(rng, n, n);
    &y * y.adjoint() * cr(0.5) + CMatrix::identity(n, n) * cr(rng.gen_range(0.5..1.5))
}

/// Random vector-valued (`cols == 1`) or matrix-valued function on `[lo, hi]`.
pub fn random_grid_function(
    rng: &mut impl Rng,
    scale: &Arc<IsolatedTimeScale>,
    lo: isize,
    hi: isize,
    rows: usize,
    cols: usize,
) -> GridFunction {
    GridFunction::from_fn(scale.clone(), lo, hi, |_, _| random_matrix(rng, rows, cols))
        .expect("window inside the scale")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleChoice {
    /// Unit step, `a = 0`.
    UnitUniform,
    Uniform,
    Q,
    Random,
    /// One of the above, chosen by the seed.
    Mixed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub d: usize,
    pub n: usize,
    pub scale: ScaleChoice,
    /// `None` draws `(R, S)` with `S` invertible (generically `r = 2d`).
    pub target_r: Option<usize>,
    /// Make every interior `P(t_k)`, `k ∈ [0, N−2]`, rank deficient.
    pub singular_interior_p: bool,
}

impl ProblemSpec {
    pub fn new(d: usize, n: usize) -> Self {
        Self {
            d,
            n,
            scale: ScaleChoice::Mixed,
            target_r: None,
            singular_interior_p: false,
        }
    }

    pub fn with_scale(mut self, scale: ScaleChoice) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_r(mut self, r: usize) -> Self {
        self.target_r = Some(r);
        self
    }

    pub fn with_singular_interior_p(mut self) -> Self {
        self.singular_interior_p = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub problem: SpectralProblem,
    pub seed: u64,
    pub target_r: Option<usize>,
}

fn draw_scale(rng: &mut TestRng, choice: ScaleChoice, n: usize) -> IsolatedTimeScale {
    let choice = match choice {
        ScaleChoice::Mixed => {
            [ScaleChoice::Uniform, ScaleChoice::Q, ScaleChoice::Random][rng.gen_range(0..3)]
        }
        other => other,
    };
    let kind = match choice {
        ScaleChoice::UnitUniform => ScaleKind::Uniform { h: 1.0 },
        ScaleChoice::Uniform => ScaleKind::Uniform {
            h: rng.gen_range(0.3..2.0),
        },
        ScaleChoice::Q => ScaleKind::Qscale {
            q: rng.gen_range(1.1..1.6),
            t0: rng.gen_range(0.5..2.0),
        },
        ScaleChoice::Random | ScaleChoice::Mixed => ScaleKind::Random { seed: rng.gen() },
    };
    make_scale(&kind, n).expect("generator parameters are valid")
}

/// `(R, S) = (K G^{−*}, G)`: self-adjoint with `SR* = K`.
pub fn hermitian_pair_bc(rng: &mut TestRng, d: usize) -> (CMatrix, CMatrix) {
    let g = random_conditioned(rng, 2 * d, 0.5, 2.0);
    let k = random_hermitian(rng, 2 * d);
    let g_inv_adj = inverse(&g.adjoint()).expect("well conditioned");
    (k * g_inv_adj, g)
}

/// Self-adjoint `(R, S)` whose `Γ` has rank `r` for the given `P^ρ(a)`, `μ_ρ(a)`.
pub fn bc_with_rank(
    rng: &mut TestRng,
    d: usize,
    r: usize,
    p_rho_a: &CMatrix,
    mu_rho_a: f64,
) -> (CMatrix, CMatrix) {
    assert!(r <= 2 * d);
    let deficit = 2 * d - r;
    // Split the deficit between the two endpoints, at most d each.
    let lo_a = deficit.saturating_sub(d);
    let hi_a = deficit.min(d);
    let k_a = rng.gen_range(lo_a..=hi_a);
    let k_b = deficit - k_a;

    let n2 = 2 * d;
    let mut rows: Vec<CMatrix> = Vec::with_capacity(n2);
    let mut thetas: Vec<f64> = Vec::with_capacity(n2);

    let eig = hermitian_eigendecompose(p_rho_a, 1e-10).expect("P is Hermitian");
    let mut picks: Vec<usize> = (0..d).collect();
    for i in 0..d {
        let j = rng.gen_range(i..d);
        picks.swap(i, j);
    }
    for &j in picks.iter().take(k_a) {
        let v = eig.eigenvectors.column(j);
        let mut w = CMatrix::zeros(1, n2);
        for i in 0..d {
            w[(0, i)] = v[i].conj();
        }
        rows.push(w);
        thetas.push((-mu_rho_a / eig.eigenvalues[j]).atan());
    }
    let fb = random_unitary(rng, d);
    for j in 0..k_b {
        let mut w = CMatrix::zeros(1, n2);
        for i in 0..d {
            w[(0, d + i)] = fb[(i, j)].conj();
        }
        rows.push(w);
        thetas.push(0.0);
    }

    // Orthonormal complement of the special rows, mixed by a random unitary.
    let special = if rows.is_empty() {
        CMatrix::zeros(0, n2)
    } else {
        vconcat(&rows.iter().collect::<Vec<_>>())
    };
    let complement = if special.nrows() == 0 {
        CMatrix::identity(n2, n2)
    } else {
        crate::matrixkit::null_space_basis(&special, 1e-10)
            .expect("special rows are orthonormal")
            .adjoint()
    };
    let mix = random_unitary(rng, complement.nrows());
    let generic = mix * complement;
    for i in 0..generic.nrows() {
        rows.push(generic.rows(i, 1).into_owned());
        thetas.push(rng.gen_range(0.2..std::f64::consts::PI - 0.2));
    }

    let w = vconcat(&rows.iter().collect::<Vec<_>>());
    let cos = crate::matrixkit::real_diag(&thetas.iter().map(|t| t.cos()).collect::<Vec<_>>());
    let sin = crate::matrixkit::real_diag(&thetas.iter().map(|t| t.sin()).collect::<Vec<_>>());
    let g = random_conditioned(rng, n2, 0.5, 2.0);
    (&g * cos * &w, &g * sin * &w)
}

pub fn random_problem(spec: &ProblemSpec, seed: u64) -> GeneratedProblem {
    let mut rng = rng(seed);
    let (d, n) = (spec.d, spec.n);
    let scale = draw_scale(&mut rng, spec.scale, n);

    let mut p = Vec::with_capacity(n + 1);
    for k in -1..n as isize {
        let endpoint = k == -1 || k == n as isize - 1;
        let m = if endpoint {
            random_hermitian_invertible(&mut rng, d, 0.5, 2.0)
        } else if spec.singular_interior_p {
            // Rank d − 1 (zero when d = 1).
            let u = random_unitary(&mut rng, d);
            let e: Vec<f64> = (0..d)
                .map(|i| if i == 0 { 0.0 } else { rng.gen_range(0.5..2.0) })
                .collect();
            &u * crate::matrixkit::real_diag(&e) * u.adjoint()
        } else {
            random_hermitian(&mut rng, d) + CMatrix::identity(d, d) * cr(rng.gen_range(-1.0..1.0))
        };
        p.push(m);
    }
    let q = (0..n).map(|_| random_hermitian(&mut rng, d)).collect();
    let omega = (0..n)
        .map(|_| random_positive_definite(&mut rng, d))
        .collect();

    let (r, s) = match spec.target_r {
        None => hermitian_pair_bc(&mut rng, d),
        Some(target) => bc_with_rank(&mut rng, d, target, &p[0], scale.mu_rho(0)),
    };
    let problem = SpectralProblem::new(scale, d, p, q, omega, r, s).expect("shapes are consistent");
    GeneratedProblem {
        problem,
        seed,
        target_r: spec.target_r,
    }
}

/// A random problem for `verify --random`: `r` and scale kind vary with the index.
pub fn sweep_problem(d: usize, n: usize, seed: u64, index: usize) -> GeneratedProblem {
    let mut pick = rng(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let target_r = pick.gen_range(0..=2 * d);
    let mut spec = ProblemSpec::new(d, n).with_r(target_r);
    if pick.gen_bool(0.25) {
        spec = spec.with_singular_interior_p();
    }
    random_problem(&spec, pick.gen())
}

/// Random Hamiltonian system on `[lo, hi]` with Hermitian `𝓑`, `𝒞` and
/// `‖μ_ρ𝒜‖ < 1/2`, so `I − μ_ρ𝒜*` is well conditioned.
pub fn random_hamiltonian_system(
    rng: &mut TestRng,
    scale: &Arc<IsolatedTimeScale>,
    lo: isize,
    hi: isize,
    n: usize,
) -> crate::hamiltonian::HamiltonianSystem {
    let mu_max = (lo..=hi).map(|k| scale.mu_rho(k)).fold(0.0, f64::max);
    let shrink = 0.3 / (n as f64 * mu_max);
    let a = GridFunction::from_fn(scale.clone(), lo, hi, |_, _| {
        random_matrix(rng, n, n) * cr(shrink)
    })
    .unwrap();
    let b = GridFunction::from_fn(scale.clone(), lo, hi, |_, _| random_hermitian(rng, n)).unwrap();
    let c = GridFunction::from_fn(scale.clone(), lo, hi, |_, _| random_hermitian(rng, n)).unwrap();
    crate::hamiltonian::HamiltonianSystem::new(a, b, c, 1e-12).expect("valid by construction")
}
