//! Acceptance suite: every property the library promises, measured on a
//! randomized sweep and reported as one PASS/FAIL line per criterion.

use std::io::Write;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use rand::Rng;
use tsspec::boundary::{build_admissible_space, compute_r, expected_dimension};
use tsspec::generate::{
    random_complex, random_grid_function, random_hamiltonian_system, random_matrix, random_problem,
    rng, GeneratedProblem, ProblemSpec, ScaleChoice,
};
use tsspec::hamiltonian::{
    generate_solution, hamiltonian_lagrange_residual, hamiltonian_to_symplectic,
    problem_coefficients, second_order_to_z_system, sturm_liouville_to_hamiltonian,
};
use tsspec::matrixkit::cr;
use tsspec::operator::lagrange_residual;
use tsspec::problem::DEFAULT_TOL;
use tsspec::spectral::{
    brute_force_oracle, dual_orthogonality_check, expand, parseval_check, reconstruct,
    solve_spectrum, spectral_resolution,
};
use tsspec::timescale::{make_scale, ScaleKind};
use tsspec::verify::resolution_step_defect;
use tsspec::{CMatrix, CVector, Error, GridFunction, SpectralProblem, SpectralResult};

const SWEEP_SIZE: usize = 210;

fn report(id: usize, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "ACCEPTANCE {id:>2} {:<4} {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn finish(id: usize, name: &str, failures: &[String], detail: String) {
    report(id, name, failures.is_empty(), &detail);
    assert!(
        failures.is_empty(),
        "criterion {id} ({name}) failed:\n{}",
        failures.join("\n")
    );
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `d ∈ {1,2,3}`, `N ∈ {2..8}`, every scale kind, every rank `r` in `0..=2d`
/// plus generic proper conditions, and some rank-deficient interior `P`.
fn sweep_spec(i: usize) -> (ProblemSpec, u64) {
    let d = 1 + i % 3;
    let n = 2 + (i / 3) % 7;
    let variant = i / 21;
    let scale = [
        ScaleChoice::UnitUniform,
        ScaleChoice::Uniform,
        ScaleChoice::Q,
        ScaleChoice::Random,
    ][variant % 4];
    let mut spec = ProblemSpec::new(d, n).with_scale(scale);
    // Variants 0 and 5 keep the generic (proper) conditions.
    if !variant.is_multiple_of(5) {
        spec = spec.with_r((variant + i) % (2 * d + 1));
    }
    if variant % 3 == 2 {
        spec = spec.with_singular_interior_p();
    }
    (spec, 1000 + i as u64)
}

fn sweep_problems() -> Vec<GeneratedProblem> {
    (0..SWEEP_SIZE)
        .map(|i| {
            let (spec, seed) = sweep_spec(i);
            random_problem(&spec, seed)
        })
        .collect()
}

struct Case {
    gen: GeneratedProblem,
    res: SpectralResult,
}

impl Case {
    fn p(&self) -> &SpectralProblem {
        &self.gen.problem
    }

    fn label(&self) -> String {
        let p = self.p();
        format!(
            "seed {} (d={}, N={}, r={})",
            self.gen.seed,
            p.d(),
            p.n(),
            self.res.r
        )
    }
}

fn sweep() -> &'static [Case] {
    static CASES: OnceLock<Vec<Case>> = OnceLock::new();
    CASES.get_or_init(|| {
        sweep_problems()
            .into_iter()
            .map(|gen| {
                let res = solve_spectrum(&gen.problem)
                    .unwrap_or_else(|e| panic!("seed {}: {e}", gen.seed));
                Case { gen, res }
            })
            .collect()
    })
}

fn random_admissible(g: &mut impl Rng, case: &Case) -> GridFunction {
    let c = CVector::from_fn(case.res.m, |_, _| random_complex(g));
    case.res.space.combine(case.p(), &c)
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

#[test]
fn criterion_01_dimension_law() {
    let start = Instant::now();
    let problems = sweep_problems();
    let mut failures = Vec::new();
    let mut kinds = std::collections::BTreeSet::new();
    for gen in &problems {
        let p = &gen.problem;
        let r = compute_r(p).expect("Γ is computable");
        let space = build_admissible_space(p, DEFAULT_TOL).expect("admissible space");
        let expected = expected_dimension(p.d(), p.n(), r);
        kinds.insert((p.d(), r));
        if space.m != expected {
            failures.push(format!(
                "seed {}: m = {} ≠ d(N−2)+r = {expected}",
                gen.seed, space.m
            ));
        }
        if let Some(t) = gen.target_r {
            if t != r {
                failures.push(format!(
                    "seed {}: r = {r}, constructed with rank {t}",
                    gen.seed
                ));
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30) {
        failures.push(format!("runtime {:.1} s > 30 s", secs(elapsed)));
    }
    finish(
        1,
        "dimension law m = d(N−2)+r",
        &failures,
        format!(
            "{} problems, {} distinct (d, r), {} mismatches, {:.2} s",
            problems.len(),
            kinds.len(),
            failures.len(),
            secs(elapsed)
        ),
    );
}

#[test]
fn criterion_02_lagrange_identity() {
    let start = Instant::now();
    let problems: Vec<GeneratedProblem> = (0..50)
        .map(|i| {
            let (s, seed) = sweep_spec(i * 4 + 1);
            random_problem(&s, seed)
        })
        .collect();
    let mut g = rng(2);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for i in 0..500 {
        let p = &problems[i % problems.len()].problem;
        let (d, n) = (p.d(), p.n() as isize);
        let x = random_grid_function(&mut g, p.scale(), -1, n, d, 1);
        let y = random_grid_function(&mut g, p.scale(), -1, n, d, 1);
        let chk = lagrange_residual(p, &x, &y).expect("window covers the problem");
        let rel = chk.residual.norm() / chk.scale;
        worst = worst.max(rel);
        if rel > 1e-11 {
            failures.push(format!("pair {i}: {rel:e}"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(5) {
        failures.push(format!("runtime {:.2} s > 5 s", secs(elapsed)));
    }
    finish(
        2,
        "Lagrange identity",
        &failures,
        format!(
            "500 pairs, max |LHS−RHS|/scale = {worst:.2e} (≤ 1e-11), {:.2} s",
            secs(elapsed)
        ),
    );
}

#[test]
fn criterion_03_self_adjointness() {
    let mut g = rng(3);
    let (mut herm, mut sym): (f64, f64) = (0.0, 0.0);
    let mut failures = Vec::new();
    for case in sweep() {
        let op = &case.res.operator;
        let rel = if op.a.norm() > 0.0 {
            op.hermiticity_defect / op.a.norm()
        } else {
            op.hermiticity_defect
        };
        herm = herm.max(rel);
        if rel > 1e-10 {
            failures.push(format!("{}: hermiticity {rel:e}", case.label()));
        }
        if case.res.m == 0 {
            continue;
        }
        for _ in 0..5 {
            let x = random_admissible(&mut g, case);
            let y = random_admissible(&mut g, case);
            let chk = lagrange_residual(case.p(), &x, &y).unwrap();
            // lhs = ⟨ℓx, y⟩ − ⟨x, ℓy⟩
            let rel = chk.lhs.norm() / chk.scale;
            sym = sym.max(rel);
            if rel > 1e-10 {
                failures.push(format!("{}: ⟨ℓx,y⟩−⟨x,ℓy⟩ = {rel:e}", case.label()));
            }
        }
    }
    finish(
        3,
        "operator self-adjointness",
        &failures,
        format!(
            "max ‖A−A*‖/‖A‖ = {herm:.2e}, max admissible asymmetry/scale = {sym:.2e} (≤ 1e-10)"
        ),
    );
}

#[test]
fn criterion_04_spectrum() {
    let (mut gram_worst, mut res_worst): (f64, f64) = (0.0, 0.0);
    let mut failures = Vec::new();
    let mut total = 0;
    for case in sweep() {
        let res = &case.res;
        total += res.eigenvalues.len();
        if res.eigenvalues.len() != res.m || res.eigenfunctions.len() != res.m {
            failures.push(format!(
                "{}: {} eigenvalues for m = {}",
                case.label(),
                res.eigenvalues.len(),
                res.m
            ));
        }
        if res.eigenvalues.iter().any(|l| !l.is_finite()) {
            failures.push(format!("{}: non-finite eigenvalue", case.label()));
        }
        let x = res.eigenfunction_matrix();
        let gram = x.adjoint() * res.space.weight() * &x;
        let defect = max_abs(&(gram - CMatrix::identity(res.m, res.m)));
        gram_worst = gram_worst.max(defect);
        if defect > 1e-10 {
            failures.push(format!("{}: Gram defect {defect:e}", case.label()));
        }
        let worst = res.relative_residuals.iter().copied().fold(0.0, f64::max);
        res_worst = res_worst.max(worst);
        if worst > 1e-9 {
            failures.push(format!("{}: eigen residual {worst:e}", case.label()));
        }
    }
    finish(
        4,
        "spectrum: m real eigenvalues, orthonormal, residuals",
        &failures,
        format!("{total} eigenpairs, max Gram defect = {gram_worst:.2e} (≤ 1e-10), max residual/scale = {res_worst:.2e} (≤ 1e-9)"),
    );
}

#[test]
fn criterion_05_oracle_equivalence() {
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for case in sweep() {
        let o = brute_force_oracle(case.p()).unwrap_or_else(|e| panic!("{}: {e}", case.label()));
        if o.pencil_dimension != case.res.m {
            failures.push(format!(
                "{}: oracle dimension {} ≠ m = {}",
                case.label(),
                o.pencil_dimension,
                case.res.m
            ));
            continue;
        }
        for (a, b) in case.res.eigenvalues.iter().zip(&o.eigenvalues) {
            let rel = (a - b).abs() / (1.0 + a.abs());
            worst = worst.max(rel);
            if rel > 1e-9 {
                failures.push(format!("{}: λ = {a} vs oracle {b}", case.label()));
            }
        }
    }
    finish(
        5,
        "oracle equivalence",
        &failures,
        format!(
            "{} problems, max |Δλ|/(1+|λ|) = {worst:.2e} (≤ 1e-9)",
            sweep().len()
        ),
    );
}

#[test]
fn criterion_06_completeness_and_parseval() {
    let mut g = rng(6);
    let (mut recon, mut pars): (f64, f64) = (0.0, 0.0);
    let mut failures = Vec::new();
    let mut samples = 0;
    for case in sweep() {
        if case.res.m == 0 {
            continue;
        }
        let p = case.p();
        for _ in 0..100 {
            let x = random_admissible(&mut g, case);
            let full = x.stacked();
            let coeffs = expand(p, &case.res, &x, DEFAULT_TOL).unwrap();
            let back = reconstruct(p, &case.res, &coeffs).stacked();
            let r = (back - &full).norm() / full.norm();
            let pc = parseval_check(p, &case.res, &x, DEFAULT_TOL).unwrap();
            let q = pc.defect / pc.lhs;
            recon = recon.max(r);
            pars = pars.max(q);
            samples += 1;
            if r > 1e-10 || q > 1e-10 {
                failures.push(format!(
                    "{}: reconstruction {r:e}, Parseval {q:e}",
                    case.label()
                ));
            }
        }
    }
    finish(
        6,
        "completeness and Parseval",
        &failures,
        format!("{samples} admissible x, max reconstruction = {recon:.2e}, max Parseval = {pars:.2e} (≤ 1e-10)"),
    );
}

/// `E_λ` straight from its two-branch definition, in function space.
fn e_lambda_direct(res: &SpectralResult, lambda: f64) -> CMatrix {
    let v = &res.coefficients;
    let mut e = CMatrix::zeros(res.m, res.m);
    for (j, &lj) in res.eigenvalues.iter().enumerate() {
        let col = v.column(j);
        let pj = col * col.adjoint();
        if lambda >= 0.0 && 0.0 < lj && lj <= lambda {
            e += pj;
        } else if lambda < 0.0 && lambda < lj && lj <= 0.0 {
            e -= pj;
        }
    }
    e
}

#[test]
fn criterion_07_spectral_resolution() {
    let (mut op_worst, mut proj_worst, mut grid_worst, mut step_worst): (f64, f64, f64, f64) =
        (0.0, 0.0, 0.0, 0.0);
    let mut failures = Vec::new();
    let mut grid_points = 0;
    for case in sweep() {
        let res = &case.res;
        if res.m == 0 {
            continue;
        }
        let sr = spectral_resolution(res);
        let a = &res.operator.a;
        let op = (sr.operator() - a).norm() / a.norm().max(1.0);
        let id = max_abs(&(sr.completeness() - CMatrix::identity(res.m, res.m)));
        let proj = sr.projector_defect().max(id);
        // λ-grid: each eigenvalue, the midpoints between neighbours, and
        // points beyond both ends and on both sides of 0.
        let ls = &res.eigenvalues;
        let mut grid: Vec<f64> = ls.clone();
        grid.extend(ls.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        let span = ls.last().unwrap().abs() + ls[0].abs() + 1.0;
        grid.extend([
            -span,
            span,
            0.0,
            -1e-3,
            1e-3,
            ls[0] - 0.5,
            ls[ls.len() - 1] + 0.5,
        ]);
        let mut gw: f64 = 0.0;
        for &l in &grid {
            gw = gw.max(max_abs(&(sr.e_lambda(l) - e_lambda_direct(res, l))));
            grid_points += 1;
        }
        // The weighted jump through each eigenvalue is its projector, and the
        // function-space operator is Σ λ_j x_j x_j* W.
        let steps = resolution_step_defect(&sr);
        let x = res.eigenfunction_matrix();
        let w = res.space.weight();
        let recon_full = &x
            * CMatrix::from_diagonal(&CVector::from_iterator(res.m, ls.iter().map(|&l| cr(l))))
            * x.adjoint()
            * w
            * &res.space.basis;
        let direct = &res.operator.images;
        let full_op = (recon_full - direct).norm() / direct.norm().max(1.0);
        op_worst = op_worst.max(op).max(full_op);
        proj_worst = proj_worst.max(proj);
        grid_worst = grid_worst.max(gw);
        step_worst = step_worst.max(steps);
        if op.max(full_op) > 1e-10 || proj > 1e-10 || gw > 1e-10 || steps > 1e-10 {
            failures.push(format!("{}: operator {op:e}/{full_op:e}, projectors {proj:e}, grid {gw:e}, steps {steps:e}", case.label()));
        }
    }
    finish(
        7,
        "spectral resolution",
        &failures,
        format!(
            "max ‖Σλπ−A‖ = {op_worst:.2e}, projector defect = {proj_worst:.2e}, E_λ on {grid_points} grid points = {grid_worst:.2e}, steps = {step_worst:.2e} (≤ 1e-10)"
        ),
    );
}

#[test]
fn criterion_08_dual_orthogonality() {
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let (mut proper, mut unit) = (0, 0);
    for case in sweep() {
        let p = case.p();
        if case.res.r < 2 * p.d() {
            assert!(dual_orthogonality_check(p, &case.res).is_err());
            continue;
        }
        proper += 1;
        let dual = dual_orthogonality_check(p, &case.res).unwrap();
        let defect = dual.defect.max(dual.orthonormality_defect);
        worst = worst.max(defect);
        if defect > 1e-9 {
            failures.push(format!("{}: {defect:e}", case.label()));
        }
        let s = p.scale();
        if (0..p.n() as isize).all(|k| s.mu_rho(k) == 1.0) {
            unit += 1;
            if dual.defect.to_bits() != dual.unweighted_defect.to_bits() {
                failures.push(format!(
                    "{}: weighted {:e} ≠ unweighted {:e}",
                    case.label(),
                    dual.defect,
                    dual.unweighted_defect
                ));
            }
        }
    }
    if unit == 0 || proper == 0 {
        failures.push(format!(
            "sweep has {proper} proper and {unit} unit-uniform proper problems"
        ));
    }
    finish(
        8,
        "dual orthogonality",
        &failures,
        format!("{proper} proper problems, max defect = {worst:.2e} (≤ 1e-9), {unit} unit-uniform bit-identical"),
    );
}

#[test]
fn criterion_09_conversions() {
    let start = Instant::now();
    let mut failures = Vec::new();

    let mut sympl: f64 = 0.0;
    for seed in 0..200u64 {
        let mut g = rng(9000 + seed);
        let n = 1 + (seed % 3) as usize;
        let len = 3 + (seed % 6) as usize;
        let scale = Arc::new(make_scale(&ScaleKind::Random { seed }, len).unwrap());
        let h = random_hamiltonian_system(&mut g, &scale, 0, len as isize, n);
        let conv = hamiltonian_to_symplectic(&h).unwrap();
        let defect = conv.symplectic_defect.max(conv.formula_disagreement);
        sympl = sympl.max(defect);
        if defect > 1e-11 {
            failures.push(format!(
                "Hamiltonian system {seed}: symplectic defect {defect:e}"
            ));
        }
    }

    let mut pseudo: f64 = 0.0;
    for n in 1..=3usize {
        for seed in 0..20u64 {
            let scale = Arc::new(
                make_scale(
                    &ScaleKind::Random {
                        seed: 100 * n as u64 + seed,
                    },
                    2 * n + 4,
                )
                .unwrap(),
            );
            let (lo, hi) = (-1, scale.last_index());
            let mut g = rng(seed);
            let coeffs: Vec<GridFunction> = (0..=n)
                .map(|_| {
                    GridFunction::from_fn(scale.clone(), lo, hi, |_, _| {
                        CMatrix::from_element(1, 1, cr(g.gen_range(0.5..2.0)))
                    })
                    .unwrap()
                })
                .collect();
            let y = random_grid_function(&mut g, &scale, lo, hi, 1, 1);
            let conv = sturm_liouville_to_hamiltonian(coeffs, &y).unwrap();
            let r = conv.max_residual();
            pseudo = pseudo.max(r);
            if r > 1e-11 {
                failures.push(format!("pseudo-derivatives n={n} seed {seed}: {r:e}"));
            }
        }
    }

    let mut lagr: f64 = 0.0;
    for seed in 0..200u64 {
        let d = 1 + (seed % 3) as usize;
        let len = 3 + (seed % 5) as usize;
        let scale = Arc::new(make_scale(&ScaleKind::Random { seed: 7000 + seed }, len).unwrap());
        let mut g = rng(seed);
        let hi = len as isize - 1;
        let sys = random_hamiltonian_system(&mut g, &scale, 0, hi, d);
        let h = sys.operator_h();
        let mut f = || random_grid_function(&mut g, &scale, -1, hi, d, 1);
        let (x, u, y, v) = (f(), f(), f(), f());
        let chk = hamiltonian_lagrange_residual(&h, &x, &u, &y, &v).unwrap();
        let rel = chk.residual.norm() / chk.scale;
        lagr = lagr.max(rel);
        if rel > 1e-11 {
            failures.push(format!("Hamiltonian Lagrange pair {seed}: {rel:e}"));
        }
    }

    let mut zres: f64 = 0.0;
    for case in sweep().iter().step_by(3) {
        let p = case.p();
        let (pg, qg) = problem_coefficients(p);
        let mut g = rng(case.gen.seed);
        let d = p.d();
        let x = generate_solution(
            &pg,
            &qg,
            &random_matrix(&mut g, d, d),
            &random_matrix(&mut g, d, d),
        );
        let x = match x {
            Ok(x) => x,
            // Rank-deficient interior P cannot propagate a solution.
            Err(Error::Singular(_)) => continue,
            Err(e) => panic!("{}: {e}", case.label()),
        };
        let r = second_order_to_z_system(&pg, &qg, &x)
            .unwrap()
            .max_residual();
        zres = zres.max(r);
        if r > 1e-11 {
            failures.push(format!("{}: Z-system residual {r:e}", case.label()));
        }
    }

    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(30) {
        failures.push(format!("runtime {:.1} s > 30 s", secs(elapsed)));
    }
    finish(
        9,
        "Hamiltonian and symplectic conversions",
        &failures,
        format!(
            "symplectic = {sympl:.2e}, pseudo-derivatives = {pseudo:.2e}, Hamiltonian Lagrange = {lagr:.2e}, Z-system = {zres:.2e} (≤ 1e-11), {:.2} s",
            secs(elapsed)
        ),
    );
}

#[test]
fn criterion_10_q_shift() {
    let mut g = rng(10);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for case in sweep() {
        let c = g.gen_range(-5.0..5.0);
        let shifted = solve_spectrum(&case.p().with_shifted_q(c)).unwrap();
        if shifted.m != case.res.m {
            failures.push(format!("{}: m changed under shift", case.label()));
            continue;
        }
        for (a, b) in case.res.eigenvalues.iter().zip(&shifted.eigenvalues) {
            let e = (b - a - c).abs();
            worst = worst.max(e);
            if e > 1e-10 {
                failures.push(format!(
                    "{}: c = {c}, λ = {a}, λ' − λ − c = {e:e}",
                    case.label()
                ));
            }
        }
    }
    finish(
        10,
        "Q-shift covariance",
        &failures,
        format!(
            "{} problems, max |λ'−λ−c| = {worst:.2e} (≤ 1e-10)",
            sweep().len()
        ),
    );
}
