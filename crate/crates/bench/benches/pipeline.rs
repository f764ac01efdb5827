use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tsspec::boundary::build_admissible_space;
use tsspec::generate::{random_hamiltonian_system, random_problem, rng, ProblemSpec, ScaleChoice};
use tsspec::hamiltonian::hamiltonian_to_symplectic;
use tsspec::problem::DEFAULT_TOL;
use tsspec::spectral::{brute_force_oracle, solve_spectrum, spectral_resolution};
use tsspec::timescale::{make_scale, ScaleKind};
use tsspec::verify::{verify_problem, VerifyOptions};

fn sizes() -> [(usize, usize); 3] {
    [(1, 8), (2, 8), (3, 8)]
}

fn problem(d: usize, n: usize) -> tsspec::SpectralProblem {
    random_problem(&ProblemSpec::new(d, n).with_scale(ScaleChoice::Random), 7).problem
}

fn pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("pipeline");
    for (d, n) in sizes() {
        let p = problem(d, n);
        let id = format!("d{d}_n{n}");
        group.bench_with_input(BenchmarkId::new("admissible_space", &id), &p, |b, p| {
            b.iter(|| build_admissible_space(black_box(p), DEFAULT_TOL).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("solve_spectrum", &id), &p, |b, p| {
            b.iter(|| solve_spectrum(black_box(p)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("oracle", &id), &p, |b, p| {
            b.iter(|| brute_force_oracle(black_box(p)).unwrap())
        });
        let res = solve_spectrum(&p).unwrap();
        group.bench_with_input(BenchmarkId::new("resolution", &id), &res, |b, res| {
            b.iter(|| spectral_resolution(black_box(res)))
        });
    }
    group.finish();
}

fn verification(c: &mut Criterion) {
    let p = problem(2, 6);
    let opts = VerifyOptions::default();
    c.bench_function("verify_problem/d2_n6", |b| {
        b.iter(|| verify_problem(black_box(&p), 1, &opts))
    });
}

fn conversions(c: &mut Criterion) {
    let scale = Arc::new(make_scale(&ScaleKind::Random { seed: 3 }, 32).unwrap());
    let mut g = rng(3);
    let h = random_hamiltonian_system(&mut g, &scale, 0, 32, 3);
    c.bench_function("hamiltonian_to_symplectic/n3_len33", |b| {
        b.iter(|| hamiltonian_to_symplectic(black_box(&h)).unwrap())
    });
}

criterion_group!(benches, pipeline, verification, conversions);
criterion_main!(benches);
