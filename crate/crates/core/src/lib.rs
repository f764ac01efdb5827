//! Self-adjoint eigenvalue problems
//! `−(Px^Δ)^∇ + Qx = λωx` on finite isolated time scales with boundary
//! conditions `R(−x^ρ(a); x(b)) + S(P^ρ(a)x^∇(a); P(b)x^Δ(b)) = 0`, and their
//! Hamiltonian and symplectic first-order forms.
//!
//! The pipeline is [`problem::SpectralProblem`] →
//! [`boundary::build_admissible_space`] → [`operator::build_operator_matrix`]
//! → [`spectral::solve_spectrum`]; every stage exposes the residuals that
//! certify it.

pub mod boundary;
pub mod error;
pub mod generate;
pub mod hamiltonian;
pub mod matrixkit;
pub mod operator;
pub mod problem;
pub mod spectral;
pub mod timescale;
pub mod verify;

pub use boundary::{AdmissibleSpace, GammaDecomposition};
pub use error::{Error, Result};
pub use matrixkit::{CMatrix, CVector, C64};
pub use operator::OperatorMatrix;
pub use problem::{SpectralProblem, ValidationReport};
pub use spectral::{SpectralResolution, SpectralResult};
pub use timescale::{GridFunction, IsolatedTimeScale, ScaleKind};
pub use verify::{verify_problem, ProblemVerification, VerifyOptions};
