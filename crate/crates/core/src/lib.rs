//! Exact diagonalization and finite-size scaling for the Rabi-Stark model
//!
//! ```text
//! H = (Δ/2 + U a†a) σz + ω a†a + g (a† + a) σx
//! ```
//!
//! near the critical Stark couplings `U = ±ω`, with the quantum Rabi model
//! (`U = 0`) as the reference case.
//!
//! The crate is organised as
//!
//! * [`model`]: parameters, truncated Fock basis, sparse Hamiltonian, parity
//!   and critical points;
//! * [`spectra`]: lowest eigenpairs and truncation convergence;
//! * [`observables`]: gap, photon number, order parameter, position spread,
//!   parity and fidelity susceptibility;
//! * [`oracle`]: the closed-form spectrum at `U = 1` in the deep `L → ∞` limit;
//! * [`scaling`]: power-law fits, peaks, data collapse and the exponent table;
//! * [`runner`]: config-driven sweeps with an on-disk cache and CSV output.

// comparisons like `!(x > 0.0)` are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod exec;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod runner;
pub mod scaling;
pub mod spectra;

pub use error::{Error, Result};
pub use eval::{DirectEvaluator, EvalPoint, Evaluator};
pub use exec::ExecMode;
pub use model::{Branch, CriticalData, FockTruncation, ModelKind, ModelParams, SparseOperator};
pub use observables::{Observable, ObservableId, SusceptibilityMethod};
pub use spectra::{ConvergencePolicy, EigenSolution, TruncationChoice};
