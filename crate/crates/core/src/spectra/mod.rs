//! Low-lying eigenpairs, energy gaps, ground-energy derivatives and truncation
//! convergence.
//!
//! The sparse path exploits the structure of the Rabi-type Hamiltonians: the
//! parity symmetry splits the matrix into two decoupled chains, each of which
//! is a band matrix in ascending basis order. Eigenvalues come from bisection
//! on Sylvester inertia counts and are accurate to roughly machine precision
//! times the matrix norm even when levels cluster near the critical point.
//! A dense path backs it up for small dimensions.

mod banded;
mod dense;
mod sparse;

use serde::{Deserialize, Serialize};

pub use dense::dense_lowest_eigenpairs;
pub use sparse::START_SEED;

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::model::{build_hamiltonian, FockTruncation, ModelParams, SparseOperator};
use crate::observables::{self, Observable};

pub(crate) use sparse::reduced_resolvent;

/// Default absolute residual bound `‖Hv - λv‖` for eigenpairs.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Largest dimension for which the dense fallback is attempted.
pub const DENSE_FALLBACK_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Unit vectors, gauge-fixed so the largest-magnitude component is positive.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `‖Hv - λv‖` per pair.
    pub residuals: Vec<f64>,
    pub n_tr_used: usize,
}

impl EigenSolution {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn ground_state(&self) -> &[f64] {
        &self.eigenvectors[0]
    }

    /// `E1 - E0`, or `None` with a single pair.
    pub fn gap(&self) -> Option<f64> {
        (self.eigenvalues.len() >= 2).then(|| (self.eigenvalues[1] - self.eigenvalues[0]).max(0.0))
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Which algorithm `lowest_eigenpairs_with` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverPath {
    /// Sparse, falling back to dense for small dimensions on failure.
    #[default]
    Auto,
    Sparse,
    Dense,
}

/// The `k` algebraically smallest eigenpairs of `h`.
///
/// Fails with [`Error::NotConverged`] rather than return a pair whose residual
/// `‖Hv - λv‖` exceeds `tol · max(1, ‖H‖)`; the scale keeps the test
/// meaningful for operators with large entries (`Δ/ω ≫ 1`).
pub fn lowest_eigenpairs(h: &SparseOperator, k: usize, tol: f64) -> Result<EigenSolution> {
    lowest_eigenpairs_with(h, k, tol, SolverPath::Auto)
}

pub fn lowest_eigenpairs_with(h: &SparseOperator, k: usize, tol: f64, path: SolverPath) -> Result<EigenSolution> {
    check_request(h, k, tol)?;
    match path {
        SolverPath::Dense => dense_lowest_eigenpairs(h, k, tol),
        SolverPath::Sparse => sparse::sparse_lowest_eigenpairs(h, k, tol),
        SolverPath::Auto => match sparse::sparse_lowest_eigenpairs(h, k, tol) {
            Err(Error::NotConverged { best_residual, .. }) if h.dim() <= DENSE_FALLBACK_DIM => {
                log::debug!("sparse path residual {best_residual:e}; using dense fallback");
                dense_lowest_eigenpairs(h, k, tol)
            }
            other => other,
        },
    }
}

fn check_request(h: &SparseOperator, k: usize, tol: f64) -> Result<()> {
    if k == 0 || k > h.dim() {
        return Err(Error::InvalidParameter(format!(
            "requested {k} eigenpairs of a {}-dimensional operator",
            h.dim()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    Ok(())
}

fn n_tr_of(dim: usize) -> usize {
    (dim / 2).saturating_sub(1)
}

pub(crate) fn fix_gauge(v: &mut [f64]) {
    let mut idx = 0;
    let mut best = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Absolute residual bound for a relative tolerance `tol`.
pub(crate) fn residual_bound(h: &SparseOperator, tol: f64) -> f64 {
    let (lo, hi) = h.gershgorin();
    tol * lo.abs().max(hi.abs()).max(1.0)
}

pub(crate) fn residual_norm(h: &SparseOperator, v: &[f64], lambda: f64) -> f64 {
    h.mul_vec(v)
        .iter()
        .zip(v)
        .map(|(hv, x)| (hv - lambda * x).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Eigenpairs of the model Hamiltonian at a fixed truncation.
pub fn solve_model(params: &ModelParams, trunc: FockTruncation, k: usize, tol: f64) -> Result<EigenSolution> {
    let h = build_hamiltonian(params, trunc)?;
    lowest_eigenpairs(&h, k.min(h.dim()), tol)
}

/// `ε = E1 - E0`.
pub fn energy_gap(params: &ModelParams, trunc: FockTruncation) -> Result<f64> {
    Ok(solve_model(params, trunc, 2, DEFAULT_TOL)?
        .gap()
        .expect("two pairs requested"))
}

/// Truncation ladder settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergencePolicy {
    pub rel_tol: f64,
    pub n_tr_start: usize,
    pub growth_factor: f64,
    pub n_tr_cap: usize,
}

impl Default for ConvergencePolicy {
    fn default() -> Self {
        ConvergencePolicy {
            rel_tol: 1e-6,
            n_tr_start: 64,
            growth_factor: 2.0,
            n_tr_cap: 32768,
        }
    }
}

impl ConvergencePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("rel_tol must be positive".into()));
        }
        if !(self.growth_factor > 1.0) || !self.growth_factor.is_finite() {
            return Err(Error::InvalidParameter("growth_factor must exceed 1".into()));
        }
        if self.n_tr_start < 2 {
            return Err(Error::InvalidParameter("n_tr_start must be at least 2".into()));
        }
        if self.n_tr_cap < self.n_tr_start {
            return Err(Error::InvalidParameter("n_tr_cap is below n_tr_start".into()));
        }
        Ok(())
    }

    /// Rungs `n_tr_start, ⌈f n_tr_start⌉, …` up to and including the cap.
    pub fn ladder(&self) -> Vec<usize> {
        let mut out = vec![self.n_tr_start];
        let mut n = self.n_tr_start;
        while n < self.n_tr_cap {
            let next = ((n as f64) * self.growth_factor).ceil() as usize;
            n = next.max(n + 1).min(self.n_tr_cap);
            out.push(n);
        }
        out
    }
}

/// How a computation picks its truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationChoice {
    Fixed(usize),
    Converged(ConvergencePolicy),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergedValue {
    pub value: f64,
    /// Truncation of the last evaluation (the one `value` comes from).
    pub n_tr: usize,
    /// First rung whose value already agreed with the next one.
    pub n_tr_converged_at: usize,
    /// `(n_tr, value)` for every rung evaluated.
    pub history: Vec<(usize, f64)>,
}

fn agree(a: f64, b: f64, rel_tol: f64) -> bool {
    a == b || (a - b).abs() < rel_tol * b.abs()
}

/// Runs `eval` along the policy's ladder until two successive rungs agree to
/// `rel_tol`.
pub fn converge_with<F>(policy: &ConvergencePolicy, mut eval: F) -> Result<ConvergedValue>
where
    F: FnMut(usize) -> Result<f64>,
{
    policy.validate()?;
    let mut history: Vec<(usize, f64)> = Vec::new();
    for n_tr in policy.ladder() {
        let v = eval(n_tr)?;
        if let Some(&(prev_n, prev)) = history.last() {
            if agree(prev, v, policy.rel_tol) {
                history.push((n_tr, v));
                return Ok(ConvergedValue {
                    value: v,
                    n_tr,
                    n_tr_converged_at: prev_n,
                    history,
                });
            }
        }
        history.push((n_tr, v));
    }
    let last = history.last().map(|h| h.1).unwrap_or(f64::NAN);
    let previous = if history.len() >= 2 {
        history[history.len() - 2].1
    } else {
        f64::NAN
    };
    Err(Error::TruncationCap {
        n_tr: policy.n_tr_cap,
        previous,
        last,
    })
}

/// Converges one observable in the truncation.
pub fn converge_truncation(
    params: &ModelParams,
    observable: &Observable,
    policy: &ConvergencePolicy,
) -> Result<ConvergedValue> {
    converge_with(policy, |n_tr| {
        observables::evaluate(params, observable, FockTruncation::new(n_tr)?).map(|p| p.value)
    })
}

/// Ground energy and its coupling derivatives on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCurve {
    pub grid: Vec<f64>,
    pub e0: Vec<f64>,
    /// Central difference; `None` at the two end points.
    pub d1: Vec<Option<f64>>,
    /// Five-point stencil; `None` within two points of either end.
    pub d2: Vec<Option<f64>>,
    pub step: f64,
    /// Truncation used for every point.
    pub n_tr: usize,
}

impl DerivativeCurve {
    /// Smallest second derivative and the coupling where it occurs.
    pub fn d2_minimum(&self) -> Option<(f64, f64)> {
        self.grid
            .iter()
            .zip(&self.d2)
            .filter_map(|(&g, d)| d.map(|d| (g, d)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Finite-difference derivatives of sampled ground energies.
pub fn derivatives_from_energies(grid: &[f64], e0: &[f64]) -> Result<DerivativeCurve> {
    if grid.len() != e0.len() {
        return Err(Error::InvalidParameter("grid and energies differ in length".into()));
    }
    if grid.len() < 3 {
        return Err(Error::InvalidParameter("need at least three grid points".into()));
    }
    let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("grid must be strictly ascending".into()));
    }
    for w in grid.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-8 * h {
            return Err(Error::InvalidParameter("grid spacing is not uniform".into()));
        }
    }
    let n = grid.len();
    let mut d1 = vec![None; n];
    let mut d2 = vec![None; n];
    for i in 1..n - 1 {
        d1[i] = Some((e0[i + 1] - e0[i - 1]) / (2.0 * h));
    }
    for i in 2..n.saturating_sub(2) {
        d2[i] = Some((-e0[i + 2] + 16.0 * e0[i + 1] - 30.0 * e0[i] + 16.0 * e0[i - 1] - e0[i - 2]) / (12.0 * h * h));
    }
    Ok(DerivativeCurve {
        grid: grid.to_vec(),
        e0: e0.to_vec(),
        d1,
        d2,
        step: h,
        n_tr: 0,
    })
}

/// Ground-energy derivatives along a coupling grid.
///
/// With a convergence policy, each point is converged on its own and then all
/// points are recomputed at the largest truncation any of them needed, so the
/// stencil never mixes truncations.
pub fn ground_energy_derivatives(
    params: &ModelParams,
    grid: &[f64],
    truncation: TruncationChoice,
    mode: ExecMode,
) -> Result<DerivativeCurve> {
    let observable = Observable::GroundEnergy;
    let n_tr = match truncation {
        TruncationChoice::Fixed(n) => n,
        TruncationChoice::Converged(policy) => {
            let per_point = exec::map(mode, grid, |&g| {
                converge_truncation(&params.with_coupling(g), &observable, &policy).map(|c| c.n_tr)
            });
            per_point
                .into_iter()
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .max()
                .unwrap_or(0)
        }
    };
    let trunc = FockTruncation::new(n_tr)?;
    let energies = exec::map(mode, grid, |&g| {
        solve_model(&params.with_coupling(g), trunc, 1, DEFAULT_TOL).map(|s| s.ground_energy())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut curve = derivatives_from_energies(grid, &energies)?;
    curve.n_tr = n_tr;
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_parity_operator, ModelParams};

    fn tr(n: usize) -> FockTruncation {
        FockTruncation::new(n).unwrap()
    }

    #[test]
    fn qrm_decoupled() {
        let h = build_hamiltonian(&ModelParams::qrm(0.5, 0.0), tr(10)).unwrap();
        let s = lowest_eigenpairs(&h, 2, 1e-10).unwrap();
        assert!((s.eigenvalues[0] + 0.25).abs() < 1e-14 && (s.eigenvalues[1] - 0.25).abs() < 1e-14);
        assert!((s.eigenvectors[0][1] - 1.0).abs() < 1e-14);
        assert_eq!(s.n_tr_used, 10);
    }

    #[test]
    fn rsm_degenerate_manifold() {
        let h = build_hamiltonian(&ModelParams::rsm(0.5, 1.0, 0.0), tr(7)).unwrap();
        let s = lowest_eigenpairs(&h, 8, 1e-10).unwrap();
        assert!(s.eigenvalues.iter().all(|&e| (e + 0.25).abs() < 1e-14));
        assert!(energy_gap(&ModelParams::rsm(0.5, 1.0, 0.0), tr(7)).unwrap().abs() < 1e-14);
    }

    #[test]
    fn sparse_matches_dense_full_spectrum() {
        for params in [
            ModelParams::rsm(0.5, 1.0, 0.3),
            ModelParams::rsm(0.5, -1.0, 0.6),
            ModelParams::rsm(0.2, 0.4, 1.1),
            ModelParams::qrm(3.0, 0.9),
        ] {
            let h = build_hamiltonian(&params, tr(31)).unwrap();
            let a = lowest_eigenpairs_with(&h, h.dim(), 1e-8, SolverPath::Sparse).unwrap();
            let b = dense_lowest_eigenpairs(&h, h.dim(), 1e-8).unwrap();
            for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
                assert!((x - y).abs() < 1e-10, "{params:?}: {x} vs {y}");
            }
            for i in 0..4 {
                let dot: f64 = a.eigenvectors[i]
                    .iter()
                    .zip(&b.eigenvectors[i])
                    .map(|(p, q)| p * q)
                    .sum();
                assert!((dot - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn eigenvectors_orthonormal_and_parity_definite() {
        let h = build_hamiltonian(&ModelParams::rsm(0.5, 1.0, 0.49), tr(400)).unwrap();
        let p = build_parity_operator(tr(400)).unwrap();
        let s = lowest_eigenpairs(&h, 6, DEFAULT_TOL).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let dot: f64 = s.eigenvectors[i]
                    .iter()
                    .zip(&s.eigenvectors[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10, "{i},{j}: {dot}");
            }
            assert!((p.expectation(&s.eigenvectors[i], &s.eigenvectors[i]).abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ladder_shape() {
        let p = ConvergencePolicy {
            n_tr_start: 64,
            n_tr_cap: 300,
            ..Default::default()
        };
        assert_eq!(p.ladder(), vec![64, 128, 256, 300]);
        let bad = ConvergencePolicy {
            growth_factor: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn converge_reports_cap() {
        let p = ConvergencePolicy {
            n_tr_start: 4,
            n_tr_cap: 32,
            ..Default::default()
        };
        let err = converge_with(&p, |n| Ok(n as f64)).unwrap_err();
        assert!(matches!(err, Error::TruncationCap { n_tr: 32, previous, last } if previous == 16.0 && last == 32.0));
        let ok = converge_with(&p, |_| Ok(3.0)).unwrap();
        assert_eq!((ok.n_tr_converged_at, ok.n_tr), (4, 8));
    }

    #[test]
    fn synthetic_derivatives() {
        let grid: Vec<f64> = (0..21).map(|i| 0.1 + 0.01 * i as f64).collect();
        let c = derivatives_from_energies(&grid, &[1.5; 21]).unwrap();
        assert!(c.d1.iter().flatten().all(|&d| d == 0.0));
        assert!(c.d2.iter().flatten().all(|&d| d == 0.0));
        let sq: Vec<f64> = grid.iter().map(|g| g * g).collect();
        let c = derivatives_from_energies(&grid, &sq).unwrap();
        assert!(c.d2.iter().flatten().all(|&d| (d - 2.0).abs() < 1e-8));
        assert!(c.d1[0].is_none() && c.d2[1].is_none() && c.d2[2].is_some());
        assert!(derivatives_from_energies(&[0.0, 0.1, 0.3], &[0.0; 3]).is_err());
    }
}
