//! Point evaluation behind a trait, so analysis drivers can run either
//! directly or through the runner's on-disk cache.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FockTruncation, ModelParams};
use crate::observables::{self, Observable, PointValue};
use crate::scaling::{linear_grid, locate_peak, scan_bracket, PeakResult};
use crate::spectra::{converge_with, TruncationChoice};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub value: f64,
    pub n_tr: usize,
    /// Whether the value passed the truncation-convergence test; `false`
    /// for a fixed truncation, where nothing was compared.
    pub converged: bool,
    pub residual: f64,
}

pub trait Evaluator: Sync {
    /// One observable at a single truncation.
    fn evaluate_at(&self, params: &ModelParams, observable: &Observable, n_tr: usize) -> Result<PointValue>;

    fn evaluate(
        &self,
        params: &ModelParams,
        observable: &Observable,
        truncation: &TruncationChoice,
    ) -> Result<EvalPoint> {
        match truncation {
            TruncationChoice::Fixed(n) => {
                let p = self.evaluate_at(params, observable, *n)?;
                Ok(EvalPoint {
                    value: p.value,
                    n_tr: *n,
                    converged: false,
                    residual: p.residual,
                })
            }
            TruncationChoice::Converged(policy) => {
                let mut residual = 0.0;
                let c = converge_with(policy, |n| {
                    let p = self.evaluate_at(params, observable, n)?;
                    residual = p.residual;
                    Ok(p.value)
                })?;
                Ok(EvalPoint {
                    value: c.value,
                    n_tr: c.n_tr,
                    converged: true,
                    residual,
                })
            }
        }
    }
}

/// Evaluates without caching.
#[derive(Debug, Clone, Copy, Default)]
pub struct DirectEvaluator;

impl Evaluator for DirectEvaluator {
    fn evaluate_at(&self, params: &ModelParams, observable: &Observable, n_tr: usize) -> Result<PointValue> {
        observables::evaluate(params, observable, FockTruncation::new(n_tr)?)
    }
}

/// Susceptibility peak of one size: a coarse scan over `scan` (`points`
/// samples between the given couplings), then golden-section refinement to
/// `abs_tol`. The scan is cut short at the first coupling whose ground state
/// is degenerate.
///
/// With a convergence policy, the truncation is converged at the coarse
/// maximum and then held fixed during refinement, so the refined function is
/// smooth in `g`.
pub fn susceptibility_peak(
    evaluator: &dyn Evaluator,
    params: &ModelParams,
    observable: &Observable,
    truncation: &TruncationChoice,
    scan: (f64, f64, usize),
    abs_tol: f64,
    size_label: f64,
) -> Result<PeakResult> {
    let value = |g: f64, t: &TruncationChoice| {
        evaluator
            .evaluate(&params.with_coupling(g), observable, t)
            .map(|p| p.value)
    };
    // The scan ends where the ground state turns degenerate: beyond that
    // point the susceptibility is undefined.
    let mut grid = Vec::with_capacity(scan.2);
    let mut samples = Vec::with_capacity(scan.2);
    for g in linear_grid(scan.0, scan.1, scan.2) {
        match value(g, truncation) {
            Ok(v) => {
                grid.push(g);
                samples.push(v);
            }
            Err(Error::GaugeUndefined { gap }) if grid.len() >= 3 => {
                log::debug!("peak scan stops at g = {g}: gap {gap:e}");
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let mut next = samples.iter().copied();
    let (lo, hi) = scan_bracket(|_| Ok(next.next().expect("one sample per grid point")), &grid)?;
    let refine = match truncation {
        TruncationChoice::Fixed(_) => *truncation,
        TruncationChoice::Converged(_) => {
            let mid = 0.5 * (lo + hi);
            let n = evaluator
                .evaluate(&params.with_coupling(mid), observable, truncation)?
                .n_tr;
            TruncationChoice::Fixed(n)
        }
    };
    locate_peak(|g| value(g, &refine), (lo, hi), abs_tol, size_label)
}
