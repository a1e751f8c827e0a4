//! Ground-state observables: photon number, position spread, parity,
//! fidelity and fidelity susceptibility.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    build_coupling_operator, build_hamiltonian, build_parity_operator, coupling_scale, FockTruncation, ModelParams,
    SparseOperator,
};
use crate::spectra::{self, converge_truncation, ConvergencePolicy, EigenSolution, TruncationChoice, DEFAULT_TOL};

/// Ground states closer than this to the first excited level are degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// Default fidelity step as a fraction of the coupling scale.
pub const DEFAULT_RELATIVE_STEP: f64 = 1e-5;

/// Default number of excited states in the eigenstate sum.
pub const DEFAULT_K_STATES: usize = 64;

/// Steps below this fraction of `max(g, g_c)` are rejected as roundoff.
const STEP_FLOOR: f64 = 1e-9;

/// Largest share of the eigenstate sum its last quarter may carry before the
/// sum counts as unconverged in `k_states`.
pub const SUM_TAIL_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SusceptibilityMethod {
    /// `-2 ln F / δg²` from symmetric overlaps, Richardson-extrapolated over
    /// `δg` and `δg/2`.
    FiniteDifference { delta_g: Option<f64> },
    /// `Σ_{n≠0} |<n|H_I|0>|² / (E_n - E_0)²` over the lowest `k_states`
    /// excited states.
    EigenstateSum { k_states: usize },
    /// `<ψ'|ψ'> - |<ψ'|ψ>|²` with a numerically differentiated ground vector.
    DerivativeForm { step: Option<f64> },
    /// `‖(H - E_0)⁺ Q H_I ψ_0‖²`, the eigenstate sum over the whole truncated
    /// space evaluated by one banded solve.
    #[default]
    Resolvent,
}

impl fmt::Display for SusceptibilityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SusceptibilityMethod::FiniteDifference { delta_g: None } => write!(f, "finite_difference"),
            SusceptibilityMethod::FiniteDifference { delta_g: Some(d) } => {
                write!(f, "finite_difference({d:.16e})")
            }
            SusceptibilityMethod::EigenstateSum { k_states } => write!(f, "eigenstate_sum({k_states})"),
            SusceptibilityMethod::DerivativeForm { step: None } => write!(f, "derivative_form"),
            SusceptibilityMethod::DerivativeForm { step: Some(h) } => write!(f, "derivative_form({h:.16e})"),
            SusceptibilityMethod::Resolvent => write!(f, "resolvent"),
        }
    }
}

/// Names accepted in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableId {
    GroundEnergy,
    Gap,
    MeanPhoton,
    /// `1/n̄`.
    OrderParameter,
    /// `Δx`, the square root of the position-quadrature variance.
    PositionVariance,
    Parity,
    FidelitySusceptibility,
}

impl ObservableId {
    pub const ALL: [ObservableId; 7] = [
        ObservableId::GroundEnergy,
        ObservableId::Gap,
        ObservableId::MeanPhoton,
        ObservableId::OrderParameter,
        ObservableId::PositionVariance,
        ObservableId::Parity,
        ObservableId::FidelitySusceptibility,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObservableId::GroundEnergy => "ground_energy",
            ObservableId::Gap => "gap",
            ObservableId::MeanPhoton => "mean_photon",
            ObservableId::OrderParameter => "order_parameter",
            ObservableId::PositionVariance => "position_variance",
            ObservableId::Parity => "parity",
            ObservableId::FidelitySusceptibility => "fidelity_susceptibility",
        }
    }
}

/// An observable together with any method choice it needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observable {
    GroundEnergy,
    Gap,
    MeanPhoton,
    OrderParameter,
    PositionVariance,
    Parity,
    FidelitySusceptibility(SusceptibilityMethod),
}

impl Observable {
    pub fn from_id(id: ObservableId, method: SusceptibilityMethod) -> Self {
        match id {
            ObservableId::GroundEnergy => Observable::GroundEnergy,
            ObservableId::Gap => Observable::Gap,
            ObservableId::MeanPhoton => Observable::MeanPhoton,
            ObservableId::OrderParameter => Observable::OrderParameter,
            ObservableId::PositionVariance => Observable::PositionVariance,
            ObservableId::Parity => Observable::Parity,
            ObservableId::FidelitySusceptibility => Observable::FidelitySusceptibility(method),
        }
    }

    pub fn id(&self) -> ObservableId {
        match self {
            Observable::GroundEnergy => ObservableId::GroundEnergy,
            Observable::Gap => ObservableId::Gap,
            Observable::MeanPhoton => ObservableId::MeanPhoton,
            Observable::OrderParameter => ObservableId::OrderParameter,
            Observable::PositionVariance => ObservableId::PositionVariance,
            Observable::Parity => ObservableId::Parity,
            Observable::FidelitySusceptibility(_) => ObservableId::FidelitySusceptibility,
        }
    }

    /// Name including the method, used in cache keys.
    pub fn key(&self) -> String {
        match self {
            Observable::FidelitySusceptibility(m) => format!("fidelity_susceptibility:{m}"),
            other => other.id().name().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub params: ModelParams,
    pub n_tr: usize,
    pub name: String,
    pub value: f64,
    pub converged: bool,
}

/// Value of an observable at one truncation plus the worst eigen-residual
/// behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointValue {
    pub value: f64,
    pub residual: f64,
}

fn check_state(state: &[f64], trunc: FockTruncation) -> Result<()> {
    if state.len() != trunc.dim() {
        return Err(Error::InvalidParameter(format!(
            "state has length {}, truncation needs {}",
            state.len(),
            trunc.dim()
        )));
    }
    let norm = state.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("state norm {norm} is not 1")));
    }
    Ok(())
}

/// `n̄ = Σ n |ψ_{n,s}|²`.
pub fn mean_photon_number(state: &[f64], trunc: FockTruncation) -> Result<f64> {
    check_state(state, trunc)?;
    Ok(state
        .chunks_exact(2)
        .enumerate()
        .map(|(n, pair)| n as f64 * (pair[0] * pair[0] + pair[1] * pair[1]))
        .sum())
}

/// `1/n̄`, or `+∞` for the vacuum.
pub fn order_parameter(mean_photon: f64) -> f64 {
    if mean_photon > 0.0 {
        1.0 / mean_photon
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionVariance {
    /// `Δx = √(<x²> - <x>²)` with `x = (a† + a)/√2`.
    pub delta_x: f64,
    /// The variance came out slightly negative and was clamped to zero.
    pub clamped: bool,
}

/// Position-quadrature spread of a state. Moments use the untruncated
/// operators, so `<x²>` of the top Fock state is exact.
pub fn position_variance(state: &[f64], trunc: FockTruncation) -> Result<PositionVariance> {
    check_state(state, trunc)?;
    let amp = |n: usize, s: usize| state[2 * n + s];
    let mut mean = 0.0;
    let mut second = 0.0;
    for s in 0..2 {
        for n in 0..=trunc.n_tr {
            let a = amp(n, s);
            let nf = n as f64;
            second += (2.0 * nf + 1.0) * a * a;
            if n < trunc.n_tr {
                mean += 2.0 * (nf + 1.0).sqrt() * a * amp(n + 1, s);
            }
            if n + 2 <= trunc.n_tr {
                second += 2.0 * ((nf + 1.0) * (nf + 2.0)).sqrt() * a * amp(n + 2, s);
            }
        }
    }
    let mean = mean / 2f64.sqrt();
    let second = second / 2.0;
    let var = second - mean * mean;
    if var >= 0.0 {
        Ok(PositionVariance {
            delta_x: var.sqrt(),
            clamped: false,
        })
    } else if var > -1e-12 {
        Ok(PositionVariance {
            delta_x: 0.0,
            clamped: true,
        })
    } else {
        Err(Error::InvalidParameter(format!("negative position variance {var:e}")))
    }
}

/// `<ψ|P|ψ>`.
pub fn parity_expectation(state: &[f64], parity: &SparseOperator) -> f64 {
    parity.expectation(state, state)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lowest two eigenpairs with a non-degenerate ground state.
pub fn nondegenerate_ground(params: &ModelParams, trunc: FockTruncation, k: usize) -> Result<EigenSolution> {
    let sol = spectra::solve_model(params, trunc, k.max(2), DEFAULT_TOL)?;
    let gap = sol.gap().expect("two pairs");
    if gap < DEGENERACY_THRESHOLD {
        return Err(Error::GaugeUndefined { gap });
    }
    Ok(sol)
}

fn ground_vector(params: &ModelParams, g: f64, trunc: FockTruncation) -> Result<Vec<f64>> {
    Ok(nondegenerate_ground(&params.with_coupling(g), trunc, 2)?
        .eigenvectors
        .swap_remove(0))
}

/// `‖a - b‖²` after aligning signs; equals `2(1 - |<a|b>|)` without the
/// cancellation of forming the overlap first.
fn aligned_distance_sq(a: &[f64], b: &[f64]) -> f64 {
    let s = if dot(a, b) < 0.0 { -1.0 } else { 1.0 };
    a.iter().zip(b).map(|(x, y)| (x - s * y).powi(2)).sum()
}

/// `F = |<ψ_0(g)|ψ_0(g + δg)>|`.
pub fn fidelity(params: &ModelParams, g: f64, delta_g: f64, trunc: FockTruncation) -> Result<f64> {
    if !delta_g.is_finite() || g + delta_g < 0.0 {
        return Err(Error::InvalidParameter(format!("coupling step {delta_g} from g = {g}")));
    }
    let a = ground_vector(params, g, trunc)?;
    if delta_g == 0.0 {
        return Ok(1.0);
    }
    let b = ground_vector(params, g + delta_g, trunc)?;
    Ok(dot(&a, &b).abs().min(1.0))
}

fn check_step(params: &ModelParams, g: f64, step: f64, reach: f64) -> Result<()> {
    let floor = STEP_FLOOR * g.max(coupling_scale(params));
    if !(step >= floor) {
        return Err(Error::StepBelowRoundoff { step, floor });
    }
    if g - reach * step < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "stencil reaches negative coupling at g = {g} with step {step}"
        )));
    }
    Ok(())
}

/// Fidelity susceptibility `χ_F` per unit coupling `g`.
pub fn fidelity_susceptibility(
    params: &ModelParams,
    g: f64,
    method: SusceptibilityMethod,
    trunc: FockTruncation,
) -> Result<f64> {
    params.with_coupling(g).validate()?;
    let scale = coupling_scale(params);
    match method {
        SusceptibilityMethod::FiniteDifference { delta_g } => {
            let h = delta_g.unwrap_or(DEFAULT_RELATIVE_STEP * scale);
            check_step(params, g, h, 0.5)?;
            let chi = |step: f64| -> Result<f64> {
                let a = ground_vector(params, g - step / 2.0, trunc)?;
                let b = ground_vector(params, g + step / 2.0, trunc)?;
                let d2 = aligned_distance_sq(&a, &b);
                // F = 1 - d²/2 for unit vectors
                Ok(-2.0 * (-d2 / 2.0).ln_1p() / (step * step))
            };
            let coarse = chi(h)?;
            let fine = chi(h / 2.0)?;
            Ok(((4.0 * fine - coarse) / 3.0).max(0.0))
        }
        SusceptibilityMethod::DerivativeForm { step } => {
            let h = step.unwrap_or(DEFAULT_RELATIVE_STEP * scale);
            check_step(params, g, h, 1.0)?;
            let psi = ground_vector(params, g, trunc)?;
            let mut plus = ground_vector(params, g + h, trunc)?;
            let mut minus = ground_vector(params, g - h, trunc)?;
            for v in [&mut plus, &mut minus] {
                if dot(v, &psi) < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
            let deriv: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * h)).collect();
            let overlap = dot(&deriv, &psi);
            Ok((dot(&deriv, &deriv) - overlap * overlap).max(0.0))
        }
        SusceptibilityMethod::EigenstateSum { k_states } => {
            if k_states < 2 {
                return Err(Error::InvalidParameter("k_states must be at least 2".into()));
            }
            let p = params.with_coupling(g);
            let h = build_hamiltonian(&p, trunc)?;
            let k = (k_states + 1).min(h.dim());
            let sol = spectra::lowest_eigenpairs(&h, k, DEFAULT_TOL)?;
            let e0 = sol.eigenvalues[0];
            let gap = sol.gap().expect("k >= 2");
            if gap < DEGENERACY_THRESHOLD {
                return Err(Error::GaugeUndefined { gap });
            }
            let hi = build_coupling_operator(trunc)?;
            let source = hi.mul_vec(&sol.eigenvectors[0]);
            let terms: Vec<f64> = (1..k)
                .map(|n| {
                    let m = dot(&sol.eigenvectors[n], &source);
                    let de = sol.eigenvalues[n] - e0;
                    m * m / (de * de)
                })
                .collect();
            let complete = k == h.dim();
            if !complete {
                let block = (terms.len() / 4).max(1);
                if terms.len() < 2 * block {
                    return Err(Error::SumTailNotDecreasing { k_states });
                }
                let last: f64 = terms[terms.len() - block..].iter().sum();
                let prev: f64 = terms[terms.len() - 2 * block..terms.len() - block].iter().sum();
                let total: f64 = terms.iter().sum();
                if !(last < prev || last == 0.0) || last > SUM_TAIL_FRACTION * total {
                    return Err(Error::SumTailNotDecreasing { k_states });
                }
            }
            Ok(terms.iter().sum())
        }
        SusceptibilityMethod::Resolvent => {
            let p = params.with_coupling(g);
            let h = build_hamiltonian(&p, trunc)?;
            let sol = spectra::lowest_eigenpairs(&h, 2, DEFAULT_TOL)?;
            let gap = sol.gap().expect("two pairs");
            if gap < DEGENERACY_THRESHOLD {
                return Err(Error::GaugeUndefined { gap });
            }
            let hi = build_coupling_operator(trunc)?;
            let source = hi.mul_vec(&sol.eigenvectors[0]);
            let x = spectra::reduced_resolvent(&h, sol.eigenvalues[0], &sol.eigenvectors[0], &source);
            Ok(dot(&x, &x))
        }
    }
}

/// One observable at a fixed truncation.
pub fn evaluate(params: &ModelParams, observable: &Observable, trunc: FockTruncation) -> Result<PointValue> {
    match observable {
        Observable::GroundEnergy => {
            let s = spectra::solve_model(params, trunc, 1, DEFAULT_TOL)?;
            Ok(PointValue {
                value: s.ground_energy(),
                residual: s.max_residual(),
            })
        }
        Observable::Gap => {
            let s = spectra::solve_model(params, trunc, 2, DEFAULT_TOL)?;
            Ok(PointValue {
                value: s.gap().expect("two pairs"),
                residual: s.max_residual(),
            })
        }
        Observable::MeanPhoton | Observable::OrderParameter | Observable::PositionVariance | Observable::Parity => {
            let s = nondegenerate_ground(params, trunc, 2)?;
            let psi = s.ground_state();
            let value = match observable {
                Observable::MeanPhoton => mean_photon_number(psi, trunc)?,
                Observable::OrderParameter => order_parameter(mean_photon_number(psi, trunc)?),
                Observable::PositionVariance => position_variance(psi, trunc)?.delta_x,
                _ => parity_expectation(psi, &build_parity_operator(trunc)?),
            };
            Ok(PointValue {
                value,
                residual: s.max_residual(),
            })
        }
        Observable::FidelitySusceptibility(method) => Ok(PointValue {
            value: fidelity_susceptibility(params, params.coupling_g, *method, trunc)?,
            residual: 0.0,
        }),
    }
}

/// An observable at a fixed or converged truncation.
pub fn record(params: &ModelParams, observable: &Observable, truncation: TruncationChoice) -> Result<ObservableRecord> {
    let (value, n_tr, converged) = match truncation {
        TruncationChoice::Fixed(n) => (evaluate(params, observable, FockTruncation::new(n)?)?.value, n, false),
        TruncationChoice::Converged(policy) => {
            let c = converge_truncation(params, observable, &policy)?;
            (c.value, c.n_tr, true)
        }
    };
    Ok(ObservableRecord {
        params: *params,
        n_tr,
        name: observable.key(),
        value,
        converged,
    })
}

/// Convenience: a converged value with the default policy.
pub fn converged(params: &ModelParams, observable: &Observable) -> Result<f64> {
    Ok(converge_truncation(params, observable, &ConvergencePolicy::default())?.value)
}
