//! Closed-form spectrum at `|U| = 1` against exact diagonalization, and the
//! truncation-mode scaling of the susceptibility peak.

use rabi_stark::eval::{susceptibility_peak, DirectEvaluator, Evaluator};
use rabi_stark::exec::{self, ExecMode};
use rabi_stark::model::{branch_critical_point, Branch, FockTruncation, ModelParams};
use rabi_stark::observables::{evaluate, Observable, SusceptibilityMethod};
use rabi_stark::oracle::{level_observables, solve_low_spectrum};
use rabi_stark::scaling::{collapse, linear_grid, AbscissaKind, Ansatz, CollapseOptions, SizeKind, SweepSeries};
use rabi_stark::spectra::{converge_with, solve_model, ConvergencePolicy, TruncationChoice};

const DELTA: f64 = 0.5;

fn strict() -> ConvergencePolicy {
    ConvergencePolicy {
        rel_tol: 1e-12,
        n_tr_start: 64,
        growth_factor: 2.0,
        n_tr_cap: 1 << 14,
    }
}

fn ed_level(p: &ModelParams, level: usize) -> f64 {
    converge_with(&strict(), |n| {
        Ok(solve_model(p, FockTruncation::new(n)?, level + 1, 1e-12)?.eigenvalues[level])
    })
    .unwrap()
    .value
}

#[test]
fn frozen_ground_energy() {
    let e = ed_level(&ModelParams::rsm(DELTA, 1.0, 0.3), 0);
    assert!((e - -0.4481).abs() < 5e-5, "{e}");
    assert!((solve_low_spectrum(DELTA, 0.3, 0).unwrap() - e).abs() < 1e-6);
}

#[test]
fn oracle_levels_match_ed_on_both_branches() {
    for (u, branch) in [(1.0, Branch::Plus), (-1.0, Branch::Minus)] {
        let gc = branch_critical_point(DELTA, 1.0, branch, 0.0).unwrap().g_c;
        // the minus branch is the plus branch with Δ → -Δ
        let oracle_delta = if u > 0.0 { DELTA } else { -DELTA };
        for frac in [0.1, 0.3, 0.6] {
            let g = frac * gc;
            let p = ModelParams::rsm(DELTA, u, g);
            for level in 0..3 {
                let ed = ed_level(&p, level);
                let root = solve_low_spectrum(oracle_delta, g, level).unwrap();
                assert!(
                    (ed - root).abs() <= 1e-6,
                    "U={u} g={g} n={level}: ed {ed} oracle {root}"
                );
            }
        }
    }
}

#[test]
fn level_observables_match_ed_ground_state() {
    let gc = branch_critical_point(DELTA, 1.0, Branch::Plus, 0.0).unwrap().g_c;
    for frac in [0.3, 0.6, 0.9] {
        let p = ModelParams::rsm(DELTA, 1.0, frac * gc);
        let ed = |obs: Observable| {
            converge_with(&strict(), |n| Ok(evaluate(&p, &obs, FockTruncation::new(n)?)?.value))
                .unwrap()
                .value
        };
        let closed = level_observables(DELTA, frac * gc, 0).unwrap();
        let (n_ed, dx_ed) = (ed(Observable::MeanPhoton), ed(Observable::PositionVariance));
        assert!(
            (closed.mean_photon - n_ed).abs() <= 1e-6 * n_ed.max(1.0),
            "n̄ {} vs {n_ed}",
            closed.mean_photon
        );
        assert!(
            (closed.delta_x - dx_ed).abs() <= 1e-6 * dx_ed,
            "Δx {} vs {dx_ed}",
            closed.delta_x
        );
    }
}

#[test]
fn truncation_mode_ratio_collapse_separates() {
    let gc = branch_critical_point(DELTA, 1.0, Branch::Plus, 0.0).unwrap().g_c;
    let chi = Observable::FidelitySusceptibility(SusceptibilityMethod::Resolvent);
    let base = ModelParams::rsm(DELTA, 1.0, gc);
    let ns = [64.0, 128.0, 256.0, 512.0, 1024.0];
    let peaks: Vec<_> = exec::map(ExecMode::default(), &ns, |&n| {
        susceptibility_peak(
            &DirectEvaluator,
            &base,
            &chi,
            &TruncationChoice::Fixed(n as usize),
            (0.8 * gc, 1.1 * gc, 61),
            1e-6 * gc,
            n,
        )
    })
    .into_iter()
    .collect::<Result<_, _>>()
    .unwrap();
    let us = linear_grid(-4.0, 2.0, 25);
    let series: Vec<SweepSeries> = ns
        .iter()
        .zip(&peaks)
        .map(|(&n, peak)| {
            let pts = us
                .iter()
                .filter_map(|&u| {
                    let g = peak.g_m + u * gc / n;
                    DirectEvaluator
                        .evaluate(&base.with_coupling(g), &chi, &TruncationChoice::Fixed(n as usize))
                        .ok()
                        .map(|e| (g, e.value))
                })
                .collect();
            SweepSeries::new(n, SizeKind::TruncationN, AbscissaKind::CouplingG, pts).unwrap()
        })
        .collect();
    let opts = CollapseOptions {
        g_c: Some(gc),
        peaks,
        x_window: Some((-2.0 * gc, 0.0)),
        min_reference: None,
    };
    let r = |nu: f64| {
        collapse(&series, 0.0, nu, Ansatz::FidelityRatio, &opts)
            .unwrap()
            .residual
    };
    let (at, lo, hi) = (r(1.0), r(0.7), r(1.3));
    assert!(
        lo.min(hi) >= 5.0 * at,
        "residual {at:e} at nu_N = 1, {lo:e} / {hi:e} perturbed"
    );
}

/// Observed with `P = σz (-1)^{a†a}`: even at `U = +1`, odd at `U = -1`.
#[test]
fn ground_state_parity_fixture() {
    for (u, branch, sign) in [(1.0, Branch::Plus, 1.0), (-1.0, Branch::Minus, -1.0)] {
        let gc = branch_critical_point(DELTA, 1.0, branch, 0.0).unwrap().g_c;
        for frac in [0.2, 0.5, 0.9] {
            let p = ModelParams::rsm(DELTA, u, frac * gc);
            let v = evaluate(&p, &Observable::Parity, FockTruncation::new(512).unwrap())
                .unwrap()
                .value;
            assert!((v - sign).abs() < 1e-12, "U={u} g/g_c={frac}: <P> = {v}");
        }
    }
}
