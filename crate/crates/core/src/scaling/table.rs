//! Critical-exponent table: every observable's exponent in the reduced
//! coupling `t` (`y`), in the effective size `L` (`y_L`) and in the
//! truncation `N_tr` (`y_N`).

use serde::{Deserialize, Serialize};

use super::{fit_points, log_grid, PowerLawFit};
use crate::error::{Error, Result};
use crate::eval::{susceptibility_peak, Evaluator};
use crate::exec::{self, ExecMode};
use crate::model::{branch_critical_point, Branch, ModelParams};
use crate::observables::{Observable, SusceptibilityMethod};
use crate::spectra::{ConvergencePolicy, TruncationChoice};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableConfig {
    pub delta: f64,
    /// Window in `t = 1 - g/g_c` for the `y` column.
    pub t_window: (f64, f64),
    pub t_points: usize,
    /// Effective sizes for the `y_L` column.
    pub sizes_l: Vec<f64>,
    /// Truncations for the `y_N` column.
    pub sizes_n: Vec<usize>,
    pub convergence: ConvergencePolicy,
    pub susceptibility: SusceptibilityMethod,
    /// Peak scan range as fractions of `g_c`, and number of scan points.
    pub peak_scan: (f64, f64, usize),
    /// Peak refinement tolerance as a fraction of `g_c`.
    pub peak_rel_tol: f64,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            delta: 0.5,
            t_window: (1e-3, 1e-2),
            t_points: 9,
            sizes_l: log_grid(1e4, 1e6, 5),
            sizes_n: vec![64, 128, 256, 512, 1024],
            convergence: ConvergencePolicy::default(),
            susceptibility: SusceptibilityMethod::Resolvent,
            peak_scan: (0.8, 1.1, 61),
            peak_rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub value: Option<f64>,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub fit: Option<PowerLawFit>,
    pub error: Option<String>,
}

impl TableCell {
    fn from_fit(fit: Result<PowerLawFit>, target: f64, tolerance: f64) -> Self {
        match fit {
            Ok(f) => TableCell {
                value: Some(f.exponent),
                target,
                tolerance,
                pass: (f.exponent - target).abs() <= tolerance,
                fit: Some(f),
                error: None,
            },
            Err(e) => TableCell {
                value: None,
                target,
                tolerance,
                pass: false,
                fit: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRatio {
    pub value: Option<f64>,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl TableRatio {
    fn new(value: Option<f64>, target: f64, tolerance: f64) -> Self {
        TableRatio {
            value,
            target,
            tolerance,
            pass: value.is_some_and(|v| (v - target).abs() <= tolerance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub observable: String,
    pub y: TableCell,
    pub y_l: TableCell,
    pub y_n: TableCell,
    /// `y_L / y_N`.
    pub size_ratio: TableRatio,
    /// `ν = -y_L / y`.
    pub nu: TableRatio,
    /// `ν_N = -y_N / y`.
    pub nu_n: TableRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub rows: Vec<TableRow>,
}

impl ExponentTable {
    pub fn all_pass(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.y.pass && r.y_l.pass && r.y_n.pass && r.size_ratio.pass)
    }

    /// True when some cell could not be computed at all.
    pub fn has_errors(&self) -> bool {
        self.rows
            .iter()
            .any(|r| r.y.error.is_some() || r.y_l.error.is_some() || r.y_n.error.is_some())
    }

    pub fn render(&self) -> String {
        let cell = |c: &TableCell| match c.value {
            Some(v) => format!(
                "{v:+.4} ({:+.4}±{:.2}) {}",
                c.target,
                c.tolerance,
                if c.pass { "PASS" } else { "FAIL" }
            ),
            None => format!("   --    ({:+.4}±{:.2}) FAIL", c.target, c.tolerance),
        };
        let ratio = |r: &TableRatio| match r.value {
            Some(v) => format!("{v:+.4} {}", if r.pass { "PASS" } else { "FAIL" }),
            None => "  --   FAIL".to_string(),
        };
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:<32} {:<32} {:<32} {:<14} {:<14} {:<14}\n",
            "observable", "y", "y_L", "y_N", "y_L/y_N", "nu", "nu_N"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<24} {:<32} {:<32} {:<32} {:<14} {:<14} {:<14}\n",
                r.observable,
                cell(&r.y),
                cell(&r.y_l),
                cell(&r.y_n),
                ratio(&r.size_ratio),
                ratio(&r.nu),
                ratio(&r.nu_n)
            ));
        }
        out
    }
}

struct RowSpec {
    name: &'static str,
    observable: Option<Observable>,
    targets: [(f64, f64); 3],
}

fn row_specs(method: SusceptibilityMethod) -> [RowSpec; 4] {
    [
        RowSpec {
            name: "gap",
            observable: Some(Observable::Gap),
            targets: [(2.0, 0.05), (-2.0 / 3.0, 0.05), (-2.0, 0.1)],
        },
        RowSpec {
            name: "order_parameter",
            observable: Some(Observable::OrderParameter),
            targets: [(1.0, 0.05), (-1.0 / 3.0, 0.03), (-1.0, 0.05)],
        },
        RowSpec {
            name: "position_variance",
            observable: Some(Observable::PositionVariance),
            targets: [(-0.5, 0.05), (1.0 / 6.0, 0.03), (0.5, 0.05)],
        },
        RowSpec {
            name: "fidelity_susceptibility",
            observable: Some(Observable::FidelitySusceptibility(method)),
            targets: [(-2.0, 0.1), (2.0 / 3.0, 0.05), (2.0, 0.1)],
        },
    ]
}

enum Job {
    T { row: usize, t: f64 },
    L { row: usize, size: f64 },
    N { row: usize, n_tr: usize },
}

/// Fits all twelve exponents. Cells that fail are reported, never dropped.
pub fn exponent_table(config: &TableConfig, evaluator: &dyn Evaluator, mode: ExecMode) -> Result<ExponentTable> {
    config.convergence.validate()?;
    let crit = branch_critical_point(config.delta, 1.0, Branch::Plus, 0.0)?;
    let g_c = crit.g_c;
    let specs = row_specs(config.susceptibility);
    let ts = log_grid(config.t_window.0, config.t_window.1, config.t_points);
    let converged = TruncationChoice::Converged(config.convergence);
    let peak_tol = config.peak_rel_tol * g_c;
    let scan = |_: ()| (config.peak_scan.0 * g_c, config.peak_scan.1 * g_c, config.peak_scan.2);

    let mut jobs = Vec::new();
    for row in 0..specs.len() {
        for &t in &ts {
            jobs.push(Job::T { row, t });
        }
        for &size in &config.sizes_l {
            jobs.push(Job::L { row, size });
        }
        for &n_tr in &config.sizes_n {
            jobs.push(Job::N { row, n_tr });
        }
    }
    let results = exec::map(mode, &jobs, |job| -> Result<(f64, f64)> {
        match *job {
            Job::T { row, t } => {
                let obs = specs[row].observable.expect("observable");
                let p = ModelParams::rsm(config.delta, 1.0, g_c * (1.0 - t));
                Ok((t, evaluator.evaluate(&p, &obs, &converged)?.value))
            }
            Job::L { row, size } => {
                let obs = specs[row].observable.expect("observable");
                let p = ModelParams::rsm_at_size(config.delta, size, Branch::Plus, g_c);
                if let Observable::FidelitySusceptibility(_) = obs {
                    let peak = susceptibility_peak(evaluator, &p, &obs, &converged, scan(()), peak_tol, size)?;
                    Ok((size, peak.chi_max))
                } else {
                    Ok((size, evaluator.evaluate(&p, &obs, &converged)?.value))
                }
            }
            Job::N { row, n_tr } => {
                let obs = specs[row].observable.expect("observable");
                let p = ModelParams::rsm(config.delta, 1.0, g_c);
                let fixed = TruncationChoice::Fixed(n_tr);
                if let Observable::FidelitySusceptibility(_) = obs {
                    let peak = susceptibility_peak(evaluator, &p, &obs, &fixed, scan(()), peak_tol, n_tr as f64)?;
                    Ok((n_tr as f64, peak.chi_max))
                } else {
                    Ok((n_tr as f64, evaluator.evaluate(&p, &obs, &fixed)?.value))
                }
            }
        }
    });

    let mut rows = Vec::new();
    for (row, spec) in specs.iter().enumerate() {
        let mut columns: [Vec<Result<(f64, f64)>>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for (job, res) in jobs.iter().zip(&results) {
            let (r, col) = match job {
                Job::T { row, .. } => (*row, 0),
                Job::L { row, .. } => (*row, 1),
                Job::N { row, .. } => (*row, 2),
            };
            if r == row {
                columns[col].push(match res {
                    Ok(v) => Ok(*v),
                    Err(e) => Err(Error::InvalidParameter(e.to_string())),
                });
            }
        }
        let fit_col = |col: usize| -> Result<PowerLawFit> {
            let pts = columns[col]
                .iter()
                .map(|r| r.as_ref().copied().map_err(|e| Error::InvalidParameter(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            fit_points(&pts, (lo, hi))
        };
        let y = TableCell::from_fit(fit_col(0), spec.targets[0].0, spec.targets[0].1);
        let y_l = TableCell::from_fit(fit_col(1), spec.targets[1].0, spec.targets[1].1);
        let y_n = TableCell::from_fit(fit_col(2), spec.targets[2].0, spec.targets[2].1);
        let ratio = |a: &TableCell, b: &TableCell| match (a.value, b.value) {
            (Some(x), Some(y)) if y != 0.0 => Some(x / y),
            _ => None,
        };
        let neg = |v: Option<f64>| v.map(|x| -x);
        rows.push(TableRow {
            observable: spec.name.to_string(),
            size_ratio: TableRatio::new(ratio(&y_l, &y_n), 1.0 / 3.0, 0.05),
            nu: TableRatio::new(neg(ratio(&y_l, &y)), 1.0 / 3.0, 0.05),
            nu_n: TableRatio::new(neg(ratio(&y_n, &y)), 1.0, 0.1),
            y,
            y_l,
            y_n,
        });
    }
    Ok(ExponentTable { rows })
}
