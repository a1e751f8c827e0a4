//! Power-law fits, susceptibility peaks and data collapse.

mod table;

pub use table::{exponent_table, ExponentTable, TableCell, TableConfig, TableRatio, TableRow};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeKind {
    EffectiveL,
    TruncationN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbscissaKind {
    CouplingG,
    /// `t = 1 - g/g_c`.
    ReducedT,
}

/// One observable along a coupling grid at a fixed size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub size_label: f64,
    pub size_kind: SizeKind,
    pub abscissa_kind: AbscissaKind,
    /// Sorted by abscissa.
    pub points: Vec<(f64, f64)>,
}

impl SweepSeries {
    pub fn new(
        size_label: f64,
        size_kind: SizeKind,
        abscissa_kind: AbscissaKind,
        mut points: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite sample {p:?}")));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(SweepSeries {
            size_label,
            size_kind,
            abscissa_kind,
            points,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    /// Intercept of the base-10 log-log line.
    pub log_intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub n_points: usize,
    /// Slopes between neighbouring points, keyed by the geometric-mean abscissa.
    pub local_slopes: Vec<(f64, f64)>,
}

/// Least-squares line through `(log₁₀ x, log₁₀ y)` for the points of `series`
/// with abscissa inside the closed `window`.
pub fn fit_power_law(series: &SweepSeries, window: (f64, f64)) -> Result<PowerLawFit> {
    fit_points(&series.points, window)
}

pub fn fit_points(points: &[(f64, f64)], window: (f64, f64)) -> Result<PowerLawFit> {
    let (lo, hi) = window;
    let inside: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0 >= lo && p.0 <= hi).collect();
    let bad: Vec<f64> = inside
        .iter()
        .filter(|p| !(p.0 > 0.0 && p.1 > 0.0))
        .map(|p| p.0)
        .collect();
    if !bad.is_empty() {
        return Err(Error::NonPositiveData(bad));
    }
    if inside.len() < 4 {
        return Err(Error::TooFewPoints {
            lo,
            hi,
            found: inside.len(),
            needed: 4,
        });
    }
    let logs: Vec<(f64, f64)> = inside.iter().map(|p| (p.0.log10(), p.1.log10())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidParameter("fit window holds a single abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let local_slopes = logs
        .windows(2)
        .filter(|w| w[1].0 > w[0].0)
        .map(|w| {
            (
                10f64.powf(0.5 * (w[0].0 + w[1].0)),
                (w[1].1 - w[0].1) / (w[1].0 - w[0].0),
            )
        })
        .collect();
    Ok(PowerLawFit {
        exponent: slope,
        log_intercept: intercept,
        r_squared,
        window,
        n_points: logs.len(),
        local_slopes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakResult {
    pub g_m: f64,
    pub chi_max: f64,
    pub size_label: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of `f` inside `bracket`, refined to
/// `|Δg| < abs_tol`.
///
/// Fails with [`Error::PeakAtBoundary`] when the maximum sits at an end of the
/// bracket. Only comparisons of `f` values are used, so the result is
/// invariant under increasing transformations of `f`.
pub fn locate_peak<F>(mut f: F, bracket: (f64, f64), abs_tol: f64, size_label: f64) -> Result<PeakResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = bracket;
    if !(a < b) || !(abs_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bad peak bracket {bracket:?} or tolerance {abs_tol}"
        )));
    }
    let fa0 = f(a)?;
    let fb0 = f(b)?;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > abs_tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let (g_m, chi_max) = if fc >= fd { (c, fc) } else { (d, fd) };
    let near_edge = (g_m - bracket.0) <= 2.0 * abs_tol || (bracket.1 - g_m) <= 2.0 * abs_tol;
    if near_edge || chi_max < fa0 || chi_max < fb0 {
        let at = if fa0 >= fb0 { bracket.0 } else { bracket.1 };
        return Err(Error::PeakAtBoundary {
            at: if near_edge { g_m } else { at },
        });
    }
    Ok(PeakResult {
        g_m,
        chi_max,
        size_label,
    })
}

/// Coarse scan returning the grid neighbours of the largest sample.
pub fn scan_bracket<F>(mut f: F, grid: &[f64]) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if grid.len() < 3 {
        return Err(Error::InvalidParameter("peak scan needs at least three points".into()));
    }
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &g) in grid.iter().enumerate() {
        let v = f(g)?;
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    if best == 0 || best == grid.len() - 1 {
        return Err(Error::PeakAtBoundary { at: grid[best] });
    }
    Ok((grid[best - 1], grid[best + 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ansatz {
    /// `M = |t|^β m(|t| L^ν)`, separate master curves on either side of `g_c`.
    OrderParameter,
    /// `(χ_max - χ)/χ = f((g - g_m) L^ν)`.
    FidelityRatio,
    /// `A = |t|^β f(|t| L^ν)` for any observable; `β` may be negative.
    GenericObservable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CollapseOptions {
    /// Critical coupling, used to convert between `g` and `t`.
    pub g_c: Option<f64>,
    /// Peak of every series, matched by size label; required for the
    /// fidelity ratio.
    pub peaks: Vec<PeakResult>,
    /// Only compare points whose scaled abscissa lies in this range.
    pub x_window: Option<(f64, f64)>,
    /// Skip reference values smaller than this in magnitude; `None` picks
    /// `1e-3` for the fidelity ratio (whose master curve vanishes at the
    /// peak) and zero otherwise.
    pub min_reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseResult {
    pub beta_used: f64,
    pub nu_used: f64,
    pub ansatz: Ansatz,
    /// RMS relative deviation from the reference master curve.
    pub residual: f64,
    pub overlap_range: (f64, f64),
    pub n_compared: usize,
}

/// One rescaled series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterPoints {
    pub size_label: f64,
    /// `+1` below `g_c`, `-1` above; always `+1` for the fidelity ratio.
    pub side: i8,
    pub points: Vec<(f64, f64)>,
}

fn reduced_t(series: &SweepSeries, x: f64, g_c: Option<f64>) -> Result<f64> {
    match series.abscissa_kind {
        AbscissaKind::ReducedT => Ok(x),
        AbscissaKind::CouplingG => g_c
            .map(|gc| 1.0 - x / gc)
            .ok_or_else(|| Error::InvalidParameter("collapse in g needs g_c".into())),
    }
}

fn coupling(series: &SweepSeries, x: f64, g_c: Option<f64>) -> Result<f64> {
    match series.abscissa_kind {
        AbscissaKind::CouplingG => Ok(x),
        AbscissaKind::ReducedT => g_c
            .map(|gc| gc * (1.0 - x))
            .ok_or_else(|| Error::InvalidParameter("collapse in t needs g_c".into())),
    }
}

/// Rescales every series into master-curve coordinates.
pub fn master_curves(
    series_set: &[SweepSeries],
    beta: f64,
    nu: f64,
    ansatz: Ansatz,
    opts: &CollapseOptions,
) -> Result<Vec<MasterPoints>> {
    let mut out = Vec::new();
    for s in series_set {
        let l = s.size_label;
        match ansatz {
            Ansatz::OrderParameter | Ansatz::GenericObservable => {
                let mut below = Vec::new();
                let mut above = Vec::new();
                for &(x, v) in &s.points {
                    let t = reduced_t(s, x, opts.g_c)?;
                    if t == 0.0 {
                        continue;
                    }
                    let p = (t.abs() * l.powf(nu), v / t.abs().powf(beta));
                    if t > 0.0 {
                        below.push(p);
                    } else {
                        above.push(p);
                    }
                }
                for (side, mut pts) in [(1i8, below), (-1i8, above)] {
                    if !pts.is_empty() {
                        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                        out.push(MasterPoints {
                            size_label: l,
                            side,
                            points: pts,
                        });
                    }
                }
            }
            Ansatz::FidelityRatio => {
                let peak = opts
                    .peaks
                    .iter()
                    .find(|p| p.size_label == l)
                    .ok_or_else(|| Error::InvalidParameter(format!("no peak supplied for size {l}")))?;
                let mut pts = Vec::with_capacity(s.points.len());
                for &(x, v) in &s.points {
                    let g = coupling(s, x, opts.g_c)?;
                    pts.push(((g - peak.g_m) * l.powf(nu), (peak.chi_max - v) / v));
                }
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                out.push(MasterPoints {
                    size_label: l,
                    side: 1,
                    points: pts,
                });
            }
        }
    }
    Ok(out)
}

/// Piecewise-linear interpolation, in log-log where the bracketing samples
/// allow it.
fn interpolate(curve: &[(f64, f64)], x: f64) -> Option<f64> {
    if curve.is_empty() || x < curve[0].0 || x > curve[curve.len() - 1].0 {
        return None;
    }
    let i = curve.partition_point(|p| p.0 < x);
    if i < curve.len() && curve[i].0 == x {
        return Some(curve[i].1);
    }
    let (x0, y0) = curve[i - 1];
    let (x1, y1) = curve[i];
    if x0 > 0.0 && y0 > 0.0 && y1 > 0.0 {
        let w = (x / x0).ln() / (x1 / x0).ln();
        Some((y0.ln() + w * (y1 / y0).ln()).exp())
    } else {
        Some(y0 + (x - x0) / (x1 - x0) * (y1 - y0))
    }
}

/// Collapse quality of `series_set` at the exponents `(beta, nu)`.
///
/// The largest size on each side of the transition is the reference; every
/// other series is compared with it where their scaled ranges overlap.
pub fn collapse(
    series_set: &[SweepSeries],
    beta: f64,
    nu: f64,
    ansatz: Ansatz,
    opts: &CollapseOptions,
) -> Result<CollapseResult> {
    let mut labels: Vec<f64> = series_set.iter().map(|s| s.size_label).collect();
    labels.sort_by(f64::total_cmp);
    labels.dedup();
    if labels.len() < 3 || labels.len() != series_set.len() {
        return Err(Error::InvalidParameter(
            "collapse needs at least three series with distinct sizes".into(),
        ));
    }
    let floor = opts.min_reference.unwrap_or(match ansatz {
        Ansatz::FidelityRatio => 1e-3,
        _ => 0.0,
    });
    let curves = master_curves(series_set, beta, nu, ansatz, opts)?;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    for side in [1i8, -1i8] {
        let mut on_side: Vec<&MasterPoints> = curves.iter().filter(|c| c.side == side).collect();
        on_side.sort_by(|a, b| a.size_label.total_cmp(&b.size_label));
        let Some(reference) = on_side
            .iter()
            .max_by(|a, b| a.size_label.total_cmp(&b.size_label))
            .copied()
        else {
            continue;
        };
        let mut ref_pts = reference.points.clone();
        ref_pts.dedup_by(|a, b| a.0 == b.0);
        for other in on_side.iter().filter(|c| c.size_label != reference.size_label) {
            for &(x, y) in &other.points {
                if let Some((lo, hi)) = opts.x_window {
                    if x < lo || x > hi {
                        continue;
                    }
                }
                let Some(y_ref) = interpolate(&ref_pts, x) else {
                    continue;
                };
                if y_ref.abs() <= floor || y_ref == 0.0 {
                    continue;
                }
                sum_sq += ((y - y_ref) / y_ref).powi(2);
                count += 1;
                range = (range.0.min(x), range.1.max(x));
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyOverlap);
    }
    Ok(CollapseResult {
        beta_used: beta,
        nu_used: nu,
        ansatz,
        residual: (sum_sq / count as f64).sqrt(),
        overlap_range: range,
        n_compared: count,
    })
}

/// Minimizes the collapse residual over `(β, ν)` by alternating
/// golden-section searches. `β` is held fixed for the fidelity ratio.
/// Returns `(β, ν, residual)`.
pub fn optimize_exponents(
    series_set: &[SweepSeries],
    ansatz: Ansatz,
    opts: &CollapseOptions,
    beta_range: (f64, f64),
    nu_range: (f64, f64),
) -> Result<(f64, f64, f64)> {
    let cost = |b: f64, n: f64| {
        collapse(series_set, b, n, ansatz, opts)
            .map(|r| r.residual)
            .unwrap_or(f64::INFINITY)
    };
    let minimize = |f: &dyn Fn(f64) -> f64, (mut a, mut b): (f64, f64)| {
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..60 {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = f(d);
            }
        }
        if fc <= fd {
            c
        } else {
            d
        }
    };
    let mut beta = 0.5 * (beta_range.0 + beta_range.1);
    let mut nu = 0.5 * (nu_range.0 + nu_range.1);
    for _ in 0..4 {
        nu = minimize(&|n| cost(beta, n), nu_range);
        if ansatz != Ansatz::FidelityRatio {
            beta = minimize(&|b| cost(b, nu), beta_range);
        }
    }
    let best = collapse(series_set, beta, nu, ansatz, opts)?;
    Ok((beta, nu, best.residual))
}

/// Logarithmically spaced grid including both ends.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect();
    // exact ends, so closed windows built from them keep both
    v[0] = lo;
    v[count - 1] = hi;
    v
}

/// Linearly spaced grid including both ends.
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}
