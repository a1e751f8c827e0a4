//! Config-driven sweeps: grid expansion, cached evaluation, CSV output and
//! the analysis passes built on top of them.

mod cache;
mod config;
mod csv;

pub use cache::{Cache, CacheKey, CachedEvaluator, CACHE_DIR_ENV};
pub use config::{
    apply_override, load_config, CollapseSection, FitSection, GridSpec, PeakSection, SizeAxis, SizeAxisKind, Spacing,
    SweepAxis, SweepConfig,
};
pub use csv::{
    fmt_float, read_series, render_series, write_atomic, write_series, SeriesRow, SCHEMA_LINE, SERIES_HEADER,
};

use std::path::PathBuf;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{susceptibility_peak, Evaluator};
use crate::exec::{self, ExecMode};
use crate::model::{branch_critical_point, critical_point, ModelKind, ModelParams};
use crate::observables::{Observable, ObservableId};
use crate::scaling::{
    collapse, exponent_table, master_curves, AbscissaKind, CollapseOptions, CollapseResult, ExponentTable, PeakResult,
    SizeKind, SweepSeries,
};
use crate::spectra::{ground_energy_derivatives, DerivativeCurve, TruncationChoice, DEFAULT_TOL};

/// Critical coupling of the config's model and branch.
pub fn config_g_c(cfg: &SweepConfig) -> Result<f64> {
    let m = &cfg.model;
    match m.kind {
        ModelKind::Qrm => Ok(critical_point(m)?.g_c),
        ModelKind::Rsm => Ok(branch_critical_point(m.delta, m.omega, m.branch(), 0.0)?.g_c),
    }
}

fn stark_for_size(cfg: &SweepConfig, size: f64) -> Result<f64> {
    if !(size >= 1.0) {
        return Err(Error::Config(format!("effective size {size} must be at least 1")));
    }
    Ok(cfg.model.branch().sign() * cfg.model.omega * (1.0 - 1.0 / size))
}

/// Model parameters and truncation rule of one grid point.
pub fn point_setup(cfg: &SweepConfig, size: Option<f64>, x: f64) -> Result<(ModelParams, TruncationChoice)> {
    let mut p = cfg.model;
    let mut truncation = match cfg.truncation {
        Some(n) => TruncationChoice::Fixed(n),
        None => TruncationChoice::Converged(cfg.convergence),
    };
    if let (Some(axis), Some(label)) = (&cfg.sizes, size) {
        match axis.kind {
            SizeAxisKind::EffectiveL => p.stark_u = stark_for_size(cfg, label)?,
            SizeAxisKind::TruncationN => truncation = TruncationChoice::Fixed(positive_n(label)?),
        }
    }
    match cfg.sweep_axis {
        SweepAxis::CouplingG => p.coupling_g = x,
        SweepAxis::ReducedT => p.coupling_g = config_g_c(cfg)? * (1.0 - x),
        SweepAxis::StarkU => p.stark_u = x,
        SweepAxis::EffectiveL => p.stark_u = stark_for_size(cfg, x)?,
        SweepAxis::TruncationN => truncation = TruncationChoice::Fixed(positive_n(x)?),
    }
    Ok((p, truncation))
}

fn positive_n(x: f64) -> Result<usize> {
    if x >= 1.0 && x.fract() == 0.0 {
        Ok(x as usize)
    } else {
        Err(Error::Config(format!("truncation {x} is not a positive integer")))
    }
}

/// A point that could not be evaluated.
#[derive(Debug, Clone, Serialize)]
pub struct PointFailure {
    pub abscissa: f64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesResult {
    pub observable: ObservableId,
    pub size_label: Option<f64>,
    pub rows: Vec<SeriesRow>,
    pub failures: Vec<PointFailure>,
}

impl SeriesResult {
    pub fn file_name(&self, size_kind: Option<SizeAxisKind>) -> String {
        match (self.size_label, size_kind) {
            (Some(l), Some(SizeAxisKind::EffectiveL)) => format!("{}_L{l}.csv", self.observable.name()),
            (Some(l), Some(SizeAxisKind::TruncationN)) => format!("{}_N{l}.csv", self.observable.name()),
            _ => format!("{}.csv", self.observable.name()),
        }
    }
}

fn size_labels(cfg: &SweepConfig) -> Vec<Option<f64>> {
    match &cfg.sizes {
        Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    }
}

/// Evaluates every (size, observable, grid point) of the config. Failed
/// points are collected, not fatal.
pub fn compute_series(cfg: &SweepConfig, evaluator: &dyn Evaluator, mode: ExecMode) -> Result<Vec<SeriesResult>> {
    cfg.validate()?;
    let grid = cfg.grid.values()?;
    let mut jobs = Vec::new();
    for size in size_labels(cfg) {
        for &id in &cfg.observables {
            for &x in &grid {
                jobs.push((size, id, x));
            }
        }
    }
    let results = exec::map(mode, &jobs, |&(size, id, x)| {
        let (p, t) = point_setup(cfg, size, x)?;
        let obs = Observable::from_id(id, cfg.susceptibility);
        evaluator.evaluate(&p, &obs, &t)
    });
    let mut out: Vec<SeriesResult> = Vec::new();
    for (&(size, id, x), res) in jobs.iter().zip(results) {
        let idx = match out.iter().position(|s| s.size_label == size && s.observable == id) {
            Some(i) => i,
            None => {
                out.push(SeriesResult {
                    observable: id,
                    size_label: size,
                    rows: Vec::new(),
                    failures: Vec::new(),
                });
                out.len() - 1
            }
        };
        match res {
            Ok(p) => out[idx].rows.push(SeriesRow {
                abscissa: x,
                value: p.value,
                n_tr: p.n_tr,
                converged: p.converged,
                residual: p.residual,
            }),
            Err(e) => {
                log::warn!("{} at {x}: {e}", id.name());
                out[idx].failures.push(PointFailure {
                    abscissa: x,
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub series: Vec<SeriesResult>,
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub cache_hits: usize,
    /// Evaluations that were computed rather than read from the cache.
    pub cache_misses: usize,
}

impl SweepOutcome {
    pub fn failure_count(&self) -> usize {
        self.series.iter().map(|s| s.failures.len()).sum()
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: u32,
    version: &'static str,
    config: &'a SweepConfig,
    solver_tol: f64,
    cache_dir: String,
    series: Vec<ManifestSeries<'a>>,
}

#[derive(Serialize)]
struct ManifestSeries<'a> {
    file: String,
    observable: ObservableId,
    size_label: Option<f64>,
    points: usize,
    failures: &'a [PointFailure],
}

/// The evaluator a config runs through: the on-disk cache of its output
/// directory (or `$RABI_STARK_CACHE_DIR`).
pub fn cached_evaluator(cfg: &SweepConfig) -> CachedEvaluator {
    CachedEvaluator::new(Cache::for_output(&cfg.output_dir), DEFAULT_TOL)
}

/// Runs the sweep, writes one CSV per (observable, size) and a manifest.
pub fn run_sweep(cfg: &SweepConfig, mode: ExecMode) -> Result<SweepOutcome> {
    let evaluator = cached_evaluator(cfg);
    let series = compute_series(cfg, &evaluator, mode)?;
    let kind = cfg.sizes.as_ref().map(|s| s.kind);
    let mut files = Vec::new();
    let mut entries = Vec::new();
    for s in &series {
        let name = s.file_name(kind);
        let path = cfg.output_dir.join(&name);
        write_series(&path, &s.rows)?;
        files.push(path);
        entries.push(ManifestSeries {
            file: name,
            observable: s.observable,
            size_label: s.size_label,
            points: s.rows.len(),
            failures: &s.failures,
        });
    }
    let manifest = Manifest {
        schema: 1,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        solver_tol: DEFAULT_TOL,
        cache_dir: Cache::for_output(&cfg.output_dir).dir().display().to_string(),
        series: entries,
    };
    let manifest_path = cfg.output_dir.join("manifest.json");
    write_atomic(&manifest_path, &serde_json::to_string_pretty(&manifest)?)?;
    log::info!(
        "sweep done: {} cache hits, {} computed",
        evaluator.hits(),
        evaluator.misses()
    );
    Ok(SweepOutcome {
        cache_hits: evaluator.hits(),
        cache_misses: evaluator.misses(),
        series,
        files,
        manifest: manifest_path,
    })
}

/// Turns sweep results for one observable into scaling series.
pub fn to_scaling_series(cfg: &SweepConfig, results: &[SeriesResult], id: ObservableId) -> Result<Vec<SweepSeries>> {
    let abscissa = match cfg.sweep_axis {
        SweepAxis::CouplingG => AbscissaKind::CouplingG,
        SweepAxis::ReducedT => AbscissaKind::ReducedT,
        _ => {
            return Err(Error::Config(
                "scaling analysis needs a coupling_g or reduced_t sweep".into(),
            ))
        }
    };
    let kind = match cfg.sizes.as_ref().map(|s| s.kind) {
        Some(SizeAxisKind::EffectiveL) => SizeKind::EffectiveL,
        Some(SizeAxisKind::TruncationN) => SizeKind::TruncationN,
        None => return Err(Error::Config("scaling analysis needs a size axis".into())),
    };
    results
        .iter()
        .filter(|s| s.observable == id)
        .map(|s| {
            let label = s.size_label.expect("size axis present");
            SweepSeries::new(
                label,
                kind,
                abscissa,
                s.rows.iter().map(|r| (r.abscissa, r.value)).collect(),
            )
        })
        .collect()
}

/// Susceptibility peak of every size in the config.
pub fn run_peaks(cfg: &SweepConfig, evaluator: &dyn Evaluator, mode: ExecMode) -> Result<Vec<PeakResult>> {
    let section = cfg
        .peak
        .as_ref()
        .ok_or_else(|| Error::Config("config has no `peak` section".into()))?;
    if section.points < 3 {
        return Err(Error::Config("peak scan needs at least three points".into()));
    }
    let g_c = config_g_c(cfg)?;
    let obs = Observable::FidelitySusceptibility(cfg.susceptibility);
    let labels = size_labels(cfg);
    let results = exec::map(mode, &labels, |&size| {
        let (p, t) = point_setup_coupling(cfg, size)?;
        let scan = (section.scan.0 * g_c, section.scan.1 * g_c, section.points);
        susceptibility_peak(
            evaluator,
            &p,
            &obs,
            &t,
            scan,
            section.rel_tol * g_c,
            size.unwrap_or(0.0),
        )
    });
    results.into_iter().collect()
}

/// Like [`point_setup`] but for a coupling that is set later.
fn point_setup_coupling(cfg: &SweepConfig, size: Option<f64>) -> Result<(ModelParams, TruncationChoice)> {
    let mut c = cfg.clone();
    c.sweep_axis = SweepAxis::CouplingG;
    point_setup(&c, size, cfg.model.coupling_g)
}

#[derive(Debug, Clone, Serialize)]
pub struct CollapseReport {
    pub result: CollapseResult,
    /// Residuals at the perturbed `ν` values, in config order.
    pub perturbed: Vec<CollapseResult>,
    pub peaks: Vec<PeakResult>,
    pub master_file: PathBuf,
}

/// Sweep plus collapse at the configured exponents and at perturbed `ν`.
pub fn run_collapse(cfg: &SweepConfig, mode: ExecMode) -> Result<CollapseReport> {
    let section = cfg
        .collapse
        .clone()
        .ok_or_else(|| Error::Config("config has no `collapse` section".into()))?;
    let mut sweep_cfg = cfg.clone();
    if !sweep_cfg.observables.contains(&section.observable) {
        sweep_cfg.observables.push(section.observable);
    }
    let outcome = run_sweep(&sweep_cfg, mode)?;
    let series = to_scaling_series(cfg, &outcome.series, section.observable)?;
    let peaks = match section.ansatz {
        crate::scaling::Ansatz::FidelityRatio => run_peaks(cfg, &cached_evaluator(cfg), mode)?,
        _ => Vec::new(),
    };
    let opts = CollapseOptions {
        g_c: Some(config_g_c(cfg)?),
        peaks: peaks.clone(),
        x_window: section.x_window,
        min_reference: None,
    };
    let result = collapse(&series, section.beta, section.nu, section.ansatz, &opts)?;
    let perturbed = section
        .perturbations
        .iter()
        .map(|f| collapse(&series, section.beta, section.nu * f, section.ansatz, &opts))
        .collect::<Result<Vec<_>>>()?;
    let curves = master_curves(&series, section.beta, section.nu, section.ansatz, &opts)?;
    let mut body = format!("{SCHEMA_LINE}\nsize_label,side,x,y\n");
    for c in &curves {
        for &(x, y) in &c.points {
            body.push_str(&format!(
                "{},{},{},{}\n",
                fmt_float(c.size_label),
                c.side,
                fmt_float(x),
                fmt_float(y)
            ));
        }
    }
    let master_file = cfg.output_dir.join(format!("master_{}.csv", section.observable.name()));
    write_atomic(&master_file, &body)?;
    Ok(CollapseReport {
        result,
        perturbed,
        peaks,
        master_file,
    })
}

/// Ground-energy derivatives along the coupling grid, one curve per size.
pub fn run_derivatives(cfg: &SweepConfig, mode: ExecMode) -> Result<Vec<(Option<f64>, DerivativeCurve)>> {
    cfg.validate()?;
    if cfg.sweep_axis != SweepAxis::CouplingG {
        return Err(Error::Config("derivatives need a coupling_g sweep".into()));
    }
    let grid = cfg.grid.values()?;
    let kind = cfg.sizes.as_ref().map(|s| s.kind);
    let mut out = Vec::new();
    for size in size_labels(cfg) {
        let (p, t) = point_setup_coupling(cfg, size)?;
        let curve = ground_energy_derivatives(&p, &grid, t, mode)?;
        let mut body = format!("{SCHEMA_LINE}\ng,e0,d1,d2\n");
        let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
        for i in 0..curve.grid.len() {
            body.push_str(&format!(
                "{},{},{},{}\n",
                fmt_float(curve.grid[i]),
                fmt_float(curve.e0[i]),
                opt(curve.d1[i]),
                opt(curve.d2[i])
            ));
        }
        let name = match (size, kind) {
            (Some(l), Some(SizeAxisKind::EffectiveL)) => format!("derivatives_L{l}.csv"),
            (Some(l), Some(SizeAxisKind::TruncationN)) => format!("derivatives_N{l}.csv"),
            _ => "derivatives.csv".to_string(),
        };
        write_atomic(&cfg.output_dir.join(name), &body)?;
        out.push((size, curve));
    }
    Ok(out)
}

/// Exponent table through the config's cache.
pub fn run_table(cfg: &SweepConfig, mode: ExecMode) -> Result<ExponentTable> {
    let table_cfg = cfg
        .table
        .clone()
        .ok_or_else(|| Error::Config("config has no `table` section".into()))?;
    let evaluator = cached_evaluator(cfg);
    let table = exponent_table(&table_cfg, &evaluator, mode)?;
    write_atomic(
        &cfg.output_dir.join("table1.json"),
        &serde_json::to_string_pretty(&table)?,
    )?;
    write_atomic(&cfg.output_dir.join("table1.txt"), &table.render())?;
    Ok(table)
}
