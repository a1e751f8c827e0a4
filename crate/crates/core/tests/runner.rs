use std::path::{Path, PathBuf};
use std::process::Command;

use rabi_stark::eval::{DirectEvaluator, Evaluator};
use rabi_stark::exec::ExecMode;
use rabi_stark::model::ModelParams;
use rabi_stark::observables::Observable;
use rabi_stark::runner::{
    load_config, read_series, run_sweep, Cache, CachedEvaluator, GridSpec, SizeAxis, SizeAxisKind, Spacing, SweepAxis,
    SweepConfig,
};
use rabi_stark::spectra::{ConvergencePolicy, DEFAULT_TOL};
use rabi_stark::{Error, ObservableId};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rabi-stark"))
}

fn small_config(out: &Path) -> SweepConfig {
    SweepConfig {
        model: ModelParams::rsm(0.5, 0.9, 0.0),
        sweep_axis: SweepAxis::CouplingG,
        grid: GridSpec::Range {
            lo: 0.1,
            hi: 0.4,
            count: 7,
            spacing: Spacing::Linear,
            mirror: false,
        },
        sizes: Some(SizeAxis {
            kind: SizeAxisKind::EffectiveL,
            values: vec![10.0, 100.0],
        }),
        observables: vec![
            ObservableId::GroundEnergy,
            ObservableId::OrderParameter,
            ObservableId::FidelitySusceptibility,
        ],
        susceptibility: Default::default(),
        convergence: ConvergencePolicy::default(),
        truncation: None,
        output_dir: out.to_path_buf(),
        workers: 2,
        fit: None,
        collapse: None,
        peak: None,
        table: None,
    }
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let e = e.unwrap();
            let name = e.file_name().to_string_lossy().into_owned();
            name.ends_with(".csv").then(|| (name, std::fs::read(e.path()).unwrap()))
        })
        .collect();
    v.sort();
    v
}

#[test]
fn shipped_configs_load() {
    let mut found = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            load_config(&path, &[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            found += 1;
        }
    }
    assert!(found >= 7, "only {found} configs");
}

#[test]
fn single_point_qrm_ground_energy() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.model = ModelParams::qrm(0.5, 0.0);
    cfg.grid = GridSpec::List(vec![0.0]);
    cfg.sizes = None;
    cfg.observables = vec![ObservableId::GroundEnergy];
    let out = run_sweep(&cfg, ExecMode::Sequential).unwrap();
    let rows = read_series(&out.files[0]).unwrap();
    assert_eq!(rows.len(), 1);
    assert!((rows[0].value - -0.25).abs() < 1e-12, "{}", rows[0].value);
    assert!(rows[0].converged);
}

#[test]
fn sweep_writes_series_and_manifest_then_hits_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let first = run_sweep(&cfg, ExecMode::default()).unwrap();
    assert_eq!(first.files.len(), 6);
    assert_eq!(first.failure_count(), 0);
    assert!(first.cache_misses > 0);
    for f in &first.files {
        assert_eq!(read_series(f).unwrap().len(), 7);
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&first.manifest).unwrap()).unwrap();
    assert_eq!(manifest["schema"], 1);
    assert_eq!(manifest["series"].as_array().unwrap().len(), 6);
    assert_eq!(manifest["config"]["model"]["stark_u"], 0.9);

    let before = read_dir_sorted(dir.path());
    let second = run_sweep(&cfg, ExecMode::default()).unwrap();
    assert_eq!(second.cache_misses, 0);
    assert!(second.cache_hits > 0);
    assert_eq!(read_dir_sorted(dir.path()), before);
}

#[test]
fn parallel_and_sequential_outputs_match() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_sweep(&small_config(a.path()), ExecMode::Parallel).unwrap();
    run_sweep(&small_config(b.path()), ExecMode::Sequential).unwrap();
    assert_eq!(read_dir_sorted(a.path()), read_dir_sorted(b.path()));
}

#[test]
fn cached_value_is_bitwise_fresh_value() {
    let dir = tempfile::tempdir().unwrap();
    let cached = CachedEvaluator::new(Cache::new(dir.path()), DEFAULT_TOL);
    let p = ModelParams::rsm(0.5, 1.0, 0.37);
    for obs in [
        Observable::GroundEnergy,
        Observable::Gap,
        Observable::FidelitySusceptibility(Default::default()),
    ] {
        let fresh = DirectEvaluator.evaluate_at(&p, &obs, 256).unwrap();
        let stored = cached.evaluate_at(&p, &obs, 256).unwrap();
        let reread = cached.evaluate_at(&p, &obs, 256).unwrap();
        assert_eq!(fresh.value.to_bits(), stored.value.to_bits());
        assert_eq!(fresh.value.to_bits(), reread.value.to_bits());
        assert_eq!(fresh.residual.to_bits(), reread.residual.to_bits());
    }
    assert_eq!(cached.misses(), 3);
    assert_eq!(cached.hits(), 3);
}

#[test]
fn unknown_override_is_a_usage_error() {
    let path = configs_dir().join("fig2.json");
    let err = load_config(&path, &["no_such_key=1".to_string()]).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    assert!(err.is_usage());
    let cfg = load_config(&path, &["model.delta=0.25".to_string(), "grid.count=5".to_string()]).unwrap();
    assert_eq!(cfg.model.delta, 0.25);
    assert_eq!(cfg.grid.values().unwrap().len(), 5);
}

#[test]
fn cli_oracle_prints_frozen_levels() {
    let out = bin()
        .args(["oracle", "--delta", "0.5", "--g", "0.3", "--levels", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let energies: Vec<f64> = text
        .lines()
        .skip(1)
        .take(2)
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    assert!((energies[0] - -0.4481).abs() < 5e-5, "{text}");
    assert!((energies[1] - -0.4320).abs() < 5e-5, "{text}");
    assert!(text.contains("lambda = 0.600000"));
}

#[test]
fn cli_sweep_then_fit_recovers_order_parameter_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let set = format!("output_dir={}", dir.path().display());
    let status = bin()
        .args(["--set", &set, "sweep"])
        .arg(configs_dir().join("fig2.json"))
        .status()
        .unwrap();
    assert!(status.success());
    let out = bin()
        .args(["fit", "--window", "0.0031622776601683794:0.1"])
        .arg(dir.path().join("order_parameter.csv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let slope = fit["exponent"].as_f64().unwrap();
    assert!((slope - 1.0).abs() <= 0.05, "slope {slope}");
}

#[test]
fn cli_fit_on_synthetic_cubic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cubic.csv");
    let rows: Vec<_> = rabi_stark::scaling::log_grid(1e-3, 1.0, 10)
        .into_iter()
        .map(|x| rabi_stark::runner::SeriesRow {
            abscissa: x,
            value: 2.5 * x.powi(3),
            n_tr: 64,
            converged: true,
            residual: 0.0,
        })
        .collect();
    rabi_stark::runner::write_series(&path, &rows).unwrap();
    let out = bin().args(["fit", "--window", "1e-3:1"]).arg(&path).output().unwrap();
    assert!(out.status.success());
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((fit["exponent"].as_f64().unwrap() - 3.0).abs() < 1e-9);
}

#[test]
fn cli_exit_codes() {
    let missing = bin()
        .args(["sweep", "/nonexistent/config.json"])
        .output()
        .unwrap()
        .status;
    assert_eq!(missing.code(), Some(2));
    let bad_flag = bin().args(["sweep", "--bogus"]).output().unwrap().status;
    assert_eq!(bad_flag.code(), Some(2));
    let bad_key = bin()
        .args(["--set", "no_such_key=1", "sweep"])
        .arg(configs_dir().join("fig2.json"))
        .status()
        .unwrap();
    assert_eq!(bad_key.code(), Some(2));
    // the closed form has no solution above g_c
    let numeric = bin()
        .args(["oracle", "--delta", "0.5", "--g", "0.7"])
        .output()
        .unwrap()
        .status;
    assert_eq!(numeric.code(), Some(1));
}
