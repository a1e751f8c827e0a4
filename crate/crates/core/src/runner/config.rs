use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::observables::{ObservableId, SusceptibilityMethod};
use crate::scaling::{linear_grid, log_grid, Ansatz, TableConfig};
use crate::spectra::ConvergencePolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    CouplingG,
    /// `t = 1 - g/g_c` of the model's branch.
    ReducedT,
    StarkU,
    /// `U = ±(1 - 1/L)`, sign taken from the template's `stark_u`.
    EffectiveL,
    TruncationN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range {
        lo: f64,
        hi: f64,
        count: usize,
        spacing: Spacing,
        /// Also include the negated values (for `t` on both sides of `g_c`).
        #[serde(default)]
        mirror: bool,
    },
}

impl GridSpec {
    /// Ascending grid values; rejects empty or non-monotone grids.
    pub fn values(&self) -> Result<Vec<f64>> {
        let mut v = match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Range {
                lo,
                hi,
                count,
                spacing,
                mirror,
            } => {
                if *count == 0 || !(lo <= hi) {
                    return Err(Error::Config(format!("bad grid range {lo}..{hi} x {count}")));
                }
                if *spacing == Spacing::Log && !(*lo > 0.0) {
                    return Err(Error::Config("log grid needs lo > 0".into()));
                }
                let base = match spacing {
                    Spacing::Linear => linear_grid(*lo, *hi, *count),
                    Spacing::Log => log_grid(*lo, *hi, *count),
                };
                let mut all = base.clone();
                if *mirror {
                    all.extend(base.iter().map(|x| -x));
                    all.sort_by(f64::total_cmp);
                }
                all
            }
        };
        if v.is_empty() {
            return Err(Error::Config("grid is empty".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("grid holds a non-finite value".into()));
        }
        if let GridSpec::List(_) = self {
            if v.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::Config("grid must be strictly increasing".into()));
            }
        }
        v.dedup();
        if v.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("grid must be strictly increasing".into()));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeAxisKind {
    EffectiveL,
    TruncationN,
}

/// Optional second axis: one series per size label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeAxis {
    pub kind: SizeAxisKind,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseSection {
    pub observable: ObservableId,
    pub ansatz: Ansatz,
    #[serde(default)]
    pub beta: f64,
    pub nu: f64,
    #[serde(default)]
    pub x_window: Option<(f64, f64)>,
    /// Multipliers applied to `nu` for the comparison runs.
    #[serde(default = "default_perturbations")]
    pub perturbations: Vec<f64>,
}

fn default_perturbations() -> Vec<f64> {
    vec![0.7, 1.3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakSection {
    /// Scan range as fractions of the branch critical coupling.
    pub scan: (f64, f64),
    pub points: usize,
    #[serde(default = "default_peak_tol")]
    pub rel_tol: f64,
}

fn default_peak_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub observable: ObservableId,
    pub window: (f64, f64),
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// A run configuration: a sweep plus optional analysis sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ModelParams,
    pub sweep_axis: SweepAxis,
    pub grid: GridSpec,
    #[serde(default)]
    pub sizes: Option<SizeAxis>,
    pub observables: Vec<ObservableId>,
    #[serde(default)]
    pub susceptibility: SusceptibilityMethod,
    #[serde(default)]
    pub convergence: ConvergencePolicy,
    /// Fixed truncation; when absent every point is converged per `convergence`.
    #[serde(default)]
    pub truncation: Option<usize>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub fit: Option<FitSection>,
    #[serde(default)]
    pub collapse: Option<CollapseSection>,
    #[serde(default)]
    pub peak: Option<PeakSection>,
    #[serde(default)]
    pub table: Option<TableConfig>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.convergence.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.grid.values()?;
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.observables.is_empty() {
            return Err(Error::Config("no observables requested".into()));
        }
        if let Some(sizes) = &self.sizes {
            if sizes.values.is_empty() {
                return Err(Error::Config("size axis is empty".into()));
            }
            if sizes.kind == SizeAxisKind::TruncationN && self.sweep_axis == SweepAxis::TruncationN {
                return Err(Error::Config(
                    "truncation cannot be both the sweep and the size axis".into(),
                ));
            }
            if sizes.kind == SizeAxisKind::EffectiveL
                && matches!(self.sweep_axis, SweepAxis::StarkU | SweepAxis::EffectiveL)
            {
                return Err(Error::Config("the size axis already fixes U".into()));
            }
        }
        if self.truncation == Some(0) {
            return Err(Error::Config("truncation must be positive".into()));
        }
        Ok(())
    }
}

/// Reads a JSON config and applies `path.to.key=value` overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let cfg: SweepConfig =
        serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Sets the leaf addressed by a dotted path. Values parse as JSON when they
/// can and fall back to plain strings.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
    if path.is_empty() {
        return Err(Error::Config(format!("override `{assignment}` has an empty key")));
    }
    let new: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), new);
                    return Ok(());
                }
                map.entry(part.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("`{part}` in `{path}` is not an array index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} out of range ({len}) in `{path}`")))?;
                if last {
                    *slot = new;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("`{path}` descends into a scalar"))),
        };
    }
    unreachable!("loop returns on the last segment")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_leaf_and_nested() {
        let mut v: Value = serde_json::json!({"model": {"delta": 0.5}, "grid": [1, 2]});
        apply_override(&mut v, "model.delta=0.25").unwrap();
        apply_override(&mut v, "grid.1=3").unwrap();
        apply_override(&mut v, "convergence.rel_tol=1e-8").unwrap();
        apply_override(&mut v, "output_dir=runs/a").unwrap();
        assert_eq!(v["model"]["delta"], 0.25);
        assert_eq!(v["grid"][1], 3);
        assert_eq!(v["convergence"]["rel_tol"], 1e-8);
        assert_eq!(v["output_dir"], "runs/a");
        assert!(apply_override(&mut v, "model.delta.x=1").is_err());
        assert!(apply_override(&mut v, "novalue").is_err());
    }

    #[test]
    fn grids() {
        let g = GridSpec::Range {
            lo: 1e-3,
            hi: 1e-1,
            count: 3,
            spacing: Spacing::Log,
            mirror: true,
        };
        let v = g.values().unwrap();
        assert_eq!(v.len(), 6);
        assert!((v[0] + 0.1).abs() < 1e-15 && (v[5] - 0.1).abs() < 1e-15);
        assert!(GridSpec::List(vec![0.2, 0.1]).values().is_err());
        assert!(GridSpec::List(vec![]).values().is_err());
    }
}
