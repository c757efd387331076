//! JSON run configurations and `--set` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use atomcov::simkit::{cov_banded_random, cov_kron_tbt, cov_line_spectrum, jammer_cov, JammerScenario, LineSpectrumModel, Method};
use atomcov::{Atom1Options, Atom2Options, HermMat, StructureSpec};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

/// Reads a JSON config, applies `key=value` overrides, then validates it
/// against `T`.
pub fn load<T: DeserializeOwned>(path: &Path, sets: &[String]) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config `{}`", path.display()))?;
    let mut value: Value = serde_json::from_str(&text).with_context(|| format!("config `{}` is not valid JSON", path.display()))?;
    for s in sets {
        apply_set(&mut value, s)?;
    }
    serde_json::from_value(value).with_context(|| format!("invalid config `{}`", path.display()))
}

/// Sets a dotted path such as `atom2.gamma0=0.01` or `n_grid.1=50`. The value
/// is parsed as JSON, falling back to a plain string.
pub fn apply_set(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{assignment}`"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("--set: malformed key `{key}`");
    }
    let mut value = Some(serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string())));
    let mut cur = root;
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value.take().unwrap());
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part.parse().map_err(|_| anyhow!("--set {key}: `{part}` is not an array index"))?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| anyhow!("--set {key}: index {idx} out of range (length {len})"))?;
                if last {
                    *slot = value.take().unwrap();
                    return Ok(());
                }
                slot
            }
            _ => bail!("--set {key}: `{part}` is not inside an object or array"),
        };
    }
    Ok(())
}

/// Source of a true covariance matrix.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Truth {
    LineSpectrum(LineSpectrumModel),
    /// `T ⊗ T` with `T` the covariance of `factor`.
    Tbt { factor: LineSpectrumModel },
    Banded {
        m: usize,
        b: usize,
        #[serde(default = "one")]
        noise_floor: f64,
        seed: u64,
    },
    Jammers(JammerScenario),
    Matrix { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

impl Truth {
    pub fn build(&self) -> Result<HermMat> {
        Ok(match self {
            Truth::LineSpectrum(model) => cov_line_spectrum(model)?,
            Truth::Tbt { factor } => cov_kron_tbt(&cov_line_spectrum(factor)?)?,
            Truth::Banded { m, b, noise_floor, seed } => cov_banded_random(*m, *b, *noise_floor, *seed)?,
            Truth::Jammers(sc) => jammer_cov(sc)?,
            Truth::Matrix { path } => {
                atomcov::io::read_matrix(path).with_context(|| format!("cannot load matrix `{}`", path.display()))?
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateMethod {
    Atom1,
    Atom2,
    Scm,
    Fb,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub input: PathBuf,
    pub method: EstimateMethod,
    /// Defaults to Toeplitz of the data dimension.
    #[serde(default)]
    pub spec: Option<StructureSpec>,
    #[serde(default)]
    pub atom1: Atom1Options,
    #[serde(default)]
    pub atom2: Atom2Options,
    /// Overrides the seed inside the solver options.
    #[serde(default)]
    pub seed: Option<u64>,
    pub output: PathBuf,
    pub report: PathBuf,
    #[serde(default)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: Truth,
    pub n: usize,
    pub seed: u64,
    pub output: PathBuf,
    /// Truth matrix CSV; Kronecker models default to `<output stem>_truth.csv`.
    #[serde(default)]
    pub truth_output: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MseBenchConfig {
    pub truth: Truth,
    #[serde(default)]
    pub spec: Option<StructureSpec>,
    pub methods: Vec<Method>,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "yes")]
    pub with_crb: bool,
    pub output: PathBuf,
    #[serde(default)]
    pub json: Option<PathBuf>,
    #[serde(default)]
    pub timing: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinrBenchConfig {
    pub scenario: JammerScenario,
    pub methods: Vec<Method>,
    pub n: usize,
    pub trials: usize,
    /// Explicit angle grid in degrees; otherwise `points` cell midpoints.
    #[serde(default)]
    pub theta_deg: Option<Vec<f64>>,
    #[serde(default = "default_points")]
    pub points: usize,
    pub seed: u64,
    pub output: PathBuf,
    #[serde(default)]
    pub json: Option<PathBuf>,
}

fn default_points() -> usize {
    500
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Snapshot CSV; alternatively `truth`, `n` and `seed` generate the data.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub truth: Option<Truth>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub spec: Option<StructureSpec>,
    #[serde(default)]
    pub atom1: Atom1Options,
    #[serde(default)]
    pub atom2: Atom2Options,
    pub output: PathBuf,
    #[serde(default)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrbConfig {
    pub truth: Truth,
    #[serde(default)]
    pub spec: Option<StructureSpec>,
    pub n: usize,
    pub output: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn set_overrides_nested_and_indexed_keys() {
        let mut v = json!({"a": {"b": 1}, "xs": [1, 2]});
        apply_set(&mut v, "a.b=2.5").unwrap();
        apply_set(&mut v, "a.c.d=true").unwrap();
        apply_set(&mut v, "xs.1=7").unwrap();
        apply_set(&mut v, "name=atom2").unwrap();
        assert_eq!(v, json!({"a": {"b": 2.5, "c": {"d": true}}, "xs": [1, 7], "name": "atom2"}));
        assert!(apply_set(&mut v, "xs.5=1").is_err());
        assert!(apply_set(&mut v, "a.b.c=1").is_err());
        assert!(apply_set(&mut v, "novalue").is_err());
        assert!(apply_set(&mut v, "a..b=1").is_err());
    }

    #[test]
    fn truth_variants_parse_and_reject_unknown_keys() {
        let t: Truth = serde_json::from_value(json!({"kind": "line_spectrum", "m": 3, "frequencies": [0.5], "powers": [2.0]})).unwrap();
        assert_eq!(t.build().unwrap().dim(), 3);
        let bad = serde_json::from_value::<Truth>(json!({"kind": "line_spectrum", "m": 3, "frequencies": [], "powers": [], "extra": 1}));
        assert!(bad.is_err());
        let t: Truth = serde_json::from_value(json!({"kind": "banded", "m": 5, "b": 2, "seed": 1})).unwrap();
        assert_eq!(t.build().unwrap().dim(), 5);
        assert!(serde_json::from_value::<Truth>(json!({"kind": "banded", "m": 5, "b": 2, "seed": 1, "q": 0})).is_err());
    }
}
