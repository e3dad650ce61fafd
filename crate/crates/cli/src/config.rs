//! Experiment configuration and its canonical hash.

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::spec_file::SpecDoc;
use remlab::sim::{DEFAULT_MAX_N, HARD_MAX_N};
use remlab::{CoordBox, GridOptions, ModelSpec, SimOptions};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A loaded spec with the identifier used in output rows and file names.
#[derive(Debug, Clone)]
pub struct NamedSpec {
    pub id: String,
    pub spec: ModelSpec,
}

impl NamedSpec {
    /// Normalized spec document: defaults filled in, exactly as it would be
    /// written back out.
    pub fn canonical_doc(&self) -> Value {
        let doc = SpecDoc::from_spec(&self.spec).expect("specs loaded from files have built-in families");
        serde_json::to_value(doc).expect("spec documents always serialize")
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub specs: Vec<NamedSpec>,
    pub betas: Vec<f64>,
    pub n_list: Vec<u32>,
    pub replicas: usize,
    pub seed: u64,
    pub boxes: Vec<CoordBox>,
    pub threshold: Option<f64>,
    pub grid_step: Option<f64>,
    pub max_n: u32,
}

impl ExperimentConfig {
    pub fn new(specs: Vec<NamedSpec>) -> Self {
        ExperimentConfig {
            specs,
            betas: Vec::new(),
            n_list: Vec::new(),
            replicas: 100,
            seed: 0,
            boxes: Vec::new(),
            threshold: None,
            grid_step: None,
            max_n: DEFAULT_MAX_N,
        }
    }

    pub fn grid(&self) -> Result<GridOptions, CliError> {
        match self.grid_step {
            None => Ok(GridOptions::default()),
            Some(s) => GridOptions::with_min_step(s).map_err(|e| CliError::Usage(e.to_string())),
        }
    }

    pub fn sim(&self) -> Result<SimOptions, CliError> {
        SimOptions::with_max_n(self.max_n).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn require_betas(&self) -> Result<(), CliError> {
        if self.betas.is_empty() {
            return Err(CliError::Usage("--beta is required and must not be empty".into()));
        }
        Ok(())
    }

    /// Checks the N list against the enumeration cap for every spec.
    pub fn require_sizes(&self) -> Result<(), CliError> {
        if self.n_list.is_empty() {
            return Err(CliError::Usage("--n is required and must not be empty".into()));
        }
        if self.replicas == 0 {
            return Err(CliError::Usage("--replicas must be at least 1".into()));
        }
        for s in &self.specs {
            let b = s.spec.branching() as f64;
            for &n in &self.n_list {
                if b.powi(n as i32) > 2f64.powi(self.max_n as i32) {
                    return Err(CliError::Usage(format!(
                        "N = {n} with b = {} exceeds the enumeration cap of 2^{} configurations (set REMLAB_MAX_N, at most {HARD_MAX_N})",
                        s.spec.branching(),
                        self.max_n
                    )));
                }
            }
        }
        Ok(())
    }

    /// Canonical JSON of everything that affects a command's output.
    pub fn canonical(&self, command: &str) -> Value {
        let specs: Map<String, Value> = self.specs.iter().map(|s| (s.id.clone(), s.canonical_doc())).collect();
        serde_json::json!({
            "command": command,
            "version": VERSION,
            "specs": specs,
            "betas": self.betas,
            "n": self.n_list,
            "replicas": self.replicas,
            "seed": self.seed,
            "boxes": self.boxes.iter().map(|b| b.to_string()).collect::<Vec<_>>(),
            "threshold": self.threshold,
            "grid_step": self.grid_step,
            "max_n": self.max_n,
        })
    }
}

/// Rebuilds a value with sorted object keys and `-0.0` folded into `0.0`.
pub fn canonicalize(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            Value::Object(keys.into_iter().map(|k| (k.clone(), canonicalize(&m[k]))).collect())
        }
        Value::Array(a) => Value::Array(a.iter().map(canonicalize).collect()),
        Value::Number(n) => match n.as_f64() {
            Some(f) if f == 0.0 && n.is_f64() => serde_json::json!(0.0),
            _ => v.clone(),
        },
        _ => v.clone(),
    }
}

/// SHA-256 of the compact canonical JSON, in hex.
pub fn config_hash(v: &Value) -> String {
    let text = serde_json::to_string(&canonicalize(v)).expect("JSON values always serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Enumeration cap from `REMLAB_MAX_N`, or the default when unset.
pub fn max_n_from_env(value: Option<&str>) -> Result<u32, CliError> {
    let Some(raw) = value else { return Ok(DEFAULT_MAX_N) };
    let n: u32 = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("REMLAB_MAX_N must be an integer, got {raw:?}")))?;
    if n == 0 || n > HARD_MAX_N {
        return Err(CliError::Usage(format!("REMLAB_MAX_N must be in 1..={HARD_MAX_N}, got {n}")));
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn hash_ignores_key_order_and_signed_zero() {
        let a = json!({"b": 1, "a": [0.0, {"y": 2, "x": 1}]});
        let b = json!({"a": [-0.0, {"x": 1, "y": 2}], "b": 1});
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_ne!(config_hash(&a), config_hash(&json!({"b": 2, "a": [0.0, {"x": 1, "y": 2}]})));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn env_cap() {
        assert_eq!(max_n_from_env(None).unwrap(), DEFAULT_MAX_N);
        assert_eq!(max_n_from_env(Some("30")).unwrap(), 30);
        assert!(max_n_from_env(Some("31")).is_err());
        assert!(max_n_from_env(Some("0")).is_err());
        assert!(max_n_from_env(Some("lots")).is_err());
    }

    #[test]
    fn sizes_checked_against_cap() {
        let spec = NamedSpec { id: "rem".into(), spec: ModelSpec::rem_with(remlab::DisorderFamily::gaussian(), 3, 1.0).unwrap() };
        let mut cfg = ExperimentConfig::new(vec![spec]);
        cfg.n_list = vec![10];
        assert!(cfg.require_sizes().is_ok());
        cfg.n_list = vec![18];
        assert!(cfg.require_sizes().is_err());
        cfg.max_n = 30;
        assert!(cfg.require_sizes().is_ok());
    }
}
