//! Run configuration: command-line flags layered over an optional JSON file.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;

use lorroll::{HolonomyMethod, ManifoldRecord, ManifoldSpec, Point, Vector};

/// Error tied to a configuration key, reported as a JSON pointer.
#[derive(Debug)]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

impl ConfigError {
    pub fn at(key: &str, message: impl fmt::Display) -> Self {
        Self {
            pointer: format!("/{key}"),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration at {}: {}", self.pointer, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutFormat {
    Csv,
    Json,
}

/// Every key accepted in a `--config` file. Flags given on the command line
/// take precedence over the file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct RunConfig {
    pub manifold: Option<Value>,
    pub x: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub step: Option<f64>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub out: Option<OutFormat>,
    pub output: Option<PathBuf>,
    pub method: Option<String>,
    #[serde(rename = "loop")]
    pub loop_spec: Option<String>,
    pub curve: Option<String>,
    pub target: Option<Value>,
    pub probe: Option<bool>,
    pub generators: Option<Value>,
    pub word_len: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let pointer = if path == "." {
                String::new()
            } else {
                path.split('.').map(|seg| format!("/{seg}")).collect()
            };
            ConfigError {
                pointer: if pointer.is_empty() { "/".into() } else { pointer },
                message: e.into_inner().to_string(),
            }
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::at("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fills every unset field of `self` from `base`.
    pub fn or(self, base: RunConfig) -> RunConfig {
        RunConfig {
            manifold: self.manifold.or(base.manifold),
            x: self.x.or(base.x),
            v: self.v.or(base.v),
            t: self.t.or(base.t),
            step: self.step.or(base.step),
            tol: self.tol.or(base.tol),
            seed: self.seed.or(base.seed),
            budget: self.budget.or(base.budget),
            out: self.out.or(base.out),
            output: self.output.or(base.output),
            method: self.method.or(base.method),
            loop_spec: self.loop_spec.or(base.loop_spec),
            curve: self.curve.or(base.curve),
            target: self.target.or(base.target),
            probe: self.probe.or(base.probe),
            generators: self.generators.or(base.generators),
            word_len: self.word_len.or(base.word_len),
        }
    }

    pub fn manifold(&self) -> Result<ManifoldSpec, ConfigError> {
        let value = self
            .manifold
            .as_ref()
            .ok_or_else(|| ConfigError::at("manifold", "a manifold is required (--manifold)"))?;
        parse_manifold(value, "manifold")
    }

    /// Model space to roll on; `None` means the flat one.
    pub fn target(&self) -> Result<Option<ManifoldSpec>, ConfigError> {
        self.target.as_ref().map(|v| parse_manifold(v, "target")).transpose()
    }

    pub fn step(&self) -> Result<f64, ConfigError> {
        positive(self.step.unwrap_or(1e-3), "step")
    }

    pub fn tol(&self) -> Result<f64, ConfigError> {
        positive(self.tol.unwrap_or(1e-6), "tol")
    }

    pub fn budget(&self, default: usize) -> Result<usize, ConfigError> {
        let b = self.budget.unwrap_or(default);
        if b == 0 {
            return Err(ConfigError::at("budget", "must be at least 1"));
        }
        Ok(b)
    }

    /// Flag or file value, then `LORROLL_SEED`, then 0.
    pub fn seed(&self) -> Result<u64, ConfigError> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var("LORROLL_SEED") {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| ConfigError::at("seed", format!("LORROLL_SEED is not an integer: '{s}'"))),
            Err(_) => Ok(0),
        }
    }

    pub fn method(&self) -> Result<HolonomyMethod, ConfigError> {
        self.method
            .as_deref()
            .unwrap_or("curvature")
            .parse()
            .map_err(|e| ConfigError::at("method", e))
    }

    /// `--x`, or the manifold's default base point.
    pub fn point(&self, m: &ManifoldSpec) -> Result<Point, ConfigError> {
        let p = match &self.x {
            Some(x) => Point::from_slice(x),
            None => m.default_point(),
        };
        m.validate_point(&p).map_err(|e| ConfigError::at("x", e))?;
        Ok(p)
    }

    /// `--v`, or the first canonical frame vector at `x`.
    pub fn velocity(&self, m: &ManifoldSpec, x: &Point) -> Result<Vector, ConfigError> {
        let v = match &self.v {
            Some(v) => Vector::from_column_slice(v),
            None => m.canonical_frame(x).map_err(|e| ConfigError::at("x", e))?.vectors[0].clone(),
        };
        m.validate_tangent(x, &v).map_err(|e| ConfigError::at("v", e))?;
        Ok(v)
    }
}

fn positive(v: f64, key: &str) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::at(key, format!("must be positive, got {v}")))
    }
}

/// A manifold given as shorthand, inline JSON, a JSON object, or a path to
/// a JSON file.
pub fn parse_manifold(value: &Value, key: &str) -> Result<ManifoldSpec, ConfigError> {
    match value {
        Value::Object(_) => {
            let rec: ManifoldRecord = serde_path_to_error::deserialize(value.clone()).map_err(|e| {
                let path = e.path().to_string();
                let ptr = if path == "." {
                    key.to_string()
                } else {
                    format!("{key}/{}", path.replace('.', "/"))
                };
                ConfigError::at(&ptr, e.into_inner())
            })?;
            ManifoldSpec::try_from(&rec).map_err(|e| ConfigError::at(key, e))
        }
        Value::String(s) => {
            let path = Path::new(s);
            if !s.trim_start().starts_with('{') && path.extension().is_some_and(|e| e == "json") {
                let text =
                    std::fs::read_to_string(path).map_err(|e| ConfigError::at(key, format!("cannot read {s}: {e}")))?;
                let v: Value = serde_json::from_str(&text).map_err(|e| ConfigError::at(key, e))?;
                return parse_manifold(&v, key);
            }
            s.parse().map_err(|e| ConfigError::at(key, e))
        }
        _ => Err(ConfigError::at(key, "expected a string or an object")),
    }
}

/// Comma-separated numbers, as accepted by `--x` and `--v`.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("'{p}' is not a number")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_report_their_pointer() {
        let err = RunConfig::from_json(r#"{"step": 0.1, "stpe": 2}"#).unwrap_err();
        assert!(err.message.contains("stpe"), "{err}");
        let err = RunConfig::from_json(r#"{"step": "fast"}"#).unwrap_err();
        assert_eq!(err.pointer, "/step");
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig::from_json(r#"{"step": 0.1, "budget": 4}"#).unwrap();
        let flags = RunConfig {
            step: Some(0.5),
            ..RunConfig::default()
        };
        let merged = flags.or(file);
        assert_eq!(merged.step, Some(0.5));
        assert_eq!(merged.budget, Some(4));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let c = RunConfig::from_json(r#"{"step": -1, "budget": 0}"#).unwrap();
        assert_eq!(c.step().unwrap_err().pointer, "/step");
        assert_eq!(c.budget(3).unwrap_err().pointer, "/budget");
        let c = RunConfig::from_json(r#"{"manifold": {"kind": "flat", "n": 2, "nu": 1, "radius": 1}}"#).unwrap();
        assert_eq!(c.manifold().unwrap_err().pointer, "/manifold/radius");
        let c = RunConfig::from_json(r#"{"manifold": {"kind": "s", "n": 2, "nu": 1, "r": 2}}"#).unwrap();
        assert!(c.manifold().is_ok());
    }
}
