//! JSON path files and flat parameter files.

use std::fs;
use std::path::Path;

use ldp_core::paths::{Knot, PathError, PiecewisePath, StepPath};
use ldp_core::sim::QueueInputs;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {source}")]
    Path { path: String, source: PathError },
    #[error("{path}:{line}: expected key=value")]
    Params { path: String, line: usize },
    #[error("{path}: no component {name:?} (use arrivals or service-<i>)")]
    Component { path: String, name: String },
    #[error("{path}: a queue bundle needs a component")]
    Bundle { path: String },
    #[error("{path}: config values must be numbers, strings or arrays of them")]
    ConfigShape { path: String },
}

/// `{"T": …, "x0": …, "drift": …, "jumps": [[u, x], …]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepPathJson {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub x0: f64,
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub jumps: Vec<[f64; 2]>,
}

impl From<&StepPath> for StepPathJson {
    fn from(p: &StepPath) -> Self {
        StepPathJson {
            horizon: p.horizon(),
            x0: p.x0(),
            drift: p.drift(),
            jumps: p.jumps().iter().map(|j| [j.time, j.size]).collect(),
        }
    }
}

impl StepPathJson {
    pub fn to_path(&self) -> Result<StepPath, PathError> {
        StepPath::from_unsorted(self.horizon, self.x0, self.drift, self.jumps.iter().map(|j| (j[0], j[1])).collect())
    }
}

/// `{"T": …, "knots": [[t, value, slope], …]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseJson {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub knots: Vec<[f64; 3]>,
}

impl From<&PiecewisePath> for PiecewiseJson {
    fn from(p: &PiecewisePath) -> Self {
        PiecewiseJson { horizon: p.horizon(), knots: p.knots().iter().map(|k| [k.time, k.value, k.slope]).collect() }
    }
}

impl PiecewiseJson {
    pub fn to_path(&self) -> Result<PiecewisePath, PathError> {
        PiecewisePath::new(self.horizon, self.knots.iter().map(|k| Knot::new(k[0], k[1], k[2])).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueInputsJson {
    pub arrivals: StepPathJson,
    pub services: Vec<StepPathJson>,
}

impl From<&QueueInputs> for QueueInputsJson {
    fn from(q: &QueueInputs) -> Self {
        QueueInputsJson { arrivals: (&q.arrivals).into(), services: q.services.iter().map(Into::into).collect() }
    }
}

/// Either path kind, as found in a file.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyPath {
    Step(StepPath),
    Piecewise(PiecewisePath),
}

impl AnyPath {
    pub fn to_piecewise(&self) -> PiecewisePath {
        match self {
            AnyPath::Step(p) => PiecewisePath::from(p),
            AnyPath::Piecewise(p) => p.clone(),
        }
    }
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

pub fn parse_step_path(text: &str, origin: &str) -> Result<StepPath, IoError> {
    let raw: StepPathJson =
        serde_json::from_str(text).map_err(|source| IoError::Json { path: origin.to_string(), source })?;
    raw.to_path().map_err(|source| IoError::Path { path: origin.to_string(), source })
}

pub fn read_step_path(path: &Path) -> Result<StepPath, IoError> {
    parse_step_path(&read_text(path)?, &path.display().to_string())
}

/// A step path, or a piecewise-linear one when the object has `knots`.
pub fn read_any_path(path: &Path) -> Result<AnyPath, IoError> {
    let origin = path.display().to_string();
    let text = read_text(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|source| IoError::Json { path: origin.clone(), source })?;
    if value.get("knots").is_some() {
        let raw: PiecewiseJson =
            serde_json::from_value(value).map_err(|source| IoError::Json { path: origin.clone(), source })?;
        Ok(AnyPath::Piecewise(raw.to_path().map_err(|source| IoError::Path { path: origin, source })?))
    } else if value.get("arrivals").is_some() {
        Err(IoError::Bundle { path: origin })
    } else {
        Ok(AnyPath::Step(parse_step_path(&text, &origin)?))
    }
}

/// A path file, or one component (`arrivals`, `service-<i>`) of a queue
/// bundle.
pub fn read_path_arg(path: &Path, component: Option<&str>) -> Result<AnyPath, IoError> {
    let origin = path.display().to_string();
    let Some(name) = component else {
        return read_any_path(path);
    };
    let text = read_text(path)?;
    let raw: QueueInputsJson =
        serde_json::from_str(&text).map_err(|source| IoError::Json { path: origin.clone(), source })?;
    let chosen = if name == "arrivals" {
        Some(&raw.arrivals)
    } else {
        name.strip_prefix("service-").and_then(|i| i.parse::<usize>().ok()).and_then(|i| raw.services.get(i))
    };
    let chosen = chosen.ok_or_else(|| IoError::Component { path: origin.clone(), name: name.to_string() })?;
    Ok(AnyPath::Step(chosen.to_path().map_err(|source| IoError::Path { path: origin, source })?))
}

pub fn step_path_json(p: &StepPath) -> String {
    serde_json::to_string(&StepPathJson::from(p)).expect("finite path values serialize")
}

pub fn queue_inputs_json(q: &QueueInputs) -> String {
    serde_json::to_string(&QueueInputsJson::from(q)).expect("finite path values serialize")
}

/// Key/value pairs from a flat `key=value` file (`#` starts a comment) or
/// from a JSON object whose values are scalars or arrays of scalars; arrays
/// become comma-separated lists.
pub fn parse_params(text: &str, origin: &str) -> Result<Vec<(String, String)>, IoError> {
    if text.trim_start().starts_with('{') {
        let map: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(text).map_err(|source| IoError::Json { path: origin.to_string(), source })?;
        let scalar = |v: &serde_json::Value| match v {
            serde_json::Value::Number(n) => Some(n.to_string()),
            serde_json::Value::String(s) => Some(s.clone()),
            serde_json::Value::Bool(b) => Some(b.to_string()),
            _ => None,
        };
        map.iter()
            .map(|(k, v)| {
                let s = match v {
                    serde_json::Value::Array(items) => {
                        items.iter().map(scalar).collect::<Option<Vec<_>>>().map(|xs| xs.join(","))
                    }
                    other => scalar(other),
                };
                s.map(|s| (k.clone(), s)).ok_or_else(|| IoError::ConfigShape { path: origin.to_string() })
            })
            .collect()
    } else {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(IoError::Params { path: origin.to_string(), line: i + 1 })?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }
}

pub fn read_params(path: &Path) -> Result<Vec<(String, String)>, IoError> {
    parse_params(&read_text(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ldp_core::paths::Jump;

    #[test]
    fn step_path_round_trip() {
        let p = StepPath::new(2.0, 0.5, -0.25, vec![Jump::new(0.1, 1.0 / 3.0), Jump::new(1.7, -2.0)]).unwrap();
        let text = step_path_json(&p);
        assert_eq!(parse_step_path(&text, "mem").unwrap(), p);
    }

    #[test]
    fn defaults_and_validation() {
        let p = parse_step_path(r#"{"T":1,"jumps":[[0.5,1]]}"#, "mem").unwrap();
        assert_eq!((p.x0(), p.drift()), (0.0, 0.0));
        assert!(matches!(parse_step_path(r#"{"T":1,"jumps":[[1.5,1]]}"#, "mem"), Err(IoError::Path { .. })));
        assert!(matches!(parse_step_path(r#"{"T":1,"bogus":2}"#, "mem"), Err(IoError::Json { .. })));
    }

    #[test]
    fn params_in_both_syntaxes() {
        let flat = parse_params("# comment\nalpha = 0.5\nns=9,16,25\n\n", "mem").unwrap();
        assert_eq!(flat, vec![("alpha".into(), "0.5".into()), ("ns".into(), "9,16,25".into())]);
        let json = parse_params(r#"{"alpha": 0.5, "ns": [9, 16, 25], "generator": "levy"}"#, "mem").unwrap();
        assert!(json.contains(&("ns".into(), "9,16,25".into())));
        assert!(json.contains(&("generator".into(), "levy".into())));
        assert!(matches!(parse_params("novalue\n", "mem"), Err(IoError::Params { line: 1, .. })));
        assert!(parse_params(r#"{"a": {"b": 1}}"#, "mem").is_err());
    }
}
