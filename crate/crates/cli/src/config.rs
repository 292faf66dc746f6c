//! Run configuration: a flat TOML document of scalar keys plus repeatable
//! `[[sweep]]` blocks whose arrays expand to a Cartesian product of runs.

use std::fmt;
use std::ops::Range;

use davydov_core::oracle::FockBasisSpec;
use davydov_core::{
    BathSpec, DiscretizedBath, DrivingField, DynamicsSettings, ModelSpec, Regularization,
    SolverSettings, StepControl, TangentMethod,
};
use thiserror::Error;
use toml_edit::{Document, Item, Value};

/// Where a problem was found: a key path and, when it came from a file, the
/// 1-based line.
#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    pub path: String,
    pub line: Option<usize>,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}, key `{}`", self.path),
            None => write!(f, "key `{}`", self.path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{at}: unknown key")]
    UnknownKey { at: Location },
    #[error("{at}: expected {expected}, found {found}")]
    Type {
        at: Location,
        expected: &'static str,
        found: String,
    },
    #[error("{at}: {message}")]
    Invalid { at: Location, message: String },
    #[error("override `{0}` is not of the form key=value")]
    Override(String),
}

/// A validated value in canonical form.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Float(f64),
    Int(i64),
    Text(String),
    List(Vec<f64>),
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Float(v) => write!(f, "{v:?}"),
            Scalar::Int(v) => write!(f, "{v}"),
            Scalar::Text(v) => write!(f, "{v}"),
            Scalar::List(v) => {
                let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                write!(f, "[{}]", items.join(", "))
            }
        }
    }
}

impl Scalar {
    fn to_value(&self) -> Value {
        match self {
            Scalar::Float(v) => Value::from(*v),
            Scalar::Int(v) => Value::from(*v),
            Scalar::Text(v) => Value::from(v.as_str()),
            Scalar::List(v) => Value::Array(v.iter().copied().collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Variational,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Float,
    Int,
    Text(&'static [&'static str]),
    Path,
    FloatList,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Float => "a number",
            Kind::Int => "a non-negative integer",
            Kind::Text(_) | Kind::Path => "a string",
            Kind::FloatList => "an array of numbers",
        }
    }
}

/// Every accepted key with its type and the default written to the echo.
/// Defaults describe the baseline dimer with its sub-Ohmic bath.
const KEYS: &[(&str, Kind, &str)] = &[
    ("J", Kind::Float, "0.05"),
    ("g", Kind::Float, "0.3"),
    ("A_L", Kind::Float, "1.0"),
    ("Omega_L", Kind::Float, "0.0"),
    ("Phi_L", Kind::Float, "0.0"),
    ("A_R", Kind::Float, "1.0"),
    ("Omega_R", Kind::Float, "0.0"),
    ("Phi_R", Kind::Float, "0.0"),
    ("alpha", Kind::Float, "0.1"),
    ("s", Kind::Float, "0.5"),
    ("omega_c", Kind::Float, "1.0"),
    ("omega_max", Kind::Float, "20.0"),
    ("N_bath", Kind::Int, "60"),
    ("bath_frequencies", Kind::FloatList, "[]"),
    ("bath_edges", Kind::FloatList, "[]"),
    ("M", Kind::Int, "6"),
    ("photons", Kind::Float, "20.0"),
    ("noise_scale", Kind::Float, "0.001"),
    ("seed", Kind::Int, "1"),
    ("dt", Kind::Float, "0.0025"),
    ("t_max", Kind::Float, "300.0"),
    ("sample_every", Kind::Int, "40"),
    ("solver", Kind::Text(&["metric", "svd-tikhonov", "svd-truncation"]), "\"metric\""),
    ("rcond", Kind::Float, "1e-8"),
    ("step_control", Kind::Text(&["fixed", "adaptive"]), "\"fixed\""),
    ("step_tolerance", Kind::Float, "1e-5"),
    ("min_dt", Kind::Float, "1e-6"),
    ("max_dt", Kind::Float, "0.05"),
    ("norm_tolerance", Kind::Float, "0.001"),
    ("checkpoint_every", Kind::Int, "0"),
    ("restart", Kind::Path, "\"\""),
    ("mode", Kind::Text(&["variational", "oracle"]), "\"variational\""),
    ("output", Kind::Path, "\"out\""),
    ("n_max_photon", Kind::Int, "14"),
    ("n_max_bath", Kind::Int, "4"),
    ("oracle_dt", Kind::Float, "0.001"),
    ("oracle_budget", Kind::Int, "2097152"),
];

/// Table written by the runner into echoed configs; ignored on input.
pub const RUN_INFO: &str = "run_info";

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, kind, _)| *kind)
}

/// One fully specified run: every key has a value.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: Vec<(String, Scalar)>,
    /// Sweep coordinates that produced this run, in declaration order.
    pub sweep_point: Vec<(String, Scalar)>,
}

/// A parsed document: the base run and its sweep axes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigDocument {
    base: RunConfig,
    base_lines: Vec<(String, usize)>,
    sweeps: Vec<Axis>,
}

#[derive(Debug, Clone, PartialEq)]
struct Axis {
    key: String,
    values: Vec<Scalar>,
    path: String,
    line: usize,
}

fn line_of(text: &str, span: Option<Range<usize>>) -> usize {
    let start = span.map_or(0, |s| s.start).min(text.len());
    1 + text.as_bytes()[..start].iter().filter(|&&b| b == b'\n').count()
}

fn type_name(value: &Value) -> String {
    match value {
        Value::String(_) => "a string",
        Value::Integer(_) => "an integer",
        Value::Float(_) => "a float",
        Value::Boolean(_) => "a boolean",
        Value::Datetime(_) => "a datetime",
        Value::Array(_) => "an array",
        Value::InlineTable(_) => "a table",
    }
    .to_string()
}

/// Checks `value` against the type of `key` and returns it in canonical form.
fn coerce(key: &str, value: &Value, at: &Location) -> Result<Scalar, ConfigError> {
    let kind = kind_of(key).ok_or_else(|| ConfigError::UnknownKey { at: at.clone() })?;
    let mismatch = || ConfigError::Type {
        at: at.clone(),
        expected: kind.name(),
        found: type_name(value),
    };
    let number = |v: &Value| match v {
        Value::Float(f) => Some(*f.value()),
        Value::Integer(i) => Some(*i.value() as f64),
        _ => None,
    };
    match kind {
        Kind::Float => number(value).map(Scalar::Float).ok_or_else(mismatch),
        Kind::Int => match value {
            Value::Integer(i) if *i.value() >= 0 => Ok(Scalar::Int(*i.value())),
            _ => Err(mismatch()),
        },
        Kind::Text(choices) => match value {
            Value::String(s) if choices.contains(&s.value().as_str()) => {
                Ok(Scalar::Text(s.value().clone()))
            }
            Value::String(s) => Err(ConfigError::Invalid {
                at: at.clone(),
                message: format!("`{}` is not one of {}", s.value(), choices.join(", ")),
            }),
            _ => Err(mismatch()),
        },
        Kind::Path => match value {
            Value::String(s) => Ok(Scalar::Text(s.value().clone())),
            _ => Err(mismatch()),
        },
        Kind::FloatList => match value {
            Value::Array(items) => {
                let out: Option<Vec<f64>> = items.iter().map(number).collect();
                out.map(Scalar::List).ok_or_else(mismatch)
            }
            _ => Err(mismatch()),
        },
    }
}

impl RunConfig {
    fn defaults() -> Self {
        let values = KEYS
            .iter()
            .map(|(k, _, default)| {
                let v: Value = default.parse().expect("defaults are valid TOML values");
                let at = Location {
                    path: k.to_string(),
                    line: None,
                };
                (k.to_string(), coerce(k, &v, &at).expect("defaults have the declared types"))
            })
            .collect();
        Self {
            values,
            sweep_point: Vec::new(),
        }
    }

    fn set(&mut self, key: &str, value: Scalar) {
        if let Some(slot) = self.values.iter_mut().find(|(k, _)| k == key) {
            slot.1 = value;
        }
    }

    fn get(&self, key: &str) -> &Scalar {
        &self
            .values
            .iter()
            .find(|(k, _)| k == key)
            .expect("every key has a value")
            .1
    }

    pub fn float(&self, key: &str) -> f64 {
        match self.get(key) {
            Scalar::Float(v) => *v,
            other => unreachable!("{key} holds {other:?}"),
        }
    }

    pub fn int(&self, key: &str) -> usize {
        match self.get(key) {
            Scalar::Int(v) => *v as usize,
            other => unreachable!("{key} holds {other:?}"),
        }
    }

    pub fn text(&self, key: &str) -> &str {
        match self.get(key) {
            Scalar::Text(v) => v,
            other => unreachable!("{key} holds {other:?}"),
        }
    }

    fn floats(&self, key: &str) -> Vec<f64> {
        match self.get(key) {
            Scalar::List(v) => v.clone(),
            other => unreachable!("{key} holds {other:?}"),
        }
    }

    pub fn mode(&self) -> Mode {
        match self.text("mode") {
            "oracle" => Mode::Oracle,
            _ => Mode::Variational,
        }
    }

    pub fn output(&self) -> &str {
        self.text("output")
    }

    /// The complete configuration as a TOML document that parses back to
    /// the same run.
    pub fn to_toml(&self) -> String {
        let mut doc = toml_edit::DocumentMut::new();
        for (k, v) in &self.values {
            doc[k.as_str()] = Item::Value(v.to_value());
        }
        doc.to_string()
    }

    /// Directory name for this sweep point, relative to the output root.
    pub fn subpath(&self) -> Option<String> {
        if self.sweep_point.is_empty() {
            return None;
        }
        let parts: Vec<String> = self
            .sweep_point
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        Some(parts.join("_").replace(['/', '"', ' '], ""))
    }

    pub fn model(&self) -> Result<ModelSpec, ConfigError> {
        let invalid = |key: &str, e: &dyn fmt::Display| ConfigError::Invalid {
            at: Location {
                path: key.to_string(),
                line: None,
            },
            message: e.to_string(),
        };
        let field = |side: &str| {
            let a = format!("A_{side}");
            DrivingField::new(
                self.float(&a),
                self.float(&format!("Omega_{side}")),
                self.float(&format!("Phi_{side}")),
            )
            .map_err(|e| invalid(&a, &e))
        };
        let left = field("L")?;
        let right = field("R")?;
        let modes = self.int("N_bath");
        let spec = BathSpec::new(
            self.float("alpha"),
            self.float("s"),
            self.float("omega_c"),
            self.float("omega_max"),
            modes,
        )
        .map_err(|e| invalid("alpha", &e))?;
        let frequencies = self.floats("bath_frequencies");
        let edges = self.floats("bath_edges");
        let bath = if frequencies.is_empty() && edges.is_empty() {
            davydov_core::discretize_bath(&spec).map_err(|e| invalid("N_bath", &e))?
        } else {
            if frequencies.len() != modes {
                return Err(invalid(
                    "bath_frequencies",
                    &format!("has {} entries but N_bath = {modes}", frequencies.len()),
                ));
            }
            DiscretizedBath::from_bins(&spec, &edges, frequencies)
                .map_err(|e| invalid("bath_edges", &e))?
        };
        ModelSpec::with_bath(self.float("J"), self.float("g"), left, right, spec, bath)
            .map_err(|e| invalid("g", &e))
    }

    pub fn dynamics(&self) -> Result<DynamicsSettings, ConfigError> {
        let method = match self.text("solver") {
            "svd-tikhonov" => TangentMethod::RealSvd(Regularization::Tikhonov),
            "svd-truncation" => TangentMethod::RealSvd(Regularization::Truncation),
            _ => TangentMethod::Metric,
        };
        let step_control = match self.text("step_control") {
            "adaptive" => StepControl::Adaptive {
                tolerance: self.float("step_tolerance"),
                min_dt: self.float("min_dt"),
                max_dt: self.float("max_dt"),
            },
            _ => StepControl::Fixed,
        };
        let settings = DynamicsSettings {
            dt: self.float("dt"),
            solver: SolverSettings {
                rcond: self.float("rcond"),
                method,
            },
            step_control,
            sample_every: self.int("sample_every"),
            norm_tolerance: self.float("norm_tolerance"),
            checkpoint_every: self.int("checkpoint_every"),
        };
        settings.validate().map_err(|e| {
            let key = match e {
                davydov_core::DynamicsError::Setting { name, .. } => name,
                _ => "dt",
            };
            ConfigError::Invalid {
                at: Location {
                    path: key.to_string(),
                    line: None,
                },
                message: e.to_string(),
            }
        })?;
        Ok(settings)
    }

    pub fn fock_basis(&self) -> Result<FockBasisSpec, ConfigError> {
        FockBasisSpec::with_budget(
            self.int("n_max_photon"),
            self.int("n_max_bath"),
            self.int("N_bath"),
            self.int("oracle_budget"),
        )
        .map_err(|e| ConfigError::Invalid {
            at: Location {
                path: "n_max_photon".to_string(),
                line: None,
            },
            message: e.to_string(),
        })
    }

    /// Checks every cross-key invariant that the core types do not cover.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let at = |key: &str| Location {
            path: key.to_string(),
            line: None,
        };
        let positive = |key: &str| {
            let v = self.float(key);
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    at: at(key),
                    message: format!("must be positive, got {v}"),
                })
            }
        };
        let non_negative = |key: &str| {
            let v = self.float(key);
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    at: at(key),
                    message: format!("must be non-negative, got {v}"),
                })
            }
        };
        non_negative("photons")?;
        non_negative("noise_scale")?;
        non_negative("t_max")?;
        if self.int("M") == 0 {
            return Err(ConfigError::Invalid {
                at: at("M"),
                message: "multiplicity must be at least 1".to_string(),
            });
        }
        self.model()?;
        self.dynamics()?;
        if self.mode() == Mode::Oracle {
            positive("oracle_dt")?;
            self.fock_basis()?;
            let interval = self.int("sample_every") as f64 * self.float("dt");
            let ratio = interval / self.float("oracle_dt");
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
                return Err(ConfigError::Invalid {
                    at: at("oracle_dt"),
                    message: format!(
                        "sampling interval sample_every * dt = {interval} is not a multiple of oracle_dt"
                    ),
                });
            }
        }
        Ok(())
    }
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let doc = Document::parse(text.to_string()).map_err(|e| ConfigError::Syntax {
            line: line_of(text, e.span()),
            message: e.message().to_string(),
        })?;
        let mut base = RunConfig::defaults();
        let mut base_lines = Vec::new();
        let mut sweeps = Vec::new();
        for (key, item) in doc.as_table().iter() {
            let line = line_of(text, doc.as_table().key(key).and_then(|k| k.span()));
            let at = Location {
                path: key.to_string(),
                line: Some(line),
            };
            match (key, item) {
                (RUN_INFO, Item::Table(_)) => {}
                ("sweep", Item::ArrayOfTables(blocks)) => {
                    for (b, block) in blocks.iter().enumerate() {
                        for (axis_key, axis_item) in block.iter() {
                            let path = format!("sweep[{b}].{axis_key}");
                            let line =
                                line_of(text, block.key(axis_key).and_then(|k| k.span()));
                            let at = Location {
                                path: path.clone(),
                                line: Some(line),
                            };
                            if kind_of(axis_key).is_none() {
                                return Err(ConfigError::UnknownKey { at });
                            }
                            let Some(Value::Array(list)) = axis_item.as_value() else {
                                return Err(ConfigError::Type {
                                    at,
                                    expected: "an array of values",
                                    found: axis_item.type_name().to_string(),
                                });
                            };
                            if list.is_empty() {
                                return Err(ConfigError::Invalid {
                                    at,
                                    message: "a sweep axis needs at least one value".to_string(),
                                });
                            }
                            let mut values = Vec::new();
                            for (i, v) in list.iter().enumerate() {
                                let at = Location {
                                    path: format!("{path}[{i}]"),
                                    line: Some(line_of(text, v.span()).max(line)),
                                };
                                values.push(coerce(axis_key, v, &at)?);
                            }
                            sweeps.push(Axis {
                                key: axis_key.to_string(),
                                values,
                                path,
                                line,
                            });
                        }
                    }
                }
                (_, Item::Value(v)) => {
                    let value = coerce(key, v, &at)?;
                    base.set(key, value);
                    base_lines.push((key.to_string(), line));
                }
                _ => {
                    if kind_of(key).is_some() {
                        return Err(ConfigError::Type {
                            at,
                            expected: kind_of(key).map_or("a value", |k| k.name()),
                            found: item.type_name().to_string(),
                        });
                    }
                    return Err(ConfigError::UnknownKey { at });
                }
            }
        }
        Ok(Self {
            base,
            base_lines,
            sweeps,
        })
    }

    /// Applies `key=value` overrides, with the value written as TOML
    /// (bare words are taken as strings).
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
        let key = key.trim();
        let raw = raw.trim();
        let value: Value = raw
            .parse()
            .unwrap_or_else(|_| Value::from(raw.to_string()));
        let at = Location {
            path: format!("--set {key}"),
            line: None,
        };
        let value = coerce(key, &value, &at)?;
        self.base.set(key, value);
        self.base_lines.retain(|(k, _)| k != key);
        self.sweeps.retain(|axis| axis.key != key);
        Ok(())
    }

    /// The Cartesian product of all sweep axes, first axis slowest; a single
    /// run without sweeps. Every run is validated before any is returned.
    pub fn expand(&self) -> Result<Vec<RunConfig>, ConfigError> {
        let mut runs = vec![self.base.clone()];
        for axis in &self.sweeps {
            let mut next = Vec::with_capacity(runs.len() * axis.values.len());
            for run in &runs {
                for value in &axis.values {
                    let mut r = run.clone();
                    r.set(&axis.key, value.clone());
                    r.sweep_point.push((axis.key.clone(), value.clone()));
                    next.push(r);
                }
            }
            runs = next;
        }
        for run in &runs {
            run.validate().map_err(|e| self.locate(e, run))?;
        }
        Ok(runs)
    }

    /// Attaches the file position of the offending key to a validation error.
    fn locate(&self, error: ConfigError, run: &RunConfig) -> ConfigError {
        let ConfigError::Invalid { at, message } = error else {
            return error;
        };
        let from_sweep = self
            .sweeps
            .iter()
            .find(|a| a.key == at.path && run.sweep_point.iter().any(|(k, _)| *k == a.key));
        let at = if let Some(axis) = from_sweep {
            Location {
                path: format!("{} = {}", axis.path, run.get(&axis.key)),
                line: Some(axis.line),
            }
        } else {
            let line = self
                .base_lines
                .iter()
                .find(|(k, _)| *k == at.path)
                .map(|(_, l)| *l);
            Location {
                path: at.path,
                line,
            }
        };
        ConfigError::Invalid { at, message }
    }
}
