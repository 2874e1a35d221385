//! Sectioned experiment configuration.
//!
//! ```toml
//! [experiment]
//! map = "power 2"
//! a = "1"
//! observable = "basin(bp=0, bm=inf, eps=0.05)"
//! reference = "power-circle"
//! n_min = 3
//! n_max = 18
//! method = "tree"
//!
//! [run]
//! budget = 1000000
//! seed = 1
//! precision = "double"
//! output = "out"
//! ```

use eqspeed_core::polysolve::DEFAULT_BUDGET;
use eqspeed_core::sphere::parse_complex;
use eqspeed_core::{parse_map, parse_observable, parse_reference, Method, Observable, RationalMap, ReferenceKind, SpherePoint};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    Dd,
}

impl Precision {
    pub fn extended(self) -> bool {
        self == Precision::Dd
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "double" => Ok(Precision::Double),
            "dd" => Ok(Precision::Dd),
            _ => Err(format!("unknown precision `{s}` (expected double or dd)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub map: String,
    pub a: String,
    pub observable: String,
    pub reference: String,
    pub n_min: usize,
    pub n_max: usize,
    #[serde(default = "default_method")]
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub precision: Precision,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            budget: default_budget(),
            seed: 0,
            precision: Precision::Double,
            output: default_output(),
        }
    }
}

fn default_method() -> String {
    "tree".into()
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub run: RunSection,
}

/// Malformed configuration text, located by line when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Typed view of a validated config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub map: RationalMap,
    pub a: SpherePoint,
    pub phi: Observable,
    pub reference: ReferenceKind,
    pub ns: Vec<usize>,
    pub method: Method,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line holding `key = ...` inside `[section]`.
fn line_of_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl ExperimentConfig {
    /// Parses and validates config text.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        cfg.resolve().map_err(|(key, message)| ConfigError {
            line: line_of_key(text, if key == "budget" { "run" } else { "experiment" }, key),
            message,
        })?;
        Ok(cfg)
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Converts the spec strings into library objects. Errors name the
    /// offending key.
    pub fn resolve(&self) -> Result<Resolved, (&'static str, String)> {
        let e = &self.experiment;
        let map = parse_map(&e.map).map_err(|err| ("map", err.to_string()))?;
        let a = parse_complex(&e.a)
            .and_then(SpherePoint::from_affine)
            .map_err(|err| ("a", err.to_string()))?;
        let phi = parse_observable(&e.observable).map_err(|err| ("observable", err.to_string()))?;
        let reference = parse_reference(&e.reference).map_err(|err| ("reference", err.to_string()))?;
        let method = e.method.parse::<Method>().map_err(|err| ("method", err.to_string()))?;
        if e.n_min > e.n_max {
            return Err(("n_max", format!("n_max = {} is below n_min = {}", e.n_max, e.n_min)));
        }
        if self.run.budget == 0 {
            return Err(("budget", "budget must be positive".into()));
        }
        Ok(Resolved {
            map,
            a,
            phi,
            reference,
            ns: (e.n_min..=e.n_max).collect(),
            method,
        })
    }

    /// Same experiment with every spec string in canonical form.
    pub fn canonical(&self) -> Self {
        let mut out = self.clone();
        if let Ok(r) = self.resolve() {
            out.experiment.map = r.map.to_string();
            out.experiment.a = r.a.to_string();
            out.experiment.observable = r.phi.to_string();
            out.experiment.reference = r.reference.to_string();
            out.experiment.method = r.method.to_string();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[experiment]
map = "power 2"
a = "1"
observable = "basin(bp=0, bm=inf, eps=0.05)"
reference = "power-circle"
n_min = 3
n_max = 18

[run]
seed = 7
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.experiment.method, "tree");
        assert_eq!(cfg.run.budget, DEFAULT_BUDGET);
        assert_eq!(cfg.run.precision, Precision::Double);
        assert_eq!(cfg.resolve().unwrap().ns.len(), 16);
    }

    #[test]
    fn bad_spec_reports_its_line() {
        let text = SAMPLE.replace("power 2", "powr 2");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(err.line, Some(3));
    }

    #[test]
    fn syntax_error_reports_its_line() {
        let text = SAMPLE.replace("n_min = 3", "n_min = = 3");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(err.line, Some(7));
    }
}
