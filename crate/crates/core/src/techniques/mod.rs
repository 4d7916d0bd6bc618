//! Analysis techniques that produce evidence about test-data quality.
//!
//! Each technique is a pure function of (inputs, parameters, seed) exposed
//! twice: as typed functions in its submodule, and through the [`Technique`]
//! trait so blueprint steps can name it declaratively.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::{self, LabeledTable, PredictionMatrix};
use crate::error::{Error, Result};

pub mod confident;
pub mod divergence;
pub mod isolation;
pub mod overlap;

pub use confident::{
    class_thresholds, compute_confident_joint, find_label_issues, ClassThresholds, ConfidentJoint, LabelIssue,
    LabelIssueReport,
};
pub use divergence::{jensen_shannon, representativity_report, DivergenceReport, FeatureDivergence};
pub use isolation::{average_path_length, IsolationForestModel, IsolationForestParams};
pub use overlap::{detect_overlap, OverlapReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Flag(bool),
    Number(f64),
    Text(String),
}

impl ParamValue {
    /// Parses a `--param` value: `true`/`false`, a number, or text.
    pub fn parse(raw: &str) -> ParamValue {
        match raw {
            "true" => ParamValue::Flag(true),
            "false" => ParamValue::Flag(false),
            _ => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(ParamValue::Number)
                .unwrap_or_else(|| ParamValue::Text(raw.to_string())),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Flag(b) => write!(f, "{b}"),
            ParamValue::Number(n) => write!(f, "{n}"),
            ParamValue::Text(t) => f.write_str(t),
        }
    }
}

/// Declarative technique invocation: registry key plus parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechniqueSpec {
    pub name: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, ParamValue>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl TechniqueSpec {
    pub fn new(name: impl Into<String>) -> Self {
        TechniqueSpec {
            name: name.into(),
            parameters: BTreeMap::new(),
            seed: None,
        }
    }

    pub fn with(mut self, key: &str, value: ParamValue) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParamDef {
    pub name: &'static str,
    pub required: bool,
    pub help: &'static str,
}

const fn param(name: &'static str, required: bool, help: &'static str) -> ParamDef {
    ParamDef { name, required, help }
}

/// Typed view over a validated parameter map.
#[derive(Debug, Clone, Copy)]
pub struct Params<'a> {
    technique: &'static str,
    values: &'a BTreeMap<String, ParamValue>,
}

impl<'a> Params<'a> {
    fn error(&self, message: String) -> Error {
        Error::Technique {
            technique: self.technique.to_string(),
            message,
        }
    }

    pub fn text(&self, key: &str) -> Result<Option<String>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(ParamValue::Text(t)) => Ok(Some(t.clone())),
            Some(other) => Ok(Some(other.to_string())),
        }
    }

    pub fn required_text(&self, key: &str) -> Result<String> {
        self.text(key)?.ok_or_else(|| self.error(format!("missing parameter `{key}`")))
    }

    pub fn number(&self, key: &str, default: f64) -> Result<f64> {
        match self.values.get(key) {
            None => Ok(default),
            Some(ParamValue::Number(n)) => Ok(*n),
            Some(other) => Err(self.error(format!("parameter `{key}` must be a number, got {other}"))),
        }
    }

    pub fn count(&self, key: &str, default: usize) -> Result<usize> {
        let n = self.number(key, default as f64)?;
        if n < 0.0 || n.fract() != 0.0 {
            return Err(self.error(format!("parameter `{key}` must be a non-negative integer, got {n}")));
        }
        Ok(n as usize)
    }
}

/// Named, opaque output of a technique run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        Artifact {
            name: name.into(),
            bytes: bytes.into(),
        }
    }
}

/// Inputs a blueprint run threads through its steps.
#[derive(Debug, Clone)]
pub struct RunContext {
    /// Dataset as loaded, before any preparation step.
    pub original: LabeledTable,
    /// Working dataset; preparation steps replace it.
    pub table: LabeledTable,
    pub probs_path: Option<PathBuf>,
    probs: Option<PredictionMatrix>,
    /// Directory relative parameter paths are resolved against.
    pub base_dir: PathBuf,
}

impl RunContext {
    pub fn new(table: LabeledTable, probs_path: Option<PathBuf>, base_dir: impl Into<PathBuf>) -> Self {
        RunContext {
            original: table.clone(),
            table,
            probs_path,
            probs: None,
            base_dir: base_dir.into(),
        }
    }

    /// Replaces the working table; cached predictions are dropped.
    pub fn set_table(&mut self, table: LabeledTable) {
        self.table = table;
        self.probs = None;
    }

    /// Prediction matrix aligned to the current working table, loaded on first use.
    pub fn probs(&mut self) -> Result<&PredictionMatrix> {
        if self.probs.is_none() {
            let path = self
                .probs_path
                .as_ref()
                .ok_or_else(|| Error::data("this step needs prediction probabilities (--probs)"))?;
            self.probs = Some(datasets::load_prediction_matrix(path, &self.table)?);
        }
        Ok(self.probs.as_ref().expect("loaded above"))
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Loads a companion table (train/reference split) with the working label column.
    pub fn load_companion(&self, path: &str) -> Result<LabeledTable> {
        datasets::load_labeled_table(&self.resolve(path), &self.original.label_column, &self.original.data_version)
    }
}

pub trait Technique: Sync {
    fn name(&self) -> &'static str;
    fn parameters(&self) -> &'static [ParamDef];
    fn apply(&self, ctx: &mut RunContext, params: Params<'_>, seed: u64) -> Result<Vec<Artifact>>;
}

static REGISTRY: [&dyn Technique; 5] = [
    &confident::ConfidentLearning,
    &isolation::IsolationForest,
    &overlap::OverlapCheck,
    &divergence::DivergenceCheck,
    &CollapseClasses,
];

pub fn registry() -> &'static [&'static dyn Technique] {
    &REGISTRY
}

pub fn lookup(name: &str) -> Result<&'static dyn Technique> {
    REGISTRY.iter().copied().find(|t| t.name() == name).ok_or_else(|| Error::Unknown {
        what: "technique",
        value: name.to_string(),
    })
}

/// Checks the name resolves and every parameter is declared by the technique.
pub fn validate_spec(spec: &TechniqueSpec) -> Result<&'static dyn Technique> {
    let technique = lookup(&spec.name)?;
    for key in spec.parameters.keys() {
        if !technique.parameters().iter().any(|p| p.name == key) {
            return Err(Error::Technique {
                technique: spec.name.clone(),
                message: format!("unknown parameter `{key}`"),
            });
        }
    }
    for p in technique.parameters().iter().filter(|p| p.required) {
        if !spec.parameters.contains_key(p.name) {
            return Err(Error::Technique {
                technique: spec.name.clone(),
                message: format!("missing parameter `{}`", p.name),
            });
        }
    }
    Ok(technique)
}

/// Validates `spec` and runs it against `ctx`.
pub fn run(spec: &TechniqueSpec, ctx: &mut RunContext, default_seed: u64) -> Result<Vec<Artifact>> {
    let technique = validate_spec(spec)?;
    let params = Params {
        technique: technique.name(),
        values: &spec.parameters,
    };
    technique.apply(ctx, params, spec.seed.unwrap_or(default_seed))
}

pub(crate) fn csv_bytes(rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for row in rows {
        w.write_record(row).map_err(|e| Error::Render(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Render(e.to_string()))
}

pub(crate) fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    Ok(crate::store::canonical_json(value)?.into_bytes())
}

/// Data-preparation step: keep one class, merge all others.
struct CollapseClasses;

impl Technique for CollapseClasses {
    fn name(&self) -> &'static str {
        "collapse_classes"
    }

    fn parameters(&self) -> &'static [ParamDef] {
        const P: &[ParamDef] = &[
            param("keep", true, "label value kept as its own class"),
            param("other", true, "name given to every other label"),
        ];
        P
    }

    fn apply(&self, ctx: &mut RunContext, params: Params<'_>, _seed: u64) -> Result<Vec<Artifact>> {
        let keep = params.required_text("keep")?;
        let other = params.required_text("other")?;
        let collapsed = datasets::collapse_classes(&ctx.table, &keep, &other)?;
        let counts: BTreeMap<&str, usize> = collapsed.class_names.iter().map(|c| {
            (c.as_str(), collapsed.labels.iter().filter(|l| *l == c).count())
        }).collect();
        let mut rows = vec![vec!["Class".to_string(), "Rows".to_string()]];
        rows.extend(counts.iter().map(|(c, n)| vec![c.to_string(), n.to_string()]));
        let artifact = Artifact::new("class_counts.csv", csv_bytes(&rows)?);
        ctx.set_table(collapsed);
        Ok(vec![artifact])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_keys() {
        for key in ["confident_learning", "isolation_forest", "overlap_check", "divergence_check", "collapse_classes"] {
            assert_eq!(lookup(key).unwrap().name(), key);
        }
        assert!(lookup("magic").is_err());
    }

    #[test]
    fn unknown_parameters_rejected() {
        let spec = TechniqueSpec::new("isolation_forest").with("depth", ParamValue::Number(3.0));
        assert!(validate_spec(&spec).is_err());
        let spec = TechniqueSpec::new("isolation_forest").with("psi", ParamValue::Number(64.0));
        assert!(validate_spec(&spec).is_ok());
        let spec = TechniqueSpec::new("overlap_check");
        assert!(validate_spec(&spec).is_err());
    }

    #[test]
    fn param_value_parsing() {
        assert_eq!(ParamValue::parse("true"), ParamValue::Flag(true));
        assert_eq!(ParamValue::parse("256"), ParamValue::Number(256.0));
        assert_eq!(ParamValue::parse("train.csv"), ParamValue::Text("train.csv".into()));
        assert_eq!(ParamValue::parse("inf"), ParamValue::Text("inf".into()));
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = TechniqueSpec::new("divergence_check")
            .with("reference", ParamValue::Text("ref.csv".into()))
            .with("bins", ParamValue::Number(10.0));
        let text = serde_json::to_string(&spec).unwrap();
        let back: TechniqueSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
