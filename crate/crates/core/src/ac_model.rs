//! Assurance-case elements: claims, measures, blueprints and the realizations
//! that turn a blueprint into evidence.
//!
//! Everything here is a plain value. Operations take the current epoch
//! explicitly so callers (the store, the CLI, tests) control the clock.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::techniques::{ParamValue, TechniqueSpec};

/// Machine-safe element identifier: 1-64 chars of `[a-z0-9_-]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ElementId(String);

impl ElementId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let ok = !id.is_empty()
            && id.len() <= 64
            && id
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-');
        if ok {
            Ok(ElementId(id))
        } else {
            Err(Error::MalformedId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ElementId {
    type Error = Error;
    fn try_from(value: String) -> Result<Self> {
        ElementId::new(value)
    }
}

impl From<ElementId> for String {
    fn from(id: ElementId) -> Self {
        id.0
    }
}

impl FromStr for ElementId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ElementId::new(s)
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl PartialEq<str> for ElementId {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for ElementId {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

/// Element version in epoch seconds (UTC). Always positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct Version(i64);

impl Version {
    pub fn new(epoch: i64) -> Result<Self> {
        if epoch > 0 {
            Ok(Version(epoch))
        } else {
            Err(Error::invariant("version", format!("element version must be > 0, got {epoch}")))
        }
    }

    /// Version used when an element is re-versioned at `now`: `max(now, self + 1)`.
    pub fn bumped(self, now: i64) -> Version {
        Version(now.max(self.0 + 1))
    }

    pub fn epoch(self) -> i64 {
        self.0
    }
}

impl TryFrom<i64> for Version {
    type Error = Error;
    fn try_from(value: i64) -> Result<Self> {
        Version::new(value)
    }
}

impl From<Version> for i64 {
    fn from(v: Version) -> Self {
        v.0
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn initial_version(now: i64) -> Result<Version> {
    Version::new(now.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Claim,
    Measure,
    Blueprint,
    Realization,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::Claim, Kind::Measure, Kind::Blueprint, Kind::Realization];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Claim => "claim",
            Kind::Measure => "measure",
            Kind::Blueprint => "blueprint",
            Kind::Realization => "realization",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "claim" => Ok(Kind::Claim),
            "measure" => Ok(Kind::Measure),
            "blueprint" => Ok(Kind::Blueprint),
            "realization" => Ok(Kind::Realization),
            other => Err(Error::Unknown {
                what: "element kind",
                value: other.to_string(),
            }),
        }
    }
}

/// Data lifecycle phase a measure belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifecyclePhase {
    Specification,
    Construction,
    Analysis,
    Testing,
    Operation,
}

impl LifecyclePhase {
    pub fn as_str(self) -> &'static str {
        match self {
            LifecyclePhase::Specification => "specification",
            LifecyclePhase::Construction => "construction",
            LifecyclePhase::Analysis => "analysis",
            LifecyclePhase::Testing => "testing",
            LifecyclePhase::Operation => "operation",
        }
    }
}

impl FromStr for LifecyclePhase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string())).map_err(|_| Error::Unknown {
            what: "lifecycle phase",
            value: s.to_string(),
        })
    }
}

/// Test-data quality characteristic a measure addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Characteristic {
    /// Data was not seen during model development.
    Unseen,
    /// Inputs are representative of the intended application scope.
    Representative,
    /// Inputs are related to intended outcomes correctly (label correctness).
    CorrectRelation,
    Other,
}

impl Characteristic {
    pub fn as_str(self) -> &'static str {
        match self {
            Characteristic::Unseen => "unseen",
            Characteristic::Representative => "representative",
            Characteristic::CorrectRelation => "correct_relation",
            Characteristic::Other => "other",
        }
    }
}

impl FromStr for Characteristic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string())).map_err(|_| Error::Unknown {
            what: "characteristic",
            value: s.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conclusion {
    pub text: String,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocFormat {
    Html,
    Markdown,
}

impl DocFormat {
    pub fn extension(self) -> &'static str {
        match self {
            DocFormat::Html => "html",
            DocFormat::Markdown => "md",
        }
    }
}

impl FromStr for DocFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "html" => Ok(DocFormat::Html),
            "markdown" | "md" => Ok(DocFormat::Markdown),
            other => Err(Error::Unknown {
                what: "documentation format",
                value: other.to_string(),
            }),
        }
    }
}

/// One exported documentation version of a realization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentationRecord {
    pub timestamp: i64,
    /// `YYYY-MM-DD HH:MM:SS` at the offset configured when the record was made.
    pub rendered_datetime: String,
    pub data_model_version: String,
    pub format: DocFormat,
    /// Path relative to the case root, `docs/<id>/<timestamp>.<ext>`.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claim {
    pub id: ElementId,
    pub name: String,
    pub statement: String,
    pub strategy: Option<String>,
    pub subclaim_ids: Vec<ElementId>,
    pub contexts: Vec<String>,
    pub assumptions: Vec<String>,
    pub measure_ids: Vec<ElementId>,
    pub evidence_ids: Vec<ElementId>,
    pub conclusions: Vec<Conclusion>,
    pub risk_criterion: Option<String>,
    pub element_version: Version,
}

impl Claim {
    pub fn is_inner(&self) -> bool {
        !self.subclaim_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Measure {
    pub id: ElementId,
    pub name: String,
    pub description: String,
    pub lifecycle_phase: LifecyclePhase,
    pub addressed_characteristic: Characteristic,
    pub blueprint_ids: Vec<ElementId>,
    pub element_version: Version,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub technique: Option<TechniqueSpec>,
    #[serde(default)]
    pub output_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Blueprint {
    pub id: ElementId,
    pub name: String,
    pub description: String,
    pub realized_measure_id: ElementId,
    pub justification: String,
    pub steps: Vec<Step>,
    pub element_version: Version,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Executed,
    Skipped,
}

/// What happened to one blueprint step during realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub title: String,
    pub status: StepStatus,
    /// Technique as actually invoked, parameters after bindings were applied.
    pub technique: Option<TechniqueSpec>,
    /// Names of the artifacts this step produced.
    pub outputs: Vec<String>,
}

/// A blueprint applied to one data/model version. This is the unit of evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Realization {
    pub id: ElementId,
    pub blueprint_id: ElementId,
    pub data_model_version: String,
    pub parameter_bindings: BTreeMap<String, ParamValue>,
    pub steps: Vec<StepRecord>,
    /// Artifact name -> path relative to the case root.
    pub artifacts: BTreeMap<String, String>,
    pub conclusions: Vec<Conclusion>,
    pub documentation: Vec<DocumentationRecord>,
    pub element_version: Version,
}

impl Realization {
    pub fn new(id: ElementId, blueprint_id: ElementId, data_model_version: impl Into<String>, now: i64) -> Result<Self> {
        let data_model_version = data_model_version.into();
        if data_model_version.trim().is_empty() {
            return Err(Error::MissingField("data_model_version"));
        }
        Ok(Realization {
            id,
            blueprint_id,
            data_model_version,
            parameter_bindings: BTreeMap::new(),
            steps: Vec::new(),
            artifacts: BTreeMap::new(),
            conclusions: Vec::new(),
            documentation: Vec::new(),
            element_version: initial_version(now)?,
        })
    }

    pub fn latest_conclusion(&self) -> Option<&Conclusion> {
        self.conclusions.last()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AcElement {
    Claim(Claim),
    Measure(Measure),
    Blueprint(Blueprint),
}

/// Behaviour shared by everything the store persists.
pub trait CaseRecord: Serialize + DeserializeOwned + Clone {
    const KIND: Kind;
    fn id(&self) -> &ElementId;
    fn element_version(&self) -> Version;
    fn set_element_version(&mut self, version: Version);
    /// Checks the invariants that can be decided from this record alone.
    fn validate(&self) -> Result<()>;
    /// Every id this record points at with the kind it must resolve to, in
    /// field order.
    fn references(&self) -> Vec<(&ElementId, Kind)>;
}

fn check_conclusions(id: &ElementId, conclusions: &[Conclusion]) -> Result<()> {
    if conclusions.iter().any(|c| c.text.trim().is_empty()) {
        return Err(Error::invariant(id.as_str(), "conclusion text is empty"));
    }
    if conclusions.windows(2).any(|w| w[0].timestamp > w[1].timestamp) {
        return Err(Error::invariant(id.as_str(), "conclusions not ordered by timestamp"));
    }
    Ok(())
}

fn check_distinct(id: &ElementId, field: &str, ids: &[ElementId]) -> Result<()> {
    let mut seen = HashSet::new();
    for other in ids {
        if !seen.insert(other) {
            return Err(Error::invariant(id.as_str(), format!("{other} appears twice in {field}")));
        }
    }
    Ok(())
}

impl CaseRecord for Claim {
    const KIND: Kind = Kind::Claim;

    fn id(&self) -> &ElementId {
        &self.id
    }
    fn element_version(&self) -> Version {
        self.element_version
    }
    fn set_element_version(&mut self, version: Version) {
        self.element_version = version;
    }

    fn validate(&self) -> Result<()> {
        check_distinct(&self.id, "subclaim_ids", &self.subclaim_ids)?;
        if self.subclaim_ids.contains(&self.id) {
            return Err(Error::invariant(self.id.as_str(), "claim lists itself as a subclaim"));
        }
        if self.is_inner() && self.strategy.is_none() {
            return Err(Error::invariant(self.id.as_str(), "inner claim without strategy"));
        }
        if self.is_inner() && !self.evidence_ids.is_empty() {
            return Err(Error::invariant(self.id.as_str(), "claim has both subclaims and evidence"));
        }
        check_conclusions(&self.id, &self.conclusions)
    }

    fn references(&self) -> Vec<(&ElementId, Kind)> {
        let subclaims = self.subclaim_ids.iter().map(|id| (id, Kind::Claim));
        let measures = self.measure_ids.iter().map(|id| (id, Kind::Measure));
        let evidence = self.evidence_ids.iter().map(|id| (id, Kind::Realization));
        subclaims.chain(measures).chain(evidence).collect()
    }
}

impl CaseRecord for Measure {
    const KIND: Kind = Kind::Measure;

    fn id(&self) -> &ElementId {
        &self.id
    }
    fn element_version(&self) -> Version {
        self.element_version
    }
    fn set_element_version(&mut self, version: Version) {
        self.element_version = version;
    }
    fn validate(&self) -> Result<()> {
        check_distinct(&self.id, "blueprint_ids", &self.blueprint_ids)
    }
    fn references(&self) -> Vec<(&ElementId, Kind)> {
        self.blueprint_ids.iter().map(|id| (id, Kind::Blueprint)).collect()
    }
}

impl CaseRecord for Blueprint {
    const KIND: Kind = Kind::Blueprint;

    fn id(&self) -> &ElementId {
        &self.id
    }
    fn element_version(&self) -> Version {
        self.element_version
    }
    fn set_element_version(&mut self, version: Version) {
        self.element_version = version;
    }
    fn validate(&self) -> Result<()> {
        if let Some(i) = self.steps.iter().position(|s| s.title.trim().is_empty()) {
            return Err(Error::invariant(self.id.as_str(), format!("step {} has an empty title", i + 1)));
        }
        Ok(())
    }
    fn references(&self) -> Vec<(&ElementId, Kind)> {
        vec![(&self.realized_measure_id, Kind::Measure)]
    }
}

impl CaseRecord for Realization {
    const KIND: Kind = Kind::Realization;

    fn id(&self) -> &ElementId {
        &self.id
    }
    fn element_version(&self) -> Version {
        self.element_version
    }
    fn set_element_version(&mut self, version: Version) {
        self.element_version = version;
    }
    fn validate(&self) -> Result<()> {
        if self.data_model_version.trim().is_empty() {
            return Err(Error::invariant(self.id.as_str(), "data_model_version is empty"));
        }
        check_conclusions(&self.id, &self.conclusions)?;
        if self.documentation.windows(2).any(|w| w[0].timestamp >= w[1].timestamp) {
            return Err(Error::invariant(
                self.id.as_str(),
                "documentation records not strictly ascending by timestamp",
            ));
        }
        Ok(())
    }
    fn references(&self) -> Vec<(&ElementId, Kind)> {
        vec![(&self.blueprint_id, Kind::Blueprint)]
    }
}

impl AcElement {
    pub fn kind(&self) -> Kind {
        match self {
            AcElement::Claim(_) => Kind::Claim,
            AcElement::Measure(_) => Kind::Measure,
            AcElement::Blueprint(_) => Kind::Blueprint,
        }
    }

    pub fn id(&self) -> &ElementId {
        match self {
            AcElement::Claim(c) => &c.id,
            AcElement::Measure(m) => &m.id,
            AcElement::Blueprint(b) => &b.id,
        }
    }

    pub fn element_version(&self) -> Version {
        match self {
            AcElement::Claim(c) => c.element_version,
            AcElement::Measure(m) => m.element_version,
            AcElement::Blueprint(b) => b.element_version,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AcElement::Claim(c) => c.validate(),
            AcElement::Measure(m) => m.validate(),
            AcElement::Blueprint(b) => b.validate(),
        }
    }

    pub fn references(&self) -> Vec<(&ElementId, Kind)> {
        match self {
            AcElement::Claim(c) => c.references(),
            AcElement::Measure(m) => m.references(),
            AcElement::Blueprint(b) => b.references(),
        }
    }
}

// ---------------------------------------------------------------------------
// create_element

/// Field map accepted by [`create_element`]: JSON values keyed by field name.
pub type FieldMap = serde_json::Map<String, Value>;

struct Fields<'a> {
    map: &'a FieldMap,
    used: HashSet<&'a str>,
}

impl<'a> Fields<'a> {
    fn new(map: &'a FieldMap) -> Self {
        Fields {
            map,
            used: HashSet::new(),
        }
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        let (k, v) = self.map.get_key_value(key)?;
        self.used.insert(k.as_str());
        Some(v)
    }

    fn text(&mut self, key: &'static str) -> Result<Option<String>> {
        match self.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(Error::invariant(key, "expected a text value")),
        }
    }

    fn required_text(&mut self, key: &'static str) -> Result<String> {
        self.text(key)?.ok_or(Error::MissingField(key))
    }

    fn list(&mut self, key: &'static str) -> Result<Vec<String>> {
        match self.get(key) {
            None | Some(Value::Null) => Ok(Vec::new()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    _ => Err(Error::invariant(key, "expected a list of text values")),
                })
                .collect(),
            Some(_) => Err(Error::invariant(key, "expected a list of text values")),
        }
    }

    fn ids(&mut self, key: &'static str) -> Result<Vec<ElementId>> {
        self.list(key)?.into_iter().map(ElementId::new).collect()
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().find(|k| !self.used.contains(k.as_str())) {
            Some(k) => Err(Error::Unknown {
                what: "field",
                value: k.clone(),
            }),
            None => Ok(()),
        }
    }
}

/// Builds a fresh element of `kind` from a field map. The element gets
/// `element_version = now` and is not persisted.
///
/// Accepted fields per kind:
/// - claim: `id`*, `statement`*, `name`, `strategy`, `subclaim_ids`, `contexts`,
///   `assumptions`, `measure_ids`, `risk_criterion`
/// - measure: `id`*, `name`*, `lifecycle_phase`*, `addressed_characteristic`*,
///   `description`, `blueprint_ids`
/// - blueprint: `id`*, `name`*, `realized_measure`*, `description`,
///   `justification`, `steps`
pub fn create_element(kind: Kind, fields: &FieldMap, now: i64) -> Result<AcElement> {
    let mut f = Fields::new(fields);
    let id = ElementId::new(f.text("id")?.unwrap_or_default())?;
    let element_version = initial_version(now)?;
    let element = match kind {
        Kind::Claim => {
            let statement = f.required_text("statement")?;
            let name = f.text("name")?.unwrap_or_else(|| id.to_string());
            let claim = Claim {
                name,
                statement,
                strategy: f.text("strategy")?,
                subclaim_ids: f.ids("subclaim_ids")?,
                contexts: f.list("contexts")?,
                assumptions: f.list("assumptions")?,
                measure_ids: f.ids("measure_ids")?,
                evidence_ids: Vec::new(),
                conclusions: Vec::new(),
                risk_criterion: f.text("risk_criterion")?,
                element_version,
                id,
            };
            AcElement::Claim(claim)
        }
        Kind::Measure => {
            let name = f.required_text("name")?;
            let lifecycle_phase = f.required_text("lifecycle_phase")?.parse()?;
            let addressed_characteristic = f.required_text("addressed_characteristic")?.parse()?;
            AcElement::Measure(Measure {
                name,
                description: f.text("description")?.unwrap_or_default(),
                lifecycle_phase,
                addressed_characteristic,
                blueprint_ids: f.ids("blueprint_ids")?,
                element_version,
                id,
            })
        }
        Kind::Blueprint => {
            let name = f.required_text("name")?;
            let realized_measure_id = ElementId::new(f.required_text("realized_measure")?)?;
            let steps = match f.get("steps") {
                None | Some(Value::Null) => Vec::new(),
                Some(v) => serde_json::from_value(v.clone())
                    .map_err(|e| Error::invariant(id.as_str(), format!("invalid steps: {e}")))?,
            };
            AcElement::Blueprint(Blueprint {
                name,
                description: f.text("description")?.unwrap_or_default(),
                realized_measure_id,
                justification: f.text("justification")?.unwrap_or_default(),
                steps,
                element_version,
                id,
            })
        }
        Kind::Realization => {
            return Err(Error::Unknown {
                what: "element kind",
                value: "realization (use realize)".into(),
            })
        }
    };
    f.finish()?;
    element.validate()?;
    Ok(element)
}

// ---------------------------------------------------------------------------
// refine / link / conclude

/// Turns `claim` into an inner node refined by `strategy` into `subclaim_ids`.
/// The claim is left untouched on error.
pub fn refine_claim(claim: &mut Claim, strategy: &str, subclaim_ids: Vec<ElementId>, now: i64) -> Result<()> {
    if !claim.evidence_ids.is_empty() {
        return Err(Error::invariant(claim.id.as_str(), "claim already holds evidence and cannot be refined"));
    }
    if strategy.trim().is_empty() {
        return Err(Error::MissingField("strategy"));
    }
    if subclaim_ids.is_empty() {
        return Err(Error::MissingField("subclaim_ids"));
    }
    if subclaim_ids.contains(&claim.id) {
        return Err(Error::invariant(claim.id.as_str(), "claim cannot be its own subclaim"));
    }
    check_distinct(&claim.id, "subclaim_ids", &subclaim_ids)?;
    claim.strategy = Some(strategy.to_string());
    claim.subclaim_ids = subclaim_ids;
    claim.element_version = claim.element_version.bumped(now);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    ClaimMeasure,
    MeasureBlueprint,
    ClaimEvidence,
}

impl FromStr for Relation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "claim_measure" => Ok(Relation::ClaimMeasure),
            "measure_blueprint" => Ok(Relation::MeasureBlueprint),
            "claim_evidence" => Ok(Relation::ClaimEvidence),
            other => Err(Error::Unknown {
                what: "relation",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum LinkTarget<'a> {
    Element(&'a AcElement),
    Realization(&'a Realization),
}

impl LinkTarget<'_> {
    fn kind(&self) -> Kind {
        match self {
            LinkTarget::Element(e) => e.kind(),
            LinkTarget::Realization(_) => Kind::Realization,
        }
    }

    fn id(&self) -> &ElementId {
        match self {
            LinkTarget::Element(e) => e.id(),
            LinkTarget::Realization(r) => &r.id,
        }
    }
}

fn kind_mismatch(id: &ElementId, expected: Kind, found: Kind) -> Error {
    Error::KindMismatch {
        id: id.to_string(),
        expected: expected.as_str(),
        found: found.as_str(),
    }
}

fn push_once(list: &mut Vec<ElementId>, id: &ElementId) -> bool {
    if list.contains(id) {
        false
    } else {
        list.push(id.clone());
        true
    }
}

/// Appends the reference `from -> to` under `relation`. Returns whether the
/// element changed; linking an existing reference again is a no-op.
pub fn link(from: &mut AcElement, relation: Relation, to: LinkTarget<'_>) -> Result<bool> {
    let (expected_from, expected_to) = match relation {
        Relation::ClaimMeasure => (Kind::Claim, Kind::Measure),
        Relation::MeasureBlueprint => (Kind::Measure, Kind::Blueprint),
        Relation::ClaimEvidence => (Kind::Claim, Kind::Realization),
    };
    if from.kind() != expected_from {
        return Err(kind_mismatch(from.id(), expected_from, from.kind()));
    }
    if to.kind() != expected_to {
        return Err(kind_mismatch(to.id(), expected_to, to.kind()));
    }
    let to_id = to.id().clone();
    match (from, to) {
        (AcElement::Claim(claim), LinkTarget::Element(_)) => Ok(push_once(&mut claim.measure_ids, &to_id)),
        (AcElement::Measure(measure), _) => Ok(push_once(&mut measure.blueprint_ids, &to_id)),
        (AcElement::Claim(claim), LinkTarget::Realization(realization)) => {
            if realization.conclusions.is_empty() {
                return Err(Error::invariant(
                    realization.id.as_str(),
                    "evidence needs at least one conclusion before it can support a claim",
                ));
            }
            if claim.is_inner() {
                return Err(Error::invariant(claim.id.as_str(), "inner claims cannot hold evidence"));
            }
            Ok(push_once(&mut claim.evidence_ids, &to_id))
        }
        (AcElement::Blueprint(_), _) => unreachable!("kind checked above"),
    }
}

/// Anything that carries a timestamp-ordered conclusion list.
pub trait Concludable {
    fn conclusions(&self) -> &[Conclusion];
    fn conclusions_mut(&mut self) -> &mut Vec<Conclusion>;
}

impl Concludable for Claim {
    fn conclusions(&self) -> &[Conclusion] {
        &self.conclusions
    }
    fn conclusions_mut(&mut self) -> &mut Vec<Conclusion> {
        &mut self.conclusions
    }
}

impl Concludable for Realization {
    fn conclusions(&self) -> &[Conclusion] {
        &self.conclusions
    }
    fn conclusions_mut(&mut self) -> &mut Vec<Conclusion> {
        &mut self.conclusions
    }
}

/// Adds a conclusion, keeping the list sorted by timestamp (stable for ties,
/// so the latest added among equal timestamps stays last).
pub fn add_conclusion<T: Concludable + ?Sized>(target: &mut T, text: &str, timestamp: i64) -> Result<()> {
    if text.trim().is_empty() {
        return Err(Error::MissingField("text"));
    }
    let list = target.conclusions_mut();
    let at = list.partition_point(|c| c.timestamp <= timestamp);
    list.insert(
        at,
        Conclusion {
            text: text.to_string(),
            timestamp,
        },
    );
    Ok(())
}

pub fn most_recent_conclusion<T: Concludable + ?Sized>(target: &T) -> Option<&Conclusion> {
    target.conclusions().last()
}

// ---------------------------------------------------------------------------
// summarize

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RefList {
    pub label: &'static str,
    pub ids: Vec<String>,
}

/// Read-only digest of an element, as shown in a document's summary section.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub id: String,
    pub kind: Kind,
    pub name: String,
    pub description: String,
    pub fields: Vec<(&'static str, String)>,
    pub references: Vec<RefList>,
    pub data_model_version: Option<String>,
    pub element_versions: Vec<Version>,
    pub documentation: Vec<DocumentationRecord>,
    pub latest_conclusion: Option<Conclusion>,
}

/// What [`summarize`] looks at. Realizations borrow their blueprint and
/// realized measure (when available) for name, description and version.
#[derive(Debug, Clone, Copy)]
pub enum SummaryTarget<'a> {
    Element(&'a AcElement),
    Realization {
        realization: &'a Realization,
        blueprint: Option<&'a Blueprint>,
        measure: Option<&'a Measure>,
    },
}

fn ids_of(ids: &[ElementId]) -> Vec<String> {
    ids.iter().map(ToString::to_string).collect()
}

pub fn summarize(target: SummaryTarget<'_>) -> Summary {
    match target {
        SummaryTarget::Element(AcElement::Claim(c)) => {
            let mut fields = vec![("Statement", c.statement.clone())];
            if let Some(s) = &c.strategy {
                fields.push(("Strategy", s.clone()));
            }
            if let Some(r) = &c.risk_criterion {
                fields.push(("Risk criterion", r.clone()));
            }
            for ctx in &c.contexts {
                fields.push(("Context", ctx.clone()));
            }
            for a in &c.assumptions {
                fields.push(("Assumption", a.clone()));
            }
            Summary {
                id: c.id.to_string(),
                kind: Kind::Claim,
                name: c.name.clone(),
                description: c.statement.clone(),
                fields,
                references: vec![
                    RefList {
                        label: "Subclaims",
                        ids: ids_of(&c.subclaim_ids),
                    },
                    RefList {
                        label: "Measures",
                        ids: ids_of(&c.measure_ids),
                    },
                    RefList {
                        label: "Evidence",
                        ids: ids_of(&c.evidence_ids),
                    },
                ],
                data_model_version: None,
                element_versions: vec![c.element_version],
                documentation: Vec::new(),
                latest_conclusion: c.conclusions.last().cloned(),
            }
        }
        SummaryTarget::Element(AcElement::Measure(m)) => Summary {
            id: m.id.to_string(),
            kind: Kind::Measure,
            name: m.name.clone(),
            description: m.description.clone(),
            fields: vec![
                ("Lifecycle phase", m.lifecycle_phase.as_str().to_string()),
                ("Addressed characteristic", m.addressed_characteristic.as_str().to_string()),
            ],
            references: vec![RefList {
                label: "Blueprints",
                ids: ids_of(&m.blueprint_ids),
            }],
            data_model_version: None,
            element_versions: vec![m.element_version],
            documentation: Vec::new(),
            latest_conclusion: None,
        },
        SummaryTarget::Element(AcElement::Blueprint(b)) => Summary {
            id: b.id.to_string(),
            kind: Kind::Blueprint,
            name: b.name.clone(),
            description: b.description.clone(),
            fields: vec![
                ("Realized measure", b.realized_measure_id.to_string()),
                ("Justification", b.justification.clone()),
            ],
            references: vec![RefList {
                label: "Realized measure",
                ids: vec![b.realized_measure_id.to_string()],
            }],
            data_model_version: None,
            element_versions: vec![b.element_version],
            documentation: Vec::new(),
            latest_conclusion: None,
        },
        SummaryTarget::Realization {
            realization: r,
            blueprint,
            measure,
        } => {
            let mut documentation = r.documentation.clone();
            documentation.sort_by_key(|d| d.timestamp);
            let measure_name = match (measure, blueprint) {
                (Some(m), _) => m.name.clone(),
                (None, Some(b)) => b.realized_measure_id.to_string(),
                (None, None) => String::new(),
            };
            let mut element_versions: Vec<Version> = blueprint.map(|b| b.element_version).into_iter().collect();
            element_versions.push(r.element_version);
            Summary {
                id: r.id.to_string(),
                kind: Kind::Realization,
                name: blueprint.map(|b| b.name.clone()).unwrap_or_else(|| r.blueprint_id.to_string()),
                description: blueprint.map(|b| b.description.clone()).unwrap_or_default(),
                fields: vec![("Realized measure", measure_name)],
                references: vec![RefList {
                    label: "Blueprint",
                    ids: vec![r.blueprint_id.to_string()],
                }],
                data_model_version: Some(r.data_model_version.clone()),
                element_versions,
                documentation,
                latest_conclusion: r.conclusions.last().cloned(),
            }
        }
    }
}

/// Depth-first walk over subclaim references starting at `root`. Returns the
/// first id that is revisited on the current path, if any.
pub fn find_cycle<'a, F>(root: &'a ElementId, mut children: F) -> Option<ElementId>
where
    F: FnMut(&ElementId) -> Option<&'a [ElementId]>,
{
    fn visit<'a, F>(id: &'a ElementId, path: &mut Vec<&'a ElementId>, done: &mut HashSet<&'a ElementId>, children: &mut F) -> Option<ElementId>
    where
        F: FnMut(&ElementId) -> Option<&'a [ElementId]>,
    {
        if path.contains(&id) {
            return Some(id.clone());
        }
        if done.contains(id) {
            return None;
        }
        path.push(id);
        if let Some(kids) = children(id) {
            for kid in kids {
                if let Some(hit) = visit(kid, path, done, children) {
                    return Some(hit);
                }
            }
        }
        path.pop();
        done.insert(id);
        None
    }
    visit(root, &mut Vec::new(), &mut HashSet::new(), &mut children)
}
