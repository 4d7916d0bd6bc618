//! Assessor-side checks over a whole case, plus export to (and import from)
//! the `acx` exchange format.
//!
//! | rule | severity | checks |
//! |------|----------|--------|
//! | V1 | error | the claim tree under the root is acyclic and its subclaim ids resolve |
//! | V2 | error | every leaf claim has evidence with a conclusion |
//! | V3 | error | every inner claim states a strategy |
//! | V4 | error | every evidence realization has been documented |
//! | V5 | warning | evidence under one claim shares one data/model version |
//! | V6 | error | no other reference in the case dangles |

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ac_model::{
    find_cycle, Blueprint, CaseRecord, Claim, Conclusion, DocumentationRecord, ElementId, Kind, Measure, Realization,
};
use crate::error::{Error, Result};
use crate::store::{canonical_json, CaseDirectory, Entry};

pub const ACX_SCHEMA: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
}

impl Rule {
    pub fn severity(self) -> Severity {
        match self {
            Rule::V5 => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Finding {
    pub rule: Rule,
    pub severity: Severity,
    pub element_id: String,
    pub message: String,
}

impl Finding {
    fn new(rule: Rule, element_id: &ElementId, message: impl Into<String>) -> Self {
        Finding {
            rule,
            severity: rule.severity(),
            element_id: element_id.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} {} {}: {}", self.rule, self.element_id, self.message)
    }
}

pub fn error_count(findings: &[Finding]) -> usize {
    findings.iter().filter(|f| f.severity == Severity::Error).count()
}

/// Every record of a case, indexed by id.
#[derive(Debug, Default)]
struct Snapshot {
    claims: BTreeMap<ElementId, Claim>,
    measures: BTreeMap<ElementId, Measure>,
    blueprints: BTreeMap<ElementId, Blueprint>,
    realizations: BTreeMap<ElementId, Realization>,
}

impl Snapshot {
    fn load(case: &CaseDirectory) -> Result<Self> {
        Ok(Snapshot {
            claims: by_id(case.list::<Claim>()?),
            measures: by_id(case.list::<Measure>()?),
            blueprints: by_id(case.list::<Blueprint>()?),
            realizations: by_id(case.list::<Realization>()?),
        })
    }

    fn has(&self, id: &ElementId, kind: Kind) -> bool {
        match kind {
            Kind::Claim => self.claims.contains_key(id),
            Kind::Measure => self.measures.contains_key(id),
            Kind::Blueprint => self.blueprints.contains_key(id),
            Kind::Realization => self.realizations.contains_key(id),
        }
    }

    fn root(&self, case: &CaseDirectory, root: &ElementId) -> Result<&Claim> {
        if let Some(c) = self.claims.get(root) {
            return Ok(c);
        }
        Err(match case.find(root) {
            Some(kind) => Error::KindMismatch {
                id: root.to_string(),
                expected: Kind::Claim.as_str(),
                found: kind.as_str(),
            },
            None => Error::NotFound(root.to_string()),
        })
    }

    /// Claims reachable from `root` in pre-order, each visited once.
    fn tree(&self, root: &ElementId) -> Vec<&Claim> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            if let Some(claim) = self.claims.get(id) {
                out.push(claim);
                stack.extend(claim.subclaim_ids.iter().rev());
            }
        }
        out
    }

    /// Evidence of `claim` that resolves, in listed order.
    fn evidence<'a>(&'a self, claim: &'a Claim) -> impl Iterator<Item = &'a Realization> + 'a {
        claim.evidence_ids.iter().filter_map(|id| self.realizations.get(id))
    }
}

fn by_id<T: CaseRecord>(records: Vec<T>) -> BTreeMap<ElementId, T> {
    records.into_iter().map(|r| (r.id().clone(), r)).collect()
}

fn check(snap: &Snapshot, root: &ElementId) -> Vec<Finding> {
    let mut findings = Vec::new();
    if let Some(at) = find_cycle(root, |id| snap.claims.get(id).map(|c| c.subclaim_ids.as_slice())) {
        findings.push(Finding::new(Rule::V1, &at, "claim is reachable from itself through subclaims"));
    }
    let tree = snap.tree(root);
    let in_tree: HashSet<&ElementId> = tree.iter().map(|c| &c.id).collect();
    let mut evidence_checked = BTreeSet::new();
    for claim in &tree {
        for sub in claim.subclaim_ids.iter().filter(|s| !snap.claims.contains_key(*s)) {
            findings.push(Finding::new(Rule::V1, &claim.id, format!("subclaim {sub} does not resolve to a claim")));
        }
        if claim.is_inner() {
            if claim.strategy.as_deref().is_none_or(|s| s.trim().is_empty()) {
                findings.push(Finding::new(Rule::V3, &claim.id, "inner claim has no strategy"));
            }
            continue;
        }
        let evidence: Vec<&Realization> = snap.evidence(claim).collect();
        if !evidence.iter().any(|r| !r.conclusions.is_empty()) {
            findings.push(Finding::new(Rule::V2, &claim.id, "leaf claim has no evidence with a conclusion"));
        }
        for r in &evidence {
            if r.documentation.is_empty() && evidence_checked.insert(&r.id) {
                findings.push(Finding::new(Rule::V4, &r.id, "evidence has no documentation record"));
            }
        }
        let versions: BTreeSet<&str> = evidence.iter().map(|r| r.data_model_version.as_str()).collect();
        if versions.len() > 1 {
            let list: Vec<&str> = versions.into_iter().collect();
            findings.push(Finding::new(
                Rule::V5,
                &claim.id,
                format!("evidence spans data/model versions {}", list.join(", ")),
            ));
        }
    }

    let dangling = |owner: &ElementId, refs: Vec<(&ElementId, Kind)>, findings: &mut Vec<Finding>| {
        for (target, kind) in refs {
            if !snap.has(target, kind) {
                findings.push(Finding::new(Rule::V6, owner, format!("{kind} {target} does not resolve")));
            }
        }
    };
    for claim in snap.claims.values() {
        let mut refs = claim.references();
        if in_tree.contains(&claim.id) {
            // subclaims under the root are V1's concern
            let subs: HashSet<&ElementId> = claim.subclaim_ids.iter().collect();
            refs.retain(|(id, kind)| !(*kind == Kind::Claim && subs.contains(id)));
        }
        dangling(&claim.id, refs, &mut findings);
    }
    for m in snap.measures.values() {
        dangling(&m.id, m.references(), &mut findings);
    }
    for b in snap.blueprints.values() {
        dangling(&b.id, b.references(), &mut findings);
    }
    for r in snap.realizations.values() {
        dangling(&r.id, r.references(), &mut findings);
    }
    findings.sort();
    findings
}

/// Applies rules V1 to V6 to the case below `root`. An empty list means the
/// case passes. Only an unresolvable root is an error.
pub fn validate_case(case: &CaseDirectory, root: &ElementId) -> Result<Vec<Finding>> {
    let snap = Snapshot::load(case)?;
    snap.root(case, root)?;
    Ok(check(&snap, root))
}

// ---------------------------------------------------------------------------
// exchange format

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportMode {
    /// Claims are refined elsewhere; only evidence travels.
    EvidenceOnly,
    /// The whole refinement below the root travels with its evidence.
    Subtree,
}

impl FromStr for ExportMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "evidence_only" => Ok(ExportMode::EvidenceOnly),
            "subtree" => Ok(ExportMode::Subtree),
            _ => Err(Error::Unknown {
                what: "export mode",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceRecord {
    pub claim_id: ElementId,
    pub realization_id: ElementId,
    pub blueprint_id: ElementId,
    pub conclusion: Conclusion,
    pub data_model_version: String,
    pub documentation: Vec<DocumentationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimNode {
    pub claim: Claim,
    pub subclaims: Vec<ClaimNode>,
}

impl ClaimNode {
    /// Levels of claims, counting this one.
    pub fn depth(&self) -> usize {
        1 + self.subclaims.iter().map(ClaimNode::depth).max().unwrap_or(0)
    }

    fn walk<'a>(&'a self, out: &mut Vec<&'a Claim>) {
        out.push(&self.claim);
        for s in &self.subclaims {
            s.walk(out);
        }
    }
}

/// Records a subtree needs besides its claims so it validates on its own.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    pub measures: Vec<Measure>,
    pub blueprints: Vec<Blueprint>,
    pub realizations: Vec<Realization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeDocument {
    pub schema: u64,
    pub mode: ExportMode,
    pub exported_at: i64,
    pub root: ElementId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claims: Option<ClaimNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<Catalog>,
    pub evidence: Vec<EvidenceRecord>,
}

impl ExchangeDocument {
    pub fn to_json(&self) -> Result<String> {
        canonical_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ExchangeDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<acx>".into(),
            message: e.to_string(),
        })?;
        if doc.schema != ACX_SCHEMA {
            return Err(Error::Parse {
                path: "<acx>".into(),
                message: format!("unsupported acx schema {}", doc.schema),
            });
        }
        Ok(doc)
    }
}

fn nest(snap: &Snapshot, id: &ElementId) -> ClaimNode {
    let claim = snap.claims[id].clone();
    let subclaims = claim.subclaim_ids.iter().map(|s| nest(snap, s)).collect();
    ClaimNode { claim, subclaims }
}

/// Builds the exchange document for `root`. Refused while validation
/// reports errors; warnings are carried along silently.
pub fn export_case(case: &CaseDirectory, root: &ElementId, mode: ExportMode) -> Result<(ExchangeDocument, String)> {
    let snap = Snapshot::load(case)?;
    snap.root(case, root)?;
    let findings = check(&snap, root);
    let errors: Vec<&Finding> = findings.iter().filter(|f| f.severity == Severity::Error).collect();
    if let Some(first) = errors.first() {
        return Err(Error::ValidationFailed {
            count: errors.len(),
            first: first.to_string(),
        });
    }

    // validation passed, so the tree is acyclic and fully resolved
    let tree = snap.tree(root);
    let mut evidence = Vec::new();
    for claim in tree.iter().filter(|c| !c.is_inner()) {
        for r in snap.evidence(claim) {
            let Some(conclusion) = r.latest_conclusion() else { continue };
            evidence.push(EvidenceRecord {
                claim_id: claim.id.clone(),
                realization_id: r.id.clone(),
                blueprint_id: r.blueprint_id.clone(),
                conclusion: conclusion.clone(),
                data_model_version: r.data_model_version.clone(),
                documentation: r.documentation.clone(),
            });
        }
    }

    let (claims, catalog) = match mode {
        ExportMode::EvidenceOnly => (None, None),
        ExportMode::Subtree => {
            let mut measures = BTreeSet::new();
            let mut realizations = BTreeSet::new();
            for c in &tree {
                measures.extend(c.measure_ids.iter());
                realizations.extend(c.evidence_ids.iter());
            }
            let mut blueprints = BTreeSet::new();
            for r in &realizations {
                blueprints.insert(&snap.realizations[*r].blueprint_id);
            }
            for m in &measures {
                blueprints.extend(snap.measures[*m].blueprint_ids.iter());
            }
            for b in &blueprints {
                measures.insert(&snap.blueprints[*b].realized_measure_id);
            }
            // a measure pulled in through a blueprint may list further blueprints
            let mut measure_list: Vec<Measure> = measures.iter().map(|m| snap.measures[*m].clone()).collect();
            for m in &mut measure_list {
                m.blueprint_ids.retain(|b| blueprints.contains(b));
            }
            let catalog = Catalog {
                measures: measure_list,
                blueprints: blueprints.iter().map(|b| snap.blueprints[*b].clone()).collect(),
                realizations: realizations.iter().map(|r| snap.realizations[*r].clone()).collect(),
            };
            (Some(nest(&snap, root)), Some(catalog))
        }
    };

    let doc = ExchangeDocument {
        schema: ACX_SCHEMA,
        mode,
        exported_at: case.now(),
        root: root.clone(),
        claims,
        catalog,
        evidence,
    };
    let text = doc.to_json()?;
    Ok((doc, text))
}

/// Writes the records of a subtree export into `case`. Ids already present
/// are refused so nothing is silently replaced.
pub fn import_subtree(case: &CaseDirectory, doc: &ExchangeDocument) -> Result<Vec<ElementId>> {
    let (Some(tree), Some(catalog)) = (&doc.claims, &doc.catalog) else {
        return Err(Error::data("only subtree exports can be imported"));
    };
    let mut claims = Vec::new();
    tree.walk(&mut claims);
    let mut entries: Vec<Entry> = Vec::new();
    entries.extend(claims.iter().map(|c| Entry::Element(crate::ac_model::AcElement::Claim((*c).clone()))));
    entries.extend(catalog.measures.iter().map(|m| Entry::Element(crate::ac_model::AcElement::Measure(m.clone()))));
    entries.extend(catalog.blueprints.iter().map(|b| Entry::Element(crate::ac_model::AcElement::Blueprint(b.clone()))));
    entries.extend(catalog.realizations.iter().cloned().map(Entry::Realization));

    let _lock = case.lock()?;
    let mut seen = HashSet::new();
    for e in &entries {
        if !seen.insert(e.id().clone()) || case.find(e.id()).is_some() {
            return Err(Error::AlreadyExists(e.id().to_string()));
        }
        e.validate()?;
    }
    let mut ids = Vec::new();
    for e in &entries {
        match e {
            Entry::Element(crate::ac_model::AcElement::Claim(c)) => case.write_record_unchecked(c)?,
            Entry::Element(crate::ac_model::AcElement::Measure(m)) => case.write_record_unchecked(m)?,
            Entry::Element(crate::ac_model::AcElement::Blueprint(b)) => case.write_record_unchecked(b)?,
            Entry::Realization(r) => case.write_record_unchecked(r)?,
        };
        ids.push(e.id().clone());
    }
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_parsing() {
        assert_eq!("subtree".parse::<ExportMode>().unwrap(), ExportMode::Subtree);
        assert_eq!("evidence_only".parse::<ExportMode>().unwrap(), ExportMode::EvidenceOnly);
        assert!("tree".parse::<ExportMode>().is_err());
    }

    #[test]
    fn severities() {
        assert_eq!(Rule::V5.severity(), Severity::Warning);
        for r in [Rule::V1, Rule::V2, Rule::V3, Rule::V4, Rule::V6] {
            assert_eq!(r.severity(), Severity::Error);
        }
    }

    #[test]
    fn finding_display() {
        let f = Finding::new(Rule::V2, &ElementId::new("leaf").unwrap(), "no evidence");
        assert_eq!(f.to_string(), "error V2 leaf: no evidence");
    }

    #[test]
    fn schema_is_checked() {
        let text = r#"{"schema":2,"mode":"evidence_only","exported_at":1,"root":"r","evidence":[]}"#;
        assert!(ExchangeDocument::from_json(text).is_err());
        let ok = text.replace("\"schema\":2", "\"schema\":1");
        assert!(ExchangeDocument::from_json(&ok).unwrap().claims.is_none());
    }
}
