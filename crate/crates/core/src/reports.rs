//! Documentation rendering.
//!
//! A [`Document`] is built from stored state only and serialized as
//! self-contained HTML or Markdown. Every document has a summary section and
//! a management section; realizations add a blueprint section with one
//! subsection per step and every artifact rendered inline or linked.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::ac_model::{
    summarize, AcElement, Blueprint, DocFormat, DocumentationRecord, ElementId, Kind, Measure, Realization, StepStatus,
    SummaryTarget,
};
use crate::error::{Error, Result};
use crate::store::{format_timestamp, CaseDirectory, UtcOffset};
use crate::techniques::TechniqueSpec;

/// CSV artifacts with more data rows than this are linked instead of inlined.
pub const MAX_INLINE_ROWS: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Block {
    Heading(String),
    Field { label: String, value: String },
    Text(String),
    Table { caption: Option<String>, header: Vec<String>, rows: Vec<Vec<String>> },
    Code(String),
    Link { label: String, href: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Section {
    pub heading: String,
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Document {
    pub title: String,
    pub sections: Vec<Section>,
}

/// Owned snapshot of everything a document shows.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum RenderInput {
    Element(AcElement),
    Realization {
        realization: Realization,
        blueprint: Blueprint,
        measure: Option<Measure>,
        /// Artifact name to file contents.
        artifacts: BTreeMap<String, Vec<u8>>,
    },
}

impl RenderInput {
    pub fn load(case: &CaseDirectory, id: &ElementId) -> Result<Self> {
        match case.find(id) {
            Some(Kind::Realization) => {
                let realization = case.load_realization(id)?;
                let blueprint = case.load_blueprint(&realization.blueprint_id)?;
                let measure = case.load_measure(&blueprint.realized_measure_id).ok();
                let mut artifacts = BTreeMap::new();
                for (name, rel) in &realization.artifacts {
                    artifacts.insert(name.clone(), case.read_relative(rel)?);
                }
                Ok(RenderInput::Realization {
                    realization,
                    blueprint,
                    measure,
                    artifacts,
                })
            }
            Some(_) => Ok(RenderInput::Element(case.load_element(id)?)),
            None => Err(Error::NotFound(id.to_string())),
        }
    }

    pub fn id(&self) -> &ElementId {
        match self {
            RenderInput::Element(e) => e.id(),
            RenderInput::Realization { realization, .. } => &realization.id,
        }
    }
}

fn field(label: &str, value: impl Into<String>) -> Block {
    Block::Field {
        label: label.to_string(),
        value: value.into(),
    }
}

fn technique_call(spec: &TechniqueSpec) -> String {
    let mut args: Vec<String> = spec.parameters.iter().map(|(k, v)| format!("{k}={v:?}", v = v.to_string())).collect();
    if let Some(seed) = spec.seed {
        args.push(format!("seed={seed}"));
    }
    format!("{}({})", spec.name, args.join(", "))
}

fn summary_section(input: &RenderInput, offset: UtcOffset) -> Result<Section> {
    let target = match input {
        RenderInput::Element(e) => SummaryTarget::Element(e),
        RenderInput::Realization {
            realization,
            blueprint,
            measure,
            ..
        } => SummaryTarget::Realization {
            realization,
            blueprint: Some(blueprint),
            measure: measure.as_ref(),
        },
    };
    let s = summarize(target);
    let mut blocks = vec![
        field("ID", &s.id),
        field("Kind", s.kind.as_str()),
        field("Name", &s.name),
        field("Description", &s.description),
    ];
    blocks.extend(s.fields.iter().map(|(label, value)| field(label, value)));
    for refs in s
        .references
        .iter()
        .filter(|r| !r.ids.is_empty() && !s.fields.iter().any(|(k, _)| *k == r.label))
    {
        blocks.push(field(refs.label, refs.ids.join(", ")));
    }
    if let Some(v) = &s.data_model_version {
        blocks.push(field("Data/model version", v));
    }
    let versions: Vec<String> = s.element_versions.iter().map(ToString::to_string).collect();
    blocks.push(field("Element version", versions.join(" ")));
    if s.kind == Kind::Realization {
        let rows = s
            .documentation
            .iter()
            .map(|d| {
                Ok(vec![
                    d.timestamp.to_string(),
                    format_timestamp(d.timestamp, offset)?,
                    d.data_model_version.clone(),
                    d.path.clone(),
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        blocks.push(Block::Table {
            caption: Some("Documentation versions".into()),
            header: ["Timestamp", "Date and time", "Data/model version", "File"].map(String::from).to_vec(),
            rows,
        });
    }
    match &s.latest_conclusion {
        Some(c) => blocks.push(field(
            "Most recent conclusion",
            format!("{} ({})", c.text, format_timestamp(c.timestamp, offset)?),
        )),
        None if matches!(s.kind, Kind::Claim | Kind::Realization) => blocks.push(field("Most recent conclusion", "none")),
        None => {}
    }
    Ok(Section {
        heading: "Summary".into(),
        blocks,
    })
}

fn management_section(input: &RenderInput) -> Section {
    let id = input.id();
    let mut blocks = Vec::new();
    let (create, store) = match input {
        RenderInput::Element(e) => (
            format!("acforge new {} --id {id} ...", e.kind()),
            format!("{}/{id}.json", match e.kind() {
                Kind::Claim => "elements/claim",
                Kind::Measure => "elements/measure",
                _ => "elements/blueprint",
            }),
        ),
        RenderInput::Realization { realization, .. } => (
            format!(
                "acforge realize {} --id {id} --data-version {} ...",
                realization.blueprint_id, realization.data_model_version
            ),
            format!("realizations/{id}.json"),
        ),
    };
    blocks.push(Block::Text("Create AC element:".into()));
    blocks.push(Block::Code(create));
    blocks.push(Block::Text("Set/update version (epoch seconds, bumped on every overwrite):".into()));
    blocks.push(Block::Code(format!("element_version = {}", match input {
        RenderInput::Element(e) => e.element_version(),
        RenderInput::Realization { realization, .. } => realization.element_version,
    })));
    blocks.push(Block::Text("Store AC element:".into()));
    blocks.push(Block::Code(store));
    Section {
        heading: "Management".into(),
        blocks,
    }
}

fn artifact_blocks(name: &str, bytes: &[u8], href: String) -> Result<Vec<Block>> {
    let link = Block::Link {
        label: name.to_string(),
        href,
    };
    if name.ends_with(".csv") {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(bytes);
        let mut records = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::Render(format!("artifact {name}: {e}")))?;
            records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
        }
        if !records.is_empty() && records.len() - 1 <= MAX_INLINE_ROWS {
            let header = records.remove(0);
            return Ok(vec![Block::Table {
                caption: Some(name.to_string()),
                header,
                rows: records,
            }]);
        }
        return Ok(vec![link]);
    }
    if name.ends_with(".json") {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Render(format!("artifact {name}: {e}")))?;
        return Ok(vec![Block::Text(format!("{name}:")), Block::Code(text.trim_end().to_string())]);
    }
    Ok(vec![link])
}

fn blueprint_section(
    realization: &Realization,
    blueprint: &Blueprint,
    artifacts: &BTreeMap<String, Vec<u8>>,
    offset: UtcOffset,
) -> Result<Section> {
    if realization.steps.len() < blueprint.steps.len() {
        return Err(Error::invariant(
            realization.id.as_str(),
            format!(
                "step {} ({}) was neither executed nor skipped",
                realization.steps.len() + 1,
                blueprint.steps[realization.steps.len()].title
            ),
        ));
    }
    let href = |name: &str| -> String {
        match realization.artifacts.get(name) {
            Some(rel) => format!("../../{rel}"),
            None => name.to_string(),
        }
    };
    let mut blocks = vec![Block::Heading("Parameter bindings".into())];
    blocks.push(Block::Table {
        caption: None,
        header: vec!["Parameter".into(), "Value".into()],
        rows: realization
            .parameter_bindings
            .iter()
            .map(|(k, v)| vec![k.clone(), v.to_string()])
            .collect(),
    });

    let mut shown = BTreeSet::new();
    for (i, record) in realization.steps.iter().enumerate() {
        blocks.push(Block::Heading(format!("Step {}: {}", i + 1, record.title)));
        if let Some(step) = blueprint.steps.get(i).filter(|s| !s.description.is_empty()) {
            blocks.push(Block::Text(step.description.clone()));
        }
        if let Some(spec) = &record.technique {
            blocks.push(Block::Code(technique_call(spec)));
        }
        match record.status {
            StepStatus::Executed => blocks.push(field("Status", "executed")),
            StepStatus::Skipped => blocks.push(field("Status", "skipped")),
        }
        for name in &record.outputs {
            if !shown.insert(name.as_str()) {
                continue;
            }
            let bytes = artifacts
                .get(name)
                .ok_or_else(|| Error::NotFound(format!("artifact {name} of {}", realization.id)))?;
            blocks.extend(artifact_blocks(name, bytes, href(name))?);
        }
    }
    let rest: Vec<&String> = artifacts.keys().filter(|k| !shown.contains(k.as_str())).collect();
    if !rest.is_empty() {
        blocks.push(Block::Heading("Other artifacts".into()));
        for name in rest {
            blocks.extend(artifact_blocks(name, &artifacts[name], href(name))?);
        }
    }

    blocks.push(Block::Heading("Step Conclusion".into()));
    if realization.conclusions.is_empty() {
        blocks.push(Block::Text("No conclusion recorded.".into()));
    }
    for c in &realization.conclusions {
        blocks.push(field(&format_timestamp(c.timestamp, offset)?, &c.text));
    }
    Ok(Section {
        heading: "Blueprint".into(),
        blocks,
    })
}

pub fn build_document(input: &RenderInput, offset: UtcOffset) -> Result<Document> {
    let mut sections = vec![summary_section(input, offset)?, management_section(input)];
    let title = match input {
        RenderInput::Element(e) => {
            e.validate()?;
            format!("{} {}", e.kind(), e.id())
        }
        RenderInput::Realization {
            realization,
            blueprint,
            artifacts,
            ..
        } => {
            crate::ac_model::CaseRecord::validate(realization)?;
            sections.push(blueprint_section(realization, blueprint, artifacts, offset)?);
            format!("realization {}", realization.id)
        }
    };
    Ok(Document { title, sections })
}

pub fn render_documentation(input: &RenderInput, format: DocFormat, offset: UtcOffset) -> Result<(Document, String)> {
    let doc = build_document(input, offset)?;
    let text = match format {
        DocFormat::Html => to_html(&doc),
        DocFormat::Markdown => to_markdown(&doc),
    };
    Ok((doc, text))
}

// ---------------------------------------------------------------------------
// serializers

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:sans-serif;max-width:60em;margin:2em auto;line-height:1.4}\
table{border-collapse:collapse;margin:.5em 0}th,td{border:1px solid #888;padding:.2em .5em}\
caption{font-style:italic;text-align:left}pre{background:#f4f4f4;padding:.5em;overflow-x:auto}";

pub fn to_html(doc: &Document) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n<style>{STYLE}</style>\n</head>\n<body>\n<h1>{}</h1>\n",
        esc(&doc.title),
        esc(&doc.title)
    );
    for section in &doc.sections {
        let _ = writeln!(out, "<section>\n<h2>{} Section</h2>", esc(&section.heading));
        for block in &section.blocks {
            match block {
                Block::Heading(h) => {
                    let _ = writeln!(out, "<h3>{}</h3>", esc(h));
                }
                Block::Field { label, value } => {
                    let _ = writeln!(out, "<p><b>{}:</b> {}</p>", esc(label), esc(value));
                }
                Block::Text(t) => {
                    let _ = writeln!(out, "<p>{}</p>", esc(t));
                }
                Block::Code(c) => {
                    let _ = writeln!(out, "<pre><code>{}</code></pre>", esc(c));
                }
                Block::Link { label, href } => {
                    let _ = writeln!(out, "<p><a href=\"{}\">{}</a></p>", esc(href), esc(label));
                }
                Block::Table { caption, header, rows } => {
                    out.push_str("<table>\n");
                    if let Some(c) = caption {
                        let _ = writeln!(out, "<caption>{}</caption>", esc(c));
                    }
                    out.push_str("<thead><tr>");
                    for h in header {
                        let _ = write!(out, "<th>{}</th>", esc(h));
                    }
                    out.push_str("</tr></thead>\n<tbody>\n");
                    for row in rows {
                        out.push_str("<tr>");
                        for cell in row {
                            let _ = write!(out, "<td>{}</td>", esc(cell));
                        }
                        out.push_str("</tr>\n");
                    }
                    out.push_str("</tbody>\n</table>\n");
                }
            }
        }
        out.push_str("</section>\n");
    }
    out.push_str("</body>\n</html>\n");
    out
}

fn md_cell(s: &str) -> String {
    let s = s.replace('\\', "\\\\").replace('|', "\\|").replace(['\n', '\r'], " ");
    if s.is_empty() {
        " ".into()
    } else {
        s
    }
}

fn md_inline(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        if matches!(ch, '\\' | '*' | '_' | '`' | '[' | ']' | '<' | '>' | '#') {
            out.push('\\');
        }
        out.push(if ch == '\n' { ' ' } else { ch });
    }
    out
}

fn fence_for(code: &str) -> String {
    let mut longest = 0;
    let mut run = 0;
    for ch in code.chars() {
        run = if ch == '`' { run + 1 } else { 0 };
        longest = longest.max(run);
    }
    "`".repeat(longest.max(2) + 1)
}

pub fn to_markdown(doc: &Document) -> String {
    let mut out = format!("# {}\n", md_inline(&doc.title));
    for section in &doc.sections {
        let _ = write!(out, "\n## {} Section\n", md_inline(&section.heading));
        for block in &section.blocks {
            out.push('\n');
            match block {
                Block::Heading(h) => {
                    let _ = writeln!(out, "### {}", md_inline(h));
                }
                Block::Field { label, value } => {
                    let _ = writeln!(out, "**{}:** {}", md_inline(label), md_inline(value));
                }
                Block::Text(t) => {
                    let _ = writeln!(out, "{}", md_inline(t));
                }
                Block::Code(c) => {
                    let fence = fence_for(c);
                    let _ = writeln!(out, "{fence}\n{c}\n{fence}");
                }
                Block::Link { label, href } => {
                    let _ = writeln!(out, "[{}](<{}>)", md_inline(label), href.replace(['<', '>'], ""));
                }
                Block::Table { caption, header, rows } => {
                    if let Some(c) = caption {
                        let _ = writeln!(out, "*{}*\n", md_inline(c));
                    }
                    let line = |cells: &[String]| format!("| {} |", cells.iter().map(|c| md_cell(c)).collect::<Vec<_>>().join(" | "));
                    let _ = writeln!(out, "{}", line(header));
                    let _ = writeln!(out, "|{}", "---|".repeat(header.len().max(1)));
                    for row in rows {
                        let _ = writeln!(out, "{}", line(row));
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// publish

/// Outcome of [`publish`]. Plain elements get a file but no version record.
#[derive(Debug, Clone, PartialEq)]
pub struct Published {
    pub path: String,
    pub record: Option<DocumentationRecord>,
}

/// Renders `id` and writes it to `docs/<id>/<epoch>.<ext>`. For realizations
/// the new documentation record is included in the rendered table and then
/// appended to the stored realization. A clashing timestamp moves forward by
/// one second.
pub fn publish(case: &CaseDirectory, id: &ElementId, format: DocFormat) -> Result<Published> {
    let _lock = case.lock()?;
    let mut input = RenderInput::load(case, id)?;
    let mut timestamp = case.now();
    let mut record = None;
    if let RenderInput::Realization { realization, .. } = &mut input {
        while realization.documentation.iter().any(|d| d.timestamp == timestamp) {
            timestamp += 1;
        }
        let rec = DocumentationRecord {
            timestamp,
            rendered_datetime: format_timestamp(timestamp, case.offset())?,
            data_model_version: realization.data_model_version.clone(),
            format,
            path: CaseDirectory::doc_rel_path(id, timestamp, format.extension()),
        };
        let at = realization.documentation.partition_point(|d| d.timestamp < timestamp);
        realization.documentation.insert(at, rec.clone());
        // show the version the record is about to be stored under
        realization.element_version = realization.element_version.bumped(case.now());
        record = Some(rec);
    }
    let (_, text) = render_documentation(&input, format, case.offset())?;
    let path = CaseDirectory::doc_rel_path(id, timestamp, format.extension());
    let full = case.root().join(&path);
    case.write_atomic(&full, text.as_bytes())?;
    if let Some(rec) = &record {
        if let Err(e) = case.record_documentation_locked(id, rec.clone()) {
            let _ = std::fs::remove_file(&full);
            return Err(e);
        }
    }
    Ok(Published { path, record })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ac_model::{Conclusion, StepRecord, Step};
    use crate::store::Clock;

    fn id(s: &str) -> ElementId {
        ElementId::new(s).unwrap()
    }

    fn fixture() -> RenderInput {
        let v = crate::ac_model::Version::new(1663591378).unwrap();
        let blueprint = Blueprint {
            id: id("lf_conf"),
            name: "detect_label_faults_w_conf_learning".into(),
            description: "Detect potentially incorrect labels with confident learning approach.".into(),
            realized_measure_id: id("m_labels"),
            justification: "j".into(),
            steps: vec![
                Step {
                    title: "Compute label confusions".into(),
                    description: String::new(),
                    technique: Some(TechniqueSpec::new("confident_learning")),
                    output_refs: vec![],
                },
                Step {
                    title: "Check candidates manually".into(),
                    description: "Inspect | revise <labels>".into(),
                    technique: None,
                    output_refs: vec![],
                },
            ],
            element_version: v,
        };
        let mut realization = Realization::new(id("lf_conf"), id("lf_conf"), "v2023-07", 1690280832).unwrap();
        realization.steps = vec![
            StepRecord {
                title: "Compute label confusions".into(),
                status: StepStatus::Executed,
                technique: Some(TechniqueSpec::new("confident_learning")),
                outputs: vec!["step1_confident_joint.csv".into()],
            },
            StepRecord {
                title: "Check candidates manually".into(),
                status: StepStatus::Skipped,
                technique: None,
                outputs: vec![],
            },
        ];
        realization
            .artifacts
            .insert("step1_confident_joint.csv".into(), "artifacts/lf_conf/step1_confident_joint.csv".into());
        realization.conclusions.push(Conclusion {
            text: "Three candidates were checked.".into(),
            timestamp: 1690280900,
        });
        let mut artifacts = BTreeMap::new();
        artifacts.insert(
            "step1_confident_joint.csv".to_string(),
            b",CL-Label: 'not_stop',CL-Label: 'stop'\nOriginal label: 'not_stop',40,3\nOriginal label: 'stop',0,5\n".to_vec(),
        );
        let measure = Measure {
            id: id("m_labels"),
            name: "Detect incorrect labels and revise them".into(),
            description: String::new(),
            lifecycle_phase: "analysis".parse().unwrap(),
            addressed_characteristic: "correct_relation".parse().unwrap(),
            blueprint_ids: vec![id("lf_conf")],
            element_version: v,
        };
        RenderInput::Realization {
            realization,
            blueprint,
            measure: Some(measure),
            artifacts,
        }
    }

    #[test]
    fn three_sections_in_order() {
        let doc = build_document(&fixture(), UtcOffset::UTC).unwrap();
        let headings: Vec<&str> = doc.sections.iter().map(|s| s.heading.as_str()).collect();
        assert_eq!(headings, ["Summary", "Management", "Blueprint"]);
        assert!(doc.sections[0].blocks.contains(&field("Realized measure", "Detect incorrect labels and revise them")));
        assert!(doc.sections[0].blocks.contains(&field("Element version", "1663591378 1690280832")));
    }

    #[test]
    fn confident_joint_becomes_two_by_two_table() {
        let doc = build_document(&fixture(), UtcOffset::UTC).unwrap();
        let table = doc.sections[2]
            .blocks
            .iter()
            .find_map(|b| match b {
                Block::Table { caption: Some(c), header, rows } if c == "step1_confident_joint.csv" => Some((header, rows)),
                _ => None,
            })
            .unwrap();
        assert_eq!(table.0[1..], ["CL-Label: 'not_stop'", "CL-Label: 'stop'"]);
        assert_eq!(table.1.len(), 2);
        assert!(table.1.iter().all(|r| r.len() == 3));
    }

    #[test]
    fn rendering_is_deterministic_and_escaped() {
        for format in [DocFormat::Html, DocFormat::Markdown] {
            let a = render_documentation(&fixture(), format, UtcOffset::new(120).unwrap()).unwrap().1;
            let b = render_documentation(&fixture(), format, UtcOffset::new(120).unwrap()).unwrap().1;
            assert_eq!(a, b);
        }
        let html = render_documentation(&fixture(), DocFormat::Html, UtcOffset::UTC).unwrap().1;
        assert!(html.contains("Inspect | revise &lt;labels&gt;"));
        assert!(!html.contains("<link") && !html.contains("<script"));
        let md = render_documentation(&fixture(), DocFormat::Markdown, UtcOffset::UTC).unwrap().1;
        assert!(md.contains("| Original label: 'stop' | 0 | 5 |"));
    }

    #[test]
    fn missing_step_record_is_rejected() {
        let mut input = fixture();
        if let RenderInput::Realization { realization, .. } = &mut input {
            realization.steps.pop();
        }
        assert!(matches!(build_document(&input, UtcOffset::UTC), Err(Error::Invariant { .. })));
    }

    #[test]
    fn large_csv_is_linked() {
        let mut csv = String::from("Index,Score\n");
        for i in 0..=MAX_INLINE_ROWS {
            csv.push_str(&format!("{i},0.5\n"));
        }
        let blocks = artifact_blocks("scores.csv", csv.as_bytes(), "../../artifacts/x/scores.csv".into()).unwrap();
        assert!(matches!(&blocks[..], [Block::Link { .. }]));
    }

    #[test]
    fn code_fence_outgrows_content() {
        assert_eq!(fence_for("a ``` b"), "````");
        assert_eq!(fence_for("plain"), "```");
    }

    #[test]
    fn publish_plain_element_writes_file_without_record() {
        let dir = tempfile::tempdir().unwrap();
        let case = CaseDirectory::init(dir.path()).unwrap().with_clock(Clock::Fixed(1690280832));
        let fields = serde_json::json!({"id": "root", "statement": "s"});
        let mut e = crate::ac_model::create_element(Kind::Claim, fields.as_object().unwrap(), 1690280832).unwrap();
        case.save_element(&mut e, false).unwrap();
        let p = publish(&case, &id("root"), DocFormat::Markdown).unwrap();
        assert_eq!(p.path, "docs/root/1690280832.md");
        assert!(p.record.is_none());
        assert!(case.root().join(&p.path).is_file());
    }
}
