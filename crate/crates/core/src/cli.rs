//! Command-line front end. Each subcommand maps onto one library operation.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::ac_model::{
    add_conclusion, create_element, link, refine_claim, summarize, AcElement, CaseRecord, DocFormat, ElementId,
    FieldMap, Kind, LinkTarget, Realization, Relation, StepRecord, StepStatus, SummaryTarget,
};
use crate::audit::{self, error_count, ExchangeDocument, ExportMode, Severity};
use crate::datasets;
use crate::error::{Error, Result};
use crate::reports;
use crate::store::{format_timestamp, CaseDirectory, Clock, Entry, UtcOffset};
use crate::techniques::{self, ParamValue, RunContext};

#[derive(Debug, Parser)]
#[command(name = "acforge", version, about = "Assurance-case evidence engine for test-data quality")]
pub struct Cli {
    /// Case directory.
    #[arg(long, global = true, env = "ACFORGE_CASE_DIR", default_value = ".")]
    pub case: PathBuf,
    /// UTC offset in minutes used for rendered date/times.
    #[arg(long, global = true, default_value_t = 0, allow_hyphen_values = true)]
    pub offset: i32,
    /// Documentation format for `doc`.
    #[arg(long, global = true, default_value = "html", value_parser = parse_format)]
    pub format: DocFormat,
    /// Pin the clock to this epoch (reproducible runs).
    #[arg(long, global = true)]
    pub at: Option<i64>,
    /// Default seed for randomized techniques.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_format(s: &str) -> std::result::Result<DocFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_id(s: &str) -> std::result::Result<ElementId, String> {
    ElementId::new(s).map_err(|e| e.to_string())
}

fn parse_binding(s: &str) -> std::result::Result<(String, ParamValue), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    if k.is_empty() {
        return Err(format!("empty parameter name in {s:?}"));
    }
    Ok((k.to_string(), ParamValue::parse(v)))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create the case directory layout.
    Init,
    /// Create a claim, measure or blueprint.
    #[command(subcommand)]
    New(NewCommand),
    /// Refine a claim into subclaims with a strategy.
    Refine {
        #[arg(value_parser = parse_id)]
        id: ElementId,
        #[arg(long)]
        strategy: String,
        #[arg(long = "subclaim", required = true, value_parser = parse_id)]
        subclaims: Vec<ElementId>,
    },
    /// Add a reference: claim_measure, measure_blueprint or claim_evidence.
    Link {
        #[arg(value_parser = parse_id)]
        from: ElementId,
        relation: String,
        #[arg(value_parser = parse_id)]
        to: ElementId,
    },
    /// Apply a blueprint to a dataset and store the realization.
    Realize(RealizeArgs),
    /// Add a conclusion to a claim or realization.
    Conclude {
        #[arg(value_parser = parse_id)]
        id: ElementId,
        #[arg(long)]
        text: String,
    },
    /// Render and publish documentation.
    Doc {
        #[arg(value_parser = parse_id)]
        id: ElementId,
    },
    /// Print the documentation version table.
    Log {
        #[arg(value_parser = parse_id)]
        id: ElementId,
    },
    /// Print an element summary.
    Show {
        #[arg(value_parser = parse_id)]
        id: ElementId,
    },
    /// Check the case below a root claim.
    Validate {
        #[arg(value_parser = parse_id)]
        root: ElementId,
    },
    /// Write the exchange document for a root claim.
    Export {
        #[arg(value_parser = parse_id)]
        root: ElementId,
        #[arg(long, value_parser = |s: &str| s.parse::<ExportMode>().map_err(|e| e.to_string()))]
        mode: ExportMode,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Import a subtree exchange document.
    Import { file: PathBuf },
    /// Delete a record nothing else references.
    Delete {
        #[arg(value_parser = parse_id)]
        id: ElementId,
    },
}

#[derive(Debug, Subcommand)]
pub enum NewCommand {
    Claim {
        #[arg(long, value_parser = parse_id)]
        id: ElementId,
        #[arg(long)]
        statement: String,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long = "subclaim", value_parser = parse_id)]
        subclaims: Vec<ElementId>,
        #[arg(long = "context")]
        contexts: Vec<String>,
        #[arg(long = "assumption")]
        assumptions: Vec<String>,
        #[arg(long = "measure", value_parser = parse_id)]
        measures: Vec<ElementId>,
        #[arg(long)]
        risk_criterion: Option<String>,
    },
    Measure {
        #[arg(long, value_parser = parse_id)]
        id: ElementId,
        #[arg(long)]
        name: String,
        #[arg(long)]
        phase: String,
        #[arg(long)]
        characteristic: String,
        #[arg(long, default_value = "")]
        description: String,
    },
    /// The blueprint is linked into its measure automatically.
    Blueprint {
        #[arg(long, value_parser = parse_id)]
        id: ElementId,
        #[arg(long)]
        name: String,
        #[arg(long, value_parser = parse_id)]
        measure: ElementId,
        #[arg(long, default_value = "")]
        description: String,
        #[arg(long, default_value = "")]
        justification: String,
        /// Step list as inline JSON or a path to a JSON file.
        #[arg(long)]
        steps: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct RealizeArgs {
    #[arg(value_parser = parse_id)]
    pub blueprint: ElementId,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub probs: Option<PathBuf>,
    #[arg(long)]
    pub data_version: String,
    /// Realization id (defaults to `<blueprint>_r`).
    #[arg(long, value_parser = parse_id)]
    pub id: Option<ElementId>,
    #[arg(long, default_value = "label")]
    pub label_column: String,
    /// Technique parameter bound into every step that declares it.
    #[arg(long = "param", value_parser = parse_binding)]
    pub params: Vec<(String, ParamValue)>,
    /// 1-based step number to mark skipped.
    #[arg(long = "skip")]
    pub skip: Vec<usize>,
}

/// Everything `realize` needs, independent of argument parsing.
#[derive(Debug, Clone)]
pub struct RealizeRequest {
    pub blueprint: ElementId,
    pub id: Option<ElementId>,
    pub data: PathBuf,
    pub probs: Option<PathBuf>,
    pub data_version: String,
    pub label_column: String,
    pub params: Vec<(String, ParamValue)>,
    pub seed: u64,
    pub skip: Vec<usize>,
}

/// Ids are unique across kinds, so a realization cannot reuse its
/// blueprint's id; the default appends `_r`.
pub fn default_realization_id(blueprint: &ElementId) -> Result<ElementId> {
    ElementId::new(format!("{blueprint}_r"))
}

fn path_text(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Runs every blueprint step in order and stores the result. Nothing is
/// written unless all steps succeed. Relative technique paths resolve
/// against the directory of the data file.
pub fn realize(case: &CaseDirectory, req: &RealizeRequest) -> Result<Realization> {
    let _lock = case.lock()?;
    let blueprint = case.load_blueprint(&req.blueprint)?;
    let rid = match &req.id {
        Some(id) => id.clone(),
        None => default_realization_id(&blueprint.id)?,
    };
    if let Some(&bad) = req.skip.iter().find(|&&n| n == 0 || n > blueprint.steps.len()) {
        return Err(Error::data(format!("--skip {bad}: blueprint has {} steps", blueprint.steps.len())));
    }

    let mut specs = Vec::new();
    for step in &blueprint.steps {
        specs.push(step.technique.clone());
    }
    for (key, value) in &req.params {
        let mut used = false;
        for spec in specs.iter_mut().flatten() {
            if techniques::lookup(&spec.name)?.parameters().iter().any(|p| p.name == key) {
                spec.parameters.insert(key.clone(), value.clone());
                used = true;
            }
        }
        if !used {
            return Err(Error::data(format!("no step of {} accepts parameter `{key}`", blueprint.id)));
        }
    }
    for spec in specs.iter().flatten() {
        techniques::validate_spec(spec)?;
    }

    let table = datasets::load_labeled_table(&req.data, &req.label_column, &req.data_version)?;
    let base = req.data.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut ctx = RunContext::new(table, req.probs.clone(), base);
    let mut records = Vec::new();
    let mut outputs: Vec<(String, Vec<u8>)> = Vec::new();
    for (i, (step, spec)) in blueprint.steps.iter().zip(&specs).enumerate() {
        let n = i + 1;
        if req.skip.contains(&n) {
            records.push(StepRecord {
                title: step.title.clone(),
                status: StepStatus::Skipped,
                technique: spec.clone(),
                outputs: Vec::new(),
            });
            continue;
        }
        let mut names = Vec::new();
        if let Some(spec) = spec {
            let artifacts = techniques::run(spec, &mut ctx, req.seed).map_err(|e| Error::Technique {
                technique: spec.name.clone(),
                message: format!("step {n} ({}) failed: {e}", step.title),
            })?;
            for a in artifacts {
                let name = format!("step{n}_{}", a.name);
                names.push(name.clone());
                outputs.push((name, a.bytes));
            }
        }
        records.push(StepRecord {
            title: step.title.clone(),
            status: StepStatus::Executed,
            technique: spec.clone(),
            outputs: names,
        });
    }

    let now = case.now();
    let mut realization = match case.find(&rid) {
        Some(Kind::Realization) => {
            let mut r = case.load_realization(&rid)?;
            r.blueprint_id = blueprint.id.clone();
            r.data_model_version = req.data_version.clone();
            r
        }
        Some(other) => return Err(Error::AlreadyExists(format!("{rid} (as {other})"))),
        None => Realization::new(rid.clone(), blueprint.id.clone(), req.data_version.clone(), now)?,
    };
    let mut bindings = BTreeMap::new();
    bindings.insert("data".to_string(), ParamValue::Text(path_text(&req.data)));
    if let Some(p) = &req.probs {
        bindings.insert("probs".to_string(), ParamValue::Text(path_text(p)));
    }
    bindings.insert("label_column".to_string(), ParamValue::Text(req.label_column.clone()));
    bindings.insert("seed".to_string(), ParamValue::Number(req.seed as f64));
    for (k, v) in &req.params {
        bindings.insert(k.clone(), v.clone());
    }
    realization.parameter_bindings = bindings;
    realization.steps = records;
    realization.validate()?;

    let mut artifacts = BTreeMap::new();
    for (name, bytes) in &outputs {
        artifacts.insert(name.clone(), case.write_artifact(&rid, name, bytes)?);
    }
    let dir = case.artifact_dir(&rid);
    if let Ok(listing) = std::fs::read_dir(&dir) {
        for entry in listing.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if !artifacts.contains_key(&name) {
                let _ = std::fs::remove_file(entry.path());
            }
        }
    }
    realization.artifacts = artifacts;
    let overwrite = case.exists(&rid, Kind::Realization);
    case.save_locked(&mut realization, overwrite)?;
    Ok(realization)
}

fn field_map(value: Value) -> FieldMap {
    match value {
        Value::Object(map) => map.into_iter().filter(|(_, v)| !v.is_null()).collect(),
        _ => FieldMap::new(),
    }
}

fn ids_json(ids: &[ElementId]) -> Value {
    Value::from(ids.iter().map(ToString::to_string).collect::<Vec<_>>())
}

fn read_steps(raw: &str) -> Result<Value> {
    let text = if raw.trim_start().starts_with('[') {
        raw.to_string()
    } else {
        std::fs::read_to_string(raw).map_err(|e| Error::io(raw, e))?
    };
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: PathBuf::from(raw),
        message: e.to_string(),
    })
}

fn new_element(case: &CaseDirectory, cmd: NewCommand, out: &mut dyn Write) -> Result<()> {
    let now = case.now();
    let (kind, fields) = match cmd {
        NewCommand::Claim {
            id,
            statement,
            name,
            strategy,
            subclaims,
            contexts,
            assumptions,
            measures,
            risk_criterion,
        } => (
            Kind::Claim,
            json!({
                "id": id.to_string(),
                "statement": statement,
                "name": name,
                "strategy": strategy,
                "subclaim_ids": ids_json(&subclaims),
                "contexts": contexts,
                "assumptions": assumptions,
                "measure_ids": ids_json(&measures),
                "risk_criterion": risk_criterion,
            }),
        ),
        NewCommand::Measure {
            id,
            name,
            phase,
            characteristic,
            description,
        } => (
            Kind::Measure,
            json!({
                "id": id.to_string(),
                "name": name,
                "lifecycle_phase": phase,
                "addressed_characteristic": characteristic,
                "description": description,
            }),
        ),
        NewCommand::Blueprint {
            id,
            name,
            measure,
            description,
            justification,
            steps,
        } => {
            let steps = steps.as_deref().map(read_steps).transpose()?;
            (
                Kind::Blueprint,
                json!({
                    "id": id.to_string(),
                    "name": name,
                    "realized_measure": measure.to_string(),
                    "description": description,
                    "justification": justification,
                    "steps": steps,
                }),
            )
        }
    };
    let mut element = create_element(kind, &field_map(fields), now)?;
    for step in match &element {
        AcElement::Blueprint(b) => b.steps.as_slice(),
        _ => &[],
    } {
        if let Some(spec) = &step.technique {
            techniques::validate_spec(spec)?;
        }
    }
    case.save_element(&mut element, false)?;
    if let AcElement::Blueprint(b) = &element {
        let mut measure = case.load_element(&b.realized_measure_id)?;
        if link(&mut measure, Relation::MeasureBlueprint, LinkTarget::Element(&element))? {
            case.save_element(&mut measure, true)?;
        }
    }
    writeln!(out, "created {kind} {}", element.id()).map_err(out_err)?;
    Ok(())
}

fn out_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let offset = UtcOffset::new(cli.offset)?;
    let clock = cli.at.map(Clock::Fixed).unwrap_or(Clock::System);
    if let Command::Init = cli.command {
        CaseDirectory::init(&cli.case)?;
        writeln!(out, "initialized case at {}", cli.case.display()).map_err(out_err)?;
        return Ok(());
    }
    let case = CaseDirectory::open(&cli.case)?.with_clock(clock).with_offset(offset);
    match cli.command {
        Command::Init => unreachable!("handled above"),
        Command::New(cmd) => new_element(&case, cmd, out)?,
        Command::Refine { id, strategy, subclaims } => {
            let mut claim = case.load_claim(&id)?;
            refine_claim(&mut claim, &strategy, subclaims, case.now())?;
            case.save(&mut claim, true)?;
            writeln!(out, "refined {id} into {}", claim.subclaim_ids.len()).map_err(out_err)?;
        }
        Command::Link { from, relation, to } => {
            let relation: Relation = relation.parse()?;
            let mut element = case.load_element(&from)?;
            let changed = match relation {
                Relation::ClaimEvidence => {
                    let r = case.load_realization(&to)?;
                    link(&mut element, relation, LinkTarget::Realization(&r))?
                }
                _ => {
                    let target = case.load_element(&to)?;
                    link(&mut element, relation, LinkTarget::Element(&target))?
                }
            };
            if changed {
                case.save_element(&mut element, true)?;
                writeln!(out, "linked {from} -> {to}").map_err(out_err)?;
            } else {
                writeln!(out, "{from} already references {to}").map_err(out_err)?;
            }
        }
        Command::Realize(args) => {
            let req = RealizeRequest {
                blueprint: args.blueprint,
                id: args.id,
                data: args.data,
                probs: args.probs,
                data_version: args.data_version,
                label_column: args.label_column,
                params: args.params,
                seed: cli.seed,
                skip: args.skip,
            };
            let r = realize(&case, &req)?;
            writeln!(
                out,
                "realized {} as {} ({}, {} artifacts)",
                r.blueprint_id,
                r.id,
                r.data_model_version,
                r.artifacts.len()
            )
            .map_err(out_err)?;
            for (name, rel) in &r.artifacts {
                writeln!(out, "  {name}: {rel}").map_err(out_err)?;
            }
        }
        Command::Conclude { id, text } => {
            let now = case.now();
            match case.load(&id, None)? {
                Entry::Element(AcElement::Claim(mut c)) => {
                    add_conclusion(&mut c, &text, now)?;
                    case.save(&mut c, true)?;
                }
                Entry::Realization(mut r) => {
                    add_conclusion(&mut r, &text, now)?;
                    case.save(&mut r, true)?;
                }
                Entry::Element(other) => {
                    return Err(Error::KindMismatch {
                        id: id.to_string(),
                        expected: "claim or realization",
                        found: other.kind().as_str(),
                    })
                }
            }
            writeln!(out, "concluded {id} at {}", format_timestamp(now, offset)?).map_err(out_err)?;
        }
        Command::Doc { id } => {
            let published = reports::publish(&case, &id, cli.format)?;
            writeln!(out, "{}", published.path).map_err(out_err)?;
        }
        Command::Log { id } => {
            let r = case.load_realization(&id)?;
            writeln!(out, "Timestamp\tDate and time\tData/model version\tFile").map_err(out_err)?;
            for d in &r.documentation {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}",
                    d.timestamp,
                    format_timestamp(d.timestamp, offset)?,
                    d.data_model_version,
                    d.path
                )
                .map_err(out_err)?;
            }
        }
        Command::Show { id } => {
            let summary = match case.load(&id, None)? {
                Entry::Element(e) => summarize(SummaryTarget::Element(&e)),
                Entry::Realization(r) => {
                    let blueprint = case.load_blueprint(&r.blueprint_id).ok();
                    let measure = blueprint.as_ref().and_then(|b| case.load_measure(&b.realized_measure_id).ok());
                    summarize(SummaryTarget::Realization {
                        realization: &r,
                        blueprint: blueprint.as_ref(),
                        measure: measure.as_ref(),
                    })
                }
            };
            let mut lines = vec![
                format!("ID: {}", summary.id),
                format!("Kind: {}", summary.kind),
                format!("Name: {}", summary.name),
                format!("Description: {}", summary.description),
            ];
            lines.extend(summary.fields.iter().map(|(k, v)| format!("{k}: {v}")));
            for refs in summary
                .references
                .iter()
                .filter(|r| !r.ids.is_empty() && !summary.fields.iter().any(|(k, _)| *k == r.label))
            {
                lines.push(format!("{}: {}", refs.label, refs.ids.join(", ")));
            }
            if let Some(v) = &summary.data_model_version {
                lines.push(format!("Data/model version: {v}"));
            }
            let versions: Vec<String> = summary.element_versions.iter().map(ToString::to_string).collect();
            lines.push(format!("Element version: {}", versions.join(" ")));
            if let Some(c) = &summary.latest_conclusion {
                lines.push(format!("Most recent conclusion: {} ({})", c.text, format_timestamp(c.timestamp, offset)?));
            }
            for line in lines {
                writeln!(out, "{line}").map_err(out_err)?;
            }
        }
        Command::Validate { root } => {
            let findings = audit::validate_case(&case, &root)?;
            for f in &findings {
                writeln!(out, "{f}").map_err(out_err)?;
            }
            let errors = error_count(&findings);
            let warnings = findings.iter().filter(|f| f.severity == Severity::Warning).count();
            writeln!(out, "{errors} errors, {warnings} warnings").map_err(out_err)?;
            if errors > 0 {
                return Err(Error::ValidationFailed {
                    count: errors,
                    first: findings[0].to_string(),
                });
            }
        }
        Command::Export { root, mode, out: path } => {
            let (_, text) = audit::export_case(&case, &root, mode)?;
            match path {
                Some(p) => {
                    std::fs::write(&p, &text).map_err(|e| Error::io(&p, e))?;
                    writeln!(out, "wrote {}", p.display()).map_err(out_err)?;
                }
                None => out.write_all(text.as_bytes()).map_err(out_err)?,
            }
        }
        Command::Import { file } => {
            let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
            let doc = ExchangeDocument::from_json(&text)?;
            let ids = audit::import_subtree(&case, &doc)?;
            writeln!(out, "imported {} records", ids.len()).map_err(out_err)?;
        }
        Command::Delete { id } => {
            case.delete(&id)?;
            writeln!(out, "deleted {id}").map_err(out_err)?;
        }
    }
    Ok(())
}

/// Parses `args` and runs the command. Returns the process exit code: 0 on
/// success, 1 on a domain error and 2 on a usage error.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = out.write_all(text.as_bytes());
            } else {
                let _ = err.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_in(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("acforge").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_in(&["frobnicate"]).0, 2);
        assert_eq!(run_in(&["realize", "bp"]).0, 2);
        assert_eq!(run_in(&["--offset", "x", "init"]).0, 2);
        assert_eq!(run_in(&["show", "Bad Id"]).0, 2);
    }

    #[test]
    fn unknown_id_exits_one() {
        let dir = tempfile::tempdir().unwrap();
        let case = dir.path().to_str().unwrap();
        assert_eq!(run_in(&["--case", case, "init"]).0, 0);
        let (code, _, err) = run_in(&["--case", case, "show", "nope"]);
        assert_eq!(code, 1);
        assert!(err.contains("nope"));
    }

    #[test]
    fn out_of_range_offset_is_a_domain_error() {
        let dir = tempfile::tempdir().unwrap();
        let case = dir.path().to_str().unwrap();
        assert_eq!(run_in(&["--case", case, "--offset", "900", "init"]).0, 1);
    }

    #[test]
    fn binding_parser() {
        assert_eq!(parse_binding("psi=64").unwrap(), ("psi".into(), ParamValue::Number(64.0)));
        assert!(parse_binding("psi").is_err());
        assert!(parse_binding("=3").is_err());
    }
}
