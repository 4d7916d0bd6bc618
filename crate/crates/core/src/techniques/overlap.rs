//! Exact train/test overlap detection.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use super::{csv_bytes, json_bytes, param, Artifact, ParamDef, Params, RunContext, Technique};
use crate::datasets::LabeledTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapReport {
    /// `(train index, test index)` pairs with identical canonical rows, sorted.
    pub pairs: Vec<(usize, usize)>,
    pub n_test: usize,
    /// Distinct overlapping test rows over `n_test`.
    pub fraction_test_overlapping: f64,
}

pub fn detect_overlap(train: &LabeledTable, test: &LabeledTable) -> Result<OverlapReport> {
    if train.columns != test.columns || train.label_column != test.label_column {
        return Err(Error::data(format!(
            "schema mismatch: {:?} vs {:?}",
            train.columns, test.columns
        )));
    }
    let mut index: HashMap<String, Vec<usize>> = HashMap::new();
    for i in 0..train.n_rows() {
        index.entry(train.canonical_row(i)).or_default().push(i);
    }
    let mut pairs = Vec::new();
    let mut hit = BTreeSet::new();
    for j in 0..test.n_rows() {
        if let Some(train_rows) = index.get(&test.canonical_row(j)) {
            hit.insert(j);
            pairs.extend(train_rows.iter().map(|&i| (i, j)));
        }
    }
    pairs.sort_unstable();
    let n_test = test.n_rows();
    Ok(OverlapReport {
        pairs,
        n_test,
        fraction_test_overlapping: if n_test == 0 { 0.0 } else { hit.len() as f64 / n_test as f64 },
    })
}

pub(super) struct OverlapCheck;

impl Technique for OverlapCheck {
    fn name(&self) -> &'static str {
        "overlap_check"
    }

    fn parameters(&self) -> &'static [ParamDef] {
        const P: &[ParamDef] = &[param("train", true, "CSV of the development (training) split")];
        P
    }

    fn apply(&self, ctx: &mut RunContext, params: Params<'_>, _seed: u64) -> Result<Vec<Artifact>> {
        let train = ctx.load_companion(&params.required_text("train")?)?;
        let report = detect_overlap(&train, &ctx.original)?;
        let mut rows = vec![vec!["Train index".to_string(), "Test index".to_string()]];
        rows.extend(report.pairs.iter().map(|(i, j)| vec![i.to_string(), j.to_string()]));
        Ok(vec![
            Artifact::new("overlap_pairs.csv", csv_bytes(&rows)?),
            Artifact::new("overlap.json", json_bytes(&report)?),
        ])
    }
}
