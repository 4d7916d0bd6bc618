//! Confident learning for label-fault detection.
//!
//! Per-class threshold `t[j]` is the mean predicted probability of class `j`
//! over rows labeled `j`. A row is confidently assigned to the most probable
//! class among those reaching their threshold (lowest index on ties); rows
//! reaching no threshold are left out. The confident joint counts
//! (given label, confident class) pairs and its off-diagonal rows are the
//! label-issue candidates.

use serde::Serialize;

use super::{csv_bytes, json_bytes, param, Artifact, ParamDef, Params, RunContext, Technique};
use crate::datasets::PredictionMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassThresholds(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidentJoint {
    /// `counts[i][j]`: rows labeled `i` confidently assigned to `j`.
    pub counts: Vec<Vec<u64>>,
    /// Rows whose probabilities reached no class threshold.
    pub uncounted: usize,
}

impl ConfidentJoint {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelIssue {
    pub index: usize,
    pub given: usize,
    pub suggested: usize,
    /// Predicted probability of the suggested class.
    pub confidence: f64,
}

/// Issues sorted by confidence, highest first (row index breaks ties).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelIssueReport {
    pub issues: Vec<LabelIssue>,
}

impl LabelIssueReport {
    /// Reported row indices in ascending order.
    pub fn indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self.issues.iter().map(|i| i.index).collect();
        idx.sort_unstable();
        idx
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

fn check_inputs(labels: &[usize], probs: &PredictionMatrix) -> Result<()> {
    if labels.len() != probs.n_rows() {
        return Err(Error::data(format!(
            "{} labels but {} prediction rows",
            labels.len(),
            probs.n_rows()
        )));
    }
    if let Some(bad) = labels.iter().find(|l| **l >= probs.n_classes()) {
        return Err(Error::data(format!("label index {bad} out of range for {} classes", probs.n_classes())));
    }
    Ok(())
}

pub fn class_thresholds(labels: &[usize], probs: &PredictionMatrix) -> Result<ClassThresholds> {
    check_inputs(labels, probs)?;
    let k = probs.n_classes();
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (r, &label) in labels.iter().enumerate() {
        sums[label] += probs.row(r)[label];
        counts[label] += 1;
    }
    if let Some(empty) = counts.iter().position(|c| *c == 0) {
        return Err(Error::data(format!("class {empty} has no labeled rows")));
    }
    Ok(ClassThresholds(sums.iter().zip(&counts).map(|(s, c)| s / *c as f64).collect()))
}

fn confident_class(row: &[f64], thresholds: &ClassThresholds) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, (&p, &t)) in row.iter().zip(&thresholds.0).enumerate() {
        if p >= t && best.is_none_or(|b| p > row[b]) {
            best = Some(j);
        }
    }
    best
}

/// Confident class per row (`None` when no threshold is reached).
pub fn confident_assignments(labels: &[usize], probs: &PredictionMatrix) -> Result<Vec<Option<usize>>> {
    let thresholds = class_thresholds(labels, probs)?;
    Ok((0..labels.len()).map(|r| confident_class(probs.row(r), &thresholds)).collect())
}

pub fn compute_confident_joint(labels: &[usize], probs: &PredictionMatrix) -> Result<ConfidentJoint> {
    let assigned = confident_assignments(labels, probs)?;
    let k = probs.n_classes();
    let mut counts = vec![vec![0u64; k]; k];
    let mut uncounted = 0;
    for (&given, confident) in labels.iter().zip(&assigned) {
        match confident {
            Some(j) => counts[given][*j] += 1,
            None => uncounted += 1,
        }
    }
    Ok(ConfidentJoint { counts, uncounted })
}

pub fn find_label_issues(labels: &[usize], probs: &PredictionMatrix) -> Result<LabelIssueReport> {
    let assigned = confident_assignments(labels, probs)?;
    let mut issues: Vec<LabelIssue> = labels
        .iter()
        .zip(&assigned)
        .enumerate()
        .filter_map(|(index, (&given, confident))| match confident {
            Some(j) if *j != given => Some(LabelIssue {
                index,
                given,
                suggested: *j,
                confidence: probs.row(index)[*j],
            }),
            _ => None,
        })
        .collect();
    issues.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then(a.index.cmp(&b.index)));
    Ok(LabelIssueReport { issues })
}

pub(super) struct ConfidentLearning;

#[derive(Serialize)]
struct Summary<'a> {
    classes: &'a [String],
    thresholds: &'a [f64],
    rows: usize,
    uncounted: usize,
    issues: usize,
}

impl Technique for ConfidentLearning {
    fn name(&self) -> &'static str {
        "confident_learning"
    }

    fn parameters(&self) -> &'static [ParamDef] {
        const P: &[ParamDef] = &[param(
            "original_label",
            false,
            "only list candidates whose given label equals this value",
        )];
        P
    }

    fn apply(&self, ctx: &mut RunContext, params: Params<'_>, _seed: u64) -> Result<Vec<Artifact>> {
        let only = params.text("original_label")?;
        let labels = ctx.table.label_indices();
        let classes = ctx.table.class_names.clone();
        let probs = ctx.probs()?;
        let thresholds = class_thresholds(&labels, probs)?;
        let joint = compute_confident_joint(&labels, probs)?;
        let report = find_label_issues(&labels, probs)?;

        let mut matrix = vec![std::iter::once(String::new())
            .chain(classes.iter().map(|c| format!("CL-Label: '{c}'")))
            .collect::<Vec<_>>()];
        for (i, row) in joint.counts.iter().enumerate() {
            matrix.push(
                std::iter::once(format!("Original label: '{}'", classes[i]))
                    .chain(row.iter().map(u64::to_string))
                    .collect(),
            );
        }

        let mut candidates = vec![vec![
            "Index".to_string(),
            "Original label".to_string(),
            "CL-Label".to_string(),
            "Confidence".to_string(),
        ]];
        for issue in &report.issues {
            let original = &ctx.original.labels[issue.index];
            if only.as_deref().is_some_and(|o| o != classes[issue.given] && o != original) {
                continue;
            }
            candidates.push(vec![
                issue.index.to_string(),
                original.clone(),
                classes[issue.suggested].clone(),
                format!("{:.6}", issue.confidence),
            ]);
        }

        let summary = Summary {
            classes: &classes,
            thresholds: &thresholds.0,
            rows: labels.len(),
            uncounted: joint.uncounted,
            issues: report.len(),
        };
        Ok(vec![
            Artifact::new("confident_joint.csv", csv_bytes(&matrix)?),
            Artifact::new("label_issues.csv", csv_bytes(&candidates)?),
            Artifact::new("confident_learning.json", json_bytes(&summary)?),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_fixture() -> (Vec<usize>, PredictionMatrix) {
        let probs = PredictionMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.6, 0.4], vec![0.2, 0.8], vec![0.8, 0.2]], 2).unwrap();
        (vec![0, 0, 1, 1], probs)
    }

    #[test]
    fn hand_traced_thresholds_joint_and_issues() {
        let (labels, probs) = hand_fixture();
        assert_eq!(class_thresholds(&labels, &probs).unwrap().0, vec![0.75, 0.5]);
        let joint = compute_confident_joint(&labels, &probs).unwrap();
        assert_eq!(joint.counts, vec![vec![1, 0], vec![1, 1]]);
        assert_eq!(joint.uncounted, 1);
        let report = find_label_issues(&labels, &probs).unwrap();
        assert_eq!(report.indices(), vec![3]);
        assert_eq!(report.issues[0].suggested, 0);
        assert_eq!(report.issues[0].confidence, 0.8);
    }

    #[test]
    fn one_hot_predictions() {
        let labels = vec![0, 1, 2, 1];
        let rows = labels.iter().map(|&l| (0..3).map(|j| if j == l { 1.0 } else { 0.0 }).collect()).collect();
        let probs = PredictionMatrix::from_rows(rows, 3).unwrap();
        assert_eq!(class_thresholds(&labels, &probs).unwrap().0, vec![1.0; 3]);
        let joint = compute_confident_joint(&labels, &probs).unwrap();
        assert_eq!(joint.counts, vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
        assert!(find_label_issues(&labels, &probs).unwrap().is_empty());
    }

    #[test]
    fn uniform_predictions() {
        let labels = vec![0, 1, 2, 3];
        let probs = PredictionMatrix::from_rows(vec![vec![0.25; 4]; 4], 4).unwrap();
        assert_eq!(class_thresholds(&labels, &probs).unwrap().0, vec![0.25; 4]);
        // every class ties; lowest index wins
        let joint = compute_confident_joint(&labels, &probs).unwrap();
        assert!(joint.counts.iter().all(|row| row[0] == 1));
    }

    #[test]
    fn empty_class_is_an_error() {
        let labels = vec![0, 0];
        let probs = PredictionMatrix::from_rows(vec![vec![0.5, 0.5]; 2], 2).unwrap();
        assert!(class_thresholds(&labels, &probs).is_err());
        assert!(compute_confident_joint(&[0], &probs).is_err());
    }
}
