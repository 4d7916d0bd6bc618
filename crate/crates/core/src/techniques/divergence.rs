//! Per-feature distribution divergence between a reference sample and test
//! data: equal-width bins over the combined range, add-one smoothing, and
//! Jensen-Shannon divergence in bits.

use serde::Serialize;

use super::{csv_bytes, json_bytes, param, Artifact, ParamDef, Params, RunContext, Technique};
use crate::datasets::LabeledTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureDivergence {
    pub feature: String,
    pub divergence: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub bins: usize,
    pub threshold: f64,
    pub features: Vec<FeatureDivergence>,
}

impl DivergenceReport {
    pub fn flagged(&self) -> Vec<&str> {
        self.features.iter().filter(|f| f.flagged).map(|f| f.feature.as_str()).collect()
    }
}

/// JSD in bits between two discrete distributions over the same support.
pub fn jensen_shannon(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        let mut term = 0.0;
        if a > 0.0 {
            term += a * (a / m).log2();
        }
        if b > 0.0 {
            term += b * (b / m).log2();
        }
        total += 0.5 * term;
    }
    total.clamp(0.0, 1.0)
}

/// Add-one smoothed histogram over `bins` equal-width bins starting at `lo`.
fn smoothed_histogram(values: &[f64], lo: f64, width: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0usize; bins];
    for v in values {
        let b = ((v - lo) / width) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let denom = (values.len() + bins) as f64;
    counts.into_iter().map(|c| (c + 1) as f64 / denom).collect()
}

/// Divergence of one feature's two samples. A constant combined range is a
/// single bin, which gives 0.
pub fn feature_divergence(reference: &[f64], test: &[f64], bins: usize) -> f64 {
    let (lo, hi) = reference
        .iter()
        .chain(test)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return 0.0;
    }
    let width = (hi - lo) / bins as f64;
    let p = smoothed_histogram(reference, lo, width, bins);
    let q = smoothed_histogram(test, lo, width, bins);
    jensen_shannon(&p, &q)
}

pub fn representativity_report(
    reference: &LabeledTable,
    test: &LabeledTable,
    bins: usize,
    threshold: f64,
) -> Result<DivergenceReport> {
    if reference.feature_names != test.feature_names {
        return Err(Error::data(format!(
            "schema mismatch: {:?} vs {:?}",
            reference.feature_names, test.feature_names
        )));
    }
    if bins == 0 {
        return Err(Error::data("bins must be positive"));
    }
    let mut features = Vec::new();
    for (idx, name) in reference.feature_names.iter().enumerate() {
        let (Some(a), Some(b)) = (reference.numeric_column(idx), test.numeric_column(idx)) else {
            continue;
        };
        let divergence = feature_divergence(&a, &b, bins);
        features.push(FeatureDivergence {
            feature: name.clone(),
            divergence,
            flagged: divergence > threshold,
        });
    }
    Ok(DivergenceReport {
        bins,
        threshold,
        features,
    })
}

pub(super) struct DivergenceCheck;

impl Technique for DivergenceCheck {
    fn name(&self) -> &'static str {
        "divergence_check"
    }

    fn parameters(&self) -> &'static [ParamDef] {
        const P: &[ParamDef] = &[
            param("reference", true, "CSV sampled from the intended application scope"),
            param("bins", false, "equal-width bins per feature (default 10)"),
            param("threshold", false, "flag features whose divergence exceeds this (default 0.1)"),
        ];
        P
    }

    fn apply(&self, ctx: &mut RunContext, params: Params<'_>, _seed: u64) -> Result<Vec<Artifact>> {
        let reference = ctx.load_companion(&params.required_text("reference")?)?;
        let report = representativity_report(
            &reference,
            &ctx.original,
            params.count("bins", 10)?,
            params.number("threshold", 0.1)?,
        )?;
        let mut rows = vec![vec!["Feature".to_string(), "JSD (bits)".to_string(), "Flagged".to_string()]];
        rows.extend(report.features.iter().map(|f| {
            vec![
                f.feature.clone(),
                format!("{:.6}", f.divergence),
                if f.flagged { "yes" } else { "no" }.to_string(),
            ]
        }));
        Ok(vec![
            Artifact::new("divergence.csv", csv_bytes(&rows)?),
            Artifact::new("divergence.json", json_bytes(&report)?),
        ])
    }
}
