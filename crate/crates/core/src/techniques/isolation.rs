//! Isolation forest outlier scoring.
//!
//! Each tree is grown on a subsample of `m = min(psi, n)` rows by choosing a
//! random non-constant feature and a uniform split inside the node's range,
//! until a node holds one row or reaches depth `ceil(log2(m))`. The anomaly
//! score is `2^(-E[h(x)] / c(m))` with `c(m) = 2 H(m-1) - 2 (m-1) / m`.
//!
//! Tree `t` draws from a ChaCha stream keyed by `(seed, t)`, so the forest is
//! the same whatever the thread count.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{csv_bytes, json_bytes, param, Artifact, ParamDef, Params, RunContext, Technique};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IsolationForestParams {
    pub n_trees: usize,
    pub psi: usize,
    pub seed: u64,
}

impl Default for IsolationForestParams {
    fn default() -> Self {
        IsolationForestParams {
            n_trees: 100,
            psi: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split {
        feature: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree {
    nodes: Vec<Node>,
}

impl IsolationTree {
    /// Longest root-to-leaf edge count.
    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Path length `h(x)`: edges traversed plus `c(size)` at the leaf.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        let mut edges = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf { size } => return edges as f64 + average_path_length(size),
                Node::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    at = if x[feature] < value { left } else { right };
                    edges += 1;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForestModel {
    pub trees: Vec<IsolationTree>,
    pub params: IsolationForestParams,
    /// Rows per tree, `min(psi, n)`.
    pub subsample_size: usize,
    pub n_features: usize,
}

fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

/// `c(m)`: average unsuccessful-search path length in a BST of `m` nodes.
/// `c(0) = c(1) = 0`, `c(2) = 1`.
pub fn average_path_length(m: usize) -> f64 {
    if m <= 1 {
        return 0.0;
    }
    let m1 = (m - 1) as f64;
    2.0 * harmonic(m - 1) - 2.0 * m1 / m as f64
}

/// `ceil(log2(m))` for `m >= 1`.
pub fn depth_limit(m: usize) -> usize {
    if m <= 1 {
        0
    } else {
        (usize::BITS - (m - 1).leading_zeros()) as usize
    }
}

fn grow(data: &[Vec<f64>], rows: &mut [usize], depth: usize, limit: usize, rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>) -> usize {
    let at = nodes.len();
    nodes.push(Node::Leaf { size: rows.len() });
    if rows.len() <= 1 || depth >= limit {
        return at;
    }
    let n_features = data[rows[0]].len();
    let ranges: Vec<(usize, f64, f64)> = (0..n_features)
        .filter_map(|f| {
            let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                (lo.min(data[r][f]), hi.max(data[r][f]))
            });
            (hi > lo).then_some((f, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return at;
    }
    let (feature, lo, hi) = ranges[rng.gen_range(0..ranges.len())];
    // u in [0,1) gives a split in (lo, hi], so both sides are non-empty.
    let u: f64 = rng.gen();
    let value = (lo + (hi - lo) * (1.0 - u)).clamp(lo.next_up().min(hi), hi);
    let mut split = 0;
    for i in 0..rows.len() {
        if data[rows[i]][feature] < value {
            rows.swap(i, split);
            split += 1;
        }
    }
    let (left_rows, right_rows) = rows.split_at_mut(split);
    let left = grow(data, left_rows, depth + 1, limit, rng, nodes);
    let right = grow(data, right_rows, depth + 1, limit, rng, nodes);
    nodes[at] = Node::Split {
        feature,
        value,
        left,
        right,
    };
    at
}

fn check_matrix(data: &[Vec<f64>], n_features: Option<usize>) -> Result<usize> {
    let width = n_features.or_else(|| data.first().map(Vec::len)).unwrap_or(0);
    for (i, row) in data.iter().enumerate() {
        if row.len() != width {
            return Err(Error::data(format!("row {i} has {} features, expected {width}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::data(format!("row {i} has a non-finite value")));
        }
    }
    Ok(width)
}

impl IsolationForestModel {
    pub fn fit(data: &[Vec<f64>], params: IsolationForestParams) -> Result<Self> {
        if data.len() < 2 {
            return Err(Error::data("isolation forest needs at least 2 rows"));
        }
        if params.psi < 2 {
            return Err(Error::data("psi must be at least 2"));
        }
        if params.n_trees == 0 {
            return Err(Error::data("n_trees must be positive"));
        }
        let n_features = check_matrix(data, None)?;
        if n_features == 0 {
            return Err(Error::data("isolation forest needs at least one feature"));
        }
        let m = params.psi.min(data.len());
        let limit = depth_limit(m);
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(t as u64);
                let mut rows = sample(&mut rng, data.len(), m).into_vec();
                rows.sort_unstable();
                let mut nodes = Vec::new();
                grow(data, &mut rows, 0, limit, &mut rng, &mut nodes);
                IsolationTree { nodes }
            })
            .collect();
        Ok(IsolationForestModel {
            trees,
            params,
            subsample_size: m,
            n_features,
        })
    }

    /// Mean path length over trees, summed in tree order.
    pub fn expected_path_length(&self, x: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.path_length(x)).sum();
        total / self.trees.len() as f64
    }

    pub fn score_one(&self, x: &[f64]) -> f64 {
        let c = average_path_length(self.subsample_size);
        2f64.powf(-self.expected_path_length(x) / c)
    }

    pub fn score(&self, data: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_matrix(data, Some(self.n_features))?;
        Ok(data.par_iter().map(|x| self.score_one(x)).collect())
    }
}

pub(super) struct IsolationForest;

#[derive(Serialize)]
struct Summary<'a> {
    columns: &'a [String],
    n_trees: usize,
    psi: usize,
    subsample_size: usize,
    seed: u64,
    rows: usize,
    mean_score: f64,
    max_score: f64,
}

impl Technique for IsolationForest {
    fn name(&self) -> &'static str {
        "isolation_forest"
    }

    fn parameters(&self) -> &'static [ParamDef] {
        const P: &[ParamDef] = &[
            param("n_trees", false, "number of trees (default 100)"),
            param("psi", false, "subsample size per tree (default 256)"),
            param("columns", false, "comma-separated numeric feature columns (default: all)"),
            param("top", false, "how many highest-scoring rows to list (default 10)"),
        ];
        P
    }

    fn apply(&self, ctx: &mut RunContext, params: Params<'_>, seed: u64) -> Result<Vec<Artifact>> {
        let columns: Option<Vec<String>> = params
            .text("columns")?
            .map(|c| c.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect());
        let (names, data) = ctx.table.numeric_matrix(columns.as_deref())?;
        let forest_params = IsolationForestParams {
            n_trees: params.count("n_trees", 100)?,
            psi: params.count("psi", 256)?,
            seed,
        };
        let top = params.count("top", 10)?;
        let model = IsolationForestModel::fit(&data, forest_params)?;
        let scores = model.score(&data)?;

        let mut ranked: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut top_rows = vec![vec!["Index".to_string(), "Score".to_string()]];
        top_rows.extend(ranked.iter().take(top).map(|(i, s)| vec![i.to_string(), format!("{s:.6}")]));
        let mut all_rows = vec![vec!["Index".to_string(), "Score".to_string()]];
        all_rows.extend(scores.iter().enumerate().map(|(i, s)| vec![i.to_string(), format!("{s:.6}")]));

        let summary = Summary {
            columns: &names,
            n_trees: forest_params.n_trees,
            psi: forest_params.psi,
            subsample_size: model.subsample_size,
            seed,
            rows: scores.len(),
            mean_score: scores.iter().sum::<f64>() / scores.len() as f64,
            max_score: ranked.first().map(|r| r.1).unwrap_or(0.0),
        };
        Ok(vec![
            Artifact::new("top_outliers.csv", csv_bytes(&top_rows)?),
            Artifact::new("outlier_scores.csv", csv_bytes(&all_rows)?),
            Artifact::new("isolation_forest.json", json_bytes(&summary)?),
        ])
    }
}
