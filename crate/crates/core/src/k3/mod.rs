//! The K3 household-vulnerability index.
//!
//! Census households are standardized onto [0, 1], compared with Gower
//! dissimilarity, partitioned into three medoid clusters, labeled 1..3
//! in ascending welfare (lower K3 means more vulnerable), checked with
//! per-variable one-way ANOVA, and finally averaged per census block.

mod anova;
mod gower;
mod pam;
mod standardize;

pub use anova::{anova_f, AnovaF};
pub use gower::{gower, GowerMatrix};
pub use pam::{cluster_k3, medoid_set_cost, ClusterAssignment, EXACT_SEARCH_MAX, K};
pub use standardize::{standardize, StandardizedMatrix};

use std::collections::BTreeMap;

use crate::ingest::{CensusSchema, HouseholdRecord};

/// Refuse O(N^2) matrices above this size unless explicitly allowed.
pub const MAX_HOUSEHOLDS: usize = 100_000;

#[derive(Debug, thiserror::Error)]
pub enum K3Error {
    #[error("no household records")]
    Empty,
    #[error("household `{household_id}` has {got} values, schema expects {expected}")]
    RowWidth { household_id: String, got: usize, expected: usize },
    #[error("column `{column}` has no observed values")]
    AllMissing { column: String },
    #[error("no variables remain after dropping constant columns")]
    NoVariables,
    #[error("households {i} and {j} share no observed variable")]
    DisjointPair { i: usize, j: usize },
    #[error("need at least 3 households to form 3 clusters, got {n}")]
    TooFewHouseholds { n: usize },
    #[error("{n} households exceed the {limit} limit; pass allow_large to override")]
    TooManyHouseholds { n: usize, limit: usize },
    #[error("ANOVA needs at least 2 groups")]
    AnovaGroups,
    #[error("ANOVA needs more observations than groups")]
    AnovaObservations,
}

/// Cluster labels 1..=3 in ascending welfare, plus the raw assignment
/// they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClusters {
    pub assignment: ClusterAssignment,
    /// Raw cluster id -> label in 1..=3.
    pub label_for_raw: [u8; K],
    /// Label per household.
    pub labels: Vec<u8>,
}

/// Order the three raw clusters by mean standardized welfare of their
/// members and hand out labels 1 (most vulnerable) to 3. Ties go to
/// the larger cluster first, then to the lower medoid index.
pub fn order_clusters(assignment: &ClusterAssignment, m: &StandardizedMatrix) -> LabeledClusters {
    let mut sums = [0.0f64; K];
    let mut counts = [0usize; K];
    for (row, &cluster) in assignment.raw.iter().enumerate() {
        for &v in m.row(row) {
            if !v.is_nan() {
                sums[cluster] += v;
                counts[cluster] += 1;
            }
        }
    }
    let sizes = assignment.cluster_sizes();
    let welfare =
        |c: usize| if counts[c] == 0 { f64::NAN } else { sums[c] / counts[c] as f64 };

    let mut order: [usize; K] = [0, 1, 2];
    order.sort_by(|&a, &b| {
        welfare(a)
            .total_cmp(&welfare(b))
            .then_with(|| sizes[b].cmp(&sizes[a]))
            .then_with(|| assignment.medoids[a].cmp(&assignment.medoids[b]))
    });

    let mut label_for_raw = [0u8; K];
    for (rank, &cluster) in order.iter().enumerate() {
        label_for_raw[cluster] = (rank + 1) as u8;
    }
    let labels = assignment.raw.iter().map(|&c| label_for_raw[c]).collect();
    LabeledClusters { assignment: assignment.clone(), label_for_raw, labels }
}

/// Block-level K3: mean of household labels.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockK3 {
    pub block_id: String,
    pub k3: f64,
    pub n_households: usize,
}

/// Average household labels per census block, blocks sorted by id.
pub fn block_k3(labels: &[u8], records: &[HouseholdRecord]) -> Vec<BlockK3> {
    assert_eq!(labels.len(), records.len(), "one label per household");
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (label, record) in labels.iter().zip(records) {
        let entry = acc.entry(record.block_id.as_str()).or_insert((0.0, 0));
        entry.0 += f64::from(*label);
        entry.1 += 1;
    }
    acc.into_iter()
        .map(|(block_id, (sum, n))| BlockK3 {
            block_id: block_id.to_string(),
            k3: sum / n as f64,
            n_households: n,
        })
        .collect()
}

/// Per-variable ANOVA outcome. `result` is `None` when the variable is
/// observed in fewer than two clusters or has too few observations.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableAnova {
    pub name: String,
    pub result: Option<AnovaF>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct K3Diagnostics {
    pub n_households: usize,
    pub medoids: Vec<usize>,
    /// Household counts per label 1..=3.
    pub cluster_sizes: [usize; K],
    pub objective: f64,
    pub dropped_columns: Vec<String>,
    pub variables: Vec<VariableAnova>,
    pub anova_threshold: f64,
    /// Smallest F among testable variables.
    pub min_f: Option<f64>,
    /// Fraction of testable variables with F above the threshold.
    pub frac_above_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct K3Options {
    pub seed: u64,
    pub anova_threshold: f64,
    pub allow_large: bool,
}

impl Default for K3Options {
    fn default() -> Self {
        K3Options { seed: 0, anova_threshold: 3.0, allow_large: false }
    }
}

#[derive(Debug, Clone)]
pub struct K3Output {
    pub blocks: Vec<BlockK3>,
    /// Label 1..=3 per household, input order.
    pub labels: Vec<u8>,
    pub diagnostics: K3Diagnostics,
}

/// Run the full index computation over parsed census records.
pub fn compute_k3(
    records: &[HouseholdRecord],
    schema: &CensusSchema,
    opts: &K3Options,
) -> Result<K3Output, K3Error> {
    if records.len() > MAX_HOUSEHOLDS && !opts.allow_large {
        return Err(K3Error::TooManyHouseholds { n: records.len(), limit: MAX_HOUSEHOLDS });
    }
    let matrix = standardize(records, schema)?;
    let dissimilarity = gower(&matrix)?;
    let assignment = cluster_k3(&dissimilarity, opts.seed)?;
    let labeled = order_clusters(&assignment, &matrix);

    let mut variables = Vec::with_capacity(matrix.n_cols());
    for (col, name) in matrix.names().iter().enumerate() {
        let mut values = Vec::new();
        let mut groups = Vec::new();
        for (row, v) in matrix.column_observed(col) {
            values.push(v);
            groups.push(labeled.labels[row] as usize);
        }
        let result = match anova_f(&values, &groups) {
            Ok(r) => Some(r),
            Err(K3Error::AnovaGroups | K3Error::AnovaObservations) => None,
            Err(e) => return Err(e),
        };
        variables.push(VariableAnova { name: name.clone(), result });
    }

    let tested: Vec<f64> = variables.iter().filter_map(|v| v.result.map(|r| r.f)).collect();
    let min_f = tested.iter().copied().min_by(f64::total_cmp);
    let frac_above_threshold = (!tested.is_empty()).then(|| {
        tested.iter().filter(|&&f| f > opts.anova_threshold).count() as f64 / tested.len() as f64
    });

    let mut cluster_sizes = [0usize; K];
    for &label in &labeled.labels {
        cluster_sizes[label as usize - 1] += 1;
    }

    let blocks = block_k3(&labeled.labels, records);
    let diagnostics = K3Diagnostics {
        n_households: records.len(),
        medoids: labeled.assignment.medoids.clone(),
        cluster_sizes,
        objective: labeled.assignment.objective,
        dropped_columns: matrix.dropped().to_vec(),
        variables,
        anova_threshold: opts.anova_threshold,
        min_f,
        frac_above_threshold,
    };
    Ok(K3Output { blocks, labels: labeled.labels, diagnostics })
}
