//! Block-level correlation between geocoded building attributes and
//! the K3 index: class-proportion profiles, a Pearson correlation
//! matrix, per-class K3 means with trend lines, and the K3 histogram.

use std::collections::BTreeMap;

use crate::geocode::BuildingAttributeRecord;
use crate::k3::BlockK3;
use crate::taxonomy::AttributeKind;

#[derive(Debug, thiserror::Error)]
pub enum CorrelateError {
    #[error("correlation needs at least 2 joined blocks, got {0}")]
    TooFewRows(usize),
}

/// Names of the profile columns, `attribute:class`, in taxonomy order.
pub fn profile_columns() -> Vec<String> {
    AttributeKind::ALL
        .iter()
        .flat_map(|kind| kind.classes().iter().map(move |class| format!("{kind}:{class}")))
        .collect()
}

/// Per-block class proportions of the geocoded buildings. Each
/// attribute's proportions sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockProfile {
    pub block_id: String,
    pub n_buildings: usize,
    /// Aligned to [`profile_columns`].
    pub proportions: Vec<f64>,
}

/// Aggregate buildings into per-block profiles, sorted by block id.
pub fn block_profile(buildings: &[BuildingAttributeRecord]) -> Vec<BlockProfile> {
    let width: usize = AttributeKind::ALL.iter().map(|k| k.classes().len()).sum();
    let mut counts: BTreeMap<&str, (usize, Vec<usize>)> = BTreeMap::new();
    for b in buildings {
        let entry = counts.entry(b.block_id.as_str()).or_insert_with(|| (0, vec![0; width]));
        entry.0 += 1;
        let mut offset = 0;
        for kind in AttributeKind::ALL {
            entry.1[offset + b.class_index(kind)] += 1;
            offset += kind.classes().len();
        }
    }
    counts
        .into_iter()
        .map(|(block_id, (n, tallies))| BlockProfile {
            block_id: block_id.to_string(),
            n_buildings: n,
            proportions: tallies.iter().map(|&c| c as f64 / n as f64).collect(),
        })
        .collect()
}

/// Sample Pearson correlation; `None` when either side has zero
/// variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "vectors must have equal length");
    let n = x.len();
    if n < 2 {
        return None;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let mut cov = 0.0;
    let (mut vx, mut vy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

/// Blocks present in both the K3 output and the profiles, with the K3
/// column followed by every profile column.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedTable {
    pub block_ids: Vec<String>,
    pub column_names: Vec<String>,
    /// Column-major, aligned to `column_names`.
    pub columns: Vec<Vec<f64>>,
}

/// Inner-join blocks on block id, sorted by id.
pub fn join_blocks(blocks: &[BlockK3], profiles: &[BlockProfile]) -> JoinedTable {
    let k3_of: BTreeMap<&str, f64> = blocks.iter().map(|b| (b.block_id.as_str(), b.k3)).collect();
    let mut column_names = vec!["k3".to_string()];
    column_names.extend(profile_columns());
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); column_names.len()];
    let mut block_ids = Vec::new();
    for p in profiles {
        let Some(&k3) = k3_of.get(p.block_id.as_str()) else { continue };
        block_ids.push(p.block_id.clone());
        columns[0].push(k3);
        for (i, &v) in p.proportions.iter().enumerate() {
            columns[i + 1].push(v);
        }
    }
    JoinedTable { block_ids, column_names, columns }
}

/// Symmetric correlation matrix with unit diagonal; cells are `None`
/// where a column has zero variance.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

pub fn correlation_matrix(table: &JoinedTable) -> Result<CorrelationMatrix, CorrelateError> {
    let rows = table.block_ids.len();
    if rows < 2 {
        return Err(CorrelateError::TooFewRows(rows));
    }
    let k = table.columns.len();
    let mut cells = vec![vec![None; k]; k];
    for i in 0..k {
        cells[i][i] = Some(1.0);
        for j in (i + 1)..k {
            let r = pearson(&table.columns[i], &table.columns[j]);
            cells[i][j] = r;
            cells[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { names: table.column_names.clone(), cells })
}

/// K3 statistics of one attribute class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTrend {
    pub class: &'static str,
    pub rank: usize,
    pub n: usize,
    /// `None` when no building carries this class.
    pub mean_k3: Option<f64>,
}

/// Per-class mean K3 plus the least-squares line over (rank, mean).
#[derive(Debug, Clone, PartialEq)]
pub struct TrendSummary {
    pub attribute: AttributeKind,
    pub classes: Vec<ClassTrend>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

/// Documented class rank orders for the trend plots: construction from
/// unconfined to confined, condition from poor to good, use from
/// residential to mixed, material from light to masonry-like with the
/// rarely-seen classes appended.
pub fn default_class_order(kind: AttributeKind) -> Vec<&'static str> {
    match kind {
        AttributeKind::ConstructionType => vec!["unconfined", "confined"],
        AttributeKind::Condition => vec!["poor", "fair", "good"],
        AttributeKind::Use => vec!["residential", "non_residential", "mixed"],
        AttributeKind::Material => vec![
            "wood_polished",
            "wood_crude_plank",
            "corrugated_metal",
            "brick_or_concrete_block",
            "plaster",
            "mix_other_unclear",
            "adobe",
            "stone_with_mud_ashlar_with_lime_or_cement",
            "container_trailer",
            "plant_material",
        ],
    }
}

/// Buildings inherit their block's K3; classes with no buildings are
/// reported with a missing mean and excluded from the fit. The fit is
/// missing when fewer than two class means exist.
pub fn class_k3_trend(
    buildings: &[BuildingAttributeRecord],
    blocks: &[BlockK3],
    kind: AttributeKind,
    class_order: &[&'static str],
) -> TrendSummary {
    let k3_of: BTreeMap<&str, f64> = blocks.iter().map(|b| (b.block_id.as_str(), b.k3)).collect();
    let mut sums = vec![0.0f64; class_order.len()];
    let mut counts = vec![0usize; class_order.len()];
    for b in buildings {
        let Some(&k3) = k3_of.get(b.block_id.as_str()) else { continue };
        let class = kind.classes()[b.class_index(kind)];
        let Some(rank) = class_order.iter().position(|&c| c == class) else { continue };
        sums[rank] += k3;
        counts[rank] += 1;
    }
    let classes: Vec<ClassTrend> = class_order
        .iter()
        .enumerate()
        .map(|(rank, &class)| ClassTrend {
            class,
            rank,
            n: counts[rank],
            mean_k3: (counts[rank] > 0).then(|| sums[rank] / counts[rank] as f64),
        })
        .collect();

    let points: Vec<(f64, f64)> = classes
        .iter()
        .filter_map(|c| c.mean_k3.map(|m| (c.rank as f64, m)))
        .collect();
    let (slope, intercept) = ols_line(&points);
    TrendSummary { attribute: kind, classes, slope, intercept }
}

/// Ordinary least squares over (x, y) points; missing for fewer than
/// two points.
fn ols_line(points: &[(f64, f64)]) -> (Option<f64>, Option<f64>) {
    if points.len() < 2 {
        return (None, None);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in points {
        cov += (x - mx) * (y - my);
        var += (x - mx) * (x - mx);
    }
    if var == 0.0 {
        return (None, None);
    }
    let slope = cov / var;
    (Some(slope), Some(my - slope * mx))
}

/// Equal-width histogram over [lo, hi]; interior edges belong to the
/// upper bin, the final bin includes its right edge, and out-of-range
/// values land in the overflow counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
}

pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Histogram {
    assert!(bins >= 1, "need at least one bin");
    assert!(lo < hi, "lo must be below hi");
    let mut h = Histogram { lo, hi, counts: vec![0; bins], below: 0, above: 0 };
    for &v in values {
        if v < lo {
            h.below += 1;
        } else if v > hi {
            h.above += 1;
        } else {
            let idx = (((v - lo) / (hi - lo) * bins as f64).floor() as usize).min(bins - 1);
            h.counts[idx] += 1;
        }
    }
    h
}
