//! Variable standardization: every census variable is mapped onto
//! [0, 1] and oriented so that higher always means better off.
//!
//! Binary values stay 0/1, percentages are divided by 100, then each
//! column is min-max rescaled over its observed entries. Columns marked
//! higher-is-worse are flipped (x -> 1 - x). Constant columns carry no
//! information for the clustering and are dropped.

use crate::ingest::{CensusSchema, HouseholdRecord, Polarity, VariableKind};

use super::K3Error;

/// Row-major matrix of standardized cells; NaN encodes a missing
/// observation. Every non-missing cell is in [0, 1].
#[derive(Debug, Clone)]
pub struct StandardizedMatrix {
    n_rows: usize,
    names: Vec<String>,
    dropped: Vec<String>,
    data: Vec<f64>,
}

impl StandardizedMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    /// Kept column names, in schema order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Names of constant columns that were dropped.
    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.data[row * self.names.len() + col];
        (!v.is_nan()).then_some(v)
    }

    /// Raw row slice; NaN cells are missing.
    pub fn row(&self, row: usize) -> &[f64] {
        let w = self.names.len();
        &self.data[row * w..(row + 1) * w]
    }

    /// Non-missing values of one column together with their row indices.
    pub fn column_observed(&self, col: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n_rows).filter_map(move |r| self.get(r, col).map(|v| (r, v)))
    }

    /// Assemble a matrix from already-standardized cells. Every
    /// non-missing cell must be in [0, 1].
    pub fn from_cells(rows: &[Vec<Option<f64>>]) -> StandardizedMatrix {
        let n_rows = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * width);
        for row in rows {
            assert_eq!(row.len(), width, "ragged rows");
            for cell in row {
                match cell {
                    None => data.push(f64::NAN),
                    Some(v) => {
                        assert!((0.0..=1.0).contains(v), "cell {v} outside [0, 1]");
                        data.push(*v);
                    }
                }
            }
        }
        StandardizedMatrix {
            n_rows,
            names: (0..width).map(|i| format!("v{i}")).collect(),
            dropped: Vec::new(),
            data,
        }
    }
}

/// Standardize household records against their schema. Errors if a
/// column has no observed values at all; constant columns are dropped
/// and reported via [`StandardizedMatrix::dropped`].
pub fn standardize(
    records: &[HouseholdRecord],
    schema: &CensusSchema,
) -> Result<StandardizedMatrix, K3Error> {
    if records.is_empty() {
        return Err(K3Error::Empty);
    }
    let n_vars = schema.variables.len();
    for r in records {
        if r.values.len() != n_vars {
            return Err(K3Error::RowWidth {
                household_id: r.household_id.clone(),
                got: r.values.len(),
                expected: n_vars,
            });
        }
    }

    let n = records.len();
    let mut names = Vec::new();
    let mut dropped = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();

    for (k, var) in schema.variables.iter().enumerate() {
        let mut col: Vec<f64> = records
            .iter()
            .map(|r| match r.values[k] {
                None => f64::NAN,
                Some(v) => match var.kind {
                    VariableKind::Binary => v,
                    VariableKind::Percentage => v / 100.0,
                },
            })
            .collect();

        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in &col {
            if !v.is_nan() {
                min = min.min(v);
                max = max.max(v);
            }
        }
        if min > max {
            return Err(K3Error::AllMissing { column: var.name.clone() });
        }
        if min == max {
            dropped.push(var.name.clone());
            continue;
        }
        let span = max - min;
        for v in col.iter_mut() {
            if !v.is_nan() {
                *v = (*v - min) / span;
                if var.polarity == Polarity::HigherIsWorse {
                    *v = 1.0 - *v;
                }
            }
        }
        names.push(var.name.clone());
        columns.push(col);
    }

    let mut data = vec![0.0; n * names.len()];
    for (c, col) in columns.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            data[r * names.len() + c] = v;
        }
    }
    Ok(StandardizedMatrix { n_rows: n, names, dropped, data })
}
