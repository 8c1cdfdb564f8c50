//! Gower dissimilarity over standardized records.
//!
//! With every variable rescaled to range 1, Gower similarity reduces to
//! 1 minus the mean absolute difference over the variables both
//! households observe. We store the dissimilarity d = 1 - s directly.

use rayon::prelude::*;

use super::standardize::StandardizedMatrix;
use super::K3Error;

/// Symmetric N x N dissimilarity matrix with zero diagonal, every cell
/// in [0, 1].
#[derive(Debug, Clone)]
pub struct GowerMatrix {
    n: usize,
    data: Vec<f64>,
}

impl GowerMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Build directly from a full square buffer. Intended for tests and
    /// synthetic inputs; `data` must be symmetric with zero diagonal.
    pub fn from_square(n: usize, data: Vec<f64>) -> GowerMatrix {
        assert_eq!(data.len(), n * n, "square matrix expected");
        GowerMatrix { n, data }
    }
}

#[inline]
fn pair_distance(a: &[f64], b: &[f64]) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0u32;
    for (&x, &y) in a.iter().zip(b) {
        let d = (x - y).abs();
        // NaN marks a missing cell on either side; NaN comparisons are false
        if d.is_nan() {
            continue;
        }
        sum += d;
        count += 1;
    }
    (count > 0).then(|| sum / f64::from(count))
}

/// Compute the pairwise Gower dissimilarity matrix. Variables missing
/// on either side of a pair are skipped (pairwise deletion); a pair
/// with no mutually observed variable is an error.
pub fn gower(m: &StandardizedMatrix) -> Result<GowerMatrix, K3Error> {
    if m.n_cols() == 0 {
        return Err(K3Error::NoVariables);
    }
    let n = m.n_rows();

    // upper-triangle rows computed independently; per-cell results are
    // summation-order-fixed, so the output is thread-count independent
    let tails: Vec<Vec<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row_i = m.row(i);
            ((i + 1)..n).map(|j| pair_distance(row_i, m.row(j))).collect()
        })
        .collect();

    let mut data = vec![0.0; n * n];
    for (i, tail) in tails.iter().enumerate() {
        for (off, cell) in tail.iter().enumerate() {
            let j = i + 1 + off;
            let d = cell.ok_or(K3Error::DisjointPair { i, j })?;
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    Ok(GowerMatrix { n, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{CensusSchema, CensusVariable, HouseholdRecord, Polarity, VariableKind};
    use crate::k3::standardize::standardize;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn binary_schema(width: usize) -> CensusSchema {
        CensusSchema {
            variables: (0..width)
                .map(|i| CensusVariable {
                    name: format!("v{i}"),
                    kind: VariableKind::Binary,
                    polarity: Polarity::HigherIsBetter,
                })
                .collect(),
        }
    }

    fn matrix_of(rows: &[Vec<Option<f64>>]) -> StandardizedMatrix {
        let schema = binary_schema(rows[0].len());
        let records: Vec<HouseholdRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, values)| HouseholdRecord {
                household_id: format!("h{i}"),
                block_id: "b".into(),
                values: values.clone(),
            })
            .collect();
        standardize(&records, &schema).unwrap()
    }

    #[test]
    fn identical_rows_have_zero_distance() {
        let m = StandardizedMatrix::from_cells(&[
            vec![Some(1.0), Some(0.0), Some(1.0)],
            vec![Some(1.0), Some(0.0), Some(1.0)],
            vec![Some(0.0), Some(1.0), Some(0.0)],
        ]);
        let g = gower(&m).unwrap();
        assert_eq!(g.get(0, 1), 0.0);
        assert_eq!(g.get(0, 0), 0.0);
    }

    #[test]
    fn opposite_rows_have_unit_distance() {
        let m = StandardizedMatrix::from_cells(&[
            vec![Some(0.0), Some(0.0), Some(0.0), Some(0.0)],
            vec![Some(1.0), Some(1.0), Some(1.0), Some(1.0)],
        ]);
        let g = gower(&m).unwrap();
        assert_eq!(g.get(0, 1), 1.0);
    }

    #[test]
    fn half_differing_rows_have_half_distance() {
        let m = StandardizedMatrix::from_cells(&[
            vec![Some(1.0), Some(0.0), Some(1.0), Some(0.0)],
            vec![Some(1.0), Some(1.0), Some(1.0), Some(1.0)],
        ]);
        let g = gower(&m).unwrap();
        assert_eq!(g.get(0, 1), 0.5);
    }

    #[test]
    fn disjoint_pair_is_an_error() {
        let m = StandardizedMatrix::from_cells(&[
            vec![Some(1.0), None, Some(0.0)],
            vec![None, Some(1.0), None],
            vec![Some(0.0), Some(0.0), Some(0.0)],
        ]);
        // rows 0 and 1 share no observed column
        match gower(&m) {
            Err(K3Error::DisjointPair { i: 0, j: 1 }) => {}
            other => panic!("expected disjoint pair error, got {other:?}"),
        }
    }

    #[test]
    fn matches_naive_double_loop_on_random_mixed_data() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..10 {
            let n = rng.gen_range(2..=60);
            let w = rng.gen_range(1..=26);
            let rows: Vec<Vec<Option<f64>>> = (0..n)
                .map(|_| {
                    (0..w)
                        .map(|c| {
                            // column 0 always observed so no pair is disjoint
                            if c > 0 && rng.gen_bool(0.10) {
                                None
                            } else if rng.gen_bool(0.5) {
                                Some(if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
                            } else {
                                Some(rng.gen_range(0.0..=1.0))
                            }
                        })
                        .collect()
                })
                .collect();
            let m = matrix_of(&rows);
            let g = gower(&m).unwrap();

            // independent oracle over the standardized cells
            for i in 0..n {
                for j in 0..n {
                    let mut sum = 0.0;
                    let mut cnt = 0.0;
                    for c in 0..m.n_cols() {
                        if let (Some(a), Some(b)) = (m.get(i, c), m.get(j, c)) {
                            sum += (a - b).abs();
                            cnt += 1.0;
                        }
                    }
                    let expected = sum / cnt;
                    assert!(
                        (g.get(i, j) - expected).abs() < 1e-12,
                        "cell ({i},{j}): {} vs {expected}",
                        g.get(i, j)
                    );
                }
            }
        }
    }

    #[test]
    fn symmetry_zero_diagonal_and_range_hold() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.gen_range(2..=40);
            let w = rng.gen_range(1..=10);
            let rows: Vec<Vec<Option<f64>>> = (0..n)
                .map(|_| {
                    (0..w)
                        .map(|c| {
                            if c > 0 && rng.gen_bool(0.15) {
                                None
                            } else {
                                Some(rng.gen_range(0.0..=1.0))
                            }
                        })
                        .collect()
                })
                .collect();
            let g = gower(&matrix_of(&rows)).unwrap();
            for i in 0..n {
                assert_eq!(g.get(i, i), 0.0);
                for j in 0..n {
                    assert_eq!(g.get(i, j), g.get(j, i));
                    assert!((0.0..=1.0).contains(&g.get(i, j)));
                }
            }
        }
    }

    #[test]
    fn triangle_inequality_holds_for_fully_observed_rows() {
        let mut rng = StdRng::seed_from_u64(5);
        let n = 25;
        let rows: Vec<Vec<Option<f64>>> =
            (0..n).map(|_| (0..8).map(|_| Some(rng.gen_range(0.0..=1.0))).collect()).collect();
        let g = gower(&matrix_of(&rows)).unwrap();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    assert!(g.get(i, k) <= g.get(i, j) + g.get(j, k) + 1e-12);
                }
            }
        }
    }
}
