//! One-way ANOVA F statistic, used to check that the three clusters
//! actually separate each standardized variable.

use super::K3Error;

/// F statistic with its degrees of freedom. `f` is `f64::INFINITY` when
/// within-group variance is exactly zero while group means differ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnovaF {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
}

/// One-way ANOVA over `values` partitioned by `groups` labels.
/// F = (SSB / (k-1)) / (SSW / (N-k)).
pub fn anova_f(values: &[f64], groups: &[usize]) -> Result<AnovaF, K3Error> {
    assert_eq!(values.len(), groups.len(), "one group label per value");
    let n = values.len();

    let mut labels: Vec<usize> = groups.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let k = labels.len();
    if k < 2 {
        return Err(K3Error::AnovaGroups);
    }
    if n <= k {
        return Err(K3Error::AnovaObservations);
    }

    let slot_of = |g: usize| labels.binary_search(&g).expect("label present");
    let mut sums = vec![0.0f64; k];
    let mut counts = vec![0usize; k];
    for (&v, &g) in values.iter().zip(groups) {
        let s = slot_of(g);
        sums[s] += v;
        counts[s] += 1;
    }
    let grand_mean = values.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();

    let ssb: f64 = means
        .iter()
        .zip(&counts)
        .map(|(m, &c)| c as f64 * (m - grand_mean) * (m - grand_mean))
        .sum();
    let ssw: f64 = values
        .iter()
        .zip(groups)
        .map(|(&v, &g)| {
            let m = means[slot_of(g)];
            (v - m) * (v - m)
        })
        .sum();

    let df_between = k - 1;
    let df_within = n - k;
    let f = if ssw == 0.0 {
        if ssb == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (ssb / df_between as f64) / (ssw / df_within as f64)
    };
    Ok(AnovaF { f, df_between, df_within })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn hand_computed_fixture() {
        // groups {0,1},{2,3},{4,5}: SSB=16, MSB=8, SSW=1.5, MSW=0.5
        let values = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let groups = [0, 0, 1, 1, 2, 2];
        let r = anova_f(&values, &groups).unwrap();
        assert!((r.f - 16.0).abs() < 1e-9);
        assert_eq!((r.df_between, r.df_within), (2, 3));
    }

    #[test]
    fn identical_values_give_zero_f() {
        let values = [2.0; 9];
        let groups = [0, 0, 0, 1, 1, 1, 2, 2, 2];
        let r = anova_f(&values, &groups).unwrap();
        assert_eq!(r.f, 0.0);
    }

    #[test]
    fn zero_within_variance_with_distinct_means_flags_infinity() {
        let values = [0.0, 0.0, 1.0, 1.0];
        let groups = [0, 0, 1, 1];
        let r = anova_f(&values, &groups).unwrap();
        assert!(r.f.is_infinite());
        assert_eq!((r.df_between, r.df_within), (1, 2));
    }

    #[test]
    fn single_group_is_an_error() {
        assert!(matches!(anova_f(&[1.0, 2.0], &[0, 0]), Err(K3Error::AnovaGroups)));
    }

    #[test]
    fn too_few_observations_is_an_error() {
        assert!(matches!(anova_f(&[1.0, 2.0], &[0, 1]), Err(K3Error::AnovaObservations)));
    }

    #[test]
    fn f_is_invariant_under_affine_transforms() {
        let mut rng = StdRng::seed_from_u64(13);
        for _ in 0..50 {
            let n = rng.gen_range(6..40);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let groups: Vec<usize> = (0..n).map(|i| i % 3).collect();
            let base = anova_f(&values, &groups).unwrap();
            let a = rng.gen_range(0.1..4.0) * if rng.gen_bool(0.5) { -1.0 } else { 1.0 };
            let b = rng.gen_range(-10.0..10.0);
            let mapped: Vec<f64> = values.iter().map(|v| a * v + b).collect();
            let scaled = anova_f(&mapped, &groups).unwrap();
            if base.f.is_finite() {
                assert!(
                    (base.f - scaled.f).abs() <= 1e-6 * base.f.abs().max(1.0),
                    "{} vs {}",
                    base.f,
                    scaled.f
                );
            } else {
                assert!(scaled.f.is_infinite());
            }
            assert_eq!((base.df_between, base.df_within), (scaled.df_between, scaled.df_within));
        }
    }
}
