//! Summary statistics and the Friedman rank test used for method
//! comparison tables.

use crate::error::{Error, Result};

/// Max / min / mean / median / sample standard deviation, in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

impl SummaryStats {
    /// Statistics over the best objective per run. The median averages the
    /// middle pair for even counts; the standard deviation uses the n-1
    /// sample convention (0 for a single value).
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("summary needs at least one value"));
        }
        let n = values.len() as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / n;
        let median = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
        };
        let std = if sorted.len() > 1 {
            (sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Ok(SummaryStats {
            max: *sorted.last().expect("nonempty"),
            min: sorted[0],
            mean,
            median,
            std,
        })
    }
}

/// Friedman mean ranks (1 = best = highest objective) and the chi-square
/// statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct FriedmanResult {
    pub mean_ranks: Vec<f64>,
    pub chi_square: f64,
}

/// Ranks within each run across methods; ties receive averaged ranks.
/// `table[m][r]` is method m's objective in run r.
pub fn friedman_ranks(table: &[Vec<f64>]) -> Result<FriedmanResult> {
    let k = table.len();
    if k < 2 {
        return Err(Error::invalid("friedman needs at least two methods"));
    }
    let runs = table[0].len();
    if runs < 2 {
        return Err(Error::invalid("friedman needs at least two runs"));
    }
    if table.iter().any(|row| row.len() != runs) {
        return Err(Error::invalid("friedman table must be rectangular"));
    }

    let mut rank_sums = vec![0.0; k];
    for r in 0..runs {
        let column: Vec<f64> = table.iter().map(|row| row[r]).collect();
        for (m, rank) in average_ranks_desc(&column).into_iter().enumerate() {
            rank_sums[m] += rank;
        }
    }
    let mean_ranks: Vec<f64> = rank_sums.iter().map(|s| s / runs as f64).collect();

    let kf = k as f64;
    let nf = runs as f64;
    let center = (kf + 1.0) / 2.0;
    let chi_square = 12.0 * nf / (kf * (kf + 1.0))
        * mean_ranks.iter().map(|r| (r - center) * (r - center)).sum::<f64>();
    Ok(FriedmanResult {
        mean_ranks,
        chi_square,
    })
}

/// Descending ranks (1 = largest value) with ties averaged.
fn average_ranks_desc(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share the average of ranks i+1..=j+1
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn summary_examples() {
        let s = SummaryStats::from_values(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!((s.max, s.min, s.mean, s.median, s.std), (5.0, 5.0, 5.0, 5.0, 0.0));

        let s = SummaryStats::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.median, 2.5);

        // hand computation: sum of squared deviations 32, sample variance 32/7
        let s = SummaryStats::from_values(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(s.mean, 5.0);
        assert_relative_eq!(s.std, (32.0f64 / 7.0).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(s.std, 2.138, epsilon = 1e-3);
    }

    #[test]
    fn summary_rejects_empty() {
        assert!(SummaryStats::from_values(&[]).is_err());
    }

    #[test]
    fn friedman_total_order() {
        // method 0 beats method 1 in every run
        let table = vec![vec![10.0, 12.0, 11.0], vec![5.0, 6.0, 7.0]];
        let r = friedman_ranks(&table).unwrap();
        assert_eq!(r.mean_ranks, vec![1.0, 2.0]);
    }

    #[test]
    fn friedman_ties_are_averaged() {
        let table = vec![vec![10.0, 8.0], vec![10.0, 9.0]];
        let r = friedman_ranks(&table).unwrap();
        // run 0 ties both at 1.5; run 1 orders them 2, 1
        assert_eq!(r.mean_ranks, vec![1.75, 1.25]);
    }

    #[test]
    fn friedman_textbook_block_design() {
        // 3 methods x 4 runs, worked by hand:
        // runs rank columns: (1,2,3), (1,2,3), (2,1,3), (1,3,2)
        let table = vec![
            vec![9.0, 8.5, 7.0, 9.5],
            vec![8.0, 8.0, 7.5, 7.0],
            vec![6.0, 7.5, 6.0, 8.0],
        ];
        let r = friedman_ranks(&table).unwrap();
        assert_eq!(r.mean_ranks, vec![1.25, 2.0, 2.75]);
        // chi2 = 12*4/(3*4) * ((1.25-2)^2 + 0 + (2.75-2)^2) = 4.5
        assert_relative_eq!(r.chi_square, 4.5, epsilon = 1e-12);
    }

    #[test]
    fn friedman_rejects_ragged_or_tiny_tables() {
        assert!(friedman_ranks(&[vec![1.0, 2.0]]).is_err());
        assert!(friedman_ranks(&[vec![1.0], vec![2.0]]).is_err());
        assert!(friedman_ranks(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    proptest! {
        #[test]
        fn mean_ranks_average_to_center(
            k in 2usize..6,
            runs in 2usize..9,
            seed in 0u64..1000,
        ) {
            let mut rng = crate::rng::stream(seed, "friedman-prop");
            use rand::Rng;
            let table: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..runs).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let r = friedman_ranks(&table).unwrap();
            let mean: f64 = r.mean_ranks.iter().sum::<f64>() / k as f64;
            prop_assert!((mean - (k as f64 + 1.0) / 2.0).abs() < 1e-9);
            prop_assert!(r.chi_square >= -1e-12);
        }
    }
}
