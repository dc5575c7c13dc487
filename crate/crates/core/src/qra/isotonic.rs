use crate::error::{Error, Result};
use crate::forecast::{check_levels, QuantileForecast};

/// L2 projection onto non-decreasing sequences (pool adjacent violators, uniform weights).
pub fn isotonic_repair(values: &[f64]) -> Vec<f64> {
    // Each block: (sum, count).
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for v in values {
        blocks.push((*v, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / n0 as f64 <= s1 / n1 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().expect("two blocks") = (s0 + s1, n0 + n1);
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for (s, n) in blocks {
        out.extend(std::iter::repeat_n(s / n as f64, n));
    }
    out
}

/// The uniform level grid {(i + 0.5)/n}.
pub fn uniform_levels(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

/// Piecewise-linear value at `level`, flat beyond the outer levels.
pub fn interpolate_level(levels: &[f64], values: &[f64], level: f64) -> f64 {
    let n = levels.len();
    if n == 1 || level <= levels[0] {
        return values[0];
    }
    if level >= levels[n - 1] {
        return values[n - 1];
    }
    let j = levels.partition_point(|l| *l <= level);
    let i = j - 1;
    let w = (level - levels[i]) / (levels[j] - levels[i]);
    values[i] + w * (values[j] - values[i])
}

/// Re-expresses a monotone quantile forecast on the uniform grid of `n` levels.
pub fn interpolate_quantiles(forecast: &QuantileForecast, n: usize) -> Result<QuantileForecast> {
    if n == 0 {
        return Err(Error::domain("target grid must have at least one level"));
    }
    check_levels(&forecast.levels)?;
    let target = uniform_levels(n);
    let horizon = forecast.horizon();
    let mut values = vec![vec![0.0; horizon]; n];
    for h in 0..horizon {
        let col = forecast.column(h);
        if let Some(i) = (1..col.len()).find(|&i| col[i] < col[i - 1]) {
            return Err(Error::Crossing { index: i });
        }
        for (q, level) in target.iter().enumerate() {
            values[q][h] = interpolate_level(&forecast.levels, &col, *level);
        }
    }
    QuantileForecast::new(forecast.origin, target, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        assert_eq!(isotonic_repair(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(isotonic_repair(&[3.0, 1.0, 2.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(isotonic_repair(&[2.0, 1.0]), vec![1.5, 1.5]);
        assert_eq!(isotonic_repair(&[]), Vec::<f64>::new());
    }

    #[test]
    fn interpolation_examples() {
        assert_eq!(interpolate_level(&[0.25, 0.75], &[0.0, 1.0], 0.5), 0.5);
        assert_eq!(interpolate_level(&[0.25, 0.75], &[0.0, 1.0], 0.1), 0.0);
        assert_eq!(interpolate_level(&[0.25, 0.75], &[0.0, 1.0], 0.9), 1.0);
        assert_eq!(interpolate_level(&[0.5], &[7.0], 0.9), 7.0);
        let o = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        let f = QuantileForecast::new(o, vec![0.5], vec![vec![3.0; 24]]).unwrap();
        let g = interpolate_quantiles(&f, 200).unwrap();
        assert!(g.values.iter().all(|r| r.iter().all(|v| *v == 3.0)));
        assert_eq!(g.levels[0], 0.0025);
    }

    proptest! {
        #[test]
        fn pava_is_monotone_idempotent_and_mean_preserving(v in prop::collection::vec(-100f64..100.0, 1..40)) {
            let r = isotonic_repair(&v);
            prop_assert!(r.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(isotonic_repair(&r), r.clone());
            let m0 = v.iter().sum::<f64>() / v.len() as f64;
            let m1 = r.iter().sum::<f64>() / r.len() as f64;
            prop_assert!((m0 - m1).abs() < 1e-9);
        }

        #[test]
        fn dense_grid_is_monotone(raw in prop::collection::vec(-50f64..50.0, 1..9)) {
            let mut vals = raw.clone();
            vals.sort_by(f64::total_cmp);
            let levels: Vec<f64> = (0..vals.len()).map(|i| (i as f64 + 1.0) / (vals.len() as f64 + 1.0)).collect();
            let o = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
            let f = QuantileForecast::new(o, levels, vals.iter().map(|v| vec![*v]).collect()).unwrap();
            let g = interpolate_quantiles(&f, 200).unwrap();
            prop_assert!(g.is_monotone());
        }
    }
}
