//! Scoring rules on single forecasts.

use crate::error::{Error, Result};
use crate::forecast::check_levels;

/// Default ECE evaluation levels: 0.01, 0.02, ..., 0.99.
pub fn default_ece_levels() -> Vec<f64> {
    (1..=99).map(|i| i as f64 / 100.0).collect()
}

/// Pinball loss ρ_τ(u) = u·(τ − 1{u<0}).
#[inline]
pub fn pinball(tau: f64, u: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

/// Shared all-pairs energy form: mean d(x, y)^β − (1/2S²) ΣΣ d(x_i, x_j)^β.
fn energy_form<T: ?Sized, I: AsRef<T>>(items: &[I], obs: &T, dist: impl Fn(&T, &T) -> f64, beta: f64) -> f64 {
    let pow = |d: f64| if beta == 1.0 { d } else { d.powf(beta) };
    let s = items.len() as f64;
    let mut to_obs = 0.0;
    for x in items {
        to_obs += pow(dist(x.as_ref(), obs));
    }
    let mut pairs = 0.0;
    for x in items {
        for y in items {
            pairs += pow(dist(x.as_ref(), y.as_ref()));
        }
    }
    (to_obs / s - pairs / (2.0 * s * s)).max(0.0)
}

fn norm(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        (a[0] - b[0]).abs()
    } else {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }
}

/// All-pairs ensemble CRPS.
pub fn crps_ensemble(samples: &[f64], obs: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("CRPS of an empty ensemble"));
    }
    let rows: Vec<[f64; 1]> = samples.iter().map(|x| [*x]).collect();
    Ok(energy_form::<[f64], _>(&rows, &[obs][..], norm, 1.0))
}

/// Energy score of trajectories `samples[s]` (each of length m) against `obs`.
pub fn energy_score<R: AsRef<[f64]>>(samples: &[R], obs: &[f64], beta: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("energy score of an empty ensemble"));
    }
    if !(beta > 0.0 && beta < 2.0) {
        return Err(Error::domain(format!("beta {beta} outside (0, 2)")));
    }
    if let Some(bad) = samples.iter().find(|r| r.as_ref().len() != obs.len()) {
        return Err(Error::Shape {
            expected: obs.len(),
            actual: bad.as_ref().len(),
        });
    }
    if obs.is_empty() {
        return Err(Error::domain("energy score needs m >= 1"));
    }
    Ok(energy_form::<[f64], _>(samples, obs, norm, beta))
}

/// Twice the mean pinball loss over the level grid. Approximates CRPS; the gap
/// closes as the grid densifies.
pub fn crps_quantile(levels: &[f64], values: &[f64], obs: f64) -> Result<f64> {
    if levels.len() != values.len() {
        return Err(Error::Shape {
            expected: levels.len(),
            actual: values.len(),
        });
    }
    if levels.is_empty() {
        return Err(Error::Empty("quantile levels"));
    }
    check_levels(levels)?;
    if let Some(i) = (1..values.len()).find(|&i| values[i] < values[i - 1]) {
        return Err(Error::Crossing { index: i });
    }
    let total: f64 = levels.iter().zip(values).map(|(t, v)| pinball(*t, obs - v)).sum();
    Ok(2.0 * total / levels.len() as f64)
}

/// (#below + ½·#equal) / S.
pub fn pit_ensemble(samples: &[f64], obs: f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut below = 0.0;
    for x in samples {
        if *x < obs {
            below += 1.0;
        } else if *x == obs {
            below += 0.5;
        }
    }
    below / samples.len() as f64
}

/// Level at `obs` by linear interpolation along a monotone quantile curve,
/// clipped to the outer levels. On a flat run equal to `obs` the midpoint level is used.
pub fn pit_quantile(levels: &[f64], values: &[f64], obs: f64) -> f64 {
    let n = levels.len();
    if n == 0 {
        return f64::NAN;
    }
    if obs < values[0] {
        return levels[0];
    }
    if obs > values[n - 1] {
        return levels[n - 1];
    }
    let first_ge = values.partition_point(|v| *v < obs);
    if values[first_ge] == obs {
        let last_eq = values.partition_point(|v| *v <= obs) - 1;
        return 0.5 * (levels[first_ge] + levels[last_eq]);
    }
    let (i, j) = (first_ge - 1, first_ge);
    let w = (obs - values[i]) / (values[j] - values[i]);
    levels[i] + w * (levels[j] - levels[i])
}

/// Mean |fraction of PIT ≤ p − p| over the evaluation levels.
pub fn ece(pit: &[f64], levels: &[f64]) -> Result<f64> {
    if pit.is_empty() {
        return Err(Error::Empty("PIT values"));
    }
    if levels.is_empty() {
        return Err(Error::Empty("ECE levels"));
    }
    if levels.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(Error::domain("ECE levels must lie in (0, 1)"));
    }
    let mut sorted = pit.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let dev: f64 = levels
        .iter()
        .map(|p| {
            let count = sorted.partition_point(|u| u <= p) as f64;
            (count / n - p).abs()
        })
        .sum();
    Ok(dev / levels.len() as f64)
}

/// Kolmogorov–Smirnov distance between the PIT sample and U(0, 1).
pub fn ks_uniform(pit: &[f64]) -> Result<f64> {
    if pit.is_empty() {
        return Err(Error::Empty("PIT values"));
    }
    let mut sorted = pit.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let u = u.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - u).max(u - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exact integral of (F_emp(u) − 1{u ≥ y})² over the real line.
    fn crps_integral(samples: &[f64], y: f64) -> f64 {
        let mut knots: Vec<f64> = samples.to_vec();
        knots.push(y);
        knots.sort_by(f64::total_cmp);
        let s = samples.len() as f64;
        let mut total = 0.0;
        for w in knots.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let f = samples.iter().filter(|x| **x <= mid).count() as f64 / s;
            let step = if mid >= y { 1.0 } else { 0.0 };
            total += (f - step).powi(2) * (w[1] - w[0]);
        }
        total
    }

    #[test]
    fn worked_examples() {
        assert_eq!(crps_ensemble(&[3.0], 3.0).unwrap(), 0.0);
        assert_eq!(crps_ensemble(&[0.0, 2.0], 1.0).unwrap(), 0.5);
        assert_eq!(crps_ensemble(&[5.0], 2.0).unwrap(), 3.0);
        assert!(crps_ensemble(&[], 2.0).is_err());
        assert_eq!(crps_integral(&[0.0, 2.0], 1.0), 0.5);
        let es = energy_score(&[[0.0, 0.0], [2.0, 0.0]], &[1.0, 0.0], 1.0).unwrap();
        assert_eq!(es, 0.5);
        assert_eq!(crps_quantile(&[0.5], &[4.0], 1.5).unwrap(), 2.5);
        assert_eq!(crps_quantile(&[0.1, 0.5, 0.9], &[2.0, 2.0, 2.0], 2.0).unwrap(), 0.0);
    }

    #[test]
    fn matches_integral_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let s = rng.gen_range(1..=10);
            let xs: Vec<f64> = (0..s).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let y = rng.gen_range(-60.0..60.0);
            let a = crps_ensemble(&xs, y).unwrap();
            assert!((a - crps_integral(&xs, y)).abs() < 1e-6);
        }
    }

    #[test]
    fn energy_score_reduces_to_crps_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s = rng.gen_range(1..40);
            let xs: Vec<f64> = (0..s).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let rows: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x]).collect();
            let y = rng.gen_range(-100.0..100.0);
            let es = energy_score(&rows, &[y], 1.0).unwrap();
            assert_eq!(es.to_bits(), crps_ensemble(&xs, y).unwrap().to_bits());
        }
    }

    #[test]
    fn energy_score_rejects_mismatch() {
        assert!(energy_score(&[vec![1.0, 2.0]], &[1.0], 1.0).is_err());
        assert!(energy_score(&[vec![1.0]], &[1.0], 2.0).is_err());
    }

    #[test]
    fn crossing_quantiles_rejected() {
        let err = crps_quantile(&[0.1, 0.5, 0.9], &[1.0, 3.0, 2.0], 0.0).unwrap_err();
        assert!(matches!(err, Error::Crossing { index: 2 }));
    }

    #[test]
    fn pit_rules() {
        assert_eq!(pit_ensemble(&[1.0, 2.0, 3.0], 0.0), 0.0);
        assert_eq!(pit_ensemble(&[1.0, 2.0, 3.0], 2.0), 0.5);
        assert_eq!(pit_ensemble(&[1.0, 2.0, 3.0], 9.0), 1.0);
        let lv = [0.1, 0.5, 0.9];
        assert_eq!(pit_quantile(&lv, &[0.0, 1.0, 2.0], -5.0), 0.1);
        assert_eq!(pit_quantile(&lv, &[0.0, 1.0, 2.0], 5.0), 0.9);
        assert!((pit_quantile(&lv, &[0.0, 1.0, 2.0], 1.5) - 0.7).abs() < 1e-12);
        assert_eq!(pit_quantile(&lv, &[1.0, 1.0, 1.0], 1.0), 0.5);
    }

    #[test]
    fn ece_examples() {
        let pit: Vec<f64> = (0..100).map(|i| 0.005 + i as f64 * 0.01).collect();
        let deciles: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        assert!(ece(&pit, &deciles).unwrap() < 0.01);
        assert_eq!(ece(&[0.0; 8], &[0.5]).unwrap(), 0.5);
        assert!(ece(&[], &[0.5]).is_err());
    }

    #[test]
    fn calibrated_pit_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pit: Vec<f64> = (0..5000)
            .map(|_| {
                let xs: Vec<f64> = (0..99).map(|_| rng.gen::<f64>()).collect();
                pit_ensemble(&xs, rng.gen())
            })
            .collect();
        assert!(ks_uniform(&pit).unwrap() < 0.05);
    }

    #[test]
    fn ece_shrinks_with_sample_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let levels = default_ece_levels();
        let e: Vec<f64> = [100, 1000, 10000]
            .iter()
            .map(|n| {
                let pit: Vec<f64> = (0..*n).map(|_| rng.gen()).collect();
                ece(&pit, &levels).unwrap()
            })
            .collect();
        assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
        assert!(e[2] < 0.02);
    }

    proptest! {
        #[test]
        fn crps_invariances(xs in prop::collection::vec(-1e3f64..1e3, 1..20), y in -1e3f64..1e3,
                            c in -1e3f64..1e3, a in 0.01f64..100.0) {
            let base = crps_ensemble(&xs, y).unwrap();
            prop_assert!(base >= 0.0);
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            prop_assert!((crps_ensemble(&shifted, y + c).unwrap() - base).abs() <= 1e-9 * (1.0 + base) + 1e-9 * c.abs());
            let scaled: Vec<f64> = xs.iter().map(|x| x * a).collect();
            prop_assert!((crps_ensemble(&scaled, y * a).unwrap() - a * base).abs() <= 1e-9 * (1.0 + a * base));
        }

        #[test]
        fn energy_zero_only_at_obs(obs in prop::collection::vec(-10f64..10.0, 1..5), s in 1usize..8,
                                   eps in 1e-3f64..1.0, k in 0usize..5) {
            let same: Vec<Vec<f64>> = vec![obs.clone(); s];
            prop_assert_eq!(energy_score(&same, &obs, 1.0).unwrap(), 0.0);
            let mut moved = same.clone();
            moved[0][k % obs.len()] += eps;
            prop_assert!(energy_score(&moved, &obs, 1.0).unwrap() > 0.0);
        }
    }
}
