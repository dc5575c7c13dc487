//! Diebold–Mariano comparison and forward feature-group selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::scoring::ScoreSeries;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const MIN_DM_LENGTH: usize = 10;

/// Bartlett-weighted long-run variance, floored at zero.
pub fn newey_west_lrv(d: &[f64], m: usize) -> Result<f64> {
    let t = d.len();
    if t < 2 {
        return Err(Error::domain("Newey-West needs at least 2 observations"));
    }
    if m >= t {
        return Err(Error::domain(format!("lag {m} must be below the series length {t}")));
    }
    let n = t as f64;
    let mean = d.iter().sum::<f64>() / n;
    let gamma = |j: usize| (j..t).map(|i| (d[i] - mean) * (d[i - j] - mean)).sum::<f64>() / n;
    let mut lrv = gamma(0);
    for j in 1..=m {
        lrv += 2.0 * (1.0 - j as f64 / (m + 1) as f64) * gamma(j);
    }
    Ok(lrv.max(0.0))
}

/// Lag rule floor(T^0.25).
pub fn dm_lag(t: usize) -> usize {
    (t as f64).powf(0.25).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// A has the lower mean loss.
    FavorsA,
    FavorsB,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub direction: Direction,
    pub mean_diff: f64,
    pub lag: usize,
    pub n: usize,
    /// Zero long-run variance with a non-zero mean difference.
    pub degenerate_variance: bool,
    /// Zero long-run variance and zero mean difference.
    pub no_decision: bool,
}

/// DM test on d = A − B with the Harvey small-sample factor (h = m + 1) and Student-t(T − 1).
pub fn dm_test(loss_a: &ScoreSeries, loss_b: &ScoreSeries, alpha: f64) -> Result<DmResult> {
    if loss_a.origins != loss_b.origins {
        let bad = loss_a
            .origins
            .iter()
            .zip(&loss_b.origins)
            .find(|(a, b)| a != b)
            .map(|(a, _)| *a)
            .or_else(|| loss_a.origins.get(loss_b.len()).or(loss_b.origins.get(loss_a.len())).copied());
        return match bad {
            Some(t) => Err(Error::Misaligned(t)),
            None => Err(Error::domain("loss series are not aligned")),
        };
    }
    let d: Vec<f64> = loss_a.values.iter().zip(&loss_b.values).map(|(a, b)| a - b).collect();
    dm_test_diff(&d, alpha)
}

pub fn dm_test_diff(d: &[f64], alpha: f64) -> Result<DmResult> {
    let t = d.len();
    if t < MIN_DM_LENGTH {
        return Err(Error::domain(format!("DM test needs at least {MIN_DM_LENGTH} origins, got {t}")));
    }
    let n = t as f64;
    let mean = d.iter().sum::<f64>() / n;
    let m = dm_lag(t);
    let lrv = newey_west_lrv(d, m)?;
    let direction = if mean < 0.0 {
        Direction::FavorsA
    } else if mean > 0.0 {
        Direction::FavorsB
    } else {
        Direction::Neither
    };
    let base = DmResult {
        statistic: 0.0,
        p_value: 1.0,
        reject: false,
        direction,
        mean_diff: mean,
        lag: m,
        n: t,
        degenerate_variance: false,
        no_decision: false,
    };
    if lrv == 0.0 {
        return Ok(if mean == 0.0 {
            DmResult { no_decision: true, ..base }
        } else {
            DmResult {
                statistic: mean.signum() * f64::INFINITY,
                p_value: 0.0,
                reject: true,
                degenerate_variance: true,
                ..base
            }
        });
    }
    let h = (m + 1) as f64;
    let harvey = ((n + 1.0 - 2.0 * h + h * (h - 1.0) / n) / n).sqrt();
    let statistic = harvey * mean / (lrv / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::domain(e.to_string()))?;
    let p_value = (2.0 * (1.0 - dist.cdf(statistic.abs()))).clamp(0.0, 1.0);
    Ok(DmResult {
        statistic,
        p_value,
        reject: p_value < alpha,
        ..base
    })
}

/// Produces per-origin validation losses for a candidate set of feature groups.
pub trait CandidateRunner: Sync {
    fn run(&self, groups: &[String]) -> Result<ScoreSeries>;
}

impl<F> CandidateRunner for F
where
    F: Fn(&[String]) -> Result<ScoreSeries> + Sync,
{
    fn run(&self, groups: &[String]) -> Result<ScoreSeries> {
        self(groups)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub step: usize,
    pub candidate: String,
    pub dm_statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub mean_diff: Option<f64>,
    pub adopted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected: Vec<String>,
    pub audit: Vec<AuditEntry>,
}

/// Greedy forward selection: adopt the significant candidate with the largest loss reduction.
pub fn forward_select(runner: &dyn CandidateRunner, groups: &[String], alpha: f64) -> Result<SelectionResult> {
    let mut selected: Vec<String> = Vec::new();
    let mut audit = Vec::new();
    if groups.is_empty() {
        return Ok(SelectionResult { selected, audit });
    }
    let mut current = runner.run(&selected)?;
    let mut step = 0;
    loop {
        let remaining: Vec<&String> = groups.iter().filter(|g| !selected.contains(g)).collect();
        if remaining.is_empty() {
            break;
        }
        let evaluated: Vec<(ScoreSeries, Result<DmResult>)> = remaining
            .par_iter()
            .map(|g| {
                let mut set = selected.clone();
                set.push((*g).clone());
                match runner.run(&set) {
                    Ok(loss) => {
                        let (a, b) = loss.align(&current);
                        let dm = dm_test(&a, &b, alpha);
                        (loss, dm)
                    }
                    Err(e) => (current.clone(), Err(e)),
                }
            })
            .collect();
        let mut best: Option<(usize, f64)> = None;
        let first_entry = audit.len();
        for (i, (g, (_, dm))) in remaining.iter().zip(&evaluated).enumerate() {
            match dm {
                Ok(r) => {
                    audit.push(AuditEntry {
                        step,
                        candidate: (*g).clone(),
                        dm_statistic: Some(r.statistic),
                        p_value: Some(r.p_value),
                        mean_diff: Some(r.mean_diff),
                        adopted: false,
                        error: None,
                    });
                    let improves = r.reject && r.mean_diff < 0.0;
                    if improves && best.is_none_or(|(_, d)| r.mean_diff.abs() > d) {
                        best = Some((i, r.mean_diff.abs()));
                    }
                }
                Err(e) => {
                    log::warn!("candidate {g} skipped: {e}");
                    audit.push(AuditEntry {
                        step,
                        candidate: (*g).clone(),
                        dm_statistic: None,
                        p_value: None,
                        mean_diff: None,
                        adopted: false,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
        let Some((i, _)) = best else { break };
        audit[first_entry + i].adopted = true;
        selected.push(remaining[i].clone());
        current = evaluated.into_iter().nth(i).expect("evaluated candidate").0;
        step += 1;
    }
    Ok(SelectionResult { selected, audit })
}

/// Selection implied by an audit trail.
pub fn replay(audit: &[AuditEntry]) -> Vec<String> {
    audit.iter().filter(|e| e.adopted).map(|e| e.candidate.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, TimeZone, Utc};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn series(values: Vec<f64>) -> ScoreSeries {
        let t0 = Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap();
        let origins = (0..values.len()).map(|i| t0 + Duration::days(i as i64)).collect();
        ScoreSeries::new("crps", origins, values).unwrap()
    }

    #[test]
    fn newey_west_examples() {
        assert_eq!(newey_west_lrv(&[1.0, -1.0, 1.0, -1.0], 1).unwrap(), 0.25);
        let d = [1.0, 4.0, 2.0, 8.0];
        let mean = 3.75;
        let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert!((newey_west_lrv(&d, 0).unwrap() - var).abs() < 1e-12);
        assert_eq!(newey_west_lrv(&[2.0; 5], 2).unwrap(), 0.0);
        assert!(newey_west_lrv(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn newey_west_iid_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = Normal::new(0.0, 1.0).unwrap();
        let d: Vec<f64> = (0..10000).map(|_| n.sample(&mut rng)).collect();
        assert!((newey_west_lrv(&d, 5).unwrap() - 1.0).abs() < 0.1);
    }

    #[test]
    fn equal_losses_give_no_decision() {
        let a = series(vec![1.0; 30]);
        let r = dm_test(&a, &a, 0.05).unwrap();
        assert!(r.no_decision && !r.reject);
        let b = series(vec![2.0; 30]);
        let r = dm_test(&a, &b, 0.05).unwrap();
        assert!(r.degenerate_variance && r.reject && r.p_value == 0.0);
        assert_eq!(r.direction, Direction::FavorsA);
    }

    #[test]
    fn short_series_rejected() {
        assert!(dm_test_diff(&[1.0; 9], 0.05).is_err());
    }

    proptest! {
        #[test]
        fn antisymmetric_and_shift_invariant(a in prop::collection::vec(0f64..10.0, 12..60), seed in 0u64..1000, c in -50f64..50.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = Normal::new(0.0, 1.0).unwrap();
            let b: Vec<f64> = a.iter().map(|x| x + n.sample(&mut rng)).collect();
            let (sa, sb) = (series(a.clone()), series(b.clone()));
            let ab = dm_test(&sa, &sb, 0.05).unwrap();
            let ba = dm_test(&sb, &sa, 0.05).unwrap();
            prop_assert_eq!(ab.statistic, -ba.statistic);
            let shifted = dm_test(&series(a.iter().map(|x| x + c).collect()), &series(b.iter().map(|x| x + c).collect()), 0.05).unwrap();
            prop_assert!((shifted.statistic - ab.statistic).abs() <= 1e-6 * (1.0 + ab.statistic.abs()));
        }
    }

    #[test]
    fn empty_group_list_makes_no_calls() {
        let runner = |_: &[String]| -> Result<ScoreSeries> { panic!("runner must not be called") };
        let r = forward_select(&runner, &[], 0.05).unwrap();
        assert!(r.selected.is_empty() && r.audit.is_empty());
    }

    /// Losses fall by 1 for the informative group and get fresh noise otherwise.
    fn synthetic_runner(informative: Option<&'static str>) -> impl Fn(&[String]) -> Result<ScoreSeries> + Sync {
        move |groups: &[String]| {
            let key: u64 = groups.iter().map(|g| g.bytes().map(u64::from).sum::<u64>()).sum::<u64>() + groups.len() as u64 * 7919;
            let mut rng = ChaCha8Rng::seed_from_u64(key);
            let n = Normal::new(0.0, 1.0).unwrap();
            let gain = if informative.is_some_and(|g| groups.iter().any(|x| x == g)) { 1.0 } else { 0.0 };
            Ok(series((0..200).map(|_| 5.0 + n.sample(&mut rng) - gain).collect()))
        }
    }

    #[test]
    fn informative_group_is_adopted_first() {
        let groups: Vec<String> = ["R1", "R2", "R3", "R4", "R5"].iter().map(|s| s.to_string()).collect();
        let r = forward_select(&synthetic_runner(Some("R3")), &groups, 0.01).unwrap();
        assert_eq!(r.selected.first().map(String::as_str), Some("R3"));
        assert_eq!(replay(&r.audit), r.selected);
    }

    #[test]
    fn noise_groups_are_rarely_adopted() {
        let groups: Vec<String> = ["R1", "R2", "R3", "R4", "R5"].iter().map(|s| s.to_string()).collect();
        let r = forward_select(&synthetic_runner(None), &groups, 0.01).unwrap();
        assert!(r.selected.is_empty(), "{:?}", r.selected);
        assert_eq!(r.audit.len(), 5);
    }

    #[test]
    fn failing_candidate_is_recorded() {
        let runner = |groups: &[String]| -> Result<ScoreSeries> {
            if groups.iter().any(|g| g == "bad") {
                Err(Error::domain("boom"))
            } else {
                Ok(series(vec![1.0; 20]))
            }
        };
        let r = forward_select(&runner, &["bad".to_string()], 0.05).unwrap();
        assert!(r.audit[0].error.is_some());
        assert!(r.selected.is_empty());
    }
}
