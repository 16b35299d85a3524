use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{validate_slot, Job, SubstrateNetwork};
use crate::scheduler::{objective, RunResult};

/// Summary of one online run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub policy: String,
    pub seed: u64,
    pub total_utility: f64,
    /// Embedded jobs over active jobs, `None` for slots with nobody active.
    pub embedded_ratio: Vec<Option<f64>>,
    /// Slots whose allocation breaks a capacity at multiplier 1.
    pub strict_violation_slots: u32,
    pub completed_jobs: usize,
}

impl RunMetrics {
    pub fn from_run(policy: &str, seed: u64, run: &RunResult, jobs: &[Job], net: &SubstrateNetwork) -> Self {
        let embedded_ratio =
            run.records.iter().zip(run.schedule.slots()).map(|(rec, alloc)| rec.embedded_ratio(alloc)).collect();
        let mut strict_violation_slots = 0;
        for (t, alloc) in (1..).zip(run.schedule.slots()) {
            let z = run.schedule.accumulators_at(t - 1);
            if validate_slot(alloc, jobs, net, &z).map_or(true, |v| !v.is_empty()) {
                strict_violation_slots += 1;
            }
        }
        RunMetrics {
            policy: policy.to_string(),
            seed,
            total_utility: objective(&run.schedule, jobs),
            embedded_ratio,
            strict_violation_slots,
            completed_jobs: jobs.iter().filter(|j| run.schedule.completion_slot(j.id).is_some()).count(),
        }
    }

    /// Mean embedded ratio over slots with at least one active job; zero
    /// when there were none.
    pub fn mean_embedded_ratio(&self) -> f64 {
        mean(self.embedded_ratio.iter().flatten().copied()).unwrap_or(0.0)
    }
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Ranks starting at 1, ties sharing their average rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let mx = mean(x.iter().copied())?;
    let my = mean(y.iter().copied())?;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation. `None` when either side is constant or the
/// lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    pearson(&ranks(x), &ranks(y))
}

/// Means of `value` grouped by `key`, in key order.
pub fn grouped_means<K: Ord + Clone>(rows: impl IntoIterator<Item = (K, f64)>) -> Vec<(K, f64)> {
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for (k, v) in rows {
        groups.entry(k).or_default().push(v);
    }
    groups.into_iter().map(|(k, v)| (k, mean(v).expect("nonempty group"))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_values() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[0.1, 0.2, 0.5, 0.9]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]), Some(-1.0));
        // d = (0, 0, 1, -1): 1 - 6*2/(4*15) = 0.8
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 4.0, 3.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 2.0], &[3.0, 3.0]), None);
    }

    #[test]
    fn tied_ranks() {
        assert_eq!(ranks(&[5.0, 1.0, 5.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn grouping() {
        let g = grouped_means([(2, 1.0), (1, 4.0), (2, 3.0)]);
        assert_eq!(g, vec![(1, 4.0), (2, 2.0)]);
    }
}
