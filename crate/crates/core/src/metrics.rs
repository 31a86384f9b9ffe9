//! Ranked-list precision, recall and average precision with ignore labels.
//!
//! Labels are `+1` (positive), `-1` (negative) and `0` (ignored). Ignored
//! entries count towards neither the numerator nor the denominator of
//! precision.

use crate::error::{Error, Result};

/// A score-sorted label list with an optional positive-count override.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedLabels {
    labels: Vec<i8>,
    k: Option<usize>,
}

fn check_labels(labels: &[i8]) -> Result<()> {
    match labels.iter().find(|&&y| !(-1..=1).contains(&y)) {
        Some(y) => Err(Error::Metric(format!("label {y} is not one of -1, 0, +1"))),
        None => Ok(()),
    }
}

fn positives(labels: &[i8]) -> usize {
    labels.iter().filter(|&&y| y > 0).count()
}

impl RankedLabels {
    pub fn new(labels: Vec<i8>, k: Option<usize>) -> Result<Self> {
        check_labels(&labels)?;
        if let Some(k) = k {
            let p = positives(&labels);
            if k < p {
                return Err(Error::Metric(format!("K = {k} is below the {p} positives")));
            }
        }
        Ok(RankedLabels { labels, k })
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn k(&self) -> Option<usize> {
        self.k
    }

    pub fn with_k(self, k: usize) -> Result<Self> {
        RankedLabels::new(self.labels, Some(k))
    }

    pub fn average_precision(&self) -> Result<f64> {
        average_precision(&self.labels, self.k)
    }
}

/// Orders labels by decreasing score; equal scores keep their original order.
pub fn sort_by_score(scores: &[f64], labels: &[i8]) -> Result<RankedLabels> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Metric(format!("non-finite score {s}")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    RankedLabels::new(order.into_iter().map(|i| labels[i]).collect(), None)
}

fn check_rank(y: &[i8], i: usize) -> Result<()> {
    if i == 0 || i > y.len() {
        return Err(Error::Metric(format!("rank {i} outside 1..={}", y.len())));
    }
    Ok(())
}

/// Precision at 1-based rank `i`; 0 when every entry so far is ignored.
pub fn precision_at(y: &[i8], i: usize) -> Result<f64> {
    check_rank(y, i)?;
    let pos = positives(&y[..i]);
    let counted = y[..i].iter().filter(|&&v| v != 0).count();
    Ok(if counted == 0 { 0.0 } else { pos as f64 / counted as f64 })
}

/// Recall at 1-based rank `i` relative to `k` positives.
pub fn recall_at(y: &[i8], i: usize, k: usize) -> Result<f64> {
    check_rank(y, i)?;
    if k == 0 {
        return Err(Error::Metric("recall needs K > 0".into()));
    }
    Ok(positives(&y[..i]) as f64 / k as f64)
}

/// Average precision: the sum of precisions at positive ranks divided by
/// `k`, which defaults to the number of positives. A `k` above that count
/// gives the truncated-curve variant.
pub fn average_precision(y: &[i8], k: Option<usize>) -> Result<f64> {
    check_labels(y)?;
    let p = positives(y);
    let k = match k {
        Some(k) if k < p => {
            return Err(Error::Metric(format!("K = {k} is below the {p} positives")))
        }
        Some(0) | None if p == 0 => {
            return Err(Error::Metric("average precision needs at least one positive".into()))
        }
        Some(k) => k,
        None => p,
    };
    let (mut pos, mut counted, mut sum) = (0usize, 0usize, 0.0);
    for &v in y {
        if v != 0 {
            counted += 1;
        }
        if v > 0 {
            pos += 1;
            sum += pos as f64 / counted as f64;
        }
    }
    Ok(sum / k as f64)
}

pub fn mean_ap(aps: &[f64]) -> Result<f64> {
    if aps.is_empty() {
        return Err(Error::Metric("mean of an empty AP list".into()));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}
