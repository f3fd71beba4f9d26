use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredLabel {
    pub score: f64,
    pub positive: bool,
}

impl ScoredLabel {
    pub fn new(score: f64, positive: bool) -> Self {
        ScoredLabel { score, positive }
    }
}

fn check_finite(items: &[ScoredLabel]) -> Result<()> {
    match items.iter().position(|i| !i.score.is_finite()) {
        Some(pos) => Err(Error::Numeric(format!("score of item {pos}"))),
        None => Ok(()),
    }
}

/// Area under the ROC curve in its Mann–Whitney form: the fraction of
/// (positive, negative) pairs where the positive scores higher, ties
/// counting one half.
///
/// Sorts once and walks tie groups, so it runs in `O(n log n)`; the result
/// is bit-identical to the pairwise definition because both reduce to the
/// same integer count of half-pairs divided by `P·N`.
pub fn au_roc(items: &[ScoredLabel]) -> Result<f64> {
    check_finite(items)?;
    let positives = items.iter().filter(|i| i.positive).count() as u64;
    let negatives = items.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric("AU-ROC needs at least one positive and one negative"));
    }
    let mut sorted: Vec<&ScoredLabel> = items.iter().collect();
    sorted.sort_by(|a, b| a.score.total_cmp(&b.score));

    // twice the Mann-Whitney U statistic
    let mut doubled: u64 = 0;
    let mut negatives_below: u64 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let (mut pos_here, mut neg_here) = (0u64, 0u64);
        while j < sorted.len() && sorted[j].score == sorted[i].score {
            if sorted[j].positive {
                pos_here += 1;
            } else {
                neg_here += 1;
            }
            j += 1;
        }
        doubled += pos_here * (2 * negatives_below + neg_here);
        negatives_below += neg_here;
        i = j;
    }
    Ok((doubled as f64 / 2.0) / (positives * negatives) as f64)
}

/// Fraction of items where `score >= threshold` agrees with the label.
pub fn accuracy(items: &[ScoredLabel], threshold: f64) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::UndefinedMetric("accuracy of an empty set"));
    }
    check_finite(items)?;
    let correct = items
        .iter()
        .filter(|i| (i.score >= threshold) == i.positive)
        .count();
    Ok(correct as f64 / items.len() as f64)
}
