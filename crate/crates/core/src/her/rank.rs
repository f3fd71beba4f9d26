use super::model::HerModel;
use crate::error::Result;
use crate::features::Side;

/// One scored candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranked<'a, T> {
    /// Position of the candidate in the input list.
    pub index: usize,
    pub item: &'a T,
    pub probability: f64,
}

const PARALLEL_MIN: usize = 16;

/// Scores every candidate against `moment` with the eval-mode model and
/// returns the top `k` by probability; equal scores keep input order.
pub fn rank_suggestions<'a, T: AsRef<str> + Sync>(
    model: &HerModel,
    moment: &str,
    suggestions: &'a [T],
    k: usize,
) -> Result<Vec<Ranked<'a, T>>> {
    if k == 0 || suggestions.is_empty() {
        return Ok(Vec::new());
    }
    let m = model.prepare(moment, Side::Moment);
    let score = |s: &T| model.predict_prepared(&m, &model.prepare(s.as_ref(), Side::Suggestion));

    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let probabilities: Vec<f64> = if suggestions.len() >= PARALLEL_MIN && workers > 1 {
        let chunk = suggestions.len().div_ceil(workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = suggestions
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(score).collect::<Result<Vec<f64>>>()))
                .collect();
            let mut out = Vec::with_capacity(suggestions.len());
            for h in handles {
                out.extend(h.join().expect("scoring thread panicked")?);
            }
            Ok::<_, crate::Error>(out)
        })?
    } else {
        suggestions.iter().map(score).collect::<Result<_>>()?
    };

    let mut ranked: Vec<Ranked<'a, T>> = suggestions
        .iter()
        .zip(probabilities)
        .enumerate()
        .map(|(index, (item, probability))| Ranked {
            index,
            item,
            probability,
        })
        .collect();
    ranked.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    ranked.truncate(k);
    Ok(ranked)
}
