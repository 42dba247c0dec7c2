//! Two-cluster k-means on the real line.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TwoMeans {
    /// `true` for members of the higher-mean cluster.
    pub high: Vec<bool>,
    pub mean_low: f64,
    pub mean_high: f64,
    /// All scores identical: a single cluster, both means equal.
    pub degenerate: bool,
}

/// Optimal two-cluster partition of 1-D scores.
///
/// Any k-means optimum in one dimension is a threshold split of the sorted
/// scores, so every split between distinct values is scored in one pass over
/// prefix sums and the one with the least within-cluster sum of squares wins.
/// The result is a fixed point of Lloyd's iteration. Ties between splits go to
/// the lower threshold; equal scores always share a cluster.
pub fn kmeans2_1d(scores: &[f64]) -> Result<TwoMeans> {
    if scores.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "two-means clustering needs at least 2 scores, got {}",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let (min, max) = (sorted[0], sorted[n - 1]);
    if min == max {
        return Ok(TwoMeans {
            high: vec![false; n],
            mean_low: min,
            mean_high: min,
            degenerate: true,
        });
    }

    // Centred sums keep the between-cluster term well conditioned.
    let centre = sorted.iter().sum::<f64>() / n as f64;
    let total: f64 = sorted.iter().map(|s| s - centre).sum();
    let mut best = (f64::NEG_INFINITY, 0usize);
    let mut left = 0.0;
    for m in 1..n {
        left += sorted[m - 1] - centre;
        if sorted[m - 1] == sorted[m] {
            continue;
        }
        let right = total - left;
        // Minimising the within-cluster sum of squares is maximising this.
        let between = left * left / m as f64 + right * right / (n - m) as f64;
        if between > best.0 {
            best = (between, m);
        }
    }
    let m = best.1;
    let mean_low = sorted[..m].iter().sum::<f64>() / m as f64;
    let mean_high = sorted[m..].iter().sum::<f64>() / (n - m) as f64;
    let threshold = sorted[m - 1];
    Ok(TwoMeans {
        high: scores.iter().map(|&s| s > threshold).collect(),
        mean_low,
        mean_high,
        degenerate: false,
    })
}
