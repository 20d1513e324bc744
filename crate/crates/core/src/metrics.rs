//! Mode coverage and quality on known mixtures, discriminator-utilization
//! statistics, and active-discriminator counting.

use crate::data::MixtureSpec;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub modes_covered: usize,
    pub high_quality_ratio: f64,
    pub per_mode_counts: Vec<usize>,
}

/// Assign each sample to its nearest center; a mode counts as covered when at
/// least `count_threshold` (fraction) of all samples land within
/// `dist_threshold` of that center.
pub fn mode_coverage(
    samples: &[[f64; 2]],
    spec: &MixtureSpec,
    dist_threshold: f64,
    count_threshold: f64,
) -> Result<CoverageReport> {
    if dist_threshold <= 0.0 || count_threshold <= 0.0 {
        return Err(Error::invalid("coverage thresholds must be positive"));
    }
    let n_modes = spec.n_components();
    let mut counts = vec![0usize; n_modes];
    let mut high_quality = 0usize;
    for p in samples {
        let (mut best, mut best_d2) = (0usize, f64::INFINITY);
        for (i, c) in spec.centers.iter().enumerate() {
            let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
            if d2 < best_d2 {
                best = i;
                best_d2 = d2;
            }
        }
        if best_d2.sqrt() <= dist_threshold {
            counts[best] += 1;
            high_quality += 1;
        }
    }
    let total = samples.len();
    let min_count = (count_threshold * total as f64).ceil() as usize;
    let modes_covered = if total == 0 {
        0
    } else {
        counts.iter().filter(|&&c| c >= min_count.max(1)).count()
    };
    Ok(CoverageReport {
        modes_covered,
        high_quality_ratio: if total == 0 { 0.0 } else { high_quality as f64 / total as f64 },
        per_mode_counts: counts,
    })
}

/// Per-discriminator expert-assignment counts over a window of assignment
/// rows. Counts sum to `window_size * k`.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilizationHistogram {
    pub counts: Vec<u64>,
    pub window_size: u64,
}

impl UtilizationHistogram {
    pub fn from_counts(counts: Vec<u64>, window_size: u64) -> Self {
        UtilizationHistogram { counts, window_size }
    }

    pub fn shares(&self) -> Vec<f64> {
        let total: u64 = self.counts.iter().sum();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    /// Shannon entropy of the share distribution, normalized by log M.
    pub fn normalized_entropy(&self) -> f64 {
        let m = self.counts.len();
        if m <= 1 {
            return 0.0;
        }
        let shares = self.shares();
        let h: f64 = shares
            .iter()
            .filter(|&&s| s > 0.0)
            .map(|&s| -s * s.ln())
            .sum();
        h / (m as f64).ln()
    }
}

/// Number of discriminators whose assignment share exceeds the threshold.
pub fn active_discriminators(hist: &UtilizationHistogram, activity_threshold: f64) -> usize {
    hist.shares().iter().filter(|&&s| s > activity_threshold).count()
}
