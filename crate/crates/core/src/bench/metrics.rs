use std::collections::HashSet;

use crate::error::{AdpError, Result};
use crate::mechanisms::{top_k_indices, TopKResult};
use crate::monitor::MonitorOutput;
use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopKMetrics {
    /// Mean squared error of the released values; absent when nothing was
    /// released.
    pub mse: Option<f64>,
    /// Fraction of the true top-k found among the released indices.
    pub accuracy: f64,
}

/// Top-k accuracy and MSE for a result with exactly `k` entries.
pub fn metric_topk(result: &TopKResult, truth: &[f64], k: usize, debias: bool) -> Result<TopKMetrics> {
    if result.entries.len() != k {
        return Err(AdpError::DimensionMismatch {
            expected: k,
            actual: result.entries.len(),
        });
    }
    metric_topk_partial(result, truth, k, debias)
}

/// As [`metric_topk`] but tolerates fewer than `k` entries (sparse-vector
/// runs may stop short). Accuracy still divides by `k`.
pub fn metric_topk_partial(
    result: &TopKResult,
    truth: &[f64],
    k: usize,
    debias: bool,
) -> Result<TopKMetrics> {
    if k == 0 || k > truth.len() || result.entries.len() > k {
        return Err(AdpError::DimensionMismatch {
            expected: k,
            actual: result.entries.len(),
        });
    }
    let true_top: HashSet<usize> = top_k_indices(truth, k).into_iter().collect();
    let offset = if debias { result.noise_mean } else { 0.0 };
    let mut hits = 0usize;
    let mut sq = 0.0;
    for e in &result.entries {
        let t = *truth.get(e.index).ok_or_else(|| {
            AdpError::InvalidParameter(format!("index {} outside truth of length {}", e.index, truth.len()))
        })?;
        hits += true_top.contains(&e.index) as usize;
        sq += (e.value - offset - t).powi(2);
    }
    let n = result.entries.len();
    Ok(TopKMetrics {
        mse: (n > 0).then(|| sq / n as f64),
        accuracy: hits as f64 / k as f64,
    })
}

/// Fraction of truly safe targets (true count below `threshold`) that were
/// not certified safe. `Abstain` counts as not certified: an abstaining
/// target is still flagged by its earlier `Unsafe` release. Returns `None`
/// when no target is truly safe.
pub fn metric_fn_ratio(outputs: &[MonitorOutput], truth: &[f64], threshold: f64) -> Result<Option<f64>> {
    if outputs.len() != truth.len() {
        return Err(AdpError::DimensionMismatch {
            expected: truth.len(),
            actual: outputs.len(),
        });
    }
    let mut safe = 0usize;
    let mut wrong = 0usize;
    for (o, &t) in outputs.iter().zip(truth) {
        if t < threshold {
            safe += 1;
            wrong += !matches!(o, MonitorOutput::Safe) as usize;
        }
    }
    Ok((safe > 0).then(|| wrong as f64 / safe as f64))
}

/// Count of `Safe` outputs whose true count is at or above the threshold.
/// Always zero for the shipped monitors.
pub fn false_safe_count(outputs: &[MonitorOutput], truth: &[f64], threshold: f64) -> usize {
    outputs
        .iter()
        .zip(truth)
        .filter(|(o, &t)| matches!(o, MonitorOutput::Safe) && t >= threshold)
        .count()
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Percentile bootstrap confidence interval for the mean.
pub fn bootstrap_ci(
    samples: &[f64],
    resamples: usize,
    level: f64,
    rng: &mut RandomSource,
) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(AdpError::InvalidParameter(format!(
            "bootstrap needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if resamples == 0 || !(level > 0.0 && level < 1.0) {
        return Err(AdpError::InvalidParameter("need resamples > 0 and level in (0,1)".into()));
    }
    let n = samples.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let s: f64 = (0..n)
                .map(|_| samples[rng.uniform_inclusive(0, n as u64 - 1) as usize])
                .sum();
            s / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let at = |q: f64| {
        let pos = (q * (resamples - 1) as f64).round() as usize;
        means[pos.min(resamples - 1)]
    };
    let centre = mean(samples);
    // a percentile interval can miss the sample mean only by rounding
    Ok((at(alpha).min(centre), at(1.0 - alpha).max(centre)))
}
