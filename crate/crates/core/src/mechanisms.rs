//! Threshold decisions, top-k selection and sparse-vector mechanisms, with the
//! classic DP baselines they are compared against.
//!
//! Each mechanism has a query-level entry point taking [`CountingQuery`]s and a
//! [`Dataset`], and a `*_counts` variant operating on already-evaluated true
//! answers. The count variants of the asymmetric mechanisms assume unit,
//! monotonically decreasing sensitivity; the query-level variants check it.

use serde::{Deserialize, Serialize};

use crate::error::{AdpError, Result};
use crate::noise::{alap_count, laplace, PrivacyBudget};
use crate::policy::{CountingQuery, Dataset, Monotonicity, SensitivityProfile};
use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    BelowThreshold,
    AboveThreshold,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionVerdict {
    pub verdict: Verdict,
    /// Set when the verdict lies on the side that is never wrong.
    pub otp: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopKEntry {
    pub index: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopKResult {
    /// Sorted by value descending, ties by ascending index.
    pub entries: Vec<TopKEntry>,
    pub budget_spent: PrivacyBudget,
    /// Expected noise in each reported value; subtract to debias.
    pub noise_mean: f64,
}

impl TopKResult {
    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.index).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SvtAnswer {
    Below,
    /// Above the threshold, with the released value if the variant releases one.
    Above(Option<f64>),
}

impl SvtAnswer {
    pub fn is_above(&self) -> bool {
        matches!(self, SvtAnswer::Above(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvtOutput {
    /// One answer per processed query, in query order. Shorter than the query
    /// list when the mechanism aborted.
    pub answers: Vec<SvtAnswer>,
    pub above_count: usize,
    pub budget_spent: PrivacyBudget,
    pub noise_mean: f64,
}

impl SvtOutput {
    /// Above answers as (query index, value) entries in query order.
    pub fn above_entries(&self) -> Vec<TopKEntry> {
        self.answers
            .iter()
            .enumerate()
            .filter_map(|(index, a)| match a {
                SvtAnswer::Above(Some(value)) => Some(TopKEntry { index, value: *value }),
                _ => None,
            })
            .collect()
    }

    pub fn as_top_k(&self) -> TopKResult {
        let mut entries = self.above_entries();
        sort_entries(&mut entries);
        TopKResult {
            entries,
            budget_spent: self.budget_spent,
            noise_mean: self.noise_mean,
        }
    }
}

/// Baseline SVT release mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SvtMode {
    /// Above answers carry no value.
    Plain,
    /// Half the budget selects, the other half measures each Above query.
    Measure,
}

fn evaluate_all(queries: &[CountingQuery], dataset: &Dataset) -> Result<Vec<f64>> {
    queries
        .iter()
        .map(|q| q.evaluate(dataset).map(|c| c as f64))
        .collect()
}

fn require_decreasing_unit(queries: &[CountingQuery]) -> Result<()> {
    for (i, q) in queries.iter().enumerate() {
        if q.profile.monotonicity != Monotonicity::Decreasing {
            return Err(AdpError::MixedMonotonicity(format!(
                "query {i} is {:?}, expected Decreasing",
                q.profile.monotonicity
            )));
        }
        if q.profile.delta != 1.0 {
            return Err(AdpError::InvalidParameter(format!(
                "query {i} has sensitivity {}, expected 1",
                q.profile.delta
            )));
        }
    }
    Ok(())
}

fn sort_entries(entries: &mut [TopKEntry]) {
    entries.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.index.cmp(&b.index)));
}

/// Indices of the `k` largest values, descending, ties by ascending index.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(AdpError::InvalidParameter(format!(
            "k must be in [1, {n}], got {k}"
        )));
    }
    Ok(())
}

/// Is the count below `threshold`? Uses aLap; for decreasing sensitivity a
/// `BelowThreshold` verdict is never wrong, for increasing sensitivity an
/// `AboveThreshold` verdict is never wrong.
pub fn decision_below_threshold(
    query: &CountingQuery,
    dataset: &Dataset,
    threshold: f64,
    budget: PrivacyBudget,
    rng: &mut RandomSource,
) -> Result<DecisionVerdict> {
    let count = query.evaluate(dataset)? as f64;
    decide_count(count, query.profile, threshold, budget, rng)
}

pub fn decide_count(
    true_count: f64,
    profile: SensitivityProfile,
    threshold: f64,
    budget: PrivacyBudget,
    rng: &mut RandomSource,
) -> Result<DecisionVerdict> {
    if profile.monotonicity == Monotonicity::NonMonotone {
        return Err(AdpError::NoOneSidedGuarantee);
    }
    let noisy = alap_count(true_count, profile, budget, rng)?.raw;
    let verdict = if noisy < threshold {
        Verdict::BelowThreshold
    } else {
        Verdict::AboveThreshold
    };
    let otp = match profile.monotonicity {
        Monotonicity::Decreasing => verdict == Verdict::BelowThreshold,
        _ => verdict == Verdict::AboveThreshold,
    };
    Ok(DecisionVerdict { verdict, otp })
}

/// Asymmetric report-noisy-k-max: one-sided noise at `epsilon / k` on every
/// query, release the k largest noisy values with their indices. Total cost is
/// `epsilon` regardless of the number of queries.
pub fn asymmetric_report_noisy_kmax(
    queries: &[CountingQuery],
    dataset: &Dataset,
    budget: PrivacyBudget,
    k: usize,
    rng: &mut RandomSource,
) -> Result<TopKResult> {
    check_k(k, queries.len())?;
    require_decreasing_unit(queries)?;
    let counts = evaluate_all(queries, dataset)?;
    asymmetric_report_noisy_kmax_counts(&counts, budget, k, rng)
}

pub fn asymmetric_report_noisy_kmax_counts(
    counts: &[f64],
    budget: PrivacyBudget,
    k: usize,
    rng: &mut RandomSource,
) -> Result<TopKResult> {
    check_k(k, counts.len())?;
    let per_query = budget.split(k)?;
    let profile = SensitivityProfile::decreasing_count();
    let noisy = counts
        .iter()
        .map(|&c| alap_count(c, profile, per_query, rng).map(|n| n.raw))
        .collect::<Result<Vec<_>>>()?;
    let entries = top_k_indices(&noisy, k)
        .into_iter()
        .map(|index| TopKEntry {
            index,
            value: noisy[index],
        })
        .collect();
    Ok(TopKResult {
        entries,
        budget_spent: budget,
        noise_mean: 1.0 / per_query.epsilon(),
    })
}

/// Asymmetric sparse vector technique. Each query's count gets one-sided noise
/// at `epsilon / c` and is compared to its threshold; Above answers release
/// the same noisy value and consume budget, Below answers are free. Stops
/// after `c` Above answers.
pub fn asymmetric_svt(
    queries: &[CountingQuery],
    thresholds: &[f64],
    dataset: &Dataset,
    budget: PrivacyBudget,
    c: usize,
    rng: &mut RandomSource,
) -> Result<SvtOutput> {
    check_svt(queries.len(), thresholds.len(), c)?;
    require_decreasing_unit(queries)?;
    let counts = evaluate_all(queries, dataset)?;
    asymmetric_svt_counts(&counts, thresholds, budget, c, rng)
}

fn check_svt(n: usize, thresholds: usize, c: usize) -> Result<()> {
    if n == 0 {
        return Err(AdpError::InvalidParameter("empty query list".into()));
    }
    if c < 1 {
        return Err(AdpError::InvalidParameter("c must be at least 1".into()));
    }
    if thresholds != n {
        return Err(AdpError::DimensionMismatch {
            expected: n,
            actual: thresholds,
        });
    }
    Ok(())
}

pub fn asymmetric_svt_counts(
    counts: &[f64],
    thresholds: &[f64],
    budget: PrivacyBudget,
    c: usize,
    rng: &mut RandomSource,
) -> Result<SvtOutput> {
    check_svt(counts.len(), thresholds.len(), c)?;
    let per_query = budget.split(c)?;
    let profile = SensitivityProfile::decreasing_count();
    let mut answers = Vec::with_capacity(counts.len());
    let mut above = 0;
    for (&count, &threshold) in counts.iter().zip(thresholds) {
        let z = alap_count(count, profile, per_query, rng)?.raw;
        if z >= threshold {
            answers.push(SvtAnswer::Above(Some(z)));
            above += 1;
            if above >= c {
                break;
            }
        } else {
            answers.push(SvtAnswer::Below);
        }
    }
    Ok(SvtOutput {
        answers,
        above_count: above,
        budget_spent: budget,
        noise_mean: 1.0 / per_query.epsilon(),
    })
}

/// DP baseline for top-k: half the budget selects (Laplace with scale
/// `2k/epsilon` on every count), the other half re-measures the k selected
/// counts (Laplace with scale `2k/epsilon` each).
pub fn baseline_report_noisy_argmax(
    queries: &[CountingQuery],
    dataset: &Dataset,
    budget: PrivacyBudget,
    k: usize,
    rng: &mut RandomSource,
) -> Result<TopKResult> {
    check_k(k, queries.len())?;
    let counts = evaluate_all(queries, dataset)?;
    baseline_report_noisy_argmax_counts(&counts, budget, k, rng)
}

pub fn baseline_report_noisy_argmax_counts(
    counts: &[f64],
    budget: PrivacyBudget,
    k: usize,
    rng: &mut RandomSource,
) -> Result<TopKResult> {
    check_k(k, counts.len())?;
    let per_item = budget.halve().split(k)?;
    let scale = 1.0 / per_item.epsilon();
    let noisy: Vec<f64> = counts.iter().map(|&c| c + laplace(scale, rng)).collect();
    let mut entries: Vec<TopKEntry> = top_k_indices(&noisy, k)
        .into_iter()
        .map(|index| TopKEntry {
            index,
            value: counts[index] + laplace(scale, rng),
        })
        .collect();
    sort_entries(&mut entries);
    Ok(TopKResult {
        entries,
        budget_spent: budget,
        noise_mean: 0.0,
    })
}

/// Standard DP sparse vector technique: Laplace noise on the threshold at
/// `epsilon/2` and on each query at `epsilon/(2c)`. In [`SvtMode::Measure`]
/// selection runs at half budget and each Above query is re-measured with
/// Laplace at `epsilon/(2c)`.
pub fn baseline_svt(
    queries: &[CountingQuery],
    thresholds: &[f64],
    dataset: &Dataset,
    budget: PrivacyBudget,
    c: usize,
    mode: SvtMode,
    rng: &mut RandomSource,
) -> Result<SvtOutput> {
    check_svt(queries.len(), thresholds.len(), c)?;
    let counts = evaluate_all(queries, dataset)?;
    baseline_svt_counts(&counts, thresholds, budget, c, mode, rng)
}

pub fn baseline_svt_counts(
    counts: &[f64],
    thresholds: &[f64],
    budget: PrivacyBudget,
    c: usize,
    mode: SvtMode,
    rng: &mut RandomSource,
) -> Result<SvtOutput> {
    check_svt(counts.len(), thresholds.len(), c)?;
    let selection = match mode {
        SvtMode::Plain => budget,
        SvtMode::Measure => budget.halve(),
    };
    let threshold_scale = 1.0 / selection.halve().epsilon();
    let query_scale = 1.0 / selection.halve().split(c)?.epsilon();
    let measure_scale = 1.0 / budget.halve().split(c)?.epsilon();
    let threshold_noise = laplace(threshold_scale, rng);
    let mut answers = Vec::with_capacity(counts.len());
    let mut above = 0;
    for (&count, &threshold) in counts.iter().zip(thresholds) {
        let noisy = count + laplace(query_scale, rng);
        if noisy >= threshold + threshold_noise {
            let value = match mode {
                SvtMode::Plain => None,
                SvtMode::Measure => Some(count + laplace(measure_scale, rng)),
            };
            answers.push(SvtAnswer::Above(value));
            above += 1;
            if above >= c {
                break;
            }
        } else {
            answers.push(SvtAnswer::Below);
        }
    }
    Ok(SvtOutput {
        answers,
        above_count: above,
        budget_spent: budget,
        noise_mean: 0.0,
    })
}

/// Threshold for running SVT as a top-k selector: the i-th largest true count
/// for `i` drawn uniformly from `[k, 2k]` (clamped to the number of counts).
pub fn svt_topk_threshold(counts: &[f64], k: usize, rng: &mut RandomSource) -> Result<f64> {
    check_k(k, counts.len())?;
    let hi = (2 * k).min(counts.len());
    let lo = k.min(hi);
    let i = rng.uniform_inclusive(lo as u64, hi as u64) as usize;
    let mut sorted = counts.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(sorted[i - 1])
}
