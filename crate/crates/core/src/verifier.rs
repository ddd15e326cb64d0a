//! Analytic and Monte Carlo checks of the asymmetric privacy inequality,
//! closed-form one-sided-true-positive bounds, and a composition ledger.
//!
//! For a dataset `D` and each P-neighbour `D'` the checkers estimate
//! `sup_S ln(Pr[m(D) in S] / Pr[m(D') in S])` and compare it with the
//! mechanism's declared epsilon. Only the `D -> D'` direction is checked; the
//! relation is not symmetric.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{AdpError, Result};
use crate::mechanisms::{
    asymmetric_report_noisy_kmax_counts, asymmetric_svt_counts, decide_count, SvtAnswer, Verdict,
};
use crate::noise::{alap_count, alap_log_density, PrivacyBudget};
use crate::policy::{p_neighbor_datasets, CountingQuery, Dataset, Policy, SensitivityProfile, DEFAULT_NEIGHBOR_CAP};
use crate::rng::{derive_seed, RandomSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    AnalyticDensity,
    MonteCarloBinned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub neighbor: Dataset,
    /// Output value (analytic) or bin label (Monte Carlo).
    pub output: String,
    pub log_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub mechanism: String,
    pub method: Method,
    pub claimed_epsilon: f64,
    /// Largest observed log ratio (point estimate for Monte Carlo).
    pub max_log_ratio: f64,
    /// Largest lower confidence bound on the log ratio (Monte Carlo only).
    pub max_lower_bound: Option<f64>,
    pub violation: bool,
    pub witness: Option<Witness>,
    pub neighbors: usize,
    pub trials: usize,
    pub bins: usize,
    /// Probability mass under `D` in bins left out of the point estimate.
    pub excluded_mass: f64,
}

impl RatioReport {
    fn bucket_label(&self) -> String {
        self.witness
            .as_ref()
            .map(|w| w.output.clone())
            .unwrap_or_else(|| "-".into())
    }
}

impl fmt::Display for RatioReport {
    /// One structured line: `key=value` pairs separated by spaces.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let neighbor = self
            .witness
            .as_ref()
            .map(|w| {
                w.neighbor
                    .records()
                    .iter()
                    .map(|r| r.to_bits().iter().map(|b| b.to_string()).collect::<String>())
                    .collect::<Vec<_>>()
                    .join("|")
            })
            .unwrap_or_else(|| "-".into());
        write!(
            f,
            "mechanism={} method={:?} epsilon={} max_log_ratio={} lower_bound={} violation={} neighbor={} output={} neighbors={} trials={} bins={} excluded_mass={}",
            self.mechanism,
            self.method,
            self.claimed_epsilon,
            self.max_log_ratio,
            self.max_lower_bound.map(|x| x.to_string()).unwrap_or_else(|| "-".into()),
            self.violation,
            neighbor,
            self.bucket_label(),
            self.neighbors,
            self.trials,
            self.bins,
            self.excluded_mass
        )
    }
}

/// An aLap release as seen by the checkers: the query and budget it declares,
/// and the noise it actually draws. Shipped releases draw what they declare;
/// the broken variants below do not.
#[derive(Clone, Debug, PartialEq)]
pub struct AlapRelease {
    pub name: String,
    pub query: CountingQuery,
    pub budget: PrivacyBudget,
    pub noise_profile: SensitivityProfile,
    pub noise_budget: PrivacyBudget,
}

impl AlapRelease {
    pub fn new(query: CountingQuery, budget: PrivacyBudget) -> Self {
        Self {
            name: "alap".into(),
            query,
            budget,
            noise_profile: query.profile,
            noise_budget: budget,
        }
    }
}

/// Analytic check for aLap: sup over a dense output grid and every
/// P-neighbour of the log density ratio.
pub fn check_adp_analytic(
    release: &AlapRelease,
    dataset: &Dataset,
    policy: &Policy,
    grid_step: f64,
) -> Result<RatioReport> {
    if !(grid_step > 0.0) {
        return Err(AdpError::InvalidParameter("grid step must be positive".into()));
    }
    let neighbors = p_neighbor_datasets(dataset, policy, DEFAULT_NEIGHBOR_CAP)?;
    let base = release.query.evaluate(dataset)? as f64;
    let scale = release.noise_profile.delta / release.noise_budget.epsilon();
    let span = 40.0 * scale + 2.0;
    let mut max = f64::NEG_INFINITY;
    let mut witness = None;
    let mut bins = 0;
    for neighbor in &neighbors {
        let other = release.query.evaluate(neighbor)? as f64;
        let lo = base.min(other) - span;
        let steps = ((base.max(other) + span - lo) / grid_step).ceil() as usize;
        for i in 0..=steps {
            let z = lo + i as f64 * grid_step;
            let p = alap_log_density(z, base, release.noise_profile, release.noise_budget);
            if p == f64::NEG_INFINITY {
                continue;
            }
            bins += 1;
            let q = alap_log_density(z, other, release.noise_profile, release.noise_budget);
            let lr = p - q;
            if lr > max {
                max = lr;
                witness = Some(Witness {
                    neighbor: neighbor.clone(),
                    output: format!("{z:.6}"),
                    log_ratio: lr,
                });
            }
        }
    }
    let eps = release.budget.epsilon();
    Ok(RatioReport {
        mechanism: release.name.clone(),
        method: Method::AnalyticDensity,
        claimed_epsilon: eps,
        max_log_ratio: max,
        max_lower_bound: None,
        violation: max > eps + 1e-9,
        witness,
        neighbors: neighbors.len(),
        trials: 0,
        bins,
        excluded_mass: 0.0,
    })
}

/// One component of a mechanism output, before binning.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OutputAtom {
    Discrete(i64),
    Real(f64),
}

/// A randomized mechanism the Monte Carlo checker can run.
pub trait Mechanism: Sync {
    fn name(&self) -> String;
    fn claimed_epsilon(&self) -> f64;
    fn run(&self, dataset: &Dataset, rng: &mut RandomSource) -> Result<Vec<OutputAtom>>;
}

impl Mechanism for AlapRelease {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn claimed_epsilon(&self) -> f64 {
        self.budget.epsilon()
    }

    fn run(&self, dataset: &Dataset, rng: &mut RandomSource) -> Result<Vec<OutputAtom>> {
        let count = self.query.evaluate(dataset)? as f64;
        let z = alap_count(count, self.noise_profile, self.noise_budget, rng)?.raw;
        Ok(vec![OutputAtom::Real(z)])
    }
}

/// Threshold decision built on aLap.
#[derive(Clone, Debug)]
pub struct DecisionRelease {
    pub query: CountingQuery,
    pub threshold: f64,
    pub budget: PrivacyBudget,
}

impl Mechanism for DecisionRelease {
    fn name(&self) -> String {
        "decision".into()
    }

    fn claimed_epsilon(&self) -> f64 {
        self.budget.epsilon()
    }

    fn run(&self, dataset: &Dataset, rng: &mut RandomSource) -> Result<Vec<OutputAtom>> {
        let count = self.query.evaluate(dataset)? as f64;
        let v = decide_count(count, self.query.profile, self.threshold, self.budget, rng)?;
        Ok(vec![OutputAtom::Discrete((v.verdict == Verdict::BelowThreshold) as i64)])
    }
}

/// Asymmetric report-noisy-k-max. `noise_budget` is what is actually spent on
/// noise; it equals `budget` for the shipped mechanism.
#[derive(Clone, Debug)]
pub struct RnmRelease {
    pub queries: Vec<CountingQuery>,
    pub k: usize,
    pub budget: PrivacyBudget,
    pub noise_budget: PrivacyBudget,
}

impl RnmRelease {
    pub fn new(queries: Vec<CountingQuery>, k: usize, budget: PrivacyBudget) -> Self {
        Self {
            queries,
            k,
            budget,
            noise_budget: budget,
        }
    }
}

impl Mechanism for RnmRelease {
    fn name(&self) -> String {
        if self.noise_budget == self.budget {
            "rnm".into()
        } else {
            "rnm-doubled-budget".into()
        }
    }

    fn claimed_epsilon(&self) -> f64 {
        self.budget.epsilon()
    }

    fn run(&self, dataset: &Dataset, rng: &mut RandomSource) -> Result<Vec<OutputAtom>> {
        let counts = evaluate(&self.queries, dataset)?;
        let res = asymmetric_report_noisy_kmax_counts(&counts, self.noise_budget, self.k, rng)?;
        Ok(res
            .entries
            .iter()
            .flat_map(|e| [OutputAtom::Discrete(e.index as i64), OutputAtom::Real(e.value)])
            .collect())
    }
}

/// Asymmetric sparse vector technique.
#[derive(Clone, Debug)]
pub struct SvtRelease {
    pub queries: Vec<CountingQuery>,
    pub thresholds: Vec<f64>,
    pub c: usize,
    pub budget: PrivacyBudget,
    pub noise_budget: PrivacyBudget,
}

impl SvtRelease {
    pub fn new(queries: Vec<CountingQuery>, thresholds: Vec<f64>, c: usize, budget: PrivacyBudget) -> Self {
        Self {
            queries,
            thresholds,
            c,
            budget,
            noise_budget: budget,
        }
    }
}

impl Mechanism for SvtRelease {
    fn name(&self) -> String {
        if self.noise_budget == self.budget {
            "svt".into()
        } else {
            "svt-doubled-budget".into()
        }
    }

    fn claimed_epsilon(&self) -> f64 {
        self.budget.epsilon()
    }

    fn run(&self, dataset: &Dataset, rng: &mut RandomSource) -> Result<Vec<OutputAtom>> {
        let counts = evaluate(&self.queries, dataset)?;
        let out = asymmetric_svt_counts(&counts, &self.thresholds, self.noise_budget, self.c, rng)?;
        let mut atoms = Vec::new();
        for a in out.answers {
            match a {
                SvtAnswer::Below => atoms.push(OutputAtom::Discrete(0)),
                SvtAnswer::Above(v) => {
                    atoms.push(OutputAtom::Discrete(1));
                    atoms.push(OutputAtom::Real(v.unwrap_or(0.0)));
                }
            }
        }
        Ok(atoms)
    }
}

/// Runs mechanisms one after another on the same data; the declared cost is
/// the sum of their declared costs.
pub struct Sequential<'a> {
    pub parts: Vec<&'a dyn Mechanism>,
}

impl Mechanism for Sequential<'_> {
    fn name(&self) -> String {
        self.parts
            .iter()
            .map(|m| m.name())
            .collect::<Vec<_>>()
            .join("+")
    }

    fn claimed_epsilon(&self) -> f64 {
        self.parts.iter().map(|m| m.claimed_epsilon()).sum()
    }

    fn run(&self, dataset: &Dataset, rng: &mut RandomSource) -> Result<Vec<OutputAtom>> {
        let mut out = Vec::new();
        for (i, m) in self.parts.iter().enumerate() {
            out.push(OutputAtom::Discrete(-(i as i64) - 1));
            out.extend(m.run(dataset, rng)?);
        }
        Ok(out)
    }
}

fn evaluate(queries: &[CountingQuery], dataset: &Dataset) -> Result<Vec<f64>> {
    queries
        .iter()
        .map(|q| q.evaluate(dataset).map(|c| c as f64))
        .collect()
}

/// Canned incorrect mechanisms the checkers must flag.
pub mod broken {
    use super::*;
    use crate::policy::Monotonicity;

    /// Noise calibrated to half the true sensitivity.
    pub fn wrong_delta(query: CountingQuery, budget: PrivacyBudget) -> AlapRelease {
        let mut r = AlapRelease::new(query, budget);
        r.name = "alap-wrong-delta".into();
        r.noise_profile.delta = query.profile.delta / 2.0;
        r
    }

    /// aLap whose noise is drawn at twice the declared budget.
    pub fn doubled_budget_alap(query: CountingQuery, budget: PrivacyBudget) -> AlapRelease {
        let mut r = AlapRelease::new(query, budget);
        r.name = "alap-doubled-budget".into();
        r.noise_budget = PrivacyBudget::new(budget.epsilon() * 2.0).expect("positive");
        r
    }

    pub fn doubled_budget_rnm(queries: Vec<CountingQuery>, k: usize, budget: PrivacyBudget) -> RnmRelease {
        let mut r = RnmRelease::new(queries, k, budget);
        r.noise_budget = PrivacyBudget::new(budget.epsilon() * 2.0).expect("positive");
        r
    }

    pub fn doubled_budget_svt(
        queries: Vec<CountingQuery>,
        thresholds: Vec<f64>,
        c: usize,
        budget: PrivacyBudget,
    ) -> SvtRelease {
        let mut r = SvtRelease::new(queries, thresholds, c, budget);
        r.noise_budget = PrivacyBudget::new(budget.epsilon() * 2.0).expect("positive");
        r
    }

    /// One-sided noise applied to a query whose sensitivity is two-sided
    /// (e.g. any count under the all-sensitive policy).
    pub fn one_sided_on_symmetric(query: CountingQuery, budget: PrivacyBudget) -> AlapRelease {
        let mut r = AlapRelease::new(query, budget);
        r.name = "alap-one-sided-on-symmetric".into();
        r.noise_profile.monotonicity = Monotonicity::Decreasing;
        r
    }
}

/// A mechanism paired with the dataset and policy it is checked on.
pub struct VerificationCase {
    pub mechanism: Box<dyn Mechanism>,
    pub dataset: Dataset,
    pub policy: Policy,
    /// Whether the mechanism is expected to satisfy its declared budget.
    pub expect_pass: bool,
}

/// The 3-record, 2-attribute dataset used by the canned checks.
pub fn tiny_dataset() -> Dataset {
    Dataset::from_rows(2, &[&[1, 0], &[1, 1], &[0, 1]]).expect("valid rows")
}

/// Shipped mechanisms (aLap, threshold decision, report-noisy-k-max, sparse
/// vector) followed by the three broken variants (wrong sensitivity, doubled
/// budget, one-sided noise on a two-sided query).
pub fn standard_cases(budget: PrivacyBudget) -> Vec<VerificationCase> {
    let canon = Policy::visited_is_sensitive(2);
    let dp = Policy::all_sensitive(2);
    let q0 = CountingQuery::new(0, true, &canon).expect("attribute 0");
    let q1 = CountingQuery::new(1, true, &canon).expect("attribute 1");
    let sym = CountingQuery::new(0, true, &dp).expect("attribute 0");
    let data = tiny_dataset();
    let case = |mechanism: Box<dyn Mechanism>, policy: &Policy, expect_pass| VerificationCase {
        mechanism,
        dataset: data.clone(),
        policy: policy.clone(),
        expect_pass,
    };
    vec![
        case(Box::new(AlapRelease::new(q0, budget)), &canon, true),
        case(
            Box::new(DecisionRelease {
                query: q0,
                threshold: 2.5,
                budget,
            }),
            &canon,
            true,
        ),
        case(Box::new(RnmRelease::new(vec![q0, q1], 1, budget)), &canon, true),
        case(
            Box::new(SvtRelease::new(vec![q0, q1], vec![2.5, 2.0], 1, budget)),
            &canon,
            true,
        ),
        case(Box::new(broken::wrong_delta(q0, budget)), &canon, false),
        case(Box::new(broken::doubled_budget_rnm(vec![q0, q1], 1, budget)), &canon, false),
        case(Box::new(broken::one_sided_on_symmetric(sym, budget)), &dp, false),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub trials: usize,
    pub bin_width: f64,
    /// Bins with fewer hits than this in either arm are left out of the
    /// point estimate.
    pub min_hits: u64,
    /// Family-wise confidence of the violation test.
    pub confidence: f64,
    pub min_trials: usize,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            trials: 1_000_000,
            bin_width: 0.25,
            min_hits: 50,
            confidence: 0.99,
            min_trials: 10_000,
            seed: 0x5eed,
        }
    }
}

type BinKey = Vec<(u8, i64)>;

fn bin(atoms: &[OutputAtom], width: f64) -> BinKey {
    atoms
        .iter()
        .map(|a| match *a {
            OutputAtom::Discrete(x) => (0, x),
            OutputAtom::Real(z) => (1, (z / width).floor() as i64),
        })
        .collect()
}

fn bin_label(key: &BinKey, width: f64) -> String {
    key.iter()
        .map(|&(kind, x)| match kind {
            0 => format!("#{x}"),
            _ => format!("[{},{})", x as f64 * width, (x + 1) as f64 * width),
        })
        .collect::<Vec<_>>()
        .join(";")
}

const CHUNK: usize = 10_000;

fn histogram(
    mech: &dyn Mechanism,
    dataset: &Dataset,
    cfg: &MonteCarloConfig,
    arm: u64,
) -> Result<HashMap<BinKey, u64>> {
    let seed = derive_seed(cfg.seed, arm);
    let chunks = cfg.trials.div_ceil(CHUNK);
    let partials = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = RandomSource::new(seed, c as u64);
            let n = CHUNK.min(cfg.trials - c * CHUNK);
            let mut h: HashMap<BinKey, u64> = HashMap::new();
            for _ in 0..n {
                *h.entry(bin(&mech.run(dataset, &mut rng)?, cfg.bin_width)).or_default() += 1;
            }
            Ok(h)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = HashMap::new();
    for h in partials {
        for (k, v) in h {
            *total.entry(k).or_default() += v;
        }
    }
    Ok(total)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(hits: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Monte Carlo check: bin outputs of `mech` on `dataset` and on each
/// P-neighbour, and compare per-bin frequencies.
///
/// The point estimate uses bins with at least `min_hits` in both arms. The
/// violation test uses every bin with at least `min_hits` under `dataset`,
/// bounding the neighbour's frequency from above with a Wilson interval (so
/// outputs the neighbour can never produce are caught), and declares a
/// violation when `ln(p_lo / q_hi)` exceeds the claimed epsilon. Per-bin
/// intervals are Bonferroni-corrected to the configured family-wise level.
pub fn check_adp_monte_carlo(
    mech: &dyn Mechanism,
    dataset: &Dataset,
    policy: &Policy,
    cfg: &MonteCarloConfig,
) -> Result<RatioReport> {
    if cfg.trials < cfg.min_trials {
        return Err(AdpError::InsufficientTrials {
            got: cfg.trials,
            required: cfg.min_trials,
        });
    }
    if !(cfg.confidence > 0.0 && cfg.confidence < 1.0) || !(cfg.bin_width > 0.0) {
        return Err(AdpError::InvalidParameter("confidence must be in (0,1), bin width positive".into()));
    }
    let neighbors: Vec<Dataset> = p_neighbor_datasets(dataset, policy, DEFAULT_NEIGHBOR_CAP)?
        .into_iter()
        .skip(1)
        .collect();
    let base = histogram(mech, dataset, cfg, 0)?;
    let others = neighbors
        .iter()
        .enumerate()
        .map(|(i, d)| histogram(mech, d, cfg, i as u64 + 1))
        .collect::<Result<Vec<_>>>()?;

    let n = cfg.trials as u64;
    let eligible: Vec<(&BinKey, u64)> = {
        let mut v: Vec<_> = base
            .iter()
            .filter(|(_, &h)| h >= cfg.min_hits)
            .map(|(k, &h)| (k, h))
            .collect();
        v.sort();
        v
    };
    let comparisons = (eligible.len() * neighbors.len()).max(1);
    let alpha = (1.0 - cfg.confidence) / comparisons as f64;
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - alpha / 2.0);

    let eps = mech.claimed_epsilon();
    let mut max = f64::NEG_INFINITY;
    let mut max_lb = f64::NEG_INFINITY;
    let mut witness = None;
    let mut excluded_mass: f64 = 0.0;
    let low_mass: u64 = base.values().filter(|&&h| h < cfg.min_hits).sum();
    for (neighbor, hist) in neighbors.iter().zip(&others) {
        let mut excluded = low_mass;
        for &(key, h1) in &eligible {
            let h2 = hist.get(key).copied().unwrap_or(0);
            let (p_lo, _) = wilson_interval(h1, n, z);
            let (_, q_hi) = wilson_interval(h2, n, z);
            let lb = (p_lo / q_hi).ln();
            if h2 >= cfg.min_hits {
                let lr = (h1 as f64 / h2 as f64).ln();
                if lr > max {
                    max = lr;
                    if lb <= eps || witness.is_none() {
                        witness = Some(Witness {
                            neighbor: neighbor.clone(),
                            output: bin_label(key, cfg.bin_width),
                            log_ratio: lr,
                        });
                    }
                }
            } else {
                excluded += h1;
            }
            if lb > max_lb {
                max_lb = lb;
                if lb > eps {
                    witness = Some(Witness {
                        neighbor: neighbor.clone(),
                        output: bin_label(key, cfg.bin_width),
                        log_ratio: lb,
                    });
                }
            }
        }
        excluded_mass = excluded_mass.max(excluded as f64 / n as f64);
    }
    if neighbors.is_empty() {
        max = 0.0;
        max_lb = 0.0;
    }
    Ok(RatioReport {
        mechanism: mech.name(),
        method: Method::MonteCarloBinned,
        claimed_epsilon: eps,
        max_log_ratio: max,
        max_lower_bound: Some(max_lb),
        violation: max_lb > eps,
        witness,
        neighbors: neighbors.len(),
        trials: cfg.trials,
        bins: base.len(),
        excluded_mass,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtpBound {
    pub k: usize,
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub bound_value: f64,
}

/// Best achievable probability of a one-sided true positive under
/// asymmetric privacy when the answer is `k` P-neighbour steps from flipping:
/// `1 - exp(-k epsilon)`.
pub fn otp_bound_adp(k: usize, epsilon: f64) -> Result<OtpBound> {
    if k < 1 || !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(AdpError::InvalidParameter(format!(
            "need k >= 1 and epsilon > 0, got k={k} epsilon={epsilon}"
        )));
    }
    Ok(OtpBound {
        k,
        epsilon,
        delta: None,
        bound_value: 1.0 - (-(k as f64) * epsilon).exp(),
    })
}

/// Upper bound on the one-sided-true-positive probability under
/// `(epsilon, delta)`-DP at Hamming distance `k`: `delta * sum_{i=1..k} e^{(i-1) epsilon}`,
/// capped at 1.
pub fn otp_bound_dp(k: usize, epsilon: f64, delta: f64) -> Result<OtpBound> {
    if k < 1 || !(epsilon >= 0.0 && epsilon.is_finite()) || !(0.0..=1.0).contains(&delta) {
        return Err(AdpError::InvalidParameter(format!(
            "need k >= 1, epsilon >= 0, 0 <= delta <= 1; got k={k} epsilon={epsilon} delta={delta}"
        )));
    }
    let sum: f64 = (1..=k).map(|i| ((i - 1) as f64 * epsilon).exp()).sum();
    Ok(OtpBound {
        k,
        epsilon,
        delta: Some(delta),
        bound_value: (delta * sum).min(1.0),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub epsilon: f64,
}

/// Sequential composition: mechanisms run on the same data under one policy
/// cost the sum of their budgets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompositionLedger {
    policy: Option<Policy>,
    entries: Vec<LedgerEntry>,
}

impl CompositionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, label: impl Into<String>, policy: &Policy, budget: PrivacyBudget) -> Result<()> {
        match &self.policy {
            Some(p) if p != policy => return Err(AdpError::MixedPolicies),
            Some(_) => {}
            None => self.policy = Some(policy.clone()),
        }
        self.entries.push(LedgerEntry {
            label: label.into(),
            epsilon: budget.epsilon(),
        });
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.epsilon).sum()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }
}

/// Total cost of a sequence of runs, all of which must share one policy.
pub fn composition_ledger(runs: &[(Policy, PrivacyBudget)]) -> Result<f64> {
    let mut ledger = CompositionLedger::new();
    for (i, (policy, budget)) in runs.iter().enumerate() {
        ledger.record(format!("run-{i}"), policy, *budget)?;
    }
    Ok(ledger.total())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(e: f64) -> PrivacyBudget {
        PrivacyBudget::new(e).unwrap()
    }

    #[test]
    fn otp_bounds() {
        let b = otp_bound_adp(1, 1.0).unwrap().bound_value;
        assert!((b - 0.632_120_558_828_557_7).abs() < 1e-12);
        assert!(otp_bound_adp(200, 1.0).unwrap().bound_value > 1.0 - 1e-12);
        assert!(otp_bound_adp(0, 1.0).is_err());
        assert!(otp_bound_adp(1, 0.0).is_err());
        assert_eq!(otp_bound_dp(4, 0.0, 0.01).unwrap().bound_value, 0.04);
        let b = otp_bound_dp(3, 1.0, 0.01).unwrap().bound_value;
        assert!((b - 0.01 * (1.0 + 1f64.exp() + 2f64.exp())).abs() < 1e-12);
        assert_eq!(otp_bound_dp(50, 1.0, 0.5).unwrap().bound_value, 1.0);
        assert!(otp_bound_dp(1, 1.0, 1.5).is_err());
    }

    #[test]
    fn ledger_sums_and_rejects_mixed_policies() {
        let p = Policy::visited_is_sensitive(2);
        let runs: Vec<_> = [0.2, 0.3, 0.5].iter().map(|&e| (p.clone(), eps(e))).collect();
        assert!((composition_ledger(&runs).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(composition_ledger(&[]).unwrap(), 0.0);
        let mixed = vec![(p.clone(), eps(0.1)), (Policy::all_sensitive(2), eps(0.1))];
        assert_eq!(composition_ledger(&mixed), Err(AdpError::MixedPolicies));
    }

    #[test]
    fn analytic_alap_ratio_is_epsilon() {
        let p = Policy::visited_is_sensitive(1);
        let q = CountingQuery::new(0, true, &p).unwrap();
        let rows: Vec<&[u8]> = vec![&[1]; 5];
        let d = Dataset::from_rows(1, &rows).unwrap();
        let r = check_adp_analytic(&AlapRelease::new(q, eps(1.0)), &d, &p, 1e-3).unwrap();
        assert!((r.max_log_ratio - 1.0).abs() < 1e-3);
        assert!(!r.violation);
        assert_eq!(r.witness.unwrap().neighbor.count_value(0, true), 4);
    }

    #[test]
    fn analytic_flags_wrong_delta() {
        let p = Policy::visited_is_sensitive(1);
        let q = CountingQuery::new(0, true, &p).unwrap();
        let rows: Vec<&[u8]> = vec![&[1]; 5];
        let d = Dataset::from_rows(1, &rows).unwrap();
        let r = check_adp_analytic(&broken::wrong_delta(q, eps(1.0)), &d, &p, 1e-3).unwrap();
        assert!((r.max_log_ratio - 2.0).abs() < 1e-3);
        assert!(r.violation);
    }

    #[test]
    fn analytic_no_neighbors_is_zero() {
        let p = Policy::visited_is_sensitive(2);
        let q = CountingQuery::new(0, true, &p).unwrap();
        let d = Dataset::from_rows(2, &[&[0, 0], &[0, 0]]).unwrap();
        let r = check_adp_analytic(&AlapRelease::new(q, eps(1.0)), &d, &p, 1e-2).unwrap();
        assert_eq!(r.max_log_ratio, 0.0);
        assert_eq!(r.neighbors, 1);
    }

    #[test]
    fn analytic_flags_one_sided_on_symmetric() {
        let p = Policy::all_sensitive(1);
        let q = CountingQuery::new(0, true, &p).unwrap();
        let d = Dataset::from_rows(1, &[&[0], &[1]]).unwrap();
        let r = check_adp_analytic(&broken::one_sided_on_symmetric(q, eps(1.0)), &d, &p, 1e-2).unwrap();
        assert!(r.max_log_ratio.is_infinite());
        assert!(r.violation);
        // the honest Laplace version passes
        let ok = check_adp_analytic(&AlapRelease::new(q, eps(1.0)), &d, &p, 1e-2).unwrap();
        assert!((ok.max_log_ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn monte_carlo_requires_trials() {
        let p = Policy::visited_is_sensitive(1);
        let q = CountingQuery::new(0, true, &p).unwrap();
        let d = Dataset::from_rows(1, &[&[1]]).unwrap();
        let cfg = MonteCarloConfig { trials: 10, ..Default::default() };
        assert!(matches!(
            check_adp_monte_carlo(&AlapRelease::new(q, eps(1.0)), &d, &p, &cfg),
            Err(AdpError::InsufficientTrials { .. })
        ));
    }

    #[test]
    fn monte_carlo_small_run_passes_and_flags() {
        let p = Policy::visited_is_sensitive(1);
        let q = CountingQuery::new(0, true, &p).unwrap();
        let d = Dataset::from_rows(1, &[&[1], &[1]]).unwrap();
        let cfg = MonteCarloConfig { trials: 100_000, ..Default::default() };
        let ok = check_adp_monte_carlo(&AlapRelease::new(q, eps(1.0)), &d, &p, &cfg).unwrap();
        assert!(!ok.violation, "{ok}");
        assert!(ok.max_log_ratio < 1.3);
        let bad = check_adp_monte_carlo(&broken::doubled_budget_alap(q, eps(1.0)), &d, &p, &cfg).unwrap();
        assert!(bad.violation, "{bad}");
    }

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson_interval(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        let (lo, hi) = wilson_interval(0, 1000, 2.0);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
    }

    #[test]
    fn report_line_is_single_line() {
        let p = Policy::visited_is_sensitive(1);
        let q = CountingQuery::new(0, true, &p).unwrap();
        let d = Dataset::from_rows(1, &[&[1]]).unwrap();
        let r = check_adp_analytic(&AlapRelease::new(q, eps(1.0)), &d, &p, 0.1).unwrap();
        let line = r.to_string();
        assert!(!line.contains('\n'));
        assert!(line.starts_with("mechanism=alap method=AnalyticDensity"));
    }
}
