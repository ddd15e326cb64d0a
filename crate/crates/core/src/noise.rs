//! Laplace and asymmetric Laplace samplers, and the aLap mechanism.
//!
//! All samplers use inverse-CDF transforms of a single uniform draw from a
//! [`RandomSource`], so outputs are bit-reproducible for a given source.

use serde::{Deserialize, Serialize};

use crate::error::{AdpError, Result};
use crate::policy::{CountingQuery, Dataset, Monotonicity, SensitivityProfile};
use crate::rng::RandomSource;

/// A privacy budget `epsilon > 0`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PrivacyBudget(f64);

impl PrivacyBudget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon.is_finite() {
            Ok(Self(epsilon))
        } else {
            Err(AdpError::InvalidBudget(epsilon))
        }
    }

    pub fn epsilon(self) -> f64 {
        self.0
    }

    /// `epsilon / parts`.
    pub fn split(self, parts: usize) -> Result<Self> {
        if parts == 0 {
            return Err(AdpError::InvalidParameter("cannot split budget into 0 parts".into()));
        }
        Self::new(self.0 / parts as f64)
    }

    pub fn halve(self) -> Self {
        Self(self.0 / 2.0)
    }

    pub fn scale(self, factor: f64) -> Result<Self> {
        Self::new(self.0 * factor)
    }
}

impl TryFrom<f64> for PrivacyBudget {
    type Error = AdpError;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<PrivacyBudget> for f64 {
    fn from(b: PrivacyBudget) -> f64 {
        b.0
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(AdpError::InvalidParameter(format!(
            "sensitivity must be positive and finite, got {delta}"
        )))
    }
}

/// Draw from the Laplace density `(eps / 2 delta) exp(-|x| eps / delta)`.
pub fn sample_laplace(budget: PrivacyBudget, delta: f64, rng: &mut RandomSource) -> Result<f64> {
    check_delta(delta)?;
    Ok(laplace(delta / budget.epsilon(), rng))
}

/// Draw from the one-sided exponential density `(eps / delta) exp(-x eps / delta)`
/// on `x >= 0`.
pub fn sample_exponential(budget: PrivacyBudget, delta: f64, rng: &mut RandomSource) -> Result<f64> {
    check_delta(delta)?;
    Ok(exponential(delta / budget.epsilon(), rng))
}

/// Asymmetric Laplace noise: nonnegative exponential for decreasing
/// sensitivity, its mirror for increasing, plain Laplace otherwise.
pub fn sample_asymmetric_laplace(
    budget: PrivacyBudget,
    delta: f64,
    monotonicity: Monotonicity,
    rng: &mut RandomSource,
) -> Result<f64> {
    check_delta(delta)?;
    let scale = delta / budget.epsilon();
    Ok(match monotonicity {
        Monotonicity::Decreasing => exponential(scale, rng),
        Monotonicity::Increasing => -exponential(scale, rng),
        Monotonicity::NonMonotone => laplace(scale, rng),
    })
}

pub(crate) fn exponential(scale: f64, rng: &mut RandomSource) -> f64 {
    -scale * rng.uniform_open().ln()
}

pub(crate) fn laplace(scale: f64, rng: &mut RandomSource) -> f64 {
    // u in (-1/2, 1/2); -b sgn(u) ln(1 - 2|u|)
    let u = rng.uniform_open() - 0.5;
    let mag = -scale * (1.0 - 2.0 * u.abs()).ln();
    if u < 0.0 {
        -mag
    } else {
        mag
    }
}

/// Expected value of the asymmetric Laplace noise.
pub fn noise_mean(budget: PrivacyBudget, profile: SensitivityProfile) -> f64 {
    let scale = profile.delta / budget.epsilon();
    match profile.monotonicity {
        Monotonicity::Decreasing => scale,
        Monotonicity::Increasing => -scale,
        Monotonicity::NonMonotone => 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyCount {
    /// True count plus noise.
    pub raw: f64,
    /// `raw` minus the noise mean.
    pub debiased: f64,
    pub budget_spent: PrivacyBudget,
}

/// aLap on an already-evaluated answer.
pub fn alap_count(
    true_count: f64,
    profile: SensitivityProfile,
    budget: PrivacyBudget,
    rng: &mut RandomSource,
) -> Result<NoisyCount> {
    let noise = sample_asymmetric_laplace(budget, profile.delta, profile.monotonicity, rng)?;
    let raw = true_count + noise;
    Ok(NoisyCount {
        raw,
        debiased: raw - noise_mean(budget, profile),
        budget_spent: budget,
    })
}

/// The asymmetric Laplace mechanism.
pub fn alap(
    query: &CountingQuery,
    dataset: &Dataset,
    budget: PrivacyBudget,
    rng: &mut RandomSource,
) -> Result<NoisyCount> {
    let count = query.evaluate(dataset)? as f64;
    alap_count(count, query.profile, budget, rng)
}

/// Density of the aLap output at `z` given true answer `count`.
pub fn alap_density(z: f64, count: f64, profile: SensitivityProfile, budget: PrivacyBudget) -> f64 {
    alap_log_density(z, count, profile, budget).exp()
}

/// Log-density of the aLap output; `-inf` outside the support.
pub fn alap_log_density(
    z: f64,
    count: f64,
    profile: SensitivityProfile,
    budget: PrivacyBudget,
) -> f64 {
    let rate = budget.epsilon() / profile.delta;
    let x = z - count;
    match profile.monotonicity {
        Monotonicity::Decreasing if x < 0.0 => f64::NEG_INFINITY,
        Monotonicity::Increasing if x > 0.0 => f64::NEG_INFINITY,
        Monotonicity::Decreasing | Monotonicity::Increasing => rate.ln() - rate * x.abs(),
        Monotonicity::NonMonotone => (rate / 2.0).ln() - rate * x.abs(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::Policy;

    fn eps(e: f64) -> PrivacyBudget {
        PrivacyBudget::new(e).unwrap()
    }

    #[test]
    fn budget_validation_and_splits() {
        assert!(PrivacyBudget::new(0.0).is_err());
        assert!(PrivacyBudget::new(-1.0).is_err());
        assert!(PrivacyBudget::new(f64::NAN).is_err());
        assert!(PrivacyBudget::new(f64::INFINITY).is_err());
        let b = eps(1.0);
        assert_eq!(b.split(4).unwrap().epsilon(), 0.25);
        assert_eq!(b.halve().epsilon(), 0.5);
        assert_eq!(b.split(2).unwrap().halve().epsilon(), 0.25);
        assert!(b.split(0).is_err());
    }

    #[test]
    fn budget_serde_rejects_nonpositive() {
        assert!(serde_json::from_str::<PrivacyBudget>("0.5").is_ok());
        assert!(serde_json::from_str::<PrivacyBudget>("-0.5").is_err());
    }

    #[test]
    fn nonpositive_delta_is_rejected() {
        let mut r = RandomSource::new(0, 0);
        assert!(sample_laplace(eps(1.0), 0.0, &mut r).is_err());
        assert!(sample_asymmetric_laplace(eps(1.0), -1.0, Monotonicity::Decreasing, &mut r).is_err());
    }

    #[test]
    fn huge_epsilon_gives_tiny_noise() {
        let mut r = RandomSource::new(3, 0);
        for _ in 0..10_000 {
            assert!(sample_laplace(eps(1e6), 1.0, &mut r).unwrap().abs() < 1e-4);
        }
    }

    #[test]
    fn decreasing_noise_is_nonnegative_and_increasing_nonpositive() {
        let mut r = RandomSource::new(5, 0);
        for _ in 0..100_000 {
            assert!(sample_asymmetric_laplace(eps(1.0), 1.0, Monotonicity::Decreasing, &mut r).unwrap() >= 0.0);
            assert!(sample_asymmetric_laplace(eps(2.0), 1.0, Monotonicity::Increasing, &mut r).unwrap() <= 0.0);
        }
    }

    #[test]
    fn increasing_mean_mirrors() {
        let mut r = RandomSource::new(9, 0);
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| sample_asymmetric_laplace(eps(2.0), 1.0, Monotonicity::Increasing, &mut r).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean + 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn laplace_is_symmetric() {
        let mut r = RandomSource::new(10, 0);
        let n = 1_000_000;
        let (mut sum, mut pos) = (0.0, 0usize);
        for _ in 0..n {
            let x = sample_laplace(eps(1.0), 1.0, &mut r).unwrap();
            sum += x;
            pos += (x > 0.0) as usize;
        }
        assert!((sum / n as f64).abs() < 0.01);
        assert!((pos as f64 / n as f64 - 0.5).abs() < 0.002);
    }

    #[test]
    fn alap_raw_never_below_count_for_decreasing() {
        let p = Policy::visited_is_sensitive(1);
        let q = CountingQuery::new(0, true, &p).unwrap();
        let rows: Vec<&[u8]> = vec![&[1]; 5];
        let d = Dataset::from_rows(1, &rows).unwrap();
        let mut r = RandomSource::new(1, 1);
        for _ in 0..50_000 {
            let out = alap(&q, &d, eps(1.0), &mut r).unwrap();
            assert!(out.raw >= 5.0);
            assert_eq!(out.debiased, out.raw - 1.0);
        }
    }

    #[test]
    fn alap_is_deterministic_per_source() {
        let prof = SensitivityProfile::decreasing_count();
        let mut a = RandomSource::new(42, 7);
        let mut b = RandomSource::new(42, 7);
        for _ in 0..100 {
            let x = alap_count(3.0, prof, eps(0.7), &mut a).unwrap();
            let y = alap_count(3.0, prof, eps(0.7), &mut b).unwrap();
            assert_eq!(x.raw.to_bits(), y.raw.to_bits());
        }
    }

    #[test]
    fn non_monotone_alap_is_symmetric_around_count() {
        let prof = SensitivityProfile::new(1.0, Monotonicity::NonMonotone).unwrap();
        let mut r = RandomSource::new(2, 2);
        let n = 200_000;
        let above = (0..n)
            .filter(|_| alap_count(5.0, prof, eps(1.0), &mut r).unwrap().raw > 5.0)
            .count();
        assert!((above as f64 / n as f64 - 0.5).abs() < 0.005);
    }

    #[test]
    fn density_ratio_is_exactly_e_to_eps_on_grid() {
        let prof = SensitivityProfile::decreasing_count();
        let b = eps(1.0);
        for c in [0.0, 3.0, 10.0] {
            let mut sup = f64::NEG_INFINITY;
            let mut z = c;
            while z < c + 20.0 {
                let lr = alap_log_density(z, c, prof, b) - alap_log_density(z, c - 1.0, prof, b);
                sup = sup.max(lr);
                z += 0.01;
            }
            assert!((sup - 1.0).abs() < 1e-9, "sup {sup}");
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        let b = eps(1.5);
        for m in [Monotonicity::Decreasing, Monotonicity::Increasing, Monotonicity::NonMonotone] {
            let prof = SensitivityProfile::new(1.0, m).unwrap();
            let h = 1e-3;
            let total: f64 = (-40_000..40_000)
                .map(|i| alap_density((i as f64 + 0.5) * h, 0.0, prof, b) * h)
                .sum();
            assert!((total - 1.0).abs() < 1e-4, "{m:?} {total}");
        }
    }
}
