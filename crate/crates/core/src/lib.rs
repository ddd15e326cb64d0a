//! Asymmetric differential privacy.
//!
//! A [`policy::Policy`] declares which attribute values are sensitive. Only
//! sensitive values may change between neighbouring datasets, so for a count
//! of sensitive values the answer can only go down under a neighbour. That
//! one-sidedness lets the mechanisms here use one-sided exponential noise
//! instead of Laplace noise, halving the error of a count and making
//! below-threshold answers exact.
//!
//! Modules:
//! - [`policy`]: records, datasets, policies, P-neighbours, sensitivity, minimum step
//! - [`noise`]: Laplace and asymmetric Laplace sampling, the aLap mechanism
//! - [`mechanisms`]: threshold decisions, report-noisy-k-max, sparse vector, DP baselines
//! - [`monitor`]: streaming location-safety monitors
//! - [`verifier`]: privacy-inequality checkers, one-sided bounds, composition ledger
//! - [`data`]: transaction and trajectory loaders, synthetic generators
//! - [`bench`]: metrics, bootstrap intervals, experiment runner

pub mod bench;
pub mod data;
pub mod error;
pub mod mechanisms;
pub mod monitor;
pub mod noise;
pub mod policy;
pub mod rng;
pub mod verifier;

pub use error::{AdpError, Result};
pub use noise::PrivacyBudget;
pub use policy::{CountingQuery, Dataset, Monotonicity, Policy, Record, SensitivityProfile};
pub use rng::RandomSource;
