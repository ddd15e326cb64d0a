//! Records, datasets, policies and the policy-induced neighbouring relation.
//!
//! A [`Policy`] marks each binary attribute value as sensitive or not. A record
//! `r'` is a P-neighbour of `r` when it agrees with `r` on every attribute whose
//! value in `r` is non-sensitive; sensitive values are free to change. The
//! relation is reflexive and, in general, not symmetric.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{AdpError, Result};

/// Default cap on the number of neighbour records produced by enumeration.
pub const DEFAULT_NEIGHBOR_CAP: usize = 4096;
/// Default cap on the number of datasets visited by [`min_step`].
pub const DEFAULT_BFS_NODE_CAP: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Record {
    values: Vec<bool>,
}

impl Record {
    pub fn new(values: Vec<bool>) -> Self {
        Self { values }
    }

    /// Builds a record from 0/1 integers.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let values = bits
            .iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(AdpError::InvalidParameter(format!(
                    "attribute value {other} is not binary"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, attribute: usize) -> bool {
        self.values[attribute]
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.values.iter().map(|&v| v as u8).collect()
    }
}

/// Ordered multiset of records sharing one attribute count. Record index is
/// stable and identifies a record across neighbour construction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<Record>,
    attribute_count: usize,
}

impl Dataset {
    pub fn new(attribute_count: usize, records: Vec<Record>) -> Result<Self> {
        if attribute_count == 0 {
            return Err(AdpError::InvalidParameter(
                "attribute count must be positive".into(),
            ));
        }
        if let Some(bad) = records.iter().find(|r| r.len() != attribute_count) {
            return Err(AdpError::DimensionMismatch {
                expected: attribute_count,
                actual: bad.len(),
            });
        }
        Ok(Self {
            records,
            attribute_count,
        })
    }

    /// Convenience constructor from rows of 0/1 integers.
    pub fn from_rows(attribute_count: usize, rows: &[&[u8]]) -> Result<Self> {
        let records = rows
            .iter()
            .map(|r| Record::from_bits(r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(attribute_count, records)
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn attribute_count(&self) -> usize {
        self.attribute_count
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of records whose `attribute` equals `value`.
    pub fn count_value(&self, attribute: usize, value: bool) -> u64 {
        self.records
            .iter()
            .filter(|r| r.get(attribute) == value)
            .count() as u64
    }

    fn with_record(&self, index: usize, record: Record) -> Dataset {
        let mut records = self.records.clone();
        records[index] = record;
        Dataset {
            records,
            attribute_count: self.attribute_count,
        }
    }
}

/// Sensitivity classifier for one binary attribute: `sensitive[v]` is the
/// policy's answer for value `v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributePolicy {
    sensitive: [bool; 2],
}

impl AttributePolicy {
    pub const ALL_SENSITIVE: Self = Self {
        sensitive: [true, true],
    };
    pub const VISITED_IS_SENSITIVE: Self = Self {
        sensitive: [false, true],
    };

    pub fn new(zero_is_sensitive: bool, one_is_sensitive: bool) -> Self {
        Self {
            sensitive: [zero_is_sensitive, one_is_sensitive],
        }
    }

    pub fn is_sensitive(&self, value: bool) -> bool {
        self.sensitive[value as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy {
    per_attribute: Vec<AttributePolicy>,
}

impl Policy {
    pub fn new(per_attribute: Vec<AttributePolicy>) -> Self {
        Self { per_attribute }
    }

    /// Every value sensitive: the neighbouring relation of ordinary DP.
    pub fn all_sensitive(attribute_count: usize) -> Self {
        Self::new(vec![AttributePolicy::ALL_SENSITIVE; attribute_count])
    }

    /// Having the attribute (value 1) is sensitive, not having it is public.
    pub fn visited_is_sensitive(attribute_count: usize) -> Self {
        Self::new(vec![AttributePolicy::VISITED_IS_SENSITIVE; attribute_count])
    }

    pub fn from_fn(attribute_count: usize, f: impl Fn(usize, bool) -> bool) -> Self {
        Self::new(
            (0..attribute_count)
                .map(|i| AttributePolicy::new(f(i, false), f(i, true)))
                .collect(),
        )
    }

    pub fn attribute_count(&self) -> usize {
        self.per_attribute.len()
    }

    pub fn attribute(&self, index: usize) -> AttributePolicy {
        self.per_attribute[index]
    }

    pub fn is_sensitive(&self, attribute: usize, value: bool) -> bool {
        self.per_attribute[attribute].is_sensitive(value)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.attribute_count() != d {
            return Err(AdpError::DimensionMismatch {
                expected: self.attribute_count(),
                actual: d,
            });
        }
        Ok(())
    }

    /// Whether `candidate` is a P-neighbour of `record` (directional).
    pub fn allows(&self, record: &Record, candidate: &Record) -> Result<bool> {
        self.check_dim(record.len())?;
        self.check_dim(candidate.len())?;
        Ok(record
            .values()
            .iter()
            .zip(candidate.values())
            .enumerate()
            .all(|(i, (&from, &to))| from == to || self.is_sensitive(i, from)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Monotonicity {
    /// Moving to a P-neighbour can only lower the answer.
    Decreasing,
    /// Moving to a P-neighbour can only raise the answer.
    Increasing,
    NonMonotone,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityProfile {
    pub delta: f64,
    pub monotonicity: Monotonicity,
}

impl SensitivityProfile {
    pub fn new(delta: f64, monotonicity: Monotonicity) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(AdpError::InvalidParameter(format!(
                "sensitivity must be finite and nonnegative, got {delta}"
            )));
        }
        Ok(Self {
            delta,
            monotonicity,
        })
    }

    /// Unit-sensitivity, monotonically decreasing: a count of sensitive values.
    pub const fn decreasing_count() -> Self {
        Self {
            delta: 1.0,
            monotonicity: Monotonicity::Decreasing,
        }
    }
}

/// Counts records whose `attribute_index` equals `counted_value`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingQuery {
    pub attribute_index: usize,
    pub counted_value: bool,
    pub profile: SensitivityProfile,
}

impl CountingQuery {
    /// Builds the query and classifies it analytically under `policy`.
    pub fn new(attribute_index: usize, counted_value: bool, policy: &Policy) -> Result<Self> {
        let profile = classify_sensitivity(attribute_index, counted_value, policy)?;
        Ok(Self {
            attribute_index,
            counted_value,
            profile,
        })
    }

    /// Query with a caller-supplied profile (no classification performed).
    pub fn with_profile(
        attribute_index: usize,
        counted_value: bool,
        profile: SensitivityProfile,
    ) -> Self {
        Self {
            attribute_index,
            counted_value,
            profile,
        }
    }

    pub fn evaluate(&self, dataset: &Dataset) -> Result<u64> {
        if self.attribute_index >= dataset.attribute_count() {
            return Err(AdpError::DimensionMismatch {
                expected: dataset.attribute_count(),
                actual: self.attribute_index + 1,
            });
        }
        Ok(dataset.count_value(self.attribute_index, self.counted_value))
    }
}

/// All P-neighbours of `record`, including the record itself, in
/// lexicographic order.
pub fn p_neighbors_record(record: &Record, policy: &Policy) -> Result<Vec<Record>> {
    p_neighbors_record_capped(record, policy, DEFAULT_NEIGHBOR_CAP)
}

pub fn p_neighbors_record_capped(
    record: &Record,
    policy: &Policy,
    cap: usize,
) -> Result<Vec<Record>> {
    policy.check_dim(record.len())?;
    let free: Vec<usize> = (0..record.len())
        .filter(|&i| policy.is_sensitive(i, record.get(i)))
        .collect();
    if free.len() >= usize::BITS as usize - 1 || (1usize << free.len()) > cap {
        return Err(AdpError::CombinatorialBlowup { cap });
    }
    let mut out = Vec::with_capacity(1 << free.len());
    for mask in 0..(1usize << free.len()) {
        let mut values = record.values().to_vec();
        for (bit, &attr) in free.iter().enumerate() {
            values[attr] = mask >> bit & 1 == 1;
        }
        out.push(Record::new(values));
    }
    out.sort();
    Ok(out)
}

/// Whether `candidate` is a P-neighbouring dataset of `dataset`: identical, or
/// differing in exactly one record index where the replacement is a
/// P-neighbour of the original record.
pub fn is_p_neighbor_dataset(dataset: &Dataset, candidate: &Dataset, policy: &Policy) -> Result<bool> {
    if dataset.attribute_count() != candidate.attribute_count() || dataset.len() != candidate.len()
    {
        return Err(AdpError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            dataset.len(),
            dataset.attribute_count(),
            candidate.len(),
            candidate.attribute_count()
        )));
    }
    policy.check_dim(dataset.attribute_count())?;
    let mut differing = dataset
        .records()
        .iter()
        .zip(candidate.records())
        .filter(|(a, b)| a != b);
    match (differing.next(), differing.next()) {
        (None, _) => Ok(true),
        (Some((from, to)), None) => policy.allows(from, to),
        _ => Ok(false),
    }
}

/// Every P-neighbouring dataset of `dataset`, deduplicated, with `dataset`
/// itself first.
pub fn p_neighbor_datasets(dataset: &Dataset, policy: &Policy, cap: usize) -> Result<Vec<Dataset>> {
    policy.check_dim(dataset.attribute_count())?;
    let mut seen = HashSet::new();
    let mut out = vec![dataset.clone()];
    seen.insert(dataset.clone());
    for (index, record) in dataset.records().iter().enumerate() {
        for neighbor in p_neighbors_record_capped(record, policy, cap)? {
            if &neighbor == record {
                continue;
            }
            let candidate = dataset.with_record(index, neighbor);
            if seen.insert(candidate.clone()) {
                if out.len() >= cap {
                    return Err(AdpError::CombinatorialBlowup { cap });
                }
                out.push(candidate);
            }
        }
    }
    Ok(out)
}

/// Analytic P-sensitivity of a counting query over one binary attribute.
///
/// A neighbour may rewrite the counted attribute only from a sensitive value.
/// If only the counted value is sensitive the count can only drop; if only
/// the other value is sensitive it can only rise; if both are, either; if
/// neither, the query is constant over the relation (delta 0, reported as
/// `Decreasing`).
pub fn classify_sensitivity(
    attribute_index: usize,
    counted_value: bool,
    policy: &Policy,
) -> Result<SensitivityProfile> {
    if attribute_index >= policy.attribute_count() {
        return Err(AdpError::DimensionMismatch {
            expected: policy.attribute_count(),
            actual: attribute_index + 1,
        });
    }
    let attr = policy.attribute(attribute_index);
    let counted = attr.is_sensitive(counted_value);
    let other = attr.is_sensitive(!counted_value);
    match (counted, other) {
        (true, false) => SensitivityProfile::new(1.0, Monotonicity::Decreasing),
        (false, true) => SensitivityProfile::new(1.0, Monotonicity::Increasing),
        (true, true) => SensitivityProfile::new(1.0, Monotonicity::NonMonotone),
        (false, false) => SensitivityProfile::new(0.0, Monotonicity::Decreasing),
    }
}

/// Brute-force P-sensitivity of an arbitrary integer query over a corpus of
/// datasets: the supremum of `|f(D') - f(D)|` and the sign pattern of
/// `f(D') - f(D)` over every `D` in `corpus` and every P-neighbour `D'`.
///
/// A corpus with no observed change yields delta 0, reported as `Decreasing`.
pub fn classify_by_enumeration(
    query: impl Fn(&Dataset) -> i64,
    corpus: &[Dataset],
    policy: &Policy,
    cap: usize,
) -> Result<SensitivityProfile> {
    let mut delta = 0i64;
    let (mut saw_up, mut saw_down) = (false, false);
    for dataset in corpus {
        let base = query(dataset);
        for neighbor in p_neighbor_datasets(dataset, policy, cap)? {
            let diff = query(&neighbor) - base;
            delta = delta.max(diff.abs());
            saw_up |= diff > 0;
            saw_down |= diff < 0;
        }
    }
    let monotonicity = match (saw_up, saw_down) {
        (true, true) => Monotonicity::NonMonotone,
        (true, false) => Monotonicity::Increasing,
        _ => Monotonicity::Decreasing,
    };
    SensitivityProfile::new(delta as f64, monotonicity)
}

/// Fewest P-neighbour hops from `dataset` to a dataset where `predicate`
/// differs from its value on `dataset`.
pub fn min_step(
    dataset: &Dataset,
    predicate: impl Fn(&Dataset) -> bool,
    policy: &Policy,
    max_steps: usize,
) -> Result<usize> {
    min_step_capped(dataset, predicate, policy, max_steps, DEFAULT_BFS_NODE_CAP)
}

pub fn min_step_capped(
    dataset: &Dataset,
    predicate: impl Fn(&Dataset) -> bool,
    policy: &Policy,
    max_steps: usize,
    node_cap: usize,
) -> Result<usize> {
    let start = predicate(dataset);
    let mut seen = HashSet::new();
    seen.insert(dataset.clone());
    let mut frontier = VecDeque::from([(dataset.clone(), 0usize)]);
    while let Some((current, depth)) = frontier.pop_front() {
        if depth == max_steps {
            continue;
        }
        for next in p_neighbor_datasets(&current, policy, DEFAULT_NEIGHBOR_CAP)? {
            if !seen.insert(next.clone()) {
                continue;
            }
            if predicate(&next) != start {
                return Ok(depth + 1);
            }
            if seen.len() > node_cap {
                return Err(AdpError::CombinatorialBlowup { cap: node_cap });
            }
            frontier.push_back((next, depth + 1));
        }
    }
    Err(AdpError::Unreachable { cap: max_steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(bits: &[u8]) -> Record {
        Record::from_bits(bits).unwrap()
    }

    fn all_datasets(n: usize, d: usize) -> Vec<Dataset> {
        let universe: Vec<Record> = (0..1usize << d)
            .map(|m| Record::new((0..d).map(|i| m >> i & 1 == 1).collect()))
            .collect();
        let mut out = vec![];
        let total = universe.len().pow(n as u32);
        for mut code in 0..total {
            let mut rows = vec![];
            for _ in 0..n {
                rows.push(universe[code % universe.len()].clone());
                code /= universe.len();
            }
            out.push(Dataset::new(d, rows).unwrap());
        }
        out
    }

    #[test]
    fn bob_has_two_neighbors() {
        let p = Policy::visited_is_sensitive(2);
        let n = p_neighbors_record(&rec(&[1, 0]), &p).unwrap();
        assert_eq!(n, vec![rec(&[0, 0]), rec(&[1, 0])]);
    }

    #[test]
    fn tom_only_neighbors_himself() {
        let p = Policy::visited_is_sensitive(2);
        assert_eq!(p_neighbors_record(&rec(&[0, 0]), &p).unwrap(), vec![rec(&[0, 0])]);
    }

    #[test]
    fn alice_neighbors_include_the_three_listed() {
        let p = Policy::visited_is_sensitive(2);
        let n = p_neighbors_record(&rec(&[1, 1]), &p).unwrap();
        for r in [rec(&[0, 0]), rec(&[0, 1]), rec(&[1, 0])] {
            assert!(n.contains(&r));
        }
    }

    #[test]
    fn all_sensitive_gives_full_universe() {
        let p = Policy::all_sensitive(2);
        for bits in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            assert_eq!(p_neighbors_record(&rec(&bits), &p).unwrap().len(), 4);
        }
    }

    #[test]
    fn neighbor_cap_is_an_error() {
        let p = Policy::all_sensitive(13);
        let r = Record::new(vec![false; 13]);
        assert_eq!(
            p_neighbors_record(&r, &p),
            Err(AdpError::CombinatorialBlowup { cap: 4096 })
        );
        assert_eq!(p_neighbors_record_capped(&rec(&[1, 1]), &Policy::all_sensitive(2), 3).unwrap_err().kind(), "combinatorial_blowup");
    }

    #[test]
    fn dimension_mismatch() {
        let p = Policy::visited_is_sensitive(3);
        assert!(matches!(
            p_neighbors_record(&rec(&[1, 0]), &p),
            Err(AdpError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dataset_relation_is_directional() {
        let p = Policy::visited_is_sensitive(2);
        let bob = Dataset::from_rows(2, &[&[1, 0]]).unwrap();
        let zero = Dataset::from_rows(2, &[&[0, 0]]).unwrap();
        let raised = Dataset::from_rows(2, &[&[1, 0]]).unwrap();
        assert!(is_p_neighbor_dataset(&bob, &zero, &p).unwrap());
        assert!(!is_p_neighbor_dataset(&zero, &raised, &p).unwrap());
        assert!(is_p_neighbor_dataset(&zero, &zero, &p).unwrap());
    }

    #[test]
    fn dataset_relation_rejects_two_changes_and_shape_mismatch() {
        let p = Policy::all_sensitive(1);
        let a = Dataset::from_rows(1, &[&[1], &[1]]).unwrap();
        let b = Dataset::from_rows(1, &[&[0], &[0]]).unwrap();
        assert!(!is_p_neighbor_dataset(&a, &b, &p).unwrap());
        let c = Dataset::from_rows(1, &[&[1]]).unwrap();
        assert!(matches!(is_p_neighbor_dataset(&a, &c, &p), Err(AdpError::ShapeMismatch(_))));
    }

    #[test]
    fn all_sensitive_dataset_relation_is_symmetric() {
        let p = Policy::all_sensitive(2);
        let corpus = all_datasets(2, 2);
        for a in &corpus {
            for b in &corpus {
                assert_eq!(
                    is_p_neighbor_dataset(a, b, &p).unwrap(),
                    is_p_neighbor_dataset(b, a, &p).unwrap()
                );
            }
        }
    }

    #[test]
    fn analytic_classification_examples() {
        let canon = Policy::visited_is_sensitive(2);
        let dp = Policy::all_sensitive(2);
        let dec = classify_sensitivity(0, true, &canon).unwrap();
        assert_eq!((dec.delta, dec.monotonicity), (1.0, Monotonicity::Decreasing));
        let inc = classify_sensitivity(0, false, &canon).unwrap();
        assert_eq!((inc.delta, inc.monotonicity), (1.0, Monotonicity::Increasing));
        let non = classify_sensitivity(1, true, &dp).unwrap();
        assert_eq!((non.delta, non.monotonicity), (1.0, Monotonicity::NonMonotone));
        let none = Policy::from_fn(1, |_, _| false);
        assert_eq!(classify_sensitivity(0, true, &none).unwrap().delta, 0.0);
    }

    #[test]
    fn constant_query_has_zero_sensitivity() {
        let p = Policy::all_sensitive(2);
        let prof = classify_by_enumeration(|_| 42, &all_datasets(2, 2), &p, 4096).unwrap();
        assert_eq!(prof.delta, 0.0);
    }

    #[test]
    fn brute_force_agrees_on_canonical_example() {
        let p = Policy::visited_is_sensitive(2);
        let corpus = all_datasets(2, 2);
        let prof =
            classify_by_enumeration(|d| d.count_value(0, true) as i64, &corpus, &p, 4096).unwrap();
        assert_eq!((prof.delta, prof.monotonicity), (1.0, Monotonicity::Decreasing));
    }

    #[test]
    fn min_step_six_visitors_below_five() {
        let rows: Vec<&[u8]> = vec![&[1]; 6];
        let d = Dataset::from_rows(1, &rows).unwrap();
        let p = Policy::visited_is_sensitive(1);
        let k = min_step(&d, |x| x.count_value(0, true) < 5, &p, 10).unwrap();
        assert_eq!(k, 2);
    }

    #[test]
    fn min_step_single_flip() {
        let d = Dataset::from_rows(1, &[&[1], &[1]]).unwrap();
        let p = Policy::visited_is_sensitive(1);
        assert_eq!(min_step(&d, |x| x.count_value(0, true) < 2, &p, 3).unwrap(), 1);
    }

    #[test]
    fn min_step_unreachable() {
        let d = Dataset::from_rows(1, &[&[0], &[0]]).unwrap();
        let p = Policy::visited_is_sensitive(1);
        // zeros are public: the count can never rise
        assert_eq!(
            min_step(&d, |x| x.count_value(0, true) >= 1, &p, 3),
            Err(AdpError::Unreachable { cap: 3 })
        );
        let d = Dataset::from_rows(1, &[&[1], &[1]]).unwrap();
        assert_eq!(
            min_step(&d, |_| true, &Policy::all_sensitive(1), 3),
            Err(AdpError::Unreachable { cap: 3 })
        );
    }

    #[test]
    fn min_step_node_cap() {
        let rows: Vec<&[u8]> = vec![&[1, 1, 1]; 6];
        let d = Dataset::from_rows(3, &rows).unwrap();
        let p = Policy::all_sensitive(3);
        let r = min_step_capped(&d, |_| true, &p, 100, 50);
        assert_eq!(r, Err(AdpError::CombinatorialBlowup { cap: 50 }));
    }

    /// Under the all-sensitive policy, min_step is the smallest Hamming
    /// distance (number of differing records) to any dataset that flips the
    /// predicate, computed here by exhaustive enumeration.
    #[test]
    fn min_step_matches_hamming_under_all_sensitive() {
        let p = Policy::all_sensitive(2);
        let corpus = all_datasets(3, 2);
        let preds: Vec<Box<dyn Fn(&Dataset) -> bool>> = vec![
            Box::new(|d| d.count_value(0, true) < 2),
            Box::new(|d| d.count_value(0, true) + d.count_value(1, true) >= 4),
            Box::new(|d| d.count_value(1, false) == 0),
        ];
        for pred in &preds {
            for start in &corpus {
                let target = pred(start);
                let hamming = corpus
                    .iter()
                    .filter(|d| pred(d) != target)
                    .map(|d| {
                        d.records()
                            .iter()
                            .zip(start.records())
                            .filter(|(a, b)| a != b)
                            .count()
                    })
                    .min();
                let got = min_step(start, |d| pred(d), &p, 10).ok();
                assert_eq!(got, hamming);
            }
        }
    }
}
