//! Dataset ingestion and synthetic generators.
//!
//! Transactions use the frequent-itemset interchange format: one record per
//! line, whitespace-separated integer item ids. Trajectories are
//! `user_id,location_id,timestamp` lines.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{AdpError, Result};
use crate::monitor::{parse_visit_line, Visit, VisitBatch};
use crate::policy::{Dataset, Record};
use crate::rng::RandomSource;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionDataset {
    /// Each record is a sorted, deduplicated item set.
    pub records: Vec<Vec<u32>>,
    /// Sorted ids of every item that occurs in some record.
    pub item_universe: Vec<u32>,
}

impl TransactionDataset {
    pub fn from_records(records: Vec<Vec<u32>>) -> Self {
        let mut universe = BTreeSet::new();
        let records = records
            .into_iter()
            .map(|mut r| {
                r.sort_unstable();
                r.dedup();
                universe.extend(r.iter().copied());
                r
            })
            .collect();
        Self {
            records,
            item_universe: universe.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Occurrence count of every universe item, aligned with `item_universe`.
    pub fn item_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.item_universe.len()];
        for r in &self.records {
            for item in r {
                let pos = self
                    .item_universe
                    .binary_search(item)
                    .expect("record items are in the universe");
                counts[pos] += 1;
            }
        }
        counts
    }

    pub fn count(&self, item: u32) -> u64 {
        self.records
            .iter()
            .filter(|r| r.binary_search(&item).is_ok())
            .count() as u64
    }

    /// Binary dataset with one attribute per universe item (value 1 when the
    /// record contains it).
    pub fn to_dataset(&self) -> Result<Dataset> {
        let d = self.item_universe.len();
        let records = self
            .records
            .iter()
            .map(|r| {
                // an empty universe still needs one (never set) column
                let mut values = vec![false; d.max(1)];
                for item in r {
                    let pos = self
                        .item_universe
                        .binary_search(item)
                        .expect("record items are in the universe");
                    values[pos] = true;
                }
                Record::new(values)
            })
            .collect();
        Dataset::new(d.max(1), records)
    }

    pub fn write(&self, mut writer: impl Write) -> Result<()> {
        for r in &self.records {
            let line: Vec<String> = r.iter().map(u32::to_string).collect();
            writeln!(writer, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

pub fn parse_transactions(reader: impl BufRead) -> Result<TransactionDataset> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let record = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<u32>().map_err(|_| AdpError::Parse {
                    line: i + 1,
                    message: format!("invalid item id {tok:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(record);
    }
    Ok(TransactionDataset::from_records(records))
}

pub fn load_transactions(path: impl AsRef<Path>) -> Result<TransactionDataset> {
    let file = File::open(path.as_ref())
        .map_err(|e| AdpError::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_transactions(BufReader::new(file))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZipfTransactions {
    pub n_records: usize,
    pub n_items: usize,
    pub exponent: f64,
    /// Item draws per record (duplicates collapse, so records may be shorter).
    pub draws_per_record: usize,
    pub seed: u64,
}

impl ZipfTransactions {
    pub const DEFAULT_DRAWS_PER_RECORD: usize = 8;

    pub fn new(n_records: usize, n_items: usize, exponent: f64, seed: u64) -> Self {
        Self {
            n_records,
            n_items,
            exponent,
            draws_per_record: Self::DEFAULT_DRAWS_PER_RECORD,
            seed,
        }
    }

    /// Item ids are `1..=n_items`; popularity ranks are assigned to a random
    /// permutation of the ids so that id order carries no information.
    pub fn generate(&self) -> Result<TransactionDataset> {
        if self.n_items == 0 {
            return Err(AdpError::InvalidParameter("n_items must be at least 1".into()));
        }
        if !(self.exponent > 0.0 && self.exponent.is_finite()) {
            return Err(AdpError::InvalidParameter(format!(
                "zipf exponent must be positive, got {}",
                self.exponent
            )));
        }
        if self.draws_per_record == 0 {
            return Err(AdpError::InvalidParameter("draws_per_record must be positive".into()));
        }
        let mut rng = RandomSource::new(self.seed, 0);
        let mut ids: Vec<u32> = (1..=self.n_items as u32).collect();
        ids.shuffle(&mut rng);
        let weights: Vec<f64> = (1..=self.n_items)
            .map(|r| (r as f64).powf(-self.exponent))
            .collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| AdpError::InvalidParameter(format!("zipf weights: {e}")))?;
        let records = (0..self.n_records)
            .map(|_| {
                (0..self.draws_per_record)
                    .map(|_| ids[dist.sample(&mut rng)])
                    .collect()
            })
            .collect();
        Ok(TransactionDataset::from_records(records))
    }
}

pub fn synth_zipf_transactions(
    n_records: usize,
    n_items: usize,
    exponent: f64,
    seed: u64,
) -> Result<TransactionDataset> {
    ZipfTransactions::new(n_records, n_items, exponent, seed).generate()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    pub visits: Vec<Visit>,
    /// Sorted ids of every known location, visited or not.
    pub location_universe: Vec<u64>,
}

impl TrajectoryDataset {
    pub fn new(visits: Vec<Visit>, extra_locations: impl IntoIterator<Item = u64>) -> Self {
        let mut universe: BTreeSet<u64> = extra_locations.into_iter().collect();
        universe.extend(visits.iter().map(|v| v.location_id));
        Self {
            visits,
            location_universe: universe.into_iter().collect(),
        }
    }

    /// Consecutive batches of `size` visits.
    pub fn batches(&self, size: usize) -> Result<Vec<VisitBatch>> {
        if size == 0 {
            return Err(AdpError::InvalidParameter("batch size must be positive".into()));
        }
        Ok(self
            .visits
            .chunks(size)
            .enumerate()
            .map(|(i, c)| VisitBatch::new(i, c.to_vec()))
            .collect())
    }

    /// Keeps each user's first visit only.
    pub fn one_visit_per_user(&self) -> TrajectoryDataset {
        let mut seen = HashSet::new();
        let visits = self
            .visits
            .iter()
            .filter(|v| seen.insert(v.user_id))
            .copied()
            .collect();
        TrajectoryDataset {
            visits,
            location_universe: self.location_universe.clone(),
        }
    }

    pub fn write(&self, mut writer: impl Write) -> Result<()> {
        for v in &self.visits {
            writeln!(writer, "{},{},{}", v.user_id, v.location_id, v.timestamp)?;
        }
        Ok(())
    }
}

pub fn parse_trajectory(reader: impl BufRead) -> Result<TrajectoryDataset> {
    let mut visits = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        visits.push(parse_visit_line(&line, i + 1)?);
    }
    Ok(TrajectoryDataset::new(visits, []))
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<TrajectoryDataset> {
    let file = File::open(path.as_ref())
        .map_err(|e| AdpError::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_trajectory(BufReader::new(file))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentratedVisits {
    pub n_users: usize,
    pub n_locations: usize,
    /// Fraction of locations that are hot spots.
    pub hot_fraction: f64,
    /// Fraction of users who visit a hot spot; the rest pick uniformly.
    pub hot_share: f64,
    /// Zipf exponent of popularity among hot spots.
    pub hot_exponent: f64,
    pub seed: u64,
}

impl ConcentratedVisits {
    pub fn new(n_users: usize, n_locations: usize, hot_fraction: f64, seed: u64) -> Self {
        Self {
            n_users,
            n_locations,
            hot_fraction,
            hot_share: 0.95,
            hot_exponent: 1.0,
            seed,
        }
    }

    /// One visit per user (user `i` at timestamp `i`), so the stream suits
    /// designated-time monitoring and cuts into batches by index.
    pub fn generate(&self) -> Result<TrajectoryDataset> {
        if !(self.hot_fraction > 0.0 && self.hot_fraction < 1.0) {
            return Err(AdpError::InvalidParameter(format!(
                "hot_fraction must be in (0, 1), got {}",
                self.hot_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.hot_share) || self.n_locations == 0 {
            return Err(AdpError::InvalidParameter(
                "need 0 <= hot_share <= 1 and at least one location".into(),
            ));
        }
        let mut rng = RandomSource::new(self.seed, 0);
        let mut locations: Vec<u64> = (0..self.n_locations as u64).collect();
        locations.shuffle(&mut rng);
        let n_hot = ((self.n_locations as f64 * self.hot_fraction).ceil() as usize).max(1);
        let hot = &locations[..n_hot];
        let weights: Vec<f64> = (1..=n_hot)
            .map(|r| (r as f64).powf(-self.hot_exponent))
            .collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| AdpError::InvalidParameter(format!("hot weights: {e}")))?;
        let visits = (0..self.n_users)
            .map(|i| {
                let location_id = if rng.uniform_open() < self.hot_share {
                    hot[dist.sample(&mut rng)]
                } else {
                    rng.uniform_inclusive(0, self.n_locations as u64 - 1)
                };
                Visit {
                    user_id: i as u64,
                    location_id,
                    timestamp: i as i64,
                }
            })
            .collect();
        Ok(TrajectoryDataset::new(visits, 0..self.n_locations as u64))
    }
}

pub const DEFAULT_LOCATIONS: usize = 5835;
pub const DEFAULT_HOT_FRACTION: f64 = 0.02;

pub fn synth_concentrated_visits(
    n_users: usize,
    n_locations: usize,
    hot_fraction: f64,
    seed: u64,
) -> Result<TrajectoryDataset> {
    ConcentratedVisits::new(n_users, n_locations, hot_fraction, seed).generate()
}
