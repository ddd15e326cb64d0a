//! Streaming location-safety monitors.
//!
//! [`LocationMonitor`] watches one location over a sliding expiry window;
//! [`MapMonitor`] watches every location at one designated time. Both release
//! `Safe` only when the noisy count falls below the threshold, and because the
//! noise is nonnegative a `Safe` output is never wrong. An `Unsafe` release
//! consumes the budget of every record it was computed from, after which those
//! records produce no further output.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{AdpError, Result};
use crate::noise::{exponential, PrivacyBudget};
use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Visit {
    pub user_id: u64,
    pub location_id: u64,
    pub timestamp: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitBatch {
    pub batch_index: usize,
    pub visits: Vec<Visit>,
}

impl VisitBatch {
    pub fn new(batch_index: usize, visits: Vec<Visit>) -> Self {
        Self {
            batch_index,
            visits,
        }
    }

    fn min_timestamp(&self) -> Option<i64> {
        self.visits.iter().map(|v| v.timestamp).min()
    }

    fn max_timestamp(&self) -> Option<i64> {
        self.visits.iter().map(|v| v.timestamp).max()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MonitorOutput {
    /// Noisy count below threshold; the true count is below it too.
    Safe,
    Unsafe(f64),
    /// Suppressed: the relevant records already spent their budget.
    Abstain,
}

impl MonitorOutput {
    pub fn label(&self) -> &'static str {
        match self {
            MonitorOutput::Safe => "safe",
            MonitorOutput::Unsafe(_) => "unsafe",
            MonitorOutput::Abstain => "abstain",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorEmission {
    pub update_index: usize,
    pub target: u64,
    pub output: MonitorOutput,
}

#[derive(Clone, Debug)]
struct QueuedVisit {
    user_id: u64,
    timestamp: i64,
    marked: bool,
    spent: f64,
}

/// Single-location monitor over a sliding expiry window.
#[derive(Clone, Debug)]
pub struct LocationMonitor {
    location: u64,
    budget: PrivacyBudget,
    threshold: f64,
    expiry_period: i64,
    queue: VecDeque<QueuedVisit>,
    users: HashMap<u64, usize>,
    marked: usize,
    last_timestamp: Option<i64>,
    updates: usize,
    max_spend: f64,
}

impl LocationMonitor {
    pub fn new(
        location: u64,
        budget: PrivacyBudget,
        threshold: f64,
        expiry_period: i64,
    ) -> Result<Self> {
        if expiry_period <= 0 {
            return Err(AdpError::InvalidParameter(format!(
                "expiry period must be positive, got {expiry_period}"
            )));
        }
        Ok(Self {
            location,
            budget,
            threshold,
            expiry_period,
            queue: VecDeque::new(),
            users: HashMap::new(),
            marked: 0,
            last_timestamp: None,
            updates: 0,
            max_spend: 0.0,
        })
    }

    /// Distinct users currently in the window who visited the location.
    pub fn true_count(&self) -> u64 {
        self.users.len() as u64
    }

    pub fn is_suppressed(&self) -> bool {
        self.marked > 0
    }

    /// Largest cumulative budget charged to any record seen so far.
    pub fn max_record_spend(&self) -> f64 {
        self.max_spend
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn step(&mut self, batch: &VisitBatch, rng: &mut RandomSource) -> Result<MonitorEmission> {
        if let (Some(prev), Some(first)) = (self.last_timestamp, batch.min_timestamp()) {
            if first < prev {
                return Err(AdpError::OutOfOrderBatch {
                    previous: prev,
                    got: first,
                });
            }
        }
        if let Some(last) = batch.max_timestamp() {
            self.last_timestamp = Some(last);
        }

        let mut incoming: Vec<&Visit> = batch
            .visits
            .iter()
            .filter(|v| v.location_id == self.location)
            .collect();
        incoming.sort_by_key(|v| v.timestamp);
        for v in incoming {
            *self.users.entry(v.user_id).or_default() += 1;
            self.queue.push_back(QueuedVisit {
                user_id: v.user_id,
                timestamp: v.timestamp,
                marked: false,
                spent: 0.0,
            });
        }
        if let Some(now) = self.last_timestamp {
            while let Some(front) = self.queue.front() {
                if now - front.timestamp < self.expiry_period {
                    break;
                }
                let gone = self.queue.pop_front().expect("front exists");
                if gone.marked {
                    self.marked -= 1;
                }
                if let Some(n) = self.users.get_mut(&gone.user_id) {
                    *n -= 1;
                    if *n == 0 {
                        self.users.remove(&gone.user_id);
                    }
                }
            }
        }

        let update_index = self.updates;
        self.updates += 1;
        let output = if self.marked > 0 {
            MonitorOutput::Abstain
        } else {
            let z = self.true_count() as f64 + exponential(1.0 / self.budget.epsilon(), rng);
            if z >= self.threshold {
                let eps = self.budget.epsilon();
                for v in self.queue.iter_mut() {
                    v.marked = true;
                    v.spent += eps;
                    self.max_spend = self.max_spend.max(v.spent);
                }
                self.marked = self.queue.len();
                MonitorOutput::Unsafe(z)
            } else {
                MonitorOutput::Safe
            }
        };
        Ok(MonitorEmission {
            update_index,
            target: self.location,
            output,
        })
    }
}

/// Budget per monitor when `monitors` location monitors share one budget.
pub fn split_budget(budget: PrivacyBudget, monitors: usize) -> Result<PrivacyBudget> {
    budget.split(monitors)
}

/// Monitor for all locations at one designated time. Each user contributes at
/// most one location.
#[derive(Clone, Debug)]
pub struct MapMonitor {
    locations: Vec<u64>,
    thresholds: Vec<f64>,
    budget: PrivacyBudget,
    user_location: HashMap<u64, u64>,
    counts: HashMap<u64, u64>,
    marks: HashMap<u64, bool>,
    last_timestamp: Option<i64>,
    updates: usize,
}

impl MapMonitor {
    /// `thresholds` holds either one shared threshold or one per location.
    pub fn new(locations: Vec<u64>, thresholds: Vec<f64>, budget: PrivacyBudget) -> Result<Self> {
        let thresholds = match thresholds.len() {
            1 => vec![thresholds[0]; locations.len()],
            n if n == locations.len() => thresholds,
            n => {
                return Err(AdpError::DimensionMismatch {
                    expected: locations.len(),
                    actual: n,
                })
            }
        };
        let marks = locations.iter().map(|&l| (l, false)).collect();
        Ok(Self {
            locations,
            thresholds,
            budget,
            user_location: HashMap::new(),
            counts: HashMap::new(),
            marks,
            last_timestamp: None,
            updates: 0,
        })
    }

    pub fn locations(&self) -> &[u64] {
        &self.locations
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn true_count(&self, location: u64) -> u64 {
        self.counts.get(&location).copied().unwrap_or(0)
    }

    pub fn is_marked(&self, location: u64) -> bool {
        self.marks.get(&location).copied().unwrap_or(false)
    }

    /// Budget charged to a user's record: epsilon if its location released an
    /// Unsafe value, else zero.
    pub fn record_spend(&self, user_id: u64) -> f64 {
        match self.user_location.get(&user_id) {
            Some(l) if self.is_marked(*l) => self.budget.epsilon(),
            _ => 0.0,
        }
    }

    pub fn step(
        &mut self,
        batch: &VisitBatch,
        rng: &mut RandomSource,
    ) -> Result<Vec<MonitorEmission>> {
        if let (Some(prev), Some(first)) = (self.last_timestamp, batch.min_timestamp()) {
            if first < prev {
                return Err(AdpError::OutOfOrderBatch {
                    previous: prev,
                    got: first,
                });
            }
        }
        // validate the whole batch before touching state
        let mut pending: HashMap<u64, u64> = HashMap::new();
        for v in &batch.visits {
            let existing = self
                .user_location
                .get(&v.user_id)
                .or_else(|| pending.get(&v.user_id));
            match existing {
                Some(&l) if l != v.location_id => {
                    return Err(AdpError::DuplicateUser {
                        user: v.user_id,
                        existing: l,
                        conflicting: v.location_id,
                    })
                }
                Some(_) => {}
                None => {
                    pending.insert(v.user_id, v.location_id);
                }
            }
        }
        if let Some(last) = batch.max_timestamp() {
            self.last_timestamp = Some(last);
        }
        for v in &batch.visits {
            if let Some(l) = pending.remove(&v.user_id) {
                self.user_location.insert(v.user_id, l);
                *self.counts.entry(l).or_default() += 1;
            }
        }

        let update_index = self.updates;
        self.updates += 1;
        let scale = 1.0 / self.budget.epsilon();
        let mut out = Vec::with_capacity(self.locations.len());
        for (&location, &threshold) in self.locations.iter().zip(&self.thresholds) {
            let output = if self.marks[&location] {
                MonitorOutput::Abstain
            } else {
                let z = self.true_count(location) as f64 + exponential(scale, rng);
                if z >= threshold {
                    self.marks.insert(location, true);
                    MonitorOutput::Unsafe(z)
                } else {
                    MonitorOutput::Safe
                }
            };
            out.push(MonitorEmission {
                update_index,
                target: location,
                output,
            });
        }
        Ok(out)
    }
}

/// How a visit stream is cut into batches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Batching {
    /// A blank line ends a batch.
    BlankLine,
    FixedSize(usize),
}

pub(crate) fn parse_visit_line(line: &str, line_no: usize) -> Result<Visit> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 3 {
        return Err(AdpError::Parse {
            line: line_no,
            message: format!("expected 3 comma-separated fields, got {}", fields.len()),
        });
    }
    let bad = |what: &str, tok: &str| AdpError::Parse {
        line: line_no,
        message: format!("invalid {what} {tok:?}"),
    };
    Ok(Visit {
        user_id: fields[0].parse().map_err(|_| bad("user_id", fields[0]))?,
        location_id: fields[1].parse().map_err(|_| bad("location_id", fields[1]))?,
        timestamp: fields[2].parse().map_err(|_| bad("timestamp", fields[2]))?,
    })
}

/// Reads newline-delimited `user_id,location_id,timestamp` records.
pub fn read_visit_stream(reader: impl BufRead, batching: Batching) -> Result<Vec<VisitBatch>> {
    if batching == Batching::FixedSize(0) {
        return Err(AdpError::InvalidParameter("batch size must be positive".into()));
    }
    let mut batches = Vec::new();
    let mut current = Vec::new();
    let flush = |current: &mut Vec<Visit>, batches: &mut Vec<VisitBatch>| {
        if !current.is_empty() {
            let index = batches.len();
            batches.push(VisitBatch::new(index, std::mem::take(current)));
        }
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            if batching == Batching::BlankLine {
                flush(&mut current, &mut batches);
            }
            continue;
        }
        current.push(parse_visit_line(&line, i + 1)?);
        if let Batching::FixedSize(n) = batching {
            if current.len() == n {
                flush(&mut current, &mut batches);
            }
        }
    }
    flush(&mut current, &mut batches);
    Ok(batches)
}

/// Formats one emission as `update_index,target,verdict,value`. Safe carries
/// value 0, Abstain an empty value.
pub fn format_emission(e: &MonitorEmission) -> String {
    let mut s = String::new();
    let value = match e.output {
        MonitorOutput::Safe => "0".to_string(),
        MonitorOutput::Unsafe(z) => z.to_string(),
        MonitorOutput::Abstain => String::new(),
    };
    let _ = write!(s, "{},{},{},{}", e.update_index, e.target, e.output.label(), value);
    s
}

pub fn write_emissions(mut writer: impl Write, emissions: &[MonitorEmission]) -> Result<()> {
    writeln!(writer, "update_index,target,verdict,value")?;
    for e in emissions {
        writeln!(writer, "{}", format_emission(e))?;
    }
    Ok(())
}
