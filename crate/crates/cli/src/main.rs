use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use adp_core::bench::{run_experiment, DataSource, ExperimentConfig, Subcommand};
use adp_core::data::{ConcentratedVisits, ZipfTransactions, DEFAULT_HOT_FRACTION, DEFAULT_LOCATIONS};
use adp_core::AdpError;
use clap::{Parser, ValueEnum};
use serde::Deserialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum SynthKind {
    Zipf,
    Visits,
    EmptyStream,
}

/// Benchmarks for asymmetric differential privacy mechanisms.
///
/// Every option can also come from an `ADP_<NAME>` environment variable or a
/// JSON config file; flags win over the environment, which wins over the file.
#[derive(Parser, Debug)]
#[command(name = "adp", version)]
struct Cli {
    /// topk-rnm, topk-svt, monitor-location, monitor-map, verify or synth
    subcommand: String,

    /// JSON file with defaults (keys as the long flag names, dashes as underscores)
    #[arg(long, env = "ADP_CONFIG")]
    config: Option<PathBuf>,

    /// Input dataset; for `synth`, where the generated dataset is written
    #[arg(long, env = "ADP_DATASET")]
    dataset: Option<PathBuf>,

    #[arg(long, value_enum, env = "ADP_SYNTH")]
    synth: Option<SynthKind>,

    #[arg(long, env = "ADP_EPSILON", value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,

    #[arg(long, env = "ADP_K", value_delimiter = ',')]
    k: Option<Vec<usize>>,

    #[arg(long, env = "ADP_C")]
    c: Option<usize>,

    #[arg(long, env = "ADP_THRESHOLD", value_delimiter = ',')]
    threshold: Option<Vec<f64>>,

    #[arg(long, env = "ADP_TRIALS")]
    trials: Option<usize>,

    #[arg(long, env = "ADP_SEED")]
    seed: Option<u64>,

    /// Subtract the known noise mean from asymmetric releases before scoring
    #[arg(long, env = "ADP_DEBIAS", action = clap::ArgAction::Set)]
    debias: Option<bool>,

    /// Report CSV; sidecars are written next to it. Stdout when absent.
    #[arg(long, env = "ADP_OUT")]
    out: Option<PathBuf>,

    #[arg(long, env = "ADP_BATCH_SIZE")]
    batch_size: Option<usize>,

    #[arg(long, env = "ADP_EXPIRY")]
    expiry: Option<i64>,

    /// Location watched by monitor-location
    #[arg(long, env = "ADP_LOCATION")]
    location: Option<u64>,

    #[arg(long, env = "ADP_BOOTSTRAP_RESAMPLES")]
    bootstrap_resamples: Option<usize>,

    /// Seed of the synthetic data generator (independent of --seed)
    #[arg(long, env = "ADP_SYNTH_SEED")]
    synth_seed: Option<u64>,

    #[arg(long, env = "ADP_RECORDS")]
    records: Option<usize>,

    #[arg(long, env = "ADP_ITEMS")]
    items: Option<usize>,

    #[arg(long, env = "ADP_EXPONENT")]
    exponent: Option<f64>,

    #[arg(long, env = "ADP_USERS")]
    users: Option<usize>,

    #[arg(long, env = "ADP_LOCATIONS")]
    locations: Option<usize>,

    #[arg(long, env = "ADP_HOT_FRACTION")]
    hot_fraction: Option<f64>,

    /// Number of updates in an empty stream
    #[arg(long, env = "ADP_UPDATES")]
    updates: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    dataset: Option<PathBuf>,
    synth: Option<SynthKind>,
    epsilon: Option<Vec<f64>>,
    k: Option<Vec<usize>>,
    c: Option<usize>,
    threshold: Option<Vec<f64>>,
    trials: Option<usize>,
    seed: Option<u64>,
    debias: Option<bool>,
    out: Option<PathBuf>,
    batch_size: Option<usize>,
    expiry: Option<i64>,
    location: Option<u64>,
    bootstrap_resamples: Option<usize>,
    synth_seed: Option<u64>,
    records: Option<usize>,
    items: Option<usize>,
    exponent: Option<f64>,
    users: Option<usize>,
    locations: Option<usize>,
    hot_fraction: Option<f64>,
    updates: Option<usize>,
}

impl Cli {
    /// Fills every unset option from `file`.
    fn layer(mut self, file: FileConfig) -> Self {
        macro_rules! fill {
            ($($f:ident),*) => { $( if self.$f.is_none() { self.$f = file.$f; } )* };
        }
        // a dataset given on the command line replaces a synth choice from the file
        if self.dataset.is_none() && self.synth.is_none() {
            self.dataset = file.dataset;
            self.synth = file.synth;
        }
        fill!(epsilon, k, c, threshold, trials, seed, debias, out, batch_size, expiry, location,
            bootstrap_resamples, synth_seed, records, items, exponent, users, locations,
            hot_fraction, updates);
        self
    }

    fn into_config(self) -> Result<(ExperimentConfig, Option<PathBuf>), AdpError> {
        let sub: Subcommand = self.subcommand.parse()?;
        let mut cfg = ExperimentConfig::new(sub);
        let synth_seed = self.synth_seed.unwrap_or(1);
        let zipf = || {
            let base = ZipfTransactions::new(10_000, 500, 1.0, synth_seed);
            ZipfTransactions {
                n_records: self.records.unwrap_or(base.n_records),
                n_items: self.items.unwrap_or(base.n_items),
                exponent: self.exponent.unwrap_or(base.exponent),
                ..base
            }
        };
        let visits = || {
            ConcentratedVisits::new(
                self.users.unwrap_or(2500),
                self.locations.unwrap_or(DEFAULT_LOCATIONS),
                self.hot_fraction.unwrap_or(DEFAULT_HOT_FRACTION),
                synth_seed,
            )
        };
        if sub != Subcommand::Synth && self.dataset.is_some() && self.synth.is_some() {
            return Err(AdpError::InvalidParameter("give either --dataset or --synth, not both".into()));
        }
        let synth_kind = self.synth.or(match sub {
            Subcommand::Synth => Some(SynthKind::Zipf),
            _ => None,
        });
        match (sub, &self.dataset, synth_kind) {
            (Subcommand::Synth, _, kind) => {
                cfg.synth_out = self.dataset.clone();
                cfg.data = match kind.unwrap_or(SynthKind::Zipf) {
                    SynthKind::Zipf => DataSource::Zipf(zipf()),
                    SynthKind::Visits => DataSource::Visits(visits()),
                    SynthKind::EmptyStream => {
                        return Err(AdpError::InvalidParameter("synth cannot write an empty stream".into()))
                    }
                };
            }
            (Subcommand::TopkRnm | Subcommand::TopkSvt, Some(path), _) => {
                cfg.data = DataSource::Transactions { path: path.clone() }
            }
            (Subcommand::MonitorLocation | Subcommand::MonitorMap, Some(path), _) => {
                cfg.data = DataSource::Trajectory { path: path.clone() }
            }
            (_, _, Some(SynthKind::Zipf)) => cfg.data = DataSource::Zipf(zipf()),
            (_, _, Some(SynthKind::Visits)) => cfg.data = DataSource::Visits(visits()),
            (_, _, Some(SynthKind::EmptyStream)) => {
                cfg.data = DataSource::EmptyStream { updates: self.updates.unwrap_or(100) }
            }
            (_, _, None) => match &mut cfg.data {
                DataSource::Zipf(z) => *z = zipf(),
                DataSource::Visits(v) => *v = visits(),
                DataSource::EmptyStream { updates } => *updates = self.updates.unwrap_or(*updates),
                _ => {}
            },
        }
        if let Some(v) = self.epsilon {
            cfg.epsilons = v;
        }
        if let Some(v) = self.k {
            cfg.ks = v;
        }
        if let Some(v) = self.threshold {
            cfg.thresholds = v;
        }
        cfg.c = self.c.or(cfg.c);
        cfg.trials = self.trials.unwrap_or(cfg.trials);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.debias = self.debias.unwrap_or(cfg.debias);
        cfg.batch_size = self.batch_size.unwrap_or(cfg.batch_size);
        cfg.expiry = self.expiry.unwrap_or(cfg.expiry);
        cfg.location = self.location.unwrap_or(cfg.location);
        cfg.bootstrap_resamples = self.bootstrap_resamples.unwrap_or(cfg.bootstrap_resamples);
        Ok((cfg, self.out))
    }
}

fn load_file_config(path: &PathBuf) -> Result<FileConfig, AdpError> {
    let text = fs::read_to_string(path).map_err(|e| AdpError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| AdpError::InvalidParameter(format!("config file {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), AdpError> {
    let file = match &cli.config {
        Some(p) => load_file_config(p)?,
        None => FileConfig::default(),
    };
    let (config, out) = cli.layer(file).into_config()?;
    let report = run_experiment(&config)?;
    match out {
        Some(path) => {
            report.write_files(&path)?;
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(report.to_csv().as_bytes())?;
            for w in &report.witnesses {
                writeln!(stdout, "# {w}")?;
            }
        }
    }
    Ok(())
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", error_line("usage", first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
