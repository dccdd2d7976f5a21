//! Median-rank benchmark on the synthetic datasets: for every sample size
//! and run, generate data, rank the features with each method and record the
//! ranks of the two relevant features (0 and 1).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{mutual_info_rank, pearson_rank};
use crate::data::{Dataset, SynthKind};
use crate::error::{Error, Result};
use crate::kernels::median_in_place;
use crate::rng::derive_seed;
use crate::selection::{bahsic, fohsic, SelectionConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Features carrying the signal in every generator.
pub const RELEVANT_FEATURES: [usize; 2] = [0, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMethod {
    Bahsic,
    Fohsic,
    Pearson,
    Mi,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 4] = [
        BenchMethod::Bahsic,
        BenchMethod::Fohsic,
        BenchMethod::Pearson,
        BenchMethod::Mi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Bahsic => "bahsic",
            BenchMethod::Fohsic => "fohsic",
            BenchMethod::Pearson => "pearson",
            BenchMethod::Mi => "mi",
        }
    }

    /// 1-based ranks of [`RELEVANT_FEATURES`] on `data`.
    pub fn relevant_ranks(self, data: &Dataset, seed: u64) -> Result<[usize; 2]> {
        let rank = |r: Option<usize>| r.expect("feature index in range");
        match self {
            BenchMethod::Bahsic | BenchMethod::Fohsic => {
                let config = SelectionConfig {
                    seed,
                    ..SelectionConfig::default()
                };
                let ranking = if self == BenchMethod::Bahsic {
                    bahsic(data, &config)?
                } else {
                    fohsic(data, &config)?
                };
                Ok(RELEVANT_FEATURES.map(|j| rank(ranking.rank_of(j))))
            }
            BenchMethod::Pearson => {
                let s = pearson_rank(data)?;
                Ok(RELEVANT_FEATURES.map(|j| rank(s.rank_of(j))))
            }
            BenchMethod::Mi => {
                let s = mutual_info_rank(data, None)?;
                Ok(RELEVANT_FEATURES.map(|j| rank(s.rank_of(j))))
            }
        }
    }
}

impl std::str::FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchMethod::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub dataset: SynthKind,
    pub sizes: Vec<usize>,
    pub runs: usize,
    pub methods: Vec<BenchMethod>,
    pub seed: u64,
}

impl BenchmarkConfig {
    /// Sizes 40, 80, ..., 400 with 10 runs and every method.
    pub fn new(dataset: SynthKind, seed: u64) -> Self {
        Self {
            dataset,
            sizes: (1..=10).map(|k| 40 * k).collect(),
            runs: 10,
            methods: BenchMethod::ALL.to_vec(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub method: BenchMethod,
    pub size: usize,
    pub status: CellStatus,
    /// Median of the pooled `2 * runs` rank values.
    pub median_rank: Option<f64>,
    /// Ranks of features 0 and 1 for each run, flattened run by run.
    pub ranks: Vec<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeed {
    pub size: usize,
    pub run: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema_version: u32,
    pub dataset: String,
    pub sizes: Vec<usize>,
    pub runs: usize,
    pub methods: Vec<BenchMethod>,
    pub seed: u64,
    pub n_features: usize,
    pub relevant_features: Vec<usize>,
    pub run_seeds: Vec<RunSeed>,
    pub cells: Vec<BenchCell>,
}

impl BenchmarkReport {
    pub fn cell(&self, method: BenchMethod, size: usize) -> Option<&BenchCell> {
        self.cells.iter().find(|c| c.method == method && c.size == size)
    }
}

/// Seed of run `run` at sample size `size`.
pub fn run_seed(base: u64, size: usize, run: usize) -> u64 {
    derive_seed(base, &[size as u64, run as u64])
}

/// Median of the pooled ranks; the mean of the two middle values for an even
/// count.
pub fn pooled_median(ranks: &[usize]) -> Option<f64> {
    if ranks.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = ranks.iter().map(|&r| r as f64).collect();
    Some(median_in_place(&mut v))
}

pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if config.runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    if config.sizes.is_empty() || config.methods.is_empty() {
        return Err(Error::InvalidParameter("need at least one size and one method".into()));
    }
    let jobs: Vec<(usize, usize)> = config
        .sizes
        .iter()
        .flat_map(|&s| (0..config.runs).map(move |r| (s, r)))
        .collect();

    // one entry per (size, run), in job order
    let outcomes: Vec<Vec<Result<[usize; 2]>>> = jobs
        .par_iter()
        .map(|&(size, run)| {
            let seed = run_seed(config.seed, size, run);
            match config.dataset.generate(size, seed) {
                Ok(data) => config
                    .methods
                    .par_iter()
                    .map(|m| m.relevant_ranks(&data, seed))
                    .collect(),
                Err(e) => config
                    .methods
                    .iter()
                    .map(|_| Err(Error::InvalidParameter(e.to_string())))
                    .collect(),
            }
        })
        .collect();

    let mut cells = Vec::new();
    for (mi, &method) in config.methods.iter().enumerate() {
        for &size in &config.sizes {
            let mut ranks = Vec::with_capacity(2 * config.runs);
            let mut error = None;
            for (job, out) in jobs.iter().zip(&outcomes) {
                if job.0 != size {
                    continue;
                }
                match &out[mi] {
                    Ok(r) => ranks.extend_from_slice(r),
                    Err(e) => {
                        error.get_or_insert_with(|| e.to_string());
                    }
                }
            }
            let cell = match error {
                None => BenchCell {
                    method,
                    size,
                    status: CellStatus::Ok,
                    median_rank: pooled_median(&ranks),
                    ranks,
                    error: None,
                },
                Some(msg) => BenchCell {
                    method,
                    size,
                    status: CellStatus::Failed,
                    median_rank: None,
                    ranks: Vec::new(),
                    error: Some(msg),
                },
            };
            cells.push(cell);
        }
    }

    Ok(BenchmarkReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset: config.dataset.name().to_string(),
        sizes: config.sizes.clone(),
        runs: config.runs,
        methods: config.methods.clone(),
        seed: config.seed,
        n_features: crate::data::SYNTH_FEATURES,
        relevant_features: RELEVANT_FEATURES.to_vec(),
        run_seeds: jobs
            .iter()
            .map(|&(size, run)| RunSeed {
                size,
                run,
                seed: run_seed(config.seed, size, run),
            })
            .collect(),
        cells,
    })
}

/// Writes `method,size,status,median_rank` rows.
pub fn write_table<W: Write>(report: &BenchmarkReport, mut w: W) -> Result<()> {
    writeln!(w, "method,size,status,median_rank")?;
    for c in &report.cells {
        let status = match c.status {
            CellStatus::Ok => "ok",
            CellStatus::Failed => "failed",
        };
        let median = c.median_rank.map(|v| v.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{}", c.method.name(), c.size, status, median)?;
    }
    Ok(())
}
