//! Timing table for serial, segment-parallel and multiplier-parallel runs.

use std::fmt::Write as _;
use std::time::Instant;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{millis, ParallelConfig, ParallelError, WorkerPool};
use crate::nt;
use crate::squfof::{self, SqufofConfig};

pub const CSV_HEADER: &str = "n_bits,method,workers,trial,wall_ms,fwd_steps,squares_tested";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMethod {
    Serial,
    Segments,
    Multipliers,
}

impl BenchMethod {
    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Serial => "serial",
            BenchMethod::Segments => "segments",
            BenchMethod::Multipliers => "multipliers",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "serial" => Some(BenchMethod::Serial),
            "segments" => Some(BenchMethod::Segments),
            "multipliers" => Some(BenchMethod::Multipliers),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n_bits: u64,
    pub method: BenchMethod,
    pub workers: usize,
    pub trial: usize,
    pub wall_ms: f64,
    pub fwd_steps: u64,
    pub squares_tested: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub n_bits: u64,
    pub method: BenchMethod,
    pub workers: usize,
    pub trials: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub stddev_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{:.4},{},{}", r.n_bits, r.method.name(), r.workers, r.trial, r.wall_ms, r.fwd_steps, r.squares_tested);
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "rows": self.rows, "summary": self.summary() })
    }

    /// Mean, median and population standard deviation per `(n_bits, method, workers)`.
    pub fn summary(&self) -> Vec<BenchSummary> {
        let mut keys: Vec<(u64, BenchMethod, usize)> = self.rows.iter().map(|r| (r.n_bits, r.method, r.workers)).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|(n_bits, method, workers)| {
                let mut v: Vec<f64> = self.rows.iter().filter(|r| (r.n_bits, r.method, r.workers) == (n_bits, method, workers)).map(|r| r.wall_ms).collect();
                v.sort_by(f64::total_cmp);
                let k = v.len();
                let mean = v.iter().sum::<f64>() / k as f64;
                let median = if k % 2 == 1 { v[k / 2] } else { (v[k / 2 - 1] + v[k / 2]) / 2.0 };
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k as f64;
                BenchSummary { n_bits, method, workers, trials: k, mean_ms: mean, median_ms: median, stddev_ms: var.sqrt() }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Bits of each prime factor; rows report the nominal `2·prime_bits`.
    pub prime_bits: Vec<u64>,
    pub workers: Vec<usize>,
    pub methods: Vec<BenchMethod>,
    pub trials: usize,
    pub seed: u64,
    pub multipliers: Vec<u64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            prime_bits: vec![24],
            workers: vec![1, 2, 4, 8],
            methods: vec![BenchMethod::Serial, BenchMethod::Segments, BenchMethod::Multipliers],
            trials: 10,
            seed: 1,
            multipliers: vec![1, 3, 5, 7, 11],
        }
    }
}

/// Runs every configured method on the same semiprimes, one pool per worker count.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchTable, ParallelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let inputs: Vec<(u64, Vec<BigUint>)> = cfg
        .prime_bits
        .iter()
        .map(|&b| (b, (0..cfg.trials).map(|_| nt::random_semiprime(b, &mut rng).0).collect()))
        .collect();
    let mut table = BenchTable::default();
    for &w in &cfg.workers {
        let mut pool = WorkerPool::new(w)?;
        for (prime_bits, ns) in &inputs {
            for &method in &cfg.methods {
                if method == BenchMethod::Serial && w != cfg.workers[0] {
                    continue;
                }
                for (trial, n) in ns.iter().enumerate() {
                    let t = Instant::now();
                    let (steps, squares) = match method {
                        BenchMethod::Serial => {
                            let (_, st) = squfof::squfof_factor_with_stats(n, &SqufofConfig::default())?;
                            (st.forward_steps, st.squares_tested)
                        }
                        BenchMethod::Segments => {
                            let r = pool.factor_segments(n, &ParallelConfig::default())?;
                            (r.report.forward_steps, r.report.squares_tested)
                        }
                        BenchMethod::Multipliers => {
                            let r = pool.factor_multipliers(n, &cfg.multipliers, None)?;
                            (r.report.forward_steps, r.report.squares_tested)
                        }
                    };
                    let workers = if method == BenchMethod::Serial { 1 } else { w };
                    table.rows.push(BenchRow { n_bits: 2 * prime_bits, method, workers, trial, wall_ms: millis(t.elapsed()), fwd_steps: steps, squares_tested: squares });
                }
            }
        }
    }
    Ok(table)
}
