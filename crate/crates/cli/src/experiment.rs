use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use gnlab_core::analysis::{mean_fertile, run_trajectory, stabilization_fraction, CensusReport};
use gnlab_core::embed::StopReason;
use gnlab_core::rng::trial_seed;
use gnlab_core::tree::io;
use gnlab_core::{critical_k, Kernel64};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.json";
pub const AGGREGATE: &str = "aggregate.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    /// `seeds[i]` drives trial `i` on its own.
    pub seeds: Vec<u64>,
    pub timestamp_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub stop: StopReason,
    pub births: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_time: Option<f64>,
    pub census: CensusReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: u64,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_k: Option<usize>,
    /// Checkpoints common to every trial.
    pub checkpoints: Vec<usize>,
    /// `mean_fertile[k - 1][i]`: ensemble mean of the `k`-fertile count at checkpoint `i`.
    pub mean_fertile: Vec<Vec<f64>>,
    /// `stabilization[k - 1]`: fraction of trials with an unchanged `k`-fertile count
    /// over the last two checkpoints.
    pub stabilization: Vec<f64>,
    pub mean_max_degree: Vec<f64>,
    pub stop_reasons: BTreeMap<String, u64>,
}

impl Aggregate {
    pub fn from_records(kernel: &Kernel64, k_max: usize, records: &[TrialRecord]) -> Self {
        let reports: Vec<CensusReport> = records.iter().map(|r| r.census.clone()).collect();
        let common = reports.iter().map(|r| r.snapshots.len()).min().unwrap_or(0);
        let trimmed: Vec<CensusReport> = reports
            .iter()
            .map(|r| CensusReport { snapshots: r.snapshots[..common].to_vec(), ..r.clone() })
            .collect();
        let checkpoints = trimmed.first().map(|r| r.snapshots.iter().map(|s| s.births).collect()).unwrap_or_default();
        let n = trimmed.len().max(1) as f64;
        let mean_max_degree = (0..common)
            .map(|i| trimmed.iter().map(|r| r.snapshots[i].max_degree as f64).sum::<f64>() / n)
            .collect();
        let mut stop_reasons = BTreeMap::new();
        for r in records {
            let key = serde_json::to_value(r.stop).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            *stop_reasons.entry(key).or_insert(0) += 1;
        }
        let p = kernel.p();
        Self {
            trials: records.len() as u64,
            p,
            critical_k: critical_k(p).ok(),
            checkpoints,
            mean_fertile: (1..=k_max).map(|k| mean_fertile(&trimmed, k)).collect(),
            stabilization: (1..=k_max).map(|k| stabilization_fraction(&trimmed, k)).collect(),
            mean_max_degree,
            stop_reasons,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("checkpoint,mean_max_degree");
        for k in 1..=self.mean_fertile.len() {
            out.push_str(&format!(",mean_fertile_{k}"));
        }
        out.push('\n');
        for (i, c) in self.checkpoints.iter().enumerate() {
            out.push_str(&format!("{c},{}", self.mean_max_degree[i]));
            for row in &self.mean_fertile {
                out.push_str(&format!(",{}", row[i]));
            }
            out.push('\n');
        }
        out
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn trial_seeds(master_seed: u64, trials: u64) -> Vec<u64> {
    (0..trials).map(|i| trial_seed(master_seed, i)).collect()
}

/// Runs trial `i` of `config` in isolation.
pub fn run_trial(config: &RunConfig, trial: u64, seed: u64, out: Option<&Path>) -> Result<TrialRecord> {
    let outcome = run_trajectory(&config.trajectory_spec(), config.stop, seed)?;
    if let Some(dir) = out {
        let stem = format!("trial_{trial:05}");
        let dir = dir.join("trials");
        write_json(&dir.join(format!("{stem}.json")), &outcome.report)?;
        write_file(&dir.join(format!("{stem}.csv")), outcome.report.to_csv().as_bytes())?;
        if config.save_trees {
            write_file(&dir.join(format!("{stem}.tree.txt")), io::to_parent_text(&outcome.tree).as_bytes())?;
            if let Some(log) = &outcome.log {
                write_file(&dir.join(format!("{stem}.log.txt")), log.to_text().as_bytes())?;
                write_file(&dir.join(format!("{stem}.log.bin")), &log.to_bytes())?;
            }
            if let Some(csv) = &outcome.birth_times_csv {
                write_file(&dir.join(format!("{stem}.births.csv")), csv.as_bytes())?;
            }
        }
    }
    Ok(TrialRecord {
        trial,
        seed,
        stop: outcome.stop,
        births: outcome.tree.size() - 1,
        final_time: outcome.final_time,
        census: outcome.report,
    })
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Runs every trial, writing the manifest, per-trial censuses and the aggregate under
/// `out`.
pub fn run_experiment(config: &RunConfig, out: &Path) -> Result<Aggregate> {
    config.validate()?;
    fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
    let seeds = trial_seeds(config.master_seed, config.trials);
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        seeds: seeds.clone(),
        timestamp_unix: now_unix(),
    };
    write_json(&out.join(MANIFEST), &manifest)?;
    let mut records = Vec::with_capacity(seeds.len());
    for (i, &seed) in seeds.iter().enumerate() {
        let rec = run_trial(config, i as u64, seed, Some(out))?;
        log::info!("trial {}/{}: {} births, {:?}", i + 1, seeds.len(), rec.births, rec.stop);
        records.push(rec);
    }
    let summary: Vec<_> = records.iter().map(|r| (r.trial, r.seed, r.stop, r.births, r.final_time)).collect();
    write_json(&out.join("trials.json"), &summary)?;
    let agg = Aggregate::from_records(&config.kernel, config.k_max, &records);
    write_json(&out.join(AGGREGATE), &agg)?;
    write_file(&out.join("aggregate.csv"), agg.to_csv().as_bytes())?;
    Ok(agg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub p: f64,
    pub k: usize,
    pub critical_k: usize,
    pub stabilization: f64,
    pub mean_first: f64,
    pub mean_last: f64,
}

pub fn p_dir_name(p: f64) -> String {
    format!("p_{p}")
}

/// Runs `template` once per exponent and tabulates the stabilization fraction of
/// every `k <= k_max`.
pub fn sweep(p_values: &[f64], template: &RunConfig, out: &Path) -> Result<Vec<PhaseRow>> {
    if p_values.is_empty() {
        bail!("no exponents given");
    }
    if let Some(p) = p_values.iter().find(|&&p| p <= 1.0 || p.is_nan()) {
        bail!("sweep exponents must exceed 1, got {p}");
    }
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &p in p_values {
        let mut cfg = template.clone();
        cfg.kernel = Kernel64::power(p)?;
        let dir = out.join(p_dir_name(p));
        let agg = run_experiment(&cfg, &dir)?;
        let kp = critical_k(p)?;
        for k in 1..=cfg.k_max {
            let series = &agg.mean_fertile[k - 1];
            rows.push(PhaseRow {
                p,
                k,
                critical_k: kp,
                stabilization: agg.stabilization[k - 1],
                mean_first: series.first().copied().unwrap_or(0.0),
                mean_last: series.last().copied().unwrap_or(0.0),
            });
        }
        runs.push(PathBuf::from(p_dir_name(p)));
    }
    write_json(&out.join("phase.json"), &rows)?;
    let mut csv = String::from("p,k,critical_k,stabilization,mean_first,mean_last\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{},{},{}\n", r.p, r.k, r.critical_k, r.stabilization, r.mean_first, r.mean_last));
    }
    write_file(&out.join("phase.csv"), csv.as_bytes())?;
    write_json(&out.join("sweep.json"), &serde_json::json!({ "p_values": p_values, "runs": runs, "template": template }))?;
    Ok(rows)
}
