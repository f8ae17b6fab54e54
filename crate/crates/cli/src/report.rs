use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::checks::LemmaReport;
use crate::experiment::{read_json, write_file, Aggregate, Manifest, AGGREGATE, MANIFEST};
use gnlab_core::analysis::CensusReport;

pub const LEMMA_FILE: &str = "lemma_check.json";

/// Summarizes the run directory `dir` into `dir/report/`. Returns the text summary.
pub fn report(dir: &Path) -> Result<String> {
    let out = dir.join("report");
    let mut summary = String::new();
    let mut found = false;
    if dir.join(MANIFEST).exists() {
        found = true;
        report_run(dir, &out, "", &mut summary)?;
    }
    if let Ok(sweep) = read_json::<serde_json::Value>(&dir.join("sweep.json")) {
        found = true;
        let runs = sweep["runs"].as_array().cloned().unwrap_or_default();
        writeln!(summary, "sweep over {} exponents", runs.len())?;
        for r in runs {
            let name = r.as_str().context("corrupt sweep.json")?;
            report_run(&dir.join(name), &out, &format!("{name}_"), &mut summary)?;
        }
        if let Ok(phase) = std::fs::read(dir.join("phase.csv")) {
            write_file(&out.join("phase.csv"), &phase)?;
        }
    }
    if dir.join(LEMMA_FILE).exists() {
        found = true;
        let lemma: LemmaReport = read_json(&dir.join(LEMMA_FILE))?;
        let mut csv = String::from("check,sup_ratio\n");
        writeln!(summary, "oracle sup-ratios:")?;
        for (name, r) in lemma.sup_ratios() {
            writeln!(csv, "{name},{r}")?;
            writeln!(summary, "  {name}: {r:e}")?;
        }
        write_file(&out.join("oracle_sup_ratios.csv"), csv.as_bytes())?;
    }
    if !found {
        bail!("{} contains no manifest", dir.display());
    }
    write_file(&out.join("summary.txt"), summary.as_bytes())?;
    Ok(summary)
}

fn report_run(dir: &Path, out: &Path, prefix: &str, summary: &mut String) -> Result<()> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST)).context("manifest missing or corrupt")?;
    let cfg = &manifest.config;
    let trials = manifest.seeds.len();
    writeln!(summary, "run {}: p = {}, mode {:?}, {} trials, master seed {}", dir.display(), cfg.kernel.p(), cfg.mode, trials, cfg.master_seed)?;
    if trials == 0 {
        writeln!(summary, "  zero trials")?;
        return Ok(());
    }
    let mut traj = String::from("trial,births,k,count\n");
    let mut hist = String::from("trial,births,degree,count\n");
    let mut inv = String::from("trial,births,shape,count\n");
    for i in 0..trials {
        let path = dir.join("trials").join(format!("trial_{i:05}.json"));
        let report: CensusReport = read_json(&path)?;
        for s in &report.snapshots {
            for (k, c) in s.k_fertile.iter().enumerate() {
                writeln!(traj, "{i},{},{},{c}", s.births, k + 1)?;
            }
            for (d, c) in s.degree_histogram.iter().enumerate().filter(|(_, c)| **c > 0) {
                writeln!(hist, "{i},{},{d},{c}", s.births)?;
            }
            for (code, c) in &s.inventory.shapes {
                writeln!(inv, "{i},{},{code},{c}", s.births)?;
            }
            writeln!(inv, "{i},{},larger,{}", s.births, s.inventory.larger)?;
        }
    }
    write_file(&out.join(format!("{prefix}census_trajectories.csv")), traj.as_bytes())?;
    write_file(&out.join(format!("{prefix}degree_histograms.csv")), hist.as_bytes())?;
    write_file(&out.join(format!("{prefix}shape_inventories.csv")), inv.as_bytes())?;
    if let Ok(agg) = read_json::<Aggregate>(&dir.join(AGGREGATE)) {
        write_file(&out.join(format!("{prefix}aggregate.csv")), agg.to_csv().as_bytes())?;
        for (k, series) in agg.mean_fertile.iter().enumerate() {
            writeln!(summary, "  mean {}-fertile at {:?}: {:?}; stabilized in {:.2}", k + 1, agg.checkpoints, series, agg.stabilization[k])?;
        }
    }
    Ok(())
}
