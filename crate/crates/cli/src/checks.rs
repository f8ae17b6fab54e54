//! Ensemble checks shared by the `embed-equiv` and `lemma-check` subcommands.

use std::collections::BTreeMap;

use anyhow::Result;
use gnlab_core::analysis::{homogeneity_test, scaling_fit, ChiSquareTest, Fit, KsTest};
use gnlab_core::discrete::{run, GnState};
use gnlab_core::embed::{balls_in_bins_run, run_embedded, EmbedState, Mode, StopRule};
use gnlab_core::oracles::{
    erlang_tail, interbirth_dominance_check, lgdev_tail_check, mc_fertility_bound, poisson_lead, BoundCheckResult, Estimator,
};
use gnlab_core::rng::{trial_rng, trial_seed};
use gnlab_core::{critical_k, ClockSource, Kernel64};
use serde::{Deserialize, Serialize};

/// Trial `i` of mode `mode` draws from `trial_seed(master, 2i + mode)`, so the two
/// samples never share a seed.
fn mode_seed(master: u64, mode: Mode, i: u64) -> u64 {
    trial_seed(master, 2 * i + (mode == Mode::Embedded) as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivRecord {
    pub test: String,
    pub p: f64,
    pub size: usize,
    pub trials: u64,
    pub master_seed: u64,
    pub discrete: BTreeMap<String, u64>,
    pub embedded: BTreeMap<String, u64>,
    pub chi_square: ChiSquareTest,
}

/// Canonical root shapes after `m` births, discrete chain against the embedding.
pub fn embed_equivalence(p: f64, m: usize, trials: u64, master_seed: u64) -> Result<EquivRecord> {
    let kernel = Kernel64::power(p)?;
    let mut samples = [BTreeMap::new(), BTreeMap::new()];
    for i in 0..trials {
        let (t, _) = run(&kernel, m, &mut trial_rng(mode_seed(master_seed, Mode::Discrete, i), 0))?;
        *samples[0].entry(t.shape_at(0).code().to_string()).or_insert(0) += 1;
        let (s, _) = run_embedded(&kernel, StopRule::Births { m }, ClockSource::new(mode_seed(master_seed, Mode::Embedded, i)))?;
        *samples[1].entry(s.tree().shape_at(0).code().to_string()).or_insert(0) += 1;
    }
    let chi_square = homogeneity_test(&samples[0], &samples[1])?;
    let [discrete, embedded] = samples;
    Ok(EquivRecord { test: "shape".into(), p, size: m, trials, master_seed, discrete, embedded, chi_square })
}

/// Occupancy of the first bin after `balls` balls, discrete against embedded.
pub fn bins_equivalence(p: f64, bins: usize, balls: usize, trials: u64, master_seed: u64) -> Result<EquivRecord> {
    let kernel = Kernel64::power(p)?;
    let mut samples = [BTreeMap::new(), BTreeMap::new()];
    for i in 0..trials {
        for (slot, mode) in [Mode::Discrete, Mode::Embedded].into_iter().enumerate() {
            let occ = balls_in_bins_run(&kernel, bins, balls, mode, mode_seed(master_seed, mode, i))?;
            *samples[slot].entry(format!("{:03}", occ[0])).or_insert(0) += 1;
        }
    }
    let chi_square = homogeneity_test(&samples[0], &samples[1])?;
    let [discrete, embedded] = samples;
    Ok(EquivRecord { test: "bins".into(), p, size: balls, trials, master_seed, discrete, embedded, chi_square })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub mode: Mode,
    pub trials: u64,
    pub to_root: u64,
    pub frequency: f64,
}

/// Frequency with which the second birth attaches to the root.
pub fn second_birth_to_root(p: f64, mode: Mode, trials: u64, master_seed: u64) -> Result<TransitionRecord> {
    let kernel = Kernel64::power(p)?;
    let mut to_root = 0;
    for i in 0..trials {
        let seed = mode_seed(master_seed, mode, i);
        let parent = match mode {
            Mode::Discrete => {
                let mut rng = trial_rng(seed, 0);
                let mut s = GnState::new(kernel.clone())?;
                s.step(&mut rng)?;
                s.step(&mut rng)?.attached_to
            }
            Mode::Embedded => {
                let mut s = EmbedState::new(kernel.clone(), ClockSource::new(seed))?;
                s.next_birth()?;
                s.next_birth()?.parent
            }
        };
        if parent == 0 {
            to_root += 1;
        }
    }
    Ok(TransitionRecord { mode, trials, to_root, frequency: to_root as f64 / trials.max(1) as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErlangRow {
    pub k: u32,
    pub lambda: f64,
    pub value: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn erlang_grid(k_max: u32, lambda_max: f64, step: f64) -> Vec<ErlangRow> {
    let mut rows = Vec::new();
    for k in 1..=k_max {
        let mut i = 0;
        loop {
            let lambda = i as f64 * step;
            if lambda > lambda_max {
                break;
            }
            let value = erlang_tail(k, lambda);
            let bound = poisson_lead(k, lambda);
            rows.push(ErlangRow { k, lambda, value, bound, holds: value <= bound });
            i += 1;
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FertilityScaling {
    pub p: f64,
    pub k: usize,
    pub n_trunc: usize,
    pub master_seed: u64,
    pub points: Vec<BoundCheckResult>,
    pub fit: Fit,
    /// max / min of `q_n / bound_shape` over the grid.
    pub product_ratio: f64,
    pub sup_ratio: f64,
}

pub fn fertility_scaling(p: f64, k: usize, ns: &[usize], trials: u64, n_trunc: usize, master_seed: u64) -> Result<FertilityScaling> {
    let kernel = Kernel64::power(p)?;
    let clocks = ClockSource::new(master_seed);
    let points = ns
        .iter()
        .map(|&n| mc_fertility_bound(n, k, &kernel, trials, n_trunc, &clocks))
        .collect::<gnlab_core::Result<Vec<_>>>()?;
    let fit = scaling_fit(&points.iter().map(|r| (r.n as f64, r.empirical)).collect::<Vec<_>>())?;
    let ratios: Vec<f64> = points.iter().map(BoundCheckResult::ratio).collect();
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(FertilityScaling { p, k, n_trunc, master_seed, points, fit, product_ratio: max / min, sup_ratio: max })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LgdevDecay {
    pub p: f64,
    pub n_trunc: usize,
    pub master_seed: u64,
    pub estimator: Estimator,
    /// `(delta, result)` per `n`, with `delta = n^{3/4 - p}`.
    pub points: Vec<(f64, BoundCheckResult)>,
    pub strictly_decreasing: bool,
    pub sup_ratio: f64,
}

pub fn lgdev_decay(p: f64, ns: &[usize], trials: u64, n_trunc: usize, master_seed: u64, estimator: Estimator) -> Result<LgdevDecay> {
    let kernel = Kernel64::power(p)?;
    let clocks = ClockSource::new(master_seed);
    let mut points = Vec::new();
    for &n in ns {
        let delta = (n as f64).powf(0.75 - p);
        points.push((delta, lgdev_tail_check(n, &kernel, delta, trials, n_trunc, &clocks, estimator)?));
    }
    let strictly_decreasing = points.windows(2).all(|w| w[1].1.empirical < w[0].1.empirical);
    let sup_ratio = points.iter().map(|(_, r)| r.ratio()).fold(0.0, f64::max);
    Ok(LgdevDecay { p, n_trunc, master_seed, estimator, points, strictly_decreasing, sup_ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterbirthSummary {
    pub j: usize,
    pub trials: u64,
    pub max_excess_se: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<KsTest>,
    pub sup_ratio: f64,
}

pub fn interbirth(p: f64, j_max: usize, trials: u64, master_seed: u64) -> Result<Vec<InterbirthSummary>> {
    let kernel = Kernel64::power(p)?;
    Ok(interbirth_dominance_check(&kernel, j_max, trials, master_seed)?
        .into_iter()
        .map(|c| InterbirthSummary {
            j: c.j,
            trials,
            max_excess_se: c.max_excess_se,
            passed: c.passed,
            ks: c.ks,
            sup_ratio: c.grid.iter().map(|(_, r)| r.ratio()).fold(0.0, f64::max),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub erlang: Vec<ErlangRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fertility: Option<FertilityScaling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lgdev: Option<LgdevDecay>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interbirth: Vec<InterbirthSummary>,
}

impl LemmaReport {
    /// `(check, sup ratio)` pairs.
    pub fn sup_ratios(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        if !self.erlang.is_empty() {
            let r = self.erlang.iter().filter(|r| r.bound > 0.0).map(|r| r.value / r.bound).fold(0.0, f64::max);
            out.push(("erlang".to_string(), r));
        }
        if let Some(f) = &self.fertility {
            out.push(("fertility".to_string(), f.sup_ratio));
        }
        if let Some(l) = &self.lgdev {
            out.push(("lgdev".to_string(), l.sup_ratio));
        }
        for s in &self.interbirth {
            out.push((format!("interbirth_{}", s.j), s.sup_ratio));
        }
        out
    }
}

/// Default fertility grid.
pub const FERTILITY_NS: [usize; 5] = [16, 32, 64, 128, 256];
/// Default large-deviation grid.
pub const LGDEV_NS: [usize; 3] = [50, 100, 200];

pub fn default_k(p: f64) -> Result<usize> {
    Ok(critical_k(p)?)
}
