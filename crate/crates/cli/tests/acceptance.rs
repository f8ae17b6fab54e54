//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any
//! criterion fails. Thresholds are fixed below.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use gnlab::checks;
use gnlab::experiment::{read_json, Manifest};
use gnlab::{run_experiment, RunConfig};
use gnlab_core::analysis::run_trajectory;
use gnlab_core::discrete::rate_bound_stats;
use gnlab_core::embed::{Mode, StopRule};
use gnlab_core::oracles::{erlang_tail, Estimator};
use gnlab_core::tree::glue_decompose;
use gnlab_core::Kernel64;

// 1
const ERLANG_K_MAX: u32 = 20;
const ERLANG_LAMBDA_MAX: f64 = 20.0;
const ERLANG_TOL: f64 = 1e-12;
// 2
const TRANSITION_TRIALS: u64 = 100_000;
const TRANSITION_TOL: f64 = 0.004;
// 3, 10
const EQUIV_TRIALS: u64 = 100_000;
const EQUIV_ALPHA: f64 = 0.001;
// 4
const PHASE_SEEDS: u64 = 50;
const PHASE_CHECKPOINTS: [usize; 3] = [10_000, 30_000, 100_000];
const BOUNDED_GROWTH: f64 = 0.05;
const UNBOUNDED_GROWTH: f64 = 1.00;
// 5
const FERTILITY_TRIALS: u64 = 1_000_000;
const SLOPE_TOL: f64 = 0.2;
const PRODUCT_RATIO_MAX: f64 = 3.0;
// 6
const LGDEV_TRIALS: u64 = 100_000;
// 7
const INTERBIRTH_J_MAX: usize = 10;
const INTERBIRTH_TRIALS: u64 = 100_000;
const KS_ALPHA: f64 = 0.001;
// 9
const GLUE_SEEDS: u64 = 50;
const GLUE_M: usize = 100_000;
const GLUE_EARLY: usize = 30_000;
const GLUE_FRACTION: f64 = 0.90;
const GLUE_MIN_SHAPE_COUNT: u64 = 100;
const GLUE_MAX_LARGE_CHANGE: u64 = 5;
// 10
const BINS_BALLS: usize = 20;

const N_TRUNC: usize = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn power(p: f64) -> Kernel64 {
    Kernel64::power(p).unwrap()
}

/// Independent reference: `e^{-l} sum_{j>=k} l^j/j!` summed term by term.
fn erlang_reference(k: u32, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let mut log_fact = 0.0;
    for i in 1..=k {
        log_fact += (i as f64).ln();
    }
    let mut sum = 0.0;
    let mut j = k;
    loop {
        let term = (-lambda + j as f64 * lambda.ln() - log_fact).exp();
        sum += term;
        j += 1;
        log_fact += (j as f64).ln();
        if term < 1e-30 && j as f64 > lambda {
            break;
        }
    }
    sum
}

fn lead(k: u32, lambda: f64) -> f64 {
    let mut acc = 1.0;
    for i in 1..=k {
        acc *= lambda / i as f64;
    }
    acc
}

fn c1_erlang() -> Outcome {
    let (mut worst, mut violations, mut cells) = (0.0f64, 0, 0);
    for k in 1..=ERLANG_K_MAX {
        for i in 0..=(ERLANG_LAMBDA_MAX * 4.0) as u32 {
            let lambda = i as f64 * 0.25;
            let v = erlang_tail(k, lambda);
            worst = worst.max((v - erlang_reference(k, lambda)).abs());
            if v > lead(k, lambda) {
                violations += 1;
            }
            cells += 1;
        }
    }
    outcome(worst <= ERLANG_TOL && violations == 0, format!("{cells} cells, max |diff| {worst:.2e}, bound violations {violations}"))
}

fn c2_transition() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for mode in [Mode::Discrete, Mode::Embedded] {
        let r = checks::second_birth_to_root(2.0, mode, TRANSITION_TRIALS, 202).unwrap();
        pass &= (r.frequency - 0.8).abs() <= TRANSITION_TOL;
        parts.push(format!("{mode:?} {:.4}", r.frequency));
    }
    outcome(pass, format!("attach-to-root frequency {}", parts.join(", ")))
}

fn c3_embedding() -> Outcome {
    let r = checks::embed_equivalence(1.75, 6, EQUIV_TRIALS, 303).unwrap();
    outcome(
        r.chi_square.p_value > EQUIV_ALPHA,
        format!("{} shapes, chi2 {:.2} on {} dof, p = {:.4}", r.discrete.len().max(r.embedded.len()), r.chi_square.statistic, r.chi_square.dof, r.chi_square.p_value),
    )
}

fn phase_means(p: f64, dir: &Path) -> Vec<Vec<f64>> {
    let mut cfg = RunConfig::new(power(p), StopRule::Births { m: *PHASE_CHECKPOINTS.last().unwrap() });
    cfg.checkpoints = PHASE_CHECKPOINTS.to_vec();
    cfg.trials = PHASE_SEEDS;
    cfg.master_seed = 404;
    cfg.k_max = 2;
    run_experiment(&cfg, dir).unwrap().mean_fertile
}

fn growth(series: &[f64]) -> f64 {
    series.last().unwrap() / series.first().unwrap() - 1.0
}

fn c4_phase() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let m175 = phase_means(1.75, &dir.path().join("p175"));
    let m25 = phase_means(2.5, &dir.path().join("p25"));
    let (g2, g1, gc) = (growth(&m175[1]), growth(&m175[0]), growth(&m25[0]));
    let pass = g2 < BOUNDED_GROWTH && g1 > UNBOUNDED_GROWTH && gc < BOUNDED_GROWTH;
    outcome(
        pass,
        format!(
            "p=1.75: 2-fertile {:?} ({:+.1}%, need < {:.0}%), 1-fertile {:?} ({:+.1}%, need > {:.0}%); p=2.5: 1-fertile {:?} ({:+.1}%)",
            m175[1],
            100.0 * g2,
            100.0 * BOUNDED_GROWTH,
            m175[0],
            100.0 * g1,
            100.0 * UNBOUNDED_GROWTH,
            m25[0],
            100.0 * gc
        ),
    )
}

fn c5_scaling() -> Outcome {
    let a = checks::fertility_scaling(1.75, 2, &checks::FERTILITY_NS, FERTILITY_TRIALS, N_TRUNC, 505).unwrap();
    let b = checks::fertility_scaling(2.0, 1, &checks::FERTILITY_NS, FERTILITY_TRIALS, N_TRUNC, 506).unwrap();
    let flags = a.points.iter().chain(&b.points).any(|r| r.bias_flag);
    let pass = (a.fit.slope + 1.5).abs() <= SLOPE_TOL && b.product_ratio < PRODUCT_RATIO_MAX && !flags;
    outcome(
        pass,
        format!(
            "p=1.75 k=2 slope {:.3} +- {:.3}; p=2 k=1 q_n*n in [{:.3}, {:.3}], ratio {:.3}; bias flags {flags}",
            a.fit.slope,
            a.fit.stderr,
            b.points.iter().map(|r| r.ratio()).fold(f64::INFINITY, f64::min),
            b.points.iter().map(|r| r.ratio()).fold(0.0, f64::max),
            b.product_ratio
        ),
    )
}

fn c6_lgdev() -> Outcome {
    let r = checks::lgdev_decay(2.0, &checks::LGDEV_NS, LGDEV_TRIALS, N_TRUNC, 606, Estimator::Tilted).unwrap();
    let probs: Vec<String> = r.points.iter().map(|(_, b)| format!("{:.3e}", b.empirical)).collect();
    outcome(
        r.strictly_decreasing && r.sup_ratio.is_finite() && r.points.iter().all(|(_, b)| b.empirical > 0.0),
        format!("n = {:?}: {} (importance sampled); sup empirical/bound = {:.3e}", checks::LGDEV_NS, probs.join(", "), r.sup_ratio),
    )
}

fn c7_interbirth() -> Outcome {
    let rows = checks::interbirth(2.0, INTERBIRTH_J_MAX, INTERBIRTH_TRIALS, 707).unwrap();
    let worst = rows.iter().map(|r| r.max_excess_se).fold(0.0, f64::max);
    let ks = rows[0].ks.unwrap();
    let pass = rows.iter().all(|r| r.passed) && ks.p_value > KS_ALPHA;
    outcome(pass, format!("j <= {INTERBIRTH_J_MAX}: max excess {worst:.2} SE; KS at j=0: D = {:.4}, p = {:.3}", ks.statistic, ks.p_value))
}

fn c9_glue() -> Outcome {
    let mut cfg = RunConfig::new(power(1.75), StopRule::Births { m: GLUE_M });
    cfg.mode = Mode::Embedded;
    cfg.checkpoints = vec![GLUE_EARLY, GLUE_M];
    cfg.n_trunc = N_TRUNC;
    cfg.k_max = 2;
    cfg.shape_cap = 2;
    let spec = cfg.trajectory_spec();
    let (mut agree, mut shapes_ok, mut stable) = (0u64, 0u64, 0u64);
    let mut size2 = Vec::new();
    for i in 0..GLUE_SEEDS {
        let out = run_trajectory(&spec, cfg.stop, gnlab_core::rng::trial_seed(909, i)).unwrap();
        let d = glue_decompose(&out.tree, 2);
        let [early, late] = &out.report.snapshots[..] else { panic!("expected two snapshots") };
        if late.v_hat.as_deref() == Some(d.v.to_string().as_str()) {
            agree += 1;
        }
        let count = |code: &str| late.inventory.shapes.get(code).copied().unwrap_or(0);
        size2.push(count("(())"));
        if count("()") >= GLUE_MIN_SHAPE_COUNT && count("(())") >= GLUE_MIN_SHAPE_COUNT {
            shapes_ok += 1;
        }
        if late.inventory.larger.abs_diff(early.inventory.larger) <= GLUE_MAX_LARGE_CHANGE {
            stable += 1;
        }
    }
    let need = (GLUE_FRACTION * GLUE_SEEDS as f64).ceil() as u64;
    size2.sort();
    outcome(
        agree >= need && shapes_ok >= need && stable >= need,
        format!(
            "v_hat = glue v in {agree}/{GLUE_SEEDS}; both size<=2 shapes >= {GLUE_MIN_SHAPE_COUNT} in {shapes_ok}/{GLUE_SEEDS} (size-2 count median {}, max {}); size>=3 change <= {GLUE_MAX_LARGE_CHANGE} in {stable}/{GLUE_SEEDS}",
            size2[size2.len() / 2],
            size2.last().unwrap()
        ),
    )
}

fn c10_bins() -> Outcome {
    let r = checks::bins_equivalence(2.0, 2, BINS_BALLS, EQUIV_TRIALS, 1010).unwrap();
    outcome(r.chi_square.p_value > EQUIV_ALPHA, format!("chi2 {:.2} on {} dof, p = {:.4}", r.chi_square.statistic, r.chi_square.dof, r.chi_square.p_value))
}

fn tree_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().display().to_string(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn c11_determinism() -> Outcome {
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for mode in [Mode::Discrete, Mode::Embedded] {
        let mut cfg = RunConfig::new(power(1.75), StopRule::Births { m: 2000 });
        cfg.mode = mode;
        cfg.checkpoints = vec![100, 1000, 2000];
        cfg.trials = 5;
        cfg.master_seed = 1111;
        cfg.save_trees = true;
        cfg.n_trunc = 1000;
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_experiment(&cfg, a.path()).unwrap();
        run_experiment(&cfg, b.path()).unwrap();
        let (fa, fb) = (tree_files(a.path()), tree_files(b.path()));
        for (name, bytes) in &fa {
            compared += 1;
            let same = if name == "manifest.json" {
                let ma: Manifest = read_json(&a.path().join(name)).unwrap();
                let mb: Manifest = read_json(&b.path().join(name)).unwrap();
                (ma.config, ma.seeds) == (mb.config, mb.seeds)
            } else {
                fb.get(name) == Some(bytes)
            };
            if !same {
                mismatches.push(format!("{mode:?}/{name}"));
            }
        }
        if fa.len() != fb.len() {
            mismatches.push(format!("{mode:?}: file sets differ"));
        }
    }
    outcome(mismatches.is_empty(), format!("{compared} artifacts compared, mismatches {mismatches:?}"))
}

fn c8_rate_bound() -> Outcome {
    let (checks, violations) = rate_bound_stats();
    outcome(checks > 0 && violations == 0, format!("{checks} births checked across this suite, {violations} violations"))
}

type Criterion = (u8, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "exact Erlang tail", c1_erlang),
        (2, "transition law", c2_transition),
        (3, "embedding equivalence", c3_embedding),
        (4, "connectivity transition", c4_phase),
        (5, "fertility-probability scaling", c5_scaling),
        (6, "large-deviation decay", c6_lgdev),
        (7, "inter-birth dominance", c7_interbirth),
        (9, "glue structure", c9_glue),
        (10, "balls-in-bins embedding", c10_bins),
        (11, "determinism", c11_determinism),
        (8, "rate-bound invariant", c8_rate_bound),
    ];
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        let t0 = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id:>2} {name}: {} ({:.1}s)", o.detail, t0.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 11 criteria passed");
        ExitCode::SUCCESS
    } else {
        failed.sort();
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
