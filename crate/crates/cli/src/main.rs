use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gnlab::checks::{self, LemmaReport, FERTILITY_NS, LGDEV_NS};
use gnlab::experiment::{write_json, write_file};
use gnlab::report::{report, LEMMA_FILE};
use gnlab::{resolve_out, run_experiment, sweep, RunConfig};
use gnlab_core::analysis::fertility_census;
use gnlab_core::embed::{Mode, StopRule};
use gnlab_core::oracles::Estimator;
use gnlab_core::tree::io;
use gnlab_core::Kernel64;

#[derive(Parser)]
#[command(name = "gnlab", version, about = "Simulate and check super-linear preferential-attachment trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Output directory (default: $GNLAB_OUT/<command>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Kernel exponent; repeat for sweeps.
    #[arg(long = "p")]
    p: Vec<f64>,
    /// Largest fertility index, or the fertility order for lemma checks.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Discrete,
    Embedded,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Check {
    All,
    Erlang,
    Fertility,
    Lgdev,
    Interbirth,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble and keep trees, attachment logs and birth times.
    Simulate(Common),
    /// Census of a parent-array tree file, or of a fresh ensemble.
    Census {
        tree: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Stabilization fractions across exponents.
    Sweep(Common),
    /// Discrete chain against the exponential embedding.
    EmbedEquiv {
        /// Births per tree.
        #[arg(default_value_t = 6)]
        m: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Oracle checks of the tail and fertility bounds.
    LemmaCheck {
        #[arg(value_enum, default_value_t = Check::All)]
        check: Check,
        #[command(flatten)]
        common: Common,
    },
    /// Summaries and plot data for a finished run directory.
    Report { dir: PathBuf },
}

fn default_config() -> RunConfig {
    let mut cfg = RunConfig::new(Kernel64::power(1.75).expect("valid exponent"), StopRule::Births { m: 10_000 });
    cfg.checkpoints = vec![1_000, 3_000, 10_000];
    cfg
}

fn build_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => default_config(),
    };
    if let Some(s) = c.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    if let Some(m) = c.mode {
        cfg.mode = match m {
            ModeArg::Discrete => Mode::Discrete,
            ModeArg::Embedded => Mode::Embedded,
        };
    }
    match c.p[..] {
        [] => {}
        [p] => cfg.kernel = Kernel64::power(p)?,
        _ => bail!("--p given more than once; only sweep takes several exponents"),
    }
    if let Some(k) = c.k {
        cfg.k_max = k;
    }
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig, name: &str) -> PathBuf {
    resolve_out(cfg.out.as_deref(), name)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn lemma_check(check: Check, c: &Common) -> Result<()> {
    let seed = c.seed.unwrap_or(0);
    let out = resolve_out(c.out.as_deref(), "lemma-check");
    let want = |x: Check| check == Check::All || check == x;
    let mut rep = LemmaReport { master_seed: seed, erlang: vec![], fertility: None, lgdev: None, interbirth: vec![] };
    if want(Check::Erlang) {
        rep.erlang = checks::erlang_grid(20, 20.0, 0.5);
        if let Some(bad) = rep.erlang.iter().find(|r| !r.holds) {
            bail!("erlang bound violated at k={} lambda={}", bad.k, bad.lambda);
        }
    }
    if want(Check::Fertility) {
        let p = c.p.first().copied().unwrap_or(1.75);
        let k = match c.k {
            Some(k) => k,
            None => checks::default_k(p)?,
        };
        rep.fertility = Some(checks::fertility_scaling(p, k, &FERTILITY_NS, c.trials.unwrap_or(1_000_000), 10_000, seed)?);
    }
    if want(Check::Lgdev) {
        let p = c.p.first().copied().unwrap_or(2.0);
        rep.lgdev = Some(checks::lgdev_decay(p, &LGDEV_NS, c.trials.unwrap_or(100_000), 10_000, seed, Estimator::Tilted)?);
    }
    if want(Check::Interbirth) {
        let p = c.p.first().copied().unwrap_or(2.0);
        rep.interbirth = checks::interbirth(p, 10, c.trials.unwrap_or(100_000), seed)?;
    }
    write_json(&out.join(LEMMA_FILE), &rep)?;
    for (name, r) in rep.sup_ratios() {
        println!("{name}: sup ratio {r:e}");
    }
    eprintln!("wrote {}", out.join(LEMMA_FILE).display());
    Ok(())
}

fn census_file(path: &Path, k: usize) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let tree = io::from_parent_text(&text)?;
    print_json(&fertility_census(&tree, k))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Simulate(c) => {
            let mut cfg = build_config(&c)?;
            cfg.save_trees = true;
            let out = out_dir(&cfg, "simulate");
            print_json(&run_experiment(&cfg, &out)?)?;
        }
        Command::Census { tree: Some(path), common } => census_file(&path, common.k.unwrap_or(3))?,
        Command::Census { tree: None, common } => {
            let cfg = build_config(&common)?;
            let out = out_dir(&cfg, "census");
            print_json(&run_experiment(&cfg, &out)?)?;
        }
        Command::Sweep(c) => {
            let p_values = if c.p.is_empty() { vec![1.4, 1.75, 2.5] } else { c.p.clone() };
            let cfg = build_config(&Common { p: vec![], ..c.clone() })?;
            let out = out_dir(&cfg, "sweep");
            print_json(&sweep(&p_values, &cfg, &out)?)?;
        }
        Command::EmbedEquiv { m, common } => {
            let p = common.p.first().copied().unwrap_or(1.75);
            let trials = common.trials.unwrap_or(100_000);
            let seed = common.seed.unwrap_or(0);
            let out = resolve_out(common.out.as_deref(), "embed-equiv");
            let shape = checks::embed_equivalence(p, m, trials, seed)?;
            let bins = checks::bins_equivalence(p, 2, 20, trials, seed)?;
            let mut csv = String::from("test,statistic,dof,p_value\n");
            for r in [&shape, &bins] {
                csv.push_str(&format!("{},{},{},{}\n", r.test, r.chi_square.statistic, r.chi_square.dof, r.chi_square.p_value));
                println!("{}: chi2 = {:.3} on {} dof, p = {:.4}", r.test, r.chi_square.statistic, r.chi_square.dof, r.chi_square.p_value);
            }
            write_json(&out.join("embed_equiv.json"), &[&shape, &bins])?;
            write_file(&out.join("embed_equiv.csv"), csv.as_bytes())?;
        }
        Command::LemmaCheck { check, common } => lemma_check(check, &common)?,
        Command::Report { dir } => print!("{}", report(&dir)?),
    }
    Ok(())
}
