use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gnlab_core::analysis::TrajectorySpec;
use gnlab_core::embed::{Mode, StopRule};
use gnlab_core::Kernel64;
use serde::{Deserialize, Serialize};

/// One experiment: a kernel, a mode, a stop rule and an ensemble of seeded trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: Kernel64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub stop: StopRule,
    /// Birth counts at which a census is taken.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Largest child subtree recorded by shape in the inventory of the max-degree vertex.
    #[serde(default = "default_shape_cap")]
    pub shape_cap: usize,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Explosion-estimate truncation for embedded censuses; 0 turns it off.
    #[serde(default)]
    pub n_trunc: usize,
    /// Also write trees, attachment logs and birth-time traces per trial.
    #[serde(default)]
    pub save_trees: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_mode() -> Mode {
    Mode::Discrete
}

fn default_k_max() -> usize {
    3
}

fn default_shape_cap() -> usize {
    2
}

fn default_trials() -> u64 {
    1
}

impl RunConfig {
    pub fn new(kernel: Kernel64, stop: StopRule) -> Self {
        Self {
            kernel,
            mode: default_mode(),
            stop,
            checkpoints: Vec::new(),
            k_max: default_k_max(),
            shape_cap: default_shape_cap(),
            trials: default_trials(),
            master_seed: 0,
            n_trunc: 0,
            save_trees: false,
            out: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing run config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            bail!("checkpoints must be strictly ascending");
        }
        if self.master_seed > i64::MAX as u64 {
            bail!("master_seed must fit in a signed 64-bit integer");
        }
        match self.stop {
            StopRule::Births { m } => {
                if let Some(&last) = self.checkpoints.last() {
                    if last > m {
                        bail!("checkpoint {last} lies beyond the stop at {m} births");
                    }
                }
            }
            _ if self.mode == Mode::Discrete => bail!("discrete mode only supports the births stop rule"),
            StopRule::NearExplosion { .. } if !self.kernel.is_explosive() => {
                bail!("near-explosion stop needs an explosive kernel")
            }
            _ => {}
        }
        Ok(())
    }

    pub fn trajectory_spec(&self) -> TrajectorySpec {
        TrajectorySpec {
            kernel: self.kernel.clone(),
            mode: self.mode,
            checkpoints: self.checkpoints.clone(),
            k_max: self.k_max,
            shape_cap: self.shape_cap,
            n_trunc: self.n_trunc,
        }
    }
}

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "GNLAB_OUT";

/// `explicit`, else `$GNLAB_OUT/<name>`, else `gnlab-out/<name>`.
pub fn resolve_out(explicit: Option<&Path>, name: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("gnlab-out"));
    root.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
kernel = { form = "power", p = 1.75 }
mode = "embedded"
stop = { rule = "births", m = 1000 }
checkpoints = [10, 100, 1000]
trials = 4
master_seed = 9
"#;

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.mode, Mode::Embedded);
        assert_eq!(cfg.k_max, 3);
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        let mut t = cfg.clone();
        t.kernel = Kernel64::table(vec![1.0, 3.0, 7.5], 2.0).unwrap();
        t.stop = StopRule::near_explosion();
        t.out = Some("x/y".into());
        assert_eq!(RunConfig::from_toml(&t.to_toml().unwrap()).unwrap(), t);
    }

    #[test]
    fn validation() {
        for bad in [
            SAMPLE.replace("trials = 4", "trials = 0"),
            SAMPLE.replace("[10, 100, 1000]", "[10, 10]"),
            SAMPLE.replace("[10, 100, 1000]", "[10, 2000]"),
            SAMPLE.replace("embedded", "discrete").replace(r#"rule = "births", m = 1000"#, r#"rule = "wall_time", t = 1.0"#),
            SAMPLE.replace("master_seed = 9", "bogus = 1"),
        ] {
            assert!(RunConfig::from_toml(&bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn out_resolution() {
        assert_eq!(resolve_out(Some(Path::new("a")), "x"), PathBuf::from("a"));
    }
}
