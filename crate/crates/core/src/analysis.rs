//! Fertility censuses, shape inventories and the statistical tests used to compare
//! ensembles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::discrete::{AttachmentLog, GnState};
use crate::embed::{EmbedState, Mode, StopReason, StopRule, NEAR_EXPLOSION_CONFIDENCE};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::rng::{trial_rng, ClockSource};
use crate::scalar::Scalar;
use crate::tree::LabelledTree;

/// Number of `k`-fertile vertices (at least `k` descendants) for `k = 1..=k_max`.
pub fn fertility_census(tree: &LabelledTree, k_max: usize) -> BTreeMap<usize, u64> {
    let mut hist = vec![0u64; k_max + 1];
    for s in tree.subtree_sizes() {
        let desc = (s as usize - 1).min(k_max);
        hist[desc] += 1;
    }
    let mut out = BTreeMap::new();
    let mut acc = 0;
    for k in (1..=k_max).rev() {
        acc += hist[k];
        out.insert(k, acc);
    }
    out
}

/// Inventory of the subtrees hanging off one vertex's children.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildInventory {
    /// Canonical shape code to multiplicity, for subtrees of size at most the cap.
    pub shapes: BTreeMap<String, u64>,
    /// Children whose subtree exceeds the cap.
    pub larger: u64,
}

pub fn child_inventory(tree: &LabelledTree, v: usize, cap: usize) -> ChildInventory {
    let sizes = tree.subtree_sizes();
    let mut inv = ChildInventory::default();
    for &c in tree.children(v) {
        if sizes[c as usize] as usize <= cap {
            *inv.shapes.entry(tree.shape_at(c as usize).code().to_string()).or_default() += 1;
        } else {
            inv.larger += 1;
        }
    }
    inv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub births: usize,
    /// Entry `k - 1` counts the `k`-fertile vertices.
    pub k_fertile: Vec<u64>,
    pub degree_histogram: Vec<u64>,
    pub height: usize,
    pub max_degree_vertex: String,
    pub max_degree: usize,
    pub inventory: ChildInventory,
    /// Minimizer of the estimated explosion time, embedded runs only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_hat: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_hat: Option<f64>,
}

impl Snapshot {
    pub fn fertile(&self, k: usize) -> u64 {
        self.k_fertile.get(k.wrapping_sub(1)).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub seed: u64,
    pub kernel: Kernel<f64>,
    pub mode: Mode,
    pub snapshots: Vec<Snapshot>,
}

impl CensusReport {
    /// Flat CSV with one row per checkpoint.
    pub fn to_csv(&self) -> String {
        let k_max = self.snapshots.first().map_or(0, |s| s.k_fertile.len());
        let mut out = String::from("births,height,max_degree,max_degree_vertex,larger_children");
        for k in 1..=k_max {
            out.push_str(&format!(",fertile_{k}"));
        }
        out.push('\n');
        for s in &self.snapshots {
            out.push_str(&format!("{},{},{},{},{}", s.births, s.height, s.max_degree, s.max_degree_vertex, s.inventory.larger));
            for c in &s.k_fertile {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

/// What one census trajectory needs; the runner builds this from its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub kernel: Kernel<f64>,
    pub mode: Mode,
    pub checkpoints: Vec<usize>,
    pub k_max: usize,
    pub shape_cap: usize,
    /// Truncation for the explosion estimate in embedded snapshots; 0 disables it.
    #[serde(default)]
    pub n_trunc: usize,
}

/// Census of `tree` after `births` births.
pub fn take_snapshot(tree: &LabelledTree, births: usize, k_max: usize, shape_cap: usize) -> Snapshot {
    let census = fertility_census(tree, k_max);
    let v = tree.max_degree_vertex();
    Snapshot {
        births,
        k_fertile: census.values().copied().collect(),
        degree_histogram: tree.degree_histogram(),
        height: tree.height(),
        max_degree_vertex: tree.label(v).to_string(),
        max_degree: tree.deg(v),
        inventory: child_inventory(tree, v, shape_cap),
        v_hat: None,
        s_hat: None,
    }
}

fn embedded_snapshot<T: Scalar>(state: &EmbedState<T>, spec: &TrajectorySpec) -> Snapshot {
    let mut snap = take_snapshot(state.tree(), state.births(), spec.k_max, spec.shape_cap);
    if let Some(est) = state.tracked_explosion() {
        snap.v_hat = Some(state.tree().label(est.v_hat).to_string());
        snap.s_hat = Some(est.mid.as_f64());
    }
    snap
}

/// Everything a single run produces.
#[derive(Debug, Clone)]
pub struct TrajectoryOutcome {
    pub report: CensusReport,
    pub stop: StopReason,
    pub tree: LabelledTree,
    /// Discrete runs only.
    pub log: Option<AttachmentLog>,
    /// Embedded runs only: `index,label,birth_time` rows.
    pub birth_times_csv: Option<String>,
    /// Embedded runs only: time of the last birth.
    pub final_time: Option<f64>,
}

/// One run until `stop`, with a census at every checkpoint reached. A final census is
/// added when the run ends past the last checkpoint.
pub fn run_trajectory(spec: &TrajectorySpec, stop: StopRule, seed: u64) -> Result<TrajectoryOutcome> {
    if spec.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("checkpoints must be strictly ascending".into()));
    }
    let mut snapshots = Vec::with_capacity(spec.checkpoints.len() + 1);
    let mut next = 0;
    match spec.mode {
        Mode::Discrete => {
            let StopRule::Births { m } = stop else {
                return Err(Error::InvalidArgument("discrete mode only supports the births stop rule".into()));
            };
            let mut rng = trial_rng(seed, 0);
            let mut state = GnState::new(spec.kernel.clone())?;
            let mut log = AttachmentLog::with_capacity(m);
            loop {
                while spec.checkpoints.get(next) == Some(&state.births()) {
                    snapshots.push(take_snapshot(state.tree(), state.births(), spec.k_max, spec.shape_cap));
                    next += 1;
                }
                if state.births() >= m {
                    break;
                }
                log.push(state.step(&mut rng)?.attached_to);
            }
            if snapshots.last().is_none_or(|s| s.births != m) {
                snapshots.push(take_snapshot(state.tree(), m, spec.k_max, spec.shape_cap));
            }
            let report = CensusReport { seed, kernel: spec.kernel.clone(), mode: spec.mode, snapshots };
            Ok(TrajectoryOutcome {
                report,
                stop: StopReason::BirthsReached,
                tree: state.into_tree(),
                log: Some(log),
                birth_times_csv: None,
                final_time: None,
            })
        }
        Mode::Embedded => {
            let mut state = EmbedState::new(spec.kernel.clone(), ClockSource::new(seed))?;
            if spec.n_trunc > 0 && spec.kernel.is_explosive() {
                state.enable_explosion_tracking(spec.n_trunc, NEAR_EXPLOSION_CONFIDENCE)?;
            }
            if spec.checkpoints.first() == Some(&0) {
                snapshots.push(embedded_snapshot(&state, spec));
                next = 1;
            }
            let reason = state.run_until(stop, |s| {
                if spec.checkpoints.get(next) == Some(&s.births()) {
                    snapshots.push(embedded_snapshot(s, spec));
                    next += 1;
                }
                Ok(())
            })?;
            if snapshots.last().is_none_or(|s| s.births != state.births()) {
                snapshots.push(embedded_snapshot(&state, spec));
            }
            let report = CensusReport { seed, kernel: spec.kernel.clone(), mode: spec.mode, snapshots };
            Ok(TrajectoryOutcome {
                report,
                stop: reason,
                birth_times_csv: Some(state.birth_times_csv()),
                final_time: Some(state.now()),
                tree: state.tree().clone(),
                log: None,
            })
        }
    }
}

/// One run with censuses taken at each checkpoint, driven by `seed` alone.
pub fn census_trajectory(spec: &TrajectorySpec, seed: u64) -> Result<CensusReport> {
    let m = spec.checkpoints.last().copied().unwrap_or(0);
    Ok(run_trajectory(spec, StopRule::Births { m }, seed)?.report)
}

/// Fraction of reports whose `k`-fertile count did not change between the last two
/// checkpoints.
pub fn stabilization_fraction(reports: &[CensusReport], k: usize) -> f64 {
    let stable = reports
        .iter()
        .filter(|r| match r.snapshots.as_slice() {
            [.., a, b] => a.fertile(k) == b.fertile(k),
            _ => true,
        })
        .count();
    if reports.is_empty() {
        0.0
    } else {
        stable as f64 / reports.len() as f64
    }
}

/// Ensemble mean of the `k`-fertile count at each checkpoint.
pub fn mean_fertile(reports: &[CensusReport], k: usize) -> Vec<f64> {
    let n = reports.first().map_or(0, |r| r.snapshots.len());
    (0..n)
        .map(|i| reports.iter().map(|r| r.snapshots[i].fertile(k) as f64).sum::<f64>() / reports.len() as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

/// Ordinary least squares of `ln y` on `ln x`.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<Fit> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument("need at least three points".into()));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::InvalidArgument(format!("nonpositive point ({x}, {y})")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("x values are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(Fit { slope, stderr, intercept })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Two-sample chi-square homogeneity test. Categories are pooled, rarest first, until
/// every expected cell count is at least 5.
pub fn homogeneity_test<K: Ord + Clone>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> Result<ChiSquareTest> {
    let (na, nb) = (a.values().sum::<u64>() as f64, b.values().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidArgument("samples must be nonempty".into()));
    }
    let n = na + nb;
    let mut cells: BTreeMap<&K, (f64, f64)> = BTreeMap::new();
    for (key, &c) in a {
        cells.entry(key).or_default().0 += c as f64;
    }
    for (key, &c) in b {
        cells.entry(key).or_default().1 += c as f64;
    }
    let mut cells: Vec<(f64, f64)> = cells.into_values().filter(|(x, y)| x + y > 0.0).collect();
    // Stable sort keeps key order among equal totals.
    cells.sort_by(|x, y| (x.0 + x.1).total_cmp(&(y.0 + y.1)));
    let min_expected = |c: &(f64, f64)| (c.0 + c.1) * na.min(nb) / n;
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for c in cells {
        let g = open.map_or(c, |o| (o.0 + c.0, o.1 + c.1));
        if min_expected(&g) >= 5.0 {
            groups.push(g);
            open = None;
        } else {
            open = Some(g);
        }
    }
    if let Some(o) = open {
        match groups.last_mut() {
            Some(last) => *last = (last.0 + o.0, last.1 + o.1),
            None => groups.push(o),
        }
    }
    if groups.len() < 2 {
        return Ok(ChiSquareTest { statistic: 0.0, dof: 0, p_value: 1.0 });
    }
    let mut stat = 0.0;
    for (x, y) in &groups {
        let t = x + y;
        let (ea, eb) = (t * na / n, t * nb / n);
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dof = groups.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(ChiSquareTest { statistic: stat, dof, p_value: dist.sf(stat) })
}

/// [`homogeneity_test`] over canonical shapes.
pub fn shape_distribution_test(a: &BTreeMap<crate::tree::Shape, u64>, b: &BTreeMap<crate::tree::Shape, u64>) -> Result<ChiSquareTest> {
    homogeneity_test(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsTest> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let en = n.sqrt();
    Ok(KsTest { statistic: d, p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d) })
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Mean and standard error of a sample.
pub fn mean_stderr<T: Scalar>(xs: &[T]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().map(|x| x.as_f64()).sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x.as_f64() - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> LabelledTree {
        let mut t = LabelledTree::new();
        for v in 0..n {
            t.add_child_at(v);
        }
        t
    }

    #[test]
    fn census_examples() {
        let c = fertility_census(&LabelledTree::new(), 3);
        assert!(c.values().all(|&x| x == 0));
        let c = fertility_census(&path(3), 4);
        assert_eq!(c.into_iter().collect::<Vec<_>>(), vec![(1, 3), (2, 2), (3, 1), (4, 0)]);
    }

    #[test]
    fn inventory_counts() {
        let mut t = LabelledTree::new();
        for _ in 0..3 {
            t.add_child_at(0);
        }
        t.add_child_at(1);
        t.add_child_at(4);
        let inv = child_inventory(&t, 0, 2);
        assert_eq!(inv.shapes.get("()"), Some(&2));
        assert_eq!(inv.larger, 1);
        assert_eq!(t.label(5).to_string(), "1.1.1");
    }

    #[test]
    fn fit_examples() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x: &f64| (x, x.powf(-1.5))).collect();
        let f = scaling_fit(&pts).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12 && f.stderr < 1e-10);
        let pts: Vec<(f64, f64)> = [3.0, 5.0, 7.0].iter().map(|&x: &f64| (x, 42.0 / (x * x))).collect();
        assert!((scaling_fit(&pts).unwrap().slope + 2.0).abs() < 1e-12);
        assert!(scaling_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(scaling_fit(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn chi_square_identical_and_degenerate() {
        let a: BTreeMap<u32, u64> = [(0, 100), (1, 50), (2, 7), (3, 1)].into();
        let t = homogeneity_test(&a, &a).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
        let single: BTreeMap<u32, u64> = [(0, 10)].into();
        assert_eq!(homogeneity_test(&single, &single).unwrap().p_value, 1.0);
        assert!(homogeneity_test(&BTreeMap::<u32, u64>::new(), &a).is_err());
    }

    #[test]
    fn chi_square_detects_difference() {
        let a: BTreeMap<u32, u64> = [(0, 500), (1, 500)].into();
        let b: BTreeMap<u32, u64> = [(0, 600), (1, 400)].into();
        let t = homogeneity_test(&a, &b).unwrap();
        assert_eq!(t.dof, 1);
        assert!(t.p_value < 1e-4);
    }

    #[test]
    fn kolmogorov_values() {
        assert!((kolmogorov_sf(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_sf(1.95) - 0.0010).abs() < 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn trajectory_checkpoint_zero() {
        let spec = TrajectorySpec {
            kernel: Kernel::power(2.0).unwrap(),
            mode: Mode::Discrete,
            checkpoints: vec![0],
            k_max: 2,
            shape_cap: 2,
            n_trunc: 0,
        };
        let r = census_trajectory(&spec, 1).unwrap();
        assert_eq!(r.snapshots.len(), 1);
        assert_eq!(r.snapshots[0].k_fertile, vec![0, 0]);
        let bad = TrajectorySpec { checkpoints: vec![5, 5], ..spec };
        assert!(census_trajectory(&bad, 1).is_err());
    }
}
