//! Exact and Monte Carlo checks of the probability bounds: Erlang tails, the
//! fertility-probability scaling, large deviations of clock suffix sums and the
//! inter-birth dominance.

use serde::{Deserialize, Serialize};

use crate::analysis::{ks_test, KsTest};
use crate::embed::EmbedState;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::rng::{trial_seed, ClockSource};
use crate::scalar::Scalar;

const FERTILITY_DOMAIN: u64 = 0xFE27;
const LGDEV_DOMAIN: u64 = 0x16DE;

/// Screened trials are resolved early once the undecided outcome has probability
/// below this.
pub const SCREEN_EPSILON: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckResult {
    pub empirical: f64,
    pub bound_shape: f64,
    pub n: usize,
    pub trials: u64,
    /// Binomial standard error `sqrt(e (1 - e) / trials)`.
    pub std_error: f64,
    /// Standard error of the estimator actually used; differs from `std_error` for
    /// importance sampling.
    pub estimator_std_error: f64,
    /// Deterministic tail correction exceeded 10% of the mean suffix.
    pub bias_flag: bool,
    /// Upper bound on the probability mass misassigned by early screening.
    pub screening_bias: f64,
    /// No trials were run; `empirical` carries no information.
    pub undefined: bool,
}

impl BoundCheckResult {
    fn from_estimate(empirical: f64, estimator_std_error: f64, bound_shape: f64, n: usize, trials: u64) -> Self {
        let empirical = empirical.clamp(0.0, 1.0);
        let undefined = trials == 0;
        let std_error = if undefined { 0.0 } else { (empirical * (1.0 - empirical) / trials as f64).sqrt() };
        Self {
            empirical,
            bound_shape,
            n,
            trials,
            std_error,
            estimator_std_error,
            bias_flag: false,
            screening_bias: 0.0,
            undefined,
        }
    }

    pub fn ratio(&self) -> f64 {
        self.empirical / self.bound_shape
    }
}

/// `Pr[Z_1 + ... + Z_k <= lambda]` for i.i.d. mean-one exponentials.
pub fn erlang_tail(k: u32, lambda: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if lambda <= 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    if lambda < kf {
        // e^{-l} sum_{j>=k} l^j/j! = (l^k/k!) e^{-l} (1 + l/(k+1) + l^2/((k+1)(k+2)) + ...)
        let lead = poisson_lead(k, lambda);
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut i = 1.0;
        while term > sum * 1e-17 {
            term *= lambda / (kf + i);
            sum += term;
            i += 1.0;
        }
        lead * ((-lambda).exp() * sum).min(1.0)
    } else {
        let mut term = (-lambda).exp();
        let mut head = term;
        for j in 1..k {
            term *= lambda / j as f64;
            head += term;
        }
        (1.0 - head).clamp(0.0, 1.0)
    }
}

/// `lambda^k / k!`.
pub fn poisson_lead(k: u32, lambda: f64) -> f64 {
    if k <= 170 {
        (1..=k).fold(1.0, |acc, i| acc * (lambda / i as f64))
    } else {
        (k as f64 * lambda.ln() - statrs::function::gamma::ln_gamma(k as f64 + 1.0)).exp()
    }
}

/// Chernoff screening thresholds for the upper tail of `sum_{j >= J} X_j` over a
/// finite rate list: from checkpoint `J` on, `P(sum >= g) < eps` whenever `g >= g*_J`.
#[derive(Debug, Clone)]
struct Screen {
    /// `(offset into rates, g*)`, ascending offsets.
    checkpoints: Vec<(usize, f64)>,
}

impl Screen {
    fn new(rates: &[f64], eps: f64) -> Self {
        let log_term = -eps.ln();
        let mut offsets = vec![0];
        let mut step = 1;
        while offsets.last().unwrap() + step < rates.len() {
            offsets.push(offsets.last().unwrap() + step);
            step *= 2;
        }
        let checkpoints = offsets
            .into_iter()
            .map(|off| {
                let suffix = &rates[off..];
                let f0 = suffix[0];
                let best = (1..=64)
                    .map(|i| {
                        let s = f0 * (1.0 - 0.5f64.powf(i as f64 / 4.0));
                        let cumulant: f64 = suffix.iter().map(|&f| -(-s / f).ln_1p()).sum();
                        (cumulant + log_term) / s
                    })
                    .fold(f64::INFINITY, f64::min);
                (off, best)
            })
            .collect();
        Self { checkpoints }
    }
}

fn rates_f64<T: Scalar>(kernel: &Kernel<T>, from: usize, to: usize) -> Vec<f64> {
    (from..to).map(|j| kernel.eval(j).as_f64()).collect()
}

/// Monte Carlo estimate of `q_n = Pr[sum_{l<k} Y_l <= sum_{j>=n} X_j]` with
/// independent `Y_l ~ exp(f(l))`, `X_j ~ exp(f(j))`. The suffix is sampled up to index
/// `n_trunc` and completed by its deterministic mean.
///
/// Trials are resolved as soon as the outcome is certain, or once the suffix would
/// need a deviation of probability below [`SCREEN_EPSILON`] to change it; the latter
/// is accounted in `screening_bias`. Every clock is keyed by its index, so
/// resolution order does not affect the sampled values.
pub fn mc_fertility_bound<T: Scalar>(
    n: usize,
    k: usize,
    kernel: &Kernel<T>,
    trials: u64,
    n_trunc: usize,
    clocks: &ClockSource,
) -> Result<BoundCheckResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let p = kernel.p().as_f64();
    let bound_shape = (n as f64).powf(-(k as f64) * (p - 1.0));
    if k == 0 {
        return Ok(BoundCheckResult::from_estimate(1.0, 0.0, bound_shape, n, trials));
    }
    let cutoff = n_trunc.max(n);
    let tail_n = kernel.tail_mean(n)?.value.as_f64();
    let tail_cut = kernel.tail_mean(cutoff)?.value.as_f64();
    let head = rates_f64(kernel, 0, k);
    let rates = rates_f64(kernel, n, cutoff);
    let screen = if rates.is_empty() { Screen { checkpoints: vec![] } } else { Screen::new(&rates, SCREEN_EPSILON) };
    let mut hits = 0u64;
    let mut screened = 0u64;
    for i in 0..trials {
        let key_y = clocks.stream_key(&[FERTILITY_DOMAIN, n as u64, k as u64, i, 0]);
        let key_x = clocks.stream_key(&[FERTILITY_DOMAIN, n as u64, k as u64, i, 1]);
        let y = head.iter().enumerate().fold(0.0, |acc, (l, &f)| acc + ClockSource::clock(key_y, l as u64, f));
        let mut acc = 0.0;
        let mut next_cp = 0;
        let mut outcome = None;
        for (off, &f) in rates.iter().enumerate() {
            if acc + tail_cut >= y {
                outcome = Some(true);
                break;
            }
            if let Some(&(cp, g)) = screen.checkpoints.get(next_cp) {
                if cp == off {
                    next_cp += 1;
                    if y - acc - tail_cut >= g {
                        screened += 1;
                        outcome = Some(false);
                        break;
                    }
                }
            }
            acc += ClockSource::clock(key_x, (n + off) as u64, f);
        }
        if outcome.unwrap_or(y <= acc + tail_cut) {
            hits += 1;
        }
    }
    let empirical = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
    let mut res = BoundCheckResult::from_estimate(empirical, 0.0, bound_shape, n, trials);
    res.estimator_std_error = res.std_error;
    res.bias_flag = tail_cut > 0.1 * tail_n;
    res.screening_bias = if trials == 0 { 0.0 } else { screened as f64 * SCREEN_EPSILON / trials as f64 };
    Ok(res)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Direct sampling.
    Plain,
    /// Exponential tilting of every suffix clock toward each deviation boundary, with
    /// the trials split between the two sides.
    Tilted,
}

/// Solves `sum_j (1/(f_j - theta) - 1/f_j) = target` for `theta` on the given side.
fn tilt_for(rates: &[f64], target: f64, upper: bool) -> Option<f64> {
    let shift = |theta: f64| -> f64 {
        if upper {
            rates.iter().map(|&f| 1.0 / (f - theta) - 1.0 / f).sum()
        } else {
            rates.iter().map(|&f| 1.0 / f - 1.0 / (f + theta)).sum()
        }
    };
    let (mut lo, mut hi) = (0.0, if upper { rates[0] } else { 1.0 });
    if !upper {
        let total: f64 = rates.iter().map(|f| 1.0 / f).sum();
        if target >= total {
            return None;
        }
        while shift(hi) < target {
            hi *= 2.0;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if shift(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Estimate of `Pr[|sum_{j>=n} X_j - tail_mean(n)| > delta]`, the suffix sampled up to
/// index `n_trunc` and completed by its mean. `bound_shape = exp(-delta n^{p - 1/2})`.
pub fn lgdev_tail_check<T: Scalar>(
    n: usize,
    kernel: &Kernel<T>,
    delta: f64,
    trials: u64,
    n_trunc: usize,
    clocks: &ClockSource,
    estimator: Estimator,
) -> Result<BoundCheckResult> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let p = kernel.p().as_f64();
    let bound_shape = (-delta * (n as f64).powf(p - 0.5)).exp();
    let cutoff = n_trunc.max(n + 1);
    let tail_n = kernel.tail_mean(n)?.value.as_f64();
    let tail_cut = kernel.tail_mean(cutoff)?.value.as_f64();
    let offset = tail_cut - tail_n;
    let rates = rates_f64(kernel, n, cutoff);
    let key = |side: u64, i: u64| clocks.stream_key(&[LGDEV_DOMAIN, n as u64, delta.to_bits(), side, i]);
    let (est, se) = match estimator {
        Estimator::Plain => {
            let mut hits = 0u64;
            for i in 0..trials {
                let kx = key(0, i);
                let sum = rates.iter().enumerate().fold(0.0, |acc, (o, &f)| acc + ClockSource::clock(kx, (n + o) as u64, f));
                if (sum + offset).abs() > delta {
                    hits += 1;
                }
            }
            let e = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
            (e, if trials == 0 { 0.0 } else { (e * (1.0 - e) / trials as f64).sqrt() })
        }
        Estimator::Tilted => {
            let mut est = 0.0;
            let mut var = 0.0;
            for (side, upper) in [(1u64, true), (2u64, false)] {
                let side_trials = if upper { trials.div_ceil(2) } else { trials / 2 };
                if side_trials == 0 {
                    continue;
                }
                let Some(theta) = tilt_for(&rates, delta, upper) else { continue };
                let signed = if upper { -theta } else { theta };
                let tilted: Vec<f64> = rates.iter().map(|&f| f + signed).collect();
                let log_norm: f64 = rates.iter().zip(&tilted).map(|(f, g)| (f / g).ln()).sum();
                let (mut s1, mut s2) = (0.0, 0.0);
                for i in 0..side_trials {
                    let kx = key(side, i);
                    let sum = tilted.iter().enumerate().fold(0.0, |acc, (o, &g)| acc + ClockSource::exp1(kx, (n + o) as u64) / g);
                    let dev = sum + offset;
                    let hit = if upper { dev > delta } else { dev < -delta };
                    if hit {
                        let w = (signed * sum + log_norm).exp();
                        s1 += w;
                        s2 += w * w;
                    }
                }
                let t = side_trials as f64;
                let mean = s1 / t;
                est += mean;
                var += (s2 / t - mean * mean).max(0.0) / t;
            }
            (est, var.sqrt())
        }
    };
    let mut res = BoundCheckResult::from_estimate(est, se, bound_shape, n, trials);
    res.bias_flag = tail_cut > 0.1 * tail_n;
    Ok(res)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterbirthCheck {
    pub j: usize,
    /// One result per grid time; `bound_shape` holds `1 - exp(-(j+1) f(j) t)`.
    pub grid: Vec<(f64, BoundCheckResult)>,
    /// Largest `(empirical - bound) / std_error` over the grid (0 when no excess).
    pub max_excess_se: f64,
    pub passed: bool,
    /// Distributional check against `exp(f(0))`, `j = 0` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<KsTest>,
}

/// Number of grid times per `j`.
pub const INTERBIRTH_GRID: usize = 50;

/// Simulates `trials` embedded runs of `j_max + 1` births and compares the empirical
/// CDF of each inter-birth interval `T_j = B_{j+1} - B_j` with `1 - exp(-(j+1) f(j) t)`.
pub fn interbirth_dominance_check<T: Scalar>(kernel: &Kernel<T>, j_max: usize, trials: u64, master_seed: u64) -> Result<Vec<InterbirthCheck>> {
    let mut samples = vec![Vec::with_capacity(trials as usize); j_max + 1];
    for i in 0..trials {
        let mut state = EmbedState::new(kernel.clone(), ClockSource::new(trial_seed(master_seed, i)))?;
        let mut last = 0.0;
        for s in samples.iter_mut() {
            let b = state.next_birth()?.time.as_f64();
            s.push(b - last);
            last = b;
        }
    }
    let mut out = Vec::with_capacity(j_max + 1);
    for (j, mut xs) in samples.into_iter().enumerate() {
        let rate = (j + 1) as f64 * kernel.eval(j).as_f64();
        xs.sort_by(f64::total_cmp);
        let mut grid = Vec::with_capacity(INTERBIRTH_GRID);
        let mut max_excess: f64 = 0.0;
        let mut passed = true;
        for g in 1..=INTERBIRTH_GRID {
            let u = g as f64 / (INTERBIRTH_GRID + 1) as f64;
            let t = -(-u).ln_1p() / rate;
            let bound = -(-rate * t).exp_m1();
            let below = xs.partition_point(|&x| x <= t) as f64;
            let emp = if trials == 0 { 0.0 } else { below / trials as f64 };
            let mut r = BoundCheckResult::from_estimate(emp, 0.0, bound, j, trials);
            r.estimator_std_error = r.std_error;
            if !r.undefined && emp > bound {
                let excess = if r.std_error > 0.0 { (emp - bound) / r.std_error } else { f64::INFINITY };
                max_excess = max_excess.max(excess);
                passed &= emp <= bound + 3.0 * r.std_error;
            }
            grid.push((t, r));
        }
        let ks = if j == 0 && trials > 0 {
            let f0 = kernel.eval(0).as_f64();
            Some(ks_test(&xs, |x| -(-f0 * x).exp_m1())?)
        } else {
            None
        };
        out.push(InterbirthCheck { j, grid, max_excess_se: max_excess, passed, ks });
    }
    Ok(out)
}
