//! Reproducible randomness.
//!
//! Two sources are used:
//!
//! * [`TrialRng`], a ChaCha8 stream per trial for the discrete chain. The seed of
//!   trial `i` under master seed `m` is `trial_seed(m, i)`: the `(i+1)`-th output of
//!   SplitMix64 started from state `m`.
//! * [`ClockSource`], a counter-based source of the exponential clocks `X(a, j)`.
//!   Each label `a` gets a 64-bit key obtained by folding its path into the master
//!   seed with [`mix64`]; the uniform behind `X(a, j)` is the `(j+1)`-th SplitMix64
//!   output from that key. Any clock can be re-queried at any time and always
//!   returns the same value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tree::Label;
use crate::scalar::Scalar;

pub type TrialRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const CLOCK_DOMAIN: u64 = 0x6A09_E667_F3BC_C909;

/// SplitMix64 finalizer (a bijection on `u64`).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `(i+1)`-th SplitMix64 output from state `state`.
#[inline]
pub fn splitmix_at(state: u64, i: u64) -> u64 {
    mix64(state.wrapping_add(GOLDEN.wrapping_mul(i.wrapping_add(1))))
}

pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    splitmix_at(master_seed, trial)
}

pub fn trial_rng(master_seed: u64, trial: u64) -> TrialRng {
    TrialRng::seed_from_u64(trial_seed(master_seed, trial))
}

/// Maps 64 random bits to the open interval (0, 1).
#[inline]
pub fn open01(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Re-queryable source of the clocks `X(a, j) ~ exp(f(j))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClockSource {
    master_seed: u64,
}

impl ClockSource {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn root_key(&self) -> u64 {
        mix64(self.master_seed ^ CLOCK_DOMAIN)
    }

    /// Key of `a·i` given the key of `a`.
    #[inline]
    pub fn child_key(parent_key: u64, i: u32) -> u64 {
        mix64(parent_key ^ mix64(GOLDEN.wrapping_mul(u64::from(i) + 1)))
    }

    pub fn key(&self, label: &Label) -> u64 {
        label.path().iter().fold(self.root_key(), |k, &i| Self::child_key(k, i))
    }

    /// An independent stream identified by an arbitrary path of integers
    /// (used by the oracles for per-trial variables). Disjoint from label keys
    /// because label paths never contain 0.
    pub fn stream_key(&self, path: &[u64]) -> u64 {
        path.iter().fold(mix64(self.root_key() ^ GOLDEN), |k, &i| mix64(k ^ mix64(i.wrapping_add(GOLDEN))))
    }

    /// A standard exponential `E(key, j)`; `X(a, j) = E(key(a), j) / f(j)`.
    #[inline]
    pub fn exp1(key: u64, j: u64) -> f64 {
        -open01(splitmix_at(key, j)).ln()
    }

    #[inline]
    pub fn clock<T: Scalar>(key: u64, j: u64, rate: T) -> T {
        T::lit(Self::exp1(key, j)) / rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open01_stays_open() {
        assert!(open01(0) > 0.0);
        assert!(open01(u64::MAX) < 1.0);
    }

    #[test]
    fn clocks_are_requeryable() {
        let c = ClockSource::new(7);
        let a = Label::from_path(vec![2, 1, 3]).unwrap();
        let k = c.key(&a);
        assert_eq!(k, c.key(&a));
        assert_eq!(ClockSource::exp1(k, 5), ClockSource::exp1(k, 5));
        assert_ne!(ClockSource::exp1(k, 5), ClockSource::exp1(k, 6));
        let root = c.root_key();
        let k2 = ClockSource::child_key(ClockSource::child_key(ClockSource::child_key(root, 2), 1), 3);
        assert_eq!(k, k2);
        assert_ne!(c.key(&a), ClockSource::new(8).key(&a));
    }

    #[test]
    fn trial_seeds_differ() {
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
        assert_eq!(trial_seed(42, 3), splitmix_at(42, 3));
    }

    #[test]
    fn exp1_mean_is_one() {
        let n = 200_000u64;
        let mean: f64 = (0..n).map(|j| ClockSource::exp1(99, j)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 4.0 / (n as f64).sqrt() * 1.0, "mean {mean}");
    }
}
