//! Attachment kernels `f` and the reciprocal tail sums that govern explosion.
//!
//! A kernel maps an in-degree `x >= 0` to a strictly positive rate. The power
//! form is `f(x) = (x + 1)^p`. A tabulated kernel lists `f(0), ..., f(L-1)`
//! explicitly and continues as `f(x) = f(L-1) * ((x + 1) / L)^tail_p` beyond
//! the table, so that tail sums and explosivity stay decidable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default relative tolerance for reciprocal tail sums.
pub const DEFAULT_TAIL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
enum KernelRepr<T> {
    Power { p: T },
    Table { values: Vec<T>, tail_p: T },
}

/// An attachment (or feedback) kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr<T>", into = "KernelRepr<T>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Kernel<T> {
    repr: KernelRepr<T>,
}

impl<T: Scalar> TryFrom<KernelRepr<T>> for Kernel<T> {
    type Error = Error;

    fn try_from(repr: KernelRepr<T>) -> Result<Self> {
        match repr {
            KernelRepr::Power { p } => Self::power(p),
            KernelRepr::Table { values, tail_p } => Self::table(values, tail_p),
        }
    }
}

impl<T: Scalar> From<Kernel<T>> for KernelRepr<T> {
    fn from(k: Kernel<T>) -> Self {
        k.repr
    }
}

/// A reciprocal tail sum together with a bound on its truncation and rounding error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailSum<T> {
    pub value: T,
    pub error_bound: T,
}

impl<T: Scalar> TailSum<T> {
    pub fn low(&self) -> T {
        self.value - self.error_bound
    }

    pub fn high(&self) -> T {
        self.value + self.error_bound
    }
}

impl<T: Scalar> Kernel<T> {
    /// `f(x) = (x + 1)^p`, `p > 0`.
    pub fn power(p: T) -> Result<Self> {
        if !(p > T::zero()) || !p.is_finite() {
            return Err(Error::InvalidKernel(format!("power exponent must be finite and > 0, got {p}")));
        }
        Ok(Self { repr: KernelRepr::Power { p } })
    }

    pub fn table(values: Vec<T>, tail_p: T) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidKernel("empty table".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v > T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidKernel(format!("table value {v} is not finite and positive")));
        }
        if !(tail_p > T::zero()) || !tail_p.is_finite() {
            return Err(Error::InvalidKernel(format!("tail exponent must be finite and > 0, got {tail_p}")));
        }
        Ok(Self { repr: KernelRepr::Table { values, tail_p } })
    }

    /// The power exponent, or the declared tail exponent of a tabulated kernel.
    pub fn p(&self) -> T {
        match &self.repr {
            KernelRepr::Power { p } => *p,
            KernelRepr::Table { tail_p, .. } => *tail_p,
        }
    }

    pub fn is_power(&self) -> bool {
        matches!(self.repr, KernelRepr::Power { .. })
    }

    /// Length of the explicit table (0 for power kernels).
    fn table_len(&self) -> usize {
        match &self.repr {
            KernelRepr::Power { .. } => 0,
            KernelRepr::Table { values, .. } => values.len(),
        }
    }

    pub fn eval(&self, x: usize) -> T {
        match &self.repr {
            KernelRepr::Power { p } => (T::from_count(x) + T::one()).powf(*p),
            KernelRepr::Table { values, tail_p } => match values.get(x) {
                Some(v) => *v,
                None => {
                    let len = T::from_count(values.len());
                    values[values.len() - 1] * ((T::from_count(x) + T::one()) / len).powf(*tail_p)
                }
            },
        }
    }

    /// `sum_{n >= 0} 1/f(n) < infinity`.
    pub fn is_explosive(&self) -> bool {
        self.p() > T::one()
    }

    /// `sum_{j >= n} 1/f(j)`: the mean of `sum_{j >= n} X_j` with `X_j ~ exp(f(j))`.
    pub fn tail_mean(&self, n: usize) -> Result<TailSum<T>> {
        self.reciprocal_tail(n, 1, default_tol::<T>())
    }

    /// `sum_{j >= n} f(j)^-power`, computed as an explicit partial sum up to some `N`
    /// plus a convexity bracket on the remainder, with `N` grown until the bracket
    /// is narrower than `rel_tol` of the remainder.
    pub fn reciprocal_tail(&self, n: usize, power: u32, rel_tol: f64) -> Result<TailSum<T>> {
        let q = self.p() * T::from_u32(power).expect("small integer");
        if !(q > T::one()) {
            return Err(Error::TailDiverges);
        }
        let (scale, _) = self.tail_continuation(power);
        let tol = T::lit(rel_tol.max(default_tol::<T>()));
        let half = T::lit(0.5);
        // Bracket on sum_{j >= big_n} scale * (j+1)^-q for convex decreasing summands:
        //   integral_{N}^{inf} g + g(N)/2  <=  sum  <=  integral_{N-1/2}^{inf} g
        let bracket = |big_n: usize| -> (T, T) {
            let x = T::from_count(big_n) + T::one();
            let q1 = q - T::one();
            let lower = scale * (x.powf(-q1) / q1 + half * x.powf(-q));
            let upper = scale * (x - half).powf(-q1) / q1;
            (lower, upper)
        };
        let mut big_n = n.max(self.table_len()).max(1);
        let (mut lower, mut upper) = bracket(big_n);
        while upper - lower > tol * lower && big_n < (1usize << 40) {
            big_n = big_n.saturating_mul(2);
            (lower, upper) = bracket(big_n);
        }
        let mut partial = T::zero();
        for j in (n..big_n).rev() {
            partial = partial + self.eval(j).powi(-(power as i32));
        }
        let value = partial + half * (lower + upper);
        let terms = T::from_count(big_n - n + 4);
        let error_bound = half * (upper - lower) + terms * T::epsilon() * value;
        Ok(TailSum { value, error_bound })
    }

    /// `(C, q)` such that `f(x)^-power = C (x+1)^-q` for `x >= table_len - 1`.
    fn tail_continuation(&self, power: u32) -> (T, T) {
        let m = T::from_u32(power).expect("small integer");
        match &self.repr {
            KernelRepr::Power { p } => (T::one(), *p * m),
            KernelRepr::Table { values, tail_p } => {
                let len = T::from_count(values.len());
                let last = values[values.len() - 1];
                ((last / len.powf(*tail_p)).powf(-m), *tail_p * m)
            }
        }
    }

    /// Smallest `n >= 1` with `n^(p - 1/2) <= f(n) / 2`: the threshold beyond which
    /// the Chernoff parameter `s = n^(p - 1/2)` is admissible for the suffix `j >= n`.
    pub fn chernoff_n0(&self) -> usize {
        let e = self.p() - T::lit(0.5);
        (1..=1usize << 24)
            .find(|&n| T::from_count(n).powf(e) <= T::lit(0.5) * self.eval(n))
            .unwrap_or(usize::MAX)
    }
}

fn default_tol<T: Scalar>() -> f64 {
    DEFAULT_TAIL_TOL.max(64.0 * T::epsilon().as_f64())
}

/// `k_p`: the smallest positive integer `k` with `p > 1 + 1/k` (strict).
pub fn critical_k<T: Scalar>(p: T) -> Result<usize> {
    if !(p > T::one()) || !p.is_finite() {
        return Err(Error::NoCriticalIndex(p.as_f64()));
    }
    let transition = |k: usize| T::one() + T::one() / T::from_count(k);
    let guess = (T::one() / (p - T::one())).floor().to_usize().unwrap_or(usize::MAX - 1);
    let mut k = guess.saturating_add(1).max(1);
    while k > 1 && p > transition(k - 1) {
        k -= 1;
    }
    while !(p > transition(k)) {
        k += 1;
    }
    Ok(k)
}

/// Lazily extended table of `f(0), f(1), ...` with an overflow guard.
#[derive(Debug, Clone)]
pub struct RateTable<T> {
    kernel: Kernel<T>,
    rates: Vec<T>,
}

impl<T: Scalar> RateTable<T> {
    pub fn new(kernel: Kernel<T>) -> Self {
        Self { kernel, rates: Vec::new() }
    }

    pub fn kernel(&self) -> &Kernel<T> {
        &self.kernel
    }

    pub fn rate(&mut self, d: usize) -> Result<T> {
        while self.rates.len() <= d {
            let x = self.rates.len();
            let r = self.kernel.eval(x);
            if !r.is_finite() {
                return Err(Error::RateOverflow(x));
            }
            self.rates.push(r);
        }
        Ok(self.rates[d])
    }
}
