//! Signed reals stored by the log of their absolute value, plus a streaming
//! log-sum-exp accumulator.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `sign · exp(log_abs)`. Zero has `sign == 0` and `log_abs == -inf`.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogReal {
    sign: i8,
    log_abs: f64,
}

/// `log(exp(a) + exp(b))` for finite-or-negative-infinite inputs.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

impl LogReal {
    pub const ZERO: LogReal = LogReal {
        sign: 0,
        log_abs: f64::NEG_INFINITY,
    };
    pub const ONE: LogReal = LogReal {
        sign: 1,
        log_abs: 0.0,
    };

    /// Positive value `exp(l)`; `l = -inf` gives zero.
    pub fn from_ln(l: f64) -> Self {
        if l == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self { sign: 1, log_abs: l }
        }
    }

    pub fn from_signed_ln(sign: i8, l: f64) -> Self {
        if sign == 0 || l == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self {
                sign: sign.signum(),
                log_abs: l,
            }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self {
                sign: if x > 0.0 { 1 } else { -1 },
                log_abs: x.abs().ln(),
            }
        }
    }

    #[inline]
    pub fn sign(&self) -> i8 {
        self.sign
    }

    /// Natural log of the absolute value (`-inf` for zero).
    #[inline]
    pub fn ln_abs(&self) -> f64 {
        self.log_abs
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn to_f64(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => s as f64 * self.log_abs.exp(),
        }
    }

    pub fn mul(self, other: Self) -> Self {
        if self.sign == 0 || other.sign == 0 {
            return Self::ZERO;
        }
        Self {
            sign: self.sign * other.sign,
            log_abs: self.log_abs + other.log_abs,
        }
    }

    pub fn div(self, other: Self) -> Result<Self> {
        if other.sign == 0 {
            return Err(Error::Domain("division by zero LogReal".into()));
        }
        if self.sign == 0 {
            return Ok(Self::ZERO);
        }
        Ok(Self {
            sign: self.sign * other.sign,
            log_abs: self.log_abs - other.log_abs,
        })
    }

    /// Real power of a non-negative value; `0^0 = 1`.
    pub fn powf(self, p: f64) -> Result<Self> {
        match self.sign {
            0 if p == 0.0 => Ok(Self::ONE),
            0 if p > 0.0 => Ok(Self::ZERO),
            0 => Err(Error::Domain("negative power of zero".into())),
            -1 => Err(Error::Domain("real power of a negative LogReal".into())),
            _ => Ok(Self::from_ln(self.log_abs * p)),
        }
    }

    pub fn neg(self) -> Self {
        Self {
            sign: -self.sign,
            log_abs: self.log_abs,
        }
    }

    pub fn add(self, other: Self) -> Self {
        if self.sign == 0 {
            return other;
        }
        if other.sign == 0 {
            return self;
        }
        if self.sign == other.sign {
            return Self {
                sign: self.sign,
                log_abs: log_add_exp(self.log_abs, other.log_abs),
            };
        }
        let (big, small) = if self.log_abs >= other.log_abs {
            (self, other)
        } else {
            (other, self)
        };
        let d = small.log_abs - big.log_abs;
        if d == 0.0 {
            return Self::ZERO;
        }
        Self::from_signed_ln(big.sign, big.log_abs + (-d.exp()).ln_1p())
    }

    pub fn sub(self, other: Self) -> Self {
        self.add(other.neg())
    }
}

impl PartialOrd for LogReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Some(Ordering::Equal),
                1 => self.log_abs.partial_cmp(&other.log_abs),
                _ => other.log_abs.partial_cmp(&self.log_abs),
            },
            o => Some(o),
        }
    }
}

impl fmt::Debug for LogReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            1 => write!(f, "exp({})", self.log_abs),
            _ => write!(f, "-exp({})", self.log_abs),
        }
    }
}

/// Streaming `log Σ exp(ℓ_i)` with a running maximum shift.
#[derive(Clone, Debug)]
pub struct LseAccumulator {
    max: f64,
    sum: f64,
    count: u64,
}

impl Default for LseAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl LseAccumulator {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
            count: 0,
        }
    }

    #[inline]
    pub fn add(&mut self, l: f64) {
        self.count += 1;
        if l == f64::NEG_INFINITY {
            return;
        }
        if l > self.max {
            self.sum = self.sum * (self.max - l).exp() + 1.0;
            self.max = l;
        } else {
            self.sum += (l - self.max).exp();
        }
    }

    pub fn merge(&mut self, other: &LseAccumulator) {
        self.count += other.count;
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max > self.max {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        } else {
            self.sum += other.sum * (other.max - self.max).exp();
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `log Σ exp(ℓ_i)`, or `-inf` when nothing (or only zeros) was added.
    pub fn finalize(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }

    pub fn to_log_real(&self) -> LogReal {
        LogReal::from_ln(self.finalize())
    }
}

impl FromIterator<f64> for LseAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for l in iter {
            acc.add(l);
        }
        acc
    }
}

/// `log Σ exp(ℓ_i)` over a slice.
pub fn log_sum_exp(ls: &[f64]) -> f64 {
    ls.iter().copied().collect::<LseAccumulator>().finalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn signed_arithmetic() {
        let a = LogReal::from_f64(3.0);
        let b = LogReal::from_f64(-5.0);
        assert!((a.add(b).to_f64() + 2.0).abs() < 1e-14);
        assert!((a.mul(b).to_f64() + 15.0).abs() < 1e-13);
        assert!((b.div(a).unwrap().to_f64() + 5.0 / 3.0).abs() < 1e-14);
        assert!(a.sub(a).is_zero());
        assert!(b < a && LogReal::ZERO < a && b < LogReal::ZERO);
        assert_eq!(LogReal::ZERO.powf(0.0).unwrap(), LogReal::ONE);
        assert!(b.powf(0.5).is_err());
    }

    #[test]
    fn accumulator_handles_extremes() {
        let acc: LseAccumulator = [1000.0, 1000.0, f64::NEG_INFINITY].into_iter().collect();
        assert!((acc.finalize() - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(acc.count(), 3);
        assert_eq!(LseAccumulator::new().finalize(), f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn permutation_invariance(mut xs in proptest::collection::vec(-700.0f64..700.0, 1..200), seed in any::<u64>()) {
            let fwd = log_sum_exp(&xs);
            // deterministic shuffle
            let mut s = seed | 1;
            for i in (1..xs.len()).rev() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                xs.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let perm = log_sum_exp(&xs);
            prop_assert!((fwd - perm).abs() <= 1e-12 * fwd.abs().max(1.0));
        }

        #[test]
        fn merge_matches_sequential(xs in proptest::collection::vec(-50.0f64..50.0, 2..100), cut in 1usize..50) {
            let cut = cut.min(xs.len() - 1);
            let mut a: LseAccumulator = xs[..cut].iter().copied().collect();
            let b: LseAccumulator = xs[cut..].iter().copied().collect();
            a.merge(&b);
            let all = log_sum_exp(&xs);
            prop_assert!((a.finalize() - all).abs() < 1e-12 * all.abs().max(1.0));
        }
    }
}
