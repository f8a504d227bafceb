//! Extended-exponent complex numbers.
//!
//! A value is stored as `mantissa · 2^exponent` with `1 ≤ |mantissa| < 2`
//! (or the unique zero). Secular coefficients in the heavy-tailed phases leave
//! the `f64` range long before the recurrences that produce them lose
//! precision, so every stored coefficient carries its own binary exponent.

use std::fmt;
use std::ops::{Add, Mul, Neg};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest exponent magnitude accepted before an operation reports overflow.
pub const EXP_LIMIT: i64 = 1 << 62;

/// `2^n` as an `f64`, exact whenever representable (including subnormals);
/// `0` below the subnormal range and `+inf` above `2^1023`.
#[inline]
pub fn pow2(n: i64) -> f64 {
    if (-1022..=1023).contains(&n) {
        f64::from_bits(((n + 1023) as u64) << 52)
    } else if n < -1074 {
        0.0
    } else if n < -1022 {
        f64::from_bits(1u64 << (n + 1074))
    } else {
        f64::INFINITY
    }
}

/// `x · 2^n` without intermediate overflow for any representable result.
pub fn ldexp(mut x: f64, mut n: i64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    while n > 1023 {
        x *= pow2(1023);
        n -= 1023;
        if x.is_infinite() {
            return x;
        }
    }
    while n < -1022 {
        x *= pow2(-1022);
        n += 1022;
        if x == 0.0 {
            return x;
        }
    }
    x * pow2(n)
}

/// `floor(log2(|x|))` for finite non-zero `x`.
#[inline]
pub fn ilogb(x: f64) -> i64 {
    let bits = x.abs().to_bits();
    let biased = (bits >> 52) as i64;
    if biased == 0 {
        // subnormal
        let y = x.abs() * pow2(64);
        (((y.to_bits() >> 52) as i64) - 1023) - 64
    } else {
        biased - 1023
    }
}

#[inline]
fn scale_complex(z: Complex64, n: i64) -> Complex64 {
    Complex64::new(ldexp(z.re, n), ldexp(z.im, n))
}

/// Complex number with a separate signed power-of-two exponent.
#[derive(Clone, Copy, PartialEq)]
pub struct ExtComplex {
    mant: Complex64,
    exp: i64,
}

impl ExtComplex {
    pub const ZERO: ExtComplex = ExtComplex {
        mant: Complex64 { re: 0.0, im: 0.0 },
        exp: 0,
    };
    pub const ONE: ExtComplex = ExtComplex {
        mant: Complex64 { re: 1.0, im: 0.0 },
        exp: 0,
    };

    /// Builds `m · 2^e` and normalizes. Non-finite mantissas are rejected.
    pub fn try_from_parts(m: Complex64, e: i64) -> Result<Self> {
        if !(m.re.is_finite() && m.im.is_finite()) {
            return Err(Error::Overflow(format!("non-finite mantissa {m}")));
        }
        if m.re == 0.0 && m.im == 0.0 {
            return Ok(Self::ZERO);
        }
        // Pre-scale so that the modulus cannot overflow.
        let big = m.re.abs().max(m.im.abs());
        let shift = ilogb(big);
        let mut mm = scale_complex(m, -shift);
        let mut k = shift;
        let n = mm.norm();
        let adj = ilogb(n);
        mm = scale_complex(mm, -adj);
        k += adj;
        // hypot rounding can leave the modulus a hair outside [1, 2)
        let n = mm.norm();
        if n >= 2.0 {
            mm *= 0.5;
            k += 1;
        } else if n < 1.0 {
            mm *= 2.0;
            k -= 1;
        }
        let exp = e
            .checked_add(k)
            .filter(|x| x.abs() <= EXP_LIMIT)
            .ok_or_else(|| Error::Overflow(format!("exponent {e} + {k} out of range")))?;
        Ok(Self { mant: mm, exp })
    }

    /// Panicking variant of [`try_from_parts`](Self::try_from_parts).
    pub fn from_parts(m: Complex64, e: i64) -> Self {
        Self::try_from_parts(m, e).expect("ExtComplex::from_parts")
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::from_parts(z, 0)
    }

    pub fn from_f64(x: f64) -> Self {
        Self::from_parts(Complex64::new(x, 0.0), 0)
    }

    /// Value with modulus `exp(log_abs)` and argument `arg`.
    pub fn from_polar_log(log_abs: f64, arg: f64) -> Self {
        if log_abs == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        let l2 = log_abs / std::f64::consts::LN_2;
        let e = l2.floor();
        let frac = (l2 - e) * std::f64::consts::LN_2;
        Self::from_parts(Complex64::from_polar(frac.exp(), arg), e as i64)
    }

    #[inline]
    pub fn mantissa(&self) -> Complex64 {
        self.mant
    }

    #[inline]
    pub fn exponent(&self) -> i64 {
        self.exp
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.mant.re == 0.0 && self.mant.im == 0.0
    }

    /// Converts to a native complex number; may overflow to infinity or
    /// underflow to zero.
    pub fn to_complex(&self) -> Complex64 {
        scale_complex(self.mant, self.exp)
    }

    /// Natural log of the modulus; `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.mant.norm().ln() + self.exp as f64 * std::f64::consts::LN_2
        }
    }

    pub fn arg(&self) -> f64 {
        self.mant.arg()
    }

    pub fn conj(&self) -> Self {
        Self {
            mant: self.mant.conj(),
            exp: self.exp,
        }
    }

    /// Multiplies by `2^n` exactly.
    pub fn scale_pow2(&self, n: i64) -> Result<Self> {
        if self.is_zero() {
            return Ok(*self);
        }
        let exp = self
            .exp
            .checked_add(n)
            .filter(|x| x.abs() <= EXP_LIMIT)
            .ok_or_else(|| Error::Overflow("scale_pow2".into()))?;
        Ok(Self {
            mant: self.mant,
            exp,
        })
    }

    /// Mantissa rescaled to the reference exponent: `self · 2^{-reference}` as
    /// a native complex number (underflows gracefully to zero).
    #[inline]
    pub fn scaled_to(&self, reference: i64) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        let d = self.exp - reference;
        let f = pow2(d);
        if f.is_finite() && f != 0.0 && f >= f64::MIN_POSITIVE {
            self.mant * f
        } else {
            scale_complex(self.mant, d)
        }
    }

    pub fn try_add(self, other: Self) -> Result<Self> {
        if self.is_zero() {
            return Ok(other);
        }
        if other.is_zero() {
            return Ok(self);
        }
        let (hi, lo) = if self.exp >= other.exp {
            (self, other)
        } else {
            (other, self)
        };
        let d = hi.exp - lo.exp;
        if d > 1100 {
            return Ok(hi);
        }
        Self::try_from_parts(hi.mant + lo.mant * pow2(-d), hi.exp)
    }

    pub fn try_mul(self, other: Self) -> Result<Self> {
        if self.is_zero() || other.is_zero() {
            return Ok(Self::ZERO);
        }
        let e = self
            .exp
            .checked_add(other.exp)
            .ok_or_else(|| Error::Overflow("exponent sum".into()))?;
        Self::try_from_parts(self.mant * other.mant, e)
    }

    pub fn mul_complex(self, z: Complex64) -> Self {
        if self.is_zero() {
            return self;
        }
        Self::from_parts(self.mant * z, self.exp)
    }

    pub fn mul_f64(self, x: f64) -> Self {
        if self.is_zero() {
            return self;
        }
        Self::from_parts(self.mant * x, self.exp)
    }
}

/// Sum of two extended-exponent values. Panics only on exponent overflow,
/// which needs magnitudes beyond `2^(2^62)`.
pub fn ext_add(a: ExtComplex, b: ExtComplex) -> ExtComplex {
    a.try_add(b).expect("ExtComplex addition overflow")
}

/// Product of two extended-exponent values.
pub fn ext_mul(a: ExtComplex, b: ExtComplex) -> ExtComplex {
    a.try_mul(b).expect("ExtComplex multiplication overflow")
}

impl Add for ExtComplex {
    type Output = ExtComplex;
    fn add(self, rhs: Self) -> Self {
        ext_add(self, rhs)
    }
}

impl Mul for ExtComplex {
    type Output = ExtComplex;
    fn mul(self, rhs: Self) -> Self {
        ext_mul(self, rhs)
    }
}

impl Neg for ExtComplex {
    type Output = ExtComplex;
    fn neg(self) -> Self {
        Self {
            mant: -self.mant,
            exp: self.exp,
        }
    }
}

impl Default for ExtComplex {
    fn default() -> Self {
        Self::ZERO
    }
}

impl fmt::Debug for ExtComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}+{}i)·2^{}", self.mant.re, self.mant.im, self.exp)
    }
}
