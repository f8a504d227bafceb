//! Special functions: log-gamma, incomplete gamma, modified Bessel series.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::logreal::LogReal;
use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Bernoulli numbers B_2, B_4, ..., B_16.
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

const ZETA_TERMS: usize = 48;

/// `ζ(k) − 1` for `k = 2..ZETA_TERMS+2`, via Euler–Maclaurin from n = 10.
fn zeta_minus_one() -> &'static [f64; ZETA_TERMS] {
    static TABLE: OnceLock<[f64; ZETA_TERMS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut out = [0.0; ZETA_TERMS];
        let n0 = 10.0f64;
        for (idx, slot) in out.iter_mut().enumerate() {
            let k = (idx + 2) as f64;
            // tail first so that the small terms are summed before the large
            let mut tail = n0.powf(1.0 - k) / (k - 1.0) + 0.5 * n0.powf(-k);
            let mut rising = k; // k (k+1) ... (k + 2j - 2)
            let mut fact = 2.0; // (2j)!
            for (j, b) in BERNOULLI.iter().enumerate().take(7) {
                let j = j as f64 + 1.0;
                tail += b / fact * rising * n0.powf(-k - 2.0 * j + 1.0);
                rising *= (k + 2.0 * j - 1.0) * (k + 2.0 * j);
                fact *= (2.0 * j + 1.0) * (2.0 * j + 2.0);
            }
            let mut s = tail;
            for n in (2..10).rev() {
                s += (n as f64).powf(-k);
            }
            *slot = s;
        }
        out
    })
}

/// `ln Γ(2 + t)` for `|t| ≤ 1/2` by its Taylor series about 2; accurate in the
/// relative sense right through the zero at `t = 0`.
fn lgamma_near_two(t: f64) -> f64 {
    let z = zeta_minus_one();
    let mut sum = 0.0;
    let mut pow = t * t;
    let mut terms = [0.0; ZETA_TERMS];
    for (i, zk) in z.iter().enumerate() {
        let k = (i + 2) as f64;
        let sgn = if i % 2 == 0 { 1.0 } else { -1.0 };
        terms[i] = sgn * zk * pow / k;
        pow *= t;
    }
    for v in terms.iter().rev() {
        sum += v;
    }
    (1.0 - EULER_GAMMA) * t + sum
}

/// `ln Γ(1 + t)` for `|t| ≤ 1/2`, Taylor series about 1.
fn lgamma_near_one(t: f64) -> f64 {
    let z = zeta_minus_one();
    let mut terms = [0.0; ZETA_TERMS];
    let mut pow = t * t;
    for (i, zk) in z.iter().enumerate() {
        let k = (i + 2) as f64;
        let sgn = if i % 2 == 0 { 1.0 } else { -1.0 };
        terms[i] = sgn * (1.0 + zk) * pow / k;
        pow *= t;
    }
    let mut sum = 0.0;
    for v in terms.iter().rev() {
        sum += v;
    }
    -EULER_GAMMA * t + sum
}

fn lgamma_stirling(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut corr = 0.0;
    let mut p = inv;
    for (j, b) in BERNOULLI.iter().enumerate() {
        let n = 2.0 * (j as f64 + 1.0);
        corr += b / (n * (n - 1.0)) * p;
        p *= inv2;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + corr
}

/// `ln Γ(x)` for `x > 0`.
///
/// Below 8 the argument is moved into `[0.5, 2.5]` by the functional equation
/// and a Taylor series about 1 or 2 is used; from 8 upward the Stirling series
/// with eight Bernoulli corrections.
pub fn lgamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("lgamma requires x > 0, got {x}")));
    }
    Ok(lgamma_unchecked(x))
}

pub(crate) fn lgamma_unchecked(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x >= 8.0 {
        return lgamma_stirling(x);
    }
    if x < 1.5 {
        // ln Γ(x) = ln Γ(x + 1) − ln x
        if x >= 0.5 {
            return lgamma_near_one(x - 1.0);
        }
        return lgamma_unchecked(x + 1.0) - x.ln();
    }
    if x <= 2.5 {
        return lgamma_near_two(x - 2.0);
    }
    // x in (2.5, 8): ln Γ(x) = ln Γ(x − n) + Σ ln(x − i)
    let mut y = x;
    let mut acc = 0.0;
    while y > 2.5 {
        y -= 1.0;
        acc += y.ln();
    }
    lgamma_near_two(y - 2.0) + acc
}

/// `ln n!`
pub fn ln_factorial(n: u64) -> f64 {
    lgamma_unchecked(n as f64 + 1.0)
}

/// Logs of the lower and upper incomplete gamma functions `γ(s, x)`, `Γ(s, x)`.
fn ln_incomplete_gamma_pair(s: f64, x: f64) -> Result<(f64, f64)> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("incomplete gamma requires s > 0, got {s}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("incomplete gamma requires x >= 0, got {x}")));
    }
    let lg = lgamma_unchecked(s);
    if x == 0.0 {
        return Ok((f64::NEG_INFINITY, lg));
    }
    if x == f64::INFINITY {
        return Ok((lg, f64::NEG_INFINITY));
    }
    let prefactor = s * x.ln() - x;
    if x < s + 1.0 {
        let mut term = 1.0 / s;
        let mut sum = term;
        let mut n = 1.0;
        while n < 100_000.0 {
            term *= x / (s + n);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            n += 1.0;
        }
        let ln_lower = prefactor + sum.ln();
        let p = (ln_lower - lg).exp();
        let ln_upper = if p < 1.0 { lg + (-p).ln_1p() } else { f64::NEG_INFINITY };
        Ok((ln_lower, ln_upper))
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        let mut i = 1.0;
        while i < 100_000.0 {
            let an = -i * (i - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
            i += 1.0;
        }
        let ln_upper = prefactor + h.ln();
        let q = (ln_upper - lg).exp();
        let ln_lower = if q < 1.0 { lg + (-q).ln_1p() } else { f64::NEG_INFINITY };
        Ok((ln_lower, ln_upper))
    }
}

/// Upper incomplete gamma `Γ(s, x) = ∫_x^∞ t^{s−1} e^{−t} dt`, in log form.
pub fn incomplete_gamma_upper(s: f64, x: f64) -> Result<LogReal> {
    ln_incomplete_gamma_pair(s, x).map(|(_, u)| LogReal::from_ln(u))
}

/// Lower incomplete gamma `γ(s, x) = ∫_0^x t^{s−1} e^{−t} dt`, in log form.
pub fn incomplete_gamma_lower(s: f64, x: f64) -> Result<LogReal> {
    ln_incomplete_gamma_pair(s, x).map(|(l, _)| LogReal::from_ln(l))
}

/// `ln ∫_a^b t^{s−1} e^{−t} dt` for `0 ≤ a ≤ b ≤ ∞`.
///
/// The difference is taken on whichever side of the integrand's peak the
/// interval sits, so narrow intervals far from the bulk keep full precision.
pub fn ln_gamma_interval(s: f64, a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0) || !(b >= a) {
        return Err(Error::Domain(format!("gamma interval [{a}, {b}] invalid")));
    }
    if a == b {
        return Ok(f64::NEG_INFINITY);
    }
    let (la, ua) = ln_incomplete_gamma_pair(s, a)?;
    let (lb, ub) = ln_incomplete_gamma_pair(s, b)?;
    let peak = (s - 1.0).max(0.0);
    let diff = |hi: f64, lo: f64| -> f64 {
        if lo == f64::NEG_INFINITY {
            hi
        } else {
            let r = (lo - hi).exp();
            if r >= 1.0 {
                f64::NEG_INFINITY
            } else {
                hi + (-r).ln_1p()
            }
        }
    };
    if b <= peak {
        Ok(diff(lb, la))
    } else if a >= peak {
        Ok(diff(ua, ub))
    } else {
        // interval straddles the peak: split there
        let (lp, up) = ln_incomplete_gamma_pair(s, peak.max(f64::MIN_POSITIVE))?;
        let left = diff(lp, la);
        let right = diff(up, ub);
        Ok(super::logreal::log_add_exp(left, right))
    }
}

/// `I_0(b) − 1` by its power series; intended for `|b| ≲ 700`.
pub fn bessel_i0_minus_one(b: f64) -> f64 {
    let q = 0.25 * b * b;
    let mut term = 1.0;
    let mut sum = 0.0;
    let mut j = 1.0;
    loop {
        term *= q / (j * j);
        sum += term;
        if term <= sum * 1e-17 || j > 5000.0 {
            break;
        }
        j += 1.0;
    }
    sum
}

/// `I_1(b)` by its power series; intended for `|b| ≲ 700`.
pub fn bessel_i1(b: f64) -> f64 {
    let q = 0.25 * b * b;
    let mut term = 0.5 * b;
    let mut sum = term;
    let mut j = 1.0;
    loop {
        term *= q / (j * (j + 1.0));
        sum += term;
        if term.abs() <= sum.abs() * 1e-17 || j > 5000.0 {
            break;
        }
        j += 1.0;
    }
    sum
}

/// The two-sided Stirling sandwich `1 < (2π)^{-1/2} x^{1/2−x} e^x Γ(x) < e^{1/(12x)}`,
/// returned as the log of the middle quantity.
pub fn stirling_log_ratio(x: f64) -> Result<f64> {
    Ok(lgamma(x)? - 0.5 * (2.0 * PI).ln() + (0.5 - x) * x.ln() + x)
}
