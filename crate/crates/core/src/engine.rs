//! Secular coefficients `A_0..A_N` of `exp(Σ_{k ≥ M*} X_k z^k / √k)`.
//!
//! Both paths run the recurrence `n·A_n = Σ_{k=M*}^{n} √k X_k A_{n−k}` with
//! `A_0 = 1`, which follows from `F′ = G′F`. [`secular_coeffs`] is the plain
//! quadratic loop; [`secular_coeffs_dc`] evaluates the same online convolution
//! by divide and conquer with FFT half-products.

use std::collections::HashMap;

use num_complex::Complex64;

use crate::dist::{DistSpec, InputSequence};
use crate::error::{Error, Result};
use crate::numerics::ext::{ilogb, ldexp, pow2};
use crate::numerics::fft::{fft_forward, fft_inverse};
use crate::numerics::ExtComplex;

/// Below this block length the D&C path convolves directly.
const LEAF: usize = 64;

/// Scaled values in the quadratic path are rebased once they pass `2^600`.
const REBASE_BITS: i64 = 600;

/// Where a series came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputRef {
    pub dist: DistSpec,
    pub master_seed: u64,
    pub replicate_index: u64,
}

impl InputRef {
    fn of(inputs: &InputSequence) -> Self {
        Self {
            dist: inputs.dist(),
            master_seed: inputs.master_seed(),
            replicate_index: inputs.replicate_index(),
        }
    }
}

/// Coefficients `A_0..A_N`, truncated below `m_star`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffSeries {
    coeffs: Vec<ExtComplex>,
    m_star: usize,
    input_ref: InputRef,
}

impl CoeffSeries {
    /// Highest degree `N`.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn m_star(&self) -> usize {
        self.m_star
    }

    pub fn input_ref(&self) -> InputRef {
        self.input_ref
    }

    pub fn coeffs(&self) -> &[ExtComplex] {
        &self.coeffs
    }

    pub fn get(&self, n: usize) -> ExtComplex {
        self.coeffs[n]
    }

    /// `A_N`.
    pub fn last(&self) -> ExtComplex {
        *self.coeffs.last().expect("series is never empty")
    }

    /// `log|A_n|`, `-inf` for an exact zero.
    pub fn ln_abs(&self, n: usize) -> f64 {
        self.coeffs[n].ln_abs()
    }
}

fn check(inputs: &InputSequence, n: usize, m_star: usize) -> Result<()> {
    if m_star == 0 {
        return Err(Error::Parameter("m_star must be at least 1".into()));
    }
    if inputs.len() < n {
        return Err(Error::Length {
            have: inputs.len(),
            need: n,
        });
    }
    Ok(())
}

/// `c_k = √k X_k` for `k = 0..=n`, with `c_k = 0` for `k < m_star`.
fn weighted_inputs(inputs: &InputSequence, n: usize, m_star: usize) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let mut c = vec![zero; n + 1];
    for (k, slot) in c.iter_mut().enumerate().skip(m_star.max(1)) {
        let r = inputs.moduli()[k - 1];
        if r != 0.0 {
            *slot = Complex64::from_polar(r * (k as f64).sqrt(), inputs.phases()[k - 1]);
        }
    }
    c
}

/// Quadratic-time recurrence.
///
/// Values are kept as native complex numbers scaled by a shared power of two;
/// when a new coefficient passes `2^600` everything is rescaled, and earlier
/// coefficients that fall below the subnormal range relative to it are
/// dropped from later sums (their contribution is below rounding).
pub fn secular_coeffs(inputs: &InputSequence, n: usize, m_star: usize) -> Result<CoeffSeries> {
    check(inputs, n, m_star)?;
    let c = weighted_inputs(inputs, n, m_star);
    let mut scaled = vec![Complex64::new(0.0, 0.0); n + 1];
    scaled[0] = Complex64::new(1.0, 0.0);
    let mut reference = 0i64;
    let mut out = Vec::with_capacity(n + 1);
    out.push(ExtComplex::ONE);
    for m in 1..=n {
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 1..=m {
            sum += c[k] * scaled[m - k];
        }
        let v = sum / m as f64;
        out.push(ExtComplex::try_from_parts(v, reference)?);
        let big = v.re.abs().max(v.im.abs());
        if big > 0.0 && ilogb(big) > REBASE_BITS {
            let shift = ilogb(big);
            let f = pow2(-shift);
            for s in scaled[..m].iter_mut() {
                *s = scale(*s, -shift, f);
            }
            scaled[m] = scale(v, -shift, f);
            reference += shift;
        } else {
            scaled[m] = v;
        }
    }
    Ok(CoeffSeries {
        coeffs: out,
        m_star,
        input_ref: InputRef::of(inputs),
    })
}

#[inline]
fn scale(z: Complex64, n: i64, f: f64) -> Complex64 {
    if f != 0.0 && f.is_finite() {
        z * f
    } else {
        Complex64::new(ldexp(z.re, n), ldexp(z.im, n))
    }
}

struct DcState {
    c: Vec<Complex64>,
    a: Vec<ExtComplex>,
    acc: Vec<ExtComplex>,
    spectra: HashMap<usize, Vec<Complex64>>,
}

impl DcState {
    /// FFT of `c_0..c_{len−1}` (zero padded), cached per transform length.
    fn spectrum(&mut self, len: usize) -> &[Complex64] {
        let c = &self.c;
        self.spectra.entry(len).or_insert_with(|| {
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            let take = len.min(c.len());
            buf[..take].copy_from_slice(&c[..take]);
            fft_forward(&mut buf);
            buf
        })
    }

    /// Direct recurrence inside `[l, r)`. The block's coefficients are held
    /// natively, scaled to the largest binary exponent seen so far.
    fn leaf(&mut self, l: usize, r: usize) -> Result<()> {
        let mut e_ref = i64::MIN;
        let mut s: Vec<Complex64> = Vec::with_capacity(r - l);
        let push = |s: &mut Vec<Complex64>, e_ref: &mut i64, x: ExtComplex| {
            if !x.is_zero() && x.exponent() > *e_ref {
                if *e_ref != i64::MIN {
                    let shift = *e_ref - x.exponent();
                    let f = pow2(shift);
                    for v in s.iter_mut() {
                        *v = scale(*v, shift, f);
                    }
                }
                *e_ref = x.exponent();
            }
            s.push(if x.is_zero() { Complex64::new(0.0, 0.0) } else { x.scaled_to(*e_ref) });
        };
        if l == 0 {
            push(&mut s, &mut e_ref, self.a[0]);
        }
        for n in l.max(1)..r {
            let mut sum = Complex64::new(0.0, 0.0);
            for (i, v) in s.iter().enumerate() {
                sum += *v * self.c[n - l - i];
            }
            let mut total = self.acc[n];
            if e_ref != i64::MIN && (sum.re != 0.0 || sum.im != 0.0) {
                total = total.try_add(ExtComplex::try_from_parts(sum, e_ref)?)?;
            }
            self.a[n] = total.mul_f64(1.0 / n as f64);
            push(&mut s, &mut e_ref, self.a[n]);
        }
        Ok(())
    }

    /// Adds `Σ_{j∈[l,mid)} A_j c_{n−j}` to `acc[n]` for `n ∈ [mid, r)`.
    fn contribute(&mut self, l: usize, mid: usize, r: usize) -> Result<()> {
        let block = &self.a[l..mid];
        let e_ref = match block.iter().filter(|x| !x.is_zero()).map(|x| x.exponent()).max() {
            Some(e) => e,
            None => return Ok(()),
        };
        let len = (r - l).next_power_of_two();
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (slot, x) in buf.iter_mut().zip(block) {
            *slot = x.scaled_to(e_ref);
        }
        fft_forward(&mut buf);
        let spec = self.spectrum(len);
        for (b, s) in buf.iter_mut().zip(spec) {
            *b *= s;
        }
        fft_inverse(&mut buf);
        let inv = 1.0 / len as f64;
        for n in mid..r {
            let v = buf[n - l] * inv;
            if v.re != 0.0 || v.im != 0.0 {
                self.acc[n] = self.acc[n].try_add(ExtComplex::try_from_parts(v, e_ref)?)?;
            }
        }
        Ok(())
    }

    fn solve(&mut self, l: usize, r: usize) -> Result<()> {
        if r - l <= LEAF {
            return self.leaf(l, r);
        }
        let mid = l + (r - l) / 2;
        self.solve(l, mid)?;
        self.contribute(l, mid, r)?;
        self.solve(mid, r)
    }
}

/// Divide-and-conquer recurrence, `O(N log² N)`.
///
/// Each half-product rescales its source block by the block's largest
/// binary exponent before the FFT, so only the dynamic range inside one block
/// reaches native floating point.
pub fn secular_coeffs_dc(inputs: &InputSequence, n: usize, m_star: usize) -> Result<CoeffSeries> {
    check(inputs, n, m_star)?;
    let mut st = DcState {
        c: weighted_inputs(inputs, n, m_star),
        a: vec![ExtComplex::ZERO; n + 1],
        acc: vec![ExtComplex::ZERO; n + 1],
        spectra: HashMap::new(),
    };
    st.a[0] = ExtComplex::ONE;
    st.solve(0, n + 1)?;
    Ok(CoeffSeries {
        coeffs: st.a,
        m_star,
        input_ref: InputRef::of(inputs),
    })
}

/// Rotates phases `τ_k ↦ τ_k + kα`; every `A_n` picks up the factor `e^{inα}`.
pub fn rotate_inputs(inputs: &InputSequence, alpha: f64) -> InputSequence {
    inputs.with_phases(
        inputs
            .phases()
            .iter()
            .enumerate()
            .map(|(i, t)| t + (i + 1) as f64 * alpha),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{ToPrimitive, Zero};
    use proptest::prelude::*;

    fn gaussian(seed: u64, len: usize) -> InputSequence {
        InputSequence::generate(DistSpec::ComplexGaussian, seed, 0, len)
    }

    /// Exact recurrence over complex rationals, with the same rounded `√k X_k`.
    fn rational_oracle(inputs: &InputSequence, n: usize) -> Vec<(f64, f64)> {
        let c = weighted_inputs(inputs, n, 1);
        let q = |x: f64| BigRational::from_float(x).unwrap();
        let cr: Vec<(BigRational, BigRational)> = c.iter().map(|z| (q(z.re), q(z.im))).collect();
        let mut a: Vec<(BigRational, BigRational)> = vec![(BigRational::from_integer(BigInt::from(1)), BigRational::zero())];
        for m in 1..=n {
            let mut re = BigRational::zero();
            let mut im = BigRational::zero();
            for k in 1..=m {
                let (cr_, ci) = &cr[k];
                let (ar, ai) = &a[m - k];
                re += cr_ * ar - ci * ai;
                im += cr_ * ai + ci * ar;
            }
            let d = BigRational::from_integer(BigInt::from(m));
            a.push((re / &d, im / &d));
        }
        a.iter().map(|(r, i)| (r.to_f64().unwrap(), i.to_f64().unwrap())).collect()
    }

    #[test]
    fn degree_zero_and_two() {
        let x = gaussian(3, 4);
        let s = secular_coeffs(&x, 0, 1).unwrap();
        assert_eq!(s.coeffs(), &[ExtComplex::ONE]);
        let s = secular_coeffs(&x, 2, 1).unwrap();
        let want = x.x(1) * x.x(1) / 2.0 + x.x(2) / 2f64.sqrt();
        assert!((s.get(2).to_complex() - want).norm() < 1e-15 * want.norm());
        let d = secular_coeffs_dc(&x, 2, 1).unwrap();
        assert!((d.get(2).to_complex() - want).norm() < 1e-15 * want.norm());
    }

    #[test]
    fn errors() {
        let x = gaussian(1, 5);
        assert_eq!(secular_coeffs(&x, 6, 1).unwrap_err(), Error::Length { have: 5, need: 6 });
        assert!(secular_coeffs_dc(&x, 6, 1).is_err());
        assert!(matches!(secular_coeffs(&x, 3, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn zero_inputs() {
        let x = InputSequence::from_parts(DistSpec::ComplexGaussian, vec![0.0; 300], vec![0.3; 300]).unwrap();
        for s in [secular_coeffs(&x, 300, 1).unwrap(), secular_coeffs_dc(&x, 300, 1).unwrap()] {
            assert_eq!(s.get(0), ExtComplex::ONE);
            assert!(s.coeffs()[1..].iter().all(|a| a.is_zero()));
        }
    }

    #[test]
    fn matches_exact_rational_recurrence() {
        for (seed, dist) in [(1, DistSpec::ComplexGaussian), (2, DistSpec::Exponential { gamma: 1.0 }), (3, DistSpec::StretchedExponential { p: 0.5 })] {
            let x = InputSequence::generate(dist, seed, 0, 64);
            let exact = rational_oracle(&x, 64);
            let s = secular_coeffs(&x, 64, 1).unwrap();
            let d = secular_coeffs_dc(&x, 64, 1).unwrap();
            for (n, &(re, im)) in exact.iter().enumerate() {
                let want = Complex64::new(re, im);
                for got in [s.get(n).to_complex(), d.get(n).to_complex()] {
                    assert!((got - want).norm() <= 1e-9 * want.norm(), "{dist:?} n={n}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn truncation_is_prefix_zeroing() {
        let x = InputSequence::generate(DistSpec::Exponential { gamma: 1.0 }, 11, 2, 200);
        for m in [1, 2, 5, 16] {
            let a = secular_coeffs(&x, 200, m).unwrap();
            let b = secular_coeffs(&x.with_zeroed_prefix(m), 200, 1).unwrap();
            assert_eq!(a.coeffs(), b.coeffs());
            let a = secular_coeffs_dc(&x, 200, m).unwrap();
            let b = secular_coeffs_dc(&x.with_zeroed_prefix(m), 200, 1).unwrap();
            assert_eq!(a.coeffs(), b.coeffs());
        }
    }

    #[test]
    fn rotation_identities() {
        let x = gaussian(5, 50);
        assert_eq!(rotate_inputs(&x, 0.0).phases(), x.phases());
        let full = rotate_inputs(&x, 2.0 * std::f64::consts::PI);
        for (a, b) in full.phases().iter().zip(x.phases()) {
            let d = (a - b).abs();
            assert!(d < 1e-12 || (d - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        }
        let alpha = 0.37;
        let a = secular_coeffs(&x, 50, 1).unwrap().last().to_complex();
        let b = secular_coeffs(&rotate_inputs(&x, alpha), 50, 1).unwrap().last().to_complex();
        let want = a * Complex64::from_polar(1.0, 50.0 * alpha);
        assert!((b - want).norm() < 1e-10 * a.norm());
    }

    #[test]
    fn heavy_tail_exceeds_double_range_without_overflow() {
        let x = InputSequence::generate(DistSpec::StretchedExponential { p: 0.3 }, 4, 0, 3000);
        let s = secular_coeffs(&x, 3000, 1).unwrap();
        let d = secular_coeffs_dc(&x, 3000, 1).unwrap();
        assert!(s.ln_abs(3000).is_finite());
        let (ls, ld) = (s.ln_abs(3000), d.ln_abs(3000));
        assert!((ls - ld).abs() <= 1e-8 * ls.abs().max(1.0), "{ls} vs {ld}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn phase_covariance(seed in any::<u64>(), alpha in -10.0f64..10.0) {
            let x = gaussian(seed, 256);
            let a = secular_coeffs(&x, 256, 1).unwrap();
            let b = secular_coeffs(&rotate_inputs(&x, alpha), 256, 1).unwrap();
            for n in 0..=256 {
                let want = a.get(n).to_complex() * Complex64::from_polar(1.0, n as f64 * alpha);
                let got = b.get(n).to_complex();
                prop_assert!((got - want).norm() <= 1e-9 * want.norm().max(1e-300), "n={}", n);
            }
        }

        #[test]
        fn paths_agree(seed in any::<u64>(), which in 0usize..3) {
            let dist = [DistSpec::ComplexGaussian, DistSpec::Exponential { gamma: 1.0 }, DistSpec::StretchedExponential { p: 0.5 }][which];
            let x = InputSequence::generate(dist, seed, 0, 256);
            let a = secular_coeffs(&x, 256, 1).unwrap();
            let b = secular_coeffs_dc(&x, 256, 1).unwrap();
            for n in [1, 17, 64, 65, 128, 200, 256] {
                let (la, lb) = (a.ln_abs(n), b.ln_abs(n));
                prop_assert!(la == lb || (la - lb).abs() <= 1e-8 * la.abs().max(1.0), "n={} {} {}", n, la, lb);
            }
        }
    }
}
