//! Input laws, exact absolute moments and reproducible random streams.
//!
//! Each input is `X_k = R_k e^{iτ_k}` with `τ_k` uniform on `[−π, π)` and the
//! modulus `R_k` drawn from one of three laws. Moduli are sampled by the exact
//! inverse of their tail function, so every sampler is a deterministic map of
//! a standard exponential variate `t = −log U`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::special::{lgamma, ln_gamma_interval};
use crate::numerics::{incomplete_gamma_upper, LogReal};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One SplitMix64 step applied to `x`.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    mix64(x.wrapping_add(GOLDEN))
}

/// Counter-based SplitMix64 stream for one replicate.
///
/// The initial state is `splitmix64(master_seed ^ (replicate_index · φ))`
/// with `φ = 0x9E3779B97F4A7C15`; each draw advances the counter by `φ` and
/// mixes it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream {
    state: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, replicate_index: u64) -> Self {
        Self {
            state: splitmix64(master_seed ^ replicate_index.wrapping_mul(GOLDEN)),
        }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// The input law of the moduli `R_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DistSpec {
    /// Standard complex Gaussian: `R² ~ Exp(1)`.
    #[serde(rename = "gaussian")]
    ComplexGaussian,
    /// Shifted exponential tail `P(R ≥ u) = exp(−γ(u − c_γ)) ∧ 1`.
    #[serde(rename = "exp")]
    Exponential { gamma: f64 },
    /// Stretched exponential tail `P(R ≥ u) = exp(−(u/c_p)^p)`, `p ∈ (0, 1)`.
    #[serde(rename = "se")]
    StretchedExponential { p: f64 },
}

impl DistSpec {
    pub fn exponential(gamma: f64) -> Result<Self> {
        let d = DistSpec::Exponential { gamma };
        d.validate()?;
        Ok(d)
    }

    pub fn stretched(p: f64) -> Result<Self> {
        let d = DistSpec::StretchedExponential { p };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DistSpec::ComplexGaussian => Ok(()),
            DistSpec::Exponential { gamma } => {
                if gamma > 0.0 && gamma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!("exponential law needs gamma > 0, got {gamma}")))
                }
            }
            DistSpec::StretchedExponential { p } => {
                if p > 0.0 && p < 1.0 {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!(
                        "stretched exponential law needs p in (0, 1), got {p}"
                    )))
                }
            }
        }
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match *self {
            DistSpec::ComplexGaussian => "gaussian".into(),
            DistSpec::Exponential { gamma } => format!("exp(gamma={gamma})"),
            DistSpec::StretchedExponential { p } => format!("se(p={p})"),
        }
    }

    /// `c_γ = log(γ²/2)/γ` for the exponential law.
    pub fn c_gamma(&self) -> Option<f64> {
        match *self {
            DistSpec::Exponential { gamma } => Some((gamma * gamma / 2.0).ln() / gamma),
            _ => None,
        }
    }

    /// `c_p = (2Γ(2/p)/p)^{−1/2}` for the stretched exponential law.
    pub fn c_p(&self) -> Option<f64> {
        match *self {
            DistSpec::StretchedExponential { p } => {
                let lg = lgamma(2.0 / p).expect("2/p > 0");
                Some((-0.5 * ((2.0f64 / p).ln() + lg)).exp())
            }
            _ => None,
        }
    }

    /// Supremum of `b` with `E[e^{b R}] < ∞`.
    pub fn exp_moment_abscissa(&self) -> f64 {
        match *self {
            DistSpec::ComplexGaussian => f64::INFINITY,
            DistSpec::Exponential { gamma } => gamma,
            DistSpec::StretchedExponential { .. } => 0.0,
        }
    }

    /// Modulus as a function of a standard exponential variate `t = −log U`.
    #[inline]
    pub fn modulus_from_exp_variate(&self, t: f64) -> f64 {
        match *self {
            DistSpec::ComplexGaussian => t.sqrt(),
            DistSpec::Exponential { gamma } => {
                let c = self.c_gamma().unwrap_or(0.0);
                (c + t / gamma).max(0.0)
            }
            DistSpec::StretchedExponential { p } => self.c_p().unwrap_or(1.0) * t.powf(1.0 / p),
        }
    }

    /// Inverse-tail map of a uniform `u ∈ (0, 1]`.
    pub fn modulus_from_uniform(&self, u: f64) -> f64 {
        self.modulus_from_exp_variate(-u.ln())
    }

    /// Exponential variate below which the modulus is zero (the atom at 0).
    pub fn atom_threshold(&self) -> f64 {
        match self.c_gamma() {
            Some(c) if c < 0.0 => {
                let gamma = match *self {
                    DistSpec::Exponential { gamma } => gamma,
                    _ => unreachable!(),
                };
                -gamma * c
            }
            _ => 0.0,
        }
    }

    /// `P(R ≥ u)`.
    pub fn tail(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 1.0;
        }
        match *self {
            DistSpec::ComplexGaussian => (-u * u).exp(),
            DistSpec::Exponential { gamma } => (-gamma * (u - self.c_gamma().unwrap())).exp().min(1.0),
            DistSpec::StretchedExponential { p } => (-(u / self.c_p().unwrap()).powf(p)).exp(),
        }
    }

    pub fn sample_modulus(&self, rng: &mut RngStream) -> f64 {
        self.modulus_from_uniform(rng.next_open01())
    }

    /// One input as `(modulus, phase)`; the modulus is drawn first.
    pub fn sample_input(&self, rng: &mut RngStream) -> (f64, f64) {
        let r = self.sample_modulus(rng);
        let mut phase = -PI + 2.0 * PI * rng.next_unit();
        if phase >= PI {
            phase -= 2.0 * PI;
        }
        (r, phase)
    }

    /// Exact `E[R^s]`, `s ≥ 0`.
    pub fn abs_moment(&self, s: f64) -> Result<LogReal> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("absolute moment order must be >= 0, got {s}")));
        }
        if s == 0.0 {
            return Ok(LogReal::ONE);
        }
        match *self {
            DistSpec::ComplexGaussian => Ok(LogReal::from_ln(lgamma(s / 2.0 + 1.0)?)),
            DistSpec::StretchedExponential { p } => {
                let cp = self.c_p().unwrap();
                Ok(LogReal::from_ln(s * cp.ln() + lgamma(s / p + 1.0)?))
            }
            DistSpec::Exponential { gamma } => {
                let c = self.c_gamma().unwrap();
                let ln_half_g2 = (gamma * gamma / 2.0).ln();
                if c <= 0.0 {
                    Ok(LogReal::from_ln(ln_half_g2 + lgamma(s + 1.0)? - s * gamma.ln()))
                } else {
                    let head = LogReal::from_ln(s * c.ln());
                    let ig = incomplete_gamma_upper(s, gamma * c)?;
                    let tail = LogReal::from_ln(s.ln() + ln_half_g2 - s * gamma.ln() + ig.ln_abs());
                    Ok(head.add(tail))
                }
            }
        }
    }

    /// Exact `E[R^s 1{lo ≤ R < hi}]` from incomplete-gamma differences.
    pub fn binned_abs_moment(&self, s: f64, lo: f64, hi: f64) -> Result<LogReal> {
        if !(s >= 0.0) || !(lo >= 0.0) || !(hi >= lo) {
            return Err(Error::Domain(format!("binned moment s={s} on [{lo}, {hi})")));
        }
        if hi == lo {
            return Ok(LogReal::ZERO);
        }
        let sq = |x: f64| if x.is_finite() { x * x } else { f64::INFINITY };
        let l = match *self {
            DistSpec::ComplexGaussian => ln_gamma_interval(s / 2.0 + 1.0, sq(lo), sq(hi))?,
            DistSpec::StretchedExponential { p } => {
                let cp = self.c_p().unwrap();
                let map = |x: f64| if x.is_finite() { (x / cp).powf(p) } else { f64::INFINITY };
                s * cp.ln() + ln_gamma_interval(s / p + 1.0, map(lo), map(hi))?
            }
            DistSpec::Exponential { gamma } => {
                let c = self.c_gamma().unwrap();
                let a = lo.max(c.max(0.0));
                let cont = if hi > a {
                    (gamma * c) - s * gamma.ln() + ln_gamma_interval(s + 1.0, gamma * a, gamma * hi)?
                } else {
                    f64::NEG_INFINITY
                };
                let atom = if c < 0.0 && lo == 0.0 && s == 0.0 {
                    (1.0 - gamma * gamma / 2.0).ln()
                } else {
                    f64::NEG_INFINITY
                };
                crate::numerics::log_add_exp(cont, atom)
            }
        };
        Ok(LogReal::from_ln(l))
    }

    /// `E[R²]`, which equals 1 for every law except the exponential law with
    /// `γ > √2`, where the fixed shift `c_γ` gives `c_γ² + c_γ + 1/2`.
    pub fn variance_report(&self) -> f64 {
        self.abs_moment(2.0).map(|m| m.to_f64()).unwrap_or(f64::NAN)
    }
}

/// Sampled moduli and phases for `k = 1..=len`, together with their provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct InputSequence {
    moduli: Vec<f64>,
    phases: Vec<f64>,
    dist: DistSpec,
    master_seed: u64,
    replicate_index: u64,
}

impl InputSequence {
    /// Draws `len` inputs from the stream of `(master_seed, replicate_index)`.
    pub fn generate(dist: DistSpec, master_seed: u64, replicate_index: u64, len: usize) -> Self {
        let mut rng = RngStream::new(master_seed, replicate_index);
        let mut moduli = Vec::with_capacity(len);
        let mut phases = Vec::with_capacity(len);
        for _ in 0..len {
            let (r, t) = dist.sample_input(&mut rng);
            moduli.push(r);
            phases.push(t);
        }
        Self {
            moduli,
            phases,
            dist,
            master_seed,
            replicate_index,
        }
    }

    /// Builds a sequence from explicit values; phases are wrapped into `[−π, π)`.
    pub fn from_parts(dist: DistSpec, moduli: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if moduli.len() != phases.len() {
            return Err(Error::Parameter(format!(
                "{} moduli but {} phases",
                moduli.len(),
                phases.len()
            )));
        }
        if moduli.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::Parameter("moduli must be finite and non-negative".into()));
        }
        Ok(Self {
            moduli,
            phases: phases.into_iter().map(wrap_phase).collect(),
            dist,
            master_seed: 0,
            replicate_index: 0,
        })
    }

    /// Builds a sequence from complex inputs `X_1, X_2, ...`.
    pub fn from_complex(dist: DistSpec, xs: &[Complex64]) -> Result<Self> {
        let (m, p) = xs.iter().map(|x| (x.norm(), x.arg())).unzip();
        Self::from_parts(dist, m, p)
    }

    pub fn len(&self) -> usize {
        self.moduli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moduli.is_empty()
    }

    pub fn moduli(&self) -> &[f64] {
        &self.moduli
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn dist(&self) -> DistSpec {
        self.dist
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn replicate_index(&self) -> u64 {
        self.replicate_index
    }

    /// `X_k` for `k ≥ 1`.
    #[inline]
    pub fn x(&self, k: usize) -> Complex64 {
        Complex64::from_polar(self.moduli[k - 1], self.phases[k - 1])
    }

    /// Same provenance with replaced phases (wrapped into `[−π, π)`).
    pub(crate) fn with_phases(&self, phases: impl IntoIterator<Item = f64>) -> Self {
        let mut out = self.clone();
        out.phases = phases.into_iter().map(wrap_phase).collect();
        debug_assert_eq!(out.phases.len(), out.moduli.len());
        out
    }

    /// Copy with the moduli of `X_1..X_{m−1}` set to zero.
    pub fn with_zeroed_prefix(&self, m: usize) -> Self {
        let mut out = self.clone();
        for r in out.moduli.iter_mut().take(m.saturating_sub(1)) {
            *r = 0.0;
        }
        out
    }

}

/// Wraps an angle into `[−π, π)`.
pub fn wrap_phase(t: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = (t + PI).rem_euclid(two_pi) - PI;
    if w >= PI {
        w -= two_pi;
    }
    if w < -PI {
        w = -PI;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::composite_gauss_legendre;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// `E[R^s] = ∫ s u^{s−1} P(R > u) du`, integrated in pieces.
    fn moment_by_tail_quadrature(d: &DistSpec, s: f64) -> f64 {
        let f = |u: f64| if u == 0.0 { 0.0 } else { s * u.powf(s - 1.0) * d.tail(u) };
        let mut edges: Vec<f64> = std::iter::once(0.0).chain((0..40).rev().map(|i| 0.5 * 0.6f64.powi(i + 1))).collect();
        edges.extend_from_slice(&[0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0, 2048.0]);
        if let Some(c) = d.c_gamma() {
            if c > 0.0 {
                edges.push(c);
                edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
            }
        }
        edges
            .windows(2)
            .map(|w| {
                let (x, wt) = composite_gauss_legendre(w[0], w[1], 64, 16);
                x.iter().zip(&wt).map(|(x, w)| w * f(*x)).sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn stream_derivation_is_bit_exact() {
        let s = RngStream::new(42, 3);
        assert_eq!(s.state(), splitmix64(42 ^ 3u64.wrapping_mul(GOLDEN)));
        // reference SplitMix64 output for seed 0: first value 0xE220A8397B1DCDAF
        let mut z = RngStream { state: 0 };
        assert_eq!(z.next_u64(), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn constants() {
        let d = DistSpec::exponential(2.0).unwrap();
        assert!((d.c_gamma().unwrap() - 2f64.ln() / 2.0).abs() < 1e-15);
        let se = DistSpec::stretched(0.5).unwrap();
        // Γ(4) = 6, c_p = (2·6/0.5)^{-1/2} = 24^{-1/2}
        assert!(rel(se.c_p().unwrap(), 24f64.powf(-0.5)) < 1e-14);
        assert!(DistSpec::stretched(1.0).is_err());
        assert!(DistSpec::exponential(0.0).is_err());
    }

    #[test]
    fn modulus_examples() {
        let d2 = DistSpec::exponential(2.0).unwrap();
        assert!((d2.modulus_from_uniform(1.0) - 0.346_573_590_279_972_64).abs() < 1e-12);
        let d1 = DistSpec::exponential(1.0).unwrap();
        assert!(d1.modulus_from_uniform(0.5).abs() < 1e-15);
        assert_eq!(d1.modulus_from_uniform(0.7), 0.0);
        let se = DistSpec::stretched(0.37).unwrap();
        assert!(rel(se.modulus_from_uniform((-1f64).exp()), se.c_p().unwrap()) < 1e-14);
    }

    #[test]
    fn phases_in_range_and_deterministic() {
        let d = DistSpec::ComplexGaussian;
        let a = InputSequence::generate(d, 9, 4, 1000);
        let b = InputSequence::generate(d, 9, 4, 1000);
        assert_eq!(a, b);
        assert!(a.phases().iter().all(|t| (-PI..PI).contains(t)));
        let c = InputSequence::generate(d, 9, 5, 1000);
        assert_ne!(a.moduli(), c.moduli());
    }

    #[test]
    fn zero_moment_is_one() {
        for d in [DistSpec::ComplexGaussian, DistSpec::Exponential { gamma: 1.0 }, DistSpec::Exponential { gamma: 3.0 }, DistSpec::StretchedExponential { p: 0.4 }] {
            assert_eq!(d.abs_moment(0.0).unwrap(), LogReal::ONE);
            let full = d.binned_abs_moment(0.0, 0.0, f64::INFINITY).unwrap();
            assert!(full.ln_abs().abs() < 1e-13, "{d:?}");
        }
        assert!(DistSpec::ComplexGaussian.abs_moment(-1.0).is_err());
    }

    #[test]
    fn moment_examples() {
        let se = DistSpec::stretched(0.3).unwrap();
        assert!(rel(se.abs_moment(2.0).unwrap().to_f64(), 1.0) < 1e-12);
        let e1 = DistSpec::exponential(1.0).unwrap();
        assert!(rel(e1.abs_moment(4.0).unwrap().to_f64(), 12.0) < 1e-12);
        assert!(rel(DistSpec::ComplexGaussian.variance_report(), 1.0) < 1e-14);
        assert!(rel(e1.variance_report(), 1.0) < 1e-14);
        let e2 = DistSpec::exponential(2.0).unwrap();
        let c = e2.c_gamma().unwrap();
        assert!(rel(e2.variance_report(), c * c + c + 0.5) < 1e-12);
        assert!((e2.variance_report() - 0.9667).abs() < 1e-4);
    }

    #[test]
    fn moments_match_tail_quadrature() {
        let dists = [
            DistSpec::ComplexGaussian,
            DistSpec::Exponential { gamma: 1.0 },
            DistSpec::Exponential { gamma: 2.0 },
            DistSpec::Exponential { gamma: 3.0 },
            DistSpec::StretchedExponential { p: 0.5 },
        ];
        for d in dists {
            for s in [1.0, 2.0, 3.0, 7.2] {
                let exact = d.abs_moment(s).unwrap().to_f64();
                let quad = moment_by_tail_quadrature(&d, s);
                assert!(rel(quad, exact) < 1e-8, "{d:?} s={s}: {quad} vs {exact}");
            }
        }
    }

    #[test]
    fn bins_partition_the_moment() {
        let dists = [
            DistSpec::ComplexGaussian,
            DistSpec::Exponential { gamma: 1.0 },
            DistSpec::Exponential { gamma: 2.0 },
            DistSpec::StretchedExponential { p: 0.5 },
        ];
        for d in dists {
            for s in [0.0, 2.0, 40.0] {
                let mut acc = LogReal::ZERO;
                let mut lo = 0.0;
                for m in 1..400 {
                    let hi = m as f64 * 0.25;
                    acc = acc.add(d.binned_abs_moment(s, lo, hi).unwrap());
                    lo = hi;
                }
                acc = acc.add(d.binned_abs_moment(s, lo, f64::INFINITY).unwrap());
                let want = d.abs_moment(s).unwrap();
                assert!((acc.ln_abs() - want.ln_abs()).abs() < 1e-10, "{d:?} s={s}");
            }
        }
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(PI), -PI);
        assert!((wrap_phase(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!((wrap_phase(-0.2) + 0.2).abs() < 1e-15);
    }
}
