//! Truncated chaos `F_{K,M*}(z) = exp(Σ_{k=M*}^{K} X_k z^k / √k)` on circles
//! `|z| = r`: field values on a uniform grid, total, partial and
//! kernel-weighted mass, Laplace functionals, tilted means and the barrier
//! event for centered partial sums.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dist::{DistSpec, InputSequence};
use crate::error::{Error, Result};
use crate::numerics::fft::{eval_on_grid, fft_forward, grid_angle};
use crate::numerics::quad::composite_gauss_legendre;
use crate::numerics::special::{bessel_i0_minus_one, bessel_i1};
use crate::numerics::{fft_eval_trig_poly, ln_factorial, ExtComplex, LogReal, LseAccumulator};

/// Default half-width `C₅` of the admissible radius band `[e^{−C₅/K}, e^{C₅/K}]`.
pub const DEFAULT_RADIUS_BAND: f64 = 4.0;

/// Rejects radii outside `[e^{−c5/K}, e^{c5/K}]`.
pub fn check_radius(r: f64, k: usize, c5: f64) -> Result<()> {
    let slack = 1e-12;
    let lo = (-c5 / k as f64).exp() * (1.0 - slack);
    let hi = (c5 / k as f64).exp() * (1.0 + slack);
    if r >= lo && r <= hi {
        Ok(())
    } else {
        Err(Error::Parameter(format!("radius {r} outside [e^(-{c5}/{k}), e^({c5}/{k})]")))
    }
}

/// `log|F_{K,M*}(r e^{iθ_j})|²` on `θ_j = 2πj/T − π`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosField {
    log_sq_mag: Vec<f64>,
    k: usize,
    m_star: usize,
    r: f64,
}

impl ChaosField {
    pub fn log_sq_mag(&self) -> &[f64] {
        &self.log_sq_mag
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m_star(&self) -> usize {
        self.m_star
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn grid_size(&self) -> usize {
        self.log_sq_mag.len()
    }

    pub fn theta(&self, j: usize) -> f64 {
        grid_angle(j, self.grid_size())
    }
}

/// Evaluates `2 Σ_{k=M*}^{K} (r^k/√k) R_k cos(τ_k + kθ)` with one FFT.
pub fn evaluate_field(inputs: &InputSequence, k: usize, m_star: usize, r: f64, t: usize) -> Result<ChaosField> {
    if inputs.len() < k {
        return Err(Error::Length {
            have: inputs.len(),
            need: k,
        });
    }
    if !(r > 0.0) || m_star == 0 {
        return Err(Error::Parameter(format!("need r > 0 and m_star >= 1, got r={r}, m_star={m_star}")));
    }
    let mut c = vec![Complex64::new(0.0, 0.0); k + 1];
    for (idx, slot) in c.iter_mut().enumerate().skip(m_star) {
        let rk = inputs.moduli()[idx - 1];
        if rk != 0.0 {
            *slot = Complex64::from_polar(rk / (idx as f64).sqrt(), inputs.phases()[idx - 1]);
        }
    }
    let log_sq_mag = fft_eval_trig_poly(&c, r, t)?;
    Ok(ChaosField {
        log_sq_mag,
        k,
        m_star,
        r,
    })
}

/// `(1/2π) ∫ |F|² dθ` by the periodic trapezoid rule.
pub fn total_mass(field: &ChaosField) -> LogReal {
    let acc: LseAccumulator = field.log_sq_mag.iter().copied().collect();
    LogReal::from_ln(acc.finalize() - (field.grid_size() as f64).ln())
}

/// `(1/2π) ∫_{lo}^{hi} |F|² dθ`.
///
/// The grid values are expanded in their trigonometric interpolant (one FFT)
/// and the interpolant is integrated exactly over the arc, so arcs need not
/// end on grid points. The arc must still contain at least one grid point.
pub fn partial_mass(field: &ChaosField, lo: f64, hi: f64) -> Result<LogReal> {
    if !(lo >= -PI && hi <= PI && lo <= hi) {
        return Err(Error::Domain(format!("arc [{lo}, {hi}] not inside [-pi, pi]")));
    }
    let t = field.grid_size();
    let any_point = (0..t).map(|j| field.theta(j)).any(|th| th >= lo && th <= hi);
    if !any_point {
        return Err(Error::EmptyArc(format!("no grid point of {t} in [{lo}, {hi}]")));
    }
    let fmax = field.log_sq_mag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut buf: Vec<Complex64> = field.log_sq_mag.iter().map(|f| Complex64::new((f - fmax).exp(), 0.0)).collect();
    fft_forward(&mut buf);
    let inv_t = 1.0 / t as f64;
    // d_n = (1/T) Σ_j v_j e^{−inθ_j} = (−1)^n · FFT[n] / T
    let coef = |n: usize| {
        let c = buf[n % t] * inv_t;
        if n % 2 == 1 {
            -c
        } else {
            c
        }
    };
    let mut sum = coef(0).re * (hi - lo);
    let half = t / 2;
    for n in 1..half {
        let nf = n as f64;
        let d = coef(n);
        // ∫ (d e^{inθ} + conj(d) e^{−inθ}) dθ
        let e = (Complex64::from_polar(1.0, nf * hi) - Complex64::from_polar(1.0, nf * lo)) / Complex64::new(0.0, nf);
        sum += 2.0 * (d * e).re;
    }
    if t >= 2 {
        let m = half as f64;
        sum += coef(half).re * ((m * hi).sin() - (m * lo).sin()) / m;
    }
    let value = sum / (2.0 * PI);
    if value <= 0.0 {
        return Ok(LogReal::ZERO);
    }
    Ok(LogReal::from_ln(value.ln() + fmax))
}

/// The kernel `S(τ) = Σ_{|j−m| ≤ w} e^{ijτ} x1^{j−m} (m!/j!) r^j`.
#[derive(Clone, Debug)]
pub struct Kernel {
    m: usize,
    first: usize,
    half_width: usize,
    /// `coef_j / scale` for `j = first..`
    weights: Vec<f64>,
    ln_scale: f64,
}

impl Kernel {
    /// Kernel with the standard half-width `⌊N^{9/10}⌋`, checking
    /// `m ∈ [N/6, N/3]`, `x1 ∈ [m, m+1)` and `r` in the default band.
    pub fn new(m: usize, x1: f64, r: f64, n: usize) -> Result<Self> {
        if 6 * m < n || 3 * m > n {
            return Err(Error::Domain(format!("kernel index m = {m} outside [N/6, N/3] for N = {n}")));
        }
        if !(x1 >= m as f64 && x1 < m as f64 + 1.0) {
            return Err(Error::Domain(format!("x1 = {x1} outside [{m}, {})", m + 1)));
        }
        check_radius(r, n, DEFAULT_RADIUS_BAND).map_err(|e| Error::Domain(e.to_string()))?;
        Self::with_half_width(m, x1, r, (n as f64).powf(0.9).floor() as usize)
    }

    /// Kernel with an explicit half-width; `0` keeps only `j = m`.
    pub fn with_half_width(m: usize, x1: f64, r: f64, half_width: usize) -> Result<Self> {
        if !(x1 > 0.0) || !(r > 0.0) {
            return Err(Error::Domain(format!("kernel needs x1 > 0 and r > 0, got {x1}, {r}")));
        }
        let first = m.saturating_sub(half_width);
        let last = m + half_width;
        let lm = ln_factorial(m as u64);
        let (lx, lr) = (x1.ln(), r.ln());
        let logs: Vec<f64> = (first..=last)
            .map(|j| (j as f64 - m as f64) * lx + lm - ln_factorial(j as u64) + j as f64 * lr)
            .collect();
        let ln_scale = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights = logs.iter().map(|l| (l - ln_scale).exp()).collect();
        Ok(Self {
            m,
            first,
            half_width,
            weights,
            ln_scale,
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// `S(τ)`, summed with `j` ascending.
    pub fn eval(&self, tau: f64) -> ExtComplex {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, w) in self.weights.iter().enumerate() {
            let j = (self.first + i) as f64 - self.m as f64;
            acc += Complex64::from_polar(*w, j * tau);
        }
        let z = acc * Complex64::from_polar(1.0, self.m as f64 * tau);
        if z.norm() == 0.0 {
            return ExtComplex::ZERO;
        }
        ExtComplex::from_polar_log(z.norm().ln() + self.ln_scale, z.arg())
    }

    /// `Σ_j |coef_j|²`, the mean of `|S|²` over the circle.
    pub fn mean_square(&self) -> LogReal {
        let acc: LseAccumulator = self.weights.iter().map(|w| 2.0 * w.ln()).collect();
        LogReal::from_ln(acc.finalize() + 2.0 * self.ln_scale)
    }

    /// `log|S(θ_j + τ_1)|²` on a grid of size `t`.
    fn log_sq_on_grid(&self, tau1: f64, t: usize) -> Vec<f64> {
        let vals = eval_on_grid(
            self.weights
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    let j = self.first + i;
                    (j, Complex64::from_polar(*w, j as f64 * tau1))
                }),
            t,
        );
        vals.iter().map(|v| v.norm_sqr().ln() + 2.0 * self.ln_scale).collect()
    }
}

/// `S(τ)` for the standard kernel at `(m, x1, r, N)`.
pub fn weighted_kernel(m: usize, x1: f64, tau: f64, r: f64, n: usize) -> Result<ExtComplex> {
    Ok(Kernel::new(m, x1, r, n)?.eval(tau))
}

/// `(1/2π) ∫ |F(re^{iθ})|² |S(θ + τ_1)|² dθ` on the field's grid.
pub fn weighted_mass(field: &ChaosField, kernel: &Kernel, tau1: f64) -> Result<LogReal> {
    let t = field.grid_size();
    let need = 2 * (2 * kernel.half_width() + 1);
    if t < need {
        return Err(Error::Size(format!("grid of {t} points cannot resolve a kernel of half-width {}", kernel.half_width())));
    }
    let ks = kernel.log_sq_on_grid(tau1, t);
    let acc: LseAccumulator = field.log_sq_mag.iter().zip(&ks).map(|(f, s)| f + s).collect();
    Ok(LogReal::from_ln(acc.finalize() - (t as f64).ln()))
}

/// `E[f(R)]` for `f(0) = 0`, by Gauss–Legendre in the exponential variate
/// `t = −log U`, on which the modulus is an explicit function.
fn modulus_expectation<F: Fn(f64) -> f64>(dist: &DistSpec, slope: f64, panels: usize, f: F) -> f64 {
    let t0 = dist.atom_threshold();
    // integrand ≲ exp(slope·x(t) − t); cut where that is e^{−46} below the peak
    let t_max = match *dist {
        DistSpec::ComplexGaussian => {
            let s = 0.5 * (slope + (slope * slope + 4.0 * 46.0).sqrt());
            (s * s).max(50.0)
        }
        DistSpec::Exponential { gamma } => {
            let c = dist.c_gamma().unwrap_or(0.0);
            t0 + (50.0 + (slope * c).abs()) / (1.0 - slope / gamma).max(1e-12)
        }
        DistSpec::StretchedExponential { .. } => 400.0,
    };
    let (x, w) = composite_gauss_legendre(t0, t_max, panels, 16);
    x.iter()
        .zip(&w)
        .map(|(t, wt)| wt * (-t).exp() * f(dist.modulus_from_exp_variate(*t)))
        .sum()
}

fn laplace_argument(dist: &DistSpec, beta: f64, k: usize, r: f64) -> Result<f64> {
    if k == 0 || !(r > 0.0) || !(beta >= 0.0) {
        return Err(Error::Parameter(format!("Laplace functional needs k >= 1, r > 0, beta >= 0 (k={k}, r={r}, beta={beta})")));
    }
    let b = 2.0 * beta * (k as f64 * r.ln()).exp() / (k as f64).sqrt();
    if b > 0.0 && b >= dist.exp_moment_abscissa() {
        return Err(Error::Divergence(format!(
            "E[exp({b} R)] is infinite for {} (abscissa {})",
            dist.label(),
            dist.exp_moment_abscissa()
        )));
    }
    Ok(b)
}

const LAPLACE_PANELS: usize = 48;

/// `L(β, k, r) − 1` where `L = E[exp(2β (r^k/√k) R cos τ)] = E[I_0(2β (r^k/√k) R)]`.
pub fn laplace_functional_minus_one(dist: &DistSpec, beta: f64, k: usize, r: f64) -> Result<f64> {
    let b = laplace_argument(dist, beta, k, r)?;
    if b == 0.0 {
        return Ok(0.0);
    }
    if let DistSpec::ComplexGaussian = dist {
        // E[I_0(b√E)] = e^{b²/4}
        return Ok((0.25 * b * b).exp_m1());
    }
    Ok(modulus_expectation(dist, b, LAPLACE_PANELS, |x| bessel_i0_minus_one(b * x)))
}

/// `L(β, k, r) = E[exp(2β (r^k/√k) R cos τ)]`.
///
/// The phase average is done in closed form (`I_0`); the modulus average by
/// quadrature against the law.
pub fn laplace_functional(dist: &DistSpec, beta: f64, k: usize, r: f64) -> Result<f64> {
    Ok(1.0 + laplace_functional_minus_one(dist, beta, k, r)?)
}

/// `μ_k = E[a R cos τ e^{2aR cos τ}] / E[e^{2aR cos τ}]` with `a = r^k/√k`,
/// i.e. `a E[R I_1(2aR)] / E[I_0(2aR)]`.
pub fn tilted_mean(dist: &DistSpec, k: usize, r: f64) -> Result<f64> {
    let b = laplace_argument(dist, 1.0, k, r)?;
    let a = 0.5 * b;
    if let DistSpec::ComplexGaussian = dist {
        return Ok(a * a);
    }
    let num = modulus_expectation(dist, b, LAPLACE_PANELS, |x| x * bessel_i1(b * x));
    let den = 1.0 + modulus_expectation(dist, b, LAPLACE_PANELS, |x| bessel_i0_minus_one(b * x));
    Ok(a * num / den)
}

/// `Σ_{k=M*}^{K} log L(1, k, r)`, the log of `E|F_{K,M*}(re^{iθ})|²`.
pub fn log_laplace_product(dist: &DistSpec, m_star: usize, k_max: usize, r: f64) -> Result<f64> {
    (m_star.max(1)..=k_max)
        .map(|k| laplace_functional_minus_one(dist, 1.0, k, r).map(f64::ln_1p))
        .sum()
}

/// How the barrier increments are centered.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MuMode {
    /// `μ_k` from its defining ratio ([`tilted_mean`]).
    TiltedExact,
    /// `μ_k ≈ r^{2k}/k`.
    LeadingTerm,
}

fn centering(dist: &DistSpec, k: usize, r: f64, mode: MuMode) -> Result<f64> {
    match mode {
        MuMode::TiltedExact => tilted_mean(dist, k, r),
        MuMode::LeadingTerm => Ok((2.0 * k as f64 * r.ln()).exp() / k as f64),
    }
}

/// First index of batch `m`: `⌈e^{m−1}⌉`, so batch `m` is `⌈e^{m−1}⌉..⌈e^m⌉`.
pub fn batch_start(m: usize) -> usize {
    if m == 0 {
        0
    } else {
        ((m - 1) as f64).exp().ceil() as usize
    }
}

/// Centered batch sums `Y_m` at one angle.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementSeries {
    /// `y[m−1]` is batch `m`.
    pub y: Vec<f64>,
    pub theta: f64,
    pub mu_mode: MuMode,
}

impl IncrementSeries {
    /// `Σ_{M* ≤ k < ⌈e^n⌉}`, the barrier partial sum at level `n`.
    pub fn partial_sum(&self, n: usize) -> f64 {
        self.y.iter().take(n).sum()
    }
}

/// `Y_m = Σ_{k in batch m, M* ≤ k ≤ K} ((r^k/√k) R_k cos(τ_k + kθ) − μ_k)`.
pub fn increment_series(
    inputs: &InputSequence,
    k_max: usize,
    m_star: usize,
    r: f64,
    theta: f64,
    mu_mode: MuMode,
) -> Result<IncrementSeries> {
    if inputs.len() < k_max {
        return Err(Error::Length {
            have: inputs.len(),
            need: k_max,
        });
    }
    let mut y = Vec::new();
    let mut m = 1;
    while batch_start(m) <= k_max {
        let lo = batch_start(m).max(m_star);
        let hi = (batch_start(m + 1) - 1).min(k_max);
        let mut s = 0.0;
        for k in lo..=hi {
            let a = (k as f64 * r.ln()).exp() / (k as f64).sqrt();
            s += a * inputs.moduli()[k - 1] * (inputs.phases()[k - 1] + k as f64 * theta).cos();
            s -= centering(&inputs.dist(), k, r, mu_mode)?;
        }
        y.push(s);
        m += 1;
    }
    Ok(IncrementSeries { y, theta, mu_mode })
}

/// Parameters of the barrier event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarrierSetup {
    pub k: usize,
    pub r: f64,
    pub l1: f64,
    pub m_star: usize,
    /// Angles in the grid approximating "for all θ"; `None` gives `⌈K log K⌉`.
    /// Rounded up to a power of two at least `2(K+1)`.
    pub theta_grid: Option<usize>,
    pub mu_mode: MuMode,
}

impl BarrierSetup {
    pub fn grid_size(&self) -> usize {
        let want = self
            .theta_grid
            .unwrap_or_else(|| (self.k as f64 * (self.k as f64).ln()).ceil() as usize);
        want.max(2 * (self.k + 1)).next_power_of_two()
    }

    /// Integer levels `n` with `log M* ≤ n ≤ log K`, starting no lower than 1.
    pub fn levels(&self) -> Vec<usize> {
        let lo = ((self.m_star as f64).ln().ceil() as usize).max(1);
        let hi = (self.k as f64).ln().floor() as usize;
        (lo..=hi).collect()
    }
}

/// Barrier failure estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct BarrierResult {
    pub a: f64,
    pub k: usize,
    pub r: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub replicates: usize,
    pub l1: f64,
}

impl BarrierResult {
    /// `p̂(A)` from per-replicate critical levels.
    pub fn from_levels(levels: &[f64], a: f64, setup: &BarrierSetup) -> Self {
        let m = levels.len();
        let fails = levels.iter().filter(|c| **c > a).count();
        let p = fails as f64 / m as f64;
        Self {
            a,
            k: setup.k,
            r: setup.r,
            p_hat: p,
            stderr: (p * (1.0 - p) / m as f64).sqrt(),
            replicates: m,
            l1: setup.l1,
        }
    }
}

/// For each replicate, the smallest `A` for which the barrier event holds:
/// `max_{n, θ} max(S_n(θ) − 10 log n, −S_n(θ) − L₁ n)`, where
/// `S_n(θ) = Σ_{M* ≤ k < e^n} (Re(X_k r^k e^{ikθ}/√k) − μ_k)`.
/// The event with parameter `A` fails exactly when this exceeds `A`.
pub fn barrier_critical_levels(dist: &DistSpec, setup: &BarrierSetup, seed: u64, replicates: usize) -> Result<Vec<f64>> {
    let levels = setup.levels();
    let t = setup.grid_size();
    let r = setup.r;
    // upper index (inclusive) of each level's sum
    let tops: Vec<usize> = levels.iter().map(|&n| (batch_start(n + 1) - 1).min(setup.k)).collect();
    let k_top = *tops.last().unwrap_or(&0);
    let mut mu_cum = Vec::with_capacity(levels.len());
    let mut acc = 0.0;
    let mut k = setup.m_star;
    for &top in &tops {
        while k <= top {
            acc += centering(dist, k, r, setup.mu_mode)?;
            k += 1;
        }
        mu_cum.push(acc);
    }
    let run = |i: usize| -> f64 {
        let x = InputSequence::generate(*dist, seed, i as u64, k_top.max(1));
        let mut partial = vec![0.0f64; t];
        let mut crit = f64::NEG_INFINITY;
        let mut from = setup.m_star;
        for (idx, &n) in levels.iter().enumerate() {
            let to = tops[idx];
            if from <= to {
                let vals = eval_on_grid(
                    (from..=to).map(|k| {
                        let a = (k as f64 * r.ln()).exp() / (k as f64).sqrt();
                        (k, Complex64::from_polar(a * x.moduli()[k - 1], x.phases()[k - 1]))
                    }),
                    t,
                );
                for (p, v) in partial.iter_mut().zip(&vals) {
                    *p += v.re;
                }
                from = to + 1;
            }
            let up = 10.0 * (n as f64).ln();
            let down = setup.l1 * n as f64;
            for p in &partial {
                let s = p - mu_cum[idx];
                crit = crit.max(s - up).max(-s - down);
            }
        }
        crit
    };
    Ok((0..replicates).into_par_iter().map(run).collect())
}

/// Rejects `A` outside `[1, √log K]`.
pub fn check_barrier_level(a: f64, k: usize) -> Result<()> {
    let cap = (k as f64).ln().sqrt();
    if a >= 1.0 && a <= cap {
        Ok(())
    } else {
        Err(Error::Parameter(format!("barrier level A = {a} outside [1, sqrt(log K)] = [1, {cap:.4}]")))
    }
}

/// `P(𝒢_r(A; K)^c)` by Monte Carlo, requiring `1 ≤ A ≤ √log K`.
pub fn barrier_probability(dist: &DistSpec, a: f64, setup: &BarrierSetup, seed: u64, replicates: usize) -> Result<BarrierResult> {
    check_barrier_level(a, setup.k)?;
    if replicates == 0 {
        return Err(Error::Parameter("barrier estimate needs at least one replicate".into()));
    }
    let levels = barrier_critical_levels(dist, setup, seed, replicates)?;
    Ok(BarrierResult::from_levels(&levels, a, setup))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field_direct(x: &InputSequence, k: usize, m_star: usize, r: f64, theta: f64) -> f64 {
        (m_star..=k)
            .map(|j| 2.0 * r.powi(j as i32) / (j as f64).sqrt() * x.moduli()[j - 1] * (x.phases()[j - 1] + j as f64 * theta).cos())
            .sum()
    }

    #[test]
    fn field_matches_direct_sum() {
        let x = InputSequence::generate(DistSpec::ComplexGaussian, 8, 0, 128);
        let f = evaluate_field(&x, 128, 1, 1.0, 2048).unwrap();
        for j in (0..2048).step_by(37) {
            assert!((f.log_sq_mag()[j] - field_direct(&x, 128, 1, 1.0, f.theta(j))).abs() < 1e-9);
        }
        let z = InputSequence::from_parts(DistSpec::ComplexGaussian, vec![0.0; 64], vec![0.0; 64]).unwrap();
        let f = evaluate_field(&z, 64, 1, 1.0, 1024).unwrap();
        assert!(f.log_sq_mag().iter().all(|v| *v == 0.0));
        assert_eq!(total_mass(&f), LogReal::ONE);
        assert!(evaluate_field(&x, 128, 1, 1.0, 200).is_err());
    }

    #[test]
    fn single_mode_field() {
        let mut m = vec![0.0; 32];
        m[31] = 1.0;
        let x = InputSequence::from_parts(DistSpec::ComplexGaussian, m, vec![0.0; 32]).unwrap();
        let f = evaluate_field(&x, 32, 1, 1.0, 256).unwrap();
        for j in 0..256 {
            let want = 2.0 / 32f64.sqrt() * (32.0 * f.theta(j)).cos();
            assert!((f.log_sq_mag()[j] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn parseval_against_coefficients() {
        use crate::engine::secular_coeffs;
        let k = 32;
        let r = 0.9;
        let x = InputSequence::generate(DistSpec::ComplexGaussian, 21, 0, 800);
        let f = evaluate_field(&x, k, 1, r, 1024).unwrap();
        // series of exp(Σ_{k≤32} X_k z^k/√k): zero inputs beyond K
        let mut moduli = x.moduli().to_vec();
        for v in moduli.iter_mut().skip(k) {
            *v = 0.0;
        }
        let xs = InputSequence::from_parts(DistSpec::ComplexGaussian, moduli, x.phases().to_vec()).unwrap();
        let s = secular_coeffs(&xs, 800, 1).unwrap();
        let acc: LseAccumulator = (0..=800).map(|n| 2.0 * s.ln_abs(n) + 2.0 * n as f64 * r.ln()).collect();
        let coeff_side = acc.finalize();
        assert!((total_mass(&f).ln_abs() - coeff_side).abs() < 1e-7);
    }

    #[test]
    fn partial_mass_properties() {
        let x = InputSequence::generate(DistSpec::Exponential { gamma: 3.0 }, 3, 1, 256);
        let f = evaluate_field(&x, 256, 4, 1.0, 4096).unwrap();
        let total = total_mass(&f);
        let full = partial_mass(&f, -PI, PI).unwrap();
        assert!((full.ln_abs() - total.ln_abs()).abs() < 1e-12);
        let a = partial_mass(&f, -PI, 0.4321).unwrap();
        let b = partial_mass(&f, 0.4321, PI).unwrap();
        assert!((a.add(b).ln_abs() - total.ln_abs()).abs() < 1e-9);
        let fine = evaluate_field(&x, 256, 4, 1.0, 16384).unwrap();
        let a4 = partial_mass(&fine, -PI, 0.4321).unwrap();
        assert!(((a.to_f64() - a4.to_f64()) / a4.to_f64()).abs() < 1e-6);
        let z = InputSequence::from_parts(DistSpec::ComplexGaussian, vec![0.0; 8], vec![0.0; 8]).unwrap();
        let f0 = evaluate_field(&z, 8, 1, 1.0, 64).unwrap();
        let p = partial_mass(&f0, -0.5, 1.0).unwrap().to_f64();
        assert!((p - 1.5 / (2.0 * PI)).abs() < 1e-14);
        assert!(matches!(partial_mass(&f0, 0.01, 0.02), Err(Error::EmptyArc(_))));
        assert!(partial_mass(&f0, 1.0, 0.0).is_err());
    }

    #[test]
    fn kernel_basics() {
        let k = Kernel::new(2500, 2500.3, 1.0, 10_000).unwrap();
        let s0 = k.eval(0.0);
        let direct: f64 = {
            let acc: LseAccumulator = (2500 - 3981..=2500 + 3981)
                .filter(|j: &i64| *j >= 0)
                .map(|j| (j - 2500) as f64 * 2500.3f64.ln() + ln_factorial(2500) - ln_factorial(j as u64))
                .collect();
            acc.finalize()
        };
        assert!((s0.ln_abs() - direct).abs() < 1e-12);
        assert!(s0.arg().abs() < 1e-12);
        assert!(Kernel::new(1000, 1000.5, 1.0, 10_000).is_err());
        assert!(Kernel::new(2500, 2501.0, 1.0, 10_000).is_err());
        assert!(Kernel::new(2500, 2500.0, 1.01, 10_000).is_err());
        assert!(weighted_kernel(2500, 2500.0, 0.1, (-4e-4f64).exp(), 10_000).is_ok());
    }

    #[test]
    fn weighted_mass_oracles() {
        let z = InputSequence::from_parts(DistSpec::ComplexGaussian, vec![0.0; 64], vec![0.0; 64]).unwrap();
        let f0 = evaluate_field(&z, 64, 1, 1.0, 4096).unwrap();
        let ker = Kernel::with_half_width(300, 300.5, 0.999, 200).unwrap();
        let wm = weighted_mass(&f0, &ker, 0.3).unwrap();
        assert!((wm.ln_abs() - ker.mean_square().ln_abs()).abs() < 1e-12);

        let x = InputSequence::generate(DistSpec::ComplexGaussian, 2, 2, 128);
        let f = evaluate_field(&x, 128, 1, 1.0, 2048).unwrap();
        let single = Kernel::with_half_width(40, 40.2, 0.99, 0).unwrap();
        let got = weighted_mass(&f, &single, 1.1).unwrap().ln_abs();
        let want = 80.0 * 0.99f64.ln() + total_mass(&f).ln_abs();
        assert!((got - want).abs() < 1e-12);

        let ker = Kernel::with_half_width(300, 300.5, 1.0, 150).unwrap();
        let f2 = evaluate_field(&x, 128, 1, 1.0, 4096).unwrap();
        let a = weighted_mass(&f, &ker, 0.7).unwrap().ln_abs();
        let b = weighted_mass(&f2, &ker, 0.7).unwrap().ln_abs();
        assert!((a - b).abs() < 1e-7);
    }

    #[test]
    fn laplace_closed_forms() {
        let g = DistSpec::ComplexGaussian;
        assert_eq!(laplace_functional(&g, 0.0, 5, 1.0).unwrap(), 1.0);
        let l = laplace_functional(&g, 1.0, 4096, 1.0).unwrap();
        assert!((l - 1.0 - 1.0 / 4096.0).abs() <= 10.0 * 4096f64.powf(-1.5));
        assert!((tilted_mean(&g, 100, 1.0).unwrap() - 0.01).abs() < 1e-17);
        assert!(matches!(laplace_functional(&DistSpec::StretchedExponential { p: 0.5 }, 1.0, 64, 1.0), Err(Error::Divergence(_))));
        assert!(matches!(laplace_functional(&DistSpec::Exponential { gamma: 1.0 }, 1.0, 4, 1.0), Err(Error::Divergence(_))));
    }

    #[test]
    fn laplace_quadrature_matches_series() {
        // exponential law: E[I0(bR)] − 1 = Σ_j (b/2)^{2j} E[R^{2j}] / (j!)²
        for gamma in [1.0, 3.0] {
            let d = DistSpec::Exponential { gamma };
            for k in [16usize, 64, 400] {
                let b = 2.0 / (k as f64).sqrt();
                let series: f64 = (1..60)
                    .map(|j| ((2.0 * j as f64) * (0.5 * b).ln() + d.abs_moment(2.0 * j as f64).unwrap().ln_abs() - 2.0 * ln_factorial(j)).exp())
                    .sum();
                let q = laplace_functional_minus_one(&d, 1.0, k, 1.0).unwrap();
                assert!(((q - series) / series).abs() < 1e-10, "gamma={gamma} k={k}: {q} vs {series}");
                let coarse = modulus_expectation(&d, b, 24, |x| bessel_i0_minus_one(b * x));
                assert!(((q - coarse) / q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tilted_mean_exponential() {
        let d = DistSpec::Exponential { gamma: 1.0 };
        let k = 4096;
        let mu = tilted_mean(&d, k, 1.0).unwrap();
        assert!((k as f64 * mu - 1.0).abs() <= 5.0 / (k as f64).sqrt());
        assert!(tilted_mean(&d, 1_000_000_000, 1.0).unwrap().abs() < 1e-8);
    }

    #[test]
    fn gaussian_product_is_harmonic() {
        let l = log_laplace_product(&DistSpec::ComplexGaussian, 4, 1024, 1.0).unwrap();
        let h: f64 = (4..=1024).map(|k| 1.0 / k as f64).sum();
        assert!((l - h).abs() < 1e-12);
    }

    #[test]
    fn radius_band() {
        assert!(check_radius(1.0, 100, 4.0).is_ok());
        assert!(check_radius((4.0f64 / 100.0).exp(), 100, 4.0).is_ok());
        assert!(check_radius(1.05, 100, 4.0).is_err());
    }

    #[test]
    fn barrier_grid_matches_increments() {
        let setup = BarrierSetup {
            k: 400,
            r: 1.0,
            l1: 40.0,
            m_star: 4,
            theta_grid: Some(1024),
            mu_mode: MuMode::LeadingTerm,
        };
        let d = DistSpec::ComplexGaussian;
        let levels = barrier_critical_levels(&d, &setup, 5, 3).unwrap();
        for (i, crit) in levels.iter().enumerate() {
            let x = InputSequence::generate(d, 5, i as u64, 400);
            let t = setup.grid_size();
            let mut want = f64::NEG_INFINITY;
            for j in 0..t {
                let inc = increment_series(&x, 400, 4, 1.0, grid_angle(j, t), MuMode::LeadingTerm).unwrap();
                for n in setup.levels() {
                    let s = inc.partial_sum(n);
                    want = want.max(s - 10.0 * (n as f64).ln()).max(-s - 40.0 * n as f64);
                }
            }
            assert!((crit - want).abs() < 1e-9, "{crit} vs {want}");
        }
    }

    #[test]
    fn barrier_precondition() {
        let setup = BarrierSetup {
            k: 2981,
            r: 1.0,
            l1: 40.0,
            m_star: 16,
            theta_grid: None,
            mu_mode: MuMode::TiltedExact,
        };
        assert_eq!(setup.grid_size(), 32768);
        assert_eq!(setup.levels(), vec![3, 4, 5, 6, 7, 8]);
        assert!(matches!(barrier_probability(&DistSpec::ComplexGaussian, 3.0, &setup, 1, 10), Err(Error::Parameter(_))));
        let res = BarrierResult::from_levels(&[0.5, 2.0, 3.0, f64::NEG_INFINITY], 1.0, &setup);
        assert_eq!(res.p_hat, 0.5);
        assert!((res.stderr - 0.25).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn mass_converges_under_refinement(seed in any::<u64>()) {
            let x = InputSequence::generate(DistSpec::ComplexGaussian, seed, 0, 256);
            let a = evaluate_field(&x, 256, 4, 1.0, 4096).unwrap();
            let b = evaluate_field(&x, 256, 4, 1.0, 8192).unwrap();
            let (ta, tb) = (total_mass(&a).ln_abs(), total_mass(&b).ln_abs());
            prop_assert!((ta - tb).abs() < 1e-8);
            let (pa, pb) = (partial_mass(&a, -0.3, 0.9).unwrap().ln_abs(), partial_mass(&b, -0.3, 0.9).unwrap().ln_abs());
            prop_assert!((pa - pb).abs() < 1e-7);
        }
    }
}
