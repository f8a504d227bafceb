//! Monte Carlo low moments of `A_N`, regime predictions, scaling fits and
//! the tightness, Sobolev and cancellation diagnostics.
//!
//! Replicate `i` always draws from the stream `(seed, i)`; replicates are
//! mapped in parallel and collected in index order before any reduction, so
//! results do not depend on the worker count.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{evaluate_field, log_laplace_product, total_mass};
use crate::dist::{DistSpec, InputSequence};
use crate::engine::{secular_coeffs, secular_coeffs_dc, CoeffSeries};
use crate::error::{Error, Result};
use crate::numerics::fft::eval_on_grid;
use crate::numerics::quad::gauss_legendre_on_edges;
use crate::numerics::{ln_factorial, LseAccumulator};

/// Degree from which the divide-and-conquer path is used.
const DC_THRESHOLD: usize = 256;

/// `A_0..A_n` by whichever engine path is faster at this size.
pub fn coefficients(inputs: &InputSequence, n: usize, m_star: usize) -> Result<CoeffSeries> {
    if n >= DC_THRESHOLD {
        secular_coeffs_dc(inputs, n, m_star)
    } else {
        secular_coeffs(inputs, n, m_star)
    }
}

fn par_replicates<T: Send, F>(replicates: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..replicates as u64).into_par_iter().map(f).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Plain,
    X1Conditional,
}

impl Estimator {
    pub fn label(&self) -> &'static str {
        match self {
            Estimator::Plain => "plain",
            Estimator::X1Conditional => "x1_conditional",
        }
    }
}

/// Nodes for integrating out `X₁`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct X1Quadrature {
    /// Uniform phase nodes; raised to a power of two at least `2(N+1)`.
    pub phase_nodes: usize,
    /// Gauss–Legendre panels over the modulus support.
    pub panels: usize,
    pub per_panel: usize,
}

impl Default for X1Quadrature {
    fn default() -> Self {
        Self {
            phase_nodes: 64,
            panels: 20,
            per_panel: 16,
        }
    }
}

impl X1Quadrature {
    pub fn doubled(&self) -> Self {
        Self {
            phase_nodes: 2 * self.phase_nodes,
            panels: 2 * self.panels,
            per_panel: self.per_panel,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentQuery {
    pub dist: DistSpec,
    pub n: usize,
    pub q: f64,
    pub replicates: usize,
    pub estimator: Estimator,
    pub m_star: usize,
    pub seed: u64,
    /// Allows the plain estimator in heavy-tail regimes.
    pub force_plain: bool,
    pub quadrature: X1Quadrature,
}

impl MomentQuery {
    pub fn new(dist: DistSpec, n: usize, q: f64, replicates: usize, estimator: Estimator, seed: u64) -> Self {
        Self {
            dist,
            n,
            q,
            replicates,
            estimator,
            m_star: 1,
            seed,
            force_plain: false,
            quadrature: X1Quadrature::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dist.validate()?;
        if !(self.q > 0.0) || !self.q.is_finite() {
            return Err(Error::Parameter(format!("moment exponent q must be positive, got {}", self.q)));
        }
        if self.q > 1.0 && !matches!(self.dist, DistSpec::StretchedExponential { .. }) {
            return Err(Error::Parameter(format!("q = {} > 1 is only supported for stretched-exponential inputs", self.q)));
        }
        if self.replicates == 0 {
            return Err(Error::Parameter("need at least one replicate".into()));
        }
        if self.m_star == 0 {
            return Err(Error::Parameter("m_star must be at least 1".into()));
        }
        if self.estimator == Estimator::Plain && !self.force_plain {
            let regime = phase_predict(&self.dist, self.q)?.regime;
            if matches!(regime, Regime::Se | Regime::ExpSuper) {
                return Err(Error::VarianceGuard(format!(
                    "plain estimator refused for {} at q = {} (regime {}); use x1_conditional or force_plain",
                    self.dist.label(),
                    self.q,
                    regime.label()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub log_mean: f64,
    /// Standard error of `log_mean` (delta method); `+∞` for one replicate.
    pub log_stderr: f64,
    pub replicates: usize,
    /// `(Σw)²/Σw²` of the per-replicate values.
    pub ess: f64,
}

impl MomentEstimate {
    /// Mean of `exp(v_i)` from the logs `v_i`.
    pub fn from_log_values(values: &[f64]) -> Self {
        let m = values.len();
        let lmax = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if m == 0 || lmax == f64::NEG_INFINITY {
            return Self {
                log_mean: f64::NEG_INFINITY,
                log_stderr: if m > 1 { 0.0 } else { f64::INFINITY },
                replicates: m,
                ess: m as f64,
            };
        }
        let w: Vec<f64> = values.iter().map(|v| (v - lmax).exp()).collect();
        let sum: f64 = w.iter().sum();
        let sum_sq: f64 = w.iter().map(|x| x * x).sum();
        let mean = sum / m as f64;
        let log_stderr = if m < 2 {
            f64::INFINITY
        } else {
            let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1) as f64;
            (var / m as f64).sqrt() / mean
        };
        Self {
            log_mean: mean.ln() + lmax,
            log_stderr,
            replicates: m,
            ess: (sum * sum / sum_sq).min(m as f64),
        }
    }

    /// `E|A|^{2q}` from samples of `log|A|`.
    pub fn from_log_abs(log_abs: &[f64], q: f64) -> Self {
        let v: Vec<f64> = log_abs.iter().map(|l| 2.0 * q * l).collect();
        Self::from_log_values(&v)
    }
}

/// `log|A_n|` for each `n` in `ns` (outer index) and each replicate (inner).
pub fn log_abs_samples(dist: &DistSpec, ns: &[usize], m_star: usize, replicates: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n_max = ns.iter().copied().max().unwrap_or(0);
    let rows = par_replicates(replicates, |i| {
        let x = InputSequence::generate(*dist, seed, i, n_max.max(1));
        let s = coefficients(&x, n_max, m_star)?;
        Ok(ns.iter().map(|&n| s.ln_abs(n)).collect::<Vec<f64>>())
    })?;
    Ok((0..ns.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect())
}

/// Per-replicate value `log E_{X₁}|Σ_j (X₁^j/j!) B_{N−j}|^{2q}`, where `b`
/// holds the coefficients with `X₁` removed.
///
/// The phase of `X₁` is averaged on a uniform grid (one FFT per modulus).
/// The modulus is written as `x(t)` with `t` standard exponential; the
/// support of `t ↦ e^{−t} g(x(t))` is located by a geometric scan and then
/// integrated with composite Gauss–Legendre. An atom at zero, if the law has
/// one, is added exactly.
pub fn x1_conditional_log_value(dist: &DistSpec, b: &CoeffSeries, n: usize, q: f64, quad: &X1Quadrature) -> f64 {
    let p = quad.phase_nodes.max(2 * (n + 1)).next_power_of_two();
    let lb: Vec<f64> = (0..=n).map(|j| b.ln_abs(n - j)).collect();
    let ab: Vec<f64> = (0..=n).map(|j| b.get(n - j).arg()).collect();
    let lf: Vec<f64> = (0..=n).map(|j| ln_factorial(j as u64)).collect();
    let log_g = |r: f64| -> f64 {
        let lr = r.ln();
        let logs: Vec<f64> = (0..=n)
            .map(|j| if j == 0 { lb[0] } else { j as f64 * lr - lf[j] + lb[j] })
            .collect();
        let lmax = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lmax == f64::NEG_INFINITY {
            return lmax;
        }
        let vals = eval_on_grid(
            logs.iter()
                .zip(&ab)
                .enumerate()
                .filter(|(_, (l, _))| **l > f64::NEG_INFINITY)
                .map(|(j, (l, a))| (j, Complex64::from_polar((l - lmax).exp(), *a))),
            p,
        );
        let mean = vals.iter().map(|v| v.norm_sqr().powf(q)).sum::<f64>() / p as f64;
        2.0 * q * lmax + mean.ln()
    };
    let h = |t: f64| -t + log_g(dist.modulus_from_exp_variate(t));

    let t0 = dist.atom_threshold();
    let mut scan: Vec<(f64, f64)> = vec![(t0, h(t0))];
    let mut hmax = scan[0].1;
    let mut i = 0;
    loop {
        let t = t0 + 1e-3 * 2f64.powf(i as f64 / 4.0);
        let v = h(t);
        hmax = hmax.max(v);
        let prev = scan.last().map(|s| s.1).unwrap_or(v);
        scan.push((t, v));
        if (t > t0 + 1.0 && v < hmax - 60.0 && v <= prev) || t > 1e7 {
            break;
        }
        i += 1;
    }
    if hmax == f64::NEG_INFINITY {
        return hmax;
    }
    let first = scan.iter().position(|s| s.1 >= hmax - 60.0).unwrap_or(0).saturating_sub(1);
    let scan = &scan[first..];
    let (lo, hi) = (scan[0].0, scan[scan.len() - 1].0);

    // half the panels uniform in t, half at equal steps of integrand mass
    let half = (quad.panels / 2).max(1);
    let mut cum = vec![0.0];
    for w in scan.windows(2) {
        let m = 0.5 * ((w[0].1 - hmax).exp() + (w[1].1 - hmax).exp()) * (w[1].0 - w[0].0);
        cum.push(cum.last().unwrap() + m);
    }
    let total = *cum.last().unwrap();
    let mut edges: Vec<f64> = (0..=half).map(|i| lo + (hi - lo) * i as f64 / half as f64).collect();
    for i in 1..half {
        let target = total * i as f64 / half as f64;
        let k = cum.partition_point(|c| *c < target).clamp(1, cum.len() - 1);
        let f = if cum[k] > cum[k - 1] { (target - cum[k - 1]) / (cum[k] - cum[k - 1]) } else { 0.0 };
        edges.push(scan[k - 1].0 + f * (scan[k].0 - scan[k - 1].0));
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let (ts, ws) = gauss_legendre_on_edges(&edges, quad.per_panel);
    let mut acc: LseAccumulator = ts.iter().zip(&ws).map(|(t, w)| w.ln() + h(*t)).collect();
    if t0 > 0.0 {
        // P(|X₁| = 0) = 1 − e^{−t0}
        acc.add((-(-t0).exp()).ln_1p() + log_g(0.0));
    }
    acc.finalize()
}

/// `E|A_N|^{2q}` by Monte Carlo.
pub fn mc_low_moment(query: &MomentQuery) -> Result<MomentEstimate> {
    query.validate()?;
    let n = query.n;
    match query.estimator {
        Estimator::Plain => {
            let s = log_abs_samples(&query.dist, &[n], query.m_star, query.replicates, query.seed)?;
            Ok(MomentEstimate::from_log_abs(&s[0], query.q))
        }
        Estimator::X1Conditional => {
            let values = par_replicates(query.replicates, |i| {
                let x = InputSequence::generate(query.dist, query.seed, i, n.max(1));
                let b = coefficients(&x, n, query.m_star.max(2))?;
                if query.m_star >= 2 {
                    return Ok(2.0 * query.q * b.ln_abs(n));
                }
                Ok(x1_conditional_log_value(&query.dist, &b, n, query.q, &query.quadrature))
            })?;
            Ok(MomentEstimate::from_log_values(&values))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "UNIV")]
    Univ,
    #[serde(rename = "EXP_SUB")]
    ExpSub,
    #[serde(rename = "EXP_CRIT")]
    ExpCrit,
    #[serde(rename = "EXP_SUPER")]
    ExpSuper,
    #[serde(rename = "SE")]
    Se,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Univ => "UNIV",
            Regime::ExpSub => "EXP_SUB",
            Regime::ExpCrit => "EXP_CRIT",
            Regime::ExpSuper => "EXP_SUPER",
            Regime::Se => "SE",
        }
    }
}

/// Relative tolerance under which `γ` and `2q` count as equal.
pub const CRITICAL_TOLERANCE: f64 = 1e-12;

/// Predicted asymptotic order `ψ(N)` of `E|A_N|^{2q}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePrediction {
    pub regime: Regime,
    pub dist: DistSpec,
    pub q: f64,
}

impl PhasePrediction {
    pub fn log_psi(&self, n: f64) -> f64 {
        let q = self.q;
        let ln_n = n.ln();
        let univ = -q * (1.0 + (1.0 - q) * ln_n.sqrt()).ln();
        match (self.regime, self.dist) {
            (Regime::Univ | Regime::ExpSub, _) => univ,
            (Regime::ExpCrit, _) => (1.0 - q + 0.5 * q * q) * ln_n + univ,
            (Regime::ExpSuper, DistSpec::Exponential { gamma }) => (0.5 - q) * ln_n + 2.0 * q * n * (2.0 * q / gamma).ln(),
            (Regime::Se, DistSpec::StretchedExponential { p }) => {
                let cp = self.dist.c_p().unwrap_or(1.0);
                (0.5 - q) * (2.0 * std::f64::consts::PI).ln()
                    + 0.5 * (2.0 * q / p).ln()
                    + (2.0 * q * n / p) * (2.0 * q * cp.powf(p) / (p * (1.0 - p).exp())).ln()
                    + (0.5 - q + 2.0 * q * n * (1.0 / p - 1.0)) * ln_n
            }
            _ => f64::NAN,
        }
    }
}

/// Regime of `E|A_N|^{2q}` for the given law.
pub fn phase_predict(dist: &DistSpec, q: f64) -> Result<PhasePrediction> {
    dist.validate()?;
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Parameter(format!("moment exponent q must be positive, got {q}")));
    }
    let regime = match *dist {
        DistSpec::ComplexGaussian => Regime::Univ,
        DistSpec::Exponential { gamma } => {
            let two_q = 2.0 * q;
            if (gamma - two_q).abs() <= CRITICAL_TOLERANCE * two_q {
                Regime::ExpCrit
            } else if gamma < two_q {
                Regime::ExpSuper
            } else {
                Regime::ExpSub
            }
        }
        DistSpec::StretchedExponential { .. } => Regime::Se,
    };
    Ok(PhasePrediction {
        regime,
        dist: *dist,
        q,
    })
}

/// Whether `(mean e^{2q_i v})^{1/q_i}` is non-decreasing along `q_list`.
///
/// Exact on the empirical measure up to rounding; a relative slack of
/// `1e−12` on the compared logarithms absorbs the latter.
pub fn lyapunov_check(log_abs: &[f64], q_list: &[f64]) -> Result<bool> {
    if q_list.windows(2).any(|w| !(w[0] < w[1])) || q_list.iter().any(|q| !(*q > 0.0)) {
        return Err(Error::Precondition("q list must be positive and strictly ascending".into()));
    }
    if log_abs.is_empty() {
        return Err(Error::Precondition("empty sample set".into()));
    }
    let ln_m = (log_abs.len() as f64).ln();
    let norms: Vec<f64> = q_list
        .iter()
        .map(|q| {
            let acc: LseAccumulator = log_abs.iter().map(|l| 2.0 * q * l).collect();
            (acc.finalize() - ln_m) / q
        })
        .collect();
    Ok(norms.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0) || w[0] == f64::NEG_INFINITY))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FitModel {
    SlopeVsLogN,
    SlopeVsN,
    BandVsPrediction(PhasePrediction),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FitReport {
    Slope { slope: f64, stderr: f64, intercept: f64 },
    Band { min: f64, max: f64 },
}

/// Least-squares slope of `log_estimate` against `log N` or `N`, or the
/// range of residuals against a prediction.
pub fn scaling_fit(points: &[(f64, f64)], model: FitModel) -> Result<FitReport> {
    if points.len() < 3 {
        return Err(Error::Precondition(format!("scaling fit needs at least 3 points, got {}", points.len())));
    }
    let x_of = |n: f64| match model {
        FitModel::SlopeVsLogN => n.ln(),
        _ => n,
    };
    if let FitModel::BandVsPrediction(pred) = model {
        let res: Vec<f64> = points.iter().map(|(n, y)| y - pred.log_psi(*n)).collect();
        return Ok(FitReport::Band {
            min: res.iter().copied().fold(f64::INFINITY, f64::min),
            max: res.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| x_of(p.0)).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateDesign("all abscissae are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(points).map(|(x, p)| (p.1 - intercept - slope * x).powi(2)).sum();
    Ok(FitReport::Slope {
        slope,
        stderr: (ssr / (m - 2.0) / sxx).sqrt(),
        intercept,
    })
}

/// Empirical percentiles at one `N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuantileRow {
    pub n: usize,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

/// Linear-interpolation percentile of sorted data, `p ∈ [0, 1]`.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentiles of `|A_N| (log(1+N))^{power}` from `log|A_N|` samples.
pub fn tightness_from_samples(ns: &[usize], log_abs: &[Vec<f64>], power: f64) -> Vec<QuantileRow> {
    ns.iter()
        .zip(log_abs)
        .map(|(&n, ls)| {
            let w = power * ((1.0 + n as f64).ln()).ln();
            let mut v: Vec<f64> = ls.iter().map(|l| (l + w).exp()).collect();
            v.sort_by(f64::total_cmp);
            QuantileRow {
                n,
                p10: percentile(&v, 0.1),
                p50: percentile(&v, 0.5),
                p90: percentile(&v, 0.9),
            }
        })
        .collect()
}

/// Percentiles of `|A_N| (log(1+N))^{power}`; `power = 1/4` is the
/// normalisation under which the family is tight.
pub fn tightness_diagnostic(dist: &DistSpec, ns: &[usize], replicates: usize, seed: u64, power: f64) -> Result<Vec<QuantileRow>> {
    if matches!(dist, DistSpec::StretchedExponential { .. }) {
        return Err(Error::Parameter("tightness needs a law with a finite exponential moment".into()));
    }
    if replicates == 0 {
        return Err(Error::Parameter("need at least one replicate".into()));
    }
    let s = log_abs_samples(dist, ns, 1, replicates, seed)?;
    Ok(tightness_from_samples(ns, &s, power))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SobolevReport {
    /// `(cutoff, log of the mean partial sum)`.
    pub cutoffs: Vec<(usize, f64)>,
    /// Last two means within 5% of each other.
    pub converged: bool,
}

/// `log Σ_{n ≤ c} (1+n²)^s |A_n|²` for each cutoff `c` (ascending).
pub fn sobolev_sums(series: &CoeffSeries, s: f64, cutoffs: &[usize]) -> Vec<f64> {
    let mut acc = LseAccumulator::new();
    let mut out = Vec::with_capacity(cutoffs.len());
    let mut n = 0;
    for &c in cutoffs {
        while n <= c {
            acc.add(s * (1.0 + (n * n) as f64).ln() + 2.0 * series.ln_abs(n));
            n += 1;
        }
        out.push(acc.finalize());
    }
    out
}

/// Means of the `H^s` partial sums at `N_max/4`, `N_max/2` and `N_max`.
pub fn sobolev_partial_sum(dist: &DistSpec, s: f64, n_max: usize, replicates: usize, seed: u64) -> Result<SobolevReport> {
    if !(s < 0.0) {
        return Err(Error::Parameter(format!("Sobolev exponent must be negative, got {s}")));
    }
    if replicates == 0 || n_max < 4 {
        return Err(Error::Parameter("need replicates >= 1 and N_max >= 4".into()));
    }
    let cutoffs = [n_max / 4, n_max / 2, n_max];
    let rows = par_replicates(replicates, |i| {
        let x = InputSequence::generate(*dist, seed, i, n_max);
        Ok(sobolev_sums(&coefficients(&x, n_max, 1)?, s, &cutoffs))
    })?;
    let ln_m = (replicates as f64).ln();
    let means: Vec<(usize, f64)> = cutoffs
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let acc: LseAccumulator = rows.iter().map(|r| r[j]).collect();
            (c, acc.finalize() - ln_m)
        })
        .collect();
    let converged = ((means[2].1 - means[1].1).exp() - 1.0).abs() < 0.05;
    Ok(SobolevReport {
        cutoffs: means,
        converged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CancellationRow {
    pub n: usize,
    /// `log((E|A_N|)² / E|A_N|²)`.
    pub log_ratio: f64,
    pub log_stderr: f64,
}

impl CancellationRow {
    pub fn from_estimates(n: usize, half: &MomentEstimate, one: &MomentEstimate) -> Self {
        Self {
            n,
            log_ratio: 2.0 * half.log_mean - one.log_mean,
            log_stderr: (4.0 * half.log_stderr.powi(2) + one.log_stderr.powi(2)).sqrt(),
        }
    }
}

/// `(E|A_N|)² / E|A_N|²` per `N`.
pub fn cancellation_ratio(dist: &DistSpec, ns: &[usize], replicates: usize, estimator: Estimator, seed: u64) -> Result<Vec<CancellationRow>> {
    ns.iter()
        .map(|&n| {
            let mut query = MomentQuery::new(*dist, n, 0.5, replicates, estimator, seed);
            query.force_plain = true;
            if estimator == Estimator::Plain {
                let s = log_abs_samples(dist, &[n], 1, replicates, seed)?;
                let half = MomentEstimate::from_log_abs(&s[0], 0.5);
                let one = MomentEstimate::from_log_abs(&s[0], 1.0);
                return Ok(CancellationRow::from_estimates(n, &half, &one));
            }
            let half = mc_low_moment(&query)?;
            query.q = 1.0;
            let one = mc_low_moment(&query)?;
            Ok(CancellationRow::from_estimates(n, &half, &one))
        })
        .collect()
}

/// Truncated chaos on one circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassSetup {
    pub k: usize,
    pub m_star: usize,
    pub r: f64,
    /// Grid points per mode; the grid is a power of two at least `2(K+1)`.
    pub oversample: usize,
}

impl MassSetup {
    pub fn grid_size(&self) -> usize {
        (self.oversample * (self.k + 1)).max(2 * (self.k + 1)).next_power_of_two()
    }

    /// `log Π_{k=M*}^{K} L(1, k, r)`, the log of the mean total mass.
    pub fn log_mean_reference(&self, dist: &DistSpec) -> Result<f64> {
        log_laplace_product(dist, self.m_star, self.k, self.r)
    }
}

/// `log` of the total mass for each replicate.
pub fn mass_log_samples(dist: &DistSpec, setup: &MassSetup, replicates: usize, seed: u64) -> Result<Vec<f64>> {
    let t = setup.grid_size();
    par_replicates(replicates, |i| {
        let x = InputSequence::generate(*dist, seed, i, setup.k);
        Ok(total_mass(&evaluate_field(&x, setup.k, setup.m_star, setup.r, t)?).ln_abs())
    })
}

/// `E[mass^q]`.
pub fn mass_moment(dist: &DistSpec, setup: &MassSetup, q: f64, replicates: usize, seed: u64) -> Result<MomentEstimate> {
    let v: Vec<f64> = mass_log_samples(dist, setup, replicates, seed)?.iter().map(|l| q * l).collect();
    Ok(MomentEstimate::from_log_values(&v))
}
