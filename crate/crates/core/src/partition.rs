//! Integer partitions and the exact moment oracles they give.
//!
//! `A_N = Σ_{λ ⊢ N} a(λ)` with `a(λ) = Π_k X_k^{m_k} / (k^{m_k/2} m_k!)`, and
//! distinct partitions are orthogonal, `E[a(λ) conj(a(λ′))] = 0`. Hence
//! `E|A_N|²` is the sum of `E|a(λ)|²` over partitions. No such identity exists
//! for `E|A_N|^{2q}` with `q ≠ 1`; only single-partition moments are exact
//! there.

use std::ops::Range;

use crate::dist::{DistSpec, InputSequence};
use crate::error::{Error, Result};
use crate::numerics::special::ln_factorial;
use crate::numerics::{ExtComplex, LogReal, LseAccumulator};

/// A partition as ascending `(part, multiplicity)` pairs.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    mults: Vec<(usize, usize)>,
}

impl Partition {
    /// Builds from `(part, multiplicity)` pairs in any order; zero
    /// multiplicities are dropped and repeated parts merged.
    pub fn from_mults(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut mults: Vec<(usize, usize)> = Vec::new();
        for (k, m) in pairs {
            if k == 0 {
                return Err(Error::Parameter("partition parts must be positive".into()));
            }
            if m > 0 {
                mults.push((k, m));
            }
        }
        mults.sort_unstable();
        mults.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        Ok(Self { mults })
    }

    /// The all-one partition `{1 → n}`.
    pub fn all_ones(n: usize) -> Self {
        Self {
            mults: if n == 0 { vec![] } else { vec![(1, n)] },
        }
    }

    pub fn empty() -> Self {
        Self { mults: vec![] }
    }

    /// `Σ k·m_k`.
    pub fn weight(&self) -> usize {
        self.mults.iter().map(|(k, m)| k * m).sum()
    }

    /// `(k, m_k)` with `k` ascending.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mults.iter().copied()
    }

    pub fn multiplicity(&self, k: usize) -> usize {
        self.mults
            .binary_search_by_key(&k, |p| p.0)
            .map(|i| self.mults[i].1)
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.mults.is_empty()
    }
}

/// Restrictions on the enumerated set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartitionConstraints {
    pub min_part: usize,
    /// `None` means unbounded.
    pub max_part: Option<usize>,
    /// Exact number of parts equal to 1.
    pub m1_exact: Option<usize>,
}

impl Default for PartitionConstraints {
    fn default() -> Self {
        Self {
            min_part: 1,
            max_part: None,
            m1_exact: None,
        }
    }
}

impl PartitionConstraints {
    pub fn min_part(min_part: usize) -> Self {
        Self {
            min_part,
            ..Self::default()
        }
    }

    /// Reduces `m1_exact` to a plain range problem on `N − j`.
    fn reduce(&self, n: usize) -> Option<(usize, usize, usize, usize)> {
        let lo = self.min_part.max(1);
        let hi = self.max_part.unwrap_or(usize::MAX);
        match self.m1_exact {
            None => Some((n, lo, hi, 0)),
            Some(0) => Some((n, lo.max(2), hi, 0)),
            Some(j) => (lo <= 1 && hi >= 1 && j <= n).then(|| (n - j, 2, hi, j)),
        }
    }
}

/// Whether `r` is a sum of parts drawn from `[lo, hi]`.
#[inline]
fn representable(r: usize, lo: usize, hi: usize) -> bool {
    if r == 0 {
        return true;
    }
    if hi < lo || r < lo {
        return false;
    }
    let hi = hi.min(r);
    r.div_ceil(hi) <= r / lo
}

/// Streaming enumeration in decreasing-lexicographic order of the largest
/// parts. Never holds more than one partition.
pub struct PartitionIter {
    lo: usize,
    /// `(part, multiplicity, remainder before this level, cap at this level)`
    stack: Vec<(usize, usize, usize, usize)>,
    ones: usize,
    state: IterState,
}

enum IterState {
    Fresh(usize, usize),
    Running,
    Done,
}

impl PartitionIter {
    /// First feasible `(k, m)` at a level, scanning `k` down from `k_from`.
    fn first_choice(&self, r: usize, k_from: usize) -> Option<(usize, usize)> {
        let mut k = k_from.min(r);
        while k >= self.lo && k > 0 {
            let m_max = r / k;
            for m in (1..=m_max).rev() {
                if representable(r - k * m, self.lo, k - 1) {
                    return Some((k, m));
                }
            }
            k -= 1;
        }
        None
    }

    /// Completes the stack greedily from remainder `r` below `cap`.
    fn fill(&mut self, mut r: usize, mut cap: usize) -> bool {
        while r > 0 {
            match self.first_choice(r, cap) {
                Some((k, m)) => {
                    self.stack.push((k, m, r, cap));
                    r -= k * m;
                    cap = k - 1;
                }
                None => return false,
            }
        }
        true
    }

    fn advance(&mut self) -> bool {
        while let Some((k, m, r, cap)) = self.stack.pop() {
            // smaller multiplicity of the same part
            for m2 in (1..m).rev() {
                if representable(r - k * m2, self.lo, k - 1) {
                    self.stack.push((k, m2, r, cap));
                    let ok = self.fill(r - k * m2, k - 1);
                    debug_assert!(ok);
                    return true;
                }
            }
            // next smaller part
            if k > self.lo {
                if let Some((k2, m2)) = self.first_choice(r, k - 1) {
                    self.stack.push((k2, m2, r, cap));
                    let ok = self.fill(r - k2 * m2, k2 - 1);
                    debug_assert!(ok);
                    return true;
                }
            }
        }
        false
    }

    fn current(&self) -> Partition {
        let mut mults: Vec<(usize, usize)> = self.stack.iter().rev().map(|&(k, m, _, _)| (k, m)).collect();
        if self.ones > 0 {
            mults.insert(0, (1, self.ones));
        }
        Partition { mults }
    }
}

impl Iterator for PartitionIter {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        match self.state {
            IterState::Done => None,
            IterState::Fresh(r, hi) => {
                if self.fill(r, hi) {
                    self.state = IterState::Running;
                    Some(self.current())
                } else {
                    self.state = IterState::Done;
                    None
                }
            }
            IterState::Running => {
                if self.advance() {
                    Some(self.current())
                } else {
                    self.state = IterState::Done;
                    None
                }
            }
        }
    }
}

/// Every partition of `n` meeting `constraints`, each exactly once.
/// `n = 0` yields the empty partition.
pub fn enumerate_partitions(n: usize, constraints: PartitionConstraints) -> PartitionIter {
    match constraints.reduce(n) {
        Some((r, lo, hi, ones)) => PartitionIter {
            lo,
            stack: Vec::new(),
            ones,
            state: IterState::Fresh(r, hi),
        },
        None => PartitionIter {
            lo: 1,
            stack: Vec::new(),
            ones: 0,
            state: IterState::Done,
        },
    }
}

/// Number of partitions `enumerate_partitions` would yield.
pub fn count_partitions(n: usize, constraints: PartitionConstraints) -> u128 {
    let Some((r, lo, hi, _)) = constraints.reduce(n) else {
        return 0;
    };
    let mut ways = vec![0u128; r + 1];
    ways[0] = 1;
    for k in lo..=hi.min(r) {
        for x in k..=r {
            ways[x] += ways[x - k];
        }
    }
    ways[r]
}

/// Limits on exact enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_partitions: u64,
    pub n_max_exact: usize,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        Self {
            max_partitions: 20_000_000,
            n_max_exact: 70,
        }
    }
}

impl EnumerationBudget {
    fn admit(&self, n: usize, constraints: PartitionConstraints) -> Result<()> {
        if n > self.n_max_exact {
            return Err(Error::Budget(format!(
                "N = {n} exceeds the exact-oracle limit {}",
                self.n_max_exact
            )));
        }
        let count = count_partitions(n, constraints);
        if count > self.max_partitions as u128 {
            return Err(Error::Budget(format!(
                "{count} partitions of {n} exceed the budget {}",
                self.max_partitions
            )));
        }
        Ok(())
    }
}

/// `log E|a(λ)|^{2q}` for every `(k, m)`: `log E|X|^{2qm} − qm log k − 2q log m!`.
struct WeightTable {
    ln_abs_moment: Vec<f64>,
    q: f64,
}

impl WeightTable {
    fn new(dist: &DistSpec, max_mult: usize, q: f64) -> Result<Self> {
        let ln_abs_moment = (0..=max_mult)
            .map(|m| dist.abs_moment(2.0 * q * m as f64).map(|v| v.ln_abs()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ln_abs_moment, q })
    }

    #[inline]
    fn term(&self, k: usize, m: usize) -> f64 {
        self.ln_abs_moment[m] - self.q * m as f64 * (k as f64).ln() - 2.0 * self.q * ln_factorial(m as u64)
    }

    fn ln_moment(&self, lam: &Partition) -> f64 {
        lam.iter().map(|(k, m)| self.term(k, m)).sum()
    }
}

/// `E|a(λ)|^{2q} = Π_k E|X|^{2q m_k} / (k^{q m_k} (m_k!)^{2q})`.
pub fn a_lambda_moment(dist: &DistSpec, lam: &Partition, q: f64) -> Result<LogReal> {
    if !(q > 0.0) {
        return Err(Error::Domain(format!("moment order q must be positive, got {q}")));
    }
    let mut l = 0.0;
    for (k, m) in lam.iter() {
        l += dist.abs_moment(2.0 * q * m as f64)?.ln_abs() - q * m as f64 * (k as f64).ln() - 2.0 * q * ln_factorial(m as u64);
    }
    Ok(LogReal::from_ln(l))
}

/// `a(λ) = Π_k X_k^{m_k} / (k^{m_k/2} m_k!)` for one input draw.
pub fn a_lambda_value(inputs: &InputSequence, lam: &Partition) -> Result<ExtComplex> {
    let mut acc = ExtComplex::ONE;
    for (k, m) in lam.iter() {
        if k > inputs.len() {
            return Err(Error::Length {
                have: inputs.len(),
                need: k,
            });
        }
        let r = inputs.moduli()[k - 1];
        if r == 0.0 {
            return Ok(ExtComplex::ZERO);
        }
        let mf = m as f64;
        let log_abs = mf * r.ln() - 0.5 * mf * (k as f64).ln() - ln_factorial(m as u64);
        acc = acc.try_mul(ExtComplex::from_polar_log(log_abs, mf * inputs.phases()[k - 1]))?;
    }
    Ok(acc)
}

/// `Σ_{λ ⊢ n} a(λ)`, term by term.
pub fn partition_sum(inputs: &InputSequence, n: usize, constraints: PartitionConstraints) -> Result<ExtComplex> {
    let mut acc = ExtComplex::ZERO;
    for lam in enumerate_partitions(n, constraints) {
        acc = acc.try_add(a_lambda_value(inputs, &lam)?)?;
    }
    Ok(acc)
}

/// Exact `E|Σ_λ a(λ)|²` over the constrained set, by orthogonality.
pub fn exact_second_moment(
    dist: &DistSpec,
    n: usize,
    constraints: PartitionConstraints,
    budget: &EnumerationBudget,
) -> Result<LogReal> {
    budget.admit(n, constraints)?;
    let table = WeightTable::new(dist, n, 1.0)?;
    let acc: LseAccumulator = enumerate_partitions(n, constraints).map(|lam| table.ln_moment(&lam)).collect();
    Ok(acc.to_log_real())
}

/// `E|A_N|² / E|a(λ*)|² − 1`, summed directly over `λ ≠ λ*` so that the gap
/// keeps full relative precision however small it is.
pub fn dominance_gap(dist: &DistSpec, n: usize, budget: &EnumerationBudget) -> Result<LogReal> {
    let constraints = PartitionConstraints::default();
    budget.admit(n, constraints)?;
    let table = WeightTable::new(dist, n, 1.0)?;
    let star = Partition::all_ones(n);
    let rest: LseAccumulator = enumerate_partitions(n, constraints)
        .filter(|lam| *lam != star)
        .map(|lam| table.ln_moment(&lam))
        .collect();
    rest.to_log_real().div(LogReal::from_ln(table.ln_moment(&star)))
}

/// `E|B_n|²` for `n = 0..=n_max`, where `B` is the series without `X_1`.
fn moments_without_first(dist: &DistSpec, n_max: usize, budget: &EnumerationBudget) -> Result<Vec<LogReal>> {
    let c = PartitionConstraints::min_part(2);
    (0..=n_max).map(|n| exact_second_moment(dist, n, c, budget)).collect()
}

/// `E[|A_N|² 1{|X_1| ∈ [lo, hi)}]`.
///
/// Splitting `A_N = Σ_j (X_1^j / j!) B_{N−j}` and using orthogonality in
/// `X_1` gives `Σ_j E[|X_1|^{2j} 1{bin}] / (j!)² · E|B_{N−j}|²`.
pub fn conditional_second_moment(
    dist: &DistSpec,
    n: usize,
    lo: f64,
    hi: f64,
    budget: &EnumerationBudget,
) -> Result<LogReal> {
    let b = moments_without_first(dist, n, budget)?;
    binned_from_rest(dist, n, lo, hi, &b)
}

fn binned_from_rest(dist: &DistSpec, n: usize, lo: f64, hi: f64, rest: &[LogReal]) -> Result<LogReal> {
    let mut acc = LseAccumulator::new();
    for j in 0..=n {
        let bin = dist.binned_abs_moment(2.0 * j as f64, lo, hi)?;
        acc.add(bin.ln_abs() - 2.0 * ln_factorial(j as u64) + rest[n - j].ln_abs());
    }
    Ok(acc.to_log_real())
}

/// Profile `m ↦ E[|A_N|² 1{|X_1| ∈ [m, m+1)}]` over `m_range`.
pub fn conditional_second_moment_profile(
    dist: &DistSpec,
    n: usize,
    m_range: Range<usize>,
    budget: &EnumerationBudget,
) -> Result<Vec<(usize, LogReal)>> {
    let b = moments_without_first(dist, n, budget)?;
    m_range
        .map(|m| Ok((m, binned_from_rest(dist, n, m as f64, m as f64 + 1.0, &b)?)))
        .collect()
}
