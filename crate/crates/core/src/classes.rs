//! Explicit finite distribution classes, type enumeration, and brute-force
//! Shtarkov sums over sequences and over types.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{log_factorial, LogSpace, NeumaierSum};
use crate::par;

/// Default cap on the number of items a single brute-force call may enumerate.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// Environment variable overriding [`DEFAULT_BUDGET`].
pub const BUDGET_ENV: &str = "SHTARKOV_BUDGET";

/// Upper limit on enumerated items (sequences, types, or type×member pairs).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget(pub u64);

impl Default for Budget {
    fn default() -> Self {
        Budget(DEFAULT_BUDGET)
    }
}

impl Budget {
    /// Reads `SHTARKOV_BUDGET`, falling back to the default when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var(BUDGET_ENV) {
            Ok(v) => v.trim().parse::<u64>().map(Budget).map_err(|_| {
                Error::InvalidParameter(format!("{BUDGET_ENV} must be a nonnegative integer, got {v:?}"))
            }),
            Err(_) => Ok(Budget::default()),
        }
    }

    pub fn check(self, needed: u128) -> Result<()> {
        if needed > self.0 as u128 {
            return Err(Error::BudgetExceeded { needed, budget: self.0 });
        }
        Ok(())
    }
}

/// A probability vector over the alphabet `{0, …, k−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    probs: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty alphabet".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidDistribution(format!("probability {p} outside [0, 1]")));
        }
        let total: f64 = probs.iter().copied().collect::<NeumaierSum>().total();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(FiniteDistribution { probs })
    }

    /// Normalizes nonnegative weights with a positive total.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().copied().collect::<NeumaierSum>().total();
        if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidDistribution("weights must be nonnegative with positive sum".into()));
        }
        FiniteDistribution::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn point_mass(k: usize, at: usize) -> Result<Self> {
        if at >= k {
            return Err(Error::InvalidParameter(format!("symbol {at} outside alphabet of size {k}")));
        }
        let mut probs = vec![0.0; k];
        probs[at] = 1.0;
        FiniteDistribution::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }
}

/// A nonempty finite set of distributions over a common alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteClass {
    alphabet_size: usize,
    members: Vec<FiniteDistribution>,
}

impl FiniteClass {
    pub fn new(members: Vec<FiniteDistribution>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyClass)?;
        let k = first.alphabet_size();
        if let Some(m) = members.iter().find(|m| m.alphabet_size() != k) {
            return Err(Error::AlphabetMismatch { expected: k, got: m.alphabet_size() });
        }
        Ok(FiniteClass { alphabet_size: k, members })
    }

    pub fn singleton(p: FiniteDistribution) -> Self {
        FiniteClass { alphabet_size: p.alphabet_size(), members: vec![p] }
    }

    /// All point masses on a `k`-letter alphabet.
    pub fn point_masses(k: usize) -> Result<Self> {
        FiniteClass::new((0..k).map(|i| FiniteDistribution::point_mass(k, i)).collect::<Result<_>>()?)
    }

    /// `{(p, 1−p) : p = j/steps, j = 0..=steps}`, a grid over the binary simplex.
    pub fn binary_grid(steps: u32) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter("grid needs at least one step".into()));
        }
        let members = (0..=steps)
            .map(|j| {
                let p = j as f64 / steps as f64;
                FiniteDistribution::new(vec![p, 1.0 - p])
            })
            .collect::<Result<_>>()?;
        FiniteClass::new(members)
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn members(&self) -> &[FiniteDistribution] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `max_{P ∈ class} P(x)`.
    pub fn max_likelihood(&self, x: usize) -> f64 {
        self.members.iter().map(|p| p.probs[x]).fold(0.0, f64::max)
    }

    /// Union of classes over a shared alphabet (duplicates kept).
    pub fn union(parts: &[FiniteClass]) -> Result<Self> {
        FiniteClass::new(parts.iter().flat_map(|c| c.members.iter().cloned()).collect())
    }

    /// Image class `f(𝒫)` under a symbol map into `{0, …, image_size−1}`.
    pub fn map_symbols(&self, mapping: &[usize], image_size: usize) -> Result<Self> {
        if mapping.len() != self.alphabet_size {
            return Err(Error::AlphabetMismatch { expected: self.alphabet_size, got: mapping.len() });
        }
        if let Some(&y) = mapping.iter().find(|&&y| y >= image_size) {
            return Err(Error::InvalidParameter(format!("image symbol {y} outside 0..{image_size}")));
        }
        let members = self
            .members
            .iter()
            .map(|p| {
                let mut q = vec![0.0; image_size];
                for (x, &y) in mapping.iter().enumerate() {
                    q[y] += p.probs[x];
                }
                // Re-normalize away rounding from the merges.
                FiniteDistribution::from_weights(&q)
            })
            .collect::<Result<_>>()?;
        FiniteClass::new(members)
    }

    /// Marginal classes of a class over a `kx × ky` product alphabet, where
    /// symbol `(x, y)` has index `x·ky + y`.
    pub fn marginals(&self, kx: usize, ky: usize) -> Result<(FiniteClass, FiniteClass)> {
        if kx * ky != self.alphabet_size {
            return Err(Error::AlphabetMismatch { expected: self.alphabet_size, got: kx * ky });
        }
        let px: Vec<usize> = (0..kx * ky).map(|s| s / ky).collect();
        let py: Vec<usize> = (0..kx * ky).map(|s| s % ky).collect();
        Ok((self.map_symbols(&px, kx)?, self.map_symbols(&py, ky)?))
    }

    pub fn contains(&self, p: &FiniteDistribution) -> bool {
        self.members.iter().any(|m| m == p)
    }
}

/// A multiplicity vector: a composition of `n` into `k` nonnegative parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypeVector {
    counts: Vec<u64>,
}

impl TypeVector {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidParameter("type needs at least one coordinate".into()));
        }
        Ok(TypeVector { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    /// Drops the last multiplicity; at fixed `n` this is a bijection.
    pub fn abbreviated(&self) -> &[u64] {
        &self.counts[..self.counts.len() - 1]
    }
}

/// Cursor over compositions of `n` into `k` parts in decreasing
/// lexicographic order, reusing one buffer.
#[derive(Debug, Clone)]
pub(crate) struct Compositions {
    counts: Vec<u64>,
    done: bool,
}

impl Compositions {
    pub(crate) fn new(n: u64, k: usize) -> Self {
        assert!(k >= 1);
        let mut counts = vec![0; k];
        counts[0] = n;
        Compositions { counts, done: false }
    }

    pub(crate) fn current(&self) -> Option<&[u64]> {
        (!self.done).then_some(self.counts.as_slice())
    }

    pub(crate) fn advance(&mut self) {
        let last = self.counts.len() - 1;
        let Some(j) = (0..last).rev().find(|&j| self.counts[j] > 0) else {
            self.done = true;
            return;
        };
        let rest = self.counts[last];
        self.counts[j] -= 1;
        self.counts[last] = 0;
        self.counts[j + 1] = rest + 1;
    }
}

/// Streaming iterator over all types of length `n` on `k` symbols.
#[derive(Debug, Clone)]
pub struct TypeIter {
    cursor: Compositions,
}

impl Iterator for TypeIter {
    type Item = TypeVector;

    fn next(&mut self) -> Option<TypeVector> {
        let out = self.cursor.current()?.to_vec();
        self.cursor.advance();
        Some(TypeVector { counts: out })
    }
}

/// Every composition of `n` into `k ≥ 1` parts, once each, in decreasing
/// lexicographic order: `(n,0,…,0)` first, `(0,…,0,n)` last.
pub fn enumerate_types(n: u64, k: usize) -> Result<TypeIter> {
    if k == 0 {
        return Err(Error::InvalidParameter("alphabet size must be >= 1".into()));
    }
    Ok(TypeIter { cursor: Compositions::new(n, k) })
}

/// `C(n+k−1, k−1)`, saturating at `u128::MAX`.
pub fn type_count(n: u64, k: usize) -> u128 {
    let mut r: u128 = 1;
    for j in 1..k as u128 {
        r = match r.checked_mul(n as u128 + j) {
            Some(v) => v / j,
            None => return u128::MAX,
        };
    }
    r
}

fn pow_saturating(base: u128, exp: u64) -> u128 {
    let mut r: u128 = 1;
    for _ in 0..exp {
        r = match r.checked_mul(base) {
            Some(v) => v,
            None => return u128::MAX,
        };
    }
    r
}

/// Worst-case redundancy of a class together with its Shtarkov sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RedundancyValue {
    /// `ln S`.
    #[serde(serialize_with = "ser_ln")]
    pub shtarkov_log: LogSpace,
}

fn ser_ln<S: serde::Serializer>(v: &LogSpace, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(v.ln())
}

impl RedundancyValue {
    pub fn from_shtarkov(shtarkov_log: LogSpace) -> Self {
        RedundancyValue { shtarkov_log }
    }

    pub fn from_linear(s: f64) -> Self {
        RedundancyValue { shtarkov_log: LogSpace::from_linear(s) }
    }

    /// `log₂ S`.
    pub fn bits(&self) -> f64 {
        self.shtarkov_log.bits()
    }

    pub fn nats(&self) -> f64 {
        self.shtarkov_log.ln()
    }

    /// The Shtarkov sum `S`.
    pub fn shtarkov(&self) -> f64 {
        self.shtarkov_log.linear()
    }
}

/// `S = Σ_x max_{P∈class} P(x)`.
pub fn shtarkov_sum_explicit(c: &FiniteClass) -> Result<RedundancyValue> {
    if c.is_empty() {
        return Err(Error::EmptyClass);
    }
    let s: NeumaierSum = (0..c.alphabet_size()).map(|x| c.max_likelihood(x)).collect();
    Ok(RedundancyValue::from_linear(s.total()))
}

/// `ln` of the maximum probability any iid distribution gives to the type
/// class: `C(n; m₁…m_k)·Π(mᵢ/n)^{mᵢ}`, with `0⁰ = 1`.
pub fn ml_prob_type_full_iid(t: &TypeVector) -> Result<LogSpace> {
    let n = t.n();
    if n == 0 {
        return Err(Error::InvalidParameter("type must have n >= 1".into()));
    }
    let nf = n as f64;
    let mut v = log_factorial(n);
    for &m in t.counts() {
        if m > 0 {
            let mf = m as f64;
            v += mf * (mf / nf).ln() - log_factorial(m);
        }
    }
    Ok(LogSpace::from_ln(v.min(0.0)))
}

/// Chunk length over the first coordinate when splitting a type space;
/// depends only on `n` so results do not depend on the thread count.
fn first_coordinate_chunk(n: u64) -> u64 {
    (n + 1).div_ceil(64).max(1)
}

/// Sums `term(type)` over all types of length `n` on `k` symbols, splitting
/// the space by the first coordinate.
fn sum_over_types<F>(n: u64, k: usize, term: F) -> f64
where
    F: Fn(&[u64]) -> f64 + Sync + Send,
{
    if k == 1 {
        return term(&[n]);
    }
    let parts = par::map_chunks(0..n + 1, first_coordinate_chunk(n), |range| {
        let mut acc = NeumaierSum::default();
        let mut buf = vec![0u64; k];
        // Descending first coordinate keeps the overall lexicographic order.
        for j in range {
            let first = n - j;
            buf[0] = first;
            let mut rest = Compositions::new(n - first, k - 1);
            while let Some(tail) = rest.current() {
                buf[1..].copy_from_slice(tail);
                acc.add(term(&buf));
                rest.advance();
            }
        }
        acc
    });
    let mut total = NeumaierSum::default();
    for p in parts {
        total.merge(p);
    }
    total.total()
}

/// `S(𝒟_kⁿ)` summed over types: `Σ_τ C(n; τ)·Π(mᵢ/n)^{mᵢ}`.
pub fn shtarkov_iid_types(k: usize, n: u64, budget: Budget) -> Result<RedundancyValue> {
    if k == 0 {
        return Err(Error::InvalidParameter("alphabet size must be >= 1".into()));
    }
    if n == 0 || k == 1 {
        return Ok(RedundancyValue::from_shtarkov(LogSpace::ONE));
    }
    budget.check(type_count(n, k))?;
    let nf = n as f64;
    // term = ln n! − n ln n + Σ (mᵢ ln mᵢ − ln mᵢ!)
    let base = log_factorial(n) - nf * nf.ln();
    let per_count: Vec<f64> = (0..=n)
        .map(|m| if m == 0 { 0.0 } else { m as f64 * (m as f64).ln() - log_factorial(m) })
        .collect();
    let total = sum_over_types(n, k, |counts| {
        let v = base + counts.iter().map(|&m| per_count[m as usize]).sum::<f64>();
        v.min(0.0).exp()
    });
    Ok(RedundancyValue::from_linear(total))
}

/// `S(𝒟_kⁿ)` summed over all `kⁿ` sequences of their iid maximum likelihood.
pub fn shtarkov_iid_sequences(k: usize, n: u64, budget: Budget) -> Result<RedundancyValue> {
    if k == 0 {
        return Err(Error::InvalidParameter("alphabet size must be >= 1".into()));
    }
    let count = pow_saturating(k as u128, n);
    budget.check(count)?;
    if n == 0 {
        return Ok(RedundancyValue::from_shtarkov(LogSpace::ONE));
    }
    let nf = n as f64;
    let per_count: Vec<f64> =
        (0..=n).map(|m| if m == 0 { 0.0 } else { m as f64 * (m as f64 / nf).ln() }).collect();
    let count = count as u64;
    let parts = par::map_chunks(0..count, 4096, |range| {
        let mut acc = NeumaierSum::default();
        let mut mult = vec![0u64; k];
        for idx in range {
            mult.iter_mut().for_each(|m| *m = 0);
            let mut rest = idx;
            for _ in 0..n {
                mult[(rest % k as u64) as usize] += 1;
                rest /= k as u64;
            }
            let v: f64 = mult.iter().map(|&m| per_count[m as usize]).sum();
            acc.add(v.exp());
        }
        acc
    });
    let mut total = NeumaierSum::default();
    for p in parts {
        total.merge(p);
    }
    Ok(RedundancyValue::from_linear(total.total()))
}

/// `S(cⁿ)` over types: `Σ_τ C(n; τ)·max_{P∈c} Π pᵢ^{mᵢ}`.
pub fn shtarkov_class_product_power(c: &FiniteClass, n: u64, budget: Budget) -> Result<RedundancyValue> {
    if c.is_empty() {
        return Err(Error::EmptyClass);
    }
    let k = c.alphabet_size();
    budget.check(type_count(n, k).saturating_mul(c.len() as u128))?;
    if n == 0 {
        return Ok(RedundancyValue::from_shtarkov(LogSpace::ONE));
    }
    let ln_probs: Vec<Vec<f64>> = c.members().iter().map(|p| p.probs().iter().map(|x| x.ln()).collect()).collect();
    let ln_fact: Vec<f64> = (0..=n).map(log_factorial).collect();
    let ln_n_fact = ln_fact[n as usize];
    let total = sum_over_types(n, k, |counts| {
        let ml = ln_probs
            .iter()
            .map(|lp| {
                counts
                    .iter()
                    .zip(lp)
                    .filter(|(&m, _)| m > 0)
                    .map(|(&m, &l)| m as f64 * l)
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        if ml == f64::NEG_INFINITY {
            return 0.0;
        }
        let multinomial = ln_n_fact - counts.iter().map(|&m| ln_fact[m as usize]).sum::<f64>();
        (multinomial + ml).min(0.0).exp()
    });
    Ok(RedundancyValue::from_linear(total))
}

/// All pairwise products `P_X × P_Y`, over the alphabet `x·k_y + y`.
pub fn product_class(cx: &FiniteClass, cy: &FiniteClass, budget: Budget) -> Result<FiniteClass> {
    if cx.is_empty() || cy.is_empty() {
        return Err(Error::EmptyClass);
    }
    budget.check(cx.len() as u128 * cy.len() as u128)?;
    let mut members = Vec::with_capacity(cx.len() * cy.len());
    for px in cx.members() {
        for py in cy.members() {
            let w: Vec<f64> = px.probs().iter().flat_map(|a| py.probs().iter().map(move |b| a * b)).collect();
            members.push(FiniteDistribution::from_weights(&w)?);
        }
    }
    FiniteClass::new(members)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(p.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn explicit_sum_examples() {
        let grid = FiniteClass::binary_grid(1000).unwrap();
        let v = shtarkov_sum_explicit(&grid).unwrap();
        assert!(close(v.shtarkov(), 2.0, 1e-15));
        assert!(close(v.bits(), 1.0, 1e-15));

        let single = FiniteClass::singleton(dist(&[0.2, 0.3, 0.5]));
        let v = shtarkov_sum_explicit(&single).unwrap();
        assert!(close(v.shtarkov(), 1.0, 1e-15) && v.bits().abs() < 1e-15);

        let disjoint = FiniteClass::point_masses(2).unwrap();
        assert!(close(shtarkov_sum_explicit(&disjoint).unwrap().bits(), 1.0, 1e-15));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(FiniteClass::new(vec![]).unwrap_err(), Error::EmptyClass);
        assert!(FiniteDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(FiniteDistribution::new(vec![-0.1, 1.1]).is_err());
        assert!(matches!(
            FiniteClass::new(vec![dist(&[1.0]), dist(&[0.5, 0.5])]),
            Err(Error::AlphabetMismatch { .. })
        ));
    }

    #[test]
    fn type_enumeration_examples() {
        let t: Vec<Vec<u64>> = enumerate_types(2, 2).unwrap().map(|t| t.counts().to_vec()).collect();
        assert_eq!(t, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        let t: Vec<Vec<u64>> = enumerate_types(0, 3).unwrap().map(|t| t.counts().to_vec()).collect();
        assert_eq!(t, vec![vec![0, 0, 0]]);
        assert_eq!(enumerate_types(5, 3).unwrap().count(), 21);
        assert_eq!(type_count(5, 3), 21);
        assert!(enumerate_types(3, 0).is_err());
    }

    #[test]
    fn type_enumeration_is_lexicographic_and_complete() {
        for k in 1..=4usize {
            for n in 0..=7u64 {
                let all: Vec<Vec<u64>> = enumerate_types(n, k).unwrap().map(|t| t.counts().to_vec()).collect();
                assert_eq!(all.len() as u128, type_count(n, k));
                assert!(all.iter().all(|c| c.iter().sum::<u64>() == n));
                assert!(all.windows(2).all(|w| w[0] > w[1]), "k={k} n={n}");
            }
        }
    }

    #[test]
    fn ml_type_examples() {
        let t = TypeVector::new(vec![2, 0]).unwrap();
        assert!(ml_prob_type_full_iid(&t).unwrap().ln().abs() < 1e-15);
        let t = TypeVector::new(vec![1, 1]).unwrap();
        assert!(close(ml_prob_type_full_iid(&t).unwrap().linear(), 0.5, 1e-14));
        let t = TypeVector::new(vec![2, 1]).unwrap();
        assert!(close(ml_prob_type_full_iid(&t).unwrap().linear(), 4.0 / 9.0, 1e-14));
        assert!(ml_prob_type_full_iid(&TypeVector::new(vec![0, 0]).unwrap()).is_err());
    }

    #[test]
    fn iid_type_sums() {
        let b = Budget::default();
        let v = shtarkov_iid_types(2, 2, b).unwrap();
        assert!(close(v.shtarkov(), 2.5, 1e-14));
        assert!(close(v.bits(), 1.321_928_1, 1e-7));
        assert!(close(shtarkov_iid_types(2, 3, b).unwrap().shtarkov(), 2.0 + 8.0 / 9.0, 1e-14));
        for n in [0, 1, 5, 40] {
            assert_eq!(shtarkov_iid_types(1, n, b).unwrap().bits(), 0.0);
        }
        assert_eq!(shtarkov_iid_types(3, 0, b).unwrap().shtarkov(), 1.0);
    }

    #[test]
    fn iid_type_sum_matches_naive_type_stream() {
        let b = Budget::default();
        for (k, n) in [(3usize, 9u64), (4, 6), (2, 30)] {
            let naive: NeumaierSum = enumerate_types(n, k)
                .unwrap()
                .map(|t| ml_prob_type_full_iid(&t).unwrap().linear())
                .collect();
            let fast = shtarkov_iid_types(k, n, b).unwrap().shtarkov();
            assert!(close(fast, naive.total(), 1e-12), "k={k} n={n}");
        }
    }

    #[test]
    fn iid_sequence_sums() {
        let b = Budget::default();
        assert!(close(shtarkov_iid_sequences(2, 2, b).unwrap().shtarkov(), 2.5, 1e-14));
        assert!(close(shtarkov_iid_sequences(2, 1, b).unwrap().shtarkov(), 2.0, 1e-14));
        assert!(close(shtarkov_iid_sequences(3, 2, b).unwrap().shtarkov(), 4.5, 1e-14));
        assert_eq!(shtarkov_iid_sequences(2, 0, b).unwrap().shtarkov(), 1.0);
    }

    #[test]
    fn budget_guards() {
        let tiny = Budget(10);
        assert!(matches!(shtarkov_iid_sequences(2, 4, tiny), Err(Error::BudgetExceeded { needed: 16, .. })));
        assert!(matches!(shtarkov_iid_types(3, 4, tiny), Err(Error::BudgetExceeded { needed: 15, .. })));
        assert!(shtarkov_iid_sequences(3, 200, Budget::default()).is_err());
        let c = FiniteClass::point_masses(3).unwrap();
        assert!(product_class(&c, &c, Budget(8)).is_err());
    }

    #[test]
    fn class_power_examples() {
        let b = Budget::default();
        let single = FiniteClass::singleton(dist(&[0.3, 0.7]));
        for n in [1, 4, 9] {
            assert!(close(shtarkov_class_product_power(&single, n, b).unwrap().shtarkov(), 1.0, 1e-13));
        }
        let masses = FiniteClass::point_masses(2).unwrap();
        assert!(close(shtarkov_class_product_power(&masses, 3, b).unwrap().shtarkov(), 2.0, 1e-14));
        let grid = FiniteClass::binary_grid(1000).unwrap();
        let v = shtarkov_class_product_power(&grid, 2, b).unwrap().shtarkov();
        assert!((v - 2.5).abs() < 1e-3 && v <= 2.5 + 1e-14);
    }

    #[test]
    fn product_class_shapes() {
        let b = Budget::default();
        let a = FiniteClass::singleton(dist(&[0.25, 0.75]));
        let c = FiniteClass::singleton(dist(&[0.5, 0.1, 0.4]));
        let p = product_class(&a, &c, b).unwrap();
        assert_eq!((p.len(), p.alphabet_size()), (1, 6));
        assert!(close(p.members()[0].probs()[1], 0.025, 1e-15));

        let m = FiniteClass::point_masses(2).unwrap();
        let p = product_class(&m, &m, b).unwrap();
        assert_eq!((p.len(), p.alphabet_size()), (4, 4));
        assert!(close(shtarkov_sum_explicit(&p).unwrap().shtarkov(), 4.0, 1e-15));

        let x = FiniteClass::new(vec![dist(&[1.0, 0.0]), dist(&[0.5, 0.5])]).unwrap();
        let y = FiniteClass::new(vec![dist(&[0.2, 0.8]), dist(&[0.6, 0.4]), dist(&[1.0, 0.0])]).unwrap();
        assert_eq!(product_class(&x, &y, b).unwrap().len(), 6);
    }

    #[test]
    fn marginals_recover_factors() {
        let b = Budget::default();
        let x = FiniteClass::new(vec![dist(&[0.1, 0.9]), dist(&[0.5, 0.5])]).unwrap();
        let y = FiniteClass::new(vec![dist(&[0.2, 0.3, 0.5])]).unwrap();
        let p = product_class(&x, &y, b).unwrap();
        let (mx, my) = p.marginals(2, 3).unwrap();
        assert!(mx.members().iter().zip(x.members()).all(|(a, b)| {
            a.probs().iter().zip(b.probs()).all(|(u, v)| (u - v).abs() < 1e-15)
        }));
        assert!(my.members().iter().all(|a| a.probs().iter().zip(y.members()[0].probs()).all(|(u, v)| (u - v).abs() < 1e-15)));
    }
}
