//! Poisson-length sampling.
//!
//! Drawing the length `N ~ Poi(n)` first and then `N` symbols iid gives the
//! class `𝒫^{Poi(n)}`, whose Shtarkov sum mixes the fixed-length sums:
//! `S(𝒫^{Poi(n)}) = Σ_{n'} Poi(n)(n')·S(𝒫^{n'})`. Fixed-length and Poisson
//! redundancies are within one bit of each other in one direction, and the
//! symbol multiplicities become independent Poisson variables.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::Serialize;

use crate::classes::{shtarkov_class_product_power, shtarkov_iid_sequences, shtarkov_iid_types, shtarkov_sum_explicit};
use crate::classes::{Budget, FiniteClass, FiniteDistribution};
use crate::envelope::{Bracket, RedundancyInterval};
use crate::error::{Error, Result};
use crate::numerics::{log_poisson_pmf, poisson_tail_bound, NeumaierSum, PoissonParam};
use crate::par;

/// Residual tolerance on the Shtarkov sum used when none is given.
pub const DEFAULT_RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Trials per independently seeded Monte-Carlo stream.
const TRIALS_PER_STREAM: u64 = 1024;

/// The class being Poissonized.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseClass {
    Explicit(FiniteClass),
    /// All iid distributions over a `k`-letter alphabet, `𝒟_k`.
    Simplex { k: usize },
}

impl BaseClass {
    /// `S(𝒫¹)`.
    fn single_symbol_shtarkov(&self) -> Result<f64> {
        match self {
            BaseClass::Explicit(c) => Ok(shtarkov_sum_explicit(c)?.shtarkov()),
            BaseClass::Simplex { k } => Ok(*k as f64),
        }
    }

    /// `S(𝒫^{n'})`.
    pub fn shtarkov_at(&self, len: u64, budget: Budget) -> Result<f64> {
        match self {
            BaseClass::Explicit(c) => Ok(shtarkov_class_product_power(c, len, budget)?.shtarkov()),
            BaseClass::Simplex { k } => Ok(shtarkov_iid_types(*k, len, budget)?.shtarkov()),
        }
    }

    /// `R̂(𝒫ⁿ)` in bits.
    pub fn fixed_bits(&self, n: u64, budget: Budget) -> Result<f64> {
        Ok(self.shtarkov_at(n, budget)?.log2())
    }
}

/// `𝒫^{Poi(n)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonizedClassHandle {
    base: BaseClass,
    n: f64,
}

impl PoissonizedClassHandle {
    pub fn new(base: BaseClass, n: f64) -> Result<Self> {
        if !n.is_finite() || n <= 0.0 {
            return Err(Error::InvalidParameter(format!("Poisson length parameter must be finite and > 0, got {n}")));
        }
        if let BaseClass::Simplex { k: 0 } = base {
            return Err(Error::InvalidParameter("alphabet size must be >= 1".into()));
        }
        Ok(PoissonizedClassHandle { base, n })
    }

    pub fn simplex(k: usize, n: f64) -> Result<Self> {
        Self::new(BaseClass::Simplex { k }, n)
    }

    pub fn explicit(c: FiniteClass, n: f64) -> Result<Self> {
        Self::new(BaseClass::Explicit(c), n)
    }

    pub fn base(&self) -> &BaseClass {
        &self.base
    }

    pub fn n(&self) -> f64 {
        self.n
    }
}

/// Bracket on `S(𝒫^{Poi(n)})` from a truncated mixing sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonizedShtarkov {
    pub shtarkov: Bracket,
    pub interval: RedundancyInterval,
    pub n_max: u64,
    /// Certified bound on the mass of lengths beyond `n_max`.
    pub residual: f64,
}

/// `ln` of the residual bound `e^{n(S₁−1)}·P(Poi(nS₁) ≥ n_max + 1)`, using
/// `S(𝒫^{n'}) ≤ S₁^{n'}` termwise and the concentration bound on the tail.
fn log_residual(n: f64, s1: f64, n_max: u64) -> f64 {
    let mean = n * s1;
    let x = n_max as f64 + 1.0;
    let tail = if x <= mean {
        1.0
    } else {
        poisson_tail_bound(PoissonParam::new(mean).expect("finite mean"), x).expect("x >= 0")
    };
    n * (s1 - 1.0) + tail.ln()
}

/// `Σ_{n' ≤ n_max} Poi(n)(n')·S(𝒫^{n'})` plus the residual bound above.
/// Fails with [`Error::ResidualTooLarge`] when that residual exceeds `tol`.
pub fn poissonized_shtarkov(h: &PoissonizedClassHandle, n_max: u64, budget: Budget, tol: f64) -> Result<PoissonizedShtarkov> {
    let s1 = h.base.single_symbol_shtarkov()?;
    let residual = log_residual(h.n, s1, n_max).exp();
    if !(residual <= tol) {
        return Err(Error::ResidualTooLarge { residual, tolerance: tol });
    }
    let per_length = par::map_indices(n_max + 1, |len| h.base.shtarkov_at(len, budget));
    let param = PoissonParam::new(h.n).expect("validated length parameter");
    let mut partial = NeumaierSum::default();
    for (len, s) in per_length.into_iter().enumerate() {
        partial.add(log_poisson_pmf(param, len as u64).linear() * s?);
    }
    let lo = partial.total() * (1.0 - 1e-13);
    let hi = partial.total() * (1.0 + 1e-13) + residual;
    let (lo_bits, hi_bits) = (lo.log2(), hi.log2());
    Ok(PoissonizedShtarkov {
        shtarkov: Bracket::new(lo, hi),
        interval: RedundancyInterval::new(lo_bits, hi_bits, hi_bits - lo_bits),
        n_max,
        residual,
    })
}

/// Smallest `n_max` whose residual bound is at most `tol`.
pub fn residual_cutoff(h: &PoissonizedClassHandle, tol: f64) -> Result<u64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("residual tolerance must be > 0, got {tol}")));
    }
    let s1 = h.base.single_symbol_shtarkov()?;
    let target = tol.ln();
    let mut n_max = (h.n * s1).ceil() as u64;
    while log_residual(h.n, s1, n_max) > target {
        n_max += 1;
    }
    Ok(n_max)
}

/// [`poissonized_shtarkov`] at the cutoff chosen by [`residual_cutoff`].
pub fn poissonized_shtarkov_auto(h: &PoissonizedClassHandle, budget: Budget, tol: f64) -> Result<PoissonizedShtarkov> {
    poissonized_shtarkov(h, residual_cutoff(h, tol)?, budget, tol)
}

/// `R̂(𝒫ⁿ) ≤ R̂(𝒫^{Poi(n)}) + 1`, using the upper end of the Poisson bracket.
pub fn fixed_upper_from_poisson(h: &PoissonizedClassHandle, budget: Budget) -> Result<f64> {
    Ok(poissonized_shtarkov_auto(h, budget, DEFAULT_RESIDUAL_TOLERANCE)?.interval.upper_bits + 1.0)
}

/// Outcome of [`poisson_lower_from_fixed`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonLowerTransfer {
    pub n1: u64,
    /// `R̂(𝒫ⁿ)`, the certified upper bound on `R̂(𝒫^{Poi(n₁)})`.
    pub bound_bits: f64,
    /// Brute-force bracket on `R̂(𝒫^{Poi(n₁)})` (absent when `n₁ = 0`).
    pub poissonized: Option<RedundancyInterval>,
    /// Whether the brute-force value respects the bound.
    pub holds: bool,
}

/// When `n ≥ 4` and `R̂(𝒫ⁿ) < n/16`, `R̂(𝒫^{Poi(n₁)}) ≤ R̂(𝒫ⁿ)` for
/// `n₁ = ⌊n − 3√(n·R̂(𝒫ⁿ))⌋`. Returns `None` when the guard fails.
pub fn poisson_lower_from_fixed(base: &BaseClass, n: u64, budget: Budget) -> Result<Option<PoissonLowerTransfer>> {
    if n < 4 {
        return Ok(None);
    }
    let fixed = base.fixed_bits(n, budget)?;
    let nf = n as f64;
    if fixed >= nf / 16.0 {
        return Ok(None);
    }
    let n1 = (nf - 3.0 * (nf * fixed).sqrt()).floor().max(0.0) as u64;
    if n1 == 0 {
        return Ok(Some(PoissonLowerTransfer { n1, bound_bits: fixed, poissonized: None, holds: true }));
    }
    let h = PoissonizedClassHandle::new(base.clone(), n1 as f64)?;
    let interval = poissonized_shtarkov_auto(&h, budget, DEFAULT_RESIDUAL_TOLERANCE)?.interval;
    Ok(Some(PoissonLowerTransfer {
        n1,
        bound_bits: fixed,
        poissonized: Some(interval),
        holds: interval.lower_bits <= fixed + 1e-10,
    }))
}

/// Monte-Carlo summary of symbol multiplicities under Poisson sampling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicityReport {
    pub trials: u64,
    pub means: Vec<f64>,
    pub expected_means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Empirical covariances for pairs `(i, j)`, `i < j`, in lexicographic order.
    pub covariances: Vec<(usize, usize, f64)>,
    /// Largest deviation of any statistic in units of its standard error.
    pub worst_sigma: f64,
    pub passed: bool,
}

/// Deviation in standard-error units, with a zero-variance statistic
/// counting as exact only when it matches exactly.
fn sigmas(deviation: f64, se: f64) -> f64 {
    if se > 0.0 {
        deviation.abs() / se
    } else if deviation == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Samples `N ~ Poi(n)` and then `N` symbols from `p`, `trials` times, and
/// checks that every multiplicity has mean and variance `n·pᵢ` and that
/// distinct multiplicities are uncorrelated, each within 4 standard errors.
///
/// The generator is ChaCha8 seeded with `seed`; trials are split into
/// blocks of 1024 and block `b` uses stream `b`, so the report does not
/// depend on the number of threads.
pub fn verify_multiplicity_independence(p: &FiniteDistribution, n: f64, trials: u64, seed: u64) -> Result<MultiplicityReport> {
    if trials < 1000 {
        return Err(Error::InvalidParameter(format!("need at least 1000 trials, got {trials}")));
    }
    if !n.is_finite() || n <= 0.0 {
        return Err(Error::InvalidParameter(format!("Poisson length parameter must be finite and > 0, got {n}")));
    }
    let k = p.alphabet_size();
    let lengths = Poisson::new(n).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let symbols = WeightedIndex::new(p.probs()).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    // Integer moment sums merge exactly regardless of order.
    let blocks = par::map_chunks(0..trials, TRIALS_PER_STREAM, |range| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(range.start / TRIALS_PER_STREAM);
        let mut first = vec![0u128; k];
        let mut second = vec![0u128; k * k];
        let mut mult = vec![0u64; k];
        for _ in range {
            mult.iter_mut().for_each(|m| *m = 0);
            let len = lengths.sample(&mut rng) as u64;
            for _ in 0..len {
                mult[symbols.sample(&mut rng)] += 1;
            }
            for i in 0..k {
                first[i] += mult[i] as u128;
                for j in i..k {
                    second[i * k + j] += (mult[i] * mult[j]) as u128;
                }
            }
        }
        (first, second)
    });
    let mut first = vec![0u128; k];
    let mut second = vec![0u128; k * k];
    for (f, s) in blocks {
        first.iter_mut().zip(f).for_each(|(a, b)| *a += b);
        second.iter_mut().zip(s).for_each(|(a, b)| *a += b);
    }

    let t = trials as f64;
    let means: Vec<f64> = first.iter().map(|&s| s as f64 / t).collect();
    let expected: Vec<f64> = p.probs().iter().map(|q| n * q).collect();
    let cov = |i: usize, j: usize| (second[i * k + j] as f64 / t - means[i] * means[j]) * t / (t - 1.0);
    let variances: Vec<f64> = (0..k).map(|i| cov(i, i)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        let mu = expected[i];
        worst = worst.max(sigmas(means[i] - mu, (mu / t).sqrt()));
        // Var of the sample variance of Poi(μ) is about (μ + 2μ²)/t.
        worst = worst.max(sigmas(variances[i] - mu, ((mu + 2.0 * mu * mu) / t).sqrt()));
    }
    let mut covariances = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let c = cov(i, j);
            worst = worst.max(sigmas(c, (expected[i] * expected[j] / t).sqrt()));
            covariances.push((i, j, c));
        }
    }
    Ok(MultiplicityReport {
        trials,
        means,
        expected_means: expected,
        variances,
        covariances,
        worst_sigma: worst,
        passed: worst <= 4.0,
    })
}

/// Conditional sequence probabilities given the Poisson length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalReport {
    /// `P^{Poi(n)}(x | N = n')` for every `x ∈ [k]^{n'}` in lexicographic order.
    pub conditional: Vec<f64>,
    pub max_abs_error: f64,
    pub passed: bool,
}

/// Checks `P^{Poi(n)}(x^{n'} | N = n') = P^{n'}(x^{n'})` for every sequence,
/// normalizing the joint probabilities by their total rather than by the
/// Poisson weight directly.
pub fn verify_conditional_length(p: &FiniteDistribution, n: f64, n_prime: u64, budget: Budget) -> Result<ConditionalReport> {
    let k = p.alphabet_size();
    let count = (k as u128).checked_pow(n_prime.min(u32::MAX as u64) as u32).unwrap_or(u128::MAX);
    budget.check(count)?;
    let count = count as usize;
    let weight = log_poisson_pmf(PoissonParam::new(n)?, n_prime).linear();
    let product = |mut idx: usize| {
        let mut prob = 1.0;
        let mut digits = vec![0usize; n_prime as usize];
        for d in digits.iter_mut().rev() {
            *d = idx % k;
            idx /= k;
        }
        for d in digits {
            prob *= p.probs()[d];
        }
        prob
    };
    let joint: Vec<f64> = (0..count).map(|x| weight * product(x)).collect();
    let total: NeumaierSum = joint.iter().copied().collect();
    let conditional: Vec<f64> = joint.iter().map(|j| j / total.total()).collect();
    let max_abs_error = conditional.iter().enumerate().map(|(x, c)| (c - product(x)).abs()).fold(0.0, f64::max);
    Ok(ConditionalReport { conditional, max_abs_error, passed: max_abs_error <= 1e-12 })
}

/// Poissonized Shtarkov sum computed two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonTypeReport {
    pub via_types: f64,
    pub via_sequences: f64,
    pub relative_difference: f64,
    pub passed: bool,
}

/// Mixes per-length type sums and per-length sequence sums of `𝒟_k` over
/// lengths `0..=n_max` and compares the two partial sums.
pub fn poisson_type_redundancy_check(k: usize, n: f64, n_max: u64, budget: Budget) -> Result<PoissonTypeReport> {
    let param = PoissonParam::new(n)?;
    let mut types = NeumaierSum::default();
    let mut seqs = NeumaierSum::default();
    for len in 0..=n_max {
        let w = log_poisson_pmf(param, len).linear();
        types.add(w * shtarkov_iid_types(k, len, budget)?.shtarkov());
        seqs.add(w * shtarkov_iid_sequences(k, len, budget)?.shtarkov());
    }
    let (a, b) = (types.total(), seqs.total());
    let rel = (a - b).abs() / a.abs().max(b.abs());
    Ok(PoissonTypeReport { via_types: a, via_sequences: b, relative_difference: rel, passed: rel <= 1e-10 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> Budget {
        Budget::default()
    }

    #[test]
    fn singleton_class_mixes_to_one() {
        let p = FiniteDistribution::new(vec![0.3, 0.7]).unwrap();
        for n in [0.5, 3.0, 12.0] {
            let h = PoissonizedClassHandle::explicit(FiniteClass::singleton(p.clone()), n).unwrap();
            let r = poissonized_shtarkov_auto(&h, budget(), 1e-10).unwrap();
            assert!(r.shtarkov.contains(1.0) || (r.shtarkov.lo - 1.0).abs() < 1e-12, "{r:?}");
            assert!(r.shtarkov.width() < 1e-9);
            assert!((fixed_upper_from_poisson(&h, budget()).unwrap() - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn simplex_two_at_two() {
        let h = PoissonizedClassHandle::simplex(2, 2.0).unwrap();
        let s: Vec<f64> = (0..5).map(|l| h.base().shtarkov_at(l, budget()).unwrap()).collect();
        let expected = [1.0, 2.0, 2.5, 26.0 / 9.0, 3.21875];
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let partial: f64 = (-2.0f64).exp() * (1.0 + 2.0 * 2.0 + 2.0 * 2.5 + 4.0 / 3.0 * 26.0 / 9.0 + 2.0 / 3.0 * 3.21875);
        assert!((partial - 2.1646).abs() < 1e-3);
        let r = poissonized_shtarkov_auto(&h, budget(), 1e-8).unwrap();
        assert!(r.shtarkov.lo >= partial);
        assert!(r.shtarkov.lo >= 1.25);
        assert!(fixed_upper_from_poisson(&h, budget()).unwrap() >= 2.5f64.log2());
        let h = PoissonizedClassHandle::simplex(2, 10.0).unwrap();
        let exact = shtarkov_iid_types(2, 10, budget()).unwrap().bits();
        assert!(fixed_upper_from_poisson(&h, budget()).unwrap() >= exact);
    }

    #[test]
    fn residual_guard() {
        let h = PoissonizedClassHandle::simplex(3, 10.0).unwrap();
        assert!(matches!(poissonized_shtarkov(&h, 20, budget(), 1e-8), Err(Error::ResidualTooLarge { .. })));
        let cut = residual_cutoff(&h, 1e-8).unwrap();
        assert!(poissonized_shtarkov(&h, cut, budget(), 1e-8).is_ok());
        assert!(poissonized_shtarkov(&h, cut - 1, budget(), 1e-8).is_err());
    }

    #[test]
    fn bracket_tightens_with_cutoff() {
        let h = PoissonizedClassHandle::simplex(2, 3.5).unwrap();
        let start = residual_cutoff(&h, 1.0).unwrap();
        let mut prev: Option<PoissonizedShtarkov> = None;
        for n_max in start..start + 40 {
            let r = poissonized_shtarkov(&h, n_max, budget(), 1.0).unwrap();
            if let Some(p) = prev {
                assert!(r.shtarkov.lo >= p.shtarkov.lo);
                assert!(r.shtarkov.hi <= p.shtarkov.hi * (1.0 + 1e-12), "n_max={n_max}");
            }
            prev = Some(r);
        }
    }

    #[test]
    fn residual_certificate() {
        let h = PoissonizedClassHandle::simplex(2, 6.0).unwrap();
        let cut = residual_cutoff(&h, 1e-8).unwrap();
        let a = poissonized_shtarkov(&h, cut, budget(), 1e-8).unwrap();
        let b = poissonized_shtarkov(&h, cut + 5, budget(), 1e-8).unwrap();
        assert!(b.shtarkov.lo - a.shtarkov.lo <= a.residual);
    }

    #[test]
    fn lower_transfer_guard() {
        let single = BaseClass::Explicit(FiniteClass::singleton(FiniteDistribution::new(vec![1.0]).unwrap()));
        let t = poisson_lower_from_fixed(&single, 4, budget()).unwrap().unwrap();
        assert_eq!((t.n1, t.bound_bits), (4, 0.0));
        assert!(t.holds);

        let simplex = BaseClass::Simplex { k: 2 };
        assert!(poisson_lower_from_fixed(&simplex, 4, budget()).unwrap().is_none());
        let t = poisson_lower_from_fixed(&simplex, 64, budget()).unwrap().unwrap();
        let fixed = shtarkov_iid_types(2, 64, budget()).unwrap().bits();
        assert!(fixed < 4.0);
        assert_eq!(t.n1, (64.0 - 3.0 * (64.0 * fixed).sqrt()).floor() as u64);
        assert!(t.holds, "{t:?}");
    }

    #[test]
    fn multiplicities() {
        let p = FiniteDistribution::new(vec![0.5, 0.5]).unwrap();
        let r = verify_multiplicity_independence(&p, 8.0, 100_000, 11).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.means.iter().all(|m| (m - 4.0).abs() < 0.08));
        assert!(r.covariances[0].2.abs() < 0.1);
        let again = verify_multiplicity_independence(&p, 8.0, 100_000, 11).unwrap();
        assert_eq!(r, again);

        let r = verify_multiplicity_independence(&FiniteDistribution::new(vec![0.9, 0.1]).unwrap(), 20.0, 20_000, 3).unwrap();
        assert!(r.passed && (r.means[0] - 18.0).abs() < 0.3 && (r.means[1] - 2.0).abs() < 0.1);

        let point = FiniteDistribution::point_mass(3, 1).unwrap();
        let r = verify_multiplicity_independence(&point, 5.0, 5_000, 1).unwrap();
        assert!(r.passed);
        assert_eq!((r.means[0], r.means[2], r.variances[0]), (0.0, 0.0, 0.0));
        assert!((r.variances[1] - 5.0).abs() < 0.5);
    }

    #[test]
    fn conditional_length_examples() {
        let p = FiniteDistribution::new(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let r = verify_conditional_length(&p, 1.0, 0, budget()).unwrap();
        assert_eq!(r.conditional, vec![1.0]);
        let r = verify_conditional_length(&p, 1.0, 2, budget()).unwrap();
        let expected = [4.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0, 1.0 / 9.0];
        assert!(r.passed);
        assert!(r.conditional.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-15));
        let u = FiniteDistribution::new(vec![0.5, 0.5]).unwrap();
        let r = verify_conditional_length(&u, 3.0, 2, budget()).unwrap();
        assert!(r.conditional.iter().all(|c| (c - 0.25).abs() < 1e-15));
        assert!(verify_conditional_length(&u, 3.0, 40, Budget(1000)).is_err());
    }

    #[test]
    fn type_and_sequence_mixing_agree() {
        let r = poisson_type_redundancy_check(1, 2.0, 6, budget()).unwrap();
        assert!((r.via_types - r.via_sequences).abs() < 1e-15);
        assert!((r.via_types - poisson_cdf_at(2.0, 6)).abs() < 1e-12);
        for n in [2.0, 0.5] {
            assert!(poisson_type_redundancy_check(2, n, 6, budget()).unwrap().passed);
        }
    }

    fn poisson_cdf_at(n: f64, m: u64) -> f64 {
        (0..=m).map(|i| log_poisson_pmf(PoissonParam::new(n).unwrap(), i).linear()).sum()
    }
}
