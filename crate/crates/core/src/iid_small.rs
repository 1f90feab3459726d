//! iid sequences over a small alphabet.
//!
//! Dropping the last multiplicity of a type gives the abbreviated type
//! `(m₁, …, m_{k−1})`, a bijective image. Under Poisson sampling its
//! coordinates are independent and each is Poisson with mean at most `n`,
//! which bounds `R̂(𝒟_kⁿ)` by `(k−1)` bounded-Poisson redundancies plus one
//! bit. A matching chain from below runs through `Λ = n′/(k−1)`.

use serde::Serialize;

use crate::classes::{shtarkov_iid_types, type_count, Budget, RedundancyValue};
use crate::error::{Error, Result};
use crate::poisson_class::{shtarkov_bounded_poisson, BoundedPoissonClass};

/// Alphabet size `k` and sequence length `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SmallAlphabetQuery {
    k: usize,
    n: u64,
}

impl SmallAlphabetQuery {
    pub fn new(k: usize, n: u64) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(Error::InvalidParameter(format!("need k >= 1 and n >= 1, got k={k}, n={n}")));
        }
        Ok(SmallAlphabetQuery { k, n })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of abbreviated types, `#{(m₁..m_{k−1}) : Σ mᵢ ≤ n}`.
    pub fn abbreviated_type_count(&self) -> u128 {
        let k = self.k as u128 - 1;
        // C(n + k, k), computed incrementally.
        (1..=k).fold(1u128, |acc, j| acc * (self.n as u128 + j) / j)
    }
}

fn bounded_poisson_bits(lambda: f64) -> f64 {
    shtarkov_bounded_poisson(&BoundedPoissonClass::new(lambda).expect("finite nonnegative mean")).bits()
}

/// `(k−1)·R̂(𝒫^{Poi}_{≤n}) + 1`.
pub fn iid_upper_bound(q: SmallAlphabetQuery) -> f64 {
    (q.k - 1) as f64 * bounded_poisson_bits(q.n as f64) + 1.0
}

/// Lower-chain value with its inputs. Only meaningful asymptotically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerChain {
    /// `n′ = n − n^{3/4}·k^{1/4}·log₂n`.
    pub n_prime: f64,
    /// `(k−1)·R̂(𝒫^{Poi}_{≤ n′/(k−1)})`.
    pub bits: f64,
    /// The same expression with `Λ = n/(k−1)`.
    pub bits_full_length: f64,
    pub advisory: bool,
}

/// `(k−1)·R̂(𝒫^{Poi}_{≤ n′/(k−1)})`, or `None` when `k = 1` or `n′ ≤ 0`.
pub fn iid_lower_chain(q: SmallAlphabetQuery) -> Option<LowerChain> {
    if q.k < 2 {
        return None;
    }
    let (nf, kf) = (q.n as f64, q.k as f64);
    let n_prime = nf - (nf.powi(3) * kf).powf(0.25) * nf.log2();
    if !(n_prime > 0.0) {
        return None;
    }
    let m = kf - 1.0;
    Some(LowerChain {
        n_prime,
        bits: m * bounded_poisson_bits(n_prime / m),
        bits_full_length: m * bounded_poisson_bits(nf / m),
        advisory: true,
    })
}

/// `R̂(𝒟_kⁿ)` by type enumeration.
pub fn iid_exact(q: SmallAlphabetQuery, budget: Budget) -> Result<RedundancyValue> {
    shtarkov_iid_types(q.k, q.n, budget)
}

/// Full types equal abbreviated types in number.
pub fn abbreviation_is_bijective(q: SmallAlphabetQuery) -> bool {
    type_count(q.n, q.k) == q.abbreviated_type_count()
}
