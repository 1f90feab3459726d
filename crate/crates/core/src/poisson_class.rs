//! The class of all Poisson distributions with mean at most `Λ`.
//!
//! Symbol `i` is most likely under `Poi(i)` when `i ≤ Λ` and under `Poi(Λ)`
//! otherwise, so
//!
//! ```text
//! S = Σ_{i ≤ ⌊Λ⌋} e^{−i} iⁱ / i!  +  P(Poi(Λ) > ⌊Λ⌋).
//! ```
//!
//! The first (diagonal) sum is evaluated term by term in log space and the
//! second exactly through the Poisson CDF.

use std::f64::consts::{LOG2_E, PI};

use serde::Serialize;

use crate::classes::RedundancyValue;
use crate::error::{Error, Result};
use crate::numerics::{log_poisson_mode_mass, poisson_upper_tail, LogSpace, NeumaierSum, PoissonParam};
use crate::par;

/// Means above this use the certified Stirling bracket for the diagonal sum
/// instead of summing every term.
pub const EXACT_MEAN_LIMIT: f64 = 1.0e7;

/// Diagonal terms summed exactly before the Stirling bracket takes over.
const STIRLING_SPLIT: u64 = 1_000_000;

/// `{Poi(λ) : λ ≤ upper}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundedPoissonClass {
    upper: f64,
}

impl BoundedPoissonClass {
    pub fn new(upper: f64) -> Result<Self> {
        if !upper.is_finite() || upper < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mean cap must be finite and >= 0, got {upper}"
            )));
        }
        Ok(BoundedPoissonClass { upper })
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }
}

/// `log₂(2 − e^{−Λ})`, the exact redundancy for `Λ ≤ 1`.
pub fn small_mean_bits(lambda: f64) -> f64 {
    (-(-lambda).exp_m1()).ln_1p() * LOG2_E
}

/// `Σ_{i=lo}^{hi} e^{−i} iⁱ / i!` in linear scale, chunked for parallel runs.
fn diagonal_sum(lo: u64, hi: u64) -> NeumaierSum {
    let parts = par::map_chunks(lo..hi + 1, 1 << 16, |range| {
        range.map(|i| log_poisson_mode_mass(i).linear()).collect::<NeumaierSum>()
    });
    let mut acc = NeumaierSum::default();
    for p in parts {
        acc.merge(p);
    }
    acc
}

/// Exact Shtarkov sum and worst-case redundancy of the class.
pub fn shtarkov_bounded_poisson(c: &BoundedPoissonClass) -> RedundancyValue {
    let lambda = c.upper;
    if lambda == 0.0 {
        return RedundancyValue::from_shtarkov(LogSpace::ONE);
    }
    let floor = lambda.floor() as u64;
    if floor == 0 {
        return RedundancyValue::from_shtarkov(LogSpace::from_ln((-(-lambda).exp_m1()).ln_1p()));
    }
    let mut s = diagonal_sum(0, floor);
    s.add(poisson_upper_tail(PoissonParam::new(lambda).expect("validated mean"), floor));
    RedundancyValue::from_linear(s.total())
}

/// Two-sided bracket on the Shtarkov sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShtarkovBracket {
    pub lower: RedundancyValue,
    pub upper: RedundancyValue,
}

impl ShtarkovBracket {
    fn exact(v: RedundancyValue) -> Self {
        ShtarkovBracket { lower: v, upper: v }
    }

    pub fn lower_bits(&self) -> f64 {
        self.lower.bits()
    }

    pub fn upper_bits(&self) -> f64 {
        self.upper.bits()
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }
}

/// Exact value for `Λ ≤ exact_limit`; above it the first million diagonal
/// terms are summed and the rest bracketed via `θᵢ ∈ (0, 1/(12i))` and
/// integral bounds on `Σ i^{−1/2}`, with the Poisson tail bracketed by `[0, 1]`.
pub fn shtarkov_bounded_poisson_bracket(c: &BoundedPoissonClass, exact_limit: f64) -> ShtarkovBracket {
    let lambda = c.upper;
    if lambda <= exact_limit || lambda.floor() as u64 <= STIRLING_SPLIT {
        return ShtarkovBracket::exact(shtarkov_bounded_poisson(c));
    }
    let m = lambda.floor() as u64;
    let a = STIRLING_SPLIT;
    let head = diagonal_sum(0, a).total();
    let (af, mf) = (a as f64, m as f64);
    let norm = (2.0 * PI).sqrt();
    // Σ_{i=a+1}^{m} i^{−1/2} ∈ [2(√(m+1) − √(a+1)), 2(√m − √a)]
    let root_lo = 2.0 * ((mf + 1.0).sqrt() - (af + 1.0).sqrt());
    let root_hi = 2.0 * (mf.sqrt() - af.sqrt());
    // e^{−θᵢ} ≥ 1 − 1/(12i), and Σ_{i>a} i^{−3/2}/12 ≤ 1/(6√a)
    let correction = 1.0 / (6.0 * af.sqrt());
    let pad = 1e-12 * (head + root_hi / norm);
    let lower = head + (root_lo - correction) / norm - pad;
    let upper = head + root_hi / norm + 1.0 + pad;
    ShtarkovBracket {
        lower: RedundancyValue::from_linear(lower),
        upper: RedundancyValue::from_linear(upper),
    }
}

/// Closed-form bracket on the redundancy in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormBracket {
    pub lower_bits: f64,
    pub upper_bits: f64,
    /// For `Λ ≤ 1`, the additional cap `Λ·log₂e ≥ log₂(2 − e^{−Λ})`.
    pub cap_bits: Option<f64>,
}

/// For `Λ ≤ 1` both ends equal `log₂(2 − e^{−Λ})`; for `Λ > 1` the bracket
/// `[log₂√((2Λ+2)/π), log₂(√(2Λ/π) + 2)]`.
pub fn closed_form_bounds_bounded_poisson(c: &BoundedPoissonClass) -> ClosedFormBracket {
    let lambda = c.upper;
    if lambda <= 1.0 {
        let exact = small_mean_bits(lambda);
        ClosedFormBracket { lower_bits: exact, upper_bits: exact, cap_bits: Some(lambda * LOG2_E) }
    } else {
        ClosedFormBracket {
            lower_bits: 0.5 * ((2.0 * lambda + 2.0) / PI).log2(),
            upper_bits: ((2.0 * lambda / PI).sqrt() + 2.0).log2(),
            cap_bits: None,
        }
    }
}
