//! Log-domain arithmetic, Poisson probabilities and factorial machinery.

use std::cmp::Ordering;
use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::ops::{Add, Mul};
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// A nonnegative real held as its natural logarithm.
///
/// `LogSpace::ZERO` (log of zero, stored as negative infinity) is a regular
/// value: it is the identity for `+` and absorbing for `*`.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct LogSpace(f64);

impl LogSpace {
    pub const ZERO: LogSpace = LogSpace(f64::NEG_INFINITY);
    pub const ONE: LogSpace = LogSpace(0.0);

    /// Wraps a natural logarithm. NaN is rejected; `-inf` is the zero element.
    pub fn from_ln(value: f64) -> Self {
        assert!(!value.is_nan(), "log value must not be NaN");
        LogSpace(value)
    }

    /// Logarithm of a nonnegative linear-scale value.
    pub fn from_linear(x: f64) -> Self {
        assert!(x >= 0.0, "linear value must be nonnegative, got {x}");
        LogSpace(x.ln())
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn linear(self) -> f64 {
        self.0.exp()
    }

    /// Base-2 logarithm.
    pub fn bits(self) -> f64 {
        self.0 / LN_2
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl fmt::Debug for LogSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "LogSpace(zero)")
        } else {
            write!(f, "LogSpace(ln {})", self.0)
        }
    }
}

impl PartialOrd for LogSpace {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl Add for LogSpace {
    type Output = LogSpace;

    fn add(self, rhs: LogSpace) -> LogSpace {
        let (hi, lo) = if self.0 >= rhs.0 { (self.0, rhs.0) } else { (rhs.0, self.0) };
        if lo == f64::NEG_INFINITY {
            return LogSpace(hi);
        }
        LogSpace(hi + (lo - hi).exp().ln_1p())
    }
}

impl Mul for LogSpace {
    type Output = LogSpace;

    fn mul(self, rhs: LogSpace) -> LogSpace {
        if self.is_zero() || rhs.is_zero() {
            return LogSpace::ZERO;
        }
        LogSpace(self.0 + rhs.0)
    }
}

/// `log Σ exp(tᵢ)`, shifted by the maximum term. Terms are accumulated in
/// input order, so the result is bit-stable for a fixed input order.
pub fn log_sum_exp(terms: &[LogSpace]) -> LogSpace {
    let max = terms.iter().fold(f64::NEG_INFINITY, |m, t| m.max(t.0));
    if max.is_infinite() {
        return LogSpace(max);
    }
    let mut acc = NeumaierSum::default();
    for t in terms {
        acc.add((t.0 - max).exp());
    }
    LogSpace(max + acc.total().ln())
}

/// Compensated (Neumaier) summation of linear-scale terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: NeumaierSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl std::iter::FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Mean of a Poisson distribution.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PoissonParam(f64);

impl PoissonParam {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Poisson mean must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(PoissonParam(lambda))
    }

    pub fn lambda(self) -> f64 {
        self.0
    }
}

/// `ln Poi(λ)(i) = −λ + i ln λ − ln i!`.
pub fn log_poisson_pmf(p: PoissonParam, i: u64) -> LogSpace {
    let lambda = p.0;
    if lambda == 0.0 {
        return if i == 0 { LogSpace::ONE } else { LogSpace::ZERO };
    }
    LogSpace(-lambda + i as f64 * lambda.ln() - log_factorial(i))
}

/// `ln P(X ≤ m)` for `X ~ Poi(λ)`, by the forward recurrence
/// `pᵢ₊₁ = pᵢ·λ/(i+1)` in linear space relative to a log offset.
pub fn poisson_cdf(p: PoissonParam, m: u64) -> LogSpace {
    let lambda = p.0;
    if lambda == 0.0 {
        return LogSpace::ONE;
    }
    const RESCALE_AT: f64 = 1e250;
    // Terms are relative to exp(offset); offset starts at ln p₀ = −λ.
    let mut offset = -lambda;
    let mut term = 1.0_f64;
    let mut sum = NeumaierSum::default();
    sum.add(1.0);
    for i in 1..=m {
        term *= lambda / i as f64;
        sum.add(term);
        let mut total = sum.total();
        if total > RESCALE_AT {
            offset += total.ln();
            term /= total;
            sum = NeumaierSum::default();
            sum.add(1.0);
            total = 1.0;
        }
        // Past the mode, terms no longer move the sum.
        if i as f64 > lambda && term < total * 1e-18 {
            break;
        }
    }
    LogSpace((offset + sum.total().ln()).min(0.0))
}

/// `P(X > m)` for `X ~ Poi(λ)`, as a linear value.
pub fn poisson_upper_tail(p: PoissonParam, m: u64) -> f64 {
    if m == 0 {
        return -(-p.0).exp_m1();
    }
    (1.0 - poisson_cdf(p, m).linear()).max(0.0)
}

/// Concentration bound: for `x ≥ λ` a bound on `P(X ≥ x)`, for `x ≤ λ` a
/// bound on `P(X ≤ x)`.
pub fn poisson_tail_bound(p: PoissonParam, x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tail bound point must be >= 0, got {x}"
        )));
    }
    let lambda = p.0;
    let d = x - lambda;
    if d == 0.0 {
        return Ok(1.0);
    }
    let scale = if x > lambda { x } else { lambda };
    Ok((-(d * d) / (2.0 * scale)).exp())
}

const EXACT_FACTORIAL_MAX: u64 = 256;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(EXACT_FACTORIAL_MAX as usize + 1);
        let mut acc = 0.0_f64;
        t.push(0.0);
        for j in 1..=EXACT_FACTORIAL_MAX {
            acc += (j as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln √(2πn) + n ln(n/e)`, the leading part of Stirling's formula.
pub fn stirling_base(n: u64) -> f64 {
    let x = n as f64;
    0.5 * (2.0 * PI * x).ln() + x * (x.ln() - 1.0)
}

/// `θₙ = ln n! − stirling_base(n)`, which lies in `(1/(12n+1), 1/(12n))`.
///
/// Up to 256 this is the exact log-factorial minus the base; beyond, it is
/// the asymptotic series of ln Γ truncated after the `n⁻⁷` term, whose
/// error is below `1/(1188 n⁹)`.
pub fn stirling_theta(n: u64) -> f64 {
    assert!(n >= 1, "Stirling correction is defined for n >= 1");
    if n <= EXACT_FACTORIAL_MAX {
        return ln_factorial_table()[n as usize] - stirling_base(n);
    }
    let x = n as f64;
    let r = 1.0 / x;
    let r2 = r * r;
    r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 / 1680.0)))
}

/// `ln i!`: exact summation of `ln j` for `i ≤ 256`, the log-gamma series beyond.
pub fn log_factorial(i: u64) -> f64 {
    if i <= EXACT_FACTORIAL_MAX {
        return ln_factorial_table()[i as usize];
    }
    stirling_base(i) + stirling_theta(i)
}

/// `ln(e^{−i} iⁱ / i!) = ln Poi(i)(i)`, the per-symbol maximum likelihood
/// over all Poisson distributions.
pub fn log_poisson_mode_mass(i: u64) -> LogSpace {
    if i == 0 {
        return LogSpace::ONE;
    }
    LogSpace(-0.5 * (2.0 * PI * i as f64).ln() - stirling_theta(i))
}
