//! Envelope descriptions and envelope-level redundancy bounds.
//!
//! An envelope `f: ℤ⁺ → ℝ≥0` defines the class of all distributions over
//! the positive integers with `pᵢ ≤ fᵢ`. Under Poisson sampling with mean
//! `n` the redundancy of that class is sandwiched between sums of
//! bounded-Poisson redundancies `R̂(𝒫^{Poi}_{≤ n fᵢ})`: over all `i` from
//! above, and over `i ≥ l_f` from below, where `l_f` is the first index
//! whose tail sum drops below one.

use std::f64::consts::{LOG2_E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::NeumaierSum;
use crate::par;
use crate::poisson_class::{shtarkov_bounded_poisson_bracket, small_mean_bits, BoundedPoissonClass, EXACT_MEAN_LIMIT};

/// Relative padding applied to explicitly summed positive terms.
const SUM_PAD: f64 = 4e-15;

/// Explicit terms a single tail bracket may sum before giving up on its tolerance.
const MAX_EXPLICIT_TERMS: u64 = 1 << 24;

/// A parametric decreasing family, `c·i^{−α}` or `c·e^{−αi}`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    Power { c: f64, alpha: f64 },
    Geometric { c: f64, alpha: f64 },
}

impl Family {
    fn eval(self, i: u64) -> f64 {
        match self {
            Family::Power { c, alpha } => c * (i as f64).powf(-alpha),
            Family::Geometric { c, alpha } => c * (-alpha * i as f64).exp(),
        }
    }

    fn summable(self) -> bool {
        match self {
            Family::Power { alpha, .. } => alpha > 1.0,
            Family::Geometric { alpha, .. } => alpha > 0.0,
        }
    }

    fn divergence_reason(self) -> String {
        match self {
            Family::Power { alpha, .. } => format!("power-law decay with alpha = {alpha} <= 1"),
            Family::Geometric { alpha, .. } => format!("exponential decay with alpha = {alpha} <= 0"),
        }
    }

    fn powi(self, k: i32) -> Family {
        match self {
            Family::Power { c, alpha } => Family::Power { c: c.powi(k), alpha: alpha * k as f64 },
            Family::Geometric { c, alpha } => Family::Geometric { c: c.powi(k), alpha: alpha * k as f64 },
        }
    }

    /// Bracket on `Σ_{i>u} f(i)` with width at most `tol` when reachable
    /// within [`MAX_EXPLICIT_TERMS`].
    fn tail(self, u: u64, tol: f64) -> Result<Bracket> {
        if !self.summable() {
            return Err(Error::NotSummable(self.divergence_reason()));
        }
        match self {
            Family::Geometric { c, alpha } => {
                let v = c * (-alpha * (u as f64 + 1.0)).exp() / -(-alpha).exp_m1();
                Ok(Bracket::exact(v))
            }
            Family::Power { c, alpha } => {
                // For convex decreasing f and any M:
                //   ∫_{M+1}^∞ f + f(M+1)/2  ≤  Σ_{i>M} f(i)  ≤  ∫_{M+1/2}^∞ f.
                let integral = |a: f64| c * a.powf(1.0 - alpha) / (alpha - 1.0);
                let remainder = |m: u64| {
                    let mf = m as f64;
                    (integral(mf + 1.0) + 0.5 * self.eval(m + 1), integral(mf + 0.5))
                };
                let mut explicit = NeumaierSum::default();
                let mut m = u;
                loop {
                    let (lo, hi) = remainder(m);
                    let head = explicit.total();
                    let bracket = Bracket::new(head * (1.0 - SUM_PAD) + lo * (1.0 - SUM_PAD), head * (1.0 + SUM_PAD) + hi * (1.0 + SUM_PAD));
                    if bracket.width() <= tol || m - u >= MAX_EXPLICIT_TERMS {
                        return Ok(bracket);
                    }
                    let next = (u + 2 * (m - u)).max(u + 64).min(u + MAX_EXPLICIT_TERMS);
                    for i in m + 1..=next {
                        explicit.add(self.eval(i));
                    }
                    m = next;
                }
            }
        }
    }
}

/// Extension of a table envelope beyond its explicit values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "TailDoc")]
pub enum Tail {
    /// `fᵢ = 0` past the table.
    Zero,
    /// `fᵢ = c·e^{−αi}` past the table (absolute index `i`).
    Geometric { c: f64, alpha: f64 },
    /// `fᵢ = c·i^{−α}` past the table (absolute index `i`).
    Power { c: f64, alpha: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TailDoc {
    kind: String,
    c: Option<f64>,
    alpha: Option<f64>,
}

impl TryFrom<TailDoc> for Tail {
    type Error = String;

    fn try_from(doc: TailDoc) -> std::result::Result<Self, String> {
        let params = || match (doc.c, doc.alpha) {
            (Some(c), Some(alpha)) => Ok((c, alpha)),
            _ => Err(format!("tail kind `{}` needs both `c` and `alpha`", doc.kind)),
        };
        match doc.kind.as_str() {
            "zero" if doc.c.is_none() && doc.alpha.is_none() => Ok(Tail::Zero),
            "zero" => Err("tail kind `zero` takes no parameters".into()),
            "geometric" => params().map(|(c, alpha)| Tail::Geometric { c, alpha }),
            "power" => params().map(|(c, alpha)| Tail::Power { c, alpha }),
            other => Err(format!("unknown tail kind `{other}`")),
        }
    }
}

impl Tail {
    fn family(self) -> Option<Family> {
        match self {
            Tail::Zero => None,
            Tail::Geometric { c, alpha } => Some(Family::Geometric { c, alpha }),
            Tail::Power { c, alpha } => Some(Family::Power { c, alpha }),
        }
    }
}

/// An envelope function.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    /// `fᵢ = c·i^{−α}`.
    PowerLaw { c: f64, alpha: f64 },
    /// `fᵢ = c·e^{−αi}`.
    Exponential { c: f64, alpha: f64 },
    /// `fᵢ = values[i−1]` for `i ≤ values.len()`, then `tail`.
    Table { values: Vec<f64>, tail: Tail },
}

/// Raw envelope document; validated into [`Envelope`].
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeDoc {
    kind: EnvelopeKind,
    c: Option<f64>,
    alpha: Option<f64>,
    values: Option<Vec<f64>>,
    tail: Option<Tail>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum EnvelopeKind {
    PowerLaw,
    Exponential,
    Table,
}

fn check_param(name: &str, value: f64, positive: bool) -> Result<()> {
    if !value.is_finite() || (positive && value <= 0.0) {
        let need = if positive { "finite and > 0" } else { "finite" };
        return Err(Error::InvalidParameter(format!("{name} must be {need}, got {value}")));
    }
    Ok(())
}

impl Envelope {
    pub fn power_law(c: f64, alpha: f64) -> Result<Self> {
        check_param("c", c, true)?;
        check_param("alpha", alpha, false)?;
        Ok(Envelope::PowerLaw { c, alpha })
    }

    pub fn exponential(c: f64, alpha: f64) -> Result<Self> {
        check_param("c", c, true)?;
        check_param("alpha", alpha, false)?;
        Ok(Envelope::Exponential { c, alpha })
    }

    pub fn table(values: Vec<f64>, tail: Tail) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParameter(format!("table values must be finite and >= 0, got {v}")));
        }
        match tail {
            Tail::Zero => {}
            Tail::Geometric { c, alpha } | Tail::Power { c, alpha } => {
                check_param("tail c", c, true)?;
                check_param("tail alpha", alpha, false)?;
            }
        }
        Ok(Envelope::Table { values, tail })
    }

    /// Parses the JSON envelope document. Unknown fields, and fields that do
    /// not belong to the given kind, are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: EnvelopeDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let stray = |fields: &[(&str, bool)]| -> Result<()> {
            match fields.iter().find(|(_, present)| *present) {
                Some((name, _)) => Err(Error::Parse(format!("field `{name}` does not apply to this envelope kind"))),
                None => Ok(()),
            }
        };
        let need = |name: &str, v: Option<f64>| v.ok_or_else(|| Error::Parse(format!("missing field `{name}`")));
        match doc.kind {
            EnvelopeKind::PowerLaw | EnvelopeKind::Exponential => {
                stray(&[("values", doc.values.is_some()), ("tail", doc.tail.is_some())])?;
                let (c, alpha) = (need("c", doc.c)?, need("alpha", doc.alpha)?);
                match doc.kind {
                    EnvelopeKind::PowerLaw => Envelope::power_law(c, alpha),
                    _ => Envelope::exponential(c, alpha),
                }
            }
            EnvelopeKind::Table => {
                stray(&[("c", doc.c.is_some()), ("alpha", doc.alpha.is_some())])?;
                let values = doc.values.ok_or_else(|| Error::Parse("missing field `values`".into()))?;
                Envelope::table(values, doc.tail.unwrap_or(Tail::Zero))
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("envelope serializes")
    }

    fn prefix(&self) -> &[f64] {
        match self {
            Envelope::Table { values, .. } => values,
            _ => &[],
        }
    }

    fn family(&self) -> Option<Family> {
        match *self {
            Envelope::PowerLaw { c, alpha } => Some(Family::Power { c, alpha }),
            Envelope::Exponential { c, alpha } => Some(Family::Geometric { c, alpha }),
            Envelope::Table { tail, .. } => tail.family(),
        }
    }

    /// `fᵢ`, for `i ≥ 1`.
    pub fn eval(&self, i: u64) -> f64 {
        assert!(i >= 1, "envelopes are indexed from 1");
        let prefix = self.prefix();
        if i as usize <= prefix.len() {
            return prefix[i as usize - 1];
        }
        self.family().map_or(0.0, |f| f.eval(i))
    }

    /// The pointwise power `fᵢᵏ`, again an envelope of the same shape.
    pub fn powi(&self, k: i32) -> Envelope {
        match self {
            Envelope::PowerLaw { c, alpha } => Envelope::PowerLaw { c: c.powi(k), alpha: alpha * k as f64 },
            Envelope::Exponential { c, alpha } => Envelope::Exponential { c: c.powi(k), alpha: alpha * k as f64 },
            Envelope::Table { values, tail } => Envelope::Table {
                values: values.iter().map(|v| v.powi(k)).collect(),
                tail: match tail.family().map(|f| f.powi(k)) {
                    None => Tail::Zero,
                    Some(Family::Power { c, alpha }) => Tail::Power { c, alpha },
                    Some(Family::Geometric { c, alpha }) => Tail::Geometric { c, alpha },
                },
            },
        }
    }

    pub fn is_summable(&self) -> bool {
        self.family().is_none_or(Family::summable)
    }

    fn require_summable(&self) -> Result<()> {
        match self.family() {
            Some(f) if !f.summable() => Err(Error::NotSummable(f.divergence_reason())),
            _ => Ok(()),
        }
    }

    /// Certified bracket on `F̄_u = Σ_{i>u} fᵢ` with width at most `tol`
    /// whenever that is reachable with at most 2²⁴ explicit terms.
    pub fn tail_sum_with_tol(&self, u: u64, tol: f64) -> Result<Bracket> {
        self.require_summable()?;
        let prefix = self.prefix();
        let len = prefix.len() as u64;
        let explicit: NeumaierSum = prefix.iter().skip(u as usize).copied().collect();
        let head = Bracket::exact(explicit.total());
        match self.family() {
            None => Ok(head),
            Some(f) => Ok(head.add(f.tail(u.max(len), tol)?)),
        }
    }

    /// [`Envelope::tail_sum_with_tol`] at the default width `1e−9`.
    pub fn tail_sum(&self, u: u64) -> Result<Bracket> {
        self.tail_sum_with_tol(u, 1e-9)
    }

    /// Smallest index from which the envelope is nonincreasing and, with
    /// the table exhausted, follows its parametric tail.
    fn monotone_from(&self) -> u64 {
        self.prefix().len() as u64 + 1
    }
}

/// Closed interval `[lo, hi]` of reals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "bracket [{lo}, {hi}] is inverted");
        Bracket { lo, hi }
    }

    pub fn exact(v: f64) -> Self {
        Bracket { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn add(self, other: Bracket) -> Bracket {
        Bracket { lo: self.lo + other.lo, hi: self.hi + other.hi }
    }
}

/// Lower and upper redundancy in bits. `truncation_bits` is the certified
/// slack (tails, approximated coordinates) already included in the gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RedundancyInterval {
    pub lower_bits: f64,
    pub upper_bits: f64,
    pub truncation_bits: f64,
}

impl RedundancyInterval {
    pub fn new(lower_bits: f64, upper_bits: f64, truncation_bits: f64) -> Self {
        RedundancyInterval { lower_bits, upper_bits, truncation_bits }
    }

    pub fn gap_bits(&self) -> f64 {
        self.upper_bits - self.lower_bits
    }
}

/// `l_f = min{l ≥ 1 : Σ_{i≥l} fᵢ < 1}`, resolved with certified tail
/// brackets; when a bracket cannot separate the tail from 1 the larger
/// (certified) index is returned.
pub fn l_f(e: &Envelope) -> Result<u64> {
    e.require_summable()?;
    let below_one = |l: u64| -> Result<bool> { Ok(e.tail_sum_with_tol(l - 1, 1e-13)?.hi < 1.0) };
    if below_one(1)? {
        return Ok(1);
    }
    let mut fail = 1u64;
    let mut pass = 2u64;
    while !below_one(pass)? {
        fail = pass;
        pass = pass.checked_mul(2).ok_or_else(|| Error::InvalidParameter("l_f overflows u64".into()))?;
    }
    while pass - fail > 1 {
        let mid = fail + (pass - fail) / 2;
        if below_one(mid)? {
            pass = mid;
        } else {
            fail = mid;
        }
    }
    Ok(pass)
}

/// Knobs for [`single_letter_interval`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleLetterOptions {
    /// Target for the certified tail slack, in bits.
    pub tolerance_bits: f64,
    /// Largest explicit cutoff tried before reporting failure.
    pub max_cutoff: u64,
    /// Bounded-Poisson means above this use the Stirling bracket.
    pub exact_mean_limit: f64,
}

impl Default for SingleLetterOptions {
    fn default() -> Self {
        SingleLetterOptions { tolerance_bits: 1e-6, max_cutoff: 1 << 26, exact_mean_limit: EXACT_MEAN_LIMIT }
    }
}

/// Result of [`single_letter_interval`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingleLetterBound {
    pub interval: RedundancyInterval,
    pub l_f: u64,
    /// Coordinates `1..=cutoff` were evaluated explicitly.
    pub cutoff: u64,
}

/// Tail contribution of coordinates `i > cutoff`, where every mean
/// `λᵢ = n fᵢ ≤ 1`. Uses `λ − λ² ≤ ln(2 − e^{−λ}) ≤ λ − λ² + λ³` on `[0, 1]`.
fn tail_bits(e: &Envelope, n: f64, cutoff: u64, tol_bits: f64) -> Result<(f64, f64)> {
    let nat_tol = tol_bits / LOG2_E;
    let t1 = e.tail_sum_with_tol(cutoff, nat_tol / (8.0 * n))?;
    let t2 = e.powi(2).tail_sum_with_tol(cutoff, nat_tol / (8.0 * n * n))?;
    let t3 = e.powi(3).tail_sum_with_tol(cutoff, nat_tol / (8.0 * n * n * n))?;
    let upper = n * t1.hi - n * n * t2.lo + n * n * n * t3.hi;
    let lower = (n * t1.lo - n * n * t2.hi).max(0.0);
    Ok((lower * LOG2_E, upper.max(lower) * LOG2_E))
}

/// First cutoff `I ≥ from − 1` with `n·f_{i} ≤ 1` for every `i > I`.
fn small_mean_cutoff(e: &Envelope, n: f64, from: u64) -> u64 {
    let start = e.monotone_from().max(from).max(1);
    let guess = match e.family() {
        None => start - 1,
        Some(Family::Power { c, alpha }) => ((c * n).powf(1.0 / alpha).floor() as u64).max(start - 1),
        Some(Family::Geometric { c, alpha }) => (((c * n).ln() / alpha).floor().max(0.0) as u64).max(start - 1),
    };
    let mut cut = guess;
    while cut + 1 >= start && n * e.eval(cut + 1) > 1.0 {
        cut += 1;
    }
    while cut >= start && n * e.eval(cut) <= 1.0 {
        cut -= 1;
    }
    cut
}

#[derive(Default)]
struct HeadSums {
    upper: NeumaierSum,
    lower: NeumaierSum,
    slack: NeumaierSum,
}

/// `Σ_{i ≥ l_f} R̂(𝒫^{Poi}_{≤ n fᵢ}) ≤ R̂ ≤ Σ_{i ≥ 1} R̂(𝒫^{Poi}_{≤ n fᵢ})`,
/// with coordinates beyond a cutoff bounded in closed form.
pub fn single_letter_interval(e: &Envelope, n: u64, opts: SingleLetterOptions) -> Result<SingleLetterBound> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size n must be >= 1".into()));
    }
    e.require_summable()?;
    let lf = l_f(e)?;
    let nf = n as f64;
    let mut cutoff = small_mean_cutoff(e, nf, lf);
    let (tail_lo, tail_hi) = loop {
        if cutoff > opts.max_cutoff {
            return Err(Error::CutoffNotFound { max_cutoff: opts.max_cutoff, tolerance: opts.tolerance_bits });
        }
        let (lo, hi) = tail_bits(e, nf, cutoff, opts.tolerance_bits)?;
        if hi - lo <= opts.tolerance_bits {
            break (lo, hi);
        }
        cutoff = (cutoff * 2).max(16);
    };

    let parts = par::map_chunks(1..cutoff + 1, 256, |range| {
        let mut acc = HeadSums::default();
        for i in range {
            let lambda = nf * e.eval(i);
            let (lo, hi) = if lambda <= 1.0 {
                let v = small_mean_bits(lambda);
                (v, v)
            } else {
                let class = BoundedPoissonClass::new(lambda).expect("finite mean");
                let b = shtarkov_bounded_poisson_bracket(&class, opts.exact_mean_limit);
                (b.lower_bits(), b.upper_bits())
            };
            acc.upper.add(hi);
            if i >= lf {
                acc.lower.add(lo);
            }
            acc.slack.add(hi - lo);
        }
        acc
    });
    let mut head = HeadSums::default();
    for p in parts {
        head.upper.merge(p.upper);
        head.lower.merge(p.lower);
        head.slack.merge(p.slack);
    }
    let lower = head.lower.total() + tail_lo;
    let upper = head.upper.total() + tail_hi;
    let truncation = head.slack.total() + (tail_hi - tail_lo);
    Ok(SingleLetterBound {
        interval: RedundancyInterval::new(lower, upper.max(lower), truncation),
        l_f: lf,
        cutoff,
    })
}

/// `min_{1 ≤ u ≤ n} [n·F̄_u·log₂e + ((u−1)/2)·log₂n] + 2`, in bits.
pub fn bgg09_upper(e: &Envelope, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size n must be >= 1".into()));
    }
    e.require_summable()?;
    let nf = n as f64;
    let log_n = nf.log2();
    let tol = 1e-7 / (nf * LOG2_E);
    let mut best = f64::INFINITY;
    for u in 1..=n {
        let penalty = (u - 1) as f64 / 2.0 * log_n + 2.0;
        if penalty >= best {
            break;
        }
        let tail = e.tail_sum_with_tol(u, tol)?;
        best = best.min(nf * tail.hi * LOG2_E + penalty);
    }
    Ok(best)
}

/// Closed-form bounds from the power-law and exponential analyses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormBounds {
    pub lower_bits: f64,
    pub upper_bits: f64,
    /// Leading term (exponential envelopes only), `log₂²n / (4α·log₂e)`.
    pub central_bits: Option<f64>,
    /// The same leading term without the `log₂e` factor, `log₂²n / (4α)`.
    pub central_bits_alt: Option<f64>,
    /// The lower bound hides lower-order terms and is not certified at finite n.
    pub lower_is_asymptotic: bool,
}

impl ClosedFormBounds {
    pub fn interval(&self) -> RedundancyInterval {
        RedundancyInterval::new(self.lower_bits, self.upper_bits, 0.0)
    }
}

/// Power-law coefficients `(lower, upper)` multiplying `(cn)^{1/α}`.
pub fn power_law_coefficients(alpha: f64) -> (f64, f64) {
    let lower = alpha * LOG2_E / 2.0 + LOG2_E / (2.0 * (alpha - 1.0)) - (PI / 2.0).log2() / 2.0;
    let upper = alpha * LOG2_E / 2.0 + LOG2_E / (alpha - 1.0) + 3f64.log2();
    (lower, upper)
}

/// `(cn)^{1/α}·[α log e/2 + log e/(2(α−1)) − log(π/2)/2]` (asymptotic) and
/// `(cn)^{1/α}·[α log e/2 + log e/(α−1) + log 3] + 1`.
pub fn power_law_closed_bounds(c: f64, alpha: f64, n: u64) -> Result<ClosedFormBounds> {
    check_param("c", c, true)?;
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::NotSummable(format!("power-law decay with alpha = {alpha} <= 1")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("sample size n must be >= 1".into()));
    }
    let scale = (c * n as f64).powf(1.0 / alpha);
    let (lo, hi) = power_law_coefficients(alpha);
    Ok(ClosedFormBounds {
        lower_bits: scale * lo,
        upper_bits: scale * hi + 1.0,
        central_bits: None,
        central_bits_alt: None,
        lower_is_asymptotic: true,
    })
}

/// Leading term `log₂²n/(4α log₂e)` with the explicit upper slack
/// `[log₂(cn)·log₂(81c) + log₂n·log₂c]/(4α log₂e) + log₂e/(1−e^{−α}) + 1`,
/// and the lower bound `((b − 1 − ℓ₀)/4)·log₂(4cn/π²)` with
/// `b = ln(cn)/α`, `ℓ₀ = max(0, ln(c/(1−e^{−α}))/α)`, clamped at zero.
pub fn exponential_closed_bounds(c: f64, alpha: f64, n: u64) -> Result<ClosedFormBounds> {
    check_param("c", c, true)?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::NotSummable(format!("exponential decay with alpha = {alpha} <= 0")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("exponential closed form needs n >= 2".into()));
    }
    let nf = n as f64;
    let log_n = nf.log2();
    let denom = 4.0 * alpha * LOG2_E;
    let central = log_n * log_n / denom;
    let slack = ((c * nf).log2() * (81.0 * c).log2() + log_n * c.log2()) / denom
        + LOG2_E / -(-alpha).exp_m1()
        + 1.0;
    let b = (c * nf).ln() / alpha;
    let l0 = ((c / -(-alpha).exp_m1()).ln() / alpha).max(0.0);
    let lower = ((b - 1.0 - l0) / 4.0 * (4.0 * c * nf / (PI * PI)).log2()).max(0.0);
    Ok(ClosedFormBounds {
        lower_bits: lower,
        upper_bits: central + slack,
        central_bits: Some(central),
        central_bits_alt: Some(log_n * log_n / (4.0 * alpha)),
        lower_is_asymptotic: true,
    })
}

/// Outcome of [`summability_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summability {
    pub summable: bool,
    /// Certified bracket on `Σ fᵢ` when summable.
    pub total: Option<Bracket>,
    /// Why the sum diverges, when it does.
    pub divergence: Option<String>,
    /// `Σ_{i ≤ 10⁶} fᵢ` as a numerical witness for divergent envelopes.
    pub partial_sum: Option<f64>,
}

/// Decides `Σ fᵢ < ∞`, which is equivalent to finite worst-case (and
/// expected) redundancy of the envelope class.
pub fn summability_check(e: &Envelope) -> Summability {
    match e.family().filter(|f| !f.summable()) {
        None => Summability {
            summable: true,
            total: Some(e.tail_sum(0).expect("summable envelope")),
            divergence: None,
            partial_sum: None,
        },
        Some(f) => Summability {
            summable: false,
            total: None,
            divergence: Some(f.divergence_reason()),
            partial_sum: Some((1..=1_000_000u64).map(|i| e.eval(i)).collect::<NeumaierSum>().total()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poisson_class::shtarkov_bounded_poisson;

    fn zeta2() -> f64 {
        PI * PI / 6.0
    }

    #[test]
    fn eval_examples() {
        assert_eq!(Envelope::power_law(1.0, 2.0).unwrap().eval(4), 0.0625);
        let e = Envelope::exponential(1.0, 2f64.ln()).unwrap();
        assert!((e.eval(3) - 0.125).abs() < 1e-16);
        let t = Envelope::table(vec![0.5, 0.25], Tail::Zero).unwrap();
        assert_eq!((t.eval(1), t.eval(2), t.eval(3)), (0.5, 0.25, 0.0));
        let t = Envelope::table(vec![0.5], Tail::Power { c: 2.0, alpha: 3.0 }).unwrap();
        assert_eq!(t.eval(2), 0.25);
    }

    #[test]
    fn tail_sum_examples() {
        let (c, a) = (0.7, 0.4);
        let e = Envelope::exponential(c, a).unwrap();
        let t = e.tail_sum(5).unwrap();
        assert_eq!(t.lo, t.hi);
        assert!((t.lo - c * (-a * 6.0f64).exp() / (1.0 - (-a).exp())).abs() < 1e-15);

        let e = Envelope::power_law(1.0, 2.0).unwrap();
        let t = e.tail_sum(10).unwrap();
        let partial: f64 = (1..=10).map(|i| 1.0 / (i * i) as f64).sum();
        assert!(t.width() <= 1e-9);
        assert!(t.contains(zeta2() - partial) || (t.lo - (zeta2() - partial)).abs() < 1e-14);
        assert!(t.lo > 1.0 / 11.0 && t.hi < 0.1);

        let e = Envelope::table(vec![0.5, 0.25], Tail::Zero).unwrap();
        assert_eq!(e.tail_sum(2).unwrap(), Bracket::exact(0.0));
        assert_eq!(e.tail_sum(0).unwrap(), Bracket::exact(0.75));
    }

    #[test]
    fn power_tail_brackets_contain_zeta_values() {
        // ζ(3) and ζ(1.5) at 20 digits.
        let cases = [(3.0, 1.202_056_903_159_594_3), (1.5, 2.612_375_348_685_488)];
        for (alpha, zeta) in cases {
            let e = Envelope::power_law(1.0, alpha).unwrap();
            for tol in [1e-6, 1e-10, 1e-12] {
                let t = e.tail_sum_with_tol(0, tol).unwrap();
                assert!(t.lo <= zeta && zeta <= t.hi, "alpha={alpha} tol={tol}: {t:?}");
                assert!(t.width() <= tol * 1.01 || t.width() < 1e-13);
            }
        }
    }

    #[test]
    fn non_summable_is_reported() {
        let e = Envelope::power_law(1.0, 1.0).unwrap();
        assert!(matches!(e.tail_sum(3), Err(Error::NotSummable(_))));
        assert!(matches!(l_f(&e), Err(Error::NotSummable(_))));
        assert!(matches!(bgg09_upper(&e, 10), Err(Error::NotSummable(_))));
        let s = summability_check(&e);
        assert!(!s.summable && s.partial_sum.unwrap() > 14.0);

        let s = summability_check(&Envelope::power_law(1.0, 2.0).unwrap());
        assert!(s.summable && s.total.unwrap().contains(zeta2()));
        let s = summability_check(&Envelope::exponential(2.0, 0.5).unwrap());
        let exact = 2.0 * (-0.5f64).exp() / (1.0 - (-0.5f64).exp());
        assert!((s.total.unwrap().lo - exact).abs() < 1e-14);
        assert!(!summability_check(&Envelope::table(vec![], Tail::Geometric { c: 1.0, alpha: 0.0 }).unwrap()).summable);
    }

    #[test]
    fn l_f_examples() {
        assert_eq!(l_f(&Envelope::exponential(1.0, 1.0).unwrap()).unwrap(), 1);
        assert_eq!(l_f(&Envelope::power_law(1.0, 2.0).unwrap()).unwrap(), 2);
        assert_eq!(l_f(&Envelope::table(vec![0.9, 0.9], Tail::Zero).unwrap()).unwrap(), 2);
        // Tail exactly 1 is not below 1.
        assert_eq!(l_f(&Envelope::table(vec![0.5, 0.5, 0.5], Tail::Zero).unwrap()).unwrap(), 3);
        // Σ_{i≥l} 4/i² < 1 first at l = 5 (1.1353 from 4, 0.8853 from 5).
        assert_eq!(l_f(&Envelope::power_law(4.0, 2.0).unwrap()).unwrap(), 5);
    }

    #[test]
    fn single_coordinate_matches_bounded_poisson() {
        let e = Envelope::table(vec![0.5], Tail::Zero).unwrap();
        let b = single_letter_interval(&e, 2, SingleLetterOptions::default()).unwrap();
        let exact = (2.0 - (-1.0f64).exp()).log2();
        assert_eq!(b.l_f, 1);
        assert!((b.interval.lower_bits - exact).abs() < 1e-15);
        assert!((b.interval.upper_bits - exact).abs() < 1e-15);
        assert_eq!(b.interval.truncation_bits, 0.0);

        for (v, n) in [(0.9, 7u64), (0.25, 40), (1.0, 1000)] {
            let e = Envelope::table(vec![v], Tail::Zero).unwrap();
            let b = single_letter_interval(&e, n, SingleLetterOptions::default()).unwrap();
            let exact = shtarkov_bounded_poisson(&BoundedPoissonClass::new(v * n as f64).unwrap()).bits();
            assert!((b.interval.upper_bits - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn small_means_approach_linear_cap() {
        let e = Envelope::table(vec![1e-7, 2e-7, 3e-7], Tail::Geometric { c: 1e-6, alpha: 1.0 }).unwrap();
        let total = e.tail_sum(0).unwrap().lo;
        let b = single_letter_interval(&e, 1, SingleLetterOptions::default()).unwrap();
        let cap = total * LOG2_E;
        assert!(b.interval.upper_bits <= cap);
        assert!((b.interval.upper_bits / cap - 1.0).abs() < 1e-5);
    }

    #[test]
    fn sandwich_gap_is_bounded() {
        let e = Envelope::power_law(1.0, 2.0).unwrap();
        let n = 1_000_000u64;
        let b = single_letter_interval(&e, n, SingleLetterOptions::default()).unwrap();
        let iv = b.interval;
        assert!(iv.lower_bits <= iv.upper_bits);
        let head = (b.l_f - 1) as f64 * (2.0 + (2.0 * n as f64 / PI).sqrt()).log2();
        assert!(iv.gap_bits() <= head + iv.truncation_bits + 1e-9);
        assert!(iv.lower_bits >= (n as f64).sqrt());
        assert!(iv.truncation_bits <= 1e-6);
    }

    #[test]
    fn bgg09_examples() {
        let e = Envelope::table(vec![1.0], Tail::Zero).unwrap();
        assert!((bgg09_upper(&e, 4).unwrap() - 2.0).abs() < 1e-12);
        let e = Envelope::exponential(1.0, 1.0).unwrap();
        let v = bgg09_upper(&e, 100).unwrap();
        assert!(v.is_finite() && v > 2.0);
        let e = Envelope::power_law(1.0, 2.0).unwrap();
        let n = 10_000;
        let lower = single_letter_interval(&e, n, SingleLetterOptions::default()).unwrap().interval.lower_bits;
        assert!(bgg09_upper(&e, n).unwrap() >= lower);
    }

    #[test]
    fn bgg09_matches_brute_force_scan() {
        let e = Envelope::exponential(1.0, 1.0).unwrap();
        let n = 100u64;
        let brute = (1..=n)
            .map(|u| {
                let tail = (-(u as f64 + 1.0)).exp() / (1.0 - (-1.0f64).exp());
                n as f64 * tail * LOG2_E + (u - 1) as f64 / 2.0 * (n as f64).log2() + 2.0
            })
            .fold(f64::INFINITY, f64::min);
        assert!((bgg09_upper(&e, n).unwrap() - brute).abs() < 1e-7);
    }

    #[test]
    fn power_law_closed_form_examples() {
        let (lo, hi) = power_law_coefficients(2.0);
        assert!((lo - 1.838_294_5).abs() < 1e-7, "{lo}");
        assert!((hi - 4.470_352_6).abs() < 1e-7, "{hi}");
        assert!(hi / lo <= 4.0 && (hi / lo - 2.43).abs() < 0.01);
        let b = power_law_closed_bounds(1.0, 2.0, 1_000_000).unwrap();
        assert!((b.lower_bits - 1838.2945).abs() < 1e-3);
        assert!((b.upper_bits - 4471.3526).abs() < 1e-3);
        let ratio = |n: u64| {
            let big = power_law_closed_bounds(1.0, 2.0, 4 * n).unwrap().upper_bits;
            big / power_law_closed_bounds(1.0, 2.0, n).unwrap().upper_bits
        };
        assert!((ratio(1 << 30) - 2.0).abs() < 1e-4);
        assert!(power_law_closed_bounds(1.0, 1.0, 10).is_err());
    }

    #[test]
    fn exponential_closed_form_examples() {
        let n = 1u64 << 20;
        let b = exponential_closed_bounds(1.0, 2f64.ln(), n).unwrap();
        assert!((b.central_bits.unwrap() - 100.0).abs() < 1e-10);
        assert!((b.central_bits_alt.unwrap() - 400.0 / (4.0 * 2f64.ln())).abs() < 1e-10);
        // c = 1: only the log 81 part of the first slack term survives.
        let alpha = 0.7;
        let b = exponential_closed_bounds(1.0, alpha, n).unwrap();
        let expected = 20.0 * 81f64.log2() / (4.0 * alpha * LOG2_E) + LOG2_E / (1.0 - (-alpha).exp()) + 1.0;
        assert!((b.upper_bits - b.central_bits.unwrap() - expected).abs() < 1e-10);
        assert!(b.lower_bits <= b.central_bits.unwrap());
        let c1 = exponential_closed_bounds(1.0, alpha, n).unwrap().central_bits.unwrap();
        let c2 = exponential_closed_bounds(1.0, alpha, 2 * n).unwrap().central_bits.unwrap();
        assert!((c2 - c1 - (2.0 * 20.0 + 1.0) / (4.0 * alpha * LOG2_E)).abs() < 1e-10);
        assert!(exponential_closed_bounds(1.0, 0.0, n).is_err());
    }

    #[test]
    fn json_documents() {
        let e = Envelope::from_json(r#"{"kind":"power_law","c":1,"alpha":2}"#).unwrap();
        assert_eq!(e, Envelope::PowerLaw { c: 1.0, alpha: 2.0 });
        let e = Envelope::from_json(r#"{"kind":"table","values":[0.5,0.25],"tail":{"kind":"geometric","c":1,"alpha":0.5}}"#).unwrap();
        assert_eq!(e, Envelope::Table { values: vec![0.5, 0.25], tail: Tail::Geometric { c: 1.0, alpha: 0.5 } });
        assert_eq!(Envelope::from_json(&e.to_json()).unwrap(), e);
        assert!(matches!(Envelope::from_json(r#"{"kind":"power_law","c":1,"alpha":2,"beta":3}"#), Err(Error::Parse(_))));
        assert!(matches!(Envelope::from_json(r#"{"kind":"power_law","c":1,"alpha":2,"values":[1]}"#), Err(Error::Parse(_))));
        assert!(matches!(Envelope::from_json(r#"{"kind":"table","values":[1],"tail":{"kind":"zero","c":1}}"#), Err(Error::Parse(_))));
        assert!(Envelope::from_json(r#"{"kind":"zipf","c":1}"#).is_err());
        assert!(Envelope::from_json(r#"{"kind":"exponential","c":-1,"alpha":2}"#).is_err());
        assert_eq!(
            Envelope::from_json(r#"{"kind":"table","values":[0.5]}"#).unwrap(),
            Envelope::Table { values: vec![0.5], tail: Tail::Zero }
        );
    }
}
