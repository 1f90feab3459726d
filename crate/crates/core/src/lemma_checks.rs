//! Brute-force checks of the structural redundancy lemmas, and seeded
//! batteries that run them (plus the Poisson and envelope results) on many
//! random instances.
//!
//! Every check reports a signed `worst_violation`: the largest amount by
//! which an inequality (or the gap of an equality) is exceeded. A check
//! passes when that value is at most its tolerance.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classes::{
    product_class, shtarkov_iid_sequences, shtarkov_iid_types, shtarkov_sum_explicit, Budget, FiniteClass,
    FiniteDistribution,
};
use crate::envelope::{
    bgg09_upper, power_law_coefficients, single_letter_interval, Envelope, SingleLetterOptions,
};
use crate::error::{Error, Result};
use crate::iid_small::{iid_exact, iid_upper_bound, SmallAlphabetQuery};
use crate::numerics::{poisson_tail_bound, poisson_cdf, poisson_upper_tail, PoissonParam};
use crate::par;
use crate::poisson_class::{closed_form_bounds_bounded_poisson, shtarkov_bounded_poisson, BoundedPoissonClass};
use crate::poissonization::{
    poisson_lower_from_fixed, poisson_type_redundancy_check, poissonized_shtarkov_auto, verify_conditional_length,
    verify_multiplicity_independence, BaseClass, PoissonizedClassHandle, DEFAULT_RESIDUAL_TOLERANCE,
};

/// Slack for inequalities (bits) and relative gap for equalities.
pub const TOLERANCE: f64 = 1e-10;

/// Random instances per check in a battery.
pub const BATTERY_INSTANCES: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub instances_tested: u64,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// The first failing instance, or else the worst one, printed verbatim.
    pub offending: Option<String>,
}

impl CheckReport {
    /// Folds per-instance `(violation, description)` pairs in order.
    pub fn from_instances<I>(name: &str, tolerance: f64, instances: I) -> Self
    where
        I: IntoIterator<Item = (f64, String)>,
    {
        let mut count = 0;
        let mut worst = f64::NEG_INFINITY;
        let mut worst_desc = None;
        let mut first_fail = None;
        for (v, desc) in instances {
            count += 1;
            // NaN counts as a failure.
            let v = if v.is_nan() { f64::INFINITY } else { v };
            if v > tolerance && first_fail.is_none() {
                first_fail = Some(desc.clone());
            }
            if v > worst {
                worst = v;
                worst_desc = Some(desc);
            }
        }
        let passed = worst <= tolerance;
        CheckReport {
            name: name.to_string(),
            instances_tested: count,
            worst_violation: worst,
            tolerance,
            passed,
            offending: if passed { worst_desc } else { first_fail },
        }
    }

    fn single(name: &str, tolerance: f64, violation: f64, desc: String) -> Self {
        Self::from_instances(name, tolerance, [(violation, desc)])
    }

    /// Merges reports of the same check, keeping the first failure.
    fn merge(name: &str, reports: Vec<CheckReport>) -> Self {
        let tolerance = reports.first().map_or(TOLERANCE, |r| r.tolerance);
        let mut merged = Self::from_instances(name, tolerance, std::iter::empty());
        merged.worst_violation = f64::NEG_INFINITY;
        for r in reports {
            merged.instances_tested += r.instances_tested;
            if !r.passed && merged.passed {
                merged.passed = false;
                merged.offending = r.offending.clone();
            }
            if r.worst_violation > merged.worst_violation {
                merged.worst_violation = r.worst_violation;
                if merged.passed {
                    merged.offending = r.offending;
                }
            }
        }
        merged
    }
}

fn bits(c: &FiniteClass) -> Result<f64> {
    Ok(shtarkov_sum_explicit(c)?.bits())
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `R̂(sub) ≤ R̂(c)` for `sub ⊆ c`.
pub fn check_subset(c: &FiniteClass, sub: &FiniteClass) -> Result<CheckReport> {
    if let Some(i) = sub.members().iter().position(|p| !c.contains(p)) {
        return Err(Error::NotSubset(i));
    }
    let v = bits(sub)? - bits(c)?;
    Ok(CheckReport::single("subset", TOLERANCE, v, format!("class={c:?} sub={sub:?}")))
}

/// `max R̂(𝒫ᵢ) ≤ R̂(∪𝒫ᵢ) ≤ max R̂(𝒫ᵢ) + log₂(#parts)`.
pub fn check_union(parts: &[FiniteClass]) -> Result<CheckReport> {
    let union = FiniteClass::union(parts)?;
    let u = bits(&union)?;
    let max = parts.iter().map(bits).collect::<Result<Vec<_>>>()?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let v = (max - u).max(u - max - (parts.len() as f64).log2());
    Ok(CheckReport::single("union", TOLERANCE, v, format!("parts={parts:?}")))
}

/// `R̂(f(𝒫)) ≤ R̂(𝒫)`, with equality when `f` is one-to-one.
pub fn check_function(c: &FiniteClass, mapping: &[usize], image_size: usize) -> Result<CheckReport> {
    let image = c.map_symbols(mapping, image_size)?;
    let (bi, bc) = (bits(&image)?, bits(c)?);
    let mut seen = vec![false; image_size];
    let injective = mapping.iter().all(|&y| !std::mem::replace(&mut seen[y], true));
    let v = if injective { relative_gap(bi, bc).max(bi - bc) } else { bi - bc };
    Ok(CheckReport::single("function", TOLERANCE, v, format!("class={c:?} mapping={mapping:?}")))
}

/// `R̂(𝒫_X × 𝒫_Y) = R̂(𝒫_X) + R̂(𝒫_Y)`, and for a sub-class of the product,
/// its redundancy is at most the sum of its marginals' redundancies.
pub fn check_product(cx: &FiniteClass, cy: &FiniteClass, budget: Budget) -> Result<CheckReport> {
    let prod = product_class(cx, cy, budget)?;
    let (bp, bx, by) = (bits(&prod)?, bits(cx)?, bits(cy)?);
    let equality = (bp - bx - by).abs();
    let keep = prod.len().div_ceil(2);
    let sub = FiniteClass::new(prod.members()[..keep].to_vec())?;
    let (mx, my) = sub.marginals(cx.alphabet_size(), cy.alphabet_size())?;
    let marginal = bits(&sub)? - bits(&mx)? - bits(&my)?;
    Ok(CheckReport::single("product", TOLERANCE, equality.max(marginal), format!("x={cx:?} y={cy:?}")))
}

/// Monotonicity `R̂(𝒟_k^{n+1}) ≥ R̂(𝒟_kⁿ)` and subadditivity
/// `R̂(𝒟_k^{n₁+n₂}) ≤ R̂(𝒟_k^{n₁}) + R̂(𝒟_k^{n₂})` for lengths up to `n_max`.
pub fn check_monotone_subadditive(k: usize, n_max: u64, budget: Budget) -> Result<CheckReport> {
    let r: Vec<f64> = (0..=n_max).map(|n| Ok(shtarkov_iid_types(k, n, budget)?.bits())).collect::<Result<_>>()?;
    let mut instances = Vec::new();
    for n in 0..n_max as usize {
        instances.push((r[n] - r[n + 1], format!("monotone k={k} n={n}")));
    }
    for total in 2..=n_max as usize {
        for n1 in 1..total {
            instances.push((r[total] - r[n1] - r[total - n1], format!("subadditive k={k} n1={n1} n2={}", total - n1)));
        }
    }
    Ok(CheckReport::from_instances("monotone_subadditive", TOLERANCE, instances))
}

/// Sequence and type enumerations give the same `S(𝒟_kⁿ)` for `n ≤ n_max`.
pub fn check_type_equality(k: usize, n_max: u64, budget: Budget) -> Result<CheckReport> {
    let instances = (0..=n_max)
        .map(|n| {
            let t = shtarkov_iid_types(k, n, budget)?.shtarkov();
            let s = shtarkov_iid_sequences(k, n, budget)?.shtarkov();
            Ok((relative_gap(t, s), format!("k={k} n={n} types={t} sequences={s}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport::from_instances("type_equality", TOLERANCE, instances))
}

/// Which battery to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    All,
    Preliminary,
    Poisson,
    Envelope,
}

/// Generator for instance `index` of check `check`: ChaCha8 seeded with
/// `seed`, on stream `check·2³² + index`.
fn instance_rng(seed: u64, check: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((check << 32) | index);
    rng
}

/// Normalized independent uniform(0, 1] coordinates.
pub fn random_distribution(rng: &mut impl Rng, k: usize) -> FiniteDistribution {
    let w: Vec<f64> = (0..k).map(|_| 1.0 - rng.gen::<f64>()).collect();
    FiniteDistribution::from_weights(&w).expect("positive weights")
}

pub fn random_class(rng: &mut impl Rng, members: usize, k: usize) -> FiniteClass {
    FiniteClass::new((0..members).map(|_| random_distribution(rng, k)).collect()).expect("nonempty class")
}

/// Runs `f` on `BATTERY_INSTANCES` seeded instances and merges in order.
fn battery<F>(name: &str, seed: u64, check: u64, f: F) -> Result<CheckReport>
where
    F: Fn(&mut ChaCha8Rng) -> Result<CheckReport> + Sync + Send,
{
    let reports = par::map_indices(BATTERY_INSTANCES, |i| f(&mut instance_rng(seed, check, i)));
    Ok(CheckReport::merge(name, reports.into_iter().collect::<Result<_>>()?))
}

fn preliminary(seed: u64, budget: Budget) -> Result<Vec<CheckReport>> {
    let mut out = vec![
        battery("subset", seed, 1, |rng| {
            let c = random_class(rng, 5, 4);
            let a = rng.gen_range(0..5);
            let b = (a + rng.gen_range(1..5)) % 5;
            let sub = FiniteClass::new(vec![c.members()[a].clone(), c.members()[b].clone()])?;
            check_subset(&c, &sub)
        })?,
        battery("union", seed, 2, |rng| {
            let parts: Vec<FiniteClass> = (0..3).map(|_| {
                let m = rng.gen_range(1..=3);
                random_class(rng, m, 4)
            }).collect();
            check_union(&parts)
        })?,
        battery("function", seed, 3, |rng| {
            let c = random_class(rng, 4, 4);
            let merge: Vec<usize> = (0..4).map(|_| rng.gen_range(0..3)).collect();
            let mut perm: Vec<usize> = (0..4).collect();
            for i in (1..4).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let a = check_function(&c, &merge, 3)?;
            let b = check_function(&c, &perm, 4)?;
            Ok(CheckReport::merge("function", vec![a, b]))
        })?,
        battery("product", seed, 4, |rng| {
            let cx = random_class(rng, 3, 3);
            let cy = random_class(rng, 3, 4);
            check_product(&cx, &cy, budget)
        })?,
    ];
    let mono = (1..=3).map(|k| check_monotone_subadditive(k, 8, budget)).collect::<Result<Vec<_>>>()?;
    out.push(CheckReport::merge("monotone_subadditive", mono));
    let types = (1..=3).map(|k| check_type_equality(k, 6, budget)).collect::<Result<Vec<_>>>()?;
    out.push(CheckReport::merge("type_equality", types));
    Ok(out)
}

fn poisson(seed: u64, budget: Budget) -> Result<Vec<CheckReport>> {
    let grid: Vec<(usize, u64)> = [2usize, 3].iter().flat_map(|&k| (1..=15u64).map(move |n| (k, n))).collect();
    let rows = par::map_slice(&grid, |&(k, n)| -> Result<(f64, f64, String)> {
        let fixed = shtarkov_iid_types(k, n, budget)?;
        let h = PoissonizedClassHandle::simplex(k, n as f64)?;
        let poi = poissonized_shtarkov_auto(&h, budget, DEFAULT_RESIDUAL_TOLERANCE)?;
        let half = fixed.shtarkov() / 2.0 - poi.shtarkov.lo;
        let transfer = fixed.bits() - (poi.interval.upper_bits + 1.0);
        Ok((half, transfer, format!("k={k} n={n} S_fixed={} S_poisson={:?}", fixed.shtarkov(), poi.shtarkov)))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut out = vec![
        CheckReport::from_instances("poisson_half_inequality", TOLERANCE, rows.iter().map(|r| (r.0, r.2.clone()))),
        CheckReport::from_instances("poisson_transfer", TOLERANCE, rows.iter().map(|r| (r.1, r.2.clone()))),
    ];

    let mut lower = Vec::new();
    for n in [16u64, 32, 64, 128] {
        if let Some(t) = poisson_lower_from_fixed(&BaseClass::Simplex { k: 2 }, n, budget)? {
            let poi = t.poissonized.map_or(0.0, |iv| iv.lower_bits);
            lower.push((poi - t.bound_bits, format!("k=2 n={n} n1={} fixed={} poisson={poi}", t.n1, t.bound_bits)));
        }
    }
    out.push(CheckReport::from_instances("poisson_lower_transfer", TOLERANCE, lower));

    let mut types = Vec::new();
    for k in [1usize, 2] {
        for n in [0.5, 2.0, 5.0] {
            let r = poisson_type_redundancy_check(k, n, 6, budget)?;
            types.push((r.relative_difference, format!("k={k} n={n} types={} sequences={}", r.via_types, r.via_sequences)));
        }
    }
    out.push(CheckReport::from_instances("poisson_type_equality", TOLERANCE, types));

    out.push(battery("poisson_conditional_length", seed, 5, |rng| {
        let k = rng.gen_range(1..=3);
        let p = random_distribution(rng, k);
        let n = rng.gen_range(0.1..20.0);
        let len = rng.gen_range(0..=4);
        let r = verify_conditional_length(&p, n, len, budget)?;
        Ok(CheckReport::single("poisson_conditional_length", 1e-12, r.max_abs_error, format!("p={p:?} n={n} n'={len}")))
    })?);

    // Each Monte-Carlo run is held to 4 standard errors; the violation is
    // reported in those units relative to the threshold.
    let mc = [(vec![0.5, 0.5], 8.0), (vec![0.9, 0.1], 20.0), (vec![0.2, 0.3, 0.5], 5.0)];
    let mc_reports = mc
        .iter()
        .enumerate()
        .map(|(i, (probs, n))| {
            let p = FiniteDistribution::new(probs.clone())?;
            let r = verify_multiplicity_independence(&p, *n, 20_000, seed.wrapping_add(i as u64))?;
            Ok(CheckReport::single("poisson_multiplicity_independence", 0.0, r.worst_sigma - 4.0, format!("p={probs:?} n={n} means={:?}", r.means)))
        })
        .collect::<Result<Vec<_>>>()?;
    out.push(CheckReport::merge("poisson_multiplicity_independence", mc_reports));
    Ok(out)
}

fn envelope(seed: u64, budget: Budget) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    out.push(battery("bounded_poisson_small_mean", seed, 6, |rng| {
        let lambda = 1.0 - rng.gen::<f64>();
        let s = shtarkov_bounded_poisson(&BoundedPoissonClass::new(lambda)?).shtarkov();
        Ok(CheckReport::single("bounded_poisson_small_mean", 1e-12, (s - (2.0 - (-lambda).exp())).abs(), format!("lambda={lambda}")))
    })?);

    let lambdas = [1.5, 2.5, 10.0, 100.0, 1e4];
    out.push(CheckReport::from_instances(
        "bounded_poisson_bracket",
        TOLERANCE,
        lambdas.iter().map(|&l| {
            let c = BoundedPoissonClass::new(l).expect("valid mean");
            let exact = shtarkov_bounded_poisson(&c).bits();
            let b = closed_form_bounds_bounded_poisson(&c);
            ((b.lower_bits - exact).max(exact - b.upper_bits), format!("lambda={l}"))
        }),
    ));

    let mut tails = Vec::new();
    for lambda in [0.5, 1.0, 5.0, 20.0] {
        let p = PoissonParam::new(lambda)?;
        let top = (lambda + 10.0 * lambda.sqrt()).floor() as u64;
        for x in 0..=top {
            let xf = x as f64;
            let exact = if xf >= lambda {
                if x == 0 { 1.0 } else { poisson_upper_tail(p, x - 1) }
            } else {
                poisson_cdf(p, x).linear()
            };
            tails.push((exact - poisson_tail_bound(p, xf)?, format!("lambda={lambda} x={x}")));
        }
    }
    out.push(CheckReport::from_instances("poisson_tail_bound", TOLERANCE, tails));

    let mut sandwich = Vec::new();
    for e in [Envelope::power_law(1.0, 2.0)?, Envelope::exponential(1.0, 1.0)?] {
        for n in [1_000u64, 10_000, 100_000, 1_000_000] {
            let b = single_letter_interval(&e, n, SingleLetterOptions::default())?;
            let iv = b.interval;
            let head = (b.l_f - 1) as f64 * (2.0 + (2.0 * n as f64 / PI).sqrt()).log2();
            let bgg = bgg09_upper(&e, n)?;
            let v = (iv.lower_bits - iv.upper_bits).max(iv.gap_bits() - head - iv.truncation_bits).max(iv.lower_bits - bgg);
            sandwich.push((v, format!("envelope={} n={n} interval={iv:?} bgg09={bgg}", e.to_json())));
        }
    }
    out.push(CheckReport::from_instances("envelope_sandwich", 1e-9, sandwich));

    out.push(CheckReport::from_instances(
        "power_law_factor_four",
        0.0,
        [1.5, 2.0, 3.0].iter().map(|&a| {
            let (lo, hi) = power_law_coefficients(a);
            (hi / lo - 4.0, format!("alpha={a}"))
        }),
    ));

    let mut chain = Vec::new();
    for k in 1..=4 {
        for n in 1..=10 {
            let q = SmallAlphabetQuery::new(k, n)?;
            chain.push((iid_exact(q, budget)?.bits() - iid_upper_bound(q), format!("k={k} n={n}")));
        }
    }
    out.push(CheckReport::from_instances("iid_upper_chain", TOLERANCE, chain));
    Ok(out)
}

/// Runs a battery. Reports come back in a fixed order for a given suite.
pub fn run_suite(suite: Suite, seed: u64, budget: Budget) -> Result<Vec<CheckReport>> {
    match suite {
        Suite::Preliminary => preliminary(seed, budget),
        Suite::Poisson => poisson(seed, budget),
        Suite::Envelope => envelope(seed, budget),
        Suite::All => {
            let mut all = preliminary(seed, budget)?;
            all.extend(poisson(seed, budget)?);
            all.extend(envelope(seed, budget)?);
            Ok(all)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm(probs: &[f64]) -> FiniteDistribution {
        FiniteDistribution::new(probs.to_vec()).unwrap()
    }

    #[test]
    fn subset_examples() {
        let c = FiniteClass::binary_grid(4).unwrap();
        let r = check_subset(&c, &c).unwrap();
        assert!(r.passed && r.worst_violation.abs() < 1e-15);
        let one = FiniteClass::singleton(c.members()[1].clone());
        let r = check_subset(&c, &one).unwrap();
        assert!(r.passed && r.worst_violation < 0.0);
        let outside = FiniteClass::singleton(pm(&[0.33, 0.67]));
        assert_eq!(check_subset(&c, &outside), Err(Error::NotSubset(0)));
    }

    #[test]
    fn union_examples() {
        let c = FiniteClass::binary_grid(3).unwrap();
        let r = check_union(std::slice::from_ref(&c)).unwrap();
        assert!(r.passed && r.worst_violation.abs() < 1e-15);
        let singles: Vec<FiniteClass> = (0..4).map(|i| FiniteClass::singleton(FiniteDistribution::point_mass(4, i).unwrap())).collect();
        let u = bits(&FiniteClass::union(&singles).unwrap()).unwrap();
        assert!((u - 2.0).abs() < 1e-15);
        assert!(check_union(&singles).unwrap().worst_violation.abs() < 1e-15);
    }

    #[test]
    fn function_examples() {
        let c = FiniteClass::new(vec![pm(&[0.2, 0.3, 0.5]), pm(&[0.6, 0.1, 0.3])]).unwrap();
        let r = check_function(&c, &[0, 1, 2], 3).unwrap();
        assert!(r.passed && r.worst_violation < 1e-15);
        let image = c.map_symbols(&[0, 0, 0], 1).unwrap();
        assert_eq!(bits(&image).unwrap(), 0.0);
        assert!(check_function(&c, &[0, 0, 0], 1).unwrap().passed);
        assert!(check_function(&c, &[1, 1, 0], 2).unwrap().passed);
    }

    #[test]
    fn product_examples() {
        let single = FiniteClass::singleton(pm(&[0.5, 0.5]));
        let grid = FiniteClass::binary_grid(3).unwrap();
        assert!(check_product(&single, &grid, Budget::default()).unwrap().passed);
        let a = FiniteClass::point_masses(2).unwrap();
        let b = FiniteClass::point_masses(3).unwrap();
        let prod = product_class(&a, &b, Budget::default()).unwrap();
        assert!((bits(&prod).unwrap() - 6f64.log2()).abs() < 1e-14);
        assert!(check_product(&a, &b, Budget::default()).unwrap().passed);
    }

    #[test]
    fn monotone_and_types() {
        let b = Budget::default();
        let r = check_monotone_subadditive(1, 5, b).unwrap();
        assert!(r.passed && r.worst_violation == 0.0);
        assert!(check_monotone_subadditive(2, 8, b).unwrap().passed);
        assert!(check_monotone_subadditive(3, 6, b).unwrap().passed);
        assert!(check_type_equality(2, 6, b).unwrap().passed);
        assert!(check_type_equality(1, 4, b).unwrap().passed);
        assert!(check_type_equality(2, 30, Budget(1000)).is_err());
    }

    #[test]
    fn report_keeps_first_failure() {
        let r = CheckReport::from_instances("x", 0.1, [(0.0, "a".into()), (0.5, "b".into()), (0.9, "c".into())]);
        assert!(!r.passed);
        assert_eq!((r.worst_violation, r.offending.as_deref()), (0.9, Some("b")));
        let r = CheckReport::from_instances("x", 0.1, [(f64::NAN, "nan".into())]);
        assert!(!r.passed);
    }

    #[test]
    fn preliminary_battery_is_deterministic() {
        let a = run_suite(Suite::Preliminary, 42, Budget::default()).unwrap();
        let b = run_suite(Suite::Preliminary, 42, Budget::default()).unwrap();
        assert_eq!(a, b);
        for r in &a {
            assert!(r.passed, "{r:?}");
        }
        assert_eq!(a.iter().find(|r| r.name == "subset").unwrap().instances_tested, 100);
    }
}
