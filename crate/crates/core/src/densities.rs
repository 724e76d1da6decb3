//! Local matrix densities: counts of g ∈ M₂(Z/ℓ^R) with prescribed
//! determinant, trace and congruence level, the archimedean factor and the
//! truncated probability product over primes.
//!
//! The fast counter fixes the trace and writes g = [[x, y], [z, t−x]], so the
//! determinant condition becomes yz ≡ x(t−x) − det. The number of pairs
//! (y, z) mod ℓ^k with yz ≡ c depends only on e = v_ℓ(c):
//! (e+1)·φ(ℓ^k) for e < k, and k·φ(ℓ^k) + ℓ^k for c ≡ 0.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use parking_lot::RwLock;

use crate::arith::{is_prime, pow_mod, primes_up_to, valuation};
use crate::curves::hasse_interval;
use crate::error::{budget, domain, invariant, Error, Result};
use crate::groups::GroupShape;

/// Normalization of the archimedean factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FInftyNorm {
    /// √(4p − t²)/(pπ), which integrates to 2 over the Hasse interval.
    Paper,
    /// Half of `Paper`; the trace probabilities then sum to 1.
    #[default]
    Half,
}

impl FromStr for FInftyNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(FInftyNorm::Paper),
            "half" => Ok(FInftyNorm::Half),
            _ => Err(domain!(
                "unknown normalization {s:?} (expected paper or half)"
            )),
        }
    }
}

impl fmt::Display for FInftyNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FInftyNorm::Paper => "paper",
            FInftyNorm::Half => "half",
        })
    }
}

impl FInftyNorm {
    pub fn scale(self) -> f64 {
        match self {
            FInftyNorm::Paper => 1.0,
            FInftyNorm::Half => 0.5,
        }
    }
}

pub fn f_infty(t: i64, p: u64, norm: FInftyNorm) -> f64 {
    let p = p as f64;
    let t = t as f64;
    let disc = 4.0 * p - t * t;
    if disc <= 0.0 {
        return 0.0;
    }
    norm.scale() * disc.sqrt() / (p * std::f64::consts::PI)
}

/// Largest modulus ℓ^R accepted by the public density queries.
pub fn modulus_budget(ell: u64) -> u64 {
    match ell {
        2 => 128,
        3 => 81,
        _ => ell.saturating_pow(3),
    }
}

fn check_budget(ell: u64, r: u32) -> Result<()> {
    let m = ell.checked_pow(r).unwrap_or(u64::MAX);
    if m > modulus_budget(ell) {
        return Err(budget!(
            "modulus {ell}^{r} exceeds the density budget {}",
            modulus_budget(ell)
        ));
    }
    Ok(())
}

/// Work limit for a single enumeration, in visited tuples.
const WORK_LIMIT: u128 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CountMethod {
    /// Trace fixed, pair counts in closed form: ℓ^(R−level) steps.
    #[default]
    Fast,
    /// Loop over (g11, g12, g21), solving the determinant for g22 when g11 is a unit.
    Solve,
    /// All ℓ^(4R) matrices.
    Brute,
}

fn check_prime_ell(ell: u64) -> Result<()> {
    if !is_prime(ell) {
        return Err(domain!("{ell} is not prime"));
    }
    Ok(())
}

fn modulus(ell: u64, r: u32) -> Result<u64> {
    ell.checked_pow(r)
        .filter(|&m| m <= 1 << 31)
        .ok_or_else(|| budget!("modulus {ell}^{r} is too large"))
}

fn residue(x: i128, m: u64) -> u64 {
    x.rem_euclid(m as i128) as u64
}

/// #{(y, z) mod ℓ^k : yz ≡ c}.
fn pair_count(ell: u64, k: u32, c: u64) -> u128 {
    if k == 0 {
        return 1;
    }
    let m = ell.pow(k) as u128;
    let phi = m - m / ell as u128;
    let c = c % m as u64;
    if c == 0 {
        return k as u128 * phi + m;
    }
    let e = valuation(c as i128, ell).unwrap() as u128;
    (e + 1) * phi
}

fn count_fast(ell: u64, r: u32, det: u64, trace: u64, level: u32) -> u128 {
    let m = ell.pow(r);
    let step = ell.pow(level);
    let (first, count) = if level == 0 {
        (0, m)
    } else {
        (1 % m, m / step)
    };
    if level > 0 && (trace + m - 2 % m) % step != 0 {
        return 0;
    }
    let mm = m as u128;
    let (det, trace) = (det as u128, trace as u128);
    let ell = ell as u128;
    let mut total = 0u128;
    for i in 0..count as u128 {
        let x = (first as u128 + i * step as u128) % mm;
        let c = (x * ((trace + mm - x) % mm) % mm + mm - det) % mm;
        if 2 * level >= r {
            if c == 0 {
                total += ell.pow(2 * (r - level));
            }
        } else {
            let sub = ell.pow(2 * level);
            if c % sub == 0 {
                total += sub * pair_count(ell as u64, r - 2 * level, (c / sub) as u64);
            }
        }
    }
    total
}

fn is_level(g: u64, ell_level: u64, one: bool) -> bool {
    let target = if one { 1 % ell_level } else { 0 };
    g % ell_level == target
}

fn histogram_solve(ell: u64, r: u32, det: u64, level: u32) -> Vec<u128> {
    let m = ell.pow(r);
    let step = ell.pow(level);
    let mut hist = vec![0u128; m as usize];
    let inverse = |a: u64| pow_mod(a, (m / ell) * (ell - 1) - 1, m);
    for a in 0..m {
        if !is_level(a, step, true) {
            continue;
        }
        for b in (0..m).step_by(step as usize) {
            for c in (0..m).step_by(step as usize) {
                let target = (det + b * c) % m;
                if a % ell != 0 {
                    let d = target * inverse(a) % m;
                    if is_level(d, step, true) {
                        hist[((a + d) % m) as usize] += 1;
                    }
                } else {
                    for d in 0..m {
                        if is_level(d, step, true) && a * d % m == target {
                            hist[((a + d) % m) as usize] += 1;
                        }
                    }
                }
            }
        }
    }
    hist
}

fn histogram_brute(ell: u64, r: u32, det: u64, level: u32) -> Vec<u128> {
    let m = ell.pow(r);
    let step = ell.pow(level);
    let mut hist = vec![0u128; m as usize];
    for a in 0..m {
        for b in 0..m {
            for c in 0..m {
                for d in 0..m {
                    let at_level = is_level(a, step, true)
                        && is_level(d, step, true)
                        && is_level(b, step, false)
                        && is_level(c, step, false);
                    if at_level && (a * d + m * m - b * c) % m == det {
                        hist[((a + d) % m) as usize] += 1;
                    }
                }
            }
        }
    }
    hist
}

/// Counts g ∈ M₂(Z/ℓ^R) with det g ≡ det, tr g ≡ trace and g ≡ 1 mod ℓ^level.
pub fn count_matrices(
    ell: u64,
    r: u32,
    det: i64,
    trace: i64,
    level: u32,
    method: CountMethod,
) -> Result<u128> {
    check_prime_ell(ell)?;
    if level > r {
        return Err(domain!("congruence level {level} exceeds R = {r}"));
    }
    let m = modulus(ell, r)?;
    let (det, trace) = (residue(det as i128, m), residue(trace as i128, m));
    match method {
        CountMethod::Fast => {
            let work = (m / ell.pow(level)) as u128;
            if work > WORK_LIMIT {
                return Err(budget!("fast count mod {ell}^{r} needs {work} steps"));
            }
            let key = CacheKey {
                ell,
                r,
                trace,
                level,
                det,
            };
            Ok(DensityCache::global().get_or_insert(key, || count_fast(ell, r, det, trace, level)))
        }
        CountMethod::Solve | CountMethod::Brute => {
            Ok(trace_histogram(ell, r, det as i64, level, method)?[trace as usize])
        }
    }
}

/// Counts with det g ≡ det and g ≡ 1 mod ℓ^level, indexed by tr g mod ℓ^R.
pub fn trace_histogram(
    ell: u64,
    r: u32,
    det: i64,
    level: u32,
    method: CountMethod,
) -> Result<Vec<u128>> {
    check_prime_ell(ell)?;
    if level > r {
        return Err(domain!("congruence level {level} exceeds R = {r}"));
    }
    let m = modulus(ell, r)?;
    let det = residue(det as i128, m);
    let free = (m / ell.pow(level)) as u128;
    let work = match method {
        CountMethod::Fast => free * free,
        CountMethod::Solve => free.pow(3),
        CountMethod::Brute => (m as u128).pow(4),
    };
    if work > WORK_LIMIT {
        return Err(budget!(
            "{method:?} histogram mod {ell}^{r} needs {work} steps"
        ));
    }
    Ok(match method {
        CountMethod::Fast => (0..m)
            .map(|t| {
                let key = CacheKey {
                    ell,
                    r,
                    trace: t,
                    level,
                    det,
                };
                DensityCache::global().get_or_insert(key, || count_fast(ell, r, det, t, level))
            })
            .collect(),
        CountMethod::Solve => histogram_solve(ell, r, det, level),
        CountMethod::Brute => histogram_brute(ell, r, det, level),
    })
}

/// Memo key: (ℓ, R, trace mod ℓ^R, level, det mod ℓ^R).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub ell: u64,
    pub r: u32,
    pub trace: u64,
    pub level: u32,
    pub det: u64,
}

/// Shared memo of fast matrix counts.
#[derive(Debug, Default)]
pub struct DensityCache {
    map: RwLock<HashMap<CacheKey, u128>>,
}

impl DensityCache {
    pub fn global() -> &'static DensityCache {
        static CACHE: OnceLock<DensityCache> = OnceLock::new();
        CACHE.get_or_init(DensityCache::default)
    }

    pub fn get_or_insert(&self, key: CacheKey, compute: impl FnOnce() -> u128) -> u128 {
        if let Some(&v) = self.map.read().get(&key) {
            return v;
        }
        let v = compute();
        *self.map.write().entry(key).or_insert(v)
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn big(x: u128) -> BigInt {
    BigInt::from(x)
}

fn pow_big(ell: u64, e: u32) -> BigInt {
    num_traits::pow(BigInt::from(ell), e as usize)
}

fn rat(n: BigInt, d: BigInt) -> BigRational {
    BigRational::new(n, d)
}

pub fn rat_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Number of matrices with g ≡ 1 mod ℓ^v but not mod ℓ^(v+1).
fn exact_level_count(ell: u64, r: u32, det: i64, trace: i64, v: u32) -> Result<u128> {
    let at = count_matrices(ell, r, det, trace, v, CountMethod::Fast)?;
    let above = count_matrices(ell, r, det, trace, v + 1, CountMethod::Fast)?;
    Ok(at - above)
}

/// An f_ℓ value with the level R at which the limit was read off.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalFactor {
    pub value: BigRational,
    pub stabilized_at_r: u32,
}

impl LocalFactor {
    pub fn to_f64(&self) -> f64 {
        rat_to_f64(&self.value)
    }
}

/// D = (p + 1 − N)² − 4p.
pub fn discriminant(p: u64, n: u64) -> i128 {
    let t = p as i128 + 1 - n as i128;
    t * t - 4 * p as i128
}

fn check_shape(p: u64, shape: GroupShape) -> Result<()> {
    if p < 5 || !is_prime(p) {
        return Err(domain!("p must be a prime >= 5, got {p}"));
    }
    if (p - 1) % shape.d1 != 0 {
        return Err(domain!(
            "d1 = {} does not divide p - 1 = {}",
            shape.d1,
            p - 1
        ));
    }
    let (lo, hi) = hasse_interval(p);
    if shape.order() < lo || shape.order() > hi {
        return Err(domain!(
            "N = {} lies outside the Hasse interval [{lo}, {hi}]",
            shape.order()
        ));
    }
    Ok(())
}

/// The f_ℓ count at a fixed level R, normalized by ℓ^(2R)(1 − 1/ℓ²).
pub fn f_ell_at(ell: u64, shape: GroupShape, p: u64, r: u32) -> Result<BigRational> {
    let v = valuation(shape.d1 as i128, ell).unwrap();
    if v + 1 > r {
        return Err(domain!(
            "R = {r} is below the congruence level {} of d1 = {}",
            v + 1,
            shape.d1
        ));
    }
    let t = p as i64 + 1 - shape.order() as i64;
    let count = exact_level_count(ell, r, p as i64, t, v)?;
    let l2 = big(ell as u128 * ell as u128);
    Ok(rat(big(count) * &l2, pow_big(ell, 2 * r) * (l2 - 1)))
}

/// f_ℓ(d1, d2, p) by enumeration at R = v_ℓ(D) + 1, checked against R + 1.
pub fn f_ell(ell: u64, d1: u64, d2: u64, p: u64) -> Result<LocalFactor> {
    check_prime_ell(ell)?;
    let shape = GroupShape::new(d1, d2)?;
    check_shape(p, shape)?;
    let d = discriminant(p, shape.order());
    let r = valuation(d, ell).ok_or_else(|| domain!("zero discriminant"))? + 1;
    check_budget(ell, r)?;
    let value = f_ell_at(ell, shape, p, r)?;
    let next = f_ell_at(ell, shape, p, r + 1)?;
    if value != next {
        return Err(invariant!(
            "f_{ell}({d1},{d2},{p}) changed between R = {r} and R = {}",
            r + 1
        ));
    }
    Ok(LocalFactor {
        value,
        stabilized_at_r: r,
    })
}

/// Kronecker symbol (d/ℓ) for prime ℓ, including ℓ = 2.
pub fn discriminant_symbol(d: i128, ell: u64) -> i8 {
    if ell == 2 {
        return match d.rem_euclid(8) {
            1 | 7 => 1,
            3 | 5 => -1,
            _ => 0,
        };
    }
    let r = residue(d, ell);
    if r == 0 {
        return 0;
    }
    if pow_mod(r, (ell - 1) / 2, ell) == 1 {
        1
    } else {
        -1
    }
}

/// ℓ^(−v)(1 − 1/ℓ²)^(−1)(1 + χ(ℓ)/ℓ), valid when ℓ ∤ D/d1².
pub fn f_ell_closed(ell: u64, d1: u64, d2: u64, p: u64) -> Result<BigRational> {
    check_prime_ell(ell)?;
    let shape = GroupShape::new(d1, d2)?;
    check_shape(p, shape)?;
    let d = discriminant(p, shape.order());
    let dd = (d1 * d1) as i128;
    if d % dd != 0 {
        return Err(invariant!("d1^2 does not divide D = {d}"));
    }
    let reduced = d / dd;
    let chi = discriminant_symbol(reduced, ell);
    if chi == 0 {
        return Err(domain!(
            "{ell} divides D/d1^2 = {reduced}; the closed form does not apply"
        ));
    }
    let v = valuation(d1 as i128, ell).unwrap();
    let l = BigInt::from(ell);
    let l2 = &l * &l;
    let euler = rat(l2.clone(), l2 - 1);
    let chi_term = rat(&l + BigInt::from(chi), l);
    Ok(euler * chi_term / rat(pow_big(ell, v), BigInt::one()))
}

/// f_p = 1 + 1/(p−1) when p ∤ N − 1, else 1.
pub fn f_p_local(p: u64, n: u64) -> BigRational {
    if (n as i128 - 1).rem_euclid(p as i128) == 0 {
        BigRational::one()
    } else {
        BigRational::one() + rat(BigInt::one(), BigInt::from(p - 1))
    }
}

/// g values for w = 0..R; entry R collects every trace with v_ℓ(p+1−tr) ≥ R.
///
/// Each entry is the normalized count of matrices at exact congruence level
/// v with det = p, minus (1 − 1/ℓ)/ℓ^w.
pub fn g_profile(p: u64, v: u32, ell: u64, r: u32) -> Result<Vec<BigRational>> {
    check_budget(ell, r)?;
    g_profile_unbudgeted(p, v, ell, r)
}

pub(crate) fn g_profile_unbudgeted(p: u64, v: u32, ell: u64, r: u32) -> Result<Vec<BigRational>> {
    check_prime_ell(ell)?;
    if v + 1 > r {
        return Err(domain!("level {v} needs R > {v}"));
    }
    let m = modulus(ell, r)?;
    let at = trace_histogram(ell, r, p as i64, v, CountMethod::Fast)?;
    let above = trace_histogram(ell, r, p as i64, v + 1, CountMethod::Fast)?;
    let mut buckets = vec![0u128; r as usize + 1];
    for t in 0..m {
        let n = at[t as usize] - above[t as usize];
        if n == 0 {
            continue;
        }
        let w =
            valuation(residue(p as i128 + 1 - t as i128, m) as i128, ell).map_or(r, |w| w.min(r));
        buckets[w as usize] += n;
    }
    let l = BigInt::from(ell);
    let l2: BigInt = &l * &l;
    let norm: BigInt = pow_big(ell, 3 * r) * (&l2 - BigInt::one()) / l2;
    Ok(buckets
        .into_iter()
        .enumerate()
        .map(|(w, n)| {
            let density = BigRational::new(big(n), norm.clone());
            let baseline = rat(&l - 1, pow_big(ell, w as u32 + 1));
            density - baseline
        })
        .collect())
}

/// g_p(w, v, ℓ^R); w = R denotes the bucket v_ℓ(p+1−tr) ≥ R.
pub fn g_density(p: u64, w: u32, v: u32, ell: u64, r: u32) -> Result<BigRational> {
    if w > r {
        return Err(domain!("w = {w} exceeds R = {r}"));
    }
    Ok(g_profile(p, v, ell, r)?.swap_remove(w as usize))
}

/// −δ_{ℓ|p−1}/(ℓ(ℓ²−1)) + ℓ^(−(R+1)).
pub fn g_sum_expected(p: u64, ell: u64, r: u32) -> BigRational {
    let tail = rat(BigInt::one(), pow_big(ell, r + 1));
    if (p - 1) % ell == 0 {
        let l = BigInt::from(ell);
        tail - rat(BigInt::one(), &l * (&l * &l - 1))
    } else {
        tail
    }
}

/// Result of [`probability_product`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProductEstimate {
    pub value: f64,
    /// log P(ℓ ≤ ell_max) − log P(ℓ ≤ ell_max/10).
    pub last_decade_log_increment: f64,
    /// Primes whose factor was enumerated rather than taken in closed form.
    pub enumerated: Vec<u64>,
}

/// f_∞(p+1−N, p)·Π_{ℓ ≤ ell_max} f_ℓ(d1, d2, p).
pub fn probability_product(
    p: u64,
    shape: GroupShape,
    ell_max: u64,
    norm: FInftyNorm,
) -> Result<ProductEstimate> {
    if p < 5 || !is_prime(p) {
        return Err(domain!("p must be a prime >= 5, got {p}"));
    }
    let (lo, hi) = hasse_interval(p);
    if (p - 1) % shape.d1 != 0 || shape.order() < lo || shape.order() > hi {
        return Ok(ProductEstimate {
            value: 0.0,
            last_decade_log_increment: 0.0,
            enumerated: vec![],
        });
    }
    let n = shape.order();
    let t = p as i64 + 1 - n as i64;
    let d = discriminant(p, n);
    let mut log_sum = 0.0f64;
    let mut log_at_decade = 0.0f64;
    let mut enumerated = Vec::new();
    let decade = ell_max / 10;
    for ell in primes_up_to(ell_max) {
        let factor = if ell == p {
            rat_to_f64(&f_p_local(p, n))
        } else if d % ell as i128 == 0 {
            enumerated.push(ell);
            f_ell(ell, shape.d1, shape.d2, p)?.to_f64()
        } else {
            rat_to_f64(&f_ell_closed(ell, shape.d1, shape.d2, p)?)
        };
        if factor == 0.0 {
            return Ok(ProductEstimate {
                value: 0.0,
                last_decade_log_increment: 0.0,
                enumerated,
            });
        }
        log_sum += factor.ln();
        if ell <= decade {
            log_at_decade = log_sum;
        }
    }
    let value = f_infty(t, p, norm) * log_sum.exp();
    Ok(ProductEstimate {
        value,
        last_decade_log_increment: log_sum - log_at_decade,
        enumerated,
    })
}

/// True when 1 ≤ value·ℓ^v ≤ 1 + (2/ℓ)(1 + 1/(ℓ−1)).
pub fn within_local_bounds(value: &BigRational, ell: u64, v: u32) -> bool {
    let scaled = value * rat(pow_big(ell, v), BigInt::one());
    let l = BigInt::from(ell);
    let upper = BigRational::one()
        + rat(BigInt::from(2), l.clone()) * (BigRational::one() + rat(BigInt::one(), l - 1));
    scaled >= BigRational::one() && scaled <= upper
}
