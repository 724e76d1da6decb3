//! Evaluation of the main term for the average number of subgroups and
//! cyclic subgroups, with exact local factors, the cyclicity constant, the
//! prime-average constant and the upper/lower envelopes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use crate::arith::{divisors, factorize, is_prime, phi, phi_star_mu, tau, valuation};
use crate::densities::{g_profile_unbudgeted, rat_to_f64, FInftyNorm};
use crate::error::{domain, invariant, Error, Result};
use crate::groups::Stat;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Work above which the R-ladder is replaced by the closed local factor.
const LADDER_WORK_LIMIT: u128 = 100_000_000;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn pow_rat(ell: u64, e: u32) -> BigRational {
    BigRational::from_integer(num_traits::pow(BigInt::from(ell), e as usize))
}

/// 1 − 1/(ℓ(ℓ²−1)).
pub fn generic_factor(ell: u64) -> BigRational {
    let l = ell as i64;
    BigRational::one() - rat(1, l * (l * l - 1))
}

fn check_p_d1(p: u64, d1: u64) -> Result<()> {
    if p < 5 || !is_prime(p) {
        return Err(domain!("p must be a prime >= 5, got {p}"));
    }
    if d1 == 0 || (p - 1) % d1 != 0 {
        return Err(domain!("d1 = {d1} does not divide p - 1 = {}", p - 1));
    }
    Ok(())
}

/// ℓ^(−v)(1 − δ/ℓ³)/(1 − 1/ℓ²) with v = v_ℓ(d1) ≥ 1 and δ = [ℓ^(v+1) | p−1].
pub fn local_factor_closed(p: u64, d1: u64, ell: u64) -> Result<BigRational> {
    check_p_d1(p, d1)?;
    let v = valuation(d1 as i128, ell).unwrap();
    if v == 0 {
        return Err(domain!("{ell} does not divide d1 = {d1}"));
    }
    let l = ell as i64;
    let deeper = (p - 1) % ell.pow(v + 1) == 0;
    let top = if deeper {
        BigRational::one() - rat(1, l * l * l)
    } else {
        BigRational::one()
    };
    Ok(top / (BigRational::one() - rat(1, l * l)) / pow_rat(ell, v))
}

/// 1 + ℓ^(2v)·Σ_{w ≥ 2v} g_p(w, v, ℓ^R), with the geometric tail ℓ^(2v−R−1)
/// of the finite-R sum removed.
fn ladder_value(p: u64, v: u32, ell: u64, r: u32) -> Result<BigRational> {
    let profile = g_profile_unbudgeted(p, v, ell, r)?;
    let sum: BigRational = profile.into_iter().skip(2 * v as usize).sum();
    let scale = pow_rat(ell, 2 * v);
    let tail = &scale / pow_rat(ell, r + 1);
    Ok(BigRational::one() + scale * sum - tail)
}

/// Local factor E_ℓ(d1, p) and the level R where the ladder settled
/// (0 when the closed form was used).
pub fn local_factor_with_level(p: u64, d1: u64, ell: u64) -> Result<(BigRational, u32)> {
    check_p_d1(p, d1)?;
    if !is_prime(ell) {
        return Err(domain!("{ell} is not prime"));
    }
    if ell == p {
        return Ok((BigRational::one(), 0));
    }
    let v = valuation(d1 as i128, ell).unwrap();
    if v == 0 {
        let value = if (p - 1) % ell == 0 {
            generic_factor(ell)
        } else {
            BigRational::one()
        };
        return Ok((value, 0));
    }
    let r = 2 * v + 1;
    let work = (ell as u128).pow(2 * (r + 1 - v));
    if work > LADDER_WORK_LIMIT {
        return Ok((local_factor_closed(p, d1, ell)?, 0));
    }
    let first = ladder_value(p, v, ell, r)?;
    let second = ladder_value(p, v, ell, r + 1)?;
    if first != second {
        return Err(invariant!(
            "local factor at {ell} for d1 = {d1}, p = {p} moved between R = {r} and {}",
            r + 1
        ));
    }
    Ok((first, r))
}

pub fn local_factor(p: u64, d1: u64, ell: u64) -> Result<BigRational> {
    Ok(local_factor_with_level(p, d1, ell)?.0)
}

/// The local factors E_ℓ(d1, p) over ℓ | d1(p−1); every other factor is 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalFactorSet {
    pub p: u64,
    pub d1: u64,
    pub factors: BTreeMap<u64, BigRational>,
}

impl LocalFactorSet {
    pub fn new(p: u64, d1: u64) -> Result<Self> {
        check_p_d1(p, d1)?;
        let mut factors = BTreeMap::new();
        for ell in factorize(p - 1)?.primes() {
            factors.insert(ell, local_factor(p, d1, ell)?);
        }
        Ok(Self { p, d1, factors })
    }

    pub fn get(&self, ell: u64) -> BigRational {
        self.factors
            .get(&ell)
            .cloned()
            .unwrap_or_else(BigRational::one)
    }

    pub fn product(&self) -> BigRational {
        self.factors.values().product()
    }
}

/// How the k-dependent factor of the main term is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum KFactor {
    /// K(k) = 1.
    #[default]
    AUnit,
    /// K(k) = Π_{ℓ|k} E_ℓ^(−1).
    BInverse,
}

impl FromStr for KFactor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" | "unit" => Ok(KFactor::AUnit),
            "B" | "b" | "inverse" => Ok(KFactor::BInverse),
            _ => Err(domain!("unknown k-factor option {s:?} (expected A or B)")),
        }
    }
}

impl fmt::Display for KFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KFactor::AUnit => "A",
            KFactor::BInverse => "B",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MainTermOptions {
    pub k_factor: KFactor,
    pub norm: FInftyNorm,
    /// Multiply by f_p = 1 + 1/(p−1) instead of treating the factor at p as 1.
    pub include_p_factor: bool,
}

/// Index data for the double sum behind the main term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatDecomposition {
    pub stat: Stat,
}

impl StatDecomposition {
    pub fn new(stat: Stat) -> Result<Self> {
        match stat {
            Stat::S | Stat::C => Ok(Self { stat }),
            _ => Err(domain!("the main term is defined for s and c only")),
        }
    }

    /// φ(u) for s, (φ*μ)(u) for c.
    pub fn u_weight(&self, u: u64) -> u64 {
        match self.stat {
            Stat::C => phi_star_mu(u),
            _ => phi(u),
        }
    }

    /// The triples (u, k, i) with u | d1, k | d1²/u for i = 0, and k = 1 for i = 1.
    pub fn indices(&self, d1: u64) -> Vec<(u64, u64, u8)> {
        let mut out = Vec::new();
        for u in divisors(d1).expect("d1 >= 1") {
            for k in divisors(d1 * d1 / u).expect("nonzero") {
                out.push((u, k, 0));
            }
            out.push((u, 1, 1));
        }
        out
    }
}

/// The d1 summand of the main term, before the normalization factor.
pub fn main_term_summand(
    p: u64,
    d1: u64,
    dec: StatDecomposition,
    k_factor: KFactor,
) -> Result<f64> {
    let set = LocalFactorSet::new(p, d1)?;
    let euler = rat_to_f64(&set.product());
    let x = (p + 1) as f64;
    let mut inner = 0.0;
    for (u, k, i) in dec.indices(d1) {
        let weight = (dec.u_weight(u) * tau(d1 / u)) as f64;
        let uf = u as f64;
        let term = if i == 1 {
            (x / uf).ln() + 2.0 * EULER_GAMMA
        } else {
            let kf = k as f64;
            let kk = match k_factor {
                KFactor::AUnit => 1.0,
                KFactor::BInverse => factorize(k)?
                    .primes()
                    .map(|ell| 1.0 / rat_to_f64(&set.get(ell)))
                    .product(),
            };
            ((x / (uf * kf * kf)).ln() + 2.0 * EULER_GAMMA) * phi(k) as f64 / kf * kk
        };
        inner += weight * term;
    }
    Ok(euler * inner / (d1 * d1) as f64)
}

/// Main term for the average of `stat` ∈ {s, c} over curves mod p.
///
/// The double sum is read with unit archimedean mass, so `FInftyNorm::Half`
/// applies it as is and `FInftyNorm::Paper` doubles it.
pub fn main_term(p: u64, stat: Stat, opts: MainTermOptions) -> Result<f64> {
    let dec = StatDecomposition::new(stat)?;
    check_p_d1(p, 1)?;
    let mut total = 0.0;
    for d1 in divisors(p - 1)? {
        total += main_term_summand(p, d1, dec, opts.k_factor)?;
    }
    if opts.include_p_factor {
        total *= 1.0 + 1.0 / (p - 1) as f64;
    }
    Ok(total * 2.0 * opts.norm.scale())
}

/// Π_{ℓ|p−1} (1 − 1/(ℓ(ℓ²−1))).
pub fn cyclicity_probability(p: u64) -> Result<BigRational> {
    check_p_d1(p, 1)?;
    Ok(factorize(p - 1)?.primes().map(generic_factor).product())
}

/// Truncated prime-average constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChEstimate {
    pub value: f64,
    pub d1_max: u64,
    pub m_max: u64,
}

fn rho(m: u64) -> f64 {
    factorize(m)
        .expect("m >= 1")
        .entries
        .iter()
        .map(|&(ell, e)| {
            let l = ell as f64;
            (-(l * l * l - l - 1.0)).powi(e as i32)
        })
        .product()
}

/// Σ_{m ≤ m_max} ρ(m)^(−1) Σ_{d1 ≤ d1_max} Σ_{u|d1} w(u)τ(d1/u)/(d1³φ([d1,m]))
/// Σ_{k|d1²/u} (φ(k)+δ_{k=1})/k · Π_{ℓ|k} ℓ^{v_ℓ(d1)} · Π_{ℓ|d1} (1 − 1/(ℓ(ℓ²−1)))^(−1),
/// with ρ totally multiplicative, ρ(ℓ) = −(ℓ³ − ℓ − 1).
pub fn estimate_ch(d1_max: u64, m_max: u64, stat: Stat) -> Result<ChEstimate> {
    let dec = StatDecomposition::new(stat)?;
    if d1_max == 0 || m_max == 0 {
        return Err(domain!("truncation levels must be positive"));
    }
    let rhos: Vec<f64> = (1..=m_max).map(rho).collect();
    let mut value = 0.0;
    for d1 in 1..=d1_max {
        let fd1 = factorize(d1)?;
        let correction: f64 = fd1
            .primes()
            .map(|ell| 1.0 / rat_to_f64(&generic_factor(ell)))
            .product();
        let mut inner = 0.0;
        for u in fd1.divisors() {
            let weight = (dec.u_weight(u) * tau(d1 / u)) as f64;
            let ksum: f64 = divisors(d1 * d1 / u)?
                .into_iter()
                .map(|k| {
                    let lift: f64 = factorize(k)
                        .expect("k >= 1")
                        .primes()
                        .map(|ell| ell.pow(fd1.exponent_of(ell)) as f64)
                        .product();
                    (phi(k) + (k == 1) as u64) as f64 / k as f64 * lift
                })
                .sum();
            inner += weight * ksum;
        }
        let msum: f64 = (1..=m_max)
            .map(|m| {
                let l = num_integer::lcm(d1, m);
                1.0 / (rhos[(m - 1) as usize] * phi(l) as f64)
            })
            .sum();
        value += correction * inner / (d1 as f64).powi(3) * msum;
    }
    Ok(ChEstimate {
        value,
        d1_max,
        m_max,
    })
}

/// The explicit expressions behind the upper and lower envelopes at p.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEnvelopes {
    pub p: u64,
    /// (log p)^(1+e^γ)·log log p·Σ_{d1|p−1} τ(d1²)/d1.
    pub upper_s: f64,
    /// Σ_{u|d1|p−1} φ(u)τ(d1/u)/(d1·u).
    pub lower_s: f64,
    /// As `lower_s` with (φ*μ)(u).
    pub lower_c: f64,
    pub sigma_ratio: f64,
    pub tau_sq_sum: f64,
    pub sigma_id_sum: f64,
    pub tau_sq_sigma: f64,
}

/// (σ*id)(n) = Σ_{d|n} σ(d)·n/d.
fn sigma_star_id(n: u64) -> u128 {
    divisors(n)
        .expect("n >= 1")
        .into_iter()
        .map(|d| factorize(d).expect("d >= 1").sigma() * (n / d) as u128)
        .sum()
}

pub fn bound_envelopes(p: u64) -> Result<BoundEnvelopes> {
    check_p_d1(p, 1)?;
    let lp = (p as f64).ln();
    let fp = factorize(p - 1)?;
    let divs = fp.divisors();
    let tau_sq_sum: f64 = divs.iter().map(|&d| tau(d * d) as f64 / d as f64).sum();
    let upper_s = lp.powf(1.0 + EULER_GAMMA.exp()) * lp.ln() * tau_sq_sum;
    let lower = |w: fn(u64) -> u64| -> f64 {
        divs.iter()
            .flat_map(|&d1| {
                divisors(d1)
                    .expect("d1 >= 1")
                    .into_iter()
                    .map(move |u| (d1, u))
            })
            .map(|(d1, u)| (w(u) * tau(d1 / u)) as f64 / (d1 * u) as f64)
            .sum()
    };
    let sigma_ratio = fp.sigma() as f64 / (p - 1) as f64;
    let sigma_id_sum = divs
        .iter()
        .map(|&d| sigma_star_id(d) as f64 / (d * d) as f64)
        .sum();
    let tau_sq_sigma = tau((p - 1) * (p - 1)) as f64 * sigma_ratio;
    Ok(BoundEnvelopes {
        p,
        upper_s,
        lower_s: lower(phi),
        lower_c: lower(phi_star_mu),
        sigma_ratio,
        tau_sq_sum,
        sigma_id_sum,
        tau_sq_sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::primes_up_to;

    #[test]
    fn local_factor_examples() {
        assert_eq!(local_factor(7, 1, 2).unwrap(), rat(5, 6));
        assert_eq!(local_factor(7, 3, 2).unwrap(), rat(5, 6));
        assert_eq!(local_factor(7, 1, 5).unwrap(), BigRational::one());
        assert_eq!(local_factor(11, 1, 3).unwrap(), BigRational::one());
        assert!(local_factor(7, 4, 2).is_err());
    }

    #[test]
    fn ladder_matches_closed() {
        for p in primes_up_to(300).into_iter().filter(|&p| p >= 5) {
            for d1 in divisors(p - 1).unwrap() {
                if d1 * d1 > 4 * p {
                    continue;
                }
                for ell in factorize(d1).unwrap().primes() {
                    let (value, r) = local_factor_with_level(p, d1, ell).unwrap();
                    assert_eq!(
                        value,
                        local_factor_closed(p, d1, ell).unwrap(),
                        "p={p} d1={d1} ell={ell}"
                    );
                    let v = valuation(d1 as i128, ell).unwrap();
                    let scaled = rat_to_f64(&(&value * pow_rat(ell, v)));
                    let l = ell as f64;
                    assert!((1.0..=1.0 + 2.0 / l * (1.0 + 1.0 / (l - 1.0))).contains(&scaled));
                    if ell <= 7 {
                        assert!(r > 0);
                    }
                }
            }
        }
    }

    #[test]
    fn ladder_is_stable_further_up() {
        for (p, d1, ell) in [
            (13u64, 2u64, 2u64),
            (17, 4, 2),
            (19, 3, 3),
            (37, 6, 3),
            (41, 8, 2),
        ] {
            let v = valuation(d1 as i128, ell).unwrap();
            let base = ladder_value(p, v, ell, 2 * v + 1).unwrap();
            for r in 2 * v + 2..=2 * v + 4 {
                if (ell as u128).pow(2 * (r - v)) > 1 << 24 {
                    break;
                }
                assert_eq!(ladder_value(p, v, ell, r).unwrap(), base);
            }
        }
    }

    #[test]
    fn factor_set_is_finite_product() {
        let set = LocalFactorSet::new(61, 6).unwrap();
        assert_eq!(set.factors.len(), 3);
        assert_eq!(local_factor(61, 6, 7).unwrap(), BigRational::one());
        assert_eq!(set.get(7), BigRational::one());
    }

    #[test]
    fn cyclicity_examples() {
        assert_eq!(cyclicity_probability(7).unwrap(), rat(115, 144));
        assert_eq!(
            cyclicity_probability(13).unwrap(),
            cyclicity_probability(37).unwrap()
        );
        for p in primes_up_to(1_000_000)
            .into_iter()
            .filter(|&p| p >= 5)
            .step_by(97)
        {
            let c = rat_to_f64(&cyclicity_probability(p).unwrap());
            assert!(0.60 < c && c < 1.0);
        }
    }

    #[test]
    fn main_term_collapse_at_d1_one() {
        // p − 1 = 2·11.
        let p = 23u64;
        let expected =
            2.0 * (((p + 1) as f64).ln() + 2.0 * EULER_GAMMA) * (5.0 / 6.0) * (1.0 - 1.0 / 1320.0);
        let dec = StatDecomposition::new(Stat::S).unwrap();
        for k_factor in [KFactor::AUnit, KFactor::BInverse] {
            let term = main_term_summand(p, 1, dec, k_factor).unwrap();
            assert!((term - expected).abs() < 1e-12);
        }
        let c = StatDecomposition::new(Stat::C).unwrap();
        assert!((main_term_summand(p, 1, c, KFactor::AUnit).unwrap() - expected).abs() < 1e-12);
        let full = main_term(p, Stat::S, MainTermOptions::default()).unwrap();
        assert!(full > expected);
    }

    #[test]
    fn main_term_c_below_s() {
        for p in [11u64, 13, 31, 61, 101, 211, 401] {
            for k_factor in [KFactor::AUnit, KFactor::BInverse] {
                for norm in [FInftyNorm::Paper, FInftyNorm::Half] {
                    let opts = MainTermOptions {
                        k_factor,
                        norm,
                        include_p_factor: false,
                    };
                    let s = main_term(p, Stat::S, opts).unwrap();
                    let c = main_term(p, Stat::C, opts).unwrap();
                    assert!(c <= s, "p={p}");
                }
            }
        }
        assert!(main_term(101, Stat::TauN, MainTermOptions::default()).is_err());
    }

    #[test]
    fn ch_estimate_settles() {
        let a = estimate_ch(40, 40, Stat::S).unwrap().value;
        let b = estimate_ch(80, 80, Stat::S).unwrap().value;
        let c = estimate_ch(160, 160, Stat::S).unwrap().value;
        assert!((c - b).abs() < (b - a).abs());
        assert!(c >= 1.0);
        assert!(estimate_ch(160, 160, Stat::C).unwrap().value <= c);
    }

    #[test]
    fn envelopes_at_101() {
        let env = bound_envelopes(101).unwrap();
        assert!(env.sigma_ratio >= 1.0);
        assert_eq!(env.sigma_ratio, 217.0 / 100.0);
        assert!(env.lower_c <= env.lower_s);
        // 100 = 2²·5²: Σ τ(d²)/d over the nine divisors.
        let expected: f64 = [1u64, 2, 4, 5, 10, 20, 25, 50, 100]
            .iter()
            .map(|&d| tau(d * d) as f64 / d as f64)
            .sum();
        assert!((env.tau_sq_sum - expected).abs() < 1e-12);
    }
}
