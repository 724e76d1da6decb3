//! Exact elementary arithmetic: sieves, factorizations, the usual
//! multiplicative functions, Ramanujan sums and quadratic characters.
//!
//! Everything here works over machine integers; inputs in this crate stay
//! below roughly 10^16, so intermediate products are taken in 128 bits.

use std::sync::OnceLock;

use crate::error::{domain, Result};

/// Upper end of the shared smallest-prime-factor table.
pub const SPF_LIMIT: u64 = 1 << 22;

fn spf_table() -> &'static [u32] {
    static TABLE: OnceLock<Vec<u32>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = SPF_LIMIT as usize;
        let mut spf = vec![0u32; n + 1];
        for i in 2..=n {
            if spf[i] == 0 {
                spf[i] = i as u32;
                let mut j = i.saturating_mul(i);
                while j <= n {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        spf
    })
}

fn small_primes() -> &'static [u64] {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| primes_up_to(SPF_LIMIT))
}

/// All primes `<= limit` in ascending order (Eratosthenes).
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i.saturating_mul(i);
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n <= SPF_LIMIT {
        return spf_table()[n as usize] as u64 == n;
    }
    match factorize(n) {
        Ok(f) => f.entries.len() == 1 && f.entries[0].1 == 1,
        Err(_) => false,
    }
}

/// Canonical prime factorization: primes strictly increasing, exponents >= 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Factorization {
    pub entries: Vec<(u64, u32)>,
}

pub fn factorize(n: u64) -> Result<Factorization> {
    if n == 0 {
        return Err(domain!("cannot factorize 0"));
    }
    let mut entries = Vec::new();
    let mut m = n;
    let push = |entries: &mut Vec<(u64, u32)>, p: u64| match entries.last_mut() {
        Some((q, e)) if *q == p => *e += 1,
        _ => entries.push((p, 1)),
    };
    if m > SPF_LIMIT {
        for &p in small_primes() {
            if p * p > m {
                break;
            }
            while m % p == 0 {
                m /= p;
                push(&mut entries, p);
            }
            if m <= SPF_LIMIT {
                break;
            }
        }
        if m > SPF_LIMIT {
            // No factor below SPF_LIMIT is left; continue with odd trial divisors.
            let mut d = SPF_LIMIT | 1;
            while (d as u128) * (d as u128) <= m as u128 {
                while m % d == 0 {
                    m /= d;
                    push(&mut entries, d);
                }
                d += 2;
            }
            if m > 1 {
                push(&mut entries, m);
            }
            return Ok(Factorization { entries });
        }
    }
    let spf = spf_table();
    while m > 1 {
        let p = spf[m as usize] as u64;
        m /= p;
        push(&mut entries, p);
    }
    Ok(Factorization { entries })
}

impl Factorization {
    pub fn value(&self) -> u64 {
        self.entries.iter().map(|&(p, e)| p.pow(e)).product()
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|&(p, _)| p)
    }

    /// Exponent of `p` (0 when `p` does not divide).
    pub fn exponent_of(&self, p: u64) -> u32 {
        self.entries
            .iter()
            .find(|&&(q, _)| q == p)
            .map_or(0, |&(_, e)| e)
    }

    /// Divisors in ascending order.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.entries {
            let len = divs.len();
            let mut pk = 1u64;
            for _ in 0..e {
                pk *= p;
                for i in 0..len {
                    divs.push(divs[i] * pk);
                }
            }
        }
        divs.sort_unstable();
        divs
    }

    pub fn tau(&self) -> u64 {
        self.entries.iter().map(|&(_, e)| e as u64 + 1).product()
    }

    pub fn sigma(&self) -> u128 {
        self.entries
            .iter()
            .map(|&(p, e)| {
                let p = p as u128;
                (p.pow(e + 1) - 1) / (p - 1)
            })
            .product()
    }

    pub fn phi(&self) -> u64 {
        self.entries
            .iter()
            .map(|&(p, e)| (p - 1) * p.pow(e - 1))
            .product()
    }

    pub fn mu(&self) -> i64 {
        if self.entries.iter().any(|&(_, e)| e > 1) {
            0
        } else if self.entries.len() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// The Dirichlet convolution φ*μ, multiplicative with
    /// (φ*μ)(ℓ) = ℓ−2 and (φ*μ)(ℓ^e) = ℓ^(e−2)(ℓ−1)² for e >= 2.
    pub fn phi_star_mu(&self) -> u64 {
        self.entries
            .iter()
            .map(|&(p, e)| {
                if e == 1 {
                    p - 2
                } else {
                    p.pow(e - 2) * (p - 1) * (p - 1)
                }
            })
            .product()
    }

    pub fn omega(&self) -> u32 {
        self.entries.len() as u32
    }

    pub fn rad(&self) -> u64 {
        self.primes().product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MultiplicativeSuite {
    pub tau: u64,
    pub sigma: u128,
    pub phi: u64,
    pub mu: i64,
    pub phi_star_mu: u64,
    pub omega: u32,
    pub rad: u64,
}

pub fn multiplicative_suite(n: u64) -> Result<MultiplicativeSuite> {
    let f = factorize(n)?;
    Ok(MultiplicativeSuite {
        tau: f.tau(),
        sigma: f.sigma(),
        phi: f.phi(),
        mu: f.mu(),
        phi_star_mu: f.phi_star_mu(),
        omega: f.omega(),
        rad: f.rad(),
    })
}

pub fn divisors(n: u64) -> Result<Vec<u64>> {
    Ok(factorize(n)?.divisors())
}

pub fn tau(n: u64) -> u64 {
    factorize(n).map_or(0, |f| f.tau())
}

pub fn phi(n: u64) -> u64 {
    factorize(n).map_or(0, |f| f.phi())
}

pub fn mu(n: u64) -> i64 {
    factorize(n).map_or(0, |f| f.mu())
}

pub fn sigma(n: u64) -> u128 {
    factorize(n).map_or(0, |f| f.sigma())
}

pub fn phi_star_mu(n: u64) -> u64 {
    factorize(n).map_or(0, |f| f.phi_star_mu())
}

/// ℓ-adic valuation of a nonzero integer; `None` for 0.
pub fn valuation(n: i128, ell: u64) -> Option<u32> {
    if n == 0 {
        return None;
    }
    let ell = ell as i128;
    let mut m = n;
    let mut v = 0;
    while m % ell == 0 {
        m /= ell;
        v += 1;
    }
    Some(v)
}

pub fn pow_mod(base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let m128 = m as u128;
    let mut b = (base % m) as u128;
    let mut acc = 1u128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m128;
        }
        b = b * b % m128;
        exp >>= 1;
    }
    acc as u64
}

/// A Ramanujan-sum query c_k(a), with `a` reduced modulo `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RamanujanQuery {
    k: u64,
    a: u64,
}

impl RamanujanQuery {
    pub fn new(k: u64, a: i64) -> Result<Self> {
        if k == 0 {
            return Err(domain!("Ramanujan sum modulus must be >= 1"));
        }
        let a = (a as i128).rem_euclid(k as i128) as u64;
        Ok(Self { k, a })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// Residue in `0..k`.
    pub fn a(&self) -> u64 {
        self.a
    }
}

/// c_k(a) by the divisor form Σ_{f | (k,a)} f·μ(k/f).
pub fn ramanujan_sum(q: RamanujanQuery) -> i64 {
    // a ≡ 0 is represented by gcd(k, 0) = k.
    let g = num_integer::gcd(q.k, q.a);
    divisors(g)
        .expect("gcd of a positive modulus is positive")
        .into_iter()
        .map(|f| f as i64 * mu(q.k / f))
        .sum()
}

/// c_k(a) assembled multiplicatively from von Sterneck's prime-power values.
pub fn ramanujan_sum_von_sterneck(q: RamanujanQuery) -> i64 {
    let f = factorize(q.k).expect("modulus is positive");
    f.entries
        .iter()
        .map(|&(ell, r)| {
            let pr = ell.pow(r) as i64;
            // v_ℓ(0) is treated as infinite.
            let v = if q.a == 0 {
                r
            } else {
                valuation(q.a as i128, ell).unwrap().min(r)
            };
            if v >= r {
                pr - pr / ell as i64
            } else if v + 1 == r {
                -(pr / ell as i64)
            } else {
                0
            }
        })
        .product()
}

/// Legendre symbol (D | ℓ) for an odd prime ℓ.
pub fn kronecker_chi(d: i64, ell: u64) -> Result<i8> {
    if ell == 2 {
        return Err(domain!("quadratic character at 2 is not supported"));
    }
    if ell < 2 {
        return Err(domain!("{ell} is not a prime"));
    }
    let r = (d as i128).rem_euclid(ell as i128) as u64;
    if r == 0 {
        return Ok(0);
    }
    Ok(if pow_mod(r, (ell - 1) / 2, ell) == 1 {
        1
    } else {
        -1
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes_small() {
        assert_eq!(primes_up_to(10), vec![2, 3, 5, 7]);
        assert_eq!(primes_up_to(2), vec![2]);
        assert_eq!(primes_up_to(30), vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert!(primes_up_to(1).is_empty());
    }

    #[test]
    fn factorize_examples() {
        assert_eq!(factorize(12).unwrap().entries, vec![(2, 2), (3, 1)]);
        assert!(factorize(1).unwrap().entries.is_empty());
        assert_eq!(factorize(97).unwrap().entries, vec![(97, 1)]);
        assert!(matches!(factorize(0), Err(crate::Error::Domain(_))));
    }

    #[test]
    fn factorize_beyond_table() {
        let n = 4_194_319u64 * 4_194_329; // two primes just above SPF_LIMIT
        let f = factorize(n).unwrap();
        assert_eq!(f.value(), n);
        assert_eq!(f.entries.len(), 2);
        let m = (1u64 << 40) * 3 * 1_000_003;
        assert_eq!(
            factorize(m).unwrap().entries,
            vec![(2, 40), (3, 1), (1_000_003, 1)]
        );
        assert!(is_prime(1_000_000_007));
        assert!(!is_prime(1_000_000_007 * 3));
    }

    #[test]
    fn suite_examples() {
        let s = multiplicative_suite(12).unwrap();
        assert_eq!(
            (s.tau, s.sigma, s.phi, s.mu, s.omega, s.rad),
            (6, 28, 4, 0, 2, 6)
        );
        assert_eq!(multiplicative_suite(2).unwrap().phi_star_mu, 0);
        assert_eq!(multiplicative_suite(4).unwrap().phi_star_mu, 1);
        assert_eq!(divisors(12).unwrap(), vec![1, 2, 3, 4, 6, 12]);
    }

    fn dirichlet(f: impl Fn(u64) -> i64, g: impl Fn(u64) -> i64, n: u64) -> i64 {
        divisors(n)
            .unwrap()
            .into_iter()
            .map(|d| f(d) * g(n / d))
            .sum()
    }

    #[test]
    fn convolution_identities() {
        for n in 1..=10_000u64 {
            let divs = divisors(n).unwrap();
            assert_eq!(divs.iter().map(|&d| phi(d)).sum::<u64>(), n);
            assert_eq!(divs.iter().map(|&d| mu(d)).sum::<i64>(), (n == 1) as i64);
            let direct = dirichlet(|d| phi(d) as i64, mu, n);
            assert_eq!(direct, phi_star_mu(n) as i64, "n = {n}");
        }
    }

    fn ramanujan_exponential(k: u64, a: u64) -> i64 {
        let mut re = 0.0f64;
        for n in 1..=k {
            if num_integer::gcd(n, k) == 1 {
                re += (2.0 * std::f64::consts::PI * (a * n) as f64 / k as f64).cos();
            }
        }
        re.round() as i64
    }

    #[test]
    fn ramanujan_examples() {
        for k in 1..50 {
            assert_eq!(ramanujan_sum(RamanujanQuery::new(k, 1).unwrap()), mu(k));
        }
        assert_eq!(ramanujan_sum(RamanujanQuery::new(4, 2).unwrap()), -2);
        assert_eq!(ramanujan_exponential(4, 2), -2);
        let q = RamanujanQuery::new(9, 3).unwrap();
        assert_eq!(ramanujan_sum(q), -3);
        assert_eq!(ramanujan_sum_von_sterneck(q), -3);
        assert_eq!(RamanujanQuery::new(5, -1).unwrap().a(), 4);
        assert!(RamanujanQuery::new(0, 1).is_err());
    }

    #[test]
    fn ramanujan_dual_paths() {
        for k in 1..=200u64 {
            let mut total = 0;
            for a in 0..k {
                let q = RamanujanQuery::new(k, a as i64).unwrap();
                let c = ramanujan_sum(q);
                assert_eq!(c, ramanujan_sum_von_sterneck(q), "k={k} a={a}");
                if k <= 60 {
                    assert_eq!(c, ramanujan_exponential(k, a), "k={k} a={a}");
                }
                total += c;
            }
            assert_eq!(total, (k == 1) as i64);
            assert_eq!(
                ramanujan_sum(RamanujanQuery::new(k, 0).unwrap()),
                phi(k) as i64
            );
        }
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(kronecker_chi(5, 11).unwrap(), 1);
        assert_eq!(kronecker_chi(7 * 13, 7).unwrap(), 0);
        assert_eq!(kronecker_chi(-19, 3).unwrap(), -1);
        assert!(kronecker_chi(5, 2).is_err());
    }
}
