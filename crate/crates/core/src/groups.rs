//! Subgroup and cyclic-subgroup counts of rank-≤2 finite abelian groups.
//!
//! `Z/m × Z/n` has Σ_{a|m, b|n} gcd(a,b) subgroups and
//! Σ_{a|m, b|n} φ(gcd(a,b)) cyclic subgroups. Both sums also collapse to a
//! convolution over u | gcd(m,n). [`subgroup_oracle`] enumerates subgroups
//! as element sets and is independent of both formulas.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_integer::gcd;

use crate::arith::{divisors, factorize, phi, phi_star_mu, tau};
use crate::error::{domain, Error, Result};

/// The group Z/d1 × Z/(d1·d2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupShape {
    pub d1: u64,
    pub d2: u64,
}

impl GroupShape {
    pub fn new(d1: u64, d2: u64) -> Result<Self> {
        if d1 == 0 || d2 == 0 {
            return Err(domain!("group shape needs d1, d2 >= 1 (got {d1}, {d2})"));
        }
        Ok(Self { d1, d2 })
    }

    pub fn order(&self) -> u64 {
        self.d1 * self.d1 * self.d2
    }

    pub fn exponent(&self) -> u64 {
        self.d1 * self.d2
    }

    pub fn is_cyclic(&self) -> bool {
        self.d1 == 1
    }
}

impl fmt::Display for GroupShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z/{} x Z/{}", self.d1, self.exponent())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CountVariant {
    /// The double divisor sum over (a, b).
    GcdSum,
    /// The collapsed convolution over u | gcd(m, n).
    Convolution,
}

pub fn subgroup_count(m: u64, n: u64, variant: CountVariant) -> u64 {
    match variant {
        CountVariant::GcdSum => {
            let dn = divisors(n).expect("n >= 1");
            divisors(m)
                .expect("m >= 1")
                .into_iter()
                .map(|a| dn.iter().map(|&b| gcd(a, b)).sum::<u64>())
                .sum()
        }
        CountVariant::Convolution => divisors(gcd(m, n))
            .expect("gcd >= 1")
            .into_iter()
            .map(|u| phi(u) * tau(m / u) * tau(n / u))
            .sum(),
    }
}

pub fn cyclic_subgroup_count(m: u64, n: u64, variant: CountVariant) -> u64 {
    match variant {
        CountVariant::GcdSum => {
            let dn = divisors(n).expect("n >= 1");
            divisors(m)
                .expect("m >= 1")
                .into_iter()
                .map(|a| dn.iter().map(|&b| phi(gcd(a, b))).sum::<u64>())
                .sum()
        }
        CountVariant::Convolution => divisors(gcd(m, n))
            .expect("gcd >= 1")
            .into_iter()
            .map(|u| phi_star_mu(u) * tau(m / u) * tau(n / u))
            .sum(),
    }
}

/// Statistic attached to a group of rational points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stat {
    /// Number of subgroups.
    S,
    /// Number of cyclic subgroups.
    C,
    /// Number of divisors of the group order.
    TauN,
    /// The constant 1 (total mass).
    One,
}

impl FromStr for Stat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s" => Ok(Stat::S),
            "c" => Ok(Stat::C),
            "tau" | "tau_N" | "tauN" => Ok(Stat::TauN),
            "one" | "1" => Ok(Stat::One),
            _ => Err(domain!("unknown statistic {s:?}")),
        }
    }
}

impl fmt::Display for Stat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stat::S => "s",
            Stat::C => "c",
            Stat::TauN => "tau",
            Stat::One => "one",
        })
    }
}

/// Which closed formula evaluates s and c on a shape.
///
/// `Corrected` counts subgroups of Z/d1 × Z/(d1·d2). `Printed` evaluates the
/// convolution Σ_{u|d1} w(u)·τ(d1/u)·τ(d1²d2/u) verbatim, which is the count
/// for Z/d1 × Z/(d1²·d2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Formula {
    #[default]
    Corrected,
    Printed,
}

impl FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corrected" => Ok(Formula::Corrected),
            "printed" => Ok(Formula::Printed),
            _ => Err(domain!("unknown formula variant {s:?}")),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formula::Corrected => "corrected",
            Formula::Printed => "printed",
        })
    }
}

pub fn stat_on_shape(shape: GroupShape, stat: Stat, formula: Formula) -> u64 {
    let GroupShape { d1, d2 } = shape;
    match (stat, formula) {
        (Stat::One, _) => 1,
        (Stat::TauN, _) => tau(shape.order()),
        (Stat::S, Formula::Corrected) => subgroup_count(d1, d1 * d2, CountVariant::GcdSum),
        (Stat::C, Formula::Corrected) => cyclic_subgroup_count(d1, d1 * d2, CountVariant::GcdSum),
        (Stat::S | Stat::C, Formula::Printed) => {
            let weight = if stat == Stat::S { phi } else { phi_star_mu };
            let n = d1 * d1 * d2;
            divisors(d1)
                .expect("d1 >= 1")
                .into_iter()
                .map(|u| weight(u) * tau(d1 / u) * tau(n / u))
                .sum()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleCounts {
    pub total: u64,
    pub cyclic: u64,
}

/// Largest group order the oracle accepts.
pub const ORACLE_LIMIT: u64 = 2000;

/// Counts subgroups of Z/m × Z/n by enumerating them as element sets.
///
/// Cyclic subgroups come from single generators. Every subgroup of a
/// rank-≤2 group is generated by two elements, and is the join of two cyclic
/// subgroups, so joining every pair of cyclic subgroups reaches all of them.
pub fn subgroup_oracle(m: u64, n: u64) -> Result<OracleCounts> {
    if m == 0 || n == 0 {
        return Err(domain!("group factors must be >= 1"));
    }
    if m * n > ORACLE_LIMIT {
        return Err(Error::Budget(format!(
            "oracle limited to |G| <= {ORACLE_LIMIT}, got {}",
            m * n
        )));
    }
    let (m, n) = (m as u32, n as u32);
    let size = (m * n) as usize;
    let add = |x: u32, y: u32| -> u32 {
        let (x1, x2) = (x / n, x % n);
        let (y1, y2) = (y / n, y % n);
        ((x1 + y1) % m) * n + (x2 + y2) % n
    };
    // Closure of a generating set under addition, by breadth-first search.
    let closure = |gens: &[u32]| -> Vec<u32> {
        let mut seen = vec![false; size];
        let mut stack = vec![0u32];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for &g in gens {
                let y = add(x, g);
                if !seen[y as usize] {
                    seen[y as usize] = true;
                    stack.push(y);
                }
            }
        }
        (0..size as u32).filter(|&i| seen[i as usize]).collect()
    };

    let mut cyclic: HashSet<Vec<u32>> = HashSet::new();
    let mut cyclic_gens = Vec::new();
    for g in 0..size as u32 {
        let h = closure(&[g]);
        if cyclic.insert(h) {
            cyclic_gens.push(g);
        }
    }
    let mut all: HashSet<Vec<u32>> = cyclic.clone();
    for (i, &g) in cyclic_gens.iter().enumerate() {
        for &h in &cyclic_gens[i + 1..] {
            all.insert(closure(&[g, h]));
        }
    }
    Ok(OracleCounts {
        total: all.len() as u64,
        cyclic: cyclic.len() as u64,
    })
}

/// Exact sides of the sandwich τ(d1d2)σ(d1) ≤ s(d1,d2) ≤ τ(d1²d2)σ(d1).
pub fn subgroup_bounds(shape: GroupShape) -> (u128, u128) {
    let sigma = factorize(shape.d1).expect("d1 >= 1").sigma();
    let lower = tau(shape.exponent()) as u128 * sigma;
    let upper = tau(shape.order()) as u128 * sigma;
    (lower, upper)
}
