//! Elliptic curves y² = x³ + ax + b over F_p (p ≥ 5): point counts, group
//! shapes and exact tallies over all nonsingular models.
//!
//! A tally over models counts each isomorphism class (p−1)/|Aut(E)| times,
//! so model-uniform averages carry the 1/|Aut| weighting automatically.
//! [`TallyMode::Orbit`] exploits this by visiting one model per class:
//!
//! * a = 0: classes are cosets of sixth powers in F_p^*,
//! * b = 0: classes are cosets of fourth powers,
//! * otherwise λ = a³/b² and the quadratic twist class of b/a determine the
//!   class, represented by (λ, λ) and (λn², λn³) for a non-residue n.

use std::collections::BTreeMap;

use num_integer::{gcd, Integer};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::arith::{factorize, is_prime, pow_mod};
use crate::error::{domain, invariant, Result};
use crate::groups::{stat_on_shape, Formula, GroupShape, Stat};

/// Largest prime accepted by the enumeration entry points.
pub const MAX_PRIME: u64 = 5000;

/// Primes up to this bound have every randomized shape checked by a full scan.
pub const AUDIT_LIMIT: u64 = 61;

/// Random points drawn before a non-trivial d1 candidate is accepted.
pub const SAMPLE_POINTS: usize = 24;

/// Per-prime lookup tables: quadratic character, square roots and inverses.
#[derive(Debug, Clone)]
pub struct FieldTables {
    p: u64,
    chi: Vec<i8>,
    sqrt: Vec<u32>,
    inv: Vec<u32>,
}

impl FieldTables {
    pub fn new(p: u64) -> Result<Self> {
        check_prime(p)?;
        let n = p as usize;
        let mut chi = vec![-1i8; n];
        let mut sqrt = vec![u32::MAX; n];
        chi[0] = 0;
        sqrt[0] = 0;
        for y in 1..=(p - 1) / 2 {
            let sq = (y * y % p) as usize;
            chi[sq] = 1;
            sqrt[sq] = y as u32;
        }
        let mut inv = vec![0u32; n];
        inv[1] = 1;
        for i in 2..n {
            inv[i] = ((p - (p / i as u64) * inv[n % i] as u64 % p) % p) as u32;
        }
        Ok(Self { p, chi, sqrt, inv })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// Legendre symbol (x/p) with (0/p) = 0.
    pub fn chi(&self, x: u64) -> i8 {
        self.chi[(x % self.p) as usize]
    }

    pub fn sqrt(&self, x: u64) -> Option<u64> {
        match self.sqrt[(x % self.p) as usize] {
            u32::MAX => None,
            y => Some(y as u64),
        }
    }

    pub fn inv(&self, x: u64) -> u64 {
        self.inv[(x % self.p) as usize] as u64
    }
}

fn check_prime(p: u64) -> Result<()> {
    if p < 5 || !is_prime(p) {
        return Err(domain!("p must be a prime >= 5, got {p}"));
    }
    if p > MAX_PRIME {
        return Err(crate::error::budget!(
            "p = {p} exceeds the enumeration limit {MAX_PRIME}"
        ));
    }
    Ok(())
}

/// A short Weierstrass model y² = x³ + ax + b over F_p.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CurveModel {
    p: u64,
    a: u64,
    b: u64,
}

impl CurveModel {
    pub fn new(p: u64, a: u64, b: u64) -> Result<Self> {
        check_prime(p)?;
        let (a, b) = (a % p, b % p);
        if is_singular(p, a, b) {
            return Err(domain!("y^2 = x^3 + {a}x + {b} is singular mod {p}"));
        }
        Ok(Self { p, a, b })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn a(&self) -> u64 {
        self.a
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    fn rhs(&self, x: u64) -> u64 {
        let p = self.p;
        (x * x % p * x + self.a * x + self.b) % p
    }
}

fn is_singular(p: u64, a: u64, b: u64) -> bool {
    (4 * (a * a % p * a % p) + 27 * (b * b % p)) % p == 0
}

/// Hasse interval [p_−, p_+] with p_± = (√p ± 1)², as integers.
pub fn hasse_interval(p: u64) -> (u64, u64) {
    let root = 2.0 * (p as f64).sqrt();
    let lower = (p as f64 + 1.0 - root).ceil() as u64;
    let upper = (p as f64 + 1.0 + root).floor() as u64;
    (lower, upper)
}

/// N = p + 1 + Σ_x χ(x³ + ax + b).
pub fn point_count(model: &CurveModel, tables: &FieldTables) -> Result<u64> {
    if tables.p != model.p {
        return Err(domain!(
            "tables for p = {} used with a curve over F_{}",
            tables.p,
            model.p
        ));
    }
    let sum: i64 = (0..model.p)
        .map(|x| tables.chi[model.rhs(x) as usize] as i64)
        .sum();
    Ok((model.p as i64 + 1 + sum) as u64)
}

type Point = Option<(u64, u64)>;

struct Arith<'a> {
    model: &'a CurveModel,
    tables: &'a FieldTables,
}

impl Arith<'_> {
    fn add(&self, p1: Point, p2: Point) -> Point {
        let p = self.model.p;
        let (x1, y1) = match p1 {
            None => return p2,
            Some(pt) => pt,
        };
        let (x2, y2) = match p2 {
            None => return p1,
            Some(pt) => pt,
        };
        let lambda = if x1 == x2 {
            if (y1 + y2) % p == 0 {
                return None;
            }
            (3 * x1 % p * x1 + self.model.a) % p * self.tables.inv(2 * y1) % p
        } else {
            (y2 + p - y1) % p * self.tables.inv(x2 + p - x1) % p
        };
        let x3 = (lambda * lambda % p + 2 * p - x1 - x2) % p;
        let y3 = (lambda * ((x1 + p - x3) % p) % p + p - y1) % p;
        Some((x3, y3))
    }

    fn mul(&self, pt: Point, mut k: u64) -> Point {
        let mut acc = None;
        let mut base = pt;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.add(acc, base);
            }
            base = self.add(base, base);
            k >>= 1;
        }
        acc
    }

    /// Order of `pt` given that it divides `n`, whose prime factors are `primes`.
    fn order(&self, pt: Point, n: u64, primes: &[u64]) -> u64 {
        let mut ord = n;
        for &q in primes {
            while ord % q == 0 && self.mul(pt, ord / q).is_none() {
                ord /= q;
            }
        }
        ord
    }
}

/// Options for [`group_shape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeOptions {
    pub seed: u64,
    /// Compare every randomized result against a full scan.
    pub audit: bool,
}

impl Default for ShapeOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            audit: false,
        }
    }
}

fn shape_from_exponent(model: &CurveModel, n: u64, exponent: u64) -> Option<GroupShape> {
    if exponent == 0 || n % exponent != 0 {
        return None;
    }
    let d1 = n / exponent;
    if (model.p - 1) % d1 != 0 || n % (d1 * d1) != 0 {
        return None;
    }
    Some(GroupShape {
        d1,
        d2: n / (d1 * d1),
    })
}

/// Largest d with d | p−1 and d² | N: an upper bound for d1.
fn d1_ceiling(p: u64, n: u64) -> u64 {
    let g = gcd(n, p - 1);
    let mut best = 1;
    for d in 1..=g {
        if d * d > n {
            break;
        }
        if g % d == 0 && n % (d * d) == 0 {
            best = d;
        }
    }
    best
}

/// The shape computed from the orders of every point on the curve.
pub fn group_shape_full_scan(
    model: &CurveModel,
    n: u64,
    tables: &FieldTables,
) -> Result<GroupShape> {
    let primes: Vec<u64> = factorize(n)?.primes().collect();
    let ar = Arith { model, tables };
    let p = model.p;
    let mut exponent = 1u64;
    for x in 0..p {
        if let Some(y) = tables.sqrt(model.rhs(x)) {
            exponent = exponent.lcm(&ar.order(Some((x, y)), n, &primes));
            if exponent == n {
                break;
            }
        }
    }
    shape_from_exponent(model, n, exponent).ok_or_else(|| {
        invariant!(
            "full scan of y^2 = x^3 + {}x + {} mod {p} gave exponent {exponent} for N = {n}",
            model.a,
            model.b
        )
    })
}

/// E(F_p) ≅ Z/d1 × Z/d1d2, with d1 = N / exponent.
///
/// The exponent is the lcm of the orders of random points, which can only
/// undershoot. A candidate d1 = 1 is therefore exact; a larger candidate is
/// confirmed with a second batch of points, and a full scan settles any
/// candidate that breaks d1 | p−1.
pub fn group_shape(
    model: &CurveModel,
    n: u64,
    tables: &FieldTables,
    opts: ShapeOptions,
) -> Result<GroupShape> {
    let p = model.p;
    let (lo, hi) = hasse_interval(p);
    if n < lo || n > hi {
        return Err(domain!(
            "N = {n} lies outside the Hasse interval [{lo}, {hi}] for p = {p}"
        ));
    }
    let shape = if d1_ceiling(p, n) == 1 {
        GroupShape { d1: 1, d2: n }
    } else {
        let primes: Vec<u64> = factorize(n)?.primes().collect();
        let ar = Arith { model, tables };
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ p.rotate_left(32));
        rng.set_stream(model.a * p + model.b);
        let mut exponent = 1u64;
        let mut drawn = 0;
        while drawn < 2 * SAMPLE_POINTS && exponent < n {
            let x = rng.gen_range(0..p);
            let Some(y) = tables.sqrt(model.rhs(x)) else {
                continue;
            };
            let y = if rng.gen::<bool>() { (p - y) % p } else { y };
            exponent = exponent.lcm(&ar.order(Some((x, y)), n, &primes));
            drawn += 1;
        }
        match shape_from_exponent(model, n, exponent) {
            Some(shape) => shape,
            None => group_shape_full_scan(model, n, tables)?,
        }
    };
    if opts.audit || p <= AUDIT_LIMIT {
        let full = group_shape_full_scan(model, n, tables)?;
        if full != shape {
            return Err(invariant!(
                "sampled shape {shape} disagrees with full scan {full} for a = {}, b = {} mod {p}",
                model.a,
                model.b
            ));
        }
    }
    Ok(shape)
}

/// How a tally visits the nonsingular models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TallyMode {
    /// One model per isomorphism class, weighted by its orbit size.
    #[default]
    Orbit,
    /// Every one of the p² − p nonsingular models.
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TallyOptions {
    pub mode: TallyMode,
    pub seed: u64,
}

/// One visited model together with the number of models it stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightedModel {
    pub model: CurveModel,
    pub weight: u64,
}

fn primitive_root(p: u64) -> u64 {
    let primes: Vec<u64> = factorize(p - 1).expect("p >= 5").primes().collect();
    (2..p)
        .find(|&g| primes.iter().all(|&q| pow_mod(g, (p - 1) / q, p) != 1))
        .expect("cyclic multiplicative group")
}

/// One representative per isomorphism class with weight (p−1)/|Aut|.
pub fn class_representatives(p: u64) -> Result<Vec<WeightedModel>> {
    check_prime(p)?;
    let g = primitive_root(p);
    let mut reps = Vec::with_capacity(2 * p as usize + 10);
    let mut push = |a: u64, b: u64, weight: u64| {
        reps.push(WeightedModel {
            model: CurveModel { p, a, b },
            weight,
        });
    };
    let k6 = gcd(6, p - 1);
    for i in 0..k6 {
        push(0, pow_mod(g, i, p), (p - 1) / k6);
    }
    let k4 = gcd(4, p - 1);
    for i in 0..k4 {
        push(pow_mod(g, i, p), 0, (p - 1) / k4);
    }
    let nonresidue = (2..p)
        .find(|&n| pow_mod(n, (p - 1) / 2, p) == p - 1)
        .expect("p odd");
    let (n2, n3) = (nonresidue * nonresidue % p, pow_mod(nonresidue, 3, p));
    for lambda in 1..p {
        if (4 * lambda + 27) % p == 0 {
            continue;
        }
        push(lambda, lambda, (p - 1) / 2);
        push(lambda * n2 % p, lambda * n3 % p, (p - 1) / 2);
    }
    Ok(reps)
}

fn all_models(p: u64) -> Result<Vec<WeightedModel>> {
    check_prime(p)?;
    let mut out = Vec::with_capacity((p * p) as usize);
    for a in 0..p {
        for b in 0..p {
            if !is_singular(p, a, b) {
                out.push(WeightedModel {
                    model: CurveModel { p, a, b },
                    weight: 1,
                });
            }
        }
    }
    Ok(out)
}

/// Models visited by `mode`, in a fixed order.
pub fn weighted_models(p: u64, mode: TallyMode) -> Result<Vec<WeightedModel>> {
    match mode {
        TallyMode::Orbit => class_representatives(p),
        TallyMode::Exhaustive => all_models(p),
    }
}

/// A visited model with its point count and shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelRecord {
    pub model: CurveModel,
    pub weight: u64,
    pub n: u64,
    pub shape: GroupShape,
}

/// Point counts and shapes over every visited model, in visiting order.
pub fn enumerate_models(p: u64, opts: TallyOptions) -> Result<Vec<ModelRecord>> {
    let tables = FieldTables::new(p)?;
    let models = weighted_models(p, opts.mode)?;
    let shape_opts = ShapeOptions {
        seed: opts.seed,
        audit: false,
    };
    models
        .par_iter()
        .with_min_len(16)
        .map(|wm| {
            let n = point_count(&wm.model, &tables)?;
            let shape = group_shape(&wm.model, n, &tables, shape_opts)?;
            Ok(ModelRecord {
                model: wm.model,
                weight: wm.weight,
                n,
                shape,
            })
        })
        .collect()
}

/// Number of nonsingular models over F_p with each group shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructureTally {
    pub p: u64,
    pub counts: BTreeMap<GroupShape, u64>,
}

impl StructureTally {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn count(&self, shape: GroupShape) -> u64 {
        self.counts.get(&shape).copied().unwrap_or(0)
    }

    /// Shapes by decreasing count, ties broken by shape order.
    pub fn by_frequency(&self) -> Vec<(GroupShape, u64)> {
        let mut v: Vec<_> = self.counts.iter().map(|(&s, &c)| (s, c)).collect();
        v.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
        v
    }

    /// Exact average of `stat` over models.
    pub fn average_exact(&self, stat: Stat, formula: Formula) -> Ratio<u128> {
        let num: u128 = self
            .counts
            .iter()
            .map(|(&s, &c)| stat_on_shape(s, stat, formula) as u128 * c as u128)
            .sum();
        Ratio::new(num, self.total() as u128)
    }

    pub fn average(&self, stat: Stat, formula: Formula) -> f64 {
        ratio_to_f64(&self.average_exact(stat, formula))
    }
}

pub(crate) fn ratio_to_f64(r: &Ratio<u128>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn tally_records(p: u64, records: &[ModelRecord]) -> StructureTally {
    let mut counts = BTreeMap::new();
    for r in records {
        *counts.entry(r.shape).or_insert(0) += r.weight;
    }
    StructureTally { p, counts }
}

pub fn tally_structures(p: u64) -> Result<StructureTally> {
    tally_structures_with(p, TallyOptions::default())
}

pub fn tally_structures_with(p: u64, opts: TallyOptions) -> Result<StructureTally> {
    let records = enumerate_models(p, opts)?;
    let tally = tally_records(p, &records);
    if tally.total() != p * (p - 1) {
        return Err(invariant!(
            "tally over F_{p} has {} models, expected {}",
            tally.total(),
            p * (p - 1)
        ));
    }
    Ok(tally)
}

/// counts[shape] / (p(p−1)).
pub fn empirical_probability(tally: &StructureTally, shape: GroupShape) -> Ratio<u64> {
    Ratio::new(tally.count(shape), tally.p * (tally.p - 1))
}

/// Average of `stat` over all nonsingular models.
pub fn weighted_average(p: u64, stat: Stat, formula: Formula) -> Result<f64> {
    Ok(ratio_to_f64(&weighted_average_exact(
        p,
        stat,
        formula,
        TallyOptions::default(),
    )?))
}

/// Exact model average, summed model by model rather than through a tally.
pub fn weighted_average_exact(
    p: u64,
    stat: Stat,
    formula: Formula,
    opts: TallyOptions,
) -> Result<Ratio<u128>> {
    let records = enumerate_models(p, opts)?;
    let mut num = 0u128;
    let mut den = 0u128;
    for r in &records {
        num += r.weight as u128 * stat_on_shape(r.shape, stat, formula) as u128;
        den += r.weight as u128;
    }
    Ok(Ratio::new(num, den))
}

/// Fraction of models with N = p + 1.
pub fn supersingular_fraction(p: u64) -> Result<f64> {
    let records = enumerate_models(p, TallyOptions::default())?;
    let ss: u64 = records
        .iter()
        .filter(|r| r.n == p + 1)
        .map(|r| r.weight)
        .sum();
    Ok(ss as f64 / (p * (p - 1)) as f64)
}
