//! Divisor sums in arithmetic progressions and short intervals.
//!
//! Full sums Σ_{n ≤ X, n ≡ a (q)} τ(n) use the hyperbola method; short
//! windows use a segmented divisor sieve. D(X, a, q) is the Dirichlet main
//! term (X/q)Σ_{k|q} (c_k(a)/k)(log(X/k²) + 2γ − 1) and Δ is the difference.

use num_integer::{gcd, Integer, Roots};
use rayon::prelude::*;

use crate::arith::{divisors, ramanujan_sum, RamanujanQuery};
use crate::error::{budget, domain, Result};
use crate::theorem::EULER_GAMMA;

/// Largest upper end accepted by the sieve and sum routines.
pub const SIEVE_LIMIT: u64 = 1_000_000_000;

/// Window lengths above this are summed by two hyperbola evaluations.
const SIEVE_WINDOW: u64 = 1 << 22;

/// The set {n : A < n ≤ B, n ≡ a mod q}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivisorWindow {
    pub a_lo: f64,
    pub b_hi: f64,
    pub a: i64,
    pub q: u64,
}

impl DivisorWindow {
    pub fn new(a_lo: f64, b_hi: f64, a: i64, q: u64) -> Result<Self> {
        if q == 0 {
            return Err(domain!("modulus q must be >= 1"));
        }
        if !(a_lo >= 0.0) || b_hi < a_lo || !b_hi.is_finite() {
            return Err(domain!("window ({a_lo}, {b_hi}] is not valid"));
        }
        Ok(Self { a_lo, b_hi, a, q })
    }

    fn residue(&self) -> u64 {
        self.a.rem_euclid(self.q as i64) as u64
    }

    fn integer_bounds(&self) -> Result<(u64, u64)> {
        let hi = self.b_hi.floor() as u64;
        if hi > SIEVE_LIMIT {
            return Err(budget!("window end {} exceeds {SIEVE_LIMIT}", self.b_hi));
        }
        Ok((self.a_lo.floor() as u64, hi))
    }
}

/// #{m : 1 ≤ m ≤ y, d·m ≡ a mod q}.
fn count_progression(d: u64, y: u64, a: u64, q: u64) -> u64 {
    if y == 0 {
        return 0;
    }
    let g = gcd(d, q);
    if a % g != 0 {
        return 0;
    }
    let q1 = q / g;
    if q1 == 1 {
        return y;
    }
    let d1 = (d / g) % q1;
    let inv = modular_inverse(d1, q1);
    let mut r = ((a / g) % q1) as u128 * inv as u128 % q1 as u128;
    if r == 0 {
        r = q1 as u128;
    }
    let r = r as u64;
    if r > y {
        0
    } else {
        (y - r) / q1 + 1
    }
}

fn modular_inverse(a: u64, m: u64) -> u64 {
    let e = (a as i64).extended_gcd(&(m as i64));
    e.x.rem_euclid(m as i64) as u64
}

/// Σ_{n ≤ x, n ≡ a mod q} τ(n) by the hyperbola method.
pub fn tau_sum_upto(x: u64, a: i64, q: u64) -> Result<u64> {
    if q == 0 {
        return Err(domain!("modulus q must be >= 1"));
    }
    if x > SIEVE_LIMIT {
        return Err(budget!("X = {x} exceeds {SIEVE_LIMIT}"));
    }
    let a = a.rem_euclid(q as i64) as u64;
    let s = x.sqrt();
    let mut pairs = 0u64;
    let mut square = 0u64;
    for d in 1..=s {
        pairs += count_progression(d, x / d, a, q);
        square += count_progression(d, s, a, q);
    }
    Ok(2 * pairs - square)
}

/// τ(n) for lo < n ≤ hi, by a segmented sieve over divisors d ≤ √hi.
pub fn tau_window(lo: u64, hi: u64) -> Vec<u32> {
    if hi <= lo {
        return Vec::new();
    }
    let len = (hi - lo) as usize;
    let mut tau = vec![0u32; len];
    for d in 1..=hi.sqrt() {
        let first = (lo / d + 1).max(d);
        for j in first..=hi / d {
            let n = d * j;
            tau[(n - lo - 1) as usize] += if j == d { 1 } else { 2 };
        }
    }
    tau
}

pub fn tau_sum_window(window: &DivisorWindow) -> Result<u64> {
    let (lo, hi) = window.integer_bounds()?;
    if hi <= lo {
        return Ok(0);
    }
    let (a, q) = (window.residue(), window.q);
    if hi - lo > SIEVE_WINDOW {
        return Ok(tau_sum_upto(hi, a as i64, q)? - tau_sum_upto(lo, a as i64, q)?);
    }
    let tau = tau_window(lo, hi);
    Ok(tau
        .iter()
        .enumerate()
        .filter(|(i, _)| (lo + 1 + *i as u64) % q == a)
        .map(|(_, &t)| t as u64)
        .sum())
}

/// Σ_{lo < n ≤ hi, n ≡ a mod q} τ(n) for every a mod q.
pub fn tau_sums_by_class(lo: u64, hi: u64, q: u64) -> Result<Vec<u64>> {
    if q == 0 {
        return Err(domain!("modulus q must be >= 1"));
    }
    if hi > SIEVE_LIMIT {
        return Err(budget!("window end {hi} exceeds {SIEVE_LIMIT}"));
    }
    let mut sums = vec![0u64; q as usize];
    for (i, t) in tau_window(lo, hi).into_iter().enumerate() {
        sums[((lo + 1 + i as u64) % q) as usize] += t as u64;
    }
    Ok(sums)
}

/// D(X, a, q) = (X/q)Σ_{k|q} (c_k(a)/k)(log(X/k²) + 2γ − 1).
pub fn dirichlet_main(x: f64, a: i64, q: u64) -> Result<f64> {
    if q == 0 {
        return Err(domain!("modulus q must be >= 1"));
    }
    if x < 1.0 {
        return Err(domain!("X must be >= 1, got {x}"));
    }
    let mut sum = 0.0;
    for k in divisors(q)? {
        let c = ramanujan_sum(RamanujanQuery::new(k, a)?) as f64;
        let kf = k as f64;
        sum += c / kf * ((x / (kf * kf)).ln() + 2.0 * EULER_GAMMA - 1.0);
    }
    Ok(x / q as f64 * sum)
}

/// Δ(X, a, q) = Σ_{n ≤ X, n ≡ a (q)} τ(n) − D(X, a, q).
pub fn delta(x: f64, a: i64, q: u64) -> Result<f64> {
    let exact = tau_sum_upto(x.floor() as u64, a, q)? as f64;
    Ok(exact - dirichlet_main(x, a, q)?)
}

fn main_window(a_lo: f64, b_hi: f64, a: i64, q: u64) -> Result<f64> {
    let hi = dirichlet_main(b_hi, a, q)?;
    let lo = if a_lo >= 1.0 {
        dirichlet_main(a_lo, a, q)?
    } else {
        0.0
    };
    Ok(hi - lo)
}

/// Δ(A, B, a, q) = Δ(B, a, q) − Δ(A, a, q).
pub fn delta_window(window: &DivisorWindow) -> Result<f64> {
    if window.b_hi == window.a_lo {
        return Ok(0.0);
    }
    let exact = tau_sum_window(window)? as f64;
    Ok(exact - main_window(window.a_lo, window.b_hi, window.a, window.q)?)
}

/// Which case of the mean-square bound the window falls under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// B − A < √B.
    Short,
    /// B − A = √B: both expressions evaluated, the larger kept.
    Boundary,
    /// √B < B − A ≤ √(AB).
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSquare {
    pub a_lo: f64,
    pub b_hi: f64,
    pub q: u64,
    pub lhs: f64,
    pub envelope: f64,
    pub ratio: f64,
    pub branch: Branch,
}

/// Right side of the bound without the (qB)^ε factor and implied constant.
pub fn envelope(a_lo: f64, b_hi: f64, q: u64) -> (f64, Branch) {
    let h = b_hi - a_lo;
    let qf = q as f64;
    let short = h.sqrt() / qf * (b_hi.powi(3) / a_lo).powf(0.25);
    let long = h.powf(4.0 / 3.0) / qf.powf(4.0 / 3.0) * (b_hi / a_lo).powf(1.0 / 3.0);
    let root = b_hi.sqrt();
    if h < root {
        (short, Branch::Short)
    } else if h > root {
        (long, Branch::Long)
    } else {
        (short.max(long), Branch::Boundary)
    }
}

/// (1/q)Σ_{a mod q} |Δ(A, B, a, q)|² against the envelope.
pub fn mean_square_experiment(a_lo: f64, b_hi: f64, q: u64) -> Result<MeanSquare> {
    if !(a_lo >= 1.0) || !(b_hi > a_lo) {
        return Err(domain!("need 1 <= A < B, got A = {a_lo}, B = {b_hi}"));
    }
    if q == 0 || q as f64 > a_lo.sqrt() {
        return Err(domain!("need 1 <= q <= sqrt(A), got q = {q}"));
    }
    if b_hi - a_lo > (a_lo * b_hi).sqrt() {
        return Err(domain!("need B - A <= sqrt(AB)"));
    }
    let (lo, hi) = (a_lo.floor() as u64, b_hi.floor() as u64);
    let sums = tau_sums_by_class(lo, hi, q)?;
    let mut total = 0.0;
    for (a, &s) in sums.iter().enumerate() {
        let d = s as f64 - main_window(a_lo, b_hi, a as i64, q)?;
        total += d * d;
    }
    let lhs = total / q as f64;
    let (env, branch) = envelope(a_lo, b_hi, q);
    Ok(MeanSquare {
        a_lo,
        b_hi,
        q,
        lhs,
        envelope: env,
        ratio: lhs / env,
        branch,
    })
}

/// Smallest h with h = ⌈√(A + h)⌉.
pub fn sqrt_gap(a_lo: u64) -> u64 {
    let mut h = (a_lo as f64).sqrt().ceil() as u64;
    loop {
        let next = ((a_lo + h) as f64).sqrt().ceil() as u64;
        if next == h {
            return h;
        }
        h = next;
    }
}

/// Window lengths ⌈A^0.3⌉, ⌈A^0.4⌉, ⌈√B⌉ and moduli 1, 2, 8, 25, ⌊A^(1/4)⌋ for one A.
pub fn grid_points(a_lo: u64) -> Vec<(u64, u64, u64)> {
    let af = a_lo as f64;
    let gaps = [
        af.powf(0.3).ceil() as u64,
        af.powf(0.4).ceil() as u64,
        sqrt_gap(a_lo),
    ];
    let mut moduli = vec![1u64, 2, 8, 25, af.powf(0.25).floor() as u64];
    moduli.sort_unstable();
    moduli.dedup();
    let mut out = Vec::new();
    for &h in &gaps {
        for &q in &moduli {
            out.push((a_lo, a_lo + h, q));
        }
    }
    out
}

/// Runs the experiment over every grid point of every A, in grid order.
pub fn mean_square_grid(a_values: &[u64]) -> Result<Vec<MeanSquare>> {
    let points: Vec<(u64, u64, u64)> = a_values.iter().flat_map(|&a| grid_points(a)).collect();
    points
        .par_iter()
        .map(|&(a, b, q)| mean_square_experiment(a as f64, b as f64, q))
        .collect()
}

/// Per-decade maxima of the ratio and the growth exponents between decades.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    /// (A, largest B, max ratio) per A value.
    pub maxima: Vec<(f64, f64, f64)>,
    /// log(max_{i+1}/max_i) / log(B_{i+1}/B_i).
    pub exponents: Vec<f64>,
}

impl GrowthReport {
    pub fn passes(&self, limit: f64) -> bool {
        self.exponents.iter().all(|&e| e <= limit)
    }
}

pub fn growth_report(rows: &[MeanSquare]) -> GrowthReport {
    let mut maxima: Vec<(f64, f64, f64)> = Vec::new();
    for r in rows {
        match maxima.iter_mut().find(|m| m.0 == r.a_lo) {
            Some(m) => {
                m.1 = m.1.max(r.b_hi);
                m.2 = m.2.max(r.ratio);
            }
            None => maxima.push((r.a_lo, r.b_hi, r.ratio)),
        }
    }
    maxima.sort_by(|x, y| x.0.total_cmp(&y.0));
    let exponents = maxima
        .windows(2)
        .map(|w| (w[1].2 / w[0].2).ln() / (w[1].1 / w[0].1).ln())
        .collect();
    GrowthReport { maxima, exponents }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::tau;

    #[test]
    fn small_sums() {
        assert_eq!(
            tau_sum_window(&DivisorWindow::new(0.0, 10.0, 0, 1).unwrap()).unwrap(),
            27
        );
        assert_eq!(
            tau_sum_window(&DivisorWindow::new(0.0, 10.0, 0, 2).unwrap()).unwrap(),
            17
        );
        assert_eq!(
            tau_sum_window(&DivisorWindow::new(5.0, 5.0, 0, 1).unwrap()).unwrap(),
            0
        );
        assert_eq!(tau_sum_upto(10, 0, 1).unwrap(), 27);
        assert_eq!(tau_sum_upto(10, 2, 2).unwrap(), 17);
    }

    #[test]
    fn sieve_matches_naive() {
        let naive: Vec<u32> = (1..=100_000u64).map(|n| tau(n) as u32).collect();
        assert_eq!(tau_window(0, 100_000), naive);
        assert_eq!(tau_window(77_777, 99_999), naive[77_777..99_999].to_vec());
        for q in [1u64, 2, 3, 7, 12, 30] {
            for a in 0..q as i64 {
                let expected: u64 = (1..=100_000u64)
                    .filter(|n| n % q == a as u64)
                    .map(|n| tau(n))
                    .sum();
                assert_eq!(tau_sum_upto(100_000, a, q).unwrap(), expected);
                let w = DivisorWindow::new(31_000.5, 100_000.0, a, q).unwrap();
                let expected_w: u64 = (31_001..=100_000u64)
                    .filter(|n| n % q == a as u64)
                    .map(|n| tau(n))
                    .sum();
                assert_eq!(tau_sum_window(&w).unwrap(), expected_w);
            }
        }
    }

    #[test]
    fn main_term_examples() {
        let d = dirichlet_main(10.0, 0, 1).unwrap();
        assert!((d - 24.5702).abs() < 1e-4, "{d}");
        assert!((delta(10.0, 0, 1).unwrap() - 2.4298).abs() < 1e-4);
        let x = 1e5;
        let total: f64 = (0..12).map(|a| dirichlet_main(x, a, 12).unwrap()).sum();
        assert!((total - dirichlet_main(x, 0, 1).unwrap()).abs() < 1e-6 * total);
        assert_eq!(
            delta_window(&DivisorWindow::new(7.0, 7.0, 0, 1).unwrap()).unwrap(),
            0.0
        );
    }

    #[test]
    fn telescoping() {
        for q in [2u64, 3, 12, 32] {
            let x = 1e6;
            let total: f64 = (0..q as i64).map(|a| delta(x, a, q).unwrap()).sum();
            let whole = delta(x, 0, 1).unwrap();
            assert!(
                (total - whole).abs() <= 1e-6 * whole.abs().max(1.0),
                "q={q}: {total} vs {whole}"
            );
        }
    }

    #[test]
    fn envelope_branches() {
        let (a, b) = (1e6, 1e6 + 500.0);
        let (env, branch) = envelope(a, b, 1);
        assert_eq!(branch, Branch::Short);
        assert!((env - 500f64.sqrt() * (b.powi(3) / a).powf(0.25)).abs() < 1e-9 * env);
        let (_, long) = envelope(1e6, 1e6 + 5000.0, 4);
        assert_eq!(long, Branch::Long);
        let exact = envelope(100.0 - 10.0, 100.0, 1);
        assert_eq!(exact.1, Branch::Boundary);
    }

    #[test]
    fn mean_square_domain() {
        let ms = mean_square_experiment(1e6, 1e6 + 500.0, 16).unwrap();
        assert!(ms.lhs.is_finite() && ms.envelope > 0.0 && ms.ratio.is_finite());
        assert!(mean_square_experiment(1e6, 1e6 + 500.0, 1001).is_err());
        assert!(mean_square_experiment(100.0, 1000.0, 2).is_err());
        assert!(mean_square_experiment(1e4, 1e4, 2).is_err());
    }

    #[test]
    fn window_delta_is_difference() {
        let w = DivisorWindow::new(5000.0, 9000.0, 3, 8).unwrap();
        let lhs = delta_window(&w).unwrap();
        let rhs = delta(9000.0, 3, 8).unwrap() - delta(5000.0, 3, 8).unwrap();
        assert!((lhs - rhs).abs() < 1e-6);
    }

    #[test]
    fn sqrt_gap_fixed_point() {
        for a in [10_000u64, 123_456, 10_000_000] {
            let h = sqrt_gap(a);
            assert_eq!(h, ((a + h) as f64).sqrt().ceil() as u64);
        }
    }
}
