//! Modular arithmetic, factorization and sieve utilities.
//!
//! Everything here is pure and re-entrant; [`TotientTable`] is immutable
//! after construction and can be shared across threads.

use crate::error::{Error, Result};

/// Default memory cap for [`TotientTable::new`].
pub const DEFAULT_TOTIENT_LIMIT: u64 = 10_000_000;

const TRIAL_DIVISION_BOUND: u64 = 1_000_000;

/// Prime factorization of a positive 64-bit integer.
///
/// Factors are sorted by prime; the empty list represents 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    pub value: u64,
    pub factors: Vec<(u64, u32)>,
}

impl Factorization {
    /// Recomposes the factored value; used by tests as a sanity oracle.
    pub fn recompose(&self) -> u64 {
        self.factors
            .iter()
            .fold(1u64, |acc, &(p, e)| acc * p.pow(e))
    }
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// gcd(|m|, |n|, c) with the convention gcd(0, 0, c) = c.
pub fn gcd3(m: i64, n: i64, c: u64) -> u64 {
    gcd(gcd(m.unsigned_abs(), n.unsigned_abs()), c)
}

pub fn mul_mod(a: u64, b: u64, c: u64) -> u64 {
    ((a as u128 * b as u128) % c as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, c: u64) -> u64 {
    let mut r = 1 % c;
    a %= c;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a, c);
        }
        a = mul_mod(a, a, c);
        e >>= 1;
    }
    r
}

/// Modular inverse of `a` modulo `c`, normalized to [1, c].
///
/// Returns `None` when gcd(a, c) > 1. For c = 1 the answer is 1, the
/// degenerate representative used throughout the point-set module.
pub fn mod_inverse(a: i64, c: u64) -> Option<u64> {
    assert!(c >= 1, "modulus must be positive");
    if c == 1 {
        return Some(1);
    }
    let a = a.rem_euclid(c as i64) as u64;
    // extended Euclid on (a, c)
    let (mut r0, mut r1) = (a as i64, c as i64);
    let (mut s0, mut s1) = (1i64, 0i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    if r0 != 1 {
        return None;
    }
    let inv = s0.rem_euclid(c as i64) as u64;
    Some(if inv == 0 { c } else { inv })
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    // deterministic Miller-Rabin for u64
    let d = n - 1;
    let s = d.trailing_zeros();
    let d = d >> s;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn pollard_rho(n: u64) -> u64 {
    // Brent's cycle-finding variant; n must be composite and odd.
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd(x.abs_diff(y), n);
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

fn factor_into(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime(n) {
        out.push(n);
        return;
    }
    let d = pollard_rho(n);
    factor_into(d, out);
    factor_into(n / d, out);
}

/// Factors `n >= 1` by trial division up to 10^6 with a Pollard-rho
/// fallback for the remaining cofactor.
pub fn factorize(n: u64) -> Factorization {
    assert!(n >= 1, "factorize requires n >= 1");
    let mut factors: Vec<(u64, u32)> = Vec::new();
    let mut m = n;
    let push = |p: u64, e: u32, factors: &mut Vec<(u64, u32)>| {
        if e > 0 {
            factors.push((p, e));
        }
    };
    let mut d = 2u64;
    while d <= TRIAL_DIVISION_BOUND && d * d <= m {
        let mut e = 0;
        while m % d == 0 {
            m /= d;
            e += 1;
        }
        push(d, e, &mut factors);
        d += if d == 2 { 1 } else { 2 };
    }
    if m > 1 {
        if m <= TRIAL_DIVISION_BOUND * TRIAL_DIVISION_BOUND {
            // cofactor below the square of the trial bound is prime
            factors.push((m, 1));
        } else {
            let mut primes = Vec::new();
            factor_into(m, &mut primes);
            primes.sort_unstable();
            let mut i = 0;
            while i < primes.len() {
                let p = primes[i];
                let mut e = 0u32;
                while i < primes.len() && primes[i] == p {
                    e += 1;
                    i += 1;
                }
                factors.push((p, e));
            }
        }
    }
    factors.sort_unstable_by_key(|&(p, _)| p);
    Factorization { value: n, factors }
}

/// Number of divisors tau(n).
pub fn divisor_count(n: u64) -> u64 {
    factorize(n)
        .factors
        .iter()
        .map(|&(_, e)| e as u64 + 1)
        .product()
}

/// Moebius function, in {-1, 0, 1}.
pub fn moebius(n: u64) -> i64 {
    let f = factorize(n);
    if f.factors.iter().any(|&(_, e)| e > 1) {
        return 0;
    }
    if f.factors.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Euler totients phi(1..=X) from a linear sieve, with prefix sums
/// N(y) = sum_{c <= y} phi(c).
#[derive(Debug, Clone)]
pub struct TotientTable {
    limit: u64,
    phi: Vec<u64>,
    prefix: Vec<u64>,
}

impl TotientTable {
    pub fn new(limit: u64) -> Result<Self> {
        Self::with_cap(limit, DEFAULT_TOTIENT_LIMIT)
    }

    pub fn with_cap(limit: u64, cap: u64) -> Result<Self> {
        if limit < 1 {
            return Err(Error::Precondition("totient_table requires X >= 1".into()));
        }
        if limit > cap {
            return Err(Error::Capacity(format!(
                "totient table limit {limit} exceeds cap {cap}"
            )));
        }
        let n = limit as usize;
        let mut phi = vec![0u64; n + 1];
        let mut primes: Vec<usize> = Vec::new();
        let mut composite = vec![false; n + 1];
        phi[1] = 1;
        for i in 2..=n {
            if !composite[i] {
                primes.push(i);
                phi[i] = i as u64 - 1;
            }
            for &p in &primes {
                let ip = i * p;
                if ip > n {
                    break;
                }
                composite[ip] = true;
                if i % p == 0 {
                    phi[ip] = phi[i] * p as u64;
                    break;
                }
                phi[ip] = phi[i] * (p as u64 - 1);
            }
        }
        let mut prefix = vec![0u64; n + 1];
        for i in 1..=n {
            prefix[i] = prefix[i - 1] + phi[i];
        }
        Ok(TotientTable { limit, phi, prefix })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn phi(&self, c: u64) -> u64 {
        self.phi[c as usize]
    }

    /// N(y) = sum_{c <= y} phi(c).
    pub fn prefix(&self, y: u64) -> u64 {
        self.prefix[y as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn factorize_examples() {
        assert_eq!(factorize(1).factors, vec![]);
        assert_eq!(factorize(12).factors, vec![(2, 2), (3, 1)]);
        assert_eq!(factorize(600).factors, vec![(2, 3), (3, 1), (5, 2)]);
    }

    #[test]
    fn factorize_recomposes_random() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let n: u64 = rng.gen_range(1..=u64::MAX >> 20);
            let f = factorize(n);
            assert_eq!(f.recompose(), n, "recompose failed for {n}");
            for w in f.factors.windows(2) {
                assert!(w[0].0 < w[1].0);
            }
        }
    }

    #[test]
    fn factorize_large_semiprime() {
        // forces the Pollard-rho fallback
        let p = 1_000_000_007u64;
        let q = 998_244_353u64;
        let f = factorize(p * q);
        assert_eq!(f.factors, vec![(q, 1), (p, 1)]);
    }

    #[test]
    fn mod_inverse_examples() {
        assert_eq!(mod_inverse(3, 10), Some(7));
        assert_eq!(mod_inverse(4, 10), None);
        assert_eq!(mod_inverse(1, 1), Some(1));
        assert_eq!(mod_inverse(-3, 10), Some(3)); // (-3)*3 = -9 = 1 mod 10
    }

    #[test]
    fn mod_inverse_range_and_correctness() {
        for c in 1..200u64 {
            for a in 1..=c {
                match mod_inverse(a as i64, c) {
                    Some(b) => {
                        assert!(1 <= b && b <= c);
                        assert_eq!(mul_mod(a % c, b % c, c), 1 % c);
                    }
                    None => assert!(gcd(a, c) > 1),
                }
            }
        }
    }

    #[test]
    fn totient_examples() {
        let t = TotientTable::new(600).unwrap();
        assert_eq!(t.prefix(10), 32);
        assert_eq!(t.prefix(1), 1);
        assert_eq!(t.prefix(600), 109_500);
    }

    #[test]
    fn totient_capacity_error() {
        assert!(matches!(
            TotientTable::with_cap(100, 50),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn totient_divisor_sum_identity() {
        // sum_{d | n} phi(d) = n for all n <= 10^4
        let t = TotientTable::new(10_000).unwrap();
        for n in 1..=10_000u64 {
            let f = factorize(n);
            let mut divisors = vec![1u64];
            for &(p, e) in &f.factors {
                let snapshot = divisors.clone();
                let mut pe = 1u64;
                for _ in 0..e {
                    pe *= p;
                    divisors.extend(snapshot.iter().map(|d| d * pe));
                }
            }
            let s: u64 = divisors.iter().map(|&d| t.phi(d)).sum();
            assert_eq!(s, n);
        }
    }

    #[test]
    fn totient_prefix_asymptotic() {
        let x = 1000u64;
        let t = TotientTable::new(x).unwrap();
        let ratio = t.prefix(x) as f64 * std::f64::consts::PI.powi(2) / (3.0 * (x * x) as f64);
        assert!((ratio - 1.0).abs() < 0.02, "ratio = {ratio}");
    }

    #[test]
    fn tau_and_moebius_examples() {
        assert_eq!(divisor_count(12), 6);
        assert_eq!(divisor_count(1), 1);
        assert_eq!(moebius(6), 1);
        assert_eq!(moebius(4), 0);
        assert_eq!(moebius(30), -1);
    }
}
