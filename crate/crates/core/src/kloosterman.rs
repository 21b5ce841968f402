//! Kloosterman sums S(m,n;c), Ramanujan sums S(0,n;c), the Weil bound
//! and the Selberg identity.
//!
//! Values are real floats. The defining sum is accumulated in ascending
//! order of the residue `a` with compensated summation, so results are
//! bit-for-bit reproducible for fixed inputs. The imaginary part is never
//! formed: conjugate pairing of `a` and `c - a` makes the sum real.

use crate::arith::{self, Factorization};
use crate::error::{Error, Result};

/// Default cap for direct evaluation (size of the modulus).
pub const DEFAULT_DIRECT_CAP: u64 = 10_000_000;

/// A Kloosterman sum query S(m, n; c). Signs of m, n matter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Query {
    pub m: i64,
    pub n: i64,
    pub c: u64,
}

impl Query {
    pub fn new(m: i64, n: i64, c: u64) -> Self {
        assert!(c >= 1, "modulus must be positive");
        Query { m, n, c }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    CrtSplit,
}

/// Evaluated sum together with the method used and the number of terms
/// (= phi(c)) in the defining sum.
#[derive(Debug, Clone, Copy)]
pub struct Value {
    pub value: f64,
    pub method: Method,
    pub term_count: u64,
}

/// Compensated (Kahan) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Table of (a, a^{-1} mod c) pairs for all a in [1, c] coprime to c,
/// ascending in a. Built once per modulus and shared read-only when many
/// (m, n) pairs are evaluated for the same c.
#[derive(Debug, Clone)]
pub struct InverseTable {
    c: u64,
    pairs: Vec<(u64, u64)>,
}

impl InverseTable {
    pub fn new(c: u64) -> Self {
        assert!(c >= 1);
        if c == 1 {
            return InverseTable {
                c,
                pairs: vec![(1, 1)],
            };
        }
        let mut pairs = Vec::new();
        for a in 1..=c {
            if let Some(b) = arith::mod_inverse(a as i64, c) {
                pairs.push((a, b));
            }
        }
        InverseTable { c, pairs }
    }

    pub fn modulus(&self) -> u64 {
        self.c
    }

    pub fn phi(&self) -> u64 {
        self.pairs.len() as u64
    }

    pub fn pairs(&self) -> &[(u64, u64)] {
        &self.pairs
    }

    /// S(m, n; c) with the residue table reused across calls.
    pub fn eval(&self, m: i64, n: i64) -> f64 {
        let c = self.c;
        if c == 1 {
            return 1.0;
        }
        let ci = c as i128;
        let scale = 2.0 * std::f64::consts::PI / c as f64;
        let mut acc = KahanSum::default();
        for &(a, b) in &self.pairs {
            let r = (m as i128 * a as i128 + n as i128 * b as i128).rem_euclid(ci) as u64;
            acc.add((scale * r as f64).cos());
        }
        acc.value()
    }

    /// Full complex accumulation of the defining sum; the imaginary part
    /// should vanish up to rounding. Exposed for diagnostics and tests.
    pub fn eval_complex(&self, m: i64, n: i64) -> (f64, f64) {
        let c = self.c;
        let ci = c as i128;
        let scale = 2.0 * std::f64::consts::PI / c as f64;
        let (mut re, mut im) = (KahanSum::default(), KahanSum::default());
        for &(a, b) in &self.pairs {
            let r = (m as i128 * a as i128 + n as i128 * b as i128).rem_euclid(ci) as u64;
            let t = scale * r as f64;
            re.add(t.cos());
            im.add(t.sin());
        }
        (re.value(), im.value())
    }
}

/// Direct evaluation of S(m, n; c) from the defining sum.
pub fn direct(q: Query) -> Result<Value> {
    direct_with_cap(q, DEFAULT_DIRECT_CAP)
}

pub fn direct_with_cap(q: Query, cap: u64) -> Result<Value> {
    if q.c > cap {
        return Err(Error::Capacity(format!(
            "direct evaluation cap {cap} exceeded by c = {}",
            q.c
        )));
    }
    let table = InverseTable::new(q.c);
    Ok(Value {
        value: table.eval(q.m, q.n),
        method: Method::Direct,
        term_count: table.phi(),
    })
}

/// CRT-split evaluation: c is factored into prime powers and the factors
/// are combined by twisted multiplicativity,
/// S(m,n;c1*c2) = S(m*v, n*v; c1) * S(m*u, n*u; c2) with v = c2^{-1} mod c1
/// and u = c1^{-1} mod c2. Falls back to the direct path when c is a
/// prime power. Correctness is certified against `direct` by the test
/// suite, not assumed.
pub fn fast(q: Query) -> Result<Value> {
    fast_with_cap(q, DEFAULT_DIRECT_CAP)
}

pub fn fast_with_cap(q: Query, cap: u64) -> Result<Value> {
    let f = arith::factorize(q.c);
    if f.factors.len() <= 1 {
        return direct_with_cap(q, cap);
    }
    let mut value = 1.0f64;
    let mut terms = 1u64;
    for &(c1, rest) in &prime_power_split(&f) {
        let v = arith::mod_inverse(rest as i64, c1).expect("coprime by construction") as i64;
        let part = direct_with_cap(
            Query::new(reduce(q.m, v, c1), reduce(q.n, v, c1), c1),
            cap,
        )?;
        value *= part.value;
        terms *= part.term_count;
    }
    Ok(Value {
        value,
        method: Method::CrtSplit,
        term_count: terms,
    })
}

/// (prime power q_i, c / q_i) for each prime power in the factorization.
fn prime_power_split(f: &Factorization) -> Vec<(u64, u64)> {
    f.factors
        .iter()
        .map(|&(p, e)| {
            let q = p.pow(e);
            (q, f.value / q)
        })
        .collect()
}

fn reduce(m: i64, v: i64, c: u64) -> i64 {
    ((m as i128 * v as i128).rem_euclid(c as i128)) as i64
}

/// Ramanujan sum S(0, n; c).
pub fn ramanujan(n: i64, c: u64) -> f64 {
    InverseTable::new(c).eval(0, n)
}

/// Weil bound gcd(m,n,c)^{1/2} c^{1/2} tau(c), with gcd(0,0,c) read as c.
pub fn weil_bound(q: Query) -> f64 {
    let g = arith::gcd3(q.m, q.n, q.c);
    (g as f64).sqrt() * (q.c as f64).sqrt() * arith::divisor_count(q.c) as f64
}

/// Absolute tolerance used when comparing evaluation routes for a given
/// modulus: 1e-9 * max(1, sqrt(c) * tau(c)).
pub fn route_tolerance(c: u64) -> f64 {
    1e-9 * ((c as f64).sqrt() * arith::divisor_count(c) as f64).max(1.0)
}

/// The Selberg identity S(m,n;c) = sum_{d | gcd(m,n,c)} d * S(mn/d^2, 1; c/d),
/// returned as the list of (d, query) expansion terms. Requires m, n >= 1:
/// the identity as used here needs the product mn, and signed parameters
/// are handled upstream via S(n, +-1; c) directly.
pub fn selberg_rewrite(q: Query) -> Result<Vec<(u64, Query)>> {
    if q.m <= 0 || q.n <= 0 {
        return Err(Error::Precondition(
            "selberg_rewrite requires m, n >= 1".into(),
        ));
    }
    let g = arith::gcd3(q.m, q.n, q.c);
    let mut terms = Vec::new();
    for d in 1..=g {
        if g % d != 0 {
            continue;
        }
        let mn = q.m as i128 * q.n as i128 / (d as i128 * d as i128);
        terms.push((d, Query::new(mn as i64, 1, q.c / d)));
    }
    Ok(terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(m: i64, n: i64, c: u64) -> f64 {
        direct(Query::new(m, n, c)).unwrap().value
    }

    #[test]
    fn direct_examples() {
        assert_eq!(s(5, 7, 1), 1.0);
        assert!((s(1, 1, 3) - (-1.0)).abs() < 1e-12);
        assert!((s(1, 1, 4) - (-2.0)).abs() < 1e-12);
        for c in 1..=50u64 {
            let phi = InverseTable::new(c).phi();
            assert!((s(0, 0, c) - phi as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn fast_matches_direct_examples() {
        for (m, n, c) in [(1, 1, 12), (2, 3, 35), (1, 1, 7), (4, -5, 360)] {
            let d = s(m, n, c);
            let f = fast(Query::new(m, n, c)).unwrap().value;
            assert!(
                (d - f).abs() <= route_tolerance(c),
                "S({m},{n};{c}): direct {d} vs fast {f}"
            );
        }
    }

    #[test]
    fn fast_prime_modulus_uses_direct_path() {
        let v = fast(Query::new(1, 1, 13)).unwrap();
        assert_eq!(v.method, Method::Direct);
    }

    #[test]
    fn ramanujan_examples() {
        assert!((ramanujan(1, 4) - 0.0).abs() < 1e-12);
        assert!((ramanujan(1, 6) - 1.0).abs() < 1e-12);
        assert_eq!(ramanujan(17, 1), 1.0);
    }

    #[test]
    fn ramanujan_moebius_and_gcd_bound() {
        // c_c(n) = sum_{d | gcd(n,c)} d * mu(c/d); |c_c(n)| <= gcd(c, n)
        for c in 1..=120u64 {
            for n in 1..=12i64 {
                let mut expect = 0i64;
                let g = crate::arith::gcd(n as u64, c);
                for d in 1..=g {
                    if g % d == 0 {
                        expect += d as i64 * crate::arith::moebius(c / d);
                    }
                }
                let got = ramanujan(n, c);
                assert!((got - expect as f64).abs() < 1e-9, "c_{c}({n})");
                assert!(got.abs() <= g as f64 + 1e-9);
            }
        }
    }

    #[test]
    fn weil_bound_examples() {
        assert!((weil_bound(Query::new(1, 1, 4)) - 6.0).abs() < 1e-12);
        assert!((weil_bound(Query::new(2, 2, 4)) - 2.0f64.sqrt() * 2.0 * 3.0).abs() < 1e-12);
        for c in 1..=60u64 {
            let phi = InverseTable::new(c).phi() as f64;
            assert!(weil_bound(Query::new(0, 0, c)) >= phi - 1e-9);
        }
    }

    #[test]
    fn selberg_examples() {
        let terms = selberg_rewrite(Query::new(2, 2, 4)).unwrap();
        assert_eq!(terms, vec![(1, Query::new(4, 1, 4)), (2, Query::new(1, 1, 2))]);
        assert!(s(4, 1, 4).abs() < 1e-12);
        assert!((2.0 * s(1, 1, 2) - 2.0).abs() < 1e-12);
        assert!((s(2, 2, 4) - 2.0).abs() < 1e-12);

        let trivial = selberg_rewrite(Query::new(1, 1, 30)).unwrap();
        assert_eq!(trivial, vec![(1, Query::new(1, 1, 30))]);

        let t9 = selberg_rewrite(Query::new(3, 3, 9)).unwrap();
        assert_eq!(t9.len(), 2);
        let rhs: f64 = t9.iter().map(|&(d, q)| d as f64 * s(q.m, q.n, q.c)).sum();
        assert!((rhs - s(3, 3, 9)).abs() <= 1e-8 * 9.0);
    }

    #[test]
    fn selberg_rejects_nonpositive() {
        assert!(selberg_rewrite(Query::new(0, 1, 4)).is_err());
        assert!(selberg_rewrite(Query::new(1, -1, 4)).is_err());
    }

    #[test]
    fn symmetries_small() {
        for c in 1..=80u64 {
            let t = InverseTable::new(c);
            let tol = 1e-9 * t.phi() as f64;
            for m in -4..=4i64 {
                for n in -4..=4i64 {
                    let v = t.eval(m, n);
                    assert!((v - t.eval(n, m)).abs() <= tol, "S(m,n)=S(n,m) at ({m},{n};{c})");
                    assert!((v - t.eval(-m, -n)).abs() <= tol);
                }
            }
        }
    }

    #[test]
    fn realness_small() {
        for c in 1..=60u64 {
            let t = InverseTable::new(c);
            for (m, n) in [(1, 1), (2, -3), (-5, 7), (0, 4)] {
                let (_, im) = t.eval_complex(m, n);
                assert!(im.abs() < 1e-9 * t.phi().max(1) as f64);
            }
        }
    }

    #[test]
    fn direct_capacity_error() {
        assert!(matches!(
            direct_with_cap(Query::new(1, 1, 1000), 10),
            Err(Error::Capacity(_))
        ));
    }
}
