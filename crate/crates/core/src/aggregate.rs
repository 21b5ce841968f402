//! Sums of Kloosterman sums over moduli: complete sums T(m,n;X), the
//! triple sum K(M,N;X), second moments and bound-ratio diagnostics.
//!
//! The scan iterates over c once, builds the (a, a^{-1}) table per
//! modulus, and runs the (m, n) grid in the inner loop. Work is
//! parallelized over blocks of consecutive moduli; per-c contributions
//! are folded back in ascending c order, so results are independent of
//! the thread count.

use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};
use std::io::Write;

use crate::error::{Error, Result};
use crate::kloosterman::{InverseTable, KahanSum};

/// Default budget on the total number of inner-sum terms in one scan.
pub const DEFAULT_TERM_BUDGET: u64 = 1_000_000_000;

const C_BLOCK: u64 = 64;

/// Evaluation backend for grid scans. `Dft` computes, for each fixed n,
/// all residues m mod c at once via a length-c transform; it is opt-in
/// and validated against the direct path by the test suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Direct,
    Dft,
}

/// Partial sums T(m,n;y) = sum_{c<=y} S(m,n;c) for y = 1..=X.
#[derive(Debug, Clone)]
pub struct CompleteSumSeries {
    pub m: i64,
    pub n: i64,
    pub x_limit: u64,
    pub partial: Vec<f64>,
}

impl CompleteSumSeries {
    /// T(m,n;X), the final value of the series.
    pub fn total(&self) -> f64 {
        *self.partial.last().expect("X >= 1")
    }
}

/// Grid of |T(m,n;X)| over the dyadic block [M,2M) x [N,2N) with both
/// signs, together with the triple sum K(M,N;X).
#[derive(Debug, Clone)]
pub struct SumGrid {
    pub m_base: u64,
    pub n_base: u64,
    pub x_limit: u64,
    /// ((m, n), |T(m,n;X)|) in fixed grid order.
    pub entries: Vec<((i64, i64), f64)>,
    pub total: f64,
}

/// Second moment K2(N;X) over N <= |n| < 2N, plus the normalized variant
/// with 1/c weights over X <= c < 2X and both signs of the second
/// argument.
#[derive(Debug, Clone, Copy)]
pub struct MomentResult {
    pub n_base: u64,
    pub x_limit: u64,
    pub value: f64,
    pub normalized: f64,
}

/// Signed dyadic range: +v, -v for each magnitude v in [base, 2*base).
fn signed_range(base: u64) -> Vec<i64> {
    let mut out = Vec::with_capacity(2 * base as usize);
    for v in base..2 * base {
        out.push(v as i64);
        out.push(-(v as i64));
    }
    out
}

/// Runs `per_c` over c in [lo, hi] in parallel blocks and folds the
/// results in ascending c order.
fn scan_moduli<T: Send>(
    lo: u64,
    hi: u64,
    per_c: impl Fn(u64, &InverseTable) -> T + Sync,
    mut fold: impl FnMut(u64, T),
) {
    let mut c0 = lo;
    while c0 <= hi {
        let c1 = (c0 + C_BLOCK - 1).min(hi);
        let block: Vec<(u64, T)> = (c0..=c1)
            .into_par_iter()
            .map(|c| {
                let table = InverseTable::new(c);
                (c, per_c(c, &table))
            })
            .collect();
        for (c, contrib) in block {
            fold(c, contrib);
        }
        c0 = c1 + 1;
    }
}

fn check_budget(terms_per_c: u64, lo: u64, hi: u64, budget: u64) -> Result<()> {
    // phi(c) < c, so c-sum times the grid size bounds the term count
    let moduli_terms: u64 = (lo..=hi).sum::<u64>().max(1);
    let needed = moduli_terms.saturating_mul(terms_per_c);
    if needed > budget {
        return Err(Error::Capacity(format!(
            "scan needs up to {needed} terms, budget is {budget}"
        )));
    }
    Ok(())
}

/// T(m,n;y) for all prefixes y <= X.
pub fn complete_sum_series(m: i64, n: i64, x_limit: u64, budget: u64) -> Result<CompleteSumSeries> {
    if x_limit < 1 {
        return Err(Error::Precondition("complete_sum_series requires X >= 1".into()));
    }
    check_budget(1, 1, x_limit, budget)?;
    let mut partial = Vec::with_capacity(x_limit as usize);
    let mut acc = KahanSum::default();
    scan_moduli(
        1,
        x_limit,
        |_, table| table.eval(m, n),
        |_, s| {
            acc.add(s);
            partial.push(acc.value());
        },
    );
    Ok(CompleteSumSeries {
        m,
        n,
        x_limit,
        partial,
    })
}

/// The triple sum K(M,N;X) over all 4MN signed pairs.
pub fn triple_sum(m_base: u64, n_base: u64, x_limit: u64, budget: u64) -> Result<SumGrid> {
    triple_sum_with(m_base, n_base, x_limit, budget, Backend::Direct)
}

pub fn triple_sum_with(
    m_base: u64,
    n_base: u64,
    x_limit: u64,
    budget: u64,
    backend: Backend,
) -> Result<SumGrid> {
    if m_base < 1 || n_base < 1 || x_limit < 1 {
        return Err(Error::Precondition("triple_sum requires M, N, X >= 1".into()));
    }
    let ms = signed_range(m_base);
    let ns = signed_range(n_base);
    check_budget((ms.len() * ns.len()) as u64, 1, x_limit, budget)?;

    let pairs: Vec<(i64, i64)> = ms
        .iter()
        .flat_map(|&m| ns.iter().map(move |&n| (m, n)))
        .collect();
    let mut sums: Vec<KahanSum> = vec![KahanSum::default(); pairs.len()];
    scan_moduli(
        1,
        x_limit,
        |c, table| match backend {
            Backend::Direct => pairs.iter().map(|&(m, n)| table.eval(m, n)).collect::<Vec<f64>>(),
            Backend::Dft => eval_pairs_dft(c, table, &ms, &ns, &pairs),
        },
        |_, contrib| {
            for (acc, s) in sums.iter_mut().zip(contrib) {
                acc.add(s);
            }
        },
    );

    let entries: Vec<((i64, i64), f64)> = pairs
        .iter()
        .zip(&sums)
        .map(|(&p, acc)| (p, acc.value().abs()))
        .collect();
    let mut total = KahanSum::default();
    for &(_, v) in &entries {
        total.add(v);
    }
    Ok(SumGrid {
        m_base,
        n_base,
        x_limit,
        entries,
        total: total.value(),
    })
}

/// All S(m,n;c) of the grid for one modulus via length-c transforms, one
/// per distinct n: S(m,n;c) is the coefficient at m of the inverse
/// transform of a -> e(n * a^{-1} / c) on the coprime residues.
fn eval_pairs_dft(
    c: u64,
    table: &InverseTable,
    ms: &[i64],
    ns: &[i64],
    pairs: &[(i64, i64)],
) -> Vec<f64> {
    let len = c as usize;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_inverse(len);
    let scale = 2.0 * std::f64::consts::PI / c as f64;
    let mut by_n: std::collections::HashMap<i64, Vec<Complex64>> = std::collections::HashMap::new();
    for &n in ns {
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for &(a, b) in table.pairs() {
            let r = (n as i128 * b as i128).rem_euclid(c as i128) as u64;
            let t = scale * r as f64;
            buf[(a % c) as usize] = Complex64::new(t.cos(), t.sin());
        }
        fft.process(&mut buf);
        by_n.insert(n, buf);
    }
    let _ = ms;
    pairs
        .iter()
        .map(|&(m, n)| {
            let spec = &by_n[&n];
            spec[m.rem_euclid(c as i64) as usize].re
        })
        .collect()
}

/// K2(N;X) and the normalized dyadic variant.
pub fn second_moment(n_base: u64, x_limit: u64, budget: u64) -> Result<MomentResult> {
    if n_base < 1 || x_limit < 1 {
        return Err(Error::Precondition("second_moment requires N, X >= 1".into()));
    }
    let ns = signed_range(n_base);
    check_budget(ns.len() as u64, 1, 2 * x_limit, budget)?;

    // K2: T(n, 1; X) per signed n over c <= X
    let mut sums: Vec<KahanSum> = vec![KahanSum::default(); ns.len()];
    scan_moduli(
        1,
        x_limit,
        |_, table| ns.iter().map(|&n| table.eval(n, 1)).collect::<Vec<f64>>(),
        |_, contrib| {
            for (acc, s) in sums.iter_mut().zip(contrib) {
                acc.add(s);
            }
        },
    );
    let mut value = KahanSum::default();
    for acc in &sums {
        let t = acc.value();
        value.add(t * t);
    }

    // normalized: positive n, both signs of the second argument,
    // 1/c weights over X <= c < 2X
    let pos: Vec<i64> = (n_base..2 * n_base).map(|v| v as i64).collect();
    let mut weighted: Vec<(KahanSum, KahanSum)> =
        vec![(KahanSum::default(), KahanSum::default()); pos.len()];
    if 2 * x_limit - 1 >= x_limit {
        scan_moduli(
            x_limit,
            2 * x_limit - 1,
            |c, table| {
                pos.iter()
                    .map(|&n| {
                        let w = 1.0 / c as f64;
                        (w * table.eval(n, 1), w * table.eval(n, -1))
                    })
                    .collect::<Vec<(f64, f64)>>()
            },
            |_, contrib| {
                for ((ap, am), (sp, sm)) in weighted.iter_mut().zip(contrib) {
                    ap.add(sp);
                    am.add(sm);
                }
            },
        );
    }
    let mut normalized = KahanSum::default();
    for (ap, am) in &weighted {
        normalized.add(ap.value() * ap.value());
        normalized.add(am.value() * am.value());
    }

    Ok(MomentResult {
        n_base,
        x_limit,
        value: value.value(),
        normalized: normalized.value(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Triple,
    Moment2,
    Linnik,
}

impl ReportKind {
    pub fn label(self) -> &'static str {
        match self {
            ReportKind::Triple => "triple",
            ReportKind::Moment2 => "moment2",
            ReportKind::Linnik => "linnik",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReportRow {
    pub m_base: u64,
    pub n_base: u64,
    pub x_limit: u64,
    pub kind: ReportKind,
    pub measured: f64,
    pub envelope: f64,
    pub ratio: f64,
}

/// Theorem envelope with the o(1) exponents set to zero.
pub fn envelope(kind: ReportKind, m_base: u64, n_base: u64, x_limit: u64) -> f64 {
    let (m, n, x) = (m_base as f64, n_base as f64, x_limit as f64);
    match kind {
        ReportKind::Triple => m * n * x + (m * n).powf(2.0 / 3.0) * x.powf(7.0 / 6.0),
        ReportKind::Moment2 => n * x * x + n.powf(1.0 / 3.0) * x.powf(7.0 / 3.0),
        ReportKind::Linnik => x,
    }
}

/// Measured aggregate against the theorem envelope for each grid triple.
/// Ratios are reported, never asserted: the paper's constants are
/// ineffective.
pub fn bound_ratio_report(
    grid: &[(u64, u64, u64, ReportKind)],
    budget: u64,
) -> Result<Vec<ReportRow>> {
    if grid.is_empty() {
        return Err(Error::Precondition("bound_ratio_report requires a non-empty grid".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &(m_base, n_base, x_limit, kind) in grid {
        let measured = match kind {
            ReportKind::Triple => triple_sum(m_base, n_base, x_limit, budget)?.total,
            ReportKind::Moment2 => second_moment(n_base, x_limit, budget)?.value,
            ReportKind::Linnik => complete_sum_series(1, 1, x_limit, budget)?.total().abs(),
        };
        let env = envelope(kind, m_base, n_base, x_limit);
        rows.push(ReportRow {
            m_base,
            n_base,
            x_limit,
            kind,
            measured,
            envelope: env,
            ratio: measured / env,
        });
    }
    Ok(rows)
}

/// CSV schema: `M,N,X,kind,measured,envelope,ratio`, floats with 17
/// significant digits.
pub fn write_report_csv<W: Write>(rows: &[ReportRow], mut w: W) -> Result<()> {
    writeln!(w, "M,N,X,kind,measured,envelope,ratio")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.m_base,
            r.n_base,
            r.x_limit,
            r.kind.label(),
            crate::fmt17(r.measured),
            crate::fmt17(r.envelope),
            crate::fmt17(r.ratio)
        )?;
    }
    Ok(())
}
