//! Consolidated verification suite: every release-gating property in
//! one deterministic run with a machine-readable pass/fail report.
//! Output contains no timing data, so repeated runs (and runs under
//! different thread counts) produce byte-identical JSON.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::time::{Duration, Instant};

use crate::aggregate;
use crate::config::ExperimentConfig;
use crate::discrepancy::{
    self, BoxMode, GridOffsets, Region, TorusBox, CONVEX_ETA,
};
use crate::error::Result;
use crate::fmt17;
use crate::kloosterman::{self, InverseTable, Query};
use crate::pointset::{self, TorusPoints};

/// Regression cap for box discrepancy scaled by X^{5/6}, recorded from
/// the first full run over X in {25, 50, 100, 200, 400} (max observed
/// 2.4776 at X = 50) with ~5% headroom; the asymptotic constant itself
/// is ineffective, so this is a frozen regression bound, not a theorem
/// constant.
pub const BOX_SCALED_CAP: f64 = 2.6;

#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRun {
    pub criteria: Vec<Criterion>,
    pub all_pass: bool,
}

impl ReportRun {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

pub fn run_all(cfg: &ExperimentConfig) -> Result<ReportRun> {
    let criteria = vec![
        figure_count(cfg)?,
        weil_bound_suite(cfg)?,
        route_equivalence()?,
        keystone_identity(cfg)?,
        hyperbola_structure(cfg)?,
        hyperbola_floor(cfg)?,
        box_envelope(cfg)?,
        cover_invariants(cfg)?,
        exact_small_oracle(cfg)?,
        repeat_determinism(cfg)?,
        moment_oracle(cfg)?,
    ];
    let all_pass = criteria.iter().all(|c| c.pass);
    Ok(ReportRun { criteria, all_pass })
}

fn within(d: Duration, cap_secs: u64) -> bool {
    d < Duration::from_secs(cap_secs)
}

/// 1: N(600) = 109500 in under 5 s.
fn figure_count(cfg: &ExperimentConfig) -> Result<Criterion> {
    let t = Instant::now();
    let ps = pointset::generate_with_cap(600, cfg.point_cap.max(600))?;
    let ok_time = within(t.elapsed(), 5);
    let pass = ps.count() == 109_500 && ok_time;
    Ok(Criterion {
        id: 1,
        name: "point count N(600)",
        pass,
        detail: format!("count={} expected=109500", ps.count()),
    })
}

/// 2: |S(m,n;c)| within the Weil bound on a dense small grid and 10^4
/// random triples, in under 60 s.
fn weil_bound_suite(cfg: &ExperimentConfig) -> Result<Criterion> {
    let t = Instant::now();
    let slack = 1.0 + 1e-9;
    let grid_viol: usize = (1..=500u64)
        .into_par_iter()
        .map(|c| {
            let table = InverseTable::new(c);
            let mut v = 0;
            for m in -8i64..=8 {
                for n in -8i64..=8 {
                    if table.eval(m, n).abs() > kloosterman::weil_bound(Query::new(m, n, c)) * slack
                    {
                        v += 1;
                    }
                }
            }
            v
        })
        .sum();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let samples: Vec<(i64, i64, u64)> = (0..10_000)
        .map(|_| {
            (
                rng.gen_range(-1_000_000i64..=1_000_000),
                rng.gen_range(-1_000_000i64..=1_000_000),
                rng.gen_range(1u64..=10_000),
            )
        })
        .collect();
    let rand_viol: usize = samples
        .par_iter()
        .map(|&(m, n, c)| {
            let s = InverseTable::new(c).eval(m, n);
            usize::from(s.abs() > kloosterman::weil_bound(Query::new(m, n, c)) * slack)
        })
        .sum();

    let ok_time = within(t.elapsed(), 60);
    Ok(Criterion {
        id: 2,
        name: "Weil bound",
        pass: grid_viol == 0 && rand_viol == 0 && ok_time,
        detail: format!("grid_violations={grid_viol} random_violations={rand_viol}"),
    })
}

/// 3: multiplicative fast path agrees with direct summation, and the
/// Selberg divisor identity holds, within stated tolerances.
fn route_equivalence() -> Result<Criterion> {
    let route_viol: usize = (1..=5000u64)
        .into_par_iter()
        .map(|c| {
            let table = InverseTable::new(c);
            let tol = kloosterman::route_tolerance(c);
            let mut v = 0;
            for &m in &[1i64, 2, 3, 5] {
                for &n in &[1i64, 2, 3, 5] {
                    let d = table.eval(m, n);
                    let f = kloosterman::fast(Query::new(m, n, c)).expect("fast").value;
                    if (d - f).abs() > tol {
                        v += 1;
                    }
                }
            }
            v
        })
        .sum();

    let selberg_viol: usize = (1..=300u64)
        .into_par_iter()
        .map(|c| {
            let mut v = 0;
            for m in 1i64..=6 {
                for n in 1i64..=6 {
                    let lhs = kloosterman::fast(Query::new(m, n, c)).expect("lhs").value;
                    let rhs: f64 = kloosterman::selberg_rewrite(Query::new(m, n, c))
                        .expect("rewrite")
                        .into_iter()
                        .map(|(d, q)| d as f64 * kloosterman::fast(q).expect("term").value)
                        .sum();
                    if (lhs - rhs).abs() > 1e-8 * c as f64 {
                        v += 1;
                    }
                }
            }
            v
        })
        .sum();

    Ok(Criterion {
        id: 3,
        name: "evaluation route equivalence",
        pass: route_viol == 0 && selberg_viol == 0,
        detail: format!("route_violations={route_viol} selberg_violations={selberg_viol}"),
    })
}

/// 4: Weyl sums of S(X) equal complete Kloosterman sums over moduli,
/// in under 120 s.
fn keystone_identity(cfg: &ExperimentConfig) -> Result<Criterion> {
    let t = Instant::now();
    let mut viol = 0usize;
    let mut worst = 0.0f64;
    for x in [50u64, 100, 200] {
        let ps = pointset::generate_with_cap(x, cfg.point_cap.max(x))?;
        let pairs: Vec<(i64, i64)> = (-8i64..=8)
            .flat_map(|m1| (-8i64..=8).map(move |m2| (m1, m2)))
            .collect();
        let errs: Vec<f64> = pairs
            .par_iter()
            .map(|&(m1, m2)| {
                let w = ps.weyl_sum(m1, m2);
                let total = aggregate::complete_sum_series(m1, m2, x, cfg.term_budget)
                    .expect("series")
                    .total();
                let tol = cfg.rel_tolerance * total.abs().max(1.0);
                let err = (w.re - total).abs().max(w.im.abs()) / tol;
                err
            })
            .collect();
        for e in errs {
            worst = worst.max(e);
            if e > 1.0 {
                viol += 1;
            }
        }
    }
    let ok_time = within(t.elapsed(), 120);
    Ok(Criterion {
        id: 4,
        name: "Weyl sum = complete Kloosterman sum",
        pass: viol == 0 && ok_time,
        detail: format!("violations={viol} worst_err_over_tol={}", fmt17(worst)),
    })
}

/// 5: the points below the hyperbola xy = 1/X are exactly the diagonal
/// tail {(1/c, 1/c) : sqrt(X) < c <= X}, and the band y <= 1/(2X) is
/// empty.
fn hyperbola_structure(cfg: &ExperimentConfig) -> Result<Criterion> {
    let mut issues = Vec::new();
    for x in [9u64, 100, 400] {
        let ps = pointset::generate_with_cap(x, cfg.point_cap.max(x))?;
        let got: std::collections::BTreeSet<(u64, u64, u64)> = ps
            .hyperbola_points()
            .into_iter()
            .map(|p| (p.a, p.b, p.c))
            .collect();
        let expect: std::collections::BTreeSet<(u64, u64, u64)> = (1..=x)
            .filter(|&c| c * c > x) // c > sqrt(X), exact in integers
            .map(|c| (1, 1, c))
            .collect();
        if got != expect {
            issues.push(format!("X={x}: tail mismatch"));
        }
        let band = TorusBox::new(0.0, 0.0, 1.0 - 1e-12, 1.0 / (2 * x) as f64)?;
        let cnt = ps.count_in_box(&band);
        if cnt != 0 {
            issues.push(format!("X={x}: band count {cnt}"));
        }
    }
    Ok(Criterion {
        id: 5,
        name: "hyperbola gap structure",
        pass: issues.is_empty(),
        detail: if issues.is_empty() { "exact".into() } else { issues.join("; ") },
    })
}

/// 6: discrepancy of the hyperbola-complement convex region stays
/// above the (ln X - 5/2)/X floor.
fn hyperbola_floor(cfg: &ExperimentConfig) -> Result<Criterion> {
    let mut pass = true;
    let mut parts = Vec::new();
    for x in [50u64, 100, 200, 400] {
        let ps = pointset::generate_with_cap(x, cfg.point_cap.max(x))?;
        let hb = discrepancy::hyperbola_convex_lower_bound(&ps)?;
        if hb.measured < hb.floor {
            pass = false;
        }
        parts.push(format!("X={x}:{}/{}", fmt17(hb.measured), fmt17(hb.floor)));
    }
    Ok(Criterion {
        id: 6,
        name: "convex discrepancy floor (measured/floor)",
        pass,
        detail: parts.join(" "),
    })
}

/// 7: box discrepancy of S(X) scaled by X^{5/6} stays under the frozen
/// regression constant.
fn box_envelope(cfg: &ExperimentConfig) -> Result<Criterion> {
    let mut pass = true;
    let mut parts = Vec::new();
    for x in [25u64, 50, 100, 200, 400] {
        let ps = pointset::generate_with_cap(x, cfg.point_cap.max(x))?;
        let mode = if x <= 25 { BoxMode::ExactSmall } else { BoxMode::Search };
        let d = discrepancy::box_discrepancy_with_cap(&ps, mode, cfg.exact_small_cap)?;
        let scaled = d.value * (x as f64).powf(5.0 / 6.0);
        if !(scaled <= BOX_SCALED_CAP) {
            pass = false;
        }
        parts.push(format!("X={x}:{}", fmt17(scaled)));
    }
    Ok(Criterion {
        id: 7,
        name: "box discrepancy * X^(5/6) regression cap",
        pass,
        detail: format!("cap={} {}", fmt17(BOX_SCALED_CAP), parts.join(" ")),
    })
}

/// 8: structural invariants of dyadic covers on a 50-polygon corpus at
/// depths up to 12, in under 60 s.
fn cover_invariants(cfg: &ExperimentConfig) -> Result<Criterion> {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(8));
    let mut issues = 0usize;
    for trial in 0..50u32 {
        let poly = discrepancy::random_convex_polygon(&mut rng, 4 + (trial as usize % 9));
        let depth = 1 + trial % 12;
        let region = Region::Polygon(poly.clone());
        let cover = discrepancy::dyadic_cover(&region, depth, GridOffsets::default())?;
        if !discrepancy::verify_cover(&region, &cover) {
            issues += 1;
            continue;
        }
        for level in 1..=depth {
            if cover.family(level).len() as f64 > CONVEX_ETA * 2f64.powf(level as f64 + 1.5) {
                issues += 1;
            }
        }
        let defect = poly.area() - cover.covered_area();
        if !(-1e-12..=CONVEX_ETA * 2f64.powf(-(depth as f64) + 0.5) + 1e-12).contains(&defect) {
            issues += 1;
        }
    }
    let ok_time = within(t.elapsed(), 60);
    Ok(Criterion {
        id: 8,
        name: "dyadic cover invariants",
        pass: issues == 0 && ok_time,
        detail: format!("violations={issues} polygons=50"),
    })
}

/// Independent supremum enumeration for small sets: direct
/// comparison-based membership per candidate corner tuple.
pub fn brute_box_discrepancy(coords: &[[f64; 2]]) -> f64 {
    let n = coords.len() as f64;
    let mut xs: Vec<f64> = coords.iter().map(|c| c[0]).collect();
    let mut ys: Vec<f64> = coords.iter().map(|c| c[1]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.dedup();
    let in_closed = |v: f64, s: f64, t: f64| if s <= t { s <= v && v <= t } else { v >= s || v <= t };
    let in_open = |v: f64, s: f64, t: f64| {
        if s == t {
            v != s
        } else if s < t {
            s < v && v < t
        } else {
            v > s || v < t
        }
    };
    let mut best = f64::NEG_INFINITY;
    for &sx in &xs {
        for &tx in &xs {
            let lx = (tx - sx).rem_euclid(1.0);
            let lxo = if sx == tx { 1.0 } else { lx };
            for &sy in &ys {
                for &ty in &ys {
                    let ly = (ty - sy).rem_euclid(1.0);
                    let c_closed = coords
                        .iter()
                        .filter(|&&[x, y]| in_closed(x, sx, tx) && in_closed(y, sy, ty))
                        .count();
                    best = best.max(c_closed as f64 / n - lx * ly);
                    let c_open = coords
                        .iter()
                        .filter(|&&[x, y]| in_open(x, sx, tx) && in_open(y, sy, ty))
                        .count();
                    let lyo = if sy == ty { 1.0 } else { ly };
                    best = best.max(lxo * lyo - c_open as f64 / n);
                }
            }
        }
    }
    best
}

/// 9: exact-small box discrepancy equals the brute-force supremum on
/// every S(X) with X <= 12 and on 20 seeded random sets.
fn exact_small_oracle(cfg: &ExperimentConfig) -> Result<Criterion> {
    let mut mismatches = 0usize;
    for x in 1..=12u64 {
        let ps = pointset::generate_with_cap(x, cfg.point_cap.max(x))?;
        let got = discrepancy::box_discrepancy(&ps, BoxMode::ExactSmall)?;
        if got.value != brute_box_discrepancy(ps.coords()) {
            mismatches += 1;
        }
    }
    for k in 0..20u64 {
        let n = 3 + (k as usize * 7) % 58;
        let pts = discrepancy::random_baseline(n, cfg.seed.wrapping_add(900 + k))?;
        let got = discrepancy::box_discrepancy(&pts, BoxMode::ExactSmall)?;
        if got.value != brute_box_discrepancy(pts.coords()) {
            mismatches += 1;
        }
    }
    Ok(Criterion {
        id: 9,
        name: "exact-small box discrepancy = brute force",
        pass: mismatches == 0,
        detail: format!("mismatches={mismatches} sets=32"),
    })
}

/// 10: repeated in-process runs of the parallel aggregates serialize to
/// identical bytes. Cross-thread-count identity of the whole report is
/// exercised externally by running the binary under different thread
/// settings and comparing outputs.
fn repeat_determinism(cfg: &ExperimentConfig) -> Result<Criterion> {
    let run = || -> Result<Vec<u8>> {
        let rows = aggregate::bound_ratio_report(
            &[
                (2, 2, 40, aggregate::ReportKind::Triple),
                (1, 3, 30, aggregate::ReportKind::Moment2),
                (1, 1, 50, aggregate::ReportKind::Linnik),
            ],
            cfg.term_budget,
        )?;
        let mut buf = Vec::new();
        aggregate::write_report_csv(&rows, &mut buf)?;
        Ok(buf)
    };
    let a = run()?;
    let b = run()?;
    Ok(Criterion {
        id: 10,
        name: "deterministic parallel aggregation",
        pass: a == b,
        detail: format!("bytes={} identical={}", a.len(), a == b),
    })
}

/// 11: second moment equals an independent brute-force double loop.
fn moment_oracle(cfg: &ExperimentConfig) -> Result<Criterion> {
    let mut worst = 0.0f64;
    let mut viol = 0usize;
    for n_base in 1..=4u64 {
        for x in [7u64, 16, 30] {
            let got = aggregate::second_moment(n_base, x, cfg.term_budget)?;
            // plain double loop, no batching, no parallelism
            let mut value = 0.0;
            for sign in [1i64, -1] {
                for n in n_base..2 * n_base {
                    let mut t = 0.0;
                    for c in 1..=x {
                        t += InverseTable::new(c).eval(sign * n as i64, 1);
                    }
                    value += t * t;
                }
            }
            let mut normalized = 0.0;
            for sign in [1i64, -1] {
                for n in n_base..2 * n_base {
                    let mut t = 0.0;
                    for c in x..2 * x {
                        t += InverseTable::new(c).eval(n as i64, sign) / c as f64;
                    }
                    normalized += t * t;
                }
            }
            let e1 = (got.value - value).abs() / value.abs().max(1.0);
            let e2 = (got.normalized - normalized).abs() / normalized.abs().max(1.0);
            worst = worst.max(e1).max(e2);
            if e1 > 1e-9 || e2 > 1e-9 {
                viol += 1;
            }
        }
    }
    Ok(Criterion {
        id: 11,
        name: "second moment vs brute force",
        pass: viol == 0,
        detail: format!("violations={viol} worst_rel_err={}", fmt17(worst)),
    })
}
