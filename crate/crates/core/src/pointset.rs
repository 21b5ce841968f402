//! The modular-inverse point set S(X): all pairs (a/c, b/c) with
//! ab = 1 mod c, 1 <= a, b <= c <= X, viewed on the torus.
//!
//! Points are stored as exact integer triples. Coordinates use the
//! representative range (0, 1]: the c = 1 point sits at (1, 1), not at
//! the origin, matching the defining inequality 1 <= a, b <= c. Box
//! membership is decided by exact rational comparison; only disc
//! membership falls back to careful floating comparison.

use num_complex::Complex64;
use std::cmp::Ordering;
use std::io::Write;

use crate::discrepancy::{Disc, TorusBox};
use crate::error::{Error, Result};
use crate::kloosterman::KahanSum;

/// Default cap on X for [`generate`] (about 7.6M points at X = 5000).
pub const DEFAULT_POINT_CAP: u64 = 5000;

/// One point of S(X) as an exact triple: a * b = 1 mod c, 1 <= a, b <= c.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InversePair {
    pub a: u64,
    pub b: u64,
    pub c: u64,
}

impl InversePair {
    pub fn x(&self) -> f64 {
        self.a as f64 / self.c as f64
    }

    pub fn y(&self) -> f64 {
        self.b as f64 / self.c as f64
    }
}

/// A finite multiset of points on the torus, the common interface of
/// S(X) and the i.i.d. random baseline.
pub trait TorusPoints {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates as floats, representatives in (0, 1].
    fn coords(&self) -> &[[f64; 2]];

    /// Weyl sum: sum over the set of e(m1 x + m2 y).
    fn weyl_sum(&self, m1: i64, m2: i64) -> Complex64 {
        let tau = 2.0 * std::f64::consts::PI;
        let (mut re, mut im) = (KahanSum::default(), KahanSum::default());
        for &[x, y] in self.coords() {
            let t = tau * (m1 as f64 * x + m2 as f64 * y);
            re.add(t.cos());
            im.add(t.sin());
        }
        Complex64::new(re.value(), im.value())
    }
}

/// The generated set S(X), immutable after construction, together with
/// its cached float coordinates.
#[derive(Debug, Clone)]
pub struct PointSet {
    x_limit: u64,
    points: Vec<InversePair>,
    coords: Vec<[f64; 2]>,
}

/// Generates S(X) exactly: one triple per (c <= X, a coprime to c),
/// ascending in (c, a).
pub fn generate(x_limit: u64) -> Result<PointSet> {
    generate_with_cap(x_limit, DEFAULT_POINT_CAP)
}

pub fn generate_with_cap(x_limit: u64, cap: u64) -> Result<PointSet> {
    if x_limit < 1 {
        return Err(Error::Precondition("generate requires X >= 1".into()));
    }
    if x_limit > cap {
        return Err(Error::Capacity(format!(
            "point set X = {x_limit} exceeds cap {cap}"
        )));
    }
    let mut points = Vec::new();
    for c in 1..=x_limit {
        for a in 1..=c {
            if let Some(b) = crate::arith::mod_inverse(a as i64, c) {
                points.push(InversePair { a, b, c });
            }
        }
    }
    let coords = points.iter().map(|p| [p.x(), p.y()]).collect();
    Ok(PointSet {
        x_limit,
        points,
        coords,
    })
}

/// Compares the exact rational a/c (with 0 <= a <= c) against a float.
pub fn cmp_frac_f64(a: u64, c: u64, t: f64) -> Ordering {
    debug_assert!(c >= 1 && a <= c);
    if t < 0.0 {
        return Ordering::Greater;
    }
    if a == 0 {
        return if t == 0.0 {
            Ordering::Equal
        } else {
            Ordering::Less
        };
    }
    if t == 0.0 {
        return Ordering::Greater;
    }
    if t >= 2.0 {
        return Ordering::Less;
    }
    // t = m * 2^e exactly; t < 2 forces e <= -51
    let bits = t.to_bits();
    let exp_field = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (m, e) = if exp_field == 0 {
        (frac, -1074i64)
    } else {
        (frac | (1u64 << 52), exp_field - 1075)
    };
    if m == 0 {
        return Ordering::Greater; // t == 0 handled above; defensive for -0.0
    }
    // a/c vs m*2^e  <=>  a << (-e) vs m*c
    let shift = (-e) as u32;
    let bits_a = 64 - a.leading_zeros();
    if shift + bits_a > 127 {
        // lhs exceeds 2^126 > m*c <= 2^117
        return Ordering::Greater;
    }
    let lhs = (a as u128) << shift;
    let rhs = m as u128 * c as u128;
    lhs.cmp(&rhs)
}

/// Closed-interval membership of a/c in [xi, xi + alpha] on the torus,
/// with the seam cut at xi: the representative of the coordinate is
/// taken in (xi, xi + 1].
fn coord_in_interval(a: u64, c: u64, xi: f64, hi: f64) -> bool {
    if cmp_frac_f64(a, c, xi) != Ordering::Less {
        cmp_frac_f64(a, c, hi) != Ordering::Greater
    } else {
        // wrapped arm, only reachable when the box crosses 1
        cmp_frac_f64(a, c, hi - 1.0) != Ordering::Greater
    }
}

impl PointSet {
    pub fn x_limit(&self) -> u64 {
        self.x_limit
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[InversePair] {
        &self.points
    }

    /// Exact count of points in a closed toroidal box.
    pub fn count_in_box(&self, b: &TorusBox) -> usize {
        let hi_x = b.xi + b.alpha;
        let hi_y = b.zeta + b.beta;
        self.points
            .iter()
            .filter(|p| {
                coord_in_interval(p.a, p.c, b.xi, hi_x) && coord_in_interval(p.b, p.c, b.zeta, hi_y)
            })
            .count()
    }

    /// Count of points in an open disc under the toroidal Euclidean
    /// metric.
    pub fn count_in_disc(&self, d: &Disc) -> usize {
        let rr = d.radius * d.radius;
        self.coords
            .iter()
            .filter(|&&[x, y]| torus_dist_sq(x, y, d.center[0], d.center[1]) < rr)
            .count()
    }

    /// Minimum toroidal distance between two distinct points, with a
    /// witness pair. Grid-bucketed neighbor search; falls back to the
    /// quadratic scan when the set is too sparse for the bucket size.
    pub fn min_pairwise_distance(&self) -> (f64, (InversePair, InversePair)) {
        assert!(self.points.len() >= 2, "need at least two points");
        let n = self.points.len();
        let g = (n as f64).sqrt().ceil() as usize;
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); g * g];
        for (i, &[x, y]) in self.coords.iter().enumerate() {
            let bx = ((x.fract() * g as f64) as usize).min(g - 1);
            let by = ((y.fract() * g as f64) as usize).min(g - 1);
            buckets[by * g + bx].push(i);
        }
        let mut best = f64::INFINITY;
        let mut witness = (self.points[0], self.points[1]);
        let consider = |i: usize, j: usize, best: &mut f64, witness: &mut (InversePair, InversePair)| {
            let [x1, y1] = self.coords[i];
            let [x2, y2] = self.coords[j];
            let d = torus_dist_sq(x1, y1, x2, y2);
            if d < *best {
                *best = d;
                *witness = (self.points[i], self.points[j]);
            }
        };
        for by in 0..g {
            for bx in 0..g {
                let cell = &buckets[by * g + bx];
                for (k, &i) in cell.iter().enumerate() {
                    for &j in &cell[k + 1..] {
                        consider(i, j, &mut best, &mut witness);
                    }
                }
                // forward half of the wrapped 3x3 neighborhood
                for (dx, dy) in [(1, 0), (1, 1), (0, 1), (g - 1, 1)] {
                    let nx = (bx + dx) % g;
                    let ny = (by + dy) % g;
                    if (nx, ny) == (bx, by) {
                        continue;
                    }
                    for &i in cell {
                        for &j in &buckets[ny * g + nx] {
                            consider(i, j, &mut best, &mut witness);
                        }
                    }
                }
            }
        }
        let cell_size = 1.0 / g as f64;
        if best.sqrt() >= cell_size {
            // neighbor search is only conclusive below the cell size
            best = f64::INFINITY;
            for i in 0..n {
                for j in i + 1..n {
                    consider(i, j, &mut best, &mut witness);
                }
            }
        }
        (best.sqrt(), witness)
    }

    /// Points strictly below the hyperbola xy = 1/X, i.e. with
    /// (a/c)(b/c) < 1/X, decided exactly: a*b*X < c^2.
    pub fn hyperbola_points(&self) -> Vec<InversePair> {
        let x = self.x_limit as u128;
        self.points
            .iter()
            .copied()
            .filter(|p| (p.a as u128) * (p.b as u128) * x < (p.c as u128) * (p.c as u128))
            .collect()
    }

    /// CSV export, header `a,b,c`, one row per point.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "a,b,c")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.a, p.b, p.c)?;
        }
        Ok(())
    }

    /// SVG scatter export: fixed 1000x1000 viewbox, origin bottom-left,
    /// radius-0.5 dots.
    pub fn write_svg<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 1000 1000">"#
        )?;
        for &[x, y] in &self.coords {
            writeln!(
                w,
                r#"<circle cx="{:.3}" cy="{:.3}" r="0.5"/>"#,
                x * 1000.0,
                (1.0 - y) * 1000.0
            )?;
        }
        writeln!(w, "</svg>")?;
        Ok(())
    }
}

impl TorusPoints for PointSet {
    fn len(&self) -> usize {
        self.points.len()
    }

    fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// Exact-angle Weyl sum: the phase (m1 a + m2 b) mod c is reduced in
    /// integer arithmetic before the trigonometric call, so the result
    /// equals sum_{c <= X} S(m1, m2; c) up to rounding.
    fn weyl_sum(&self, m1: i64, m2: i64) -> Complex64 {
        let tau = 2.0 * std::f64::consts::PI;
        let (mut re, mut im) = (KahanSum::default(), KahanSum::default());
        for p in &self.points {
            let r = (m1 as i128 * p.a as i128 + m2 as i128 * p.b as i128)
                .rem_euclid(p.c as i128) as u64;
            let t = tau * r as f64 / p.c as f64;
            re.add(t.cos());
            im.add(t.sin());
        }
        Complex64::new(re.value(), im.value())
    }
}

pub fn torus_dist_sq(x1: f64, y1: f64, x2: f64, y2: f64) -> f64 {
    let dx = (x1 - x2).abs();
    let dx = dx.min(1.0 - dx);
    let dy = (y1 - y2).abs();
    let dy = dy.min(1.0 - dy);
    dx * dx + dy * dy
}
