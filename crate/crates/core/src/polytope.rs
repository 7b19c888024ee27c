//! H-representation polytopes `{x : A x <= b}`.
//!
//! A polytope with zero rows is the whole space. The empty set has the
//! canonical encoding `{0·x <= -1}` so it can flow through every operation.
//! Geometric predicates (containment, redundancy, emptiness) are answered by
//! small linear programs on unit-normalized rows, which keeps their
//! tolerances scale-free.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpOutcome};

/// Default containment / equality tolerance on normalized rows.
pub const SET_TOL: f64 = 1e-8;
/// A row is dropped when its LP maximum over the remaining rows is within this of its offset.
pub const REDUNDANCY_TOL: f64 = 1e-9;
/// Rows shorter than this are treated as zero rows.
const ZERO_ROW: f64 = 1e-12;
/// Coefficients below this are treated as zero during variable elimination.
const ELIM_ZERO: f64 = 1e-12;
/// Chebyshev radius below which a set is handled as flat (no interior).
const FLAT_RADIUS: f64 = 1e-9;
/// Planar row count above which the clipping prefilter runs before the LP tests.
const PREFILTER_MIN_ROWS: usize = 64;
/// Relative clearance a row needs from the clipped polygon to be dropped early.
const PREFILTER_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl Polytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: b.len(),
            });
        }
        if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidProblem("polytope has non-finite entries".into()));
        }
        Ok(Self { a, b })
    }

    /// Builds from row slices; every row must have length `dim`.
    pub fn from_rows(dim: usize, rows: &[Vec<f64>], rhs: &[f64]) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        let a = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
        Self::new(a, DVector::from_column_slice(rhs))
    }

    /// The whole space `R^dim`.
    pub fn universe(dim: usize) -> Self {
        Self {
            a: DMatrix::zeros(0, dim),
            b: DVector::zeros(0),
        }
    }

    /// Canonical empty set `{0·x <= -1}`.
    pub fn empty(dim: usize) -> Self {
        Self {
            a: DMatrix::zeros(1, dim),
            b: DVector::from_element(1, -1.0),
        }
    }

    /// Axis-aligned box `lo <= x <= hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        let n = lo.len();
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = hi[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -lo[i];
        }
        Self::new(a, b)
    }

    /// Box `|x_i| <= radii_i`.
    pub fn symmetric_box(radii: &[f64]) -> Result<Self> {
        let lo: Vec<f64> = radii.iter().map(|r| -r).collect();
        Self::from_box(&lo, radii)
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn is_universe(&self) -> bool {
        self.a.nrows() == 0
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: n,
            });
        }
        Ok(())
    }

    /// Largest normalized row violation at `x`; `<= 0` means inside.
    /// Returns `-inf` for the universe.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.num_rows() {
            let row = self.a.row(i);
            let norm = row.norm();
            let v = if norm < ZERO_ROW {
                if self.b[i] < 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                (row.dot(&x.transpose()) - self.b[i]) / norm
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn contains_point(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.max_violation(x) <= tol
    }

    /// Rows scaled to unit Euclidean norm. Zero rows that always hold are dropped;
    /// a zero row that never holds collapses the result to [`Polytope::empty`].
    pub fn normalize(&self) -> Self {
        let n = self.dim();
        let mut rows: Vec<(DVector<f64>, f64)> = Vec::with_capacity(self.num_rows());
        for i in 0..self.num_rows() {
            let row = self.a.row(i).transpose();
            let norm = row.norm();
            if norm < ZERO_ROW {
                if self.b[i] < -lp::FEAS_TOL {
                    return Self::empty(n);
                }
                continue;
            }
            rows.push((row / norm, self.b[i] / norm));
        }
        Self::from_pairs(n, &rows)
    }

    fn from_pairs(n: usize, rows: &[(DVector<f64>, f64)]) -> Self {
        let mut a = DMatrix::zeros(rows.len(), n);
        let mut b = DVector::zeros(rows.len());
        for (i, (r, v)) in rows.iter().enumerate() {
            a.set_row(i, &r.transpose());
            b[i] = *v;
        }
        Self { a, b }
    }

    fn pairs(&self) -> Vec<(DVector<f64>, f64)> {
        (0..self.num_rows())
            .map(|i| (self.a.row(i).transpose(), self.b[i]))
            .collect()
    }

    /// Concatenation of both constraint lists.
    pub fn intersect(&self, other: &Polytope) -> Result<Polytope> {
        self.check_dim(other.dim())?;
        let n = self.dim();
        let m = self.num_rows() + other.num_rows();
        let mut a = DMatrix::zeros(m, n);
        let mut b = DVector::zeros(m);
        a.rows_mut(0, self.num_rows()).copy_from(&self.a);
        a.rows_mut(self.num_rows(), other.num_rows()).copy_from(&other.a);
        b.rows_mut(0, self.num_rows()).copy_from(&self.b);
        b.rows_mut(self.num_rows(), other.num_rows()).copy_from(&other.b);
        Ok(Polytope { a, b })
    }

    pub fn is_empty(&self) -> bool {
        if self.is_universe() {
            return false;
        }
        let lp = LinearProgram::new(DVector::zeros(self.dim()), self.a.clone(), self.b.clone());
        matches!(lp::solve(&lp), Ok(LpOutcome::Infeasible))
    }

    /// `max_{x in self} direction·x`.
    pub fn support(&self, direction: &DVector<f64>) -> Result<f64> {
        self.check_dim(direction.len())?;
        lp::support_value(&self.a, &self.b, direction)
    }

    /// `true` iff `other ⊆ self` within `tol` on every normalized row of `self`.
    pub fn contains(&self, other: &Polytope, tol: f64) -> Result<bool> {
        self.check_dim(other.dim())?;
        if other.is_empty() {
            return Ok(true);
        }
        let outer = self.normalize();
        for i in 0..outer.num_rows() {
            let d = outer.a.row(i).transpose();
            if d.norm() < ZERO_ROW {
                // Canonical empty row while `other` is nonempty.
                return Ok(false);
            }
            let s = lp::support_value(&other.a, &other.b, &d)?;
            if s > outer.b[i] + tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Mutual containment.
    pub fn set_equal(&self, other: &Polytope, tol: f64) -> Result<bool> {
        Ok(self.contains(other, tol)? && other.contains(self, tol)?)
    }

    /// Center and radius of the largest inscribed ball.
    pub fn chebyshev_center(&self) -> Result<(DVector<f64>, f64)> {
        self.chebyshev_inner(None)
    }

    fn chebyshev_inner(&self, cap: Option<f64>) -> Result<(DVector<f64>, f64)> {
        let n = self.dim();
        let m = self.num_rows();
        let mut a = DMatrix::zeros(m, n + 1);
        for i in 0..m {
            let row = self.a.row(i);
            a.view_mut((i, 0), (1, n)).copy_from(&row);
            a[(i, n)] = row.norm();
        }
        let mut c = DVector::zeros(n + 1);
        c[n] = -1.0;
        let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); n];
        bounds.push((0.0, cap.unwrap_or(f64::INFINITY)));
        let lp = LinearProgram::new(c, a, self.b.clone()).with_bounds(bounds);
        match lp::solve(&lp)? {
            LpOutcome::Optimal { solution, .. } => {
                let r = solution[n];
                Ok((solution.rows(0, n).into_owned(), r))
            }
            LpOutcome::Infeasible => Err(Error::EmptySet),
            LpOutcome::Unbounded => Err(Error::UnboundedDirection),
        }
    }

    /// Per-axis `[lo, hi]` extents.
    pub fn bounding_box(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.dim();
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            hi[i] = self.support(&e)?;
            lo[i] = -self.support(&(-e))?;
        }
        Ok((lo, hi))
    }

    /// Semantically equal polytope with every retained row irredundant.
    ///
    /// Rows are normalized and exact duplicates merged first. Full-dimensional
    /// sets then go through Clarkson's scheme: each candidate row is tested by an
    /// LP over the rows already known to be irredundant, and a ray shot from an
    /// interior point identifies a new irredundant row whenever the test is
    /// inconclusive. Flat sets fall back to one LP per row against all others.
    pub fn remove_redundant(&self) -> Polytope {
        let n = self.dim();
        let normed = self.normalize();
        if normed.is_universe() {
            return normed;
        }
        if normed.num_rows() == 1 && normed.a.row(0).norm() < ZERO_ROW {
            return Polytope::empty(n);
        }
        let mut rows = dedup_rows(normed.pairs());
        if n == 2 && rows.len() > PREFILTER_MIN_ROWS {
            rows = prefilter_planar(rows);
        }
        let deduped = Polytope::from_pairs(n, &rows);
        let interior = match deduped.chebyshev_inner(Some(1.0)) {
            Ok(c) => c,
            Err(_) => return Polytope::empty(n),
        };
        let keep = if interior.1 > FLAT_RADIUS {
            clarkson(&rows, &interior.0)
        } else {
            sequential_filter(&rows, (0..rows.len()).collect())
        };
        let kept: Vec<_> = keep.into_iter().map(|i| rows[i].clone()).collect();
        Polytope::from_pairs(n, &kept)
    }

    /// Orthogonal projection onto the first `dim - k` coordinates by
    /// Fourier–Motzkin elimination, with redundancy removal after every step.
    pub fn project_out_last(&self, k: usize) -> Result<Polytope> {
        if k >= self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim().saturating_sub(1),
                found: k,
            });
        }
        let mut p = self.remove_redundant();
        for _ in 0..k {
            p = eliminate_last(&p).remove_redundant();
        }
        Ok(p)
    }

    /// Image of `self` under `x ↦ center + factor (x - center)`.
    pub fn scale_about(&self, center: &DVector<f64>, factor: f64) -> Result<Polytope> {
        self.check_dim(center.len())?;
        let shift = &self.a * center;
        let b = DVector::from_fn(self.num_rows(), |i, _| shift[i] + factor * (self.b[i] - shift[i]));
        Polytope::new(self.a.clone(), b)
    }

    /// End points of a 1-D set.
    pub fn interval(&self) -> Result<(f64, f64)> {
        if self.dim() != 1 {
            return Err(Error::WrongDimension {
                expected: "1",
                found: self.dim(),
            });
        }
        let hi = self.support(&DVector::from_element(1, 1.0))?;
        let lo = -self.support(&DVector::from_element(1, -1.0))?;
        Ok((lo, hi))
    }

    /// Counterclockwise vertex list of a bounded nonempty 2-D set (or the two
    /// end points of a 1-D set). Consecutive vertices closer than `1e-8` merge.
    pub fn vertices_2d(&self) -> Result<Vec<DVector<f64>>> {
        match self.dim() {
            1 => {
                let (lo, hi) = self.interval()?;
                return Ok(vec![DVector::from_element(1, lo), DVector::from_element(1, hi)]);
            }
            2 => {}
            d => {
                return Err(Error::WrongDimension {
                    expected: "1 or 2",
                    found: d,
                })
            }
        }
        if self.is_empty() {
            return Err(Error::EmptySet);
        }
        // Errors with UnboundedDirection when unbounded.
        let (lo, hi) = self.bounding_box()?;
        // Clipping keeps every vertex a convex combination of points that already
        // satisfy the earlier rows, so nearly parallel neighbouring faces cannot
        // push a vertex outside the set the way a direct 2x2 solve can.
        let mut poly: Vec<[f64; 2]> = vec![[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
        for (r, b) in self.remove_redundant().pairs() {
            poly = clip_polygon(&poly, [r[0], r[1]], b);
        }
        let mut verts: Vec<DVector<f64>> = Vec::with_capacity(poly.len());
        for v in poly {
            let pt = DVector::from_vec(v.to_vec());
            if verts.last().is_none_or(|q: &DVector<f64>| (q - &pt).norm() > 1e-8) {
                verts.push(pt);
            }
        }
        while verts.len() > 1 && (&verts[0] - verts.last().unwrap()).norm() <= 1e-8 {
            verts.pop();
        }
        if verts.is_empty() {
            verts.push(DVector::from_vec(vec![0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])]));
        }
        Ok(verts)
    }

    /// H-representation of the convex polygon with the given counterclockwise vertices.
    pub fn from_vertices_2d(verts: &[DVector<f64>]) -> Result<Polytope> {
        if verts.len() < 3 {
            return Err(Error::InvalidProblem(
                "at least three vertices are needed for a polygon".into(),
            ));
        }
        let k = verts.len();
        let mut rows = Vec::with_capacity(k);
        for i in 0..k {
            let p = &verts[i];
            let q = &verts[(i + 1) % k];
            let e = q - p;
            // Outward normal of a CCW edge.
            let nrm = DVector::from_vec(vec![e[1], -e[0]]);
            let off = nrm.dot(p);
            rows.push((nrm, off));
        }
        Ok(Polytope::from_pairs(2, &rows).normalize())
    }
}

/// Merges rows whose normals coincide, keeping the tightest offset. Input rows are unit-norm.
fn dedup_rows(rows: Vec<(DVector<f64>, f64)>) -> Vec<(DVector<f64>, f64)> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &j| {
        rows[i]
            .0
            .iter()
            .zip(rows[j].0.iter())
            .map(|(a, b)| a.partial_cmp(b).unwrap_or(Ordering::Equal))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
    let mut out: Vec<(DVector<f64>, f64)> = Vec::with_capacity(rows.len());
    let mut last_group: Option<usize> = None;
    for i in order {
        let (r, b) = &rows[i];
        if let Some(g) = last_group {
            if (&out[g].0 - r).amax() < 1e-12 {
                // Sorting is lexicographic, so near-duplicates may be non-adjacent;
                // the final LP pass removes any that slip through.
                out[g].1 = out[g].1.min(*b);
                continue;
            }
        }
        out.push((r.clone(), *b));
        last_group = Some(out.len() - 1);
    }
    out
}

/// Maximum of `target·x` over `rows[others]`, plus the cap row `target·x <= cap`.
fn lp_max(rows: &[(DVector<f64>, f64)], others: &[usize], target: usize, cap: Option<f64>) -> LpOutcome {
    let n = rows[target].0.len();
    let m = others.len() + usize::from(cap.is_some());
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for (k, &j) in others.iter().enumerate() {
        a.set_row(k, &rows[j].0.transpose());
        b[k] = rows[j].1;
    }
    if let Some(c) = cap {
        a.set_row(m - 1, &rows[target].0.transpose());
        b[m - 1] = c;
    }
    let lp = LinearProgram::new(-&rows[target].0, a, b);
    lp::solve(&lp).unwrap_or(LpOutcome::Unbounded)
}

/// Drops rows one at a time whose LP maximum over the other surviving rows
/// stays within the tolerance of their offset.
fn sequential_filter(rows: &[(DVector<f64>, f64)], mut alive: Vec<usize>) -> Vec<usize> {
    let mut idx = 0;
    while idx < alive.len() {
        let i = alive[idx];
        let others: Vec<usize> = alive.iter().copied().filter(|&j| j != i).collect();
        let redundant = match lp_max(rows, &others, i, None) {
            LpOutcome::Optimal { value, .. } => -value <= rows[i].1 + REDUNDANCY_TOL,
            _ => false,
        };
        if redundant {
            alive.remove(idx);
        } else {
            idx += 1;
        }
    }
    alive
}

fn clarkson(rows: &[(DVector<f64>, f64)], z: &DVector<f64>) -> Vec<usize> {
    let m = rows.len();
    let slack: Vec<f64> = rows.iter().map(|(r, b)| b - r.dot(z)).collect();
    let mut irredundant: Vec<usize> = Vec::new();
    let mut is_irr = vec![false; m];
    let mut redundant = vec![false; m];
    for i in 0..m {
        if is_irr[i] {
            continue;
        }
        loop {
            let out = lp_max(rows, &irredundant, i, Some(rows[i].1 + 1.0));
            let LpOutcome::Optimal { value, solution, .. } = out else {
                // Cannot happen with the cap row; keep the row to stay conservative.
                is_irr[i] = true;
                irredundant.push(i);
                break;
            };
            if -value <= rows[i].1 + REDUNDANCY_TOL {
                redundant[i] = true;
                break;
            }
            let d = &solution - z;
            let mut hit: Option<(usize, f64)> = None;
            for j in 0..m {
                if redundant[j] || is_irr[j] {
                    continue;
                }
                let ad = rows[j].0.dot(&d);
                if ad <= 1e-14 {
                    continue;
                }
                let t = slack[j] / ad;
                if hit.is_none_or(|(_, best)| t < best) {
                    hit = Some((j, t));
                }
            }
            match hit {
                Some((j, _)) => {
                    is_irr[j] = true;
                    irredundant.push(j);
                    if j == i {
                        break;
                    }
                }
                None => {
                    is_irr[i] = true;
                    irredundant.push(i);
                    break;
                }
            }
        }
    }
    irredundant.sort_unstable();
    // Ray ties at lower-dimensional faces can admit weakly redundant rows.
    sequential_filter(rows, irredundant)
}

/// Drops planar rows that clear an approximate polygon of the set by a wide
/// margin. The polygon is the bounding box clipped by every row in turn; rows
/// near it are left for the exact LP tests.
fn prefilter_planar(rows: Vec<(DVector<f64>, f64)>) -> Vec<(DVector<f64>, f64)> {
    let p = Polytope::from_pairs(2, &rows);
    let Ok((lo, hi)) = p.bounding_box() else {
        return rows;
    };
    let mut poly: Vec<[f64; 2]> = vec![[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
    for (r, b) in &rows {
        poly = clip_polygon(&poly, [r[0], r[1]], *b);
        if poly.is_empty() {
            return rows;
        }
    }
    // Rows are unit-norm, so the polygon's extent bounds every row value on it.
    // Offsets themselves can be huge for nearly cancelling eliminated rows.
    let scale = 1.0 + lo.amax().max(hi.amax());
    let margin = PREFILTER_MARGIN * scale;
    rows.into_iter()
        .filter(|(r, b)| poly.iter().map(|v| r[0] * v[0] + r[1] * v[1]).fold(f64::NEG_INFINITY, f64::max) > b - margin)
        .collect()
}

/// Sutherland–Hodgman step: `poly ∩ {x : a·x <= b}`.
fn clip_polygon(poly: &[[f64; 2]], a: [f64; 2], b: f64) -> Vec<[f64; 2]> {
    let k = poly.len();
    let mut out = Vec::with_capacity(k + 1);
    for i in 0..k {
        let (p, q) = (poly[i], poly[(i + 1) % k]);
        let fp = a[0] * p[0] + a[1] * p[1] - b;
        let fq = a[0] * q[0] + a[1] * q[1] - b;
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// One Fourier–Motzkin step on the last coordinate.
fn eliminate_last(p: &Polytope) -> Polytope {
    let n = p.dim();
    let last = n - 1;
    let rows = p.pairs();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut out: Vec<(DVector<f64>, f64)> = Vec::new();
    for (r, b) in &rows {
        let c = r[last];
        if c > ELIM_ZERO {
            pos.push((r / c, b / c));
        } else if c < -ELIM_ZERO {
            neg.push((r / -c, b / -c));
        } else {
            out.push((r.rows(0, last).into_owned(), *b));
        }
    }
    for (rp, bp) in &pos {
        for (rn, bn) in &neg {
            let r = (rp + rn).rows(0, last).into_owned();
            out.push((r, bp + bn));
        }
    }
    Polytope::from_pairs(last, &out).normalize()
}

/// JSON shape `{"H": [[...]], "h": [...], "dim": n}`. `dim` is optional on input
/// when `H` has at least one row.
#[derive(Serialize, Deserialize)]
struct PolytopeJson {
    #[serde(rename = "H")]
    h_mat: Vec<Vec<f64>>,
    h: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
}

impl Serialize for Polytope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let h_mat = (0..self.num_rows())
            .map(|i| self.a.row(i).iter().copied().collect())
            .collect();
        PolytopeJson {
            h_mat,
            h: self.b.iter().copied().collect(),
            dim: Some(self.dim()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polytope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = PolytopeJson::deserialize(d)?;
        let dim = match (raw.dim, raw.h_mat.first()) {
            (Some(d), _) => d,
            (None, Some(r)) => r.len(),
            (None, None) => return Err(D::Error::custom("polytope with no rows needs \"dim\"")),
        };
        Polytope::from_rows(dim, &raw.h_mat, &raw.h).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn unit_square() -> Polytope {
        Polytope::symmetric_box(&[1.0, 1.0]).unwrap()
    }

    fn interval(lo: f64, hi: f64) -> Polytope {
        Polytope::from_box(&[lo], &[hi]).unwrap()
    }

    #[test]
    fn interval_intersection() {
        let p = interval(-1.0, 1.0).intersect(&interval(0.0, 2.0)).unwrap();
        assert!(p.set_equal(&interval(0.0, 1.0), SET_TOL).unwrap());
        let (lo, hi) = p.interval().unwrap();
        assert!((lo - 0.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn self_intersection_is_idempotent() {
        let p = unit_square();
        let q = p.intersect(&p).unwrap().remove_redundant();
        assert_eq!(q.num_rows(), 4);
        assert!(q.set_equal(&p, SET_TOL).unwrap());
    }

    #[test]
    fn intersect_dimension_mismatch() {
        assert!(matches!(
            unit_square().intersect(&interval(0.0, 1.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dominated_row_removed() {
        let p = Polytope::from_rows(1, &[vec![1.0], vec![1.0]], &[1.0, 2.0]).unwrap();
        let q = p.remove_redundant();
        assert_eq!(q.num_rows(), 1);
        assert!((q.b()[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn duplicated_square_rows() {
        let p = unit_square();
        let doubled = p.intersect(&p).unwrap().intersect(&p).unwrap();
        assert_eq!(doubled.remove_redundant().num_rows(), 4);
    }

    #[test]
    fn empty_set_flows_through() {
        let p = Polytope::from_rows(1, &[vec![1.0], vec![-1.0]], &[-1.0, 0.0]).unwrap();
        assert!(p.is_empty());
        let r = p.remove_redundant();
        assert!(r.is_empty());
        assert_eq!(r, Polytope::empty(1));
        assert!(!unit_square().is_empty());
        assert!(unit_square().contains(&Polytope::empty(2), SET_TOL).unwrap());
        assert!(!Polytope::empty(2).contains(&unit_square(), SET_TOL).unwrap());
        assert_eq!(Polytope::empty(2).chebyshev_center(), Err(Error::EmptySet));
    }

    #[test]
    fn interval_containment() {
        assert!(interval(-1.0, 2.0).contains(&interval(0.0, 1.0), SET_TOL).unwrap());
        assert!(!interval(0.0, 1.0).contains(&interval(-1.0, 2.0), SET_TOL).unwrap());
    }

    #[test]
    fn containment_reports_unbounded_inner_set() {
        let half = Polytope::from_rows(1, &[vec![1.0]], &[0.0]).unwrap();
        assert_eq!(interval(0.0, 1.0).contains(&half, SET_TOL), Err(Error::UnboundedDirection));
    }

    #[test]
    fn rotated_square_is_equal() {
        let verts: Vec<_> = [(1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .iter()
            .map(|&(x, y)| dvector![x, y])
            .collect();
        let rotated: Vec<_> = verts.iter().map(|v| dvector![-v[1], v[0]]).collect();
        let p = Polytope::from_vertices_2d(&rotated).unwrap();
        assert!(p.set_equal(&unit_square(), SET_TOL).unwrap());
    }

    #[test]
    fn chebyshev_of_unit_box() {
        let (c, r) = unit_square().chebyshev_center().unwrap();
        assert!(c.norm() < 1e-9);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decoupled_box_projection() {
        let p = Polytope::symmetric_box(&[1.0, 1.0]).unwrap();
        let q = p.project_out_last(1).unwrap();
        assert!(q.set_equal(&interval(-1.0, 1.0), SET_TOL).unwrap());
    }

    #[test]
    fn chain_projection() {
        // x - u <= 0, u <= 2  ->  x <= 2
        let p = Polytope::from_rows(2, &[vec![1.0, -1.0], vec![0.0, 1.0]], &[0.0, 2.0]).unwrap();
        let q = p.project_out_last(1).unwrap();
        assert_eq!(q.num_rows(), 1);
        assert!((q.b()[0] / q.a()[(0, 0)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn projection_of_unconstrained_direction_is_universe() {
        // x - u <= 0 only: every x works.
        let p = Polytope::from_rows(2, &[vec![1.0, -1.0]], &[0.0]).unwrap();
        assert!(p.project_out_last(1).unwrap().is_universe());
    }

    #[test]
    fn projection_rejects_full_elimination() {
        assert!(unit_square().project_out_last(2).is_err());
    }

    #[test]
    fn square_vertices_ccw() {
        let v = unit_square().vertices_2d().unwrap();
        assert_eq!(v.len(), 4);
        let area: f64 = (0..4)
            .map(|i| {
                let (p, q) = (&v[i], &v[(i + 1) % 4]);
                p[0] * q[1] - p[1] * q[0]
            })
            .sum();
        assert!((area / 2.0 - 4.0).abs() < 1e-12, "CCW area {area}");
        for p in &v {
            assert!((p[0].abs() - 1.0).abs() < 1e-12 && (p[1].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_dimensional_vertices() {
        let v = interval(-1.0, 1.0).vertices_2d().unwrap();
        assert_eq!(v.len(), 2);
        assert!((v[0][0] + 1.0).abs() < 1e-12 && (v[1][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vertex_errors() {
        assert_eq!(Polytope::empty(2).vertices_2d(), Err(Error::EmptySet));
        let half = Polytope::from_rows(2, &[vec![1.0, 0.0]], &[1.0]).unwrap();
        assert_eq!(half.vertices_2d(), Err(Error::UnboundedDirection));
        let cube = Polytope::symmetric_box(&[1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(cube.vertices_2d(), Err(Error::WrongDimension { .. })));
    }

    #[test]
    fn segment_vertices() {
        let seg = Polytope::from_box(&[-1.0, 0.0], &[1.0, 0.0]).unwrap();
        let v = seg.vertices_2d().unwrap();
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let p = Polytope::from_rows(2, &[vec![0.1, 1.0 / 3.0], vec![-2.0, 1e-300]], &[0.7, 5e-324]).unwrap();
        let s = crate::json::to_string(&p).unwrap();
        let q: Polytope = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        let u: Polytope = serde_json::from_str(&crate::json::to_string(&Polytope::universe(3)).unwrap()).unwrap();
        assert_eq!(u.dim(), 3);
        assert!(serde_json::from_str::<Polytope>(r#"{"H": [], "h": []}"#).is_err());
        assert!(serde_json::from_str::<Polytope>(r#"{"H": [[1, 0]], "h": [1, 2]}"#).is_err());
    }
}
