//! Backward reachability on a state lattice, independent of the polytope code
//! path: cells are kept or dropped by simulating held inputs from their centers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::DiscreteLtiModel;
use crate::polytope::Polytope;

/// Input samples per input dimension used when none are specified.
pub const DEFAULT_INPUT_SAMPLES: usize = 41;

/// Surviving lattice cells of the grid fixed point.
///
/// Cell centers sit at `lo + i * resolution` along each axis, with axis 0
/// varying fastest in `member`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOracleResult {
    pub resolution: f64,
    pub lo: Vec<f64>,
    pub shape: Vec<usize>,
    #[serde(rename = "M")]
    pub hold: usize,
    pub iterations: usize,
    pub member: Vec<bool>,
}

impl GridOracleResult {
    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn num_cells(&self) -> usize {
        self.member.len()
    }

    pub fn num_marked(&self) -> usize {
        self.member.iter().filter(|m| **m).count()
    }

    fn coords(&self, idx: usize) -> Vec<usize> {
        let mut rest = idx;
        self.shape
            .iter()
            .map(|&s| {
                let c = rest % s;
                rest /= s;
                c
            })
            .collect()
    }

    fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.shape)
            .rev()
            .fold(0, |acc, (&c, &s)| acc * s + c)
    }

    pub fn center(&self, idx: usize) -> DVector<f64> {
        let c = self.coords(idx);
        DVector::from_fn(self.dim(), |i, _| self.lo[i] + c[i] as f64 * self.resolution)
    }

    /// Cell whose center is nearest to `x`, if `x` falls on the lattice.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        nearest_cell(&self.lo, &self.shape, self.resolution, x)
    }

    /// Membership of the cell nearest to `x`; points off the lattice are not members.
    pub fn marks(&self, x: &[f64]) -> bool {
        self.nearest(x).is_some_and(|i| self.member[i])
    }

    /// A marked cell whose lattice neighbours (diagonals included) are all marked.
    pub fn is_interior(&self, idx: usize) -> bool {
        if !self.member[idx] {
            return false;
        }
        let c = self.coords(idx);
        let n = self.dim();
        for offset in 0..3usize.pow(n as u32) {
            let mut nb = c.clone();
            let mut o = offset;
            for i in 0..n {
                let d = (o % 3) as isize - 1;
                o /= 3;
                let v = c[i] as isize + d;
                if v < 0 || v >= self.shape[i] as isize {
                    return false;
                }
                nb[i] = v as usize;
            }
            if !self.member[self.index(&nb)] {
                return false;
            }
        }
        true
    }

    /// `true` iff every marked cell of `self` is marked in `other` (same lattice).
    pub fn is_subset_of(&self, other: &GridOracleResult) -> bool {
        self.shape == other.shape
            && self.lo == other.lo
            && self.resolution == other.resolution
            && self.member.iter().zip(&other.member).all(|(a, b)| !a || *b)
    }

    /// Agreement with a polytope at the scale of one cell.
    pub fn compare(&self, set: &Polytope) -> Result<OracleComparison> {
        if set.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: set.dim(),
            });
        }
        let diagonal = self.resolution * (self.dim() as f64).sqrt();
        let mut cmp = OracleComparison::default();
        for idx in 0..self.num_cells() {
            let x = self.center(idx);
            let violation = set.max_violation(&x);
            if self.is_interior(idx) {
                cmp.interior_cells += 1;
                if violation > diagonal {
                    cmp.interior_outside += 1;
                }
            }
            if violation <= -self.resolution {
                cmp.deep_samples += 1;
                if !self.member[idx] {
                    cmp.deep_unmarked += 1;
                }
            }
        }
        Ok(cmp)
    }
}

/// Counts from [`GridOracleResult::compare`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleComparison {
    /// Oracle cells with a fully marked neighbourhood.
    pub interior_cells: usize,
    /// Of those, centers more than one cell diagonal outside the polytope.
    pub interior_outside: usize,
    /// Lattice points at least one cell inside the polytope.
    pub deep_samples: usize,
    /// Of those, points the oracle dropped.
    pub deep_unmarked: usize,
}

impl OracleComparison {
    pub fn agrees(&self) -> bool {
        self.interior_outside == 0 && self.deep_unmarked == 0
    }
}

fn nearest_cell(lo: &[f64], shape: &[usize], res: f64, x: &[f64]) -> Option<usize> {
    let mut idx = 0;
    let mut stride = 1;
    for i in 0..shape.len() {
        let c = ((x[i] - lo[i]) / res).round();
        if !(c >= 0.0 && c < shape[i] as f64) {
            return None;
        }
        idx += c as usize * stride;
        stride *= shape[i];
    }
    Some(idx)
}

/// Uniform samples per input axis over the bounding box of `u_set`, kept when
/// inside `u_set`.
fn input_grid(u_set: &Polytope, per_axis: usize) -> Result<Vec<DVector<f64>>> {
    if per_axis == 0 {
        return Err(Error::ResolutionTooCoarse("input grid is empty".into()));
    }
    let m = u_set.dim();
    let (lo, hi) = u_set.bounding_box()?;
    let total = per_axis.checked_pow(m as u32).ok_or_else(|| {
        Error::ResolutionTooCoarse(format!("{per_axis}^{m} input samples do not fit in memory"))
    })?;
    let step = |i: usize, k: usize| {
        if per_axis == 1 {
            0.5 * (lo[i] + hi[i])
        } else {
            lo[i] + (hi[i] - lo[i]) * k as f64 / (per_axis - 1) as f64
        }
    };
    let mut out = Vec::new();
    for flat in 0..total {
        let mut rest = flat;
        let u = DVector::from_fn(m, |i, _| {
            let k = rest % per_axis;
            rest /= per_axis;
            step(i, k)
        });
        if u_set.contains_point(&u, 1e-12) {
            out.push(u);
        }
    }
    if out.is_empty() {
        return Err(Error::ResolutionTooCoarse("no input sample lies in the input set".into()));
    }
    Ok(out)
}

/// Input samples per axis such that moving one input sample changes no held
/// prediction by more than one cell, and never fewer than
/// [`DEFAULT_INPUT_SAMPLES`]. Coarser input grids erode the lattice set by
/// several cells on long holds.
pub fn suggested_input_samples(
    u_set: &Polytope,
    md: &DiscreteLtiModel,
    hold: usize,
    resolution: f64,
) -> Result<usize> {
    let (lo, hi) = u_set.bounding_box()?;
    let mut gain = DMatrix::zeros(md.state_dim(), md.input_dim());
    let mut worst = vec![0.0f64; md.input_dim()];
    for _ in 0..hold {
        gain = &md.a * &gain + &md.b;
        for (i, w) in worst.iter_mut().enumerate() {
            *w = w.max(gain.column(i).amax());
        }
    }
    let per_axis = (0..md.input_dim())
        .map(|i| ((hi[i] - lo[i]) * worst[i] / resolution).ceil() as usize + 1)
        .max()
        .unwrap_or(1);
    Ok(per_axis.max(DEFAULT_INPUT_SAMPLES))
}

/// Lattice fixed point of the M-step hold precursor over `x_set`.
///
/// A cell survives an iteration iff some gridded input, held for `hold` steps
/// from the cell center, visits only surviving cells (nearest-cell rounding at
/// every step). Iteration stops once no cell changes.
pub fn grid_oracle_cinf(
    x_set: &Polytope,
    u_set: &Polytope,
    md: &DiscreteLtiModel,
    hold: usize,
    resolution: f64,
    input_samples: usize,
) -> Result<GridOracleResult> {
    let n = md.state_dim();
    if n > 2 {
        return Err(Error::WrongDimension {
            expected: "1 or 2",
            found: n,
        });
    }
    if x_set.dim() != n || u_set.dim() != md.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x_set.dim(),
        });
    }
    if hold == 0 {
        return Err(Error::InvalidModel("hold count must be at least 1".into()));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::ResolutionTooCoarse(format!("resolution must be positive, got {resolution}")));
    }
    let inputs = input_grid(u_set, input_samples)?;
    let (lo, hi) = x_set.bounding_box()?;
    let shape: Vec<usize> = (0..n)
        .map(|i| ((hi[i] - lo[i]) / resolution + 1e-9).floor() as usize + 1)
        .collect();
    let lo: Vec<f64> = lo.iter().copied().collect();

    // Held-input predictions x[k] = A^k x0 + G_k u, split into the state and
    // input parts. States are padded to two coordinates.
    let pad = |v: &DVector<f64>| [v[0], if n == 2 { v[1] } else { 0.0 }];
    let mut powers: Vec<DMatrix<f64>> = Vec::with_capacity(hold);
    let mut drifts: Vec<[f64; 2]> = Vec::with_capacity(hold * inputs.len());
    let mut gains: Vec<[f64; 2]> = Vec::with_capacity(hold);
    let mut ak = DMatrix::identity(n, n);
    let mut gk = DMatrix::zeros(n, md.input_dim());
    for _ in 0..hold {
        ak = &md.a * &ak;
        gk = &md.a * &gk + &md.b;
        powers.push(ak.clone());
        drifts.extend(inputs.iter().map(|u| pad(&(&gk * u))));
        if md.input_dim() == 1 {
            gains.push(pad(&gk.column(0).into_owned()));
        }
    }
    // Scalar inputs come out of `input_grid` in increasing order.
    let levels: Vec<f64> = if md.input_dim() == 1 { inputs.iter().map(|u| u[0]).collect() } else { Vec::new() };

    let mut out = GridOracleResult {
        resolution,
        lo,
        shape,
        hold,
        iterations: 0,
        member: Vec::new(),
    };
    let cells = out.shape.iter().product::<usize>();
    let centers: Vec<DVector<f64>> = (0..cells).map(|i| out.center(i)).collect();
    let free: Vec<[f64; 2]> = centers
        .iter()
        .flat_map(|c| powers.iter().map(move |p| p * c))
        .map(|v| pad(&v))
        .collect();
    let mut member: Vec<bool> = centers.iter().map(|c| x_set.contains_point(c, 1e-12)).collect();
    let mut witness = vec![0usize; cells];
    let inputs = inputs.len();
    // Slightly wider than half a cell: `keeps` has the final say, and rounding
    // ties at the lattice edge must not be cut off here.
    let half = 0.5 * resolution * (1.0 + 1e-6);
    let edge: Vec<(f64, f64)> = (0..n)
        .map(|i| (out.lo[i] - half, out.lo[i] + (out.shape[i] - 1) as f64 * resolution + half))
        .collect();
    // Index range of inputs whose predictions all stay on the lattice.
    let input_range = |idx: usize| -> Option<(usize, usize)> {
        if levels.is_empty() {
            return Some((0, inputs - 1));
        }
        let (mut ulo, mut uhi) = (f64::NEG_INFINITY, f64::INFINITY);
        for k in 0..hold {
            let (f, g) = (free[idx * hold + k], gains[k]);
            for i in 0..n {
                let (a, b) = ((edge[i].0 - f[i]) / g[i], (edge[i].1 - f[i]) / g[i]);
                if g[i] > 0.0 {
                    (ulo, uhi) = (ulo.max(a), uhi.min(b));
                } else if g[i] < 0.0 {
                    (ulo, uhi) = (ulo.max(b), uhi.min(a));
                } else if f[i] < edge[i].0 || f[i] > edge[i].1 {
                    return None;
                }
            }
        }
        let first = levels.partition_point(|&u| u < ulo);
        let last = levels.partition_point(|&u| u <= uhi);
        (first < last).then(|| (first, last - 1))
    };

    loop {
        out.iterations += 1;
        let keeps = |idx: usize, j: usize| {
            (0..hold).all(|k| {
                let (f, d) = (free[idx * hold + k], drifts[k * inputs + j]);
                let x = [f[0] + d[0], f[1] + d[1]];
                nearest_cell(&out.lo, &out.shape, resolution, &x[..n]).is_some_and(|c| member[c])
            })
        };
        let mut next = member.clone();
        let mut changed = false;
        for idx in 0..cells {
            if !member[idx] {
                continue;
            }
            if keeps(idx, witness[idx]) {
                continue;
            }
            // Feasible inputs of a cell drift slowly between iterations, so the
            // search fans out from the previous witness.
            let found = input_range(idx).and_then(|(first, last)| {
                let w = witness[idx].clamp(first, last);
                let around = (0..=last - first).flat_map(|d| [w.checked_add(d), w.checked_sub(d)]);
                around.flatten().filter(|j| (first..=last).contains(j)).find(|&j| keeps(idx, j))
            });
            match found {
                Some(j) => witness[idx] = j,
                None => {
                    next[idx] = false;
                    changed = true;
                }
            }
        }
        member = next;
        if !changed {
            break;
        }
    }
    out.member = member;
    Ok(out)
}
