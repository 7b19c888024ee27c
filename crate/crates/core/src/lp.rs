//! Dense linear programming for the small, tall problems that arise in polytope
//! predicates: a handful of variables against up to a few thousand inequality rows.
//!
//! Problems have the form
//!
//! ```text
//! minimize    c·x
//! subject to  A x <= b
//!             lo <= x <= hi      (optional, entries may be infinite)
//! ```
//!
//! Finite variable bounds are folded into the row set. The solver then runs a
//! two-phase dense tableau simplex on the dual standard form
//! `min b·y  s.t.  Aᵀy = -c, y >= 0`, whose tableau has one row per primal
//! variable instead of one per constraint. The primal point is read back from
//! the simplex multipliers, the row duals from the basic `y` values.
//!
//! Entering columns follow Dantzig's rule, which in this form picks the most
//! violated primal row. Long runs of degenerate pivots switch to Bland's rule
//! until progress resumes, which rules out cycling.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost optimality tolerance.
pub const OPT_TOL: f64 = 1e-9;
/// Smallest pivot magnitude accepted in the ratio test.
const PIVOT_TOL: f64 = 1e-11;
/// Relative tie window for the ratio test.
const RATIO_TIE: f64 = 1e-12;
/// Consecutive degenerate pivots tolerated before Bland's rule takes over.
const DEGENERATE_RUN: usize = 20;

/// `minimize c·x subject to A x <= b, lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: DVector<f64>,
    pub constraints: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Per-variable `(lo, hi)`; infinite entries mean unbounded on that side.
    /// `None` leaves every variable free.
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl LinearProgram {
    pub fn new(objective: DVector<f64>, constraints: DMatrix<f64>, rhs: DVector<f64>) -> Self {
        Self {
            objective,
            constraints,
            rhs,
            bounds: None,
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if self.constraints.ncols() != n {
            return Err(Error::MalformedLp(format!(
                "constraint matrix has {} columns, objective has length {n}",
                self.constraints.ncols()
            )));
        }
        if self.constraints.nrows() != self.rhs.len() {
            return Err(Error::MalformedLp(format!(
                "constraint matrix has {} rows, rhs has length {}",
                self.constraints.nrows(),
                self.rhs.len()
            )));
        }
        let all_finite = self.objective.iter().all(|v| v.is_finite())
            && self.constraints.iter().all(|v| v.is_finite())
            && self.rhs.iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::MalformedLp("non-finite entry".into()));
        }
        if let Some(bounds) = &self.bounds {
            if bounds.len() != n {
                return Err(Error::MalformedLp(format!(
                    "{} variable bounds for {n} variables",
                    bounds.len()
                )));
            }
            if bounds.iter().any(|(lo, hi)| lo.is_nan() || hi.is_nan()) {
                return Err(Error::MalformedLp("NaN variable bound".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        value: f64,
        solution: DVector<f64>,
        /// Nonnegative multipliers of the rows of `A x <= b` (bound rows excluded).
        duals: DVector<f64>,
    },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn status(&self) -> LpStatus {
        match self {
            LpOutcome::Optimal { .. } => LpStatus::Optimal,
            LpOutcome::Infeasible => LpStatus::Infeasible,
            LpOutcome::Unbounded => LpStatus::Unbounded,
        }
    }

    pub fn optimal_value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn solution(&self) -> Option<&DVector<f64>> {
        match self {
            LpOutcome::Optimal { solution, .. } => Some(solution),
            _ => None,
        }
    }
}

/// Solves `lp`. Status is exact up to [`FEAS_TOL`] / [`OPT_TOL`].
pub fn solve(lp: &LinearProgram) -> Result<LpOutcome> {
    lp.validate()?;
    let n = lp.num_vars();
    let m = lp.constraints.nrows();

    // Fold finite bounds into extra rows.
    let mut extra: Vec<(usize, f64, f64)> = Vec::new();
    if let Some(bounds) = &lp.bounds {
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if lo > hi {
                return Ok(LpOutcome::Infeasible);
            }
            if lo.is_finite() {
                extra.push((i, -1.0, -lo));
            }
            if hi.is_finite() {
                extra.push((i, 1.0, hi));
            }
        }
    }
    let rows = m + extra.len();
    let mut a = DMatrix::<f64>::zeros(rows, n);
    let mut b = DVector::<f64>::zeros(rows);
    a.rows_mut(0, m).copy_from(&lp.constraints);
    b.rows_mut(0, m).copy_from(&lp.rhs);
    for (k, &(i, s, v)) in extra.iter().enumerate() {
        a[(m + k, i)] = s;
        b[m + k] = v;
    }

    match DualTableau::run(&a, &b, &lp.objective) {
        DualResult::Optimal { x, y } => {
            // Near-parallel basic rows make the vertex ill-conditioned while the
            // multipliers price accurately, so the value comes from the dual side.
            // They stay unclamped here: a split like (1 + e, -e) is only right as a pair.
            let value = -b.dot(&y);
            let y = y.map(|v| v.max(0.0));
            let x = polish(&a, &b, &y, x);
            Ok(LpOutcome::Optimal {
                value,
                solution: x,
                duals: y.rows(0, m).into_owned(),
            })
        }
        DualResult::DualUnbounded => Ok(LpOutcome::Infeasible),
        DualResult::DualInfeasible => {
            // The primal is infeasible or unbounded; a zero objective decides which.
            let zero = DVector::zeros(n);
            match DualTableau::run(&a, &b, &zero) {
                DualResult::Optimal { .. } => Ok(LpOutcome::Unbounded),
                _ => Ok(LpOutcome::Infeasible),
            }
        }
    }
}

/// Moves `x` onto the face `{a_j·x = b_j : y_j > 0}` by the least-norm
/// correction, which removes the drift of an ill-conditioned basis solve.
fn polish(a: &DMatrix<f64>, b: &DVector<f64>, y: &DVector<f64>, x: DVector<f64>) -> DVector<f64> {
    let active: Vec<usize> = (0..y.len()).filter(|&j| y[j] > 0.0).collect();
    if active.is_empty() {
        return x;
    }
    let a_act = a.select_rows(&active);
    let resid = DVector::from_fn(active.len(), |k, _| b[active[k]]) - &a_act * &x;
    let Ok(step) = a_act.svd(true, true).solve(&resid, 1e-12) else {
        return x;
    };
    let candidate = &x + step;
    let viol = |p: &DVector<f64>| (a * p - b).max();
    if viol(&candidate) <= viol(&x).max(FEAS_TOL) {
        candidate
    } else {
        x
    }
}

/// `max_{A w <= b} direction·w`.
pub fn support_value(a: &DMatrix<f64>, b: &DVector<f64>, direction: &DVector<f64>) -> Result<f64> {
    if direction.len() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            found: direction.len(),
        });
    }
    let lp = LinearProgram::new(-direction, a.clone(), b.clone());
    match solve(&lp)? {
        LpOutcome::Optimal { value, .. } => Ok(-value),
        LpOutcome::Infeasible => Err(Error::EmptySet),
        LpOutcome::Unbounded => Err(Error::UnboundedDirection),
    }
}

/// `max_{A w <= b} direction·w` together with a maximizer.
pub fn support_point(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    direction: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    let lp = LinearProgram::new(-direction, a.clone(), b.clone());
    match solve(&lp)? {
        LpOutcome::Optimal { value, solution, .. } => Ok((-value, solution)),
        LpOutcome::Infeasible => Err(Error::EmptySet),
        LpOutcome::Unbounded => Err(Error::UnboundedDirection),
    }
}

enum DualResult {
    Optimal { x: DVector<f64>, y: DVector<f64> },
    DualInfeasible,
    DualUnbounded,
}

/// Pivots between rebuilding the tableau from the original data.
const REFRESH_EVERY: usize = 16;

/// Tableau for `min b·y s.t. Aᵀy = -c, y >= 0` with one artificial per row.
///
/// Columns `0..p` are the `y` variables, `p..p+n` the artificials, `p+n` the rhs.
/// Row `n` holds reduced costs; its rhs slot holds the negated objective.
struct DualTableau {
    /// Sign-adjusted `[Aᵀ | I | -c]`, kept to rebuild `t` from the basis.
    orig: DMatrix<f64>,
    t: DMatrix<f64>,
    basis: Vec<usize>,
    /// `-1` where the row was negated to make its rhs nonnegative.
    sign: Vec<f64>,
    cost: Vec<f64>,
    p: usize,
    n: usize,
    phase2: bool,
}

impl DualTableau {
    fn run(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> DualResult {
        let (p, n) = a.shape();
        let width = p + n + 1;
        let mut orig = DMatrix::<f64>::zeros(n, width);
        let mut sign = vec![1.0; n];
        for i in 0..n {
            let s = if -c[i] < 0.0 { -1.0 } else { 1.0 };
            sign[i] = s;
            for j in 0..p {
                orig[(i, j)] = s * a[(j, i)];
            }
            orig[(i, p + i)] = 1.0;
            orig[(i, width - 1)] = s * -c[i];
        }
        let mut t = DMatrix::<f64>::zeros(n + 1, width);
        t.rows_mut(0, n).copy_from(&orig);
        let mut cost = vec![0.0; width - 1];
        cost[p..].fill(1.0);
        let mut tab = DualTableau {
            orig,
            t,
            basis: (p..p + n).collect(),
            sign,
            cost,
            p,
            n,
            phase2: false,
        };

        // Phase 1: minimize the sum of artificials, which is bounded below by zero.
        tab.price();
        tab.iterate();
        let infeas = -tab.t[(n, width - 1)];
        let scale = 1.0 + c.iter().map(|v| v.abs()).sum::<f64>();
        if infeas > FEAS_TOL * scale {
            return DualResult::DualInfeasible;
        }
        tab.drive_out_artificials();

        // Phase 2: true costs on y, zero on artificials.
        for j in 0..width - 1 {
            tab.cost[j] = if j < p { b[j] } else { 0.0 };
        }
        tab.phase2 = true;
        tab.refresh();
        if !tab.iterate() {
            return DualResult::DualUnbounded;
        }

        // Multipliers: reduced cost of artificial i is -pi_i for the sign-adjusted row.
        let mut x = DVector::<f64>::zeros(n);
        for i in 0..n {
            x[i] = -tab.t[(n, p + i)] * tab.sign[i];
        }
        let mut y = DVector::<f64>::zeros(p);
        for i in 0..n {
            let j = tab.basis[i];
            if j < p {
                y[j] = tab.t[(i, width - 1)];
            }
        }
        DualResult::Optimal { x, y }
    }

    /// Recomputes the reduced-cost row from the body and the current costs.
    fn price(&mut self) {
        let (n, width) = (self.n, self.t.ncols());
        for j in 0..width {
            let mut d = if j < width - 1 { self.cost[j] } else { 0.0 };
            for i in 0..n {
                d -= self.cost[self.basis[i]] * self.t[(i, j)];
            }
            self.t[(n, j)] = d;
        }
    }

    /// Rebuilds the body as `B⁻¹ · orig` for the current basis, discarding
    /// accumulated pivot round-off. Keeps the old body if `B` is singular.
    fn refresh(&mut self) {
        let n = self.n;
        let basis_mat = self.orig.select_columns(&self.basis);
        if let Some(body) = basis_mat.lu().solve(&self.orig) {
            if body.iter().all(|v| v.is_finite()) {
                self.t.rows_mut(0, n).copy_from(&body);
                for (i, &j) in self.basis.iter().enumerate() {
                    for k in 0..n {
                        self.t[(k, j)] = if k == i { 1.0 } else { 0.0 };
                    }
                }
            }
        }
        self.price();
    }

    /// Pivots until optimal. Returns `false` on an unbounded ray.
    /// Both verdicts are confirmed on a freshly rebuilt tableau.
    fn iterate(&mut self) -> bool {
        let (n, p) = (self.n, self.p);
        let rhs = p + n;
        let max_pivots = 50 * (p + n) + 1000;
        let mut since_refresh = 0;
        let mut fresh = false;
        let mut degenerate = 0;
        for _ in 0..max_pivots {
            if since_refresh >= REFRESH_EVERY {
                self.refresh();
                since_refresh = 0;
                fresh = true;
            }
            let candidates = (0..p).filter(|&j| self.t[(n, j)] < -OPT_TOL);
            let enter = if degenerate >= DEGENERATE_RUN {
                candidates.min()
            } else {
                candidates.min_by(|&i, &j| self.t[(n, i)].total_cmp(&self.t[(n, j)]))
            };
            let Some(enter) = enter else {
                if fresh {
                    return true;
                }
                self.refresh();
                since_refresh = 0;
                fresh = true;
                continue;
            };
            let Some(row) = self.leaving_row(enter, rhs) else {
                if fresh {
                    return false;
                }
                self.refresh();
                since_refresh = 0;
                fresh = true;
                continue;
            };
            if self.t[(row, rhs)] > FEAS_TOL {
                degenerate = 0;
            } else {
                degenerate += 1;
            }
            self.pivot(row, enter);
            since_refresh += 1;
            fresh = false;
        }
        self.refresh();
        true
    }

    /// Ratio test. Among near-tied rows, pivots much smaller than the largest
    /// tied pivot are skipped, then the lowest basis index wins.
    fn leaving_row(&self, enter: usize, rhs: usize) -> Option<usize> {
        let n = self.n;
        let mut best = f64::INFINITY;
        let mut cands: Vec<(usize, f64, f64)> = Vec::new();
        for i in 0..n {
            let aij = self.t[(i, enter)];
            // A zero-level artificial left in the basis must not move off zero.
            let piv = if self.phase2 && self.basis[i] >= self.p { aij.abs() } else { aij };
            if piv <= PIVOT_TOL {
                continue;
            }
            let ratio = if self.phase2 && self.basis[i] >= self.p {
                0.0
            } else {
                self.t[(i, rhs)].max(0.0) / piv
            };
            best = best.min(ratio);
            cands.push((i, ratio, piv));
        }
        let tie = RATIO_TIE * (1.0 + best.abs());
        let tied: Vec<&(usize, f64, f64)> = cands.iter().filter(|c| c.1 <= best + tie).collect();
        let big = tied.iter().map(|c| c.2).fold(0.0, f64::max);
        tied.into_iter()
            .filter(|c| c.2 >= 1e-3 * big)
            .min_by_key(|c| self.basis[c.0])
            .map(|c| c.0)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.t.ncols();
        let piv = self.t[(row, col)];
        for j in 0..width {
            self.t[(row, j)] /= piv;
        }
        for i in 0..=self.n {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..width {
                let v = self.t[(row, j)];
                if v != 0.0 {
                    self.t[(i, j)] -= f * v;
                }
            }
            self.t[(i, col)] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Replaces zero-level artificials in the basis by `y` columns where possible.
    /// Rows where no such column exists are linearly dependent and stay inert.
    fn drive_out_artificials(&mut self) {
        for i in 0..self.n {
            if self.basis[i] < self.p {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.p {
                let v = self.t[(i, j)].abs();
                if v > 1e-9 && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                self.pivot(i, j);
            }
        }
    }
}
