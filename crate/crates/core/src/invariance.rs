//! M-step hold precursor sets and the fixed-point iterations for the maximal
//! (robust) M-step hold control invariant set.
//!
//! For `x[k+1] = A x[k] + B u` with `u` held for `M` samples, the predicted state
//! is `x[k] = A^k x + G_k u` with `G_1 = B`, `G_k = A G_{k-1} + B`. Requiring
//! `x[1..=M]` in `S = {H x <= h}` and `u` in `U = {H_u u <= h_u}` gives one
//! polytope in `(x, u)`; projecting out `u` gives `Pre^M(S)`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::disturbance::DisturbanceSchedule;
use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram, LpOutcome};
use crate::lti::DiscreteLtiModel;
use crate::polytope::{Polytope, SET_TOL};

/// Stacked constraints `Ĥ (x, u) <= ĥ` of an M-step hold precursor.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedConstraintSystem {
    pub h_hat: DMatrix<f64>,
    pub h_hat_rhs: DVector<f64>,
    pub hold: usize,
    pub state_dim: usize,
    pub input_dim: usize,
    /// Row ranges of the prediction blocks `k = 1..=M`, followed by the input block.
    pub block_rows: Vec<Range<usize>>,
}

impl LiftedConstraintSystem {
    pub fn to_polytope(&self) -> Result<Polytope> {
        Polytope::new(self.h_hat.clone(), self.h_hat_rhs.clone())
    }

    pub fn state_part(&self) -> DMatrix<f64> {
        self.h_hat.columns(0, self.state_dim).into_owned()
    }

    pub fn input_part(&self) -> DMatrix<f64> {
        self.h_hat.columns(self.state_dim, self.input_dim).into_owned()
    }
}

fn check_dims(s: &Polytope, u: &Polytope, md: &DiscreteLtiModel, hold: usize) -> Result<()> {
    if hold == 0 {
        return Err(Error::InvalidProblem("hold count M must be at least 1".into()));
    }
    if s.dim() != md.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: md.state_dim(),
            found: s.dim(),
        });
    }
    if u.dim() != md.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: md.input_dim(),
            found: u.dim(),
        });
    }
    Ok(())
}

/// Builds `Ĥ`, `ĥ` for `Pre^M(S)`.
pub fn build_lifted(
    s: &Polytope,
    u: &Polytope,
    md: &DiscreteLtiModel,
    hold: usize,
) -> Result<LiftedConstraintSystem> {
    check_dims(s, u, md, hold)?;
    let (n, m) = (md.state_dim(), md.input_dim());
    let (rs, ru) = (s.num_rows(), u.num_rows());
    let rows = hold * rs + ru;
    let mut h_hat = DMatrix::zeros(rows, n + m);
    let mut rhs = DVector::zeros(rows);
    let mut block_rows = Vec::with_capacity(hold + 1);

    let mut a_pow = md.a.clone();
    let mut g = md.b.clone();
    for k in 0..hold {
        if k > 0 {
            a_pow = &md.a * &a_pow;
            g = &md.a * &g + &md.b;
        }
        let r0 = k * rs;
        h_hat.view_mut((r0, 0), (rs, n)).copy_from(&(s.a() * &a_pow));
        h_hat.view_mut((r0, n), (rs, m)).copy_from(&(s.a() * &g));
        rhs.rows_mut(r0, rs).copy_from(s.b());
        block_rows.push(r0..r0 + rs);
    }
    let r0 = hold * rs;
    h_hat.view_mut((r0, n), (ru, m)).copy_from(u.a());
    rhs.rows_mut(r0, ru).copy_from(u.b());
    block_rows.push(r0..rows);

    Ok(LiftedConstraintSystem {
        h_hat,
        h_hat_rhs: rhs,
        hold,
        state_dim: n,
        input_dim: m,
        block_rows,
    })
}

/// As [`build_lifted`] with prediction block `k + 1` tightened by `W[k]`:
/// `h̃_j = h_j - max_{w in W[k]} H_j w`. The input block is left as is.
pub fn build_lifted_robust(
    s: &Polytope,
    u: &Polytope,
    md: &DiscreteLtiModel,
    w: &DisturbanceSchedule,
) -> Result<LiftedConstraintSystem> {
    let hold = w.period();
    let mut lifted = build_lifted(s, u, md, hold)?;
    if w.dim() != md.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: md.state_dim(),
            found: w.dim(),
        });
    }
    for k in 0..hold {
        let wk = &w.sets()[k];
        let range = lifted.block_rows[k].clone();
        for (j, row) in range.enumerate() {
            let hj = s.a().row(j).transpose();
            if hj.amax() == 0.0 {
                continue;
            }
            lifted.h_hat_rhs[row] = s.b()[j] - wk.support(&hj)?;
        }
    }
    Ok(lifted)
}

/// `Pre^M(S)`: states from which one held input keeps `x[1..=M]` in `S`.
/// `x[0]` itself is unconstrained.
pub fn pre_m(s: &Polytope, u: &Polytope, md: &DiscreteLtiModel, hold: usize) -> Result<Polytope> {
    let lifted = build_lifted(s, u, md, hold)?;
    lifted.to_polytope()?.project_out_last(md.input_dim())
}

/// `Pre^M(S, W)` with `M = W.period()`. Returns the canonical empty polytope when
/// the tightening leaves nothing.
pub fn pre_m_robust(
    s: &Polytope,
    u: &Polytope,
    md: &DiscreteLtiModel,
    w: &DisturbanceSchedule,
) -> Result<Polytope> {
    let lifted = build_lifted_robust(s, u, md, w)?;
    lifted.to_polytope()?.project_out_last(md.input_dim())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantOptions {
    /// Termination tolerance of the set-equality test.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for InvariantOptions {
    fn default() -> Self {
        Self {
            tolerance: SET_TOL,
            max_iterations: 200,
        }
    }
}

/// Output of the fixed-point iteration, including every iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSetResult {
    pub final_set: Polytope,
    /// `Ω_0 = X, Ω_1, …, Ω_final`.
    pub iterates: Vec<Polytope>,
    #[serde(rename = "M")]
    pub hold: usize,
    pub converged: bool,
    pub iterations: usize,
    pub tolerance: f64,
    pub robust: bool,
}

impl InvariantSetResult {
    pub fn is_empty(&self) -> bool {
        self.final_set.is_empty()
    }
}

fn fixed_point(
    x: &Polytope,
    u: &Polytope,
    hold: usize,
    robust: bool,
    opts: &InvariantOptions,
    pre: impl Fn(&Polytope) -> Result<Polytope>,
) -> Result<InvariantSetResult> {
    let x0 = x.remove_redundant();
    if x0.is_empty() {
        return Err(Error::InvalidProblem("state constraint set is empty".into()));
    }
    if u.is_empty() {
        return Err(Error::InvalidProblem("input constraint set is empty".into()));
    }
    let mut iterates = vec![x0.clone()];
    let mut omega = x0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let next = pre(&omega)?.intersect(&omega)?.remove_redundant();
        iterates.push(next.clone());
        if next.is_empty() || next.set_equal(&omega, opts.tolerance)? {
            converged = true;
            break;
        }
        omega = next;
    }
    Ok(InvariantSetResult {
        final_set: iterates.last().cloned().expect("at least one iterate"),
        iterates,
        hold,
        converged,
        iterations,
        tolerance: opts.tolerance,
        robust,
    })
}

/// Maximal M-step hold control invariant set: `Ω_{i+1} = Pre^M(Ω_i) ∩ Ω_i`
/// from `Ω_0 = X` until two iterates agree within `opts.tolerance`.
pub fn compute_cinf(
    x: &Polytope,
    u: &Polytope,
    md: &DiscreteLtiModel,
    hold: usize,
    opts: &InvariantOptions,
) -> Result<InvariantSetResult> {
    check_dims(x, u, md, hold)?;
    fixed_point(x, u, hold, false, opts, |s| pre_m(s, u, md, hold))
}

/// Maximal robust M-step hold control invariant set under schedule `w`
/// (whose period is the hold count). An empty result is a legitimate outcome.
pub fn compute_rcinf(
    x: &Polytope,
    u: &Polytope,
    md: &DiscreteLtiModel,
    w: &DisturbanceSchedule,
    opts: &InvariantOptions,
) -> Result<InvariantSetResult> {
    let hold = w.period();
    check_dims(x, u, md, hold)?;
    fixed_point(x, u, hold, true, opts, |s| pre_m_robust(s, u, md, w))
}

/// Largest margin `t <= 1` such that some `u` keeps every predicted state at
/// least `t` inside each face of `target` (robustly when `w` is given) and `u`
/// at least `t` inside each face of `u_set`, together with that `u`.
///
/// Distances are measured with the rows of `target` and `u_set` scaled to unit
/// norm, so for the converged iterate of a fixed-point run every member state
/// has margin at least `-tolerance`.
pub fn hold_input_margin(
    x: &DVector<f64>,
    target: &Polytope,
    u_set: &Polytope,
    md: &DiscreteLtiModel,
    hold: usize,
    w: Option<&DisturbanceSchedule>,
) -> Result<(f64, DVector<f64>)> {
    if x.len() != md.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: md.state_dim(),
            found: x.len(),
        });
    }
    let lifted = match w {
        Some(w) => {
            if w.period() != hold {
                return Err(Error::InvalidSchedule(format!(
                    "schedule period {} does not match hold count {hold}",
                    w.period()
                )));
            }
            build_lifted_robust(target, u_set, md, w)?
        }
        None => build_lifted(target, u_set, md, hold)?,
    };
    let (n, m) = (md.state_dim(), md.input_dim());
    let rows = lifted.h_hat.nrows();
    let row_norm = |i: usize| {
        let input_block = &lifted.block_rows[hold];
        if input_block.contains(&i) {
            u_set.a().row(i - input_block.start).norm()
        } else {
            target.a().row(i % target.num_rows()).norm()
        }
    };
    let mut a = DMatrix::zeros(rows, m + 1);
    let mut b = DVector::zeros(rows);
    let mut worst_const = f64::INFINITY;
    let mut k = 0;
    for i in 0..rows {
        let full = lifted.h_hat.row(i);
        let slack = lifted.h_hat_rhs[i] - full.columns(0, n).dot(&x.transpose());
        let norm = row_norm(i);
        if norm < 1e-12 {
            if slack < 0.0 {
                worst_const = f64::NEG_INFINITY;
            }
            continue;
        }
        if full.columns(n, m).amax() < 1e-12 * norm {
            worst_const = worst_const.min(slack / norm);
            continue;
        }
        a.view_mut((k, 0), (1, m)).copy_from(&(full.columns(n, m) / norm));
        a[(k, m)] = 1.0;
        b[k] = slack / norm;
        k += 1;
    }
    let a = a.rows(0, k).into_owned();
    let b = b.rows(0, k).into_owned();
    let mut c = DVector::zeros(m + 1);
    c[m] = -1.0;
    let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); m];
    bounds.push((f64::NEG_INFINITY, 1.0));
    let lp = LinearProgram::new(c, a, b).with_bounds(bounds);
    let (t, u) = match lp::solve(&lp)? {
        LpOutcome::Optimal { solution, .. } => (solution[m], solution.rows(0, m).into_owned()),
        // Only reachable without rows; every u then works.
        _ => (1.0, DVector::zeros(m)),
    };
    Ok((t.min(worst_const), u))
}

/// A single input `u ∈ U` whose M-step held trajectory from `x` keeps
/// `x[1..=M]` in `target` (robustly when `w` is given), accepting row
/// violations up to `tol`. `None` when no such input exists.
pub fn feasible_hold_input(
    x: &DVector<f64>,
    target: &Polytope,
    u_set: &Polytope,
    md: &DiscreteLtiModel,
    hold: usize,
    w: Option<&DisturbanceSchedule>,
    tol: f64,
) -> Result<Option<DVector<f64>>> {
    let (margin, u) = hold_input_margin(x, target, u_set, md, hold, w)?;
    Ok((margin >= -tol).then_some(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disturbance::box_schedule;
    use nalgebra::{dmatrix, dvector};

    fn interval(r: f64) -> Polytope {
        Polytope::symmetric_box(&[r]).unwrap()
    }

    fn integrator() -> DiscreteLtiModel {
        DiscreteLtiModel::new(dmatrix![1.0], dmatrix![1.0], 1.0).unwrap()
    }

    fn direct() -> DiscreteLtiModel {
        DiscreteLtiModel::new(dmatrix![0.0], dmatrix![1.0], 1.0).unwrap()
    }

    #[test]
    fn single_step_lift_is_classic_precursor() {
        let s = Polytope::symmetric_box(&[1.0, 2.0]).unwrap();
        let u = interval(3.0);
        let md = DiscreteLtiModel::new(dmatrix![1.0, 0.5; 0.0, 1.0], dmatrix![0.125; 0.5], 0.5).unwrap();
        let l = build_lifted(&s, &u, &md, 1).unwrap();
        assert_eq!(l.block_rows, vec![0..4, 4..6]);
        assert_eq!(l.h_hat.view((0, 0), (4, 2)).into_owned(), s.a() * &md.a);
        assert_eq!(l.h_hat.view((0, 2), (4, 1)).into_owned(), s.a() * &md.b);
        assert_eq!(l.h_hat.view((4, 0), (2, 2)).into_owned(), DMatrix::<f64>::zeros(2, 2));
        assert_eq!(l.h_hat.view((4, 2), (2, 1)).into_owned(), u.a().clone());
        assert_eq!(l.h_hat_rhs.rows(4, 2).into_owned(), u.b().clone());
    }

    #[test]
    fn integrator_two_step_columns() {
        let s = interval(1.0);
        let l = build_lifted(&s, &interval(1.0), &integrator(), 2).unwrap();
        // Rows of S are (1, -1); block 1 is H·(1 | 1), block 2 is H·(1 | 2).
        assert_eq!(l.state_part().column(0).rows(0, 4).into_owned(), dvector![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(l.input_part().column(0).rows(0, 4).into_owned(), dvector![1.0, -1.0, 2.0, -2.0]);
    }

    #[test]
    fn integrator_pre2_is_twice_as_wide() {
        let p = pre_m(&interval(1.0), &interval(1.0), &integrator(), 2).unwrap();
        assert!(p.set_equal(&interval(2.0), SET_TOL).unwrap());
    }

    #[test]
    fn state_independent_dynamics_give_whole_space() {
        for hold in 1..5 {
            let p = pre_m(&interval(1.0), &interval(1.0), &direct(), hold).unwrap();
            assert!(p.is_universe(), "M = {hold}");
        }
    }

    #[test]
    fn zero_disturbance_matches_nominal() {
        let w = box_schedule(|_| vec![0.0], 2).unwrap();
        let nominal = pre_m(&interval(1.0), &interval(1.0), &integrator(), 2).unwrap();
        let robust = pre_m_robust(&interval(1.0), &interval(1.0), &integrator(), &w).unwrap();
        assert!(robust.set_equal(&nominal, SET_TOL).unwrap());
    }

    #[test]
    fn robust_integrator_interval() {
        let w = box_schedule(|_| vec![0.5], 1).unwrap();
        let p = pre_m_robust(&interval(1.0), &interval(1.0), &integrator(), &w).unwrap();
        assert!(p.set_equal(&interval(1.5), SET_TOL).unwrap());
    }

    #[test]
    fn oversized_disturbance_empties_precursor() {
        let w = box_schedule(|_| vec![1.5], 1).unwrap();
        let p = pre_m_robust(&interval(1.0), &interval(1.0), &integrator(), &w).unwrap();
        assert!(p.is_empty());
        assert_eq!(p, Polytope::empty(1));
        let r = compute_rcinf(&interval(1.0), &interval(1.0), &integrator(), &w, &InvariantOptions::default())
            .unwrap();
        assert!(r.converged && r.is_empty());
    }

    #[test]
    fn direct_input_cinf_is_state_set() {
        for hold in [1, 2, 5] {
            let r = compute_cinf(&interval(1.0), &interval(1.0), &direct(), hold, &InvariantOptions::default())
                .unwrap();
            assert!(r.converged);
            assert!(r.final_set.set_equal(&interval(1.0), SET_TOL).unwrap());
            assert!(r.iterates[0].set_equal(&interval(1.0), SET_TOL).unwrap());
        }
    }

    #[test]
    fn scalar_unstable_state_set_is_invariant() {
        let e = 0.1f64.exp();
        let md = DiscreteLtiModel::new(dmatrix![e], dmatrix![e - 1.0], 0.1).unwrap();
        let r = compute_cinf(&interval(1.0), &interval(1.0), &md, 1, &InvariantOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.final_set.set_equal(&interval(1.0), SET_TOL).unwrap());
    }

    #[test]
    fn rejects_empty_inputs_and_bad_dims() {
        let empty = Polytope::empty(1);
        let opts = InvariantOptions::default();
        assert!(compute_cinf(&empty, &interval(1.0), &integrator(), 1, &opts).is_err());
        assert!(compute_cinf(&interval(1.0), &empty, &integrator(), 1, &opts).is_err());
        let sq = Polytope::symmetric_box(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            compute_cinf(&sq, &interval(1.0), &integrator(), 1, &opts),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(compute_cinf(&interval(1.0), &interval(1.0), &integrator(), 0, &opts).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        // Unstable integrator-like system that erodes X geometrically.
        let md = DiscreteLtiModel::new(dmatrix![2.0], dmatrix![1.0], 1.0).unwrap();
        let opts = InvariantOptions {
            tolerance: SET_TOL,
            max_iterations: 1,
        };
        let r = compute_cinf(&interval(10.0), &interval(1.0), &md, 1, &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.iterates.len(), 2);
    }

    #[test]
    fn hold_input_outside_state_set() {
        // x⁺ = u: any x reaches the target with u = 0.
        let u = feasible_hold_input(&dvector![5.0], &interval(1.0), &interval(1.0), &direct(), 1, None, 0.0)
            .unwrap()
            .expect("input exists");
        assert!(u[0].abs() <= 1.0);
    }

    #[test]
    fn hold_input_absent_when_unreachable() {
        let r = feasible_hold_input(&dvector![3.0], &interval(1.0), &interval(1.0), &integrator(), 1, None, 0.0)
            .unwrap();
        assert!(r.is_none());
    }

    #[test]
    fn hold_input_schedule_mismatch() {
        let w = box_schedule(|_| vec![0.1], 2).unwrap();
        assert!(
            feasible_hold_input(&dvector![0.0], &interval(1.0), &interval(1.0), &integrator(), 3, Some(&w), 0.0)
                .is_err()
        );
    }

    #[test]
    fn result_json_round_trip() {
        let r = compute_cinf(&interval(1.0), &interval(1.0), &integrator(), 2, &InvariantOptions::default())
            .unwrap();
        let s = crate::json::to_string(&r).unwrap();
        assert!(s.contains("\"M\":2"));
        let back: InvariantSetResult = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
