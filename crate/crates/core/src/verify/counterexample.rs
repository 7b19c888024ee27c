//! A state that the coarse model can keep in `X` while the fine model and the
//! continuous plant, driven by the up-sampled coarse inputs, cannot.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariance::{compute_cinf, InvariantOptions};
use crate::lp::{self, LinearProgram, LpOutcome};
use crate::lti::{upsample_inputs, ContinuousLtiModel, DiscreteLtiModel};
use crate::polytope::Polytope;

/// Continuous model, constraints and sampling setup of a counterexample search.
#[derive(Debug, Clone)]
pub struct CounterexampleProblem {
    pub model: ContinuousLtiModel,
    pub x_set: Polytope,
    pub u_set: Polytope,
    /// Fine sampling time.
    pub ts: f64,
    /// Coarse sampling time is `hold * ts`.
    pub hold: usize,
    /// Coarse steps in the planning LP.
    pub horizon: usize,
}

#[derive(Debug, Clone)]
pub struct CounterexampleOptions {
    /// Rejection samples drawn over the bounding box of the coarse set.
    pub samples: usize,
    pub seed: u64,
    /// Exact sub-steps per fine sample for the continuous trajectory.
    pub substeps: usize,
    pub invariant: InvariantOptions,
}

impl Default for CounterexampleOptions {
    fn default() -> Self {
        Self {
            samples: 4000,
            seed: 0,
            substeps: 50,
            invariant: InvariantOptions::default(),
        }
    }
}

/// First constraint violation along a sampled trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub step: usize,
    pub time: f64,
    /// Row of `X`'s H-representation.
    pub constraint: usize,
    /// Normalized amount by which the row is exceeded, `> 0`.
    pub margin: f64,
    /// Largest violation over the whole trajectory.
    pub worst_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub ts: f64,
    #[serde(rename = "M")]
    pub hold: usize,
    #[serde(with = "crate::json::vector")]
    pub x0: DVector<f64>,
    /// Depth of `x0` inside the coarse set and outside the fine set, whichever is smaller.
    pub depth: f64,
    #[serde(with = "crate::json::vectors")]
    pub coarse_inputs: Vec<DVector<f64>>,
    /// Constraint slack of `X` per fine sample (negative means violated).
    pub fine_margins: Vec<f64>,
    /// Constraint slack of `X` per continuous sub-step.
    pub continuous_margins: Vec<f64>,
    pub fine_violation: Option<Violation>,
    pub continuous_violation: Option<Violation>,
}

impl CounterexampleReport {
    /// Re-simulates the stored inputs, returning `(fine_margins, continuous_margins)`.
    pub fn replay(
        &self,
        model: &ContinuousLtiModel,
        x_set: &Polytope,
        substeps: usize,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let fine = model.exact_discretize(self.ts)?;
        simulate_margins(model, &fine, x_set, &self.x0, &self.coarse_inputs, self.hold, substeps)
    }
}

/// Slack `min_j (b_j - a_j x) / |a_j|`.
fn slack(set: &Polytope, x: &DVector<f64>) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for j in 0..set.num_rows() {
        let row = set.a().row(j);
        let s = (set.b()[j] - row.dot(&x.transpose())) / row.norm();
        if s < best.0 {
            best = (s, j);
        }
    }
    best
}

fn simulate_margins(
    model: &ContinuousLtiModel,
    fine: &DiscreteLtiModel,
    x_set: &Polytope,
    x0: &DVector<f64>,
    coarse_inputs: &[DVector<f64>],
    hold: usize,
    substeps: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let inputs = upsample_inputs(coarse_inputs, hold);
    let fine_traj = fine.simulate(x0, &inputs, None)?;
    let cont = model.intersample_trajectory(x0, &inputs, fine.ts, substeps)?;
    Ok((
        fine_traj.iter().map(|x| slack(x_set, x).0).collect(),
        cont.iter().map(|(_, x)| slack(x_set, x).0).collect(),
    ))
}

fn first_violation(margins: &[f64], rows: &[usize], dt: f64) -> Option<Violation> {
    let step = margins.iter().position(|m| *m < 0.0)?;
    let worst = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Some(Violation {
        step,
        time: step as f64 * dt,
        constraint: rows[step],
        margin: -margins[step],
        worst_margin: -worst,
    })
}

/// Coarse inputs keeping `x0` in `X` at the coarse samples for `horizon` steps
/// while minimizing the ∞-norm of the final state.
fn plan_coarse(
    coarse: &DiscreteLtiModel,
    x_set: &Polytope,
    u_set: &Polytope,
    x0: &DVector<f64>,
    horizon: usize,
) -> Result<Option<Vec<DVector<f64>>>> {
    let (n, m) = (coarse.state_dim(), coarse.input_dim());
    let vars = horizon * m + 1;
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    // x_k = free_k + sum_j gain_{k,j} u_j, tracked column block by column block.
    let mut free = x0.clone();
    let mut gain = DMatrix::<f64>::zeros(n, horizon * m);
    for k in 0..horizon {
        free = &coarse.a * &free;
        gain = &coarse.a * &gain;
        let mut block = gain.columns_mut(k * m, m);
        block += &coarse.b;
        let mut push = |coef: DVector<f64>, rhs: f64| rows.push((coef, rhs));
        for r in 0..x_set.num_rows() {
            let h = x_set.a().row(r);
            let mut coef = DVector::zeros(vars);
            coef.rows_mut(0, horizon * m).copy_from(&(h * &gain).transpose());
            push(coef, x_set.b()[r] - h.dot(&free.transpose()));
        }
        for r in 0..u_set.num_rows() {
            let mut coef = DVector::zeros(vars);
            coef.rows_mut(k * m, m).copy_from(&u_set.a().row(r).transpose());
            push(coef, u_set.b()[r]);
        }
        if k + 1 == horizon {
            for i in 0..n {
                for s in [1.0, -1.0] {
                    let mut coef = DVector::zeros(vars);
                    coef.rows_mut(0, horizon * m).copy_from(&(gain.row(i) * s).transpose());
                    coef[vars - 1] = -1.0;
                    push(coef, -s * free[i]);
                }
            }
        }
    }
    let mut a = DMatrix::zeros(rows.len(), vars);
    let mut b = DVector::zeros(rows.len());
    for (i, (coef, rhs)) in rows.iter().enumerate() {
        a.set_row(i, &coef.transpose());
        b[i] = *rhs;
    }
    let mut c = DVector::zeros(vars);
    c[vars - 1] = 1.0;
    match lp::solve(&LinearProgram::new(c, a, b))? {
        LpOutcome::Optimal { solution, .. } => Ok(Some(
            (0..horizon)
                .map(|k| solution.rows(k * m, m).into_owned())
                .collect(),
        )),
        _ => Ok(None),
    }
}

/// Searches `C_{∞, M Ts} \ C_{∞, Ts}` for a state whose up-sampled coarse plan
/// leaves `X`. `Ok(None)` means the deepest candidate found produced no violation.
pub fn find_counterexample(
    problem: &CounterexampleProblem,
    opts: &CounterexampleOptions,
) -> Result<Option<CounterexampleReport>> {
    if problem.horizon == 0 {
        return Err(Error::InvalidProblem("horizon must be at least 1".into()));
    }
    let fine = problem.model.exact_discretize(problem.ts)?;
    let coarse = problem.model.exact_discretize(problem.ts * problem.hold as f64)?;
    let fine_set = compute_cinf(&problem.x_set, &problem.u_set, &fine, 1, &opts.invariant)?.final_set;
    let coarse_set = compute_cinf(&problem.x_set, &problem.u_set, &coarse, 1, &opts.invariant)?.final_set;
    find_counterexample_with_sets(problem, opts, &fine_set, &coarse_set)
}

/// As [`find_counterexample`] with the two invariant sets already computed.
pub fn find_counterexample_with_sets(
    problem: &CounterexampleProblem,
    opts: &CounterexampleOptions,
    fine_set: &Polytope,
    coarse_set: &Polytope,
) -> Result<Option<CounterexampleReport>> {
    let tol = opts.invariant.tolerance;
    if coarse_set.is_empty() || fine_set.contains(coarse_set, tol)? {
        return Err(Error::SetsNested);
    }
    let fine = problem.model.exact_discretize(problem.ts)?;
    let coarse = problem.model.exact_discretize(problem.ts * problem.hold as f64)?;

    let (lo, hi) = coarse_set.bounding_box()?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for _ in 0..opts.samples {
        let x = DVector::from_fn(lo.len(), |i, _| rng.random_range(lo[i]..=hi[i]));
        let inside = -coarse_set.max_violation(&x);
        let outside = fine_set.max_violation(&x);
        let depth = inside.min(outside);
        if depth > 0.0 && best.as_ref().is_none_or(|(d, _)| depth > *d) {
            best = Some((depth, x));
        }
    }
    let Some((depth, x0)) = best else {
        return Ok(None);
    };
    let Some(coarse_inputs) = plan_coarse(&coarse, &problem.x_set, &problem.u_set, &x0, problem.horizon)? else {
        return Ok(None);
    };

    let inputs = upsample_inputs(&coarse_inputs, problem.hold);
    let fine_traj = fine.simulate(&x0, &inputs, None)?;
    let cont = problem
        .model
        .intersample_trajectory(&x0, &inputs, fine.ts, opts.substeps)?;
    let (fine_margins, fine_rows): (Vec<f64>, Vec<usize>) =
        fine_traj.iter().map(|x| slack(&problem.x_set, x)).unzip();
    let (continuous_margins, cont_rows): (Vec<f64>, Vec<usize>) =
        cont.iter().map(|(_, x)| slack(&problem.x_set, x)).unzip();
    let fine_violation = first_violation(&fine_margins, &fine_rows, fine.ts);
    let continuous_violation = first_violation(
        &continuous_margins,
        &cont_rows,
        fine.ts / opts.substeps as f64,
    );
    if fine_violation.is_none() && continuous_violation.is_none() {
        return Ok(None);
    }
    Ok(Some(CounterexampleReport {
        ts: problem.ts,
        hold: problem.hold,
        x0,
        depth,
        coarse_inputs,
        fine_margins,
        continuous_margins,
        fine_violation,
        continuous_violation,
    }))
}
