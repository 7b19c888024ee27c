//! Closed-loop check of a robust set against the plant `ẋ = sin x + u`, whose
//! linearization at the origin is `ẋ = x + u`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disturbance::{sine_example_schedule, DisturbanceSchedule};
use crate::error::{Error, Result};
use crate::invariance::hold_input_margin;
use crate::lti::DiscreteLtiModel;
use crate::polytope::Polytope;

/// Integrator steps per sampling interval.
pub const RK_STEPS_PER_SAMPLE: usize = 100;

/// State and input bound of the example.
const BOUND: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SineTruthReport {
    pub ts: f64,
    #[serde(rename = "M")]
    pub hold: usize,
    pub epochs: usize,
    #[serde(with = "crate::json::vector")]
    pub x0: DVector<f64>,
    /// Integrator sub-steps with `|x| > 1`.
    pub constraint_violations: usize,
    /// Epoch ends outside the set.
    pub set_exits: usize,
    /// Epochs where no held input was certified.
    pub infeasible_epochs: usize,
    /// Largest `|x|` seen at any sub-step.
    pub max_abs_state: f64,
}

impl SineTruthReport {
    pub fn passed(&self) -> bool {
        self.constraint_violations == 0 && self.set_exits == 0 && self.infeasible_epochs == 0
    }
}

/// Model `x[k+1] = e^Ts x[k] + (e^Ts - 1) u[k]`.
pub fn sine_linear_model(ts: f64) -> Result<DiscreteLtiModel> {
    let e = ts.exp();
    let mut md = DiscreteLtiModel::new(
        nalgebra::DMatrix::from_element(1, 1, e),
        nalgebra::DMatrix::from_element(1, 1, e - 1.0),
        ts,
    )?;
    md.method = crate::lti::DiscretizationMethod::Exact;
    Ok(md)
}

fn rk4(x: f64, u: f64, h: f64) -> f64 {
    let f = |x: f64| x.sin() + u;
    let k1 = f(x);
    let k2 = f(x + 0.5 * h * k1);
    let k3 = f(x + 0.5 * h * k2);
    let k4 = f(x + h * k3);
    x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Runs `epochs` measure-and-hold cycles of the true plant from a random point
/// of `rc_set`. Each cycle takes the max-margin held input certified against
/// `rc_set` under `w` (the example's Taylor schedule when `None`), integrates
/// the sine dynamics over `hold * ts` with classical RK4, and re-measures.
pub fn sine_truth_check(
    ts: f64,
    hold: usize,
    rc_set: &Polytope,
    w: Option<&DisturbanceSchedule>,
    epochs: usize,
    seed: u64,
) -> Result<SineTruthReport> {
    if rc_set.dim() != 1 {
        return Err(Error::WrongDimension {
            expected: "1",
            found: rc_set.dim(),
        });
    }
    let md = sine_linear_model(ts)?;
    let u_set = Polytope::symmetric_box(&[BOUND])?;
    let schedule;
    let w = match w {
        Some(w) => Some(w),
        None => {
            schedule = sine_example_schedule(ts, hold)?;
            Some(&schedule)
        }
    };
    let (lo, hi) = rc_set.interval()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0 = if lo < hi { rng.random_range(lo..=hi) } else { lo };
    let mut report = SineTruthReport {
        ts,
        hold,
        epochs,
        x0: DVector::from_element(1, x0),
        constraint_violations: 0,
        set_exits: 0,
        infeasible_epochs: 0,
        max_abs_state: x0.abs(),
    };
    let h = ts / RK_STEPS_PER_SAMPLE as f64;
    let mut x = x0;
    for _ in 0..epochs {
        let (margin, u) = hold_input_margin(&DVector::from_element(1, x), rc_set, &u_set, &md, hold, w)?;
        if margin < 0.0 {
            report.infeasible_epochs += 1;
        }
        let u = u[0].clamp(-BOUND, BOUND);
        for _ in 0..hold * RK_STEPS_PER_SAMPLE {
            x = rk4(x, u, h);
            report.max_abs_state = report.max_abs_state.max(x.abs());
            if x.abs() > BOUND {
                report.constraint_violations += 1;
            }
        }
        if !rc_set.contains_point(&DVector::from_element(1, x), 0.0) {
            report.set_exits += 1;
        }
    }
    Ok(report)
}
