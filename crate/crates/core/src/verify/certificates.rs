//! Sampled certificates for a computed set: every member has a held input that
//! keeps it inside, and states of `X` outside the set have none.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::disturbance::DisturbanceSchedule;
use crate::error::{Error, Result};
use crate::invariance::hold_input_margin;
use crate::lti::DiscreteLtiModel;
use crate::polytope::Polytope;

/// Disturbance draws per schedule set and checked point in the robust case.
pub const DISTURBANCE_DRAWS: usize = 500;

/// Rejection-sampling attempts per requested sample before giving up.
const ATTEMPTS_PER_SAMPLE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub vertices_checked: usize,
    pub interior_checked: usize,
    /// Points without a held input keeping them in the set.
    #[serde(with = "crate::json::vectors")]
    pub failures: Vec<DVector<f64>>,
    /// Disturbed trajectories simulated (robust case only).
    pub disturbance_trials: usize,
    /// Of those, trajectories that left the set.
    pub disturbance_failures: usize,
    /// Smallest certificate margin seen.
    pub worst_margin: f64,
}

impl InvarianceReport {
    pub fn checked(&self) -> usize {
        self.vertices_checked + self.interior_checked
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.disturbance_failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalityReport {
    pub samples: usize,
    /// Exterior states that still admit a held input into the set.
    #[serde(with = "crate::json::vectors")]
    pub feasible: Vec<DVector<f64>>,
    /// Largest certificate margin over the exterior samples.
    pub best_margin: f64,
}

impl MaximalityReport {
    pub fn passed(&self) -> bool {
        self.feasible.is_empty()
    }
}

/// Uniform points of `set` by rejection from its bounding box.
pub fn sample_inside(set: &Polytope, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<DVector<f64>>> {
    let (lo, hi) = set.bounding_box()?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count * ATTEMPTS_PER_SAMPLE {
        if out.len() == count {
            break;
        }
        let x = DVector::from_fn(lo.len(), |i, _| rng.random_range(lo[i]..=hi[i]));
        if set.contains_point(&x, 0.0) {
            out.push(x);
        }
    }
    Ok(out)
}

/// One draw from `w`: a random vertex of its bounding box when that vertex lies
/// in `w` (always, for boxes), otherwise a uniform point of `w`.
fn draw_disturbance(w: &Polytope, lo: &DVector<f64>, hi: &DVector<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let corner = DVector::from_fn(lo.len(), |i, _| if rng.random_bool(0.5) { lo[i] } else { hi[i] });
    if w.contains_point(&corner, 1e-12) {
        return corner;
    }
    for _ in 0..ATTEMPTS_PER_SAMPLE {
        let x = DVector::from_fn(lo.len(), |i, _| rng.random_range(lo[i]..=hi[i]));
        if w.contains_point(&x, 0.0) {
            return x;
        }
    }
    DVector::zeros(lo.len())
}

/// Checks the fixed-point property of `set` at its vertices (planar and scalar
/// sets) and at `samples` uniform interior points.
///
/// A point passes when a held input keeps the `hold` predicted states inside
/// `set` up to `tol`, robustly against `w` when given. In the robust case
/// every certificate is also simulated against [`DISTURBANCE_DRAWS`] draws
/// from each `W[j]`, read as cumulative deviations from the prediction.
#[allow(clippy::too_many_arguments)]
pub fn validate_invariance(
    set: &Polytope,
    u_set: &Polytope,
    md: &DiscreteLtiModel,
    hold: usize,
    w: Option<&DisturbanceSchedule>,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<InvarianceReport> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertices = if set.dim() <= 2 { set.vertices_2d()? } else { Vec::new() };
    let interior = sample_inside(set, samples, &mut rng)?;
    let mut report = InvarianceReport {
        vertices_checked: vertices.len(),
        interior_checked: interior.len(),
        failures: Vec::new(),
        disturbance_trials: 0,
        disturbance_failures: 0,
        worst_margin: f64::INFINITY,
    };
    let boxes: Vec<(DVector<f64>, DVector<f64>)> = match w {
        Some(w) => w.sets().iter().map(|s| s.bounding_box()).collect::<Result<_>>()?,
        None => Vec::new(),
    };
    for x in vertices.iter().chain(&interior) {
        let (margin, u) = hold_input_margin(x, set, u_set, md, hold, w)?;
        report.worst_margin = report.worst_margin.min(margin);
        if margin < -tol {
            report.failures.push(x.clone());
            continue;
        }
        let Some(w) = w else { continue };
        for (j, (lo, hi)) in boxes.iter().enumerate() {
            // The prediction for step j + 1 from x under the held input.
            let mut pred = x.clone();
            for _ in 0..=j {
                pred = md.step(&pred, &u);
            }
            for _ in 0..DISTURBANCE_DRAWS {
                let d = draw_disturbance(&w.sets()[j], lo, hi, &mut rng);
                report.disturbance_trials += 1;
                if !set.contains_point(&(&pred + d), tol) {
                    report.disturbance_failures += 1;
                }
            }
        }
    }
    Ok(report)
}

/// Draws `samples` states of `x_set` lying at least `2 * tol` outside `set`
/// and records those that still admit a held input into `set`.
///
/// An exterior state counts as feasible only with a nonnegative certificate
/// margin: near the boundary the margin shrinks with the distance, so the
/// membership tolerance would hide genuine exterior points.
#[allow(clippy::too_many_arguments)]
pub fn check_maximality(
    set: &Polytope,
    x_set: &Polytope,
    u_set: &Polytope,
    md: &DiscreteLtiModel,
    hold: usize,
    w: Option<&DisturbanceSchedule>,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<MaximalityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = x_set.bounding_box()?;
    let mut report = MaximalityReport {
        samples: 0,
        feasible: Vec::new(),
        best_margin: f64::NEG_INFINITY,
    };
    for _ in 0..samples * ATTEMPTS_PER_SAMPLE {
        if report.samples == samples {
            break;
        }
        let x = DVector::from_fn(lo.len(), |i, _| rng.random_range(lo[i]..=hi[i]));
        if !x_set.contains_point(&x, 0.0) || set.max_violation(&x) < 2.0 * tol {
            continue;
        }
        report.samples += 1;
        let (margin, _) = hold_input_margin(&x, set, u_set, md, hold, w)?;
        report.best_margin = report.best_margin.max(margin);
        if margin >= 0.0 {
            report.feasible.push(x);
        }
    }
    Ok(report)
}
