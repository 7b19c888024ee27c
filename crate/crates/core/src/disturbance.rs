//! Time-varying disturbance bounds `W[mod(k, M)]`.
//!
//! `sets[j]` bounds the accumulated model and discretization error `j + 1`
//! samples after the last state measurement, so the bound resets at every
//! measurement. The schedule is applied cumulatively: prediction `x[j+1]` is
//! tightened by `W[j]` alone, earlier disturbances are not pushed through `A`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::{Polytope, SET_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSchedule {
    sets: Vec<Polytope>,
}

impl DisturbanceSchedule {
    /// Every set must share one dimension and contain the origin.
    pub fn new(sets: Vec<Polytope>) -> Result<Self> {
        let Some(first) = sets.first() else {
            return Err(Error::InvalidSchedule("schedule needs at least one set".into()));
        };
        let n = first.dim();
        for (j, w) in sets.iter().enumerate() {
            if w.dim() != n {
                return Err(Error::InvalidSchedule(format!(
                    "set {j} has dimension {}, expected {n}",
                    w.dim()
                )));
            }
            if !w.contains_point(&nalgebra::DVector::zeros(n), 1e-12) {
                return Err(Error::InvalidSchedule(format!("set {j} does not contain the origin")));
            }
        }
        Ok(Self { sets })
    }

    /// The period `M`.
    pub fn period(&self) -> usize {
        self.sets.len()
    }

    pub fn dim(&self) -> usize {
        self.sets[0].dim()
    }

    pub fn sets(&self) -> &[Polytope] {
        &self.sets
    }

    /// `W[mod(k, M)]`.
    pub fn at(&self, k: usize) -> &Polytope {
        &self.sets[k % self.sets.len()]
    }

    /// Schedule restricted to the first `m` sets.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.sets.len() {
            return Err(Error::InvalidSchedule(format!(
                "cannot take {m} sets from a schedule of {}",
                self.sets.len()
            )));
        }
        Ok(Self {
            sets: self.sets[..m].to_vec(),
        })
    }

    /// `true` iff `W[j] ⊆ W[j+1]` for every consecutive pair.
    pub fn is_monotone(&self) -> Result<bool> {
        for pair in self.sets.windows(2) {
            if !pair[1].contains(&pair[0], SET_TOL)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `true` iff every set is exactly `{0}` in each coordinate direction.
    pub fn is_zero(&self) -> Result<bool> {
        let n = self.dim();
        for w in &self.sets {
            for i in 0..n {
                let mut e = nalgebra::DVector::zeros(n);
                e[i] = 1.0;
                if w.support(&e)? > 0.0 || w.support(&-e)? > 0.0 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Boxes `|w_i| <= radii(j)_i` for `j = 0..period`.
pub fn box_schedule(radii: impl Fn(usize) -> Vec<f64>, period: usize) -> Result<DisturbanceSchedule> {
    let sets = (0..period)
        .map(|j| {
            let r = radii(j);
            if r.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidSchedule(format!("box radii must be finite and nonnegative: {r:?}")));
            }
            Polytope::symmetric_box(&r)
        })
        .collect::<Result<Vec<_>>>()?;
    DisturbanceSchedule::new(sets)
}

/// Growth bound `(exp(j Ts) - 1) / 6` of the error between `ẋ = sin x + u` and
/// its linearization `ẋ = x + u` after `j` samples, valid while `|x| <= 1`.
pub fn taylor_error_bound(ts: f64, j: usize) -> f64 {
    (j as f64 * ts).exp_m1() / 6.0
}

/// One interval per step, `sets[j] = [-e, e]` with `e = taylor_error_bound(ts, j + 1)`.
pub fn sine_example_schedule(ts: f64, period: usize) -> Result<DisturbanceSchedule> {
    if !(ts > 0.0 && ts.is_finite()) {
        return Err(Error::InvalidSchedule(format!("sampling time must be positive, got {ts}")));
    }
    box_schedule(|j| vec![taylor_error_bound(ts, j + 1)], period)
}

#[derive(Serialize, Deserialize)]
struct ScheduleJson {
    #[serde(rename = "M")]
    period: usize,
    sets: Vec<Polytope>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScheduleInput {
    Sets(ScheduleJson),
    Boxes { box_radii: Vec<Vec<f64>> },
}

impl Serialize for DisturbanceSchedule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ScheduleJson {
            period: self.period(),
            sets: self.sets.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DisturbanceSchedule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match ScheduleInput::deserialize(d)? {
            ScheduleInput::Sets(raw) => {
                if raw.period != raw.sets.len() {
                    return Err(D::Error::custom(format!(
                        "\"M\" is {} but {} sets were given",
                        raw.period,
                        raw.sets.len()
                    )));
                }
                DisturbanceSchedule::new(raw.sets).map_err(D::Error::custom)
            }
            ScheduleInput::Boxes { box_radii } => {
                box_schedule(|j| box_radii[j].clone(), box_radii.len()).map_err(D::Error::custom)
            }
        }
    }
}
