//! Problem files: a model, its constraints, the hold counts to analyse and an
//! optional disturbance schedule, read from JSON.
//!
//! ```json
//! {
//!   "model": {"Ac": [[0, 1], [0, 0]], "Bc": [[0], [1]]},
//!   "Ts": 0.5,
//!   "X": {"box": {"lo": [-10, -10], "hi": [10, 10]}},
//!   "U": {"box": {"lo": [-10], "hi": [10]}},
//!   "M_list": [1, 4, 6, 8],
//!   "disturbance": "fig4-box",
//!   "options": {"tolerance": 1e-8, "max_iterations": 400, "seed": 0}
//! }
//! ```
//!
//! `model` is either continuous (`Ac`, `Bc`, discretized at `Ts` with
//! `method`) or discrete (`A`, `B`, optional `Ts`). Sets take an H-rep
//! `{"H", "h"}` or the box shorthand. `disturbance` is a built-in name, a
//! linear box growth `{"linear_box": r}` (`|w| <= (j + 1) r` at step `j`), or
//! an explicit schedule whose period covers the largest hold count.

use serde::{Deserialize, Serialize};

use crate::disturbance::{box_schedule, sine_example_schedule, DisturbanceSchedule};
use crate::error::{Error, Result};
use crate::invariance::InvariantOptions;
use crate::lti::{ContinuousLtiModel, DiscreteLtiModel, DiscretizationMethod};
use crate::polytope::Polytope;

/// Per-axis radius of the built-in growing box schedule.
pub const GROWING_BOX_RADIUS: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Continuous(ContinuousLtiModel),
    Discrete(DiscreteLtiModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetSpec {
    Box {
        #[serde(rename = "box")]
        bounds: BoxBounds,
    },
    HRep(Polytope),
}

impl SetSpec {
    pub fn to_polytope(&self) -> Result<Polytope> {
        match self {
            SetSpec::Box { bounds } => Polytope::from_box(&bounds.lo, &bounds.hi),
            SetSpec::HRep(p) => Ok(p.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuiltinDisturbance {
    /// `|w| <= (j + 1) * 0.2` on every state axis at step `j`.
    #[serde(rename = "fig4-box")]
    GrowingBox,
    /// Taylor remainder bound of the scalar sine plant.
    #[serde(rename = "sine-taylor")]
    SineTaylor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DisturbanceSpec {
    Builtin(BuiltinDisturbance),
    LinearBox { linear_box: Vec<f64> },
    Schedule(DisturbanceSchedule),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for ProblemOptions {
    fn default() -> Self {
        let d = InvariantOptions::default();
        Self {
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            seed: 0,
        }
    }
}

fn exact() -> DiscretizationMethod {
    DiscretizationMethod::Exact
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub model: ModelSpec,
    #[serde(rename = "Ts", default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<f64>,
    /// Discretization of a continuous model.
    #[serde(default = "exact")]
    pub method: DiscretizationMethod,
    #[serde(rename = "X")]
    pub x: SetSpec,
    #[serde(rename = "U")]
    pub u: SetSpec,
    #[serde(rename = "M_list")]
    pub m_list: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<DisturbanceSpec>,
    #[serde(default)]
    pub options: ProblemOptions,
}

impl ProblemSpec {
    /// Parses and validates a problem file. Malformed JSON is a
    /// [`Error::Parse`]; well-formed but inconsistent problems are
    /// [`Error::InvalidProblem`] (or the model and schedule errors).
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ProblemSpec = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_string_pretty(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_list.is_empty() {
            return Err(Error::InvalidProblem("M_list is empty".into()));
        }
        if self.m_list.contains(&0) {
            return Err(Error::InvalidProblem("hold counts must be at least 1".into()));
        }
        let o = &self.options;
        if !(o.tolerance > 0.0 && o.tolerance.is_finite()) {
            return Err(Error::InvalidProblem(format!("tolerance must be positive, got {}", o.tolerance)));
        }
        if o.max_iterations == 0 {
            return Err(Error::InvalidProblem("max_iterations must be at least 1".into()));
        }
        let md = self.discrete_model()?;
        let (x, u) = (self.x_set()?, self.u_set()?);
        if x.dim() != md.state_dim() {
            return Err(Error::InvalidProblem(format!(
                "X has dimension {}, state dimension is {}",
                x.dim(),
                md.state_dim()
            )));
        }
        if u.dim() != md.input_dim() {
            return Err(Error::InvalidProblem(format!(
                "U has dimension {}, input dimension is {}",
                u.dim(),
                md.input_dim()
            )));
        }
        for &m in &self.m_list {
            if let Some(w) = self.schedule(m)? {
                if w.dim() != md.state_dim() {
                    return Err(Error::InvalidProblem(format!(
                        "disturbance has dimension {}, state dimension is {}",
                        w.dim(),
                        md.state_dim()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Base sampling time: the top-level `Ts`, else the discrete model's.
    pub fn sampling_time(&self) -> Result<f64> {
        match (&self.model, self.ts) {
            (ModelSpec::Discrete(d), Some(ts)) if (d.ts - ts).abs() > 1e-12 * ts.abs().max(1.0) => Err(
                Error::InvalidProblem(format!("Ts = {ts} disagrees with the model's Ts = {}", d.ts)),
            ),
            (_, Some(ts)) => Ok(ts),
            (ModelSpec::Discrete(d), None) => Ok(d.ts),
            (ModelSpec::Continuous(_), None) => {
                Err(Error::InvalidProblem("a continuous model needs Ts".into()))
            }
        }
    }

    pub fn continuous_model(&self) -> Option<&ContinuousLtiModel> {
        match &self.model {
            ModelSpec::Continuous(c) => Some(c),
            ModelSpec::Discrete(_) => None,
        }
    }

    /// The model at the base sampling time.
    pub fn discrete_model(&self) -> Result<DiscreteLtiModel> {
        let ts = self.sampling_time()?;
        match &self.model {
            ModelSpec::Discrete(d) => {
                d.validate()?;
                Ok(d.clone())
            }
            ModelSpec::Continuous(c) => self.discretize(c, ts),
        }
    }

    /// The continuous model sampled at `ts` with the problem's method.
    pub fn discretize_at(&self, ts: f64) -> Result<DiscreteLtiModel> {
        let c = self
            .continuous_model()
            .ok_or_else(|| Error::InvalidProblem("resampling needs a continuous model".into()))?;
        self.discretize(c, ts)
    }

    fn discretize(&self, c: &ContinuousLtiModel, ts: f64) -> Result<DiscreteLtiModel> {
        match self.method {
            DiscretizationMethod::Exact => c.exact_discretize(ts),
            DiscretizationMethod::ForwardEuler => c.euler_discretize(ts),
            DiscretizationMethod::Literal => Err(Error::InvalidProblem(
                "method \"literal\" applies to discrete models only".into(),
            )),
        }
    }

    pub fn x_set(&self) -> Result<Polytope> {
        self.x.to_polytope()
    }

    pub fn u_set(&self) -> Result<Polytope> {
        self.u.to_polytope()
    }

    pub fn invariant_options(&self) -> InvariantOptions {
        InvariantOptions {
            tolerance: self.options.tolerance,
            max_iterations: self.options.max_iterations,
        }
    }

    /// Schedule of period `hold`, or `None` without a disturbance. An explicit
    /// schedule of period `P >= hold` contributes its first `hold` sets, since
    /// `W[j]` bounds the error `j + 1` samples after a measurement whatever the
    /// hold count.
    pub fn schedule(&self, hold: usize) -> Result<Option<DisturbanceSchedule>> {
        let n = self.x_set()?.dim();
        let w = match &self.disturbance {
            None => return Ok(None),
            Some(DisturbanceSpec::Builtin(BuiltinDisturbance::GrowingBox)) => {
                box_schedule(|j| vec![GROWING_BOX_RADIUS * (j + 1) as f64; n], hold)?
            }
            Some(DisturbanceSpec::Builtin(BuiltinDisturbance::SineTaylor)) => {
                sine_example_schedule(self.sampling_time()?, hold)?
            }
            Some(DisturbanceSpec::LinearBox { linear_box }) => {
                box_schedule(|j| linear_box.iter().map(|r| r * (j + 1) as f64).collect(), hold)?
            }
            Some(DisturbanceSpec::Schedule(s)) => s.prefix(hold)?,
        };
        Ok(Some(w))
    }
}
