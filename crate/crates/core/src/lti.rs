//! Continuous and discrete linear time-invariant models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ẋ = Ac x + Bc u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousLtiModel {
    #[serde(rename = "Ac", with = "crate::json::matrix")]
    pub a: DMatrix<f64>,
    #[serde(rename = "Bc", with = "crate::json::matrix")]
    pub b: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscretizationMethod {
    Exact,
    ForwardEuler,
    /// Matrices supplied directly.
    Literal,
}

/// `x[k+1] = A x[k] + B u[k]` with sampling time `ts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLtiModel {
    #[serde(rename = "A", with = "crate::json::matrix")]
    pub a: DMatrix<f64>,
    #[serde(rename = "B", with = "crate::json::matrix")]
    pub b: DMatrix<f64>,
    #[serde(rename = "Ts")]
    pub ts: f64,
    #[serde(default = "literal")]
    pub method: DiscretizationMethod,
}

fn literal() -> DiscretizationMethod {
    DiscretizationMethod::Literal
}

fn check_pair(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidModel(format!(
            "state matrix is {}x{}, not square",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != a.nrows() {
        return Err(Error::InvalidModel(format!(
            "input matrix has {} rows, state dimension is {}",
            b.nrows(),
            a.nrows()
        )));
    }
    if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(Error::InvalidModel("non-finite matrix entry".into()));
    }
    Ok(())
}

impl ContinuousLtiModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        check_pair(&a, &b)?;
        Ok(Self { a, b })
    }

    pub fn validate(&self) -> Result<()> {
        check_pair(&self.a, &self.b)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Zero-order-hold sampled model: `A = exp(Ac Ts)`, `B = ∫₀^Ts exp(Ac s) ds Bc`,
    /// both read off the exponential of `[[Ac, Bc], [0, 0]] Ts`.
    pub fn exact_discretize(&self, ts: f64) -> Result<DiscreteLtiModel> {
        self.validate()?;
        if !(ts > 0.0 && ts.is_finite()) {
            return Err(Error::InvalidModel(format!("sampling time must be positive, got {ts}")));
        }
        let (n, m) = (self.state_dim(), self.input_dim());
        let mut aug = DMatrix::zeros(n + m, n + m);
        aug.view_mut((0, 0), (n, n)).copy_from(&(&self.a * ts));
        aug.view_mut((0, n), (n, m)).copy_from(&(&self.b * ts));
        let e = aug.exp();
        Ok(DiscreteLtiModel {
            a: e.view((0, 0), (n, n)).into_owned(),
            b: e.view((0, n), (n, m)).into_owned(),
            ts,
            method: DiscretizationMethod::Exact,
        })
    }

    /// `A = I + Ac Ts`, `B = Bc Ts`. `Ts = 0` is accepted and gives `(I, 0)`.
    pub fn euler_discretize(&self, ts: f64) -> Result<DiscreteLtiModel> {
        self.validate()?;
        if !(ts >= 0.0 && ts.is_finite()) {
            return Err(Error::InvalidModel(format!("sampling time must be nonnegative, got {ts}")));
        }
        let n = self.state_dim();
        Ok(DiscreteLtiModel {
            a: DMatrix::identity(n, n) + &self.a * ts,
            b: &self.b * ts,
            ts,
            method: DiscretizationMethod::ForwardEuler,
        })
    }

    /// Dense zero-order-hold trajectory: every hold interval of length `ts` is
    /// cut into `substeps` exact sub-steps. Returns `(t, x)` pairs starting at `t = 0`.
    pub fn intersample_trajectory(
        &self,
        x0: &DVector<f64>,
        zoh_inputs: &[DVector<f64>],
        ts: f64,
        substeps: usize,
    ) -> Result<Vec<(f64, DVector<f64>)>> {
        if substeps == 0 {
            return Err(Error::InvalidModel("substeps must be at least 1".into()));
        }
        let fine = self.exact_discretize(ts / substeps as f64)?;
        fine.check_state(x0)?;
        let h = ts / substeps as f64;
        let mut out = Vec::with_capacity(zoh_inputs.len() * substeps + 1);
        let mut x = x0.clone();
        out.push((0.0, x.clone()));
        for (k, u) in zoh_inputs.iter().enumerate() {
            fine.check_input(u)?;
            for s in 1..=substeps {
                x = &fine.a * &x + &fine.b * u;
                // Interval end points land exactly on the coarse grid.
                let t = if s == substeps {
                    (k + 1) as f64 * ts
                } else {
                    k as f64 * ts + s as f64 * h
                };
                out.push((t, x.clone()));
            }
        }
        Ok(out)
    }
}

impl DiscreteLtiModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, ts: f64) -> Result<Self> {
        let md = Self {
            a,
            b,
            ts,
            method: DiscretizationMethod::Literal,
        };
        md.validate()?;
        Ok(md)
    }

    pub fn validate(&self) -> Result<()> {
        check_pair(&self.a, &self.b)?;
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "sampling time must be positive, got {}",
                self.ts
            )));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    fn check_state(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn check_input(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: u.len(),
            });
        }
        Ok(())
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    /// `N + 1` states from `x0` under `inputs`, with optional additive disturbances.
    pub fn simulate(
        &self,
        x0: &DVector<f64>,
        inputs: &[DVector<f64>],
        disturbances: Option<&[DVector<f64>]>,
    ) -> Result<Vec<DVector<f64>>> {
        self.check_state(x0)?;
        if let Some(w) = disturbances {
            if w.len() != inputs.len() {
                return Err(Error::DimensionMismatch {
                    expected: inputs.len(),
                    found: w.len(),
                });
            }
            if let Some(bad) = w.iter().find(|w| w.len() != self.state_dim()) {
                return Err(Error::DimensionMismatch {
                    expected: self.state_dim(),
                    found: bad.len(),
                });
            }
        }
        let mut traj = Vec::with_capacity(inputs.len() + 1);
        let mut x = x0.clone();
        traj.push(x.clone());
        for (k, u) in inputs.iter().enumerate() {
            self.check_input(u)?;
            x = self.step(&x, u);
            if let Some(w) = disturbances {
                x += &w[k];
            }
            traj.push(x.clone());
        }
        Ok(traj)
    }

    /// Model seen at every `hold`-th sample when the input is held for `hold` steps:
    /// `(A^M, Σ_{k<M} A^k B)` with sampling time `M Ts`. For an exact discretization
    /// this coincides with exact discretization at `M Ts`.
    pub fn held(&self, hold: usize) -> Result<DiscreteLtiModel> {
        if hold == 0 {
            return Err(Error::InvalidModel("hold count must be at least 1".into()));
        }
        let mut a = self.a.clone();
        let mut g = self.b.clone();
        for _ in 1..hold {
            g = &self.a * &g + &self.b;
            a = &self.a * &a;
        }
        Ok(DiscreteLtiModel {
            a,
            b: g,
            ts: self.ts * hold as f64,
            method: match self.method {
                DiscretizationMethod::Exact => DiscretizationMethod::Exact,
                _ => DiscretizationMethod::Literal,
            },
        })
    }
}

/// Repeats every input `hold` times (M-step hold realization).
pub fn upsample_inputs(inputs: &[DVector<f64>], hold: usize) -> Vec<DVector<f64>> {
    inputs
        .iter()
        .flat_map(|u| std::iter::repeat_n(u.clone(), hold))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn double_integrator() -> ContinuousLtiModel {
        ContinuousLtiModel::new(dmatrix![0.0, 1.0; 0.0, 0.0], dmatrix![0.0; 1.0]).unwrap()
    }

    #[test]
    fn exact_double_integrator_half_second() {
        let md = double_integrator().exact_discretize(0.5).unwrap();
        assert!((md.a.clone() - dmatrix![1.0, 0.5; 0.0, 1.0]).amax() <= 1e-12);
        assert!((md.b.clone() - dmatrix![0.125; 0.5]).amax() <= 1e-12);
        assert_eq!(md.method, DiscretizationMethod::Exact);
    }

    #[test]
    fn exact_double_integrator_one_and_half() {
        let md = double_integrator().exact_discretize(1.5).unwrap();
        assert!((md.a.clone() - dmatrix![1.0, 1.5; 0.0, 1.0]).amax() <= 1e-12);
        assert!((md.b.clone() - dmatrix![1.125; 1.5]).amax() <= 1e-12);
    }

    #[test]
    fn exact_scalar_unstable_mode() {
        let mc = ContinuousLtiModel::new(dmatrix![1.0], dmatrix![1.0]).unwrap();
        for &ts in &[0.1, 0.5, 2.0] {
            let md = mc.exact_discretize(ts).unwrap();
            assert!((md.a[(0, 0)] - ts.exp()).abs() < 1e-13 * ts.exp());
            assert!((md.b[(0, 0)] - ts.exp_m1()).abs() < 1e-13 * ts.exp());
        }
    }

    #[test]
    fn exact_oscillator_is_a_rotation() {
        let w = 2.0;
        let mc = ContinuousLtiModel::new(dmatrix![0.0, -w; w, 0.0], dmatrix![1.0; 0.0]).unwrap();
        let md = mc.exact_discretize(0.75).unwrap();
        let t = w * 0.75;
        assert!((md.a - dmatrix![t.cos(), -t.sin(); t.sin(), t.cos()]).amax() < 1e-13);
        // B = ∫ R(s) e1 ds = [sin t, 1 - cos t] / w
        assert!((md.b - dmatrix![t.sin() / w; (1.0 - t.cos()) / w]).amax() < 1e-13);
    }

    #[test]
    fn exact_rejects_nonpositive_ts() {
        assert!(double_integrator().exact_discretize(0.0).is_err());
        assert!(double_integrator().exact_discretize(-1.0).is_err());
    }

    #[test]
    fn euler_formulas() {
        let md = double_integrator().euler_discretize(0.5).unwrap();
        assert_eq!(md.a, dmatrix![1.0, 0.5; 0.0, 1.0]);
        assert_eq!(md.b, dmatrix![0.0; 0.5]);
        let md = double_integrator().euler_discretize(0.0).unwrap();
        assert_eq!(md.a, DMatrix::identity(2, 2));
        assert_eq!(md.b, dmatrix![0.0; 0.0]);
        let mc = ContinuousLtiModel::new(dmatrix![1.0], dmatrix![1.0]).unwrap();
        let md = mc.euler_discretize(0.1).unwrap();
        assert!((md.a[(0, 0)] - 1.1).abs() < 1e-15 && (md.b[(0, 0)] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn invalid_models() {
        assert!(ContinuousLtiModel::new(dmatrix![1.0, 2.0], dmatrix![1.0]).is_err());
        assert!(ContinuousLtiModel::new(dmatrix![1.0], dmatrix![1.0; 2.0]).is_err());
        assert!(DiscreteLtiModel::new(dmatrix![1.0], dmatrix![1.0], 0.0).is_err());
    }

    #[test]
    fn simulate_zero() {
        let md = double_integrator().exact_discretize(0.5).unwrap();
        let u = vec![dvector![0.0]; 4];
        let traj = md.simulate(&dvector![0.0, 0.0], &u, None).unwrap();
        assert_eq!(traj.len(), 5);
        assert!(traj.iter().all(|x| x.amax() == 0.0));
    }

    #[test]
    fn zero_velocity_holds_position() {
        let md = double_integrator().exact_discretize(1.5).unwrap();
        let traj = md.simulate(&dvector![3.0, 0.0], &vec![dvector![0.0]; 5], None).unwrap();
        assert!(traj.iter().all(|x| x[0] == 3.0 && x[1] == 0.0));
    }

    #[test]
    fn fine_steps_compose_to_coarse_step() {
        let mc = double_integrator();
        let fine = mc.exact_discretize(0.5).unwrap();
        let coarse = mc.exact_discretize(1.5).unwrap();
        let x0 = dvector![1.0, -2.0];
        let u = dvector![0.7];
        let fine_traj = fine.simulate(&x0, &vec![u.clone(); 3], None).unwrap();
        let coarse_traj = coarse.simulate(&x0, &[u], None).unwrap();
        assert!((&fine_traj[3] - &coarse_traj[1]).amax() < 1e-12);
    }

    #[test]
    fn simulate_dimension_errors() {
        let md = double_integrator().exact_discretize(0.5).unwrap();
        assert!(md.simulate(&dvector![0.0], &[], None).is_err());
        assert!(md.simulate(&dvector![0.0, 0.0], &[dvector![1.0, 2.0]], None).is_err());
        let w = vec![dvector![0.0, 0.0]];
        assert!(md.simulate(&dvector![0.0, 0.0], &[], Some(&w)).is_err());
    }

    #[test]
    fn disturbances_add() {
        let md = DiscreteLtiModel::new(dmatrix![1.0], dmatrix![1.0], 1.0).unwrap();
        let w = vec![dvector![0.5], dvector![-0.25]];
        let traj = md.simulate(&dvector![0.0], &[dvector![1.0], dvector![1.0]], Some(&w)).unwrap();
        assert_eq!(traj[2][0], 2.25);
    }

    #[test]
    fn upsampling() {
        let (u0, u1) = (dvector![1.0], dvector![2.0]);
        let up = upsample_inputs(&[u0.clone(), u1.clone()], 3);
        assert_eq!(up, vec![u0.clone(), u0.clone(), u0, u1.clone(), u1.clone(), u1]);
        let one = upsample_inputs(&[dvector![4.0]], 1);
        assert_eq!(one, vec![dvector![4.0]]);
        assert!(upsample_inputs(&[], 5).is_empty());
    }

    #[test]
    fn intersample_closed_forms() {
        let mc = double_integrator();
        let v = 2.0;
        let traj = mc
            .intersample_trajectory(&dvector![0.0, v], &[dvector![0.0], dvector![0.0]], 0.5, 50)
            .unwrap();
        assert_eq!(traj.len(), 101);
        for (t, x) in &traj {
            assert!((x[0] - v * t).abs() < 1e-12);
        }
        let u = 1.5;
        let traj = mc
            .intersample_trajectory(&dvector![0.0, 0.0], &[dvector![u]], 0.5, 50)
            .unwrap();
        for (t, x) in &traj {
            assert!((x[1] - u * t).abs() < 1e-12);
        }
    }

    #[test]
    fn intersample_endpoints_hit_coarse_samples() {
        let mc = double_integrator();
        let md = mc.exact_discretize(0.5).unwrap();
        let inputs = vec![dvector![1.0], dvector![-3.0], dvector![2.5]];
        let x0 = dvector![-1.0, 0.5];
        let coarse = md.simulate(&x0, &inputs, None).unwrap();
        let dense = mc.intersample_trajectory(&x0, &inputs, 0.5, 50).unwrap();
        for (k, xk) in coarse.iter().enumerate() {
            assert!((&dense[k * 50].1 - xk).amax() < 1e-12);
        }
    }

    #[test]
    fn hold_composition_matches_coarse_discretization() {
        let mc = double_integrator();
        let held = mc.exact_discretize(0.5).unwrap().held(3).unwrap();
        let coarse = mc.exact_discretize(1.5).unwrap();
        assert!((held.a - coarse.a).amax() < 1e-12);
        assert!((held.b - coarse.b).amax() < 1e-12);
        assert!((held.ts - 1.5).abs() < 1e-15);
    }

    #[test]
    fn json_shapes() {
        let mc: ContinuousLtiModel = serde_json::from_str(r#"{"Ac": [[0,1],[0,0]], "Bc": [[0],[1]]}"#).unwrap();
        assert_eq!(mc, double_integrator());
        let md = mc.exact_discretize(0.5).unwrap();
        let s = crate::json::to_string(&md).unwrap();
        assert!(s.contains("\"method\":\"exact\""));
        let back: DiscreteLtiModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, md);
    }
}
