//! Shared fixtures for the benchmarks.

use mstep_core::{ContinuousLtiModel, DiscreteLtiModel, Polytope};
use nalgebra::dmatrix;

/// Double integrator sampled at `ts`.
pub fn double_integrator(ts: f64) -> DiscreteLtiModel {
    ContinuousLtiModel::new(dmatrix![0.0, 1.0; 0.0, 0.0], dmatrix![0.0; 1.0])
        .and_then(|m| m.exact_discretize(ts))
        .expect("double integrator discretizes")
}

pub fn state_box() -> Polytope {
    Polytope::symmetric_box(&[10.0, 10.0]).expect("valid box")
}

pub fn input_box() -> Polytope {
    Polytope::symmetric_box(&[10.0]).expect("valid box")
}

/// A polygon with `n` tangent faces plus `n` shifted copies that are redundant.
pub fn cluttered_polygon(n: usize) -> Polytope {
    let mut rows = Vec::with_capacity(2 * n);
    let mut rhs = Vec::with_capacity(2 * n);
    for i in 0..n {
        let t = std::f64::consts::TAU * i as f64 / n as f64;
        rows.push(vec![t.cos(), t.sin()]);
        rhs.push(1.0);
        rows.push(vec![t.cos(), t.sin()]);
        rhs.push(1.0 + 0.5 * (i % 7) as f64 / 7.0 + 1e-3);
    }
    Polytope::from_rows(2, &rows, &rhs).expect("valid polygon")
}
