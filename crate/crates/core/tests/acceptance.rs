//! End-to-end acceptance suite. Runs without the libtest harness so that the
//! per-criterion PASS/FAIL lines always reach the output; exits nonzero when
//! any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mstep_core::invariance::{compute_cinf, compute_rcinf, InvariantOptions, InvariantSetResult};
use mstep_core::properties::CERTIFICATE_SLACK;
use mstep_core::verify::{
    check_maximality, find_counterexample_with_sets, grid_oracle_cinf, sine_truth_check,
    suggested_input_samples, validate_invariance, CounterexampleOptions, CounterexampleProblem,
};
use mstep_core::{ContinuousLtiModel, DiscreteLtiModel, Polytope, ProblemSpec};
use nalgebra::{dmatrix, DMatrix, DVector};

const SET_TOL: f64 = 1e-8;
const MATRIX_TOL: f64 = 1e-12;
const GRID_RESOLUTION: f64 = 0.05;
const CERT_SAMPLES: usize = 200;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn fixture(name: &str) -> ProblemSpec {
    let path = format!("{}/../../fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    ProblemSpec::from_json(&text).unwrap_or_else(|e| panic!("{path}: {e}"))
}

fn double_integrator() -> ContinuousLtiModel {
    ContinuousLtiModel::new(dmatrix![0.0, 1.0; 0.0, 0.0], dmatrix![0.0; 1.0]).unwrap()
}

fn state_box() -> Polytope {
    Polytope::symmetric_box(&[10.0, 10.0]).unwrap()
}

fn input_box() -> Polytope {
    Polytope::symmetric_box(&[10.0]).unwrap()
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Closed-form sampling of the double integrator: `A = [[1, T], [0, 1]]`,
/// `B = [T²/2; T]`.
fn closed_form(ts: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    (dmatrix![1.0, ts; 0.0, 1.0], dmatrix![ts * ts / 2.0; ts])
}

fn criterion_1() -> Outcome {
    let c = double_integrator();
    let mut worst: f64 = 0.0;
    for ts in [0.5, 1.5] {
        let md = c.exact_discretize(ts).unwrap();
        let (a, b) = closed_form(ts);
        worst = worst.max(max_abs_diff(&md.a, &a)).max(max_abs_diff(&md.b, &b));
    }
    let published = [
        (0.5, dmatrix![1.0, 0.5; 0.0, 1.0], dmatrix![0.125; 0.5]),
        (1.5, dmatrix![1.0, 1.5; 0.0, 1.0], dmatrix![1.125; 1.5]),
    ];
    for (ts, a, b) in published {
        let md = c.exact_discretize(ts).unwrap();
        worst = worst.max(max_abs_diff(&md.a, &a)).max(max_abs_diff(&md.b, &b));
    }
    outcome(worst <= MATRIX_TOL, format!("max abs error {worst:.2e}"))
}

fn criterion_2() -> Outcome {
    let c = double_integrator();
    let (x, u) = (state_box(), input_box());
    let opts = InvariantOptions::default();
    let fine = compute_cinf(&x, &u, &c.exact_discretize(0.5).unwrap(), 1, &opts).unwrap();
    let coarse = compute_cinf(&x, &u, &c.exact_discretize(1.5).unwrap(), 1, &opts).unwrap();
    if !(fine.converged && coarse.converged) {
        return outcome(false, "invariant set iteration did not converge");
    }
    let fine_in_coarse = coarse.final_set.contains(&fine.final_set, SET_TOL).unwrap();
    let coarse_in_fine = fine.final_set.contains(&coarse.final_set, SET_TOL).unwrap();

    let problem = CounterexampleProblem {
        model: c.clone(),
        x_set: x.clone(),
        u_set: u,
        ts: 0.5,
        hold: 3,
        horizon: 10,
    };
    let copts = CounterexampleOptions::default();
    let report = match find_counterexample_with_sets(&problem, &copts, &fine.final_set, &coarse.final_set) {
        Ok(Some(r)) => r,
        Ok(None) => return outcome(false, "no counterexample found"),
        Err(e) => return outcome(false, format!("counterexample search failed: {e}")),
    };
    // Membership of the witness, checked directly against both sets.
    let in_coarse = -coarse.final_set.max_violation(&report.x0);
    let out_fine = fine.final_set.max_violation(&report.x0);
    let depth = in_coarse.min(out_fine);
    let fine_margin = report.fine_violation.as_ref().map_or(0.0, |v| v.worst_margin);
    let cont_margin = report.continuous_violation.as_ref().map_or(0.0, |v| v.worst_margin);
    let (fine_replay, cont_replay) = report.replay(&c, &x, copts.substeps).unwrap();
    let replay_err = fine_replay
        .iter()
        .zip(&report.fine_margins)
        .chain(cont_replay.iter().zip(&report.continuous_margins))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let passed = fine_in_coarse
        && !coarse_in_fine
        && depth >= 0.1
        && fine_margin > 0.01
        && cont_margin > 0.01
        && replay_err <= 1e-9;
    outcome(
        passed,
        format!(
            "fine ⊆ coarse: {fine_in_coarse}, coarse ⊆ fine: {coarse_in_fine}, witness depth {depth:.3}, \
             violation margins {fine_margin:.3} (sampled) / {cont_margin:.3} (continuous)"
        ),
    )
}

/// `Pre(S) = {x : ∃u ∈ U, A x + B u ∈ S}` from the stacked `(x, u)` system,
/// iterated without the hold machinery.
fn traditional_cinf(x: &Polytope, u: &Polytope, md: &DiscreteLtiModel) -> Option<Polytope> {
    let mut omega = x.clone();
    for _ in 0..200 {
        let (h, hv) = (omega.a(), omega.b());
        let (hu, huv) = (u.a(), u.b());
        let (n, m) = (md.state_dim(), md.input_dim());
        let rows = h.nrows() + hu.nrows();
        let mut stacked = DMatrix::zeros(rows, n + m);
        stacked.view_mut((0, 0), (h.nrows(), n)).copy_from(&(h * &md.a));
        stacked.view_mut((0, n), (h.nrows(), m)).copy_from(&(h * &md.b));
        stacked.view_mut((h.nrows(), n), (hu.nrows(), m)).copy_from(hu);
        let rhs = DVector::from_iterator(rows, hv.iter().chain(huv.iter()).copied());
        let pre = Polytope::new(stacked, rhs).ok()?.project_out_last(m).ok()?;
        let next = pre.intersect(&omega).ok()?.remove_redundant();
        if next.set_equal(&omega, SET_TOL).ok()? {
            return Some(next);
        }
        omega = next;
    }
    None
}

fn criterion_3(nominal: &[InvariantSetResult]) -> Outcome {
    let md = double_integrator().exact_discretize(0.5).unwrap();
    let mut notes = Vec::new();
    let mut passed = true;
    for r in nominal {
        if !r.converged || r.iterations >= 200 {
            passed = false;
            notes.push(format!("M={} not converged", r.hold));
        }
    }
    for pair in nominal.windows(2) {
        if !pair[0].final_set.contains(&pair[1].final_set, SET_TOL).unwrap() {
            passed = false;
            notes.push(format!("C^{} ⊄ C^{}", pair[1].hold, pair[0].hold));
        }
    }
    match traditional_cinf(&state_box(), &input_box(), &md) {
        Some(t) if t.set_equal(&nominal[0].final_set, SET_TOL).unwrap() => {}
        Some(_) => {
            passed = false;
            notes.push("C^1 differs from the one-step precursor fixed point".into());
        }
        None => {
            passed = false;
            notes.push("one-step precursor iteration did not converge".into());
        }
    }
    let iters: Vec<String> = nominal.iter().map(|r| r.iterations.to_string()).collect();
    let detail = if notes.is_empty() {
        format!("M=1..8 nested, iterations {}", iters.join(","))
    } else {
        notes.join("; ")
    };
    outcome(passed, detail)
}

fn criterion_4(nominal: &[InvariantSetResult]) -> Outcome {
    let md = double_integrator().exact_discretize(0.5).unwrap();
    let (x, u) = (state_box(), input_box());
    let mut oracles = Vec::new();
    let mut notes = Vec::new();
    let mut passed = true;
    for hold in [1, 3, 8] {
        let samples = suggested_input_samples(&u, &md, hold, GRID_RESOLUTION).unwrap();
        let oracle = grid_oracle_cinf(&x, &u, &md, hold, GRID_RESOLUTION, samples).unwrap();
        let set = &nominal[hold - 1].final_set;
        let cmp = oracle.compare(set).unwrap();
        passed &= cmp.agrees();
        notes.push(format!(
            "M={hold}: {}/{} interior cells outside, {}/{} deep points unmarked",
            cmp.interior_outside, cmp.interior_cells, cmp.deep_unmarked, cmp.deep_samples
        ));
        oracles.push(oracle);
    }
    let nested = oracles[2].is_subset_of(&oracles[0]);
    passed &= nested;
    notes.push(format!("oracle M=8 ⊆ M=1: {nested}"));
    outcome(passed, notes.join("; "))
}

fn criterion_5(robust: &[InvariantSetResult], nominal: &[InvariantSetResult]) -> Outcome {
    let mut notes = Vec::new();
    let mut passed = true;
    for r in robust {
        if !r.converged {
            passed = false;
            notes.push(format!("M={} not converged after {} iterations", r.hold, r.iterations));
        } else if r.is_empty() {
            passed = false;
            notes.push(format!("M={} empty", r.hold));
        }
        let c = &nominal[r.hold - 1];
        if !c.final_set.contains(&r.final_set, SET_TOL).unwrap() {
            passed = false;
            notes.push(format!("RC^{0} ⊄ C^{0}", r.hold));
        }
    }
    for pair in robust.windows(2) {
        if !pair[0].final_set.contains(&pair[1].final_set, SET_TOL).unwrap() {
            passed = false;
            notes.push(format!("RC^{} ⊄ RC^{}", pair[1].hold, pair[0].hold));
        }
    }
    if passed {
        let iters: Vec<String> = robust.iter().map(|r| r.iterations.to_string()).collect();
        notes.push(format!("M=1,4,6,8 nested inside C^M, iterations {}", iters.join(",")));
    }
    outcome(passed, notes.join("; "))
}

fn criterion_6() -> Outcome {
    let p = fixture("fig5");
    let md = p.discrete_model().unwrap();
    let (x, u) = (p.x_set().unwrap(), p.u_set().unwrap());
    let mut notes = Vec::new();
    let mut passed = true;
    let mut previous: Option<Polytope> = None;
    for &m in &p.m_list {
        let w = p.schedule(m).unwrap().unwrap();
        let r = compute_rcinf(&x, &u, &md, &w, &p.invariant_options()).unwrap();
        if !r.converged || r.is_empty() {
            passed = false;
            notes.push(format!("M={m} converged={} empty={}", r.converged, r.is_empty()));
            continue;
        }
        let set = &r.final_set;
        passed &= x.contains(set, SET_TOL).unwrap();
        if let Some(prev) = &previous {
            passed &= prev.contains(set, SET_TOL).unwrap();
        }
        let truth = sine_truth_check(0.1, m, set, Some(&w), 100, p.options.seed).unwrap();
        passed &= truth.constraint_violations == 0 && truth.set_exits == 0;
        let (lo, hi) = set.interval().unwrap();
        notes.push(format!(
            "M={m}: [{lo:.4}, {hi:.4}], {} violations, {} exits",
            truth.constraint_violations, truth.set_exits
        ));
        previous = Some(r.final_set);
    }
    outcome(passed, notes.join("; "))
}

fn criterion_7(nominal: &[InvariantSetResult], robust: &[InvariantSetResult], fig4: &ProblemSpec) -> Outcome {
    let md = double_integrator().exact_discretize(0.5).unwrap();
    let (x, u) = (state_box(), input_box());
    let cert_tol = SET_TOL + CERTIFICATE_SLACK;
    let mut passed = true;
    let mut sets = 0;
    let mut notes = Vec::new();
    let runs = nominal
        .iter()
        .map(|r| (r, None))
        .chain(robust.iter().map(|r| (r, Some(fig4.schedule(r.hold).unwrap().unwrap()))));
    for (r, w) in runs {
        if !r.converged || r.is_empty() {
            continue;
        }
        sets += 1;
        let label = if w.is_some() { "RC" } else { "C" };
        let inv = validate_invariance(&r.final_set, &u, &md, r.hold, w.as_ref(), CERT_SAMPLES, cert_tol, 7).unwrap();
        let max = check_maximality(&r.final_set, &x, &u, &md, r.hold, w.as_ref(), CERT_SAMPLES, SET_TOL, 7).unwrap();
        if !inv.passed() {
            passed = false;
            notes.push(format!("{label}^{}: {} certificate failures", r.hold, inv.failures.len()));
        }
        if !max.passed() || max.samples != CERT_SAMPLES {
            passed = false;
            notes.push(format!(
                "{label}^{}: {} of {} exterior samples feasible",
                r.hold,
                max.feasible.len(),
                max.samples
            ));
        }
    }
    if passed {
        notes.push(format!("{sets} sets, all certificates and exterior rejections hold"));
    }
    outcome(passed, notes.join("; "))
}

fn criterion_8() -> Outcome {
    let c = double_integrator();
    let (x, u) = (state_box(), input_box());
    let opts = InvariantOptions::default();
    let held = compute_cinf(&x, &u, &c.exact_discretize(0.5).unwrap(), 3, &opts).unwrap();
    let coarse = compute_cinf(&x, &u, &c.exact_discretize(1.5).unwrap(), 1, &opts).unwrap();
    let inside = coarse.final_set.contains(&held.final_set, SET_TOL).unwrap();
    outcome(
        held.converged && coarse.converged && inside,
        format!("C^3 at 0.5 ⊆ C^1 at 1.5: {inside}"),
    )
}

struct Criterion {
    id: usize,
    budget: Duration,
}

fn report(results: &mut Vec<bool>, c: Criterion, elapsed: Duration, o: Outcome) {
    let in_time = elapsed < c.budget;
    let ok = o.passed && in_time;
    println!(
        "{} criterion {}: {} [{:.2}s of {:.1}s]",
        if ok { "PASS" } else { "FAIL" },
        c.id,
        o.detail,
        elapsed.as_secs_f64(),
        c.budget.as_secs_f64()
    );
    results.push(ok);
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn main() -> ExitCode {
    let secs = Duration::from_secs_f64;
    let mut results = Vec::new();

    let (o, t) = timed(criterion_1);
    report(&mut results, Criterion { id: 1, budget: secs(0.1) }, t, o);

    let (o, t) = timed(criterion_2);
    report(&mut results, Criterion { id: 2, budget: secs(10.0) }, t, o);

    let md = double_integrator().exact_discretize(0.5).unwrap();
    let (x, u) = (state_box(), input_box());
    let ((nominal, o), t) = timed(|| {
        let nominal: Vec<InvariantSetResult> = (1..=8)
            .map(|m| compute_cinf(&x, &u, &md, m, &InvariantOptions::default()).unwrap())
            .collect();
        let o = criterion_3(&nominal);
        (nominal, o)
    });
    report(&mut results, Criterion { id: 3, budget: secs(60.0) }, t, o);

    let (o, t) = timed(|| criterion_4(&nominal));
    report(&mut results, Criterion { id: 4, budget: secs(120.0) }, t, o);

    let fig4 = fixture("fig4");
    let ((robust, o), t) = timed(|| {
        let robust: Vec<InvariantSetResult> = fig4
            .m_list
            .iter()
            .map(|&m| {
                let w = fig4.schedule(m).unwrap().unwrap();
                compute_rcinf(&x, &u, &md, &w, &fig4.invariant_options()).unwrap()
            })
            .collect();
        let o = criterion_5(&robust, &nominal);
        (robust, o)
    });
    report(&mut results, Criterion { id: 5, budget: secs(60.0) }, t, o);

    let (o, t) = timed(criterion_6);
    report(&mut results, Criterion { id: 6, budget: secs(30.0) }, t, o);

    let (o, t) = timed(|| criterion_7(&nominal, &robust, &fig4));
    report(&mut results, Criterion { id: 7, budget: secs(60.0) }, t, o);

    let (o, t) = timed(criterion_8);
    report(&mut results, Criterion { id: 8, budget: secs(10.0) }, t, o);

    let passed = results.iter().filter(|r| **r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
