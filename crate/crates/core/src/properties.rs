//! Property suite over a problem file: nesting chains across hold counts,
//! fixed-point membership, maximality and the coarse-model bound.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::invariance::{compute_cinf, compute_rcinf, InvariantSetResult};
use crate::lti::DiscretizationMethod;
use crate::problem::ProblemSpec;
use crate::verify::{check_maximality, validate_invariance};

/// Interior and exterior samples per certificate check.
pub const CHECK_SAMPLES: usize = 200;

/// Slack added to the termination tolerance for membership certificates,
/// covering the LP feasibility tolerance.
pub const CERTIFICATE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub rows: Vec<CheckRow>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.status != Status::Fail)
    }

    fn push(&mut self, name: impl Into<String>, status: Status, note: impl Into<String>) {
        self.rows.push(CheckRow {
            name: name.into(),
            status,
            note: note.into(),
        });
    }

    fn verdict(&mut self, name: impl Into<String>, ok: bool, note: impl Into<String>) {
        self.push(name, if ok { Status::Pass } else { Status::Fail }, note);
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.name.chars().count()).max().unwrap_or(0);
        for r in &self.rows {
            if r.note.is_empty() {
                writeln!(f, "{}  {}", r.status, r.name)?;
            } else {
                writeln!(f, "{}  {:<width$}  {}", r.status, r.name, r.note)?;
            }
        }
        Ok(())
    }
}

/// Results for every hold count of a problem, nominal and (with a
/// disturbance) robust.
#[derive(Debug, Clone)]
pub struct ProblemSets {
    pub nominal: BTreeMap<usize, InvariantSetResult>,
    pub robust: BTreeMap<usize, InvariantSetResult>,
}

pub fn compute_problem_sets(problem: &ProblemSpec) -> Result<ProblemSets> {
    let md = problem.discrete_model()?;
    let (x, u) = (problem.x_set()?, problem.u_set()?);
    let opts = problem.invariant_options();
    let mut sets = ProblemSets {
        nominal: BTreeMap::new(),
        robust: BTreeMap::new(),
    };
    for &m in &problem.m_list {
        sets.nominal.insert(m, compute_cinf(&x, &u, &md, m, &opts)?);
        if let Some(w) = problem.schedule(m)? {
            sets.robust.insert(m, compute_rcinf(&x, &u, &md, &w, &opts)?);
        }
    }
    Ok(sets)
}

fn label(robust: bool, m: usize) -> String {
    if robust {
        format!("RC^{m}")
    } else {
        format!("C^{m}")
    }
}

fn not_converged(r: &InvariantSetResult) -> String {
    format!("not converged after {} iterations", r.iterations)
}

/// Runs every property on `problem` and returns one row per check.
pub fn run_checks(problem: &ProblemSpec) -> Result<CheckReport> {
    let sets = compute_problem_sets(problem)?;
    run_checks_on(problem, &sets)
}

pub fn run_checks_on(problem: &ProblemSpec, sets: &ProblemSets) -> Result<CheckReport> {
    let md = problem.discrete_model()?;
    let (x, u) = (problem.x_set()?, problem.u_set()?);
    let tol = problem.options.tolerance;
    let seed = problem.options.seed;
    let mut report = CheckReport { rows: Vec::new() };

    for (robust, family) in [(false, &sets.nominal), (true, &sets.robust)] {
        for (&m, r) in family {
            let name = format!("{} converged", label(robust, m));
            if r.converged {
                let mut note = format!("{} iterations", r.iterations);
                if r.is_empty() {
                    note.push_str(", empty set");
                }
                report.verdict(name, true, note);
            } else {
                report.verdict(name, false, not_converged(r));
            }
        }
        let ordered: Vec<(&usize, &InvariantSetResult)> = family.iter().collect();
        for pair in ordered.windows(2) {
            let ((&m1, r1), (&m2, r2)) = (pair[0], pair[1]);
            let name = format!("{} ⊆ {}", label(robust, m2), label(robust, m1));
            if !(r1.converged && r2.converged) {
                report.push(name, Status::Skip, "not converged");
            } else if r2.is_empty() {
                report.verdict(name, true, "empty set");
            } else {
                report.verdict(name, r1.final_set.contains(&r2.final_set, tol)?, "");
            }
        }
    }

    for (&m, rr) in &sets.robust {
        let name = format!("RC^{m} ⊆ C^{m}");
        let cr = &sets.nominal[&m];
        if !(rr.converged && cr.converged) {
            report.push(name, Status::Skip, "not converged");
        } else if rr.is_empty() {
            report.verdict(name, true, "empty set");
        } else {
            report.verdict(name, cr.final_set.contains(&rr.final_set, tol)?, "");
        }
    }

    let cert_tol = tol + CERTIFICATE_SLACK;
    for (robust, family) in [(false, &sets.nominal), (true, &sets.robust)] {
        for (&m, r) in family {
            let fixed = format!("{} fixed-point membership", label(robust, m));
            let maximal = format!("{} maximality", label(robust, m));
            if !r.converged {
                report.push(fixed, Status::Skip, "not converged");
                report.push(maximal, Status::Skip, "not converged");
                continue;
            }
            if r.is_empty() {
                report.push(fixed, Status::Pass, "empty set");
                report.push(maximal, Status::Pass, "empty set");
                continue;
            }
            let w = if robust { problem.schedule(m)? } else { None };
            let inv = validate_invariance(&r.final_set, &u, &md, m, w.as_ref(), CHECK_SAMPLES, cert_tol, seed)?;
            report.verdict(
                fixed,
                inv.passed(),
                format!("{} points, worst margin {:.3e}", inv.checked(), inv.worst_margin),
            );
            let max = check_maximality(&r.final_set, &x, &u, &md, m, w.as_ref(), CHECK_SAMPLES, tol, seed)?;
            let note = if max.samples == 0 {
                "no exterior states in X".to_string()
            } else {
                format!("{} exterior samples, best margin {:.3e}", max.samples, max.best_margin)
            };
            report.verdict(maximal, max.passed(), note);
        }
    }

    let exact = problem.continuous_model().is_some() && problem.method == DiscretizationMethod::Exact;
    for (&m, r) in sets.nominal.iter().filter(|(&m, _)| m > 1) {
        let name = format!("C^{m} ⊆ coarse C^1 at {m}·Ts");
        if !exact {
            report.push(name, Status::Skip, "needs an exactly discretized continuous model");
            continue;
        }
        let coarse_md = problem.discretize_at(m as f64 * md.ts)?;
        let coarse = compute_cinf(&x, &u, &coarse_md, 1, &problem.invariant_options())?;
        if !(r.converged && coarse.converged) {
            report.push(name, Status::Skip, "not converged");
        } else if r.is_empty() {
            report.verdict(name, true, "empty set");
        } else {
            report.verdict(name, coarse.final_set.contains(&r.final_set, tol)?, "");
        }
    }
    Ok(report)
}
