//! A minimal sequential scheme: re-center the penalty at each exact
//! relaxation output and raise `η` whenever a round is inexact.
//!
//! The η update (hold on exact rounds, multiply by `eta_growth` otherwise) is
//! a simple placeholder schedule; `η` never decreases.

use bmirelax_conic::SolverSettings;
use nalgebra::DVector;

use crate::cones::ConeKind;
use crate::error::{BmiError, Result};
use crate::pencil::BmiProblem;
use crate::relaxation::{build_relaxation, solve_judged, PenaltyConfig, RelaxStatus, EXACT_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialSettings {
    pub max_rounds: usize,
    /// Initial weight; `max(1, ‖c‖₂)` when absent.
    pub eta0: Option<f64>,
    pub eta_growth: f64,
    /// Relative objective change below which the run stops.
    pub obj_stall_tol: f64,
    pub kind: ConeKind,
    /// Feasibility tolerance relative to the problem scale.
    pub feas_tol: f64,
}

impl Default for SequentialSettings {
    fn default() -> Self {
        Self { max_rounds: 30, eta0: None, eta_growth: 2.0, obj_stall_tol: 1e-6, kind: ConeKind::Sdp, feas_tol: 1e-6 }
    }
}

impl SequentialSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_rounds == 0 {
            return Err(BmiError::Input("max_rounds must be >= 1".into()));
        }
        if !(self.eta_growth > 1.0) {
            return Err(BmiError::Input(format!("eta_growth must exceed 1, got {}", self.eta_growth)));
        }
        if !(self.obj_stall_tol > 0.0) || self.eta0.is_some_and(|e| !(e > 0.0)) {
            return Err(BmiError::Input("stall tolerance and eta0 must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    /// 1-based round number.
    pub round: usize,
    pub eta: f64,
    pub status: RelaxStatus,
    /// `cᵀx̊` of this round (NaN without a solution).
    pub objective: f64,
    pub exactness_gap: f64,
    pub exact: bool,
    pub feasible: bool,
    /// Best `cᵀx` over feasible exact rounds so far.
    pub best_objective: Option<f64>,
    pub x: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Stalled,
    MaxRounds,
    Infeasible,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Stalled => "stalled",
            Termination::MaxRounds => "max_rounds",
            Termination::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequentialTrace {
    pub rounds: Vec<Round>,
    pub termination: Termination,
    /// Best feasible point found and its objective.
    pub best: Option<(DVector<f64>, f64)>,
}

pub fn run(problem: &BmiProblem, x0: &DVector<f64>, settings: &SequentialSettings, solver: &SolverSettings) -> Result<SequentialTrace> {
    settings.validate()?;
    if x0.len() != problem.n() || x0.iter().any(|v| !v.is_finite()) {
        return Err(BmiError::Input(format!("x0 must be a finite vector of length {}", problem.n())));
    }
    let feas_tol = settings.feas_tol * problem.scale();
    let mut eta = settings.eta0.unwrap_or_else(|| problem.c.norm().max(1.0));
    let mut x_check = x0.clone();
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut prev = None;
    if problem.pencil.bmi_max_eigenvalue(x0)? <= feas_tol {
        let obj = problem.c.dot(x0);
        best = Some((x0.clone(), obj));
        prev = Some(obj);
    }
    let mut rounds = Vec::new();
    let mut termination = Termination::MaxRounds;
    for round in 1..=settings.max_rounds {
        let pen = PenaltyConfig::new(x_check.clone(), eta)?;
        let (sol, exact, gap) = solve_judged(&build_relaxation(problem, settings.kind, Some(&pen))?, EXACT_TOL, solver)?;
        if !sol.status.has_solution() {
            rounds.push(Round {
                round,
                eta,
                status: sol.status,
                objective: f64::NAN,
                exactness_gap: f64::NAN,
                exact: false,
                feasible: false,
                best_objective: best.as_ref().map(|b| b.1),
                x: x_check.clone(),
            });
            if sol.status == RelaxStatus::Infeasible {
                termination = Termination::Infeasible;
                break;
            }
            eta *= settings.eta_growth;
            continue;
        }
        let feasible = problem.pencil.bmi_max_eigenvalue(&sol.x)? <= feas_tol;
        let objective = problem.c.dot(&sol.x);
        if exact && feasible && best.as_ref().is_none_or(|b| objective < b.1) {
            best = Some((sol.x.clone(), objective));
        }
        rounds.push(Round {
            round,
            eta,
            status: sol.status,
            objective,
            exactness_gap: gap,
            exact,
            feasible,
            best_objective: best.as_ref().map(|b| b.1),
            x: sol.x.clone(),
        });
        log::debug!("round {round}: eta={eta:.3e} obj={objective:.6e} gap={gap:.2e}");
        if exact {
            x_check = sol.x;
            let stalled = prev.is_some_and(|p: f64| (objective - p).abs() <= settings.obj_stall_tol * (1.0 + p.abs()));
            prev = Some(objective);
            if stalled {
                termination = Termination::Stalled;
                break;
            }
        } else {
            eta *= settings.eta_growth;
        }
    }
    if termination != Termination::Infeasible && rounds.iter().all(|r| !r.status.has_solution()) {
        return Err(BmiError::SolveFailed {
            status: rounds.last().map_or("failed", |r| r.status.as_str()).into(),
            context: format!("all {} sequential rounds failed", rounds.len()),
        });
    }
    Ok(SequentialTrace { rounds, termination, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pencil::test_support::{m1, unit_interval};
    use crate::pencil::MatrixPencil;

    fn scalar() -> BmiProblem {
        BmiProblem::new(DVector::from_element(1, 1.0), unit_interval()).unwrap()
    }

    #[test]
    fn scalar_descends_to_the_optimum() {
        let t = run(&scalar(), &DVector::from_element(1, 2.0), &SequentialSettings::default(), &SolverSettings::default()).unwrap();
        let xs: Vec<f64> = t.rounds.iter().map(|r| r.x[0]).collect();
        for (got, want) in xs.iter().zip([1.0, 0.5, 0.0, -0.5, -1.0]) {
            assert!((got - want).abs() < 1e-4, "{xs:?}");
        }
        assert_eq!(t.termination, Termination::Stalled);
        assert!((t.best.unwrap().1 + 1.0).abs() < 1e-4);
        let bests: Vec<f64> = t.rounds.iter().filter_map(|r| r.best_objective).collect();
        assert!(bests.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn optimal_start_is_a_fixed_point() {
        let t = run(&scalar(), &DVector::from_element(1, -1.0), &SequentialSettings::default(), &SolverSettings::default()).unwrap();
        assert_eq!(t.rounds.len(), 1);
        assert_eq!(t.termination, Termination::Stalled);
        assert!((t.rounds[0].objective + 1.0).abs() < 1e-5);
    }

    #[test]
    fn infeasible_problem_is_reported() {
        let z = m1(0.0);
        let p = MatrixPencil::new(m1(1.0), vec![z.clone()], [((0, 0), z)]).unwrap();
        let prob = BmiProblem::new(DVector::from_element(1, 1.0), p).unwrap();
        let t = run(&prob, &DVector::zeros(1), &SequentialSettings::default(), &SolverSettings::default()).unwrap();
        assert_eq!(t.termination, Termination::Infeasible);
        assert_eq!(t.rounds[0].status, RelaxStatus::Infeasible);
        assert!(t.best.is_none());
    }
}
