//! Report and solution files.
//!
//! Reports are written by the command-line tool and read back by `certify`.
//! Matrices are stored dense and row-major, like in the problem file.

use bmirelax_conic::SolverSettings;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::json::{self, reals, unreal, Real};
use super::problem::SCHEMA_VERSION;
use crate::cones::ConeKind;
use crate::diagnostics::{Candidate, Certificate, RecoveryCheck};
use crate::error::{BmiError, Result};
use crate::pencil::PencilNormEstimate;
use crate::relaxation::{Bound, EtaSearch, RelaxSolution};
use crate::sequential::SequentialTrace;

fn flat(a: &DMatrix<f64>) -> Vec<Real> {
    let mut out = Vec::with_capacity(a.len());
    for r in 0..a.nrows() {
        for s in 0..a.ncols() {
            out.push(Real(a[(r, s)]));
        }
    }
    out
}

fn unflat(v: &[Real], k: usize, field: &str) -> Result<DMatrix<f64>> {
    if v.len() != k * k {
        return Err(BmiError::parse(field, format!("expected {} entries, got {}", k * k, v.len())));
    }
    Ok(DMatrix::from_row_slice(k, k, &unreal(v)))
}

fn isqrt(len: usize) -> usize {
    (0..=len).find(|k| k * k >= len).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsEcho {
    pub eps_abs: Real,
    pub eps_rel: Real,
    pub max_iter: usize,
    pub over_relaxation: Real,
    pub step_rho: Real,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_check: Option<Vec<Real>>,
}

impl SettingsEcho {
    pub fn new(s: &SolverSettings, seed: u64) -> Self {
        Self {
            eps_abs: Real(s.eps_abs),
            eps_rel: Real(s.eps_rel),
            max_iter: s.max_iter,
            over_relaxation: Real(s.over_relaxation),
            step_rho: Real(s.step_rho),
            seed,
            eta: None,
            x_check: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: Real,
    pub dual: Real,
    pub gap: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaStepEntry {
    pub eta: Real,
    pub status: String,
    pub objective: Real,
    pub exactness_gap: Real,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub q: u8,
    pub value: Real,
    pub upper: Real,
    pub kind: String,
    pub witness_u: Vec<Real>,
}

impl From<&PencilNormEstimate> for NormEntry {
    fn from(e: &PencilNormEstimate) -> Self {
        Self { q: e.q.as_u8(), value: Real(e.value), upper: Real(e.upper), kind: e.kind.as_str().into(), witness_u: reals(e.witness_u.as_slice()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryEntry {
    pub d_upper: Real,
    pub d_lower: Real,
    pub s_value: Real,
    pub omega: Real,
    pub omega_over_pnorm: Real,
    pub pnorm: Real,
    pub pnorm_kind: String,
    pub distance_method: String,
    pub verdict: String,
}

impl From<&RecoveryCheck> for RecoveryEntry {
    fn from(r: &RecoveryCheck) -> Self {
        Self {
            d_upper: Real(r.d_upper),
            d_lower: Real(r.d_lower),
            s_value: Real(r.s_value),
            omega: Real(r.omega),
            omega_over_pnorm: Real(r.omega_over_pnorm),
            pnorm: Real(r.pnorm),
            pnorm_kind: r.pnorm_kind.as_str().into(),
            distance_method: r.distance_method.as_str().into(),
            verdict: r.verdict.as_str().into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfcqEntry {
    pub holds: bool,
    pub margin: Real,
    pub b: Vec<Real>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateEntry {
    pub verdict: String,
    pub exactness_gap: Real,
    pub exact: bool,
    pub bmi_violation: Real,
    pub feasible: bool,
    pub kkt_stationarity: Real,
    pub kkt_compl_slack: Real,
    pub dual_margin: Real,
    pub dual_inside: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dual_split_margin: Option<Real>,
    pub trace_ratio: Real,
    pub zeta_bound: Real,
    pub trace_test_sufficient: bool,
    pub pencil_norm: NormEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem2: Option<RecoveryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_improved: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mfcq: Option<MfcqEntry>,
}

impl From<&Certificate> for CertificateEntry {
    fn from(c: &Certificate) -> Self {
        Self {
            verdict: c.verdict().as_str().into(),
            exactness_gap: Real(c.exactness_gap),
            exact: c.exact,
            bmi_violation: Real(c.bmi_violation),
            feasible: c.feasible,
            kkt_stationarity: Real(c.kkt_stationarity),
            kkt_compl_slack: Real(c.kkt_compl_slack),
            dual_margin: Real(c.dual.margin),
            dual_inside: c.dual.inside,
            dual_split_margin: c.dual.split_margin.map(Real),
            trace_ratio: Real(c.dual.trace_ratio),
            zeta_bound: Real(c.dual.zeta_bound),
            trace_test_sufficient: c.dual.sufficient,
            pencil_norm: NormEntry::from(&c.pencil_norm),
            theorem2: c.theorem2.as_ref().map(RecoveryEntry::from),
            objective_improved: c.objective_improved,
            mfcq: c.mfcq.as_ref().map(|m| MfcqEntry { holds: m.holds, margin: Real(m.margin), b: reals(m.b.as_slice()) }),
        }
    }
}

/// One relaxation solve (or the final solve of an η-search).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeResult {
    pub cone: ConeKind,
    pub status: String,
    pub objective: Real,
    pub x: Vec<Real>,
    #[serde(rename = "X")]
    pub xmat: Vec<Real>,
    #[serde(rename = "Lambda")]
    pub lambda: Vec<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Residuals>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_check: Option<Vec<Real>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_search: Option<Vec<EtaStepEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateEntry>,
}

impl ConeResult {
    pub fn from_solution(sol: &RelaxSolution) -> Self {
        Self {
            cone: sol.kind,
            status: sol.status.as_str().into(),
            objective: Real(sol.objective),
            x: reals(sol.x.as_slice()),
            xmat: flat(&sol.xmat),
            lambda: flat(&sol.lambda),
            residuals: Some(Residuals { primal: Real(sol.primal_residual), dual: Real(sol.dual_residual), gap: Real(sol.gap) }),
            iterations: Some(sol.iterations),
            eta: sol.eta().map(Real),
            x_check: sol.penalty.as_ref().map(|p| reals(p.x_check.as_slice())),
            eta_search: None,
            certificate: None,
        }
    }

    pub fn from_search(search: &EtaSearch) -> Self {
        let mut out = Self::from_solution(&search.solution);
        out.eta_search = Some(
            search
                .steps
                .iter()
                .map(|s| EtaStepEntry {
                    eta: Real(s.eta),
                    status: s.status.as_str().into(),
                    objective: Real(s.objective),
                    exactness_gap: Real(s.exactness_gap),
                    exact: s.exact,
                })
                .collect(),
        );
        out
    }

    /// Entry for a supplied (not solved) candidate with objective `cᵀx`.
    pub fn given(cone: ConeKind, cand: &Candidate, objective: f64) -> Self {
        Self {
            cone,
            status: "given".into(),
            objective: Real(objective),
            x: reals(cand.x.as_slice()),
            xmat: flat(&cand.xmat),
            lambda: flat(&cand.lambda),
            residuals: None,
            iterations: None,
            eta: (cand.eta > 0.0).then_some(Real(cand.eta)),
            x_check: cand.x_check.as_ref().map(|v| reals(v.as_slice())),
            eta_search: None,
            certificate: None,
        }
    }

    /// The candidate `(x, X, Λ, η, x̌)` this entry describes.
    pub fn candidate(&self) -> Result<Candidate> {
        solution_candidate(&self.x, &self.xmat, &self.lambda, self.eta, self.x_check.as_deref())
    }
}

fn solution_candidate(x: &[Real], xmat: &[Real], lambda: &[Real], eta: Option<Real>, x_check: Option<&[Real]>) -> Result<Candidate> {
    let n = x.len();
    let m = isqrt(lambda.len());
    let xc = match x_check {
        Some(v) if v.len() != n => return Err(BmiError::parse("x_check", format!("expected {n} entries, got {}", v.len()))),
        Some(v) => Some(DVector::from_vec(unreal(v))),
        None => None,
    };
    Ok(Candidate {
        x: DVector::from_vec(unreal(x)),
        xmat: unflat(xmat, n, "X")?,
        lambda: unflat(lambda, m, "Lambda")?,
        eta: eta.map_or(0.0, |e| e.0),
        x_check: xc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub cone: ConeKind,
    pub status: String,
    pub value: Real,
}

impl BoundEntry {
    pub fn new(cone: ConeKind, bound: Bound) -> Self {
        let (status, value) = match bound {
            Bound::Finite { value, accurate: true } => ("optimal", value),
            Bound::Finite { value, accurate: false } => ("inaccurate", value),
            Bound::Infeasible => ("infeasible", f64::INFINITY),
            Bound::Unbounded => ("unbounded", f64::NEG_INFINITY),
        };
        Self { cone, status: status.into(), value: Real(value) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundEntry {
    pub round: usize,
    pub eta: Real,
    pub status: String,
    pub objective: Real,
    pub exactness_gap: Real,
    pub exact: bool,
    pub feasible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_objective: Option<Real>,
    pub x: Vec<Real>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialEntry {
    pub cone: ConeKind,
    pub termination: String,
    pub rounds: Vec<RoundEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_x: Option<Vec<Real>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_objective: Option<Real>,
}

impl SequentialEntry {
    pub fn new(cone: ConeKind, trace: &SequentialTrace) -> Self {
        Self {
            cone,
            termination: trace.termination.as_str().into(),
            rounds: trace
                .rounds
                .iter()
                .map(|r| RoundEntry {
                    round: r.round,
                    eta: Real(r.eta),
                    status: r.status.as_str().into(),
                    objective: Real(r.objective),
                    exactness_gap: Real(r.exactness_gap),
                    exact: r.exact,
                    feasible: r.feasible,
                    best_objective: r.best_objective.map(Real),
                    x: reals(r.x.as_slice()),
                })
                .collect(),
            best_x: trace.best.as_ref().map(|b| reals(b.0.as_slice())),
            best_objective: trace.best.as_ref().map(|b| Real(b.1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub lower: Vec<Real>,
    pub upper: Vec<Real>,
    pub resolution: Real,
    pub feasible_nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimum_x: Option<Vec<Real>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimum_value: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pencil_norm_bracket: Option<[Real; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub seconds: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: String,
    pub command: String,
    pub n: usize,
    pub m: usize,
    pub settings: SettingsEcho,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub results: Vec<ConeResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<BoundEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequential: Option<SequentialEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl ReportFile {
    pub fn new(command: &str, n: usize, m: usize, settings: SettingsEcho) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            n,
            m,
            settings,
            results: Vec::new(),
            bounds: None,
            sequential: None,
            oracle: None,
            timing: None,
        }
    }

    pub fn to_json(&self) -> String {
        json::to_string(&serde_json::to_value(self).expect("report serializes"))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text).map_err(|e| BmiError::parse("<report>", e.to_string()))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(BmiError::parse("schema_version", format!("unsupported version {:?}", report.schema_version)));
        }
        Ok(report)
    }
}

/// A bare solution to certify: `(x, X, Λ)` with optional penalty data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone: Option<ConeKind>,
    pub x: Vec<Real>,
    #[serde(rename = "X")]
    pub xmat: Vec<Real>,
    #[serde(rename = "Lambda")]
    pub lambda: Vec<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_check: Option<Vec<Real>>,
}

impl SolutionFile {
    pub fn candidate(&self) -> Result<Candidate> {
        solution_candidate(&self.x, &self.xmat, &self.lambda, self.eta, self.x_check.as_deref())
    }

    pub fn to_json(&self) -> String {
        json::to_string(&serde_json::to_value(self).expect("solution serializes"))
    }
}

/// What `certify` accepts: a solution file or a report with at least one result.
#[derive(Debug, Clone, PartialEq)]
pub enum CertifyInput {
    Solution(SolutionFile),
    Report(Box<ReportFile>),
}

impl CertifyInput {
    pub fn parse(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| BmiError::parse("<document>", format!("malformed JSON: {e}")))?;
        if value.get("command").is_some() {
            Ok(CertifyInput::Report(Box::new(ReportFile::from_json(text)?)))
        } else {
            let sol: SolutionFile = serde_json::from_value(value).map_err(|e| BmiError::parse("<solution>", e.to_string()))?;
            if sol.schema_version != SCHEMA_VERSION {
                return Err(BmiError::parse("schema_version", format!("unsupported version {:?}", sol.schema_version)));
            }
            Ok(CertifyInput::Solution(sol))
        }
    }

    /// Candidates with their cone, if recorded.
    pub fn candidates(&self) -> Result<Vec<(Option<ConeKind>, Candidate)>> {
        match self {
            CertifyInput::Solution(s) => Ok(vec![(s.cone, s.candidate()?)]),
            CertifyInput::Report(r) => {
                let usable: Vec<_> = r.results.iter().filter(|c| matches!(c.status.as_str(), "optimal" | "inaccurate" | "given")).collect();
                if usable.is_empty() {
                    return Err(BmiError::parse("results", "report holds no solved relaxation"));
                }
                usable.into_iter().map(|c| Ok((Some(c.cone), c.candidate()?))).collect()
            }
        }
    }
}
