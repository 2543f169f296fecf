//! Certification of relaxation outputs: exactness, KKT residuals of the
//! penalized problem, dual-cone margins, feasibility-distance brackets and the
//! recovery condition `d_F(x̌)·‖p‖₂ ≤ ω·s(x̌)`.

use bmirelax_conic::SolverSettings;
use nalgebra::{DMatrix, DVector};

use crate::cones::{dual_member, ConeKind};
use crate::error::{BmiError, Result};
use crate::linalg::{self, max_eigenvalue};
use crate::pencil::{BmiProblem, Mfcq, NormKind, NormOrder, PencilNormEstimate};
use crate::relaxation::{build_relaxation, eta_search, solve_relaxation, EtaSearchOptions, PenaltyConfig, RelaxSolution, RelaxStatus};

/// `(gap ≤ tol·(1 + ‖X‖_F), gap)` with `gap = ‖X − xxᵀ‖_F`.
pub fn exactness(x: &DVector<f64>, xmat: &DMatrix<f64>, tol: f64) -> (bool, f64) {
    let gap = (xmat - x * x.transpose()).norm();
    (gap <= tol * (1.0 + xmat.norm()), gap)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `‖c + 2η(x − x̌) + [⟨Kₖ, Λ⟩]ₖ + 2α(Λ)x‖₂`
    pub stationarity: f64,
    /// `‖Λ·p(x, xxᵀ)‖_F`
    pub compl: f64,
}

/// Residuals of the KKT system of the penalized non-convex problem at `(x, Λ)`.
/// Pass `eta = 0` for the unpenalized problem.
pub fn kkt_residuals(problem: &BmiProblem, x: &DVector<f64>, lambda: &DMatrix<f64>, eta: f64, x_check: &DVector<f64>) -> Result<KktResiduals> {
    let p = &problem.pencil;
    if x_check.len() != problem.n() {
        return Err(BmiError::Input(format!("x_check has length {}, expected {}", x_check.len(), problem.n())));
    }
    let grad = &problem.c + (x - x_check) * (2.0 * eta) + p.k_pairing(lambda) + p.alpha(lambda)? * x * 2.0;
    let compl = (lambda * p.eval_bilinear(x)?).norm();
    Ok(KktResiduals { stationarity: grad.norm(), compl })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    /// Margin of `G = ηI + α(Λ)` in the dual cone.
    pub margin: f64,
    pub inside: bool,
    /// `C₂*` only: margin of the even diagonal split of `G`.
    pub split_margin: Option<f64>,
    /// `tr(Λ)/η`
    pub trace_ratio: f64,
    /// `ζ/‖p‖₂` (infinite when the bilinear part vanishes).
    pub zeta_bound: f64,
    /// `tr(Λ)/η ≤ ζ/‖p‖₂`, claimed only when `‖p‖₂` is certified.
    pub sufficient: bool,
}

/// Checks whether `ηI + α(Λ)` lies in the dual of `C_kind`.
///
/// `norm` must be an estimate of `‖p‖₂`; the trace test uses its upper bound
/// so that `sufficient = true` is never claimed on an uncertified norm.
pub fn dual_certificate(
    problem: &BmiProblem,
    kind: ConeKind,
    lambda: &DMatrix<f64>,
    eta: f64,
    norm: &PencilNormEstimate,
    settings: &SolverSettings,
) -> Result<DualCertificate> {
    if norm.q != NormOrder::Two {
        return Err(BmiError::Input("dual certificate needs the 2-norm of the pencil".into()));
    }
    let n = problem.n();
    let g = DMatrix::identity(n, n) * eta + problem.pencil.alpha(lambda)?;
    let tol = 1e-9 * (1.0 + g.amax());
    let dual = dual_member(kind, &g, tol, settings)?;
    let trace_ratio = if eta > 0.0 { lambda.trace() / eta } else { f64::INFINITY };
    let zeta = kind.zeta(n);
    let zeta_bound = if norm.upper > 0.0 { zeta / norm.value } else { f64::INFINITY };
    let certified = norm.kind == NormKind::Exact || norm.upper == 0.0;
    let sufficient = certified && trace_ratio * norm.upper <= zeta;
    Ok(DualCertificate { margin: dual.margin, inside: dual.inside, split_margin: dual.split_margin, trace_ratio, zeta_bound, sufficient })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMethod {
    /// `x̌` is feasible.
    Feasible,
    /// Lower bound from an exhaustive grid (n ≤ 3) together with the relaxation.
    Grid,
    /// Lower bound from the relaxation only.
    Relaxation,
    /// The relaxation proves the feasible set empty.
    Empty,
}

impl DistanceMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceMethod::Feasible => "feasible",
            DistanceMethod::Grid => "grid",
            DistanceMethod::Relaxation => "relaxation",
            DistanceMethod::Empty => "empty",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBracket {
    pub d_lower: f64,
    /// `+∞` when no feasible point was found.
    pub d_upper: f64,
    pub method: DistanceMethod,
    /// Feasible point realizing `d_upper`.
    pub nearest: Option<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceOptions {
    /// Absolute feasibility tolerance `λ_max(p(x, xxᵀ)) ≤ feas_tol·scale`.
    pub feas_tol: f64,
    /// Grid node budget (the grid runs only for `n ≤ 3`).
    pub grid_nodes: usize,
    /// Search radius used when no feasible point bounds the distance.
    pub search_radius: f64,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self { feas_tol: 1e-7, grid_nodes: 2_000_000, search_radius: 10.0 }
    }
}

/// Brackets `d_F(x̌)`, the distance from `x̌` to `{x : p(x, xxᵀ) ⪯ 0}`.
///
/// The upper bound comes from feasible points: the output of the penalized
/// SDP relaxation with `c = 0` when it is exact (then it is a nearest point),
/// and feasible grid nodes. For any `η`, the penalized value divided by `η`
/// is `min ‖x − x̌‖² + tr(X − xxᵀ)` over the relaxation, which is at most
/// `d_F²`; its square root is a lower bound. For `n ≤ 3` a grid whose cells
/// are discarded by a Lipschitz bound on `λ_max(p(x, xxᵀ))` sharpens it.
pub fn feasibility_distance(problem: &BmiProblem, x_check: &DVector<f64>, options: &DistanceOptions, settings: &SolverSettings) -> Result<DistanceBracket> {
    let n = problem.n();
    let pencil = &problem.pencil;
    let feas_tol = options.feas_tol * problem.scale();
    if x_check.len() != n {
        return Err(BmiError::Input(format!("x_check has length {}, expected {n}", x_check.len())));
    }
    if pencil.bmi_max_eigenvalue(x_check)? <= feas_tol {
        return Ok(DistanceBracket { d_lower: 0.0, d_upper: 0.0, method: DistanceMethod::Feasible, nearest: Some(x_check.clone()) });
    }

    let projection = BmiProblem::new(DVector::zeros(n), pencil.clone())?;
    let search = eta_search(&projection, ConeKind::Sdp, x_check, &EtaSearchOptions { eta0: Some(1.0), ..Default::default() }, settings)?;
    let mut d_lower: f64 = 0.0;
    let mut d_upper = f64::INFINITY;
    let mut nearest = None;
    for step in &search.steps {
        match step.status {
            RelaxStatus::Infeasible => {
                return Ok(DistanceBracket { d_lower: f64::INFINITY, d_upper: f64::INFINITY, method: DistanceMethod::Empty, nearest: None });
            }
            RelaxStatus::Optimal => {
                let v = step.objective / step.eta;
                let slack = 1e-6 * (1.0 + v.abs());
                d_lower = d_lower.max((v - slack).max(0.0).sqrt());
            }
            _ => {}
        }
    }
    let sol = &search.solution;
    if sol.status.has_solution() && pencil.bmi_max_eigenvalue(&sol.x)? <= feas_tol {
        d_upper = (&sol.x - x_check).norm();
        nearest = Some(sol.x.clone());
    }

    let mut method = DistanceMethod::Relaxation;
    if n <= 3 {
        let radius = if d_upper.is_finite() { d_upper * (1.0 + 1e-9) + 1e-9 } else { options.search_radius };
        let grid = grid_distance(problem, x_check, radius, options.grid_nodes, feas_tol)?;
        if grid.d_upper < d_upper {
            d_upper = grid.d_upper;
            nearest = grid.nearest;
        }
        d_lower = d_lower.max(grid.d_lower);
        method = DistanceMethod::Grid;
    }
    // the relaxation bound can exceed a tolerance-feasible upper bound by rounding
    d_lower = d_lower.min(d_upper);
    Ok(DistanceBracket { d_lower, d_upper, method, nearest })
}

/// Grid over the box `x̌ ± radius`. Returns a lower bound valid inside the
/// ball of that radius and the nearest feasible node.
fn grid_distance(problem: &BmiProblem, x_check: &DVector<f64>, radius: f64, budget: usize, feas_tol: f64) -> Result<DistanceBracket> {
    let n = problem.n();
    let pencil = &problem.pencil;
    let per_axis = ((budget as f64).powf(1.0 / n as f64).floor() as usize).max(2);
    let h = 2.0 * radius / per_axis as f64;
    let half_diag = h * (n as f64).sqrt() / 2.0;

    // λ_max(p(x, xxᵀ)) is Lipschitz on the box with this constant
    let reach = x_check.norm() + radius * (n as f64).sqrt();
    let k_term: f64 = pencil.ks().iter().map(|k| k.norm_squared()).sum::<f64>().sqrt();
    let mut l_sq = 0.0;
    for i in 0..n {
        for j in 0..n {
            if let Some(l) = pencil.l(i, j) {
                l_sq += l.norm_squared();
            }
        }
    }
    let lip = k_term + 2.0 * reach * l_sq.sqrt();

    let mut d_lower = radius;
    let mut d_upper = f64::INFINITY;
    let mut nearest = None;
    let mut idx = vec![0usize; n];
    loop {
        let g = DVector::from_fn(n, |k, _| x_check[k] - radius + h * (idx[k] as f64 + 0.5));
        let dist = (&g - x_check).norm();
        if dist - half_diag < d_lower {
            let lam = max_eigenvalue(&pencil.eval_bilinear(&g)?)?;
            if lam <= lip * half_diag {
                d_lower = d_lower.min((dist - half_diag).max(0.0));
            }
            if lam <= feas_tol && dist < d_upper {
                d_upper = dist;
                nearest = Some(g);
            }
        } else if dist < d_upper {
            let lam = max_eigenvalue(&pencil.eval_bilinear(&g)?)?;
            if lam <= feas_tol {
                d_upper = dist;
                nearest = Some(g);
            }
        }
        let mut k = 0;
        loop {
            if k == n {
                return Ok(DistanceBracket { d_lower, d_upper, method: DistanceMethod::Grid, nearest });
            }
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Verified,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Verified => "verified",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "verified" => Some(Verdict::Verified),
            "violated" => Some(Verdict::Violated),
            "inconclusive" => Some(Verdict::Inconclusive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryCheck {
    pub d_upper: f64,
    pub d_lower: f64,
    pub s_value: f64,
    pub omega: f64,
    /// `ω/‖p‖₂` (infinite when the bilinear part vanishes).
    pub omega_over_pnorm: f64,
    pub pnorm: f64,
    pub pnorm_kind: NormKind,
    pub distance_method: DistanceMethod,
    pub verdict: Verdict,
}

/// Evaluates the recovery condition `d_F(x̌)·‖p‖₂ ≤ ω·s(x̌)` for `kind`.
///
/// `verified` needs the upper distance bound and a certified norm;
/// `violated` needs the lower distance bound against the norm's lower bound.
pub fn theorem2_check(
    problem: &BmiProblem,
    kind: ConeKind,
    x_check: &DVector<f64>,
    norm: &PencilNormEstimate,
    distance: &DistanceOptions,
    settings: &SolverSettings,
) -> Result<RecoveryCheck> {
    let g = problem.pencil.g_mfcq_s(x_check, settings)?;
    let bracket = feasibility_distance(problem, x_check, distance, settings)?;
    Ok(recovery_verdict(problem.n(), kind, g.value, &bracket, norm))
}

pub(crate) fn recovery_verdict(n: usize, kind: ConeKind, s: f64, bracket: &DistanceBracket, norm: &PencilNormEstimate) -> RecoveryCheck {
    let omega = kind.omega(n);
    let omega_over_pnorm = if norm.value > 0.0 { omega / norm.value } else { f64::INFINITY };
    let certified = norm.kind == NormKind::Exact || norm.upper == 0.0;
    // s comes from an eigenvalue at a witness direction; allow for solver slack
    let s_hi = s + 1e-7 * (1.0 + s.abs());
    let verdict = if s <= 0.0 {
        Verdict::Violated
    } else if certified && bracket.d_upper * norm.upper <= omega * s {
        Verdict::Verified
    } else if bracket.d_lower * norm.value > omega * s_hi {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    RecoveryCheck {
        d_upper: bracket.d_upper,
        d_lower: bracket.d_lower,
        s_value: s,
        omega,
        omega_over_pnorm,
        pnorm: norm.value,
        pnorm_kind: norm.kind,
        distance_method: bracket.method,
        verdict,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Point {
    pub eta: f64,
    pub status: RelaxStatus,
    /// `‖x̊ − x̌‖₂ − d_upper`; `None` when the solve produced no point.
    pub gap: Option<f64>,
}

/// Solves the penalized relaxation for each `η` and records how far the
/// solution moves beyond the feasibility distance.
pub fn lemma1_gap(problem: &BmiProblem, kind: ConeKind, x_check: &DVector<f64>, etas: &[f64], d_upper: f64, settings: &SolverSettings) -> Result<Vec<Lemma1Point>> {
    if etas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BmiError::Input("eta schedule must be increasing".into()));
    }
    let mut out = Vec::with_capacity(etas.len());
    for &eta in etas {
        let pen = PenaltyConfig::new(x_check.clone(), eta)?;
        let sol = solve_relaxation(&build_relaxation(problem, kind, Some(&pen))?, settings)?;
        let gap = sol.status.has_solution().then(|| (&sol.x - x_check).norm() - d_upper);
        out.push(Lemma1Point { eta, status: sol.status, gap });
    }
    Ok(out)
}

/// A candidate solution to certify.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub x: DVector<f64>,
    pub xmat: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    /// Penalty weight; zero for an unpenalized solve.
    pub eta: f64,
    pub x_check: Option<DVector<f64>>,
}

impl From<&RelaxSolution> for Candidate {
    fn from(s: &RelaxSolution) -> Self {
        Self {
            x: s.x.clone(),
            xmat: s.xmat.clone(),
            lambda: s.lambda.clone(),
            eta: s.eta().unwrap_or(0.0),
            x_check: s.penalty.as_ref().map(|p| p.x_check.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOptions {
    /// Relative exactness tolerance.
    pub exact_tol: f64,
    /// Feasibility tolerance relative to the problem scale.
    pub feas_tol: f64,
    pub norm_restarts: usize,
    pub seed: u64,
    /// Run the recovery-condition check when `x̌` is known.
    pub recovery: bool,
    pub distance: DistanceOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { exact_tol: 1e-6, feas_tol: 1e-6, norm_restarts: 16, seed: 0, recovery: true, distance: DistanceOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub exactness_gap: f64,
    pub exact: bool,
    /// `max(0, λ_max(p(x, xxᵀ)))`
    pub bmi_violation: f64,
    pub feasible: bool,
    pub kkt_stationarity: f64,
    pub kkt_compl_slack: f64,
    pub dual: DualCertificate,
    pub pencil_norm: PencilNormEstimate,
    pub theorem2: Option<RecoveryCheck>,
    /// `cᵀx ≤ cᵀx̌ + tol·scale` when `x̌` is known.
    pub objective_improved: Option<bool>,
    /// MFCQ at `x` when it is feasible.
    pub mfcq: Option<Mfcq>,
}

impl Certificate {
    /// `violated` for infeasible points, `verified` for exact feasible ones.
    pub fn verdict(&self) -> Verdict {
        if !self.feasible {
            Verdict::Violated
        } else if self.exact {
            Verdict::Verified
        } else {
            Verdict::Inconclusive
        }
    }
}

pub fn certify(problem: &BmiProblem, kind: ConeKind, cand: &Candidate, options: &CertifyOptions, settings: &SolverSettings) -> Result<Certificate> {
    let n = problem.n();
    let scale = problem.scale();
    if cand.x.len() != n || cand.xmat.shape() != (n, n) {
        return Err(BmiError::Input(format!("solution dimensions do not match n = {n}")));
    }
    if cand.lambda.shape() != (problem.m(), problem.m()) {
        return Err(BmiError::Input(format!("Lambda must be {m}x{m}", m = problem.m())));
    }
    let (exact, exactness_gap) = exactness(&cand.x, &cand.xmat, options.exact_tol);
    let bmi_violation = problem.pencil.bmi_max_eigenvalue(&cand.x)?.max(0.0);
    let feasible = bmi_violation <= options.feas_tol * scale;
    let zero = DVector::zeros(n);
    let x_check = cand.x_check.as_ref().unwrap_or(&zero);
    let lambda = linalg::symmetrize(&cand.lambda);
    let kkt = kkt_residuals(problem, &cand.x, &lambda, cand.eta, x_check)?;
    let pencil_norm = problem.pencil.pencil_norm(NormOrder::Two, options.norm_restarts, options.seed);
    let dual = dual_certificate(problem, kind, &lambda, cand.eta, &pencil_norm, settings)?;
    let objective_improved = cand
        .x_check
        .as_ref()
        .map(|xc| problem.c.dot(&cand.x) <= problem.c.dot(xc) + options.feas_tol * scale);
    let theorem2 = match (&cand.x_check, options.recovery) {
        (Some(xc), true) => Some(theorem2_check(problem, kind, xc, &pencil_norm, &options.distance, settings)?),
        _ => None,
    };
    let mfcq = if feasible { Some(problem.pencil.mfcq_margin(&cand.x, settings)?) } else { None };
    Ok(Certificate {
        exactness_gap,
        exact,
        bmi_violation,
        feasible,
        kkt_stationarity: kkt.stationarity,
        kkt_compl_slack: kkt.compl,
        dual,
        pencil_norm,
        theorem2,
        objective_improved,
        mfcq,
    })
}
