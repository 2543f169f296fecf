//! Lifted convex relaxations and their penalized form in solver standard form.
//!
//! The standard-form variable is `z = (x, X₀₀, X₀₁, …, X₀,ₙ₋₁, X₁₁, …)`, i.e.
//! `x` followed by the upper triangle of `X` in row-major order. The
//! constraint `X − xxᵀ ∈ C` is written through exact conic equivalents:
//!
//! * `C₁`: `[[1, xᵀ], [x, X]] ⪰ 0`;
//! * `C₂`: `[[1, xᵢ, xⱼ], [xᵢ, Xᵢᵢ, Xᵢⱼ], [xⱼ, Xᵢⱼ, Xⱼⱼ]] ⪰ 0` for `i < j`, plus
//!   `Xᵢᵢ ≥ xᵢ²` for every `i`;
//! * `C₃`: `Xᵢᵢ ≥ xᵢ²` and `Xᵢᵢ + Xⱼⱼ ± 2Xᵢⱼ ≥ (xᵢ ± xⱼ)²`.
//!
//! Scalar inequalities `a ≥ c²` are rotated cones `(a, 1/2, c)` since the
//! rotated cone is `2ab ≥ ‖c‖²`.

use bmirelax_conic::{solve, svec, svec_index, ConeBlock, ConeBlockSpec, ConicProblem, DualBlock, SolverResult, SolverSettings, SolverStatus, Triplets};
use nalgebra::{DMatrix, DVector};

use crate::cones::ConeKind;
use crate::diagnostics::exactness;
use crate::error::{BmiError, Result};
use crate::linalg::symmetrize;
use crate::pencil::{BmiProblem, LiftedPoint};

/// Relative exactness tolerance used by the η-search.
/// Gaps within this relative band of exactness trigger a tighter re-solve.
const REFINE_BAND: f64 = 1e-3;
const REFINE_ROUNDS: usize = 2;
const MIN_REFINED_EPS: f64 = 1e-11;

pub const EXACT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    pub x_check: DVector<f64>,
    pub eta: f64,
}

impl PenaltyConfig {
    pub fn new(x_check: DVector<f64>, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(BmiError::Input(format!("penalty weight must be positive and finite, got {eta}")));
        }
        if x_check.iter().any(|v| !v.is_finite()) {
            return Err(BmiError::Input("x_check has non-finite entries".into()));
        }
        Ok(Self { x_check, eta })
    }
}

/// Index of `X_ij` in the standard-form variable.
pub fn xmat_var(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = (i.min(j), i.max(j));
    // rows 0..i hold n, n−1, …, n−i+1 entries
    n + i * n - i * (i.saturating_sub(1)) / 2 - i + j
}

/// A relaxation assembled as `min costᵀz + constant s.t. Az + s = b, s ∈ K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeProgram {
    pub kind: ConeKind,
    pub n: usize,
    pub m: usize,
    pub cost: DVector<f64>,
    /// Objective offset (`η x̌ᵀx̌` for penalized programs).
    pub constant: f64,
    pub a: Triplets,
    pub b: DVector<f64>,
    pub cones: ConeBlockSpec,
    /// Block id of the LMI slack `svec(−p(x, X))`.
    pub lmi_block: usize,
    pub penalty: Option<PenaltyConfig>,
}

impl ConeProgram {
    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn x_var(&self, k: usize) -> usize {
        k
    }

    pub fn xmat_var(&self, i: usize, j: usize) -> usize {
        xmat_var(self.n, i, j)
    }

    pub fn to_conic(&self) -> Result<ConicProblem> {
        Ok(ConicProblem::new(self.a.to_dense()?, self.b.clone(), self.cost.clone(), self.cones.clone())?)
    }

    /// Reads `(x, X)` out of a standard-form vector.
    pub fn lifted(&self, z: &DVector<f64>) -> LiftedPoint {
        let x = DVector::from_fn(self.n, |k, _| z[self.x_var(k)]);
        let xmat = DMatrix::from_fn(self.n, self.n, |i, j| z[self.xmat_var(i, j)]);
        LiftedPoint { x, xmat }
    }

    /// Standard-form vector of a lifted point.
    pub fn pack(&self, point: &LiftedPoint) -> DVector<f64> {
        let mut z = DVector::zeros(self.num_vars());
        for k in 0..self.n {
            z[self.x_var(k)] = point.x[k];
        }
        for i in 0..self.n {
            for j in i..self.n {
                z[self.xmat_var(i, j)] = point.xmat[(i, j)];
            }
        }
        z
    }

    /// Objective `costᵀz + constant` at a lifted point.
    pub fn objective_at(&self, point: &LiftedPoint) -> f64 {
        self.cost.dot(&self.pack(point)) + self.constant
    }
}

/// An affine expression `constant + Σ coef·z_var`, placed in one slack row.
#[derive(Default)]
struct Affine {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

impl Affine {
    fn constant(v: f64) -> Self {
        Self { constant: v, terms: Vec::new() }
    }

    fn var(v: usize, coef: f64) -> Self {
        Self { constant: 0.0, terms: vec![(v, coef)] }
    }

    fn plus(mut self, v: usize, coef: f64) -> Self {
        self.terms.push((v, coef));
        self
    }

    fn scaled(mut self, f: f64) -> Self {
        self.constant *= f;
        for t in &mut self.terms {
            t.1 *= f;
        }
        self
    }
}

struct Assembler {
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
    cones: ConeBlockSpec,
}

impl Assembler {
    /// Appends rows so that `s_row = expr` (i.e. `b = constant`, `A = −coef`).
    fn row(&mut self, expr: Affine) {
        let r = self.rhs.len();
        for (v, c) in expr.terms {
            if c != 0.0 {
                self.entries.push((r, v, -c));
            }
        }
        self.rhs.push(expr.constant);
    }

    fn block(&mut self, block: ConeBlock, rows: Vec<Affine>) -> Result<usize> {
        debug_assert_eq!(block.dim(), rows.len());
        for r in rows {
            self.row(r);
        }
        Ok(self.cones.push(block)?)
    }

    /// A PSD block on a symmetric matrix of affine expressions (lower triangle read).
    fn psd(&mut self, entries: impl Fn(usize, usize) -> Affine, k: usize) -> Result<usize> {
        let mut rows: Vec<Affine> = (0..k * (k + 1) / 2).map(|_| Affine::default()).collect();
        for j in 0..k {
            for i in j..k {
                let f = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                rows[svec_index(k, i, j)] = entries(i, j).scaled(f);
            }
        }
        self.block(ConeBlock::Psd(k), rows)
    }

    /// `a ≥ c²` as the rotated cone `(a, 1/2, c)`.
    fn square_bound(&mut self, a: Affine, c: Affine) -> Result<usize> {
        self.block(ConeBlock::Rsoc(3), vec![a, Affine::constant(0.5), c])
    }
}

/// Builds the (optionally penalized) relaxation of `problem` over `kind`.
pub fn build_relaxation(problem: &BmiProblem, kind: ConeKind, penalty: Option<&PenaltyConfig>) -> Result<ConeProgram> {
    let n = problem.n();
    let m = problem.m();
    let pencil = &problem.pencil;
    if let Some(pen) = penalty {
        if pen.x_check.len() != n {
            return Err(BmiError::Input(format!("x_check has length {}, expected {n}", pen.x_check.len())));
        }
    }
    let nvar = n + n * (n + 1) / 2;
    let xv = |k: usize| k;
    let xm = |i: usize, j: usize| xmat_var(n, i, j);

    let mut asm = Assembler { ncols: nvar, entries: Vec::new(), rhs: Vec::new(), cones: ConeBlockSpec::default() };

    // LMI slack svec(−p(x, X))
    let f0 = svec(pencil.f0());
    let ks: Vec<Vec<f64>> = pencil.ks().iter().map(svec).collect();
    let ls: Vec<((usize, usize), Vec<f64>)> = pencil
        .l_pairs()
        .map(|(&(i, j), l)| ((i, j), svec(&(l * if i == j { 1.0 } else { 2.0 }))))
        .collect();
    let mut lmi_rows = Vec::with_capacity(f0.len());
    for e in 0..f0.len() {
        let mut expr = Affine::constant(-f0[e]);
        for (k, kv) in ks.iter().enumerate() {
            expr = expr.plus(xv(k), -kv[e]);
        }
        for ((i, j), lv) in &ls {
            expr = expr.plus(xm(*i, *j), -lv[e]);
        }
        lmi_rows.push(expr);
    }
    let lmi_block = asm.block(ConeBlock::Psd(m), lmi_rows)?;

    match kind {
        ConeKind::Sdp => {
            asm.psd(
                |r, s| match (r, s) {
                    (0, 0) => Affine::constant(1.0),
                    (r, 0) => Affine::var(xv(r - 1), 1.0),
                    (r, s) => Affine::var(xm(r - 1, s - 1), 1.0),
                },
                n + 1,
            )?;
        }
        ConeKind::Socp => {
            for i in 0..n {
                for j in i + 1..n {
                    let idx = [i, j];
                    asm.psd(
                        |r, s| match (r, s) {
                            (0, 0) => Affine::constant(1.0),
                            (r, 0) => Affine::var(xv(idx[r - 1]), 1.0),
                            (r, s) => Affine::var(xm(idx[r - 1], idx[s - 1]), 1.0),
                        },
                        3,
                    )?;
                }
            }
            for i in 0..n {
                asm.square_bound(Affine::var(xm(i, i), 1.0), Affine::var(xv(i), 1.0))?;
            }
        }
        ConeKind::Parabolic => {
            for i in 0..n {
                asm.square_bound(Affine::var(xm(i, i), 1.0), Affine::var(xv(i), 1.0))?;
            }
            for i in 0..n {
                for j in i + 1..n {
                    for sign in [-1.0, 1.0] {
                        let a = Affine::var(xm(i, i), 1.0).plus(xm(j, j), 1.0).plus(xm(i, j), 2.0 * sign);
                        let c = Affine::var(xv(i), 1.0).plus(xv(j), sign);
                        asm.square_bound(a, c)?;
                    }
                }
            }
        }
    }

    let mut cost = DVector::zeros(nvar);
    let mut constant = 0.0;
    for k in 0..n {
        cost[xv(k)] = problem.c[k];
    }
    if let Some(pen) = penalty {
        for k in 0..n {
            cost[xv(k)] -= 2.0 * pen.eta * pen.x_check[k];
            cost[xm(k, k)] += pen.eta;
        }
        constant = pen.eta * pen.x_check.norm_squared();
    }

    let nrows = asm.rhs.len();
    Ok(ConeProgram {
        kind,
        n,
        m,
        cost,
        constant,
        a: Triplets { nrows, ncols: asm.ncols, entries: asm.entries },
        b: DVector::from_vec(asm.rhs),
        cones: asm.cones,
        lmi_block,
        penalty: penalty.cloned(),
    })
}

/// Outcome classification of a relaxation solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelaxStatus {
    Optimal,
    Inaccurate,
    Infeasible,
    Unbounded,
    Failed,
}

impl RelaxStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RelaxStatus::Optimal => "optimal",
            RelaxStatus::Inaccurate => "inaccurate",
            RelaxStatus::Infeasible => "infeasible",
            RelaxStatus::Unbounded => "unbounded",
            RelaxStatus::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "optimal" => RelaxStatus::Optimal,
            "inaccurate" => RelaxStatus::Inaccurate,
            "infeasible" => RelaxStatus::Infeasible,
            "unbounded" => RelaxStatus::Unbounded,
            "failed" => RelaxStatus::Failed,
            _ => return None,
        })
    }

    /// Whether `(x, X, Λ)` carry a usable solution.
    pub fn has_solution(self) -> bool {
        matches!(self, RelaxStatus::Optimal | RelaxStatus::Inaccurate)
    }
}

impl From<SolverStatus> for RelaxStatus {
    fn from(s: SolverStatus) -> Self {
        match s {
            SolverStatus::Optimal => RelaxStatus::Optimal,
            SolverStatus::Inaccurate => RelaxStatus::Inaccurate,
            SolverStatus::Infeasible => RelaxStatus::Infeasible,
            SolverStatus::Unbounded => RelaxStatus::Unbounded,
            SolverStatus::Failed => RelaxStatus::Failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxSolution {
    pub kind: ConeKind,
    pub x: DVector<f64>,
    pub xmat: DMatrix<f64>,
    /// Multiplier of `p(x, X) ⪯ 0`.
    pub lambda: DMatrix<f64>,
    /// Includes the penalty constant; `+∞` when infeasible, `−∞` when unbounded.
    pub objective: f64,
    pub status: RelaxStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub penalty: Option<PenaltyConfig>,
}

impl RelaxSolution {
    pub fn point(&self) -> LiftedPoint {
        LiftedPoint { x: self.x.clone(), xmat: self.xmat.clone() }
    }

    pub fn eta(&self) -> Option<f64> {
        self.penalty.as_ref().map(|p| p.eta)
    }
}

/// Trace bound of the unboundedness probe, relative to the stalled iterate.
const PROBE_FACTOR: f64 = 10.0;

pub fn solve_relaxation(program: &ConeProgram, settings: &SolverSettings) -> Result<RelaxSolution> {
    let conic = program.to_conic()?;
    let result = solve(&conic, settings)?;
    if result.status == SolverStatus::Inaccurate {
        let trace = (0..program.n).map(|i| result.z[program.xmat_var(i, i)]).sum::<f64>();
        if let Some(sol) = probe_unbounded(program, &conic, PROBE_FACTOR * (1.0 + trace.abs()), settings)? {
            return Ok(sol);
        }
    }
    Ok(recover(program, &result))
}

/// Every cone ties `Xᵢᵢ ≥ xᵢ²`, so an unbounded relaxation has no improving
/// ray and the embedding cannot certify it; the solver just drifts. Adding
/// `tr X ≤ T` makes the problem bounded: an active bound means the value keeps
/// decreasing with `T`, while an inactive one yields the actual optimum.
fn probe_unbounded(program: &ConeProgram, conic: &ConicProblem, bound: f64, settings: &SolverSettings) -> Result<Option<RelaxSolution>> {
    let rows = conic.num_rows();
    let mut a = conic.a.clone().insert_row(rows, 0.0);
    for i in 0..program.n {
        a[(rows, program.xmat_var(i, i))] = 1.0;
    }
    let b = conic.b.clone().insert_row(rows, bound);
    let mut blocks = conic.cones.blocks().to_vec();
    blocks.push(ConeBlock::Nonneg(1));
    let probe = ConicProblem::new(a, b, conic.c.clone(), ConeBlockSpec::new(blocks)?)?;
    let result = solve(&probe, settings)?;
    if !matches!(result.status, SolverStatus::Optimal | SolverStatus::Inaccurate) {
        return Ok(None);
    }
    let trace = (0..program.n).map(|i| result.z[program.xmat_var(i, i)]).sum::<f64>();
    if trace >= bound * (1.0 - 1e-3) {
        log::debug!("trace bound {bound:.3e} active, relaxation is unbounded");
        let mut sol = recover(program, &result);
        sol.status = RelaxStatus::Unbounded;
        sol.objective = f64::NEG_INFINITY;
        return Ok(Some(sol));
    }
    if result.status == SolverStatus::Optimal {
        return Ok(Some(recover(program, &result)));
    }
    Ok(None)
}

fn recover(program: &ConeProgram, result: &SolverResult) -> RelaxSolution {
    let status = RelaxStatus::from(result.status);
    let (n, m) = (program.n, program.m);
    let mut sol = RelaxSolution {
        kind: program.kind,
        x: DVector::zeros(n),
        xmat: DMatrix::zeros(n, n),
        lambda: DMatrix::zeros(m, m),
        objective: f64::NAN,
        status,
        primal_residual: result.primal_residual,
        dual_residual: result.dual_residual,
        gap: result.gap,
        iterations: result.iterations,
        penalty: program.penalty.clone(),
    };
    match status {
        RelaxStatus::Optimal | RelaxStatus::Inaccurate => {
            let point = program.lifted(&result.z);
            sol.x = point.x;
            sol.xmat = symmetrize(&point.xmat);
            if let Ok(DualBlock::Matrix(l)) = result.dual_block(&program.cones, program.lmi_block) {
                sol.lambda = symmetrize(&l);
            }
            sol.objective = result.objective + program.constant;
        }
        RelaxStatus::Infeasible => sol.objective = f64::INFINITY,
        RelaxStatus::Unbounded => sol.objective = f64::NEG_INFINITY,
        RelaxStatus::Failed => {}
    }
    sol
}

/// Value of the unpenalized relaxation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    /// Finite bound; `accurate` is false when the solver hit its iteration cap.
    Finite { value: f64, accurate: bool },
    Infeasible,
    Unbounded,
}

impl Bound {
    pub fn value(self) -> Option<f64> {
        match self {
            Bound::Finite { value, .. } => Some(value),
            _ => None,
        }
    }
}

pub fn lower_bound(problem: &BmiProblem, kind: ConeKind, settings: &SolverSettings) -> Result<Bound> {
    let sol = solve_relaxation(&build_relaxation(problem, kind, None)?, settings)?;
    match sol.status {
        RelaxStatus::Optimal => Ok(Bound::Finite { value: sol.objective, accurate: true }),
        RelaxStatus::Inaccurate => Ok(Bound::Finite { value: sol.objective, accurate: false }),
        RelaxStatus::Infeasible => Ok(Bound::Infeasible),
        RelaxStatus::Unbounded => Ok(Bound::Unbounded),
        RelaxStatus::Failed => Err(BmiError::SolveFailed {
            status: "failed".into(),
            context: format!("{kind} relaxation lower bound"),
        }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaSearchOptions {
    /// Starting weight; `max(1, ‖c‖₂)` when absent.
    pub eta0: Option<f64>,
    /// Number of doublings after the first solve.
    pub doublings: usize,
    pub exact_tol: f64,
}

impl Default for EtaSearchOptions {
    fn default() -> Self {
        Self { eta0: None, doublings: 20, exact_tol: EXACT_TOL }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaStep {
    pub eta: f64,
    pub status: RelaxStatus,
    pub objective: f64,
    pub exactness_gap: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaSearch {
    pub steps: Vec<EtaStep>,
    /// The last solve performed.
    pub solution: RelaxSolution,
    pub exact: bool,
}

impl EtaSearch {
    pub fn eta(&self) -> f64 {
        self.solution.eta().unwrap_or(f64::NAN)
    }
}

/// Solves a penalized program and judges exactness at `exact_tol`.
///
/// An optimal but slightly inexact answer may only reflect solver accuracy:
/// the gap of an exact solution shrinks with the tolerance, that of a truly
/// inexact one does not. Such answers are re-solved at tighter tolerances
/// before being declared inexact.
pub fn solve_judged(program: &ConeProgram, exact_tol: f64, settings: &SolverSettings) -> Result<(RelaxSolution, bool, f64)> {
    let mut sol = solve_relaxation(program, settings)?;
    if !sol.status.has_solution() {
        return Ok((sol, false, f64::NAN));
    }
    let (mut exact, mut gap) = exactness(&sol.x, &sol.xmat, exact_tol);
    let mut tight = settings.clone();
    for _ in 0..REFINE_ROUNDS {
        let near = gap <= REFINE_BAND * (1.0 + sol.xmat.norm());
        if exact || sol.status != RelaxStatus::Optimal || !near || tight.eps_abs.max(tight.eps_rel) <= MIN_REFINED_EPS {
            break;
        }
        tight.eps_abs = (tight.eps_abs * 1e-2).max(MIN_REFINED_EPS);
        tight.eps_rel = (tight.eps_rel * 1e-2).max(MIN_REFINED_EPS);
        tight.max_iter = tight.max_iter.saturating_mul(2);
        let refined = solve_relaxation(program, &tight)?;
        if refined.status != RelaxStatus::Optimal {
            break;
        }
        log::debug!("refined {} solve: gap {gap:.3e} -> {:.3e}", program.kind, exactness(&refined.x, &refined.xmat, exact_tol).1);
        sol = refined;
        (exact, gap) = exactness(&sol.x, &sol.xmat, exact_tol);
    }
    Ok((sol, exact, gap))
}

/// Solves the penalized relaxation for `η = η₀·2ᵗ`, `t = 0, 1, …`, stopping at
/// the first exact solution or when the relaxation is infeasible.
pub fn eta_search(
    problem: &BmiProblem,
    kind: ConeKind,
    x_check: &DVector<f64>,
    options: &EtaSearchOptions,
    settings: &SolverSettings,
) -> Result<EtaSearch> {
    let eta0 = options.eta0.unwrap_or_else(|| problem.c.norm().max(1.0));
    let mut steps = Vec::new();
    let mut last = None;
    for t in 0..=options.doublings {
        let eta = eta0 * 2f64.powi(t as i32);
        let pen = PenaltyConfig::new(x_check.clone(), eta)?;
        let (sol, exact, gap) = solve_judged(&build_relaxation(problem, kind, Some(&pen))?, options.exact_tol, settings)?;
        log::debug!("{kind} eta={eta:.3e} status={} gap={gap:.3e}", sol.status.as_str());
        steps.push(EtaStep { eta, status: sol.status, objective: sol.objective, exactness_gap: gap, exact });
        let stop = exact || matches!(sol.status, RelaxStatus::Infeasible | RelaxStatus::Unbounded);
        last = Some(sol);
        if stop {
            break;
        }
    }
    let solution = last.expect("at least one solve");
    let exact = steps.last().is_some_and(|s| s.exact);
    Ok(EtaSearch { steps, solution, exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pencil::test_support::unit_interval;
    use crate::pencil::MatrixPencil;

    fn scalar() -> BmiProblem {
        BmiProblem::new(DVector::from_element(1, 1.0), unit_interval()).unwrap()
    }

    #[test]
    fn variable_layout_is_a_bijection() {
        for n in 1..6 {
            let mut seen = vec![false; n + n * (n + 1) / 2];
            for i in 0..n {
                for j in i..n {
                    let v = xmat_var(n, i, j);
                    assert!(!seen[v]);
                    seen[v] = true;
                    assert_eq!(v, xmat_var(n, j, i));
                }
            }
            assert!(seen[n..].iter().all(|s| *s));
        }
    }

    #[test]
    fn block_structure() {
        let z = DMatrix::zeros(2, 2);
        let p = MatrixPencil::new(z.clone(), vec![z.clone(), z.clone()], []).unwrap();
        let prob = BmiProblem::new(DVector::zeros(2), p).unwrap();
        let par = build_relaxation(&prob, ConeKind::Parabolic, None).unwrap();
        assert_eq!(par.cones.count(|b| matches!(b, ConeBlock::Rsoc(3))), 4);
        assert_eq!(par.cones.count(|b| matches!(b, ConeBlock::Psd(2))), 1);
        let sdp = build_relaxation(&scalar(), ConeKind::Sdp, None).unwrap();
        assert_eq!(sdp.cones.blocks(), &[ConeBlock::Psd(1), ConeBlock::Psd(2)]);
        let socp = build_relaxation(&prob, ConeKind::Socp, None).unwrap();
        assert_eq!(socp.cones.count(|b| matches!(b, ConeBlock::Psd(3))), 1);
        assert_eq!(socp.cones.count(|b| matches!(b, ConeBlock::Rsoc(3))), 2);
    }

    #[test]
    fn slack_rows_reproduce_the_pencil() {
        // s = b − Az must equal svec(−p(x, X)) on the LMI block for any (x, X)
        let l01 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -1.0]);
        let l11 = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 3.0]);
        let f0 = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.3, -2.0]);
        let ks = vec![DMatrix::identity(2, 2), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])];
        let p = MatrixPencil::new(f0, ks, [((0, 1), l01), ((1, 1), l11)]).unwrap();
        let prob = BmiProblem::new(DVector::from_vec(vec![1.0, -1.0]), p).unwrap();
        let prog = build_relaxation(&prob, ConeKind::Sdp, None).unwrap();
        let pt = LiftedPoint::new(
            DVector::from_vec(vec![0.7, -0.2]),
            DMatrix::from_row_slice(2, 2, &[1.5, 0.25, 0.25, 0.9]),
        )
        .unwrap();
        let s = &prog.b - prog.a.to_dense().unwrap() * prog.pack(&pt);
        let want = svec(&(-prob.pencil.eval(&pt).unwrap()));
        let range = prog.cones.range_of(prog.lmi_block).unwrap();
        for (a, b) in s.as_slice()[range].iter().zip(&want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn penalty_objective_at_rank_one_points() {
        let prob = scalar();
        let pen = PenaltyConfig::new(DVector::from_element(1, 2.0), 3.0).unwrap();
        let prog = build_relaxation(&prob, ConeKind::Parabolic, Some(&pen)).unwrap();
        for x in [-1.0, 0.0, 0.4, 2.0] {
            let pt = LiftedPoint::rank_one(DVector::from_element(1, x));
            let want = x + 3.0 * (x - 2.0) * (x - 2.0);
            assert!((prog.objective_at(&pt) - want).abs() < 1e-12);
        }
        assert!(PenaltyConfig::new(DVector::from_element(1, 0.0), 0.0).is_err());
    }

    #[test]
    fn scalar_instance_solves_exactly() {
        let settings = SolverSettings::default();
        for kind in ConeKind::ALL {
            let sol = solve_relaxation(&build_relaxation(&scalar(), kind, None).unwrap(), &settings).unwrap();
            assert_eq!(sol.status, RelaxStatus::Optimal, "{kind}");
            assert!((sol.x[0] + 1.0).abs() < 1e-5, "{kind} x={}", sol.x[0]);
            assert!((sol.xmat[(0, 0)] - 1.0).abs() < 1e-4);
            assert!((sol.objective + 1.0).abs() < 1e-5);
            // complementary slackness on the active LMI
            let p = scalar().pencil.eval(&sol.point()).unwrap();
            assert!(sol.lambda.dot(&p).abs() < 1e-5);
            assert!(sol.lambda[(0, 0)] > 0.0);
        }
    }

    #[test]
    fn constant_positive_pencil_is_infeasible() {
        let z = DMatrix::zeros(2, 2);
        let p = MatrixPencil::new(DMatrix::identity(2, 2), vec![z.clone()], [((0, 0), z)]).unwrap();
        let prob = BmiProblem::new(DVector::from_element(1, 1.0), p).unwrap();
        for kind in ConeKind::ALL {
            assert_eq!(lower_bound(&prob, kind, &SolverSettings::default()).unwrap(), Bound::Infeasible);
        }
    }

    #[test]
    fn unconstrained_direction_is_unbounded() {
        // p(x) = x₂² − 1 leaves x₁ free
        let z = DMatrix::zeros(1, 1);
        let p = MatrixPencil::new(DMatrix::from_element(1, 1, -1.0), vec![z.clone(), z.clone()], [((1, 1), DMatrix::from_element(1, 1, 1.0))])
            .unwrap();
        let prob = BmiProblem::new(DVector::from_vec(vec![1.0, 0.0]), p).unwrap();
        for kind in ConeKind::ALL {
            assert_eq!(lower_bound(&prob, kind, &SolverSettings::default()).unwrap(), Bound::Unbounded, "{kind}");
        }
    }

    #[test]
    fn inactive_lmi_has_zero_multiplier() {
        // min (x − 0.5)² style: penalty centered inside the feasible interval, c = 0
        let prob = BmiProblem::new(DVector::zeros(1), unit_interval()).unwrap();
        let pen = PenaltyConfig::new(DVector::from_element(1, 0.5), 1.0).unwrap();
        let sol = solve_relaxation(&build_relaxation(&prob, ConeKind::Sdp, Some(&pen)).unwrap(), &SolverSettings::default()).unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-5);
        assert!(sol.lambda.amax() < 1e-5);
    }

    #[test]
    fn eta_search_from_outside() {
        let s = eta_search(&scalar(), ConeKind::Sdp, &DVector::from_element(1, 2.0), &EtaSearchOptions::default(), &SolverSettings::default())
            .unwrap();
        assert!(s.exact);
        assert_eq!(s.steps.len(), 1);
        assert!((s.solution.x[0] - 1.0).abs() < 1e-5);
    }
}
