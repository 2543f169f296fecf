//! Douglas–Rachford splitting on the homogeneous self-dual embedding of
//!
//! ```text
//!     minimize  cᵀz   subject to  Az + s = b,  s ∈ K
//! ```
//!
//! The iterate `w = (x, y, τ)` alternates a linear solve with the
//! skew-symmetric embedding matrix and a projection onto `Rⁿ × K* × R₊`.
//! Optimal points are recovered as `(x, y, s) / τ`; when `τ → 0` the
//! iterates converge to a certificate of primal or dual infeasibility.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::cone::{smat, ConeBlock, ConeBlockSpec};
use crate::error::{ConicError, Result};
use crate::scaling::{equilibrate, Equilibration};

/// Weight of the `x` block in the splitting metric.
const RHO_X: f64 = 1e-6;
/// Weight of the `τ` coordinate in the splitting metric.
const TAU_WEIGHT: f64 = 1.0;
/// Equality rows get a much stiffer metric than conic rows.
const ZERO_CONE_FACTOR: f64 = 1e-3;
const MIN_ADAPT_INTERVAL: usize = 100;
const ADAPT_RATIO: f64 = 10.0;
const RUIZ_ITERS: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Tolerance on `‖Aᵀy‖∞` (resp. `‖Ax + s‖∞`) of a normalized infeasibility
    /// certificate.
    pub eps_infeas: f64,
    pub max_iter: usize,
    /// Relaxation factor α in (0, 2).
    pub over_relaxation: f64,
    /// Initial step scale; rescaled when the residual ratio drifts.
    pub step_rho: f64,
    pub adaptive_rho: bool,
    pub equilibrate: bool,
    /// Residuals are evaluated every `check_every` iterations.
    pub check_every: usize,
    /// Keep the combined residual of every check in [`SolverResult::history`].
    pub record_history: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-7,
            eps_rel: 1e-7,
            eps_infeas: 1e-7,
            max_iter: 200_000,
            over_relaxation: 1.5,
            step_rho: 1.0,
            adaptive_rho: true,
            equilibrate: true,
            check_every: 5,
            record_history: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps_abs", self.eps_abs),
            ("eps_rel", self.eps_rel),
            ("eps_infeas", self.eps_infeas),
            ("step_rho", self.step_rho),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConicError::Settings(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.over_relaxation > 0.0 && self.over_relaxation < 2.0) {
            return Err(ConicError::Settings(format!(
                "over_relaxation must lie in (0, 2), got {}",
                self.over_relaxation
            )));
        }
        if self.max_iter == 0 || self.check_every == 0 {
            return Err(ConicError::Settings("max_iter and check_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverStatus {
    Optimal,
    /// Iteration budget exhausted; the best iterate seen is returned.
    Inaccurate,
    /// `y` holds a certificate: `Aᵀy ≈ 0`, `bᵀy = −1`, `y ∈ K*`.
    Infeasible,
    /// `z, s` hold a certificate: `Az + s ≈ 0`, `cᵀz = −1`, `s ∈ K`.
    Unbounded,
    Failed,
}

impl SolverStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::Inaccurate => "inaccurate",
            SolverStatus::Infeasible => "infeasible",
            SolverStatus::Unbounded => "unbounded",
            SolverStatus::Failed => "failed",
        }
    }
}

/// A conic program in standard form with dense data.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub cones: ConeBlockSpec,
}

impl ConicProblem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>, cones: ConeBlockSpec) -> Result<Self> {
        let (m, n) = a.shape();
        if b.len() != m {
            return Err(ConicError::Dimension(format!("A has {m} rows but b has {}", b.len())));
        }
        if c.len() != n {
            return Err(ConicError::Dimension(format!("A has {n} columns but c has {}", c.len())));
        }
        if cones.total_dim() != m {
            return Err(ConicError::Dimension(format!(
                "cone dimensions sum to {} but A has {m} rows",
                cones.total_dim()
            )));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|x| !x.is_finite()) {
            return Err(ConicError::Dimension("problem data contains non-finite values".into()));
        }
        Ok(Self { a, b, c, cones })
    }

    pub fn num_vars(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }
}

/// Dual variable of one cone block.
#[derive(Debug, Clone, PartialEq)]
pub enum DualBlock {
    Vector(Vec<f64>),
    /// Symmetric matrix unpacked from a `Psd` block.
    Matrix(DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub z: DVector<f64>,
    pub s: DVector<f64>,
    pub y: DVector<f64>,
    pub status: SolverStatus,
    pub iterations: usize,
    /// `‖Az + s − b‖∞`
    pub primal_residual: f64,
    /// `‖Aᵀy + c‖∞`
    pub dual_residual: f64,
    /// `|cᵀz + bᵀy|`
    pub gap: f64,
    pub objective: f64,
    pub rho_updates: usize,
    pub history: Vec<f64>,
}

impl SolverResult {
    /// Dual variable of block `id`, reshaped to a symmetric matrix for PSD blocks.
    pub fn dual_block(&self, cones: &ConeBlockSpec, id: usize) -> Result<DualBlock> {
        if !matches!(self.status, SolverStatus::Optimal | SolverStatus::Inaccurate) {
            return Err(ConicError::NoDual(self.status.as_str().into()));
        }
        let range = cones.range_of(id)?;
        let part = &self.y.as_slice()[range];
        Ok(match cones.blocks()[id] {
            ConeBlock::Psd(k) => DualBlock::Matrix(smat(part, k)),
            _ => DualBlock::Vector(part.to_vec()),
        })
    }
}

/// Factorization of the quasi-definite system `[[ρₓI, Aᵀ], [A, −R]]` through
/// its positive definite Schur complement `ρₓI + AᵀR⁻¹A`.
struct KktSystem {
    a: DMatrix<f64>,
    at: DMatrix<f64>,
    r_y: DVector<f64>,
    reduced: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl KktSystem {
    fn new(a: &DMatrix<f64>, r_y: DVector<f64>) -> Option<Self> {
        let n = a.ncols();
        let at = a.transpose();
        let mut scaled = a.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row /= r_y[i];
        }
        let reduced = &at * scaled + DMatrix::identity(n, n) * RHO_X;
        let chol = Cholesky::new(reduced.clone())?;
        Some(Self {
            a: a.clone(),
            at,
            r_y,
            reduced,
            chol,
        })
    }

    /// Solves `ρₓx + Aᵀy = z1`, `Ax − Ry = z2`.
    fn solve(&self, z1: &DVector<f64>, z2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let rhs = z1 + &self.at * z2.component_div(&self.r_y);
        let mut x = self.chol.solve(&rhs);
        // one refinement sweep recovers digits lost to the small ρₓ
        let resid = &rhs - &self.reduced * &x;
        x += self.chol.solve(&resid);
        let y = (&self.a * &x - z2).component_div(&self.r_y);
        (x, y)
    }
}

struct Iterate {
    z: DVector<f64>,
    s: DVector<f64>,
    y: DVector<f64>,
    pres: f64,
    dres: f64,
    gap: f64,
    merit: f64,
}

/// Solves `min cᵀz s.t. Az + s = b, s ∈ K`.
pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> Result<SolverResult> {
    settings.validate()?;
    let (m, n) = problem.a.shape();
    let cones = &problem.cones;

    let mut a = problem.a.clone();
    let mut b = problem.b.clone();
    let mut c = problem.c.clone();
    let eq = if settings.equilibrate {
        equilibrate(&mut a, &mut b, &mut c, cones, RUIZ_ITERS)
    } else {
        Equilibration::identity(m, n)
    };

    let zero_rows: Vec<bool> = cones
        .blocks()
        .iter()
        .flat_map(|blk| std::iter::repeat_n(matches!(blk, ConeBlock::Zero(_)), blk.dim()))
        .collect();
    let metric = |scale: f64| {
        DVector::from_iterator(
            m,
            zero_rows
                .iter()
                .map(|&z| if z { ZERO_CONE_FACTOR / scale } else { 1.0 / scale }),
        )
    };

    let mut scale = settings.step_rho;
    let mut r_y = metric(scale);
    let mut kkt = match KktSystem::new(&a, r_y.clone()) {
        Some(k) => k,
        None => return Ok(failed(n, m, 0)),
    };
    let neg_b = -&b;
    let (mut gx, mut gy) = kkt.solve(&c, &neg_b);

    let alpha = settings.over_relaxation;
    let mut wx = DVector::zeros(n);
    let mut wy = DVector::zeros(m);
    let mut wt = 1.0;

    let mut best: Option<Iterate> = None;
    let mut history = Vec::new();
    let mut rho_updates = 0;
    let mut last_update = 0;

    for iter in 1..=settings.max_iter {
        // linear step
        let z1 = &wx * RHO_X;
        let z2 = -r_y.component_mul(&wy);
        let (px, py) = kkt.solve(&z1, &z2);
        let denom = TAU_WEIGHT + c.dot(&gx) + b.dot(&gy);
        let tau_t = (TAU_WEIGHT * wt + c.dot(&px) + b.dot(&py)) / denom;
        let xt = &px - &gx * tau_t;
        let yt = &py - &gy * tau_t;

        // projection onto Rⁿ × K* × R₊
        let ux = &xt * 2.0 - &wx;
        let mut uy = &yt * 2.0 - &wy;
        cones.project_dual(uy.as_mut_slice())?;
        let ut = (2.0 * tau_t - wt).max(0.0);
        let vy = r_y.component_mul(&(&uy + &wy - &yt * 2.0));
        let vt = TAU_WEIGHT * (ut + wt - 2.0 * tau_t);

        wx += (&ux - &xt) * alpha;
        wy += (&uy - &yt) * alpha;
        wt += alpha * (ut - tau_t);

        if !(wt.is_finite() && wx.iter().chain(wy.iter()).all(|v| v.is_finite())) {
            return Ok(failed(n, m, iter));
        }

        if iter % settings.check_every != 0 && iter != settings.max_iter {
            continue;
        }

        // certificates use the unnormalized directions
        if let Some(result) = infeasibility(problem, &eq, &ux, &uy, &vy, settings.eps_infeas, iter) {
            return Ok(result);
        }

        if ut <= 1e-14 * (1.0 + wx.norm() + wy.norm()) {
            continue;
        }
        let it = unscale(problem, &eq, &ux, &uy, &vy, ut, settings);
        if settings.record_history {
            history.push(it.merit);
        }
        let converged = it.merit <= 1.0;
        let (rel_p, rel_d) = relative_residuals(problem, &it);
        let improved = best.as_ref().is_none_or(|b| it.merit < b.merit);
        if improved {
            best = Some(it);
        }
        if converged {
            let it = best.take().expect("converged iterate recorded as best");
            return Ok(finish(problem, it, SolverStatus::Optimal, iter, rho_updates, history));
        }

        if settings.adaptive_rho && iter - last_update >= MIN_ADAPT_INTERVAL && rel_d > 0.0 {
            let ratio = rel_p / rel_d;
            if !(1.0 / ADAPT_RATIO..=ADAPT_RATIO).contains(&ratio) {
                let new_scale = (scale * ratio.sqrt()).clamp(1e-6, 1e6);
                let new_r = metric(new_scale);
                if let Some(new_kkt) = KktSystem::new(&a, new_r.clone()) {
                    // keep (u, v) fixed and re-express w in the new metric
                    wx = ux.clone();
                    wy = &uy + vy.component_div(&new_r);
                    wt = ut + vt / TAU_WEIGHT;
                    scale = new_scale;
                    r_y = new_r;
                    kkt = new_kkt;
                    let (g1, g2) = kkt.solve(&c, &neg_b);
                    gx = g1;
                    gy = g2;
                    rho_updates += 1;
                }
                last_update = iter;
            }
        }
    }

    Ok(match best {
        Some(it) => finish(
            problem,
            it,
            SolverStatus::Inaccurate,
            settings.max_iter,
            rho_updates,
            history,
        ),
        None => failed(n, m, settings.max_iter),
    })
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

fn unscale(
    problem: &ConicProblem,
    eq: &Equilibration,
    ux: &DVector<f64>,
    uy: &DVector<f64>,
    vy: &DVector<f64>,
    tau: f64,
    settings: &SolverSettings,
) -> Iterate {
    let z = eq.e.component_mul(ux) / (tau * eq.sigma_b);
    let s = vy.component_div(&eq.d) / (tau * eq.sigma_b);
    let y = eq.d.component_mul(uy) / (tau * eq.sigma_c);
    let az = &problem.a * &z;
    let aty = problem.a.tr_mul(&y);
    let pres = inf_norm(&(&az + &s - &problem.b));
    let dres = inf_norm(&(&aty + &problem.c));
    let cz = problem.c.dot(&z);
    let by = problem.b.dot(&y);
    let gap = (cz + by).abs();
    let tol_p = settings.eps_abs
        + settings.eps_rel * inf_norm(&az).max(inf_norm(&s)).max(inf_norm(&problem.b));
    let tol_d = settings.eps_abs + settings.eps_rel * inf_norm(&aty).max(inf_norm(&problem.c));
    let tol_g = settings.eps_abs + settings.eps_rel * cz.abs().max(by.abs());
    let merit = (pres / tol_p).max(dres / tol_d).max(gap / tol_g);
    Iterate {
        z,
        s,
        y,
        pres,
        dres,
        gap,
        merit,
    }
}

fn relative_residuals(problem: &ConicProblem, it: &Iterate) -> (f64, f64) {
    let az = &problem.a * &it.z;
    let aty = problem.a.tr_mul(&it.y);
    let sp = inf_norm(&az).max(inf_norm(&it.s)).max(inf_norm(&problem.b)).max(1e-12);
    let sd = inf_norm(&aty).max(inf_norm(&problem.c)).max(1e-12);
    (it.pres / sp, it.dres / sd)
}

fn infeasibility(
    problem: &ConicProblem,
    eq: &Equilibration,
    ux: &DVector<f64>,
    uy: &DVector<f64>,
    vy: &DVector<f64>,
    eps: f64,
    iter: usize,
) -> Option<SolverResult> {
    let (m, n) = problem.a.shape();
    let y_dir = eq.d.component_mul(uy);
    let by = problem.b.dot(&y_dir);
    if by < 0.0 {
        let y = y_dir / -by;
        let aty = problem.a.tr_mul(&y);
        if inf_norm(&aty) <= eps {
            return Some(SolverResult {
                z: DVector::from_element(n, f64::NAN),
                s: DVector::from_element(m, f64::NAN),
                y,
                status: SolverStatus::Infeasible,
                iterations: iter,
                primal_residual: f64::NAN,
                dual_residual: inf_norm(&aty),
                gap: f64::NAN,
                objective: f64::INFINITY,
                rho_updates: 0,
                history: Vec::new(),
            });
        }
    }
    let x_dir = eq.e.component_mul(ux);
    let cx = problem.c.dot(&x_dir);
    if cx < 0.0 {
        let z = x_dir / -cx;
        let s = vy.component_div(&eq.d) / -cx;
        let resid = inf_norm(&(&problem.a * &z + &s));
        if resid <= eps {
            return Some(SolverResult {
                z,
                s,
                y: DVector::from_element(m, f64::NAN),
                status: SolverStatus::Unbounded,
                iterations: iter,
                primal_residual: resid,
                dual_residual: f64::NAN,
                gap: f64::NAN,
                objective: f64::NEG_INFINITY,
                rho_updates: 0,
                history: Vec::new(),
            });
        }
    }
    None
}

fn finish(
    problem: &ConicProblem,
    it: Iterate,
    status: SolverStatus,
    iterations: usize,
    rho_updates: usize,
    history: Vec<f64>,
) -> SolverResult {
    let objective = problem.c.dot(&it.z);
    SolverResult {
        z: it.z,
        s: it.s,
        y: it.y,
        status,
        iterations,
        primal_residual: it.pres,
        dual_residual: it.dres,
        gap: it.gap,
        objective,
        rho_updates,
        history,
    }
}

fn failed(n: usize, m: usize, iterations: usize) -> SolverResult {
    SolverResult {
        z: DVector::from_element(n, f64::NAN),
        s: DVector::from_element(m, f64::NAN),
        y: DVector::from_element(m, f64::NAN),
        status: SolverStatus::Failed,
        iterations,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        gap: f64::NAN,
        objective: f64::NAN,
        rho_updates: 0,
        history: Vec::new(),
    }
}
