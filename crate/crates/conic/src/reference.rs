//! Slow dense log-barrier method used as an independent reference.
//!
//! Shares nothing with the splitting solver except the cone descriptions.
//! It needs a strictly feasible starting point and is meant for problems with
//! a few dozen variables.

use nalgebra::{DMatrix, DVector};

use crate::cone::ConeBlock;
use crate::error::{ConicError, Result};
use crate::solver::ConicProblem;

const MAX_NEWTON: usize = 200;
const MAX_OUTER: usize = 80;
const BARRIER_GROWTH: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub z: DVector<f64>,
    pub objective: f64,
    /// Barrier parameter sum ν; the duality gap at exit is about `ν / t`.
    pub nu: f64,
    pub newton_steps: usize,
}

fn packed_len(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Lower triangle, column by column, off-diagonals times √2.
fn unpack(v: &[f64], k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    let mut idx = 0;
    for j in 0..k {
        for i in j..k {
            let x = if i == j { v[idx] } else { v[idx] / std::f64::consts::SQRT_2 };
            m[(i, j)] = x;
            m[(j, i)] = x;
            idx += 1;
        }
    }
    m
}

fn pack(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows();
    let mut out = Vec::with_capacity(packed_len(k));
    for j in 0..k {
        for i in j..k {
            out.push(if i == j { m[(i, j)] } else { m[(i, j)] * std::f64::consts::SQRT_2 });
        }
    }
    out
}

struct Barrier {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

/// `−log(uᵀQu)` for a diagonal-plus-swap quadratic form given as a matrix.
fn quadratic_barrier(u: &DVector<f64>, q: &DMatrix<f64>) -> Option<Barrier> {
    let qu = q * u;
    let val = u.dot(&qu);
    if !(val > 0.0) {
        return None;
    }
    Some(Barrier { value: -val.ln(), grad: &qu * (-2.0 / val), hess: q * (-2.0 / val) + &qu * qu.transpose() * (4.0 / (val * val)) })
}

fn block_barrier(block: &ConeBlock, s: &[f64]) -> Option<Barrier> {
    let d = s.len();
    let u = DVector::from_column_slice(s);
    match *block {
        ConeBlock::Zero(_) => unreachable!("equality rows carry no barrier"),
        ConeBlock::Nonneg(_) => {
            if s.iter().any(|&x| !(x > 0.0)) {
                return None;
            }
            Some(Barrier {
                value: -s.iter().map(|x| x.ln()).sum::<f64>(),
                grad: u.map(|x| -1.0 / x),
                hess: DMatrix::from_diagonal(&u.map(|x| 1.0 / (x * x))),
            })
        }
        ConeBlock::Soc(_) => {
            if !(s[0] > 0.0) {
                return None;
            }
            let mut q = -DMatrix::identity(d, d);
            q[(0, 0)] = 1.0;
            quadratic_barrier(&u, &q)
        }
        ConeBlock::Rsoc(_) => {
            if !(s[0] > 0.0 && s[1] > 0.0) {
                return None;
            }
            let mut q = -DMatrix::identity(d, d);
            q[(0, 0)] = 0.0;
            q[(1, 1)] = 0.0;
            q[(0, 1)] = 1.0;
            q[(1, 0)] = 1.0;
            quadratic_barrier(&u, &q)
        }
        ConeBlock::Psd(k) => {
            let x = unpack(s, k);
            let chol = x.clone().cholesky()?;
            let value = -2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let inv = chol.inverse();
            let grad = DVector::from_vec(pack(&inv)).map(|v| -v);
            let mut hess = DMatrix::zeros(d, d);
            let mut e = vec![0.0; d];
            for c in 0..d {
                e[c] = 1.0;
                let col = pack(&(&inv * unpack(&e, k) * &inv));
                hess.column_mut(c).copy_from_slice(&col);
                e[c] = 0.0;
            }
            Some(Barrier { value, grad, hess })
        }
    }
}

fn nu_of(block: &ConeBlock) -> f64 {
    match *block {
        ConeBlock::Zero(_) => 0.0,
        ConeBlock::Nonneg(d) => d as f64,
        ConeBlock::Soc(_) | ConeBlock::Rsoc(_) => 2.0,
        ConeBlock::Psd(k) => k as f64,
    }
}

struct Layout {
    eq_rows: Vec<usize>,
    blocks: Vec<(ConeBlock, std::ops::Range<usize>)>,
}

impl Layout {
    fn new(problem: &ConicProblem) -> Self {
        let mut eq_rows = Vec::new();
        let mut blocks = Vec::new();
        let mut at = 0;
        for b in problem.cones.blocks() {
            let d = match *b {
                ConeBlock::Psd(k) => packed_len(k),
                ConeBlock::Zero(d) | ConeBlock::Nonneg(d) | ConeBlock::Soc(d) | ConeBlock::Rsoc(d) => d,
            };
            if let ConeBlock::Zero(_) = b {
                eq_rows.extend(at..at + d);
            } else {
                blocks.push((*b, at..at + d));
            }
            at += d;
        }
        Self { eq_rows, blocks }
    }

    /// Barrier of `s = b − Az` with its gradient and Hessian in `z`.
    fn eval(&self, problem: &ConicProblem, z: &DVector<f64>) -> Option<Barrier> {
        let s = &problem.b - &problem.a * z;
        let n = z.len();
        let mut out = Barrier { value: 0.0, grad: DVector::zeros(n), hess: DMatrix::zeros(n, n) };
        for (block, r) in &self.blocks {
            let bar = block_barrier(block, &s.as_slice()[r.clone()])?;
            let a = problem.a.rows(r.start, r.len());
            out.value += bar.value;
            out.grad -= a.transpose() * &bar.grad;
            out.hess += a.transpose() * &bar.hess * a;
        }
        Some(out)
    }
}

/// Minimizes `cᵀz` subject to `b − Az ∈ K` from a strictly feasible `z0`,
/// stopping once the barrier duality-gap bound `ν/t` drops below `gap_tol`.
pub fn barrier_solve(problem: &ConicProblem, z0: &DVector<f64>, gap_tol: f64) -> Result<ReferenceSolution> {
    let n = problem.num_vars();
    if z0.len() != n {
        return Err(ConicError::Dimension(format!("start has {} entries, problem has {n} variables", z0.len())));
    }
    let layout = Layout::new(problem);
    let a_eq = problem.a.select_rows(layout.eq_rows.iter());
    let b_eq = DVector::from_iterator(layout.eq_rows.len(), layout.eq_rows.iter().map(|&r| problem.b[r]));
    let eq_res = (&a_eq * z0 - &b_eq).amax();
    if eq_res > 1e-8 * (1.0 + b_eq.amax()) {
        return Err(ConicError::Dimension(format!("start violates equality rows by {eq_res:e}")));
    }
    if layout.eval(problem, z0).is_none() {
        return Err(ConicError::Dimension("start is not strictly inside the cone".into()));
    }
    let nu: f64 = layout.blocks.iter().map(|(b, _)| nu_of(b)).sum();
    let p = layout.eq_rows.len();
    let mut z = z0.clone();
    let mut t = 1.0;
    let mut steps = 0;
    for _ in 0..MAX_OUTER {
        for _ in 0..MAX_NEWTON {
            let bar = layout.eval(problem, &z).expect("iterate stays interior");
            let f = t * problem.c.dot(&z) + bar.value;
            let g = &problem.c * t + &bar.grad;
            let mut kkt = DMatrix::zeros(n + p, n + p);
            kkt.view_mut((0, 0), (n, n)).copy_from(&bar.hess);
            kkt.view_mut((n, 0), (p, n)).copy_from(&a_eq);
            kkt.view_mut((0, n), (n, p)).copy_from(&a_eq.transpose());
            let mut rhs = DVector::zeros(n + p);
            rhs.rows_mut(0, n).copy_from(&(-&g));
            let sol = kkt.clone().lu().solve(&rhs).or_else(|| {
                let reg = 1e-12 * (1.0 + bar.hess.amax());
                for i in 0..n {
                    kkt[(i, i)] += reg;
                }
                kkt.lu().solve(&rhs)
            });
            let Some(sol) = sol else {
                return Err(ConicError::Dimension("singular Newton system".into()));
            };
            let dz = sol.rows(0, n).into_owned();
            let decrement = -g.dot(&dz);
            steps += 1;
            if decrement <= 1e-12 {
                break;
            }
            let mut alpha = 1.0;
            loop {
                let cand = &z + &dz * alpha;
                if let Some(b) = layout.eval(problem, &cand) {
                    if t * problem.c.dot(&cand) + b.value <= f - 0.25 * alpha * decrement {
                        z = cand;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-14 {
                    break;
                }
            }
            if alpha < 1e-14 {
                break;
            }
        }
        if nu / t < gap_tol {
            break;
        }
        t *= BARRIER_GROWTH;
    }
    Ok(ReferenceSolution { objective: problem.c.dot(&z), z, nu, newton_steps: steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{smat, svec, ConeBlockSpec};

    #[test]
    fn packing_matches_solver_convention() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        assert_eq!(pack(&m), svec(&m));
        assert_eq!(unpack(&svec(&m), 3), smat(&svec(&m), 3));
    }

    #[test]
    fn box_lp() {
        // min -z0 - z1 s.t. 0 <= z <= 1
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
        let p = ConicProblem::new(
            a,
            DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]),
            DVector::from_vec(vec![-1.0, -1.0]),
            ConeBlockSpec::new(vec![ConeBlock::Nonneg(4)]).unwrap(),
        )
        .unwrap();
        let r = barrier_solve(&p, &DVector::from_vec(vec![0.5, 0.5]), 1e-10).unwrap();
        assert!((r.objective + 2.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_exterior_start() {
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let p = ConicProblem::new(a, DVector::from_vec(vec![1.0]), DVector::from_vec(vec![-1.0]), ConeBlockSpec::new(vec![ConeBlock::Nonneg(1)]).unwrap()).unwrap();
        assert!(barrier_solve(&p, &DVector::from_vec(vec![2.0]), 1e-8).is_err());
    }
}
