//! Brute-force ground truth for tiny instances (`n ≤ 3`, `m ≤ 3`).
//!
//! Nothing here calls into the rest of the library's numerics: the pencil is
//! re-evaluated with plain loops and eigenvalues come from the closed-form
//! roots of the characteristic polynomial, so the oracle stays an
//! independent witness.

use nalgebra::DVector;

use crate::error::{BmiError, Result};
use crate::pencil::{BmiProblem, MatrixPencil, NormOrder};

pub const MAX_NODES: usize = 10_000_000;
const MAX_DIM: usize = 3;

type Small = [[f64; MAX_DIM]; MAX_DIM];

/// An axis-aligned box `lower ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl GridBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(BmiError::Input("box bounds must be nonempty and of equal length".into()));
        }
        for (k, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(BmiError::Input(format!("box axis {k}: need finite lower <= upper, got [{l}, {u}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `center ± radius`.
    pub fn around(center: &[f64], radius: f64) -> Result<Self> {
        Self::new(center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }
}

/// `λ_max` of a symmetric matrix of order ≤ 3 from its characteristic polynomial.
pub fn char_poly_max_eigenvalue(a: &Small, m: usize) -> f64 {
    match m {
        1 => a[0][0],
        2 => {
            let mean = 0.5 * (a[0][0] + a[1][1]);
            let half = 0.5 * (a[0][0] - a[1][1]);
            mean + (half * half + a[0][1] * a[0][1]).sqrt()
        }
        _ => {
            // roots of det(λI − A) via the trigonometric form of the cubic
            let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
            let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
            if off == 0.0 {
                return a[0][0].max(a[1][1]).max(a[2][2]);
            }
            let d = [a[0][0] - q, a[1][1] - q, a[2][2] - q];
            let p = ((d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + 2.0 * off) / 6.0).sqrt();
            let b = |i: usize, j: usize| if i == j { d[i] / p } else { a[i][j] / p };
            let det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
                + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
            let r = (det / 2.0).clamp(-1.0, 1.0);
            q + 2.0 * p * (r.acos() / 3.0).cos()
        }
    }
}

/// Dense copy of the pencil data in fixed-size arrays.
struct RawPencil {
    n: usize,
    m: usize,
    f0: Small,
    k: Vec<Small>,
    /// Row-major over all ordered pairs `(i, j)`.
    l: Vec<Small>,
}

fn raw(a: &nalgebra::DMatrix<f64>) -> Small {
    let mut out = [[0.0; MAX_DIM]; MAX_DIM];
    for (r, row) in out.iter_mut().enumerate().take(a.nrows()) {
        for (s, e) in row.iter_mut().enumerate().take(a.ncols()) {
            *e = a[(r, s)];
        }
    }
    out
}

impl RawPencil {
    fn new(p: &MatrixPencil) -> Result<Self> {
        if p.m() > MAX_DIM {
            return Err(BmiError::Input(format!("oracle supports m <= {MAX_DIM}, got m = {}", p.m())));
        }
        let n = p.n();
        let zero = [[0.0; MAX_DIM]; MAX_DIM];
        let mut l = vec![zero; n * n];
        for i in 0..n {
            for j in 0..n {
                if let Some(lij) = p.l(i, j) {
                    l[i * n + j] = raw(lij);
                }
            }
        }
        Ok(Self { n, m: p.m(), f0: raw(p.f0()), k: p.ks().iter().map(raw).collect(), l })
    }

    fn max_eigenvalue(&self, x: &[f64]) -> f64 {
        let mut a = self.f0;
        for r in 0..self.m {
            for s in 0..self.m {
                let mut v = a[r][s];
                for k in 0..self.n {
                    v += x[k] * self.k[k][r][s];
                }
                for i in 0..self.n {
                    for j in 0..self.n {
                        v += x[i] * x[j] * self.l[i * self.n + j][r][s];
                    }
                }
                a[r][s] = v;
            }
        }
        char_poly_max_eigenvalue(&a, self.m)
    }
}

fn axis_nodes(lo: f64, hi: f64, h: f64) -> usize {
    ((hi - lo) / h * (1.0 + 1e-12)).floor() as usize + 1
}

/// Visits every grid node of the box in lexicographic order (first axis slowest).
fn for_each_node(gbox: &GridBox, h: f64, mut f: impl FnMut(&[f64])) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(BmiError::Input(format!("resolution must be positive, got {h}")));
    }
    let n = gbox.dim();
    let counts: Vec<usize> = (0..n).map(|k| axis_nodes(gbox.lower[k], gbox.upper[k], h)).collect();
    let total = counts.iter().try_fold(1usize, |acc, c| acc.checked_mul(*c)).unwrap_or(usize::MAX);
    if total > MAX_NODES {
        return Err(BmiError::Budget(format!("grid has {total} nodes, cap is {MAX_NODES}")));
    }
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    for _ in 0..total {
        for k in 0..n {
            x[k] = gbox.lower[k] + h * idx[k] as f64;
        }
        f(&x);
        for k in (0..n).rev() {
            idx[k] += 1;
            if idx[k] < counts[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(())
}

fn check_dims(problem: &BmiProblem, gbox: &GridBox) -> Result<RawPencil> {
    if gbox.dim() != problem.n() {
        return Err(BmiError::Input(format!("box has dimension {}, problem has n = {}", gbox.dim(), problem.n())));
    }
    RawPencil::new(&problem.pencil)
}

/// Grid nodes `x` of the box with `λ_max(p(x, xxᵀ)) ≤ tol`.
pub fn grid_feasible_set(problem: &BmiProblem, gbox: &GridBox, resolution: f64, tol: f64) -> Result<Vec<DVector<f64>>> {
    let raw = check_dims(problem, gbox)?;
    let mut out = Vec::new();
    for_each_node(gbox, resolution, |x| {
        if raw.max_eigenvalue(x) <= tol {
            out.push(DVector::from_column_slice(x));
        }
    })?;
    Ok(out)
}

/// Minimizer of `cᵀx` over feasible grid nodes (first in grid order on ties).
pub fn grid_optimum(problem: &BmiProblem, gbox: &GridBox, resolution: f64, tol: f64) -> Result<Option<(DVector<f64>, f64)>> {
    let raw = check_dims(problem, gbox)?;
    let c = problem.c.as_slice();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for_each_node(gbox, resolution, |x| {
        let v: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
        if best.as_ref().is_none_or(|b| v < b.1) && raw.max_eigenvalue(x) <= tol {
            best = Some((x.to_vec(), v));
        }
    })?;
    Ok(best.map(|(x, v)| (DVector::from_vec(x), v)))
}

/// Distance from `x_check` to the nearest feasible node of the box.
pub fn grid_distance(problem: &BmiProblem, x_check: &[f64], gbox: &GridBox, resolution: f64, tol: f64) -> Result<Option<f64>> {
    let raw = check_dims(problem, gbox)?;
    let mut best: Option<f64> = None;
    for_each_node(gbox, resolution, |x| {
        let d = x.iter().zip(x_check).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if best.is_none_or(|b| d < b) && raw.max_eigenvalue(x) <= tol {
            best = Some(d);
        }
    })?;
    Ok(best)
}

/// `lower ≤ ‖p‖_q ≤ upper`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBracket {
    pub lower: f64,
    pub upper: f64,
}

/// Sweeps the unit sphere (a half circle for `m = 2`, the faces of the cube
/// for `m = 3`) and widens the best sample by a Lipschitz bound.
pub fn sphere_pencil_norm(pencil: &MatrixPencil, q: NormOrder, resolution: f64) -> Result<NormBracket> {
    let raw = RawPencil::new(pencil)?;
    if !(resolution > 0.0) {
        return Err(BmiError::Input(format!("resolution must be positive, got {resolution}")));
    }
    let m = raw.m;
    let value = |u: &[f64]| -> f64 {
        let mut acc = 0.0;
        for l in &raw.l {
            let mut v = 0.0;
            for r in 0..m {
                for s in 0..m {
                    v += u[r] * l[r][s] * u[s];
                }
            }
            acc += match q {
                NormOrder::One => v.abs(),
                NormOrder::Two => v * v,
            };
        }
        match q {
            NormOrder::One => acc,
            NormOrder::Two => acc.sqrt(),
        }
    };
    // |v(u) − v(w)| ≤ 2‖L‖_F‖u − w‖ entrywise
    let fro: Vec<f64> = raw.l.iter().map(|l| l.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let lip = 2.0
        * match q {
            NormOrder::One => fro.iter().sum::<f64>(),
            NormOrder::Two => fro.iter().map(|x| x * x).sum::<f64>().sqrt(),
        };
    match m {
        1 => {
            let v = value(&[1.0]);
            Ok(NormBracket { lower: v, upper: v })
        }
        2 => {
            let steps = (std::f64::consts::PI / resolution).ceil() as usize;
            let dt = std::f64::consts::PI / steps as f64;
            let best = (0..steps)
                .map(|k| {
                    let t = dt * k as f64;
                    value(&[t.cos(), t.sin()])
                })
                .fold(0.0, f64::max);
            // chord to the nearest sample is at most dt/2
            Ok(NormBracket { lower: best, upper: best + lip * dt / 2.0 })
        }
        _ => {
            let per_axis = (2.0 / resolution).ceil() as usize + 1;
            if 3 * per_axis * per_axis > MAX_NODES {
                return Err(BmiError::Budget(format!("sphere sweep needs {} samples", 3 * per_axis * per_axis)));
            }
            let h = 2.0 / (per_axis - 1) as f64;
            let mut best: f64 = 0.0;
            for face in 0..3 {
                for a in 0..per_axis {
                    for b in 0..per_axis {
                        let (s, t) = (-1.0 + h * a as f64, -1.0 + h * b as f64);
                        let y = match face {
                            0 => [1.0, s, t],
                            1 => [s, 1.0, t],
                            _ => [s, t, 1.0],
                        };
                        let ny = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
                        best = best.max(value(&[y[0] / ny, y[1] / ny, y[2] / ny]));
                    }
                }
            }
            // normalizing points outside the unit ball is 1-Lipschitz, so the
            // face covering radius h/√2 bounds the distance on the sphere
            Ok(NormBracket { lower: best, upper: best + lip * h / std::f64::consts::SQRT_2 })
        }
    }
}
