//! Constraint qualifications: MFCQ at feasible points and the generalized
//! margin `s(x) = max_{‖b‖=1} λ_min(−Σₖ bₖ(Kₖ + δₖ(x)))`.

use bmirelax_conic::{solve, svec, ConeBlock, ConeBlockSpec, ConicProblem, SolverSettings, SolverStatus};
use nalgebra::{DMatrix, DVector};

use super::MatrixPencil;
use crate::error::{BmiError, Result};
use crate::linalg::{self, min_eigenvalue};

/// Threshold on the MFCQ margin below which the qualification is reported as failing.
pub const MFCQ_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GMfcq {
    /// `s(x)`. Positive values are attained exactly at `b`; nonpositive
    /// values come from a local search and are best-effort.
    pub value: f64,
    /// Unit direction.
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mfcq {
    pub holds: bool,
    /// `λ_min(−p(x, xxᵀ) − Σₖ bₖ(Kₖ + δₖ(x)))` at the witness.
    pub margin: f64,
    pub b: DVector<f64>,
}

/// `max t` s.t. `offset − Σₖ bₖMₖ − tI ⪰ 0`, `‖b‖₂ ≤ 1`, with variables `(b, t)`.
fn max_margin(offset: &DMatrix<f64>, mats: &[DMatrix<f64>], settings: &SolverSettings) -> Result<DVector<f64>> {
    let n = mats.len();
    let m = offset.nrows();
    let sv = svec_len(m);
    let rows = sv + 1 + n;
    let mut a = DMatrix::zeros(rows, n + 1);
    let mut rhs = DVector::zeros(rows);
    for (k, mk) in mats.iter().enumerate() {
        a.view_mut((0, k), (sv, 1)).copy_from_slice(&svec(mk));
    }
    a.view_mut((0, n), (sv, 1)).copy_from_slice(&svec(&DMatrix::identity(m, m)));
    rhs.rows_mut(0, sv).copy_from_slice(&svec(offset));
    rhs[sv] = 1.0;
    for k in 0..n {
        a[(sv + 1 + k, k)] = -1.0;
    }
    let mut c = DVector::zeros(n + 1);
    c[n] = -1.0;
    let cones = ConeBlockSpec::new(vec![ConeBlock::Psd(m), ConeBlock::Soc(n + 1)])?;
    let problem = ConicProblem::new(a, rhs, c, cones)?;
    let result = solve(&problem, settings)?;
    match result.status {
        SolverStatus::Optimal | SolverStatus::Inaccurate => Ok(result.z.rows(0, n).into_owned()),
        other => Err(BmiError::SolveFailed {
            status: other.as_str().into(),
            context: format!(
                "constraint-qualification program (primal residual {:.2e}, dual residual {:.2e})",
                result.primal_residual, result.dual_residual
            ),
        }),
    }
}

fn svec_len(m: usize) -> usize {
    m * (m + 1) / 2
}

fn combination(mats: &[DMatrix<f64>], b: &DVector<f64>) -> DMatrix<f64> {
    let m = mats[0].nrows();
    let mut out = DMatrix::zeros(m, m);
    for (mk, bk) in mats.iter().zip(b.iter()) {
        out += mk * *bk;
    }
    out
}

fn unit_or_first(b: DVector<f64>) -> DVector<f64> {
    let nb = b.norm();
    if nb > 1e-12 {
        b / nb
    } else {
        let mut e = DVector::zeros(b.len());
        e[0] = 1.0;
        e
    }
}

/// `λ_min(offset − Σ bₖMₖ)` and a supergradient in `b`.
fn margin_and_supergradient(offset: &DMatrix<f64>, mats: &[DMatrix<f64>], b: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let a = offset - combination(mats, b);
    let (vals, vecs) = linalg::sorted_eigen(&a)?;
    let v = &vecs[0];
    let grad = DVector::from_iterator(mats.len(), mats.iter().map(|mk| -v.dot(&(mk * v))));
    Ok((vals[0], grad))
}

/// Maximizes the concave `b ↦ λ_min(offset − Σ bₖMₖ)` on the unit sphere by
/// projected supergradient ascent from several starts.
fn sphere_search(offset: &DMatrix<f64>, mats: &[DMatrix<f64>], hint: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let n = mats.len();
    let mut starts = vec![hint.clone()];
    for k in 0..n {
        for sign in [1.0, -1.0] {
            let mut e = DVector::zeros(n);
            e[k] = sign;
            starts.push(e);
        }
    }
    let mut best = (f64::NEG_INFINITY, starts[0].clone());
    for start in starts {
        let mut b = start;
        let (mut val, _) = margin_and_supergradient(offset, mats, &b)?;
        if val > best.0 {
            best = (val, b.clone());
        }
        if n == 1 {
            continue;
        }
        let mut step = 0.5;
        for _ in 0..400 {
            let (_, g) = margin_and_supergradient(offset, mats, &b)?;
            let tangent = &g - &b * g.dot(&b);
            let tn = tangent.norm();
            if tn < 1e-14 {
                break;
            }
            let cand = unit_or_first(&b + tangent * (step / tn));
            let (cv, _) = margin_and_supergradient(offset, mats, &cand)?;
            if cv > val {
                b = cand;
                val = cv;
            } else {
                step *= 0.5;
                if step < 1e-12 {
                    break;
                }
            }
        }
        if val > best.0 {
            best = (val, b);
        }
    }
    Ok(best)
}

impl MatrixPencil {
    fn gradient_blocks(&self, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        (0..self.n()).map(|k| self.gradient_block(x, k)).collect()
    }

    /// The G-MFCQ margin `s(x)` and its maximizing unit direction.
    pub fn g_mfcq_s(&self, x: &DVector<f64>, settings: &SolverSettings) -> Result<GMfcq> {
        let mats = self.gradient_blocks(x)?;
        let zero = DMatrix::zeros(self.m(), self.m());
        if mats.iter().all(|mk| mk.iter().all(|v| *v == 0.0)) {
            return Ok(GMfcq { value: 0.0, b: unit_or_first(DVector::zeros(self.n())) });
        }
        let b = unit_or_first(max_margin(&zero, &mats, settings)?);
        let (direct, _) = margin_and_supergradient(&zero, &mats, &b)?;
        if direct > 0.0 {
            return Ok(GMfcq { value: direct, b });
        }
        let (value, b) = sphere_search(&zero, &mats, &b)?;
        Ok(GMfcq { value, b })
    }

    /// Checks MFCQ at a feasible `x`: some `‖b‖ ≤ 1` makes
    /// `p(x, xxᵀ) + Σₖ bₖ(Kₖ + δₖ(x)) ≺ 0`.
    pub fn mfcq_check(&self, x: &DVector<f64>, settings: &SolverSettings) -> Result<Mfcq> {
        let lam = self.bmi_max_eigenvalue(x)?;
        if lam > 1e-8 * (1.0 + self.data_norm()) {
            return Err(BmiError::Input(format!(
                "mfcq_check needs a feasible point, λ_max(p(x, xxᵀ)) = {lam:.3e}"
            )));
        }
        self.mfcq_margin(x, settings)
    }

    /// The MFCQ program without the feasibility precondition, for points that
    /// are feasible only up to solver accuracy.
    pub fn mfcq_margin(&self, x: &DVector<f64>, settings: &SolverSettings) -> Result<Mfcq> {
        let offset = -self.eval_bilinear(x)?;
        let mats = self.gradient_blocks(x)?;
        let b = max_margin(&offset, &mats, settings)?;
        let nb = b.norm();
        let b = if nb > 1.0 { b / nb } else { b };
        let mut margin = min_eigenvalue(&(&offset - combination(&mats, &b)))?;
        let mut best_b = b;
        // the solver iterate may sit just inside the boundary; zero is always admissible
        let at_zero = min_eigenvalue(&offset)?;
        if at_zero > margin {
            margin = at_zero;
            best_b = DVector::zeros(self.n());
        }
        Ok(Mfcq { holds: margin > MFCQ_TOL, margin, b: best_b })
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::{m1, unit_interval};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn settings() -> SolverSettings {
        SolverSettings { eps_abs: 1e-9, eps_rel: 1e-9, ..SolverSettings::default() }
    }

    #[test]
    fn scalar_margin() {
        let p = MatrixPencil::new(m1(0.0), vec![m1(-1.0)], [((0, 0), m1(0.0))]).unwrap();
        let g = p.g_mfcq_s(&DVector::from_element(1, 0.3), &settings()).unwrap();
        assert!((g.value - 1.0).abs() < 1e-12);
        assert_eq!(g.b[0], 1.0);
    }

    #[test]
    fn zero_data_gives_zero_margin() {
        let z = DMatrix::zeros(2, 2);
        let p = MatrixPencil::new(z.clone(), vec![z.clone(), z.clone()], [((0, 1), z)]).unwrap();
        let g = p.g_mfcq_s(&DVector::from_vec(vec![0.5, -1.0]), &settings()).unwrap();
        assert_eq!(g.value, 0.0);
        assert!((g.b.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn margin_matches_sphere_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let sym = |rng: &mut ChaCha8Rng| linalg::symmetrize(&DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)));
        for _ in 0..6 {
            let k = vec![sym(&mut rng), sym(&mut rng)];
            let l = vec![((0, 0), sym(&mut rng)), ((0, 1), sym(&mut rng)), ((1, 1), sym(&mut rng))];
            let p = MatrixPencil::new(sym(&mut rng), k, l).unwrap();
            let x = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let g = p.g_mfcq_s(&x, &settings()).unwrap();
            let mats: Vec<_> = (0..2).map(|k| p.gradient_block(&x, k).unwrap()).collect();
            let mut sampled = f64::NEG_INFINITY;
            for _ in 0..10_000 {
                let b = linalg::random_unit_vector(&mut rng, 2);
                let a = -(&mats[0] * b[0] + &mats[1] * b[1]);
                sampled = sampled.max(min_eigenvalue(&a).unwrap());
            }
            assert!((g.value - sampled).abs() < 2e-2, "{} vs {}", g.value, sampled);
            assert!((g.b.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn translation_invariant_without_bilinear_terms() {
        let k = vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -2.0]), DMatrix::identity(2, 2)];
        let p = MatrixPencil::new(DMatrix::zeros(2, 2), k, []).unwrap();
        let a = p.g_mfcq_s(&DVector::from_vec(vec![0.0, 0.0]), &settings()).unwrap();
        let b = p.g_mfcq_s(&DVector::from_vec(vec![3.0, -7.0]), &settings()).unwrap();
        assert!((a.value - b.value).abs() < 1e-9);
    }

    #[test]
    fn mfcq_examples() {
        let p = unit_interval();
        let inner = p.mfcq_check(&DVector::from_element(1, 0.0), &settings()).unwrap();
        assert!(inner.holds);
        let boundary = p.mfcq_check(&DVector::from_element(1, 1.0), &settings()).unwrap();
        assert!(boundary.holds);
        assert!(boundary.b[0] < 0.0);
        let z = m1(0.0);
        let flat = MatrixPencil::new(z.clone(), vec![z.clone()], [((0, 0), z)]).unwrap();
        assert!(!flat.mfcq_check(&DVector::from_element(1, 4.0), &settings()).unwrap().holds);
        assert!(p.mfcq_check(&DVector::from_element(1, 2.0), &settings()).is_err());
    }
}
