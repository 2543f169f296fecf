//! Random BMI instances shared by the integration tests.
#![allow(dead_code)]

use bmirelax::{BmiProblem, MatrixPencil};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gauss<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn sym<R: Rng>(rng: &mut R, m: usize, scale: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| gauss(rng));
    (&g + g.transpose()) * (0.5 * scale)
}

pub fn vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| gauss(rng))
}

pub fn m1(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// Scalar instance `min x s.t. x² − 1 ≤ 0`.
pub fn scalar_problem() -> BmiProblem {
    let pencil = MatrixPencil::new(m1(-1.0), vec![m1(0.0)], [((0, 0), m1(1.0))]).unwrap();
    BmiProblem::new(DVector::from_element(1, 1.0), pencil).unwrap()
}

/// Pencil without constant term: diagonal `L_ii` lean positive so the
/// feasible set tends to be bounded; couplings are indefinite.
pub fn random_bilinear<R: Rng>(rng: &mut R, n: usize, m: usize) -> MatrixPencil {
    let ks = (0..n).map(|_| sym(rng, m, 0.5)).collect();
    let mut ls = Vec::new();
    for i in 0..n {
        let a = rng.gen_range(0.2..1.5);
        ls.push(((i, i), DMatrix::identity(m, m) * a + sym(rng, m, 0.3)));
        for j in i + 1..n {
            if rng.gen_bool(0.7) {
                ls.push(((i, j), sym(rng, m, 0.5)));
            }
        }
    }
    MatrixPencil::new(DMatrix::zeros(m, m), ks, ls).unwrap()
}

/// Sets `F₀` so that `p(x̌, x̌x̌ᵀ) = −I`.
pub fn anchor(pencil: &MatrixPencil, x_check: &DVector<f64>) -> MatrixPencil {
    let m = pencil.m();
    let rest = pencil.eval_bilinear(x_check).unwrap() - pencil.f0();
    pencil.with_f0(-DMatrix::identity(m, m) - rest).unwrap()
}

/// Instance with a strictly feasible point `x̌` where `p(x̌, x̌x̌ᵀ) = −I`.
pub fn anchored_instance<R: Rng>(rng: &mut R, n: usize, m: usize) -> (BmiProblem, DVector<f64>) {
    let x_check = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let pencil = anchor(&random_bilinear(rng, n, m), &x_check);
    (BmiProblem::new(vector(rng, n), pencil).unwrap(), x_check)
}

pub fn bmi_violation(problem: &BmiProblem, x: &DVector<f64>) -> f64 {
    problem.pencil.bmi_max_eigenvalue(x).unwrap().max(0.0)
}
