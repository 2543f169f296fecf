//! Ruiz equilibration of the constraint matrix.
//!
//! Rows belonging to one Lorentz, rotated or PSD block share a single factor
//! so that the scaled slack stays in the same cone.

use nalgebra::{DMatrix, DVector};

use crate::cone::ConeBlockSpec;

const MIN_SCALE: f64 = 1e-4;
const MAX_SCALE: f64 = 1e4;

/// Diagonal row (`d`) and column (`e`) scalings plus the scalar normalizers
/// applied to `b` and `c`.
#[derive(Debug, Clone)]
pub(crate) struct Equilibration {
    pub d: DVector<f64>,
    pub e: DVector<f64>,
    pub sigma_b: f64,
    pub sigma_c: f64,
}

impl Equilibration {
    pub fn identity(m: usize, n: usize) -> Self {
        Self {
            d: DVector::from_element(m, 1.0),
            e: DVector::from_element(n, 1.0),
            sigma_b: 1.0,
            sigma_c: 1.0,
        }
    }
}

fn inf_norm<'a>(it: impl Iterator<Item = &'a f64>) -> f64 {
    it.fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

fn factor(norm: f64) -> f64 {
    if norm < 1e-12 {
        1.0
    } else {
        (1.0 / norm.sqrt()).clamp(MIN_SCALE, MAX_SCALE)
    }
}

fn normalizer(norm: f64) -> f64 {
    if norm < 1e-12 {
        1.0
    } else {
        (1.0 / norm).clamp(1e-8, 1e8)
    }
}

/// Equilibrates `a` in place and returns the scalings. `b` and `c` are
/// scaled in place as well.
pub(crate) fn equilibrate(
    a: &mut DMatrix<f64>,
    b: &mut DVector<f64>,
    c: &mut DVector<f64>,
    cones: &ConeBlockSpec,
    iters: usize,
) -> Equilibration {
    let (m, n) = a.shape();
    let mut eq = Equilibration::identity(m, n);
    let ranges = cones.ranges();
    for _ in 0..iters {
        let mut dr = DVector::from_element(m, 1.0);
        for (block, r) in cones.blocks().iter().zip(&ranges) {
            if block.is_coupled() {
                let norm = r.clone().map(|i| inf_norm(a.row(i).iter())).fold(0.0, f64::max);
                let f = factor(norm);
                r.clone().for_each(|i| dr[i] = f);
            } else {
                for i in r.clone() {
                    dr[i] = factor(inf_norm(a.row(i).iter()));
                }
            }
        }
        let ec = DVector::from_iterator(n, (0..n).map(|j| factor(inf_norm(a.column(j).iter()))));
        for j in 0..n {
            for i in 0..m {
                a[(i, j)] *= dr[i] * ec[j];
            }
        }
        eq.d.component_mul_assign(&dr);
        eq.e.component_mul_assign(&ec);
        let done = dr.iter().chain(ec.iter()).all(|f| (f - 1.0).abs() < 1e-3);
        if done {
            break;
        }
    }
    b.component_mul_assign(&eq.d);
    c.component_mul_assign(&eq.e);
    eq.sigma_b = normalizer(inf_norm(b.iter()));
    eq.sigma_c = normalizer(inf_norm(c.iter()));
    *b *= eq.sigma_b;
    *c *= eq.sigma_c;
    eq
}
