//! The matrix pencil `p(x, X) = F₀ + Σₖ xₖKₖ + Σᵢⱼ XᵢⱼLᵢⱼ` and the maps
//! derived from it.
//!
//! `L` is stored once per unordered pair `i ≤ j`; the double sum runs over
//! all ordered pairs, so an off-diagonal block contributes `(Xᵢⱼ + Xⱼᵢ)Lᵢⱼ`.

mod norm;
mod qualification;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{BmiError, Result};
use crate::linalg::{self, ensure_symmetric};

pub use norm::{NormKind, NormOrder, PencilNormEstimate};
pub use qualification::{GMfcq, Mfcq};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPencil {
    n: usize,
    m: usize,
    f0: DMatrix<f64>,
    k: Vec<DMatrix<f64>>,
    l: BTreeMap<(usize, usize), DMatrix<f64>>,
}

impl MatrixPencil {
    /// Validates and builds a pencil. Pairs in `l` may be given in either
    /// orientation but at most once per unordered pair.
    pub fn new(
        f0: DMatrix<f64>,
        k: Vec<DMatrix<f64>>,
        l: impl IntoIterator<Item = ((usize, usize), DMatrix<f64>)>,
    ) -> Result<Self> {
        let n = k.len();
        let m = f0.nrows();
        if n == 0 {
            return Err(BmiError::Input("pencil needs at least one variable (n >= 1)".into()));
        }
        if m == 0 {
            return Err(BmiError::Input("pencil needs m >= 1".into()));
        }
        let check = |a: &DMatrix<f64>, what: &dyn Fn() -> String| -> Result<DMatrix<f64>> {
            if a.shape() != (m, m) {
                return Err(BmiError::Input(format!(
                    "{} has shape {}x{}, expected {m}x{m}",
                    what(),
                    a.nrows(),
                    a.ncols()
                )));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(BmiError::Input(format!("{} has non-finite entries", what())));
            }
            ensure_symmetric(a, what)?;
            Ok(linalg::symmetrize(a))
        };
        let f0 = check(&f0, &|| "F0".to_string())?;
        let k = k
            .iter()
            .enumerate()
            .map(|(idx, a)| check(a, &|| format!("K[{idx}]")))
            .collect::<Result<Vec<_>>>()?;
        let mut pairs = BTreeMap::new();
        for ((i, j), a) in l {
            if i >= n || j >= n {
                return Err(BmiError::Index { index: i.max(j), n });
            }
            let key = (i.min(j), i.max(j));
            let a = check(&a, &|| format!("L[{i},{j}]"))?;
            if pairs.insert(key, a).is_some() {
                return Err(BmiError::Input(format!("duplicate pair ({}, {}) in L", key.0, key.1)));
            }
        }
        Ok(Self {
            n,
            m,
            f0,
            k,
            l: pairs,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn f0(&self) -> &DMatrix<f64> {
        &self.f0
    }

    pub fn k(&self, k: usize) -> &DMatrix<f64> {
        &self.k[k]
    }

    pub fn ks(&self) -> &[DMatrix<f64>] {
        &self.k
    }

    /// `L_ij` for either orientation; `None` when the pair is absent (zero).
    pub fn l(&self, i: usize, j: usize) -> Option<&DMatrix<f64>> {
        self.l.get(&(i.min(j), i.max(j)))
    }

    /// Stored pairs `(i, j)` with `i ≤ j`, in lexicographic order.
    pub fn l_pairs(&self) -> impl Iterator<Item = (&(usize, usize), &DMatrix<f64>)> {
        self.l.iter()
    }

    /// Whether the pencil has no bilinear part.
    pub fn is_affine(&self) -> bool {
        self.l.values().all(|a| a.iter().all(|v| *v == 0.0))
    }

    /// Replaces the constant term, keeping every other block.
    pub fn with_f0(&self, f0: DMatrix<f64>) -> Result<Self> {
        Self::new(f0, self.k.clone(), self.l.clone())
    }

    fn check_x(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n {
            return Err(BmiError::Input(format!(
                "point has length {}, pencil has n = {}",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// `p(x, X)`.
    pub fn eval(&self, point: &LiftedPoint) -> Result<DMatrix<f64>> {
        self.check_x(&point.x)?;
        if point.xmat.shape() != (self.n, self.n) {
            return Err(BmiError::Input(format!(
                "X has shape {:?}, expected {n}x{n}",
                point.xmat.shape(),
                n = self.n
            )));
        }
        let mut out = self.f0.clone();
        for (k, kk) in self.k.iter().enumerate() {
            out += kk * point.x[k];
        }
        for (&(i, j), lij) in &self.l {
            let w = if i == j {
                point.xmat[(i, i)]
            } else {
                point.xmat[(i, j)] + point.xmat[(j, i)]
            };
            out += lij * w;
        }
        Ok(linalg::symmetrize(&out))
    }

    /// `p(x, xxᵀ)`.
    pub fn eval_bilinear(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_x(x)?;
        self.eval(&LiftedPoint::rank_one(x.clone()))
    }

    /// `λ_max(p(x, xxᵀ))`.
    pub fn bmi_max_eigenvalue(&self, x: &DVector<f64>) -> Result<f64> {
        linalg::max_eigenvalue(&self.eval_bilinear(x)?)
    }

    /// Whether `λ_max(p(x, xxᵀ)) ≤ tol`.
    pub fn bmi_feasible(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        if !(tol >= 0.0) {
            return Err(BmiError::Input(format!("tolerance must be >= 0, got {tol}")));
        }
        Ok(self.bmi_max_eigenvalue(x)? <= tol)
    }

    /// `δₖ(x) = 2 Σᵢ xᵢ Lₖᵢ`, the derivative of the bilinear part in `xₖ`.
    pub fn delta(&self, x: &DVector<f64>, k: usize) -> Result<DMatrix<f64>> {
        self.check_x(x)?;
        if k >= self.n {
            return Err(BmiError::Index { index: k, n: self.n });
        }
        let mut out = DMatrix::zeros(self.m, self.m);
        for i in 0..self.n {
            if let Some(lki) = self.l(k, i) {
                out += lki * (2.0 * x[i]);
            }
        }
        Ok(out)
    }

    /// `Kₖ + δₖ(x)`, the gradient of `p(x, xxᵀ)` along `eₖ`.
    pub fn gradient_block(&self, x: &DVector<f64>, k: usize) -> Result<DMatrix<f64>> {
        Ok(&self.k[k] + self.delta(x, k)?)
    }

    /// `α(Λ)ᵢⱼ = ⟨Lᵢⱼ, Λ⟩`.
    pub fn alpha(&self, lambda: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if lambda.shape() != (self.m, self.m) {
            return Err(BmiError::Input(format!(
                "Lambda has shape {:?}, expected {m}x{m}",
                lambda.shape(),
                m = self.m
            )));
        }
        let mut out = DMatrix::zeros(self.n, self.n);
        for (&(i, j), lij) in &self.l {
            let v = lij.dot(lambda);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
        Ok(out)
    }

    /// `[⟨Kₖ, Λ⟩]ₖ`.
    pub fn k_pairing(&self, lambda: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.n, self.k.iter().map(|kk| kk.dot(lambda)))
    }

    /// Largest spectral norm over all `L_ij`, useful for scale-aware tolerances.
    pub fn data_norm(&self) -> f64 {
        let mut s = self.f0.norm_squared();
        s += self.k.iter().map(|a| a.norm_squared()).sum::<f64>();
        s += self.l.values().map(|a| a.norm_squared()).sum::<f64>();
        s.sqrt()
    }
}

/// A point of the lifted space `(x, X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPoint {
    pub x: DVector<f64>,
    pub xmat: DMatrix<f64>,
}

impl LiftedPoint {
    pub fn new(x: DVector<f64>, xmat: DMatrix<f64>) -> Result<Self> {
        if xmat.shape() != (x.len(), x.len()) {
            return Err(BmiError::Input(format!(
                "X has shape {:?} but x has length {}",
                xmat.shape(),
                x.len()
            )));
        }
        ensure_symmetric(&xmat, || "X".to_string())?;
        Ok(Self { x, xmat })
    }

    /// `(x, xxᵀ)`.
    pub fn rank_one(x: DVector<f64>) -> Self {
        let xmat = &x * x.transpose();
        Self { x, xmat }
    }
}

/// `minimize cᵀx subject to p(x, xxᵀ) ⪯ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BmiProblem {
    pub c: DVector<f64>,
    pub pencil: MatrixPencil,
}

impl BmiProblem {
    pub fn new(c: DVector<f64>, pencil: MatrixPencil) -> Result<Self> {
        if c.len() != pencil.n() {
            return Err(BmiError::Input(format!(
                "cost vector has length {}, pencil has n = {}",
                c.len(),
                pencil.n()
            )));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(BmiError::Input("cost vector has non-finite entries".into()));
        }
        Ok(Self { c, pencil })
    }

    pub fn n(&self) -> usize {
        self.pencil.n()
    }

    pub fn m(&self) -> usize {
        self.pencil.m()
    }

    /// Scale used by relative tolerances: `1 + ‖c‖₂ + ‖pencil data‖`.
    pub fn scale(&self) -> f64 {
        1.0 + self.c.norm() + self.pencil.data_norm()
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    /// `p(x) = x² − 1`, i.e. the constraint `x² ≤ 1`.
    pub fn unit_interval() -> MatrixPencil {
        MatrixPencil::new(m1(-1.0), vec![m1(0.0)], [((0, 0), m1(1.0))]).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn int_sym(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v = rng.gen_range(-5..=5) as f64;
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    fn random_int_pencil(rng: &mut ChaCha8Rng, n: usize, m: usize) -> MatrixPencil {
        let f0 = int_sym(rng, m);
        let k = (0..n).map(|_| int_sym(rng, m)).collect();
        let mut l = Vec::new();
        for i in 0..n {
            for j in i..n {
                l.push(((i, j), int_sym(rng, m)));
            }
        }
        MatrixPencil::new(f0, k, l).unwrap()
    }

    #[test]
    fn scalar_substitution() {
        let p = unit_interval();
        let pt = LiftedPoint::new(DVector::from_element(1, 0.5), m1(0.25)).unwrap();
        assert_eq!(p.eval(&pt).unwrap()[(0, 0)], -0.75);
        assert_eq!(p.eval_bilinear(&DVector::from_element(1, 0.5)).unwrap()[(0, 0)], -0.75);
    }

    #[test]
    fn zero_point_returns_constant_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_int_pencil(&mut rng, 3, 2);
        let zero = LiftedPoint::new(DVector::zeros(3), DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(&p.eval(&zero).unwrap(), p.f0());
        assert_eq!(&p.eval_bilinear(&DVector::zeros(3)).unwrap(), p.f0());
    }

    #[test]
    fn eval_matches_double_loop_resummation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = random_int_pencil(&mut rng, 2, 2);
            let x = DVector::from_fn(2, |_, _| rng.gen_range(-3..=3) as f64);
            let xm = int_sym(&mut rng, 2);
            // independent summation over every ordered (i, j) and every entry
            let mut expect = [[0.0; 2]; 2];
            for (r, row) in expect.iter_mut().enumerate() {
                for (s, e) in row.iter_mut().enumerate() {
                    let mut acc = p.f0()[(r, s)];
                    for k in 0..2 {
                        acc += x[k] * p.k(k)[(r, s)];
                    }
                    for i in 0..2 {
                        for j in 0..2 {
                            acc += xm[(i, j)] * p.l(i, j).unwrap()[(r, s)];
                        }
                    }
                    *e = acc;
                }
            }
            let got = p.eval(&LiftedPoint::new(x, xm).unwrap()).unwrap();
            for r in 0..2 {
                for s in 0..2 {
                    assert_eq!(got[(r, s)], expect[r][s]);
                }
            }
        }
    }

    #[test]
    fn bilinear_is_pencil_at_rank_one_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_int_pencil(&mut rng, 3, 2);
        let x = DVector::from_fn(3, |_, _| rng.gen_range(-4..=4) as f64);
        let lifted = LiftedPoint::new(x.clone(), &x * x.transpose()).unwrap();
        assert_eq!(p.eval_bilinear(&x).unwrap(), p.eval(&lifted).unwrap());
    }

    #[test]
    fn feasibility_threshold() {
        let p = unit_interval();
        let at = |v: f64| DVector::from_element(1, v);
        assert!(p.bmi_feasible(&at(1.0), 0.0).unwrap());
        assert!(!p.bmi_feasible(&at(1.5), 0.0).unwrap());
        assert!(p.bmi_feasible(&at(1.5), 1.3).unwrap());
        assert!(p.bmi_feasible(&at(1.5), -1.0).is_err());
    }

    #[test]
    fn delta_examples_and_finite_differences() {
        let p = unit_interval();
        let d = p.delta(&DVector::from_element(1, 0.7), 0).unwrap();
        assert!((d[(0, 0)] - 1.4).abs() < 1e-15);
        assert!(p.delta(&DVector::from_element(1, 0.7), 1).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_int_pencil(&mut rng, 3, 2);
        assert!(p.delta(&DVector::zeros(3), 2).unwrap().iter().all(|v| *v == 0.0));
        let x = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
        let h = 1e-5;
        for k in 0..3 {
            let mut e = DVector::zeros(3);
            e[k] = h;
            let fd = (p.eval_bilinear(&(&x + &e)).unwrap() - p.eval_bilinear(&(&x - &e)).unwrap())
                / (2.0 * h)
                - p.k(k);
            let err = (fd - p.delta(&x, k).unwrap()).abs().max();
            assert!(err < 1e-6, "k={k} err={err}");
        }
    }

    #[test]
    fn alpha_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_int_pencil(&mut rng, 3, 2);
        assert!(p.alpha(&DMatrix::zeros(2, 2)).unwrap().iter().all(|v| *v == 0.0));

        let f0 = m1(0.0);
        let k = vec![m1(0.0), m1(0.0)];
        let p1 = MatrixPencil::new(f0, k, [((0, 0), m1(2.0)), ((0, 1), m1(-1.0)), ((1, 1), m1(3.0))])
            .unwrap();
        let a = p1.alpha(&m1(0.5)).unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.5]));
    }

    #[test]
    fn alpha_gradient_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let p = random_int_pencil(&mut rng, 3, 3);
            let x = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let mut lam = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
            lam = linalg::symmetrize(&lam);
            let lhs = p.alpha(&lam).unwrap() * &x * 2.0;
            let rhs = DVector::from_fn(3, |k, _| p.delta(&x, k).unwrap().dot(&lam));
            assert!((lhs - rhs).amax() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0 + 1e-9, 1.0]);
        let z = DMatrix::zeros(2, 2);
        assert!(matches!(
            MatrixPencil::new(asym, vec![z.clone()], []),
            Err(BmiError::Asymmetric { .. })
        ));
        assert!(MatrixPencil::new(z.clone(), vec![], []).is_err());
        assert!(MatrixPencil::new(z.clone(), vec![z.clone()], [((0, 1), z.clone())]).is_err());
        let dup = MatrixPencil::new(
            z.clone(),
            vec![z.clone(), z.clone()],
            [((0, 1), z.clone()), ((1, 0), z.clone())],
        );
        assert!(dup.is_err());
        let bad_shape = MatrixPencil::new(z.clone(), vec![m1(1.0)], []);
        assert!(bad_shape.is_err());
    }

    #[test]
    fn problem_requires_matching_cost() {
        assert!(BmiProblem::new(DVector::zeros(2), unit_interval()).is_err());
        assert!(BmiProblem::new(DVector::from_element(1, 1.0), unit_interval()).is_ok());
    }
}
