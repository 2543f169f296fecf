//! Primitive cones of the standard form and their Euclidean projections.
//!
//! Slack vectors are laid out block by block following a [`ConeBlockSpec`].
//! A `Psd(k)` block stores a symmetric k×k matrix in scaled lower-triangular
//! column-major order: `(0,0), (1,0), ..., (k-1,0), (1,1), (2,1), ...` with
//! off-diagonal entries multiplied by √2, so the Euclidean inner product of
//! two packed vectors equals the trace inner product of the matrices.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::ops::Range;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{ConicError, Result};

const EIGEN_MAX_ITER: usize = 10_000;

/// One primitive cone in a product cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConeBlock {
    /// `{0}^d`; its dual is the free space.
    Zero(usize),
    /// Nonnegative orthant `R^d_+`.
    Nonneg(usize),
    /// Lorentz cone `{(t, w) : ‖w‖₂ ≤ t}` of total dimension `d`.
    Soc(usize),
    /// Rotated cone `{(a, b, w) : 2ab ≥ ‖w‖², a, b ≥ 0}` of total dimension `d ≥ 3`.
    Rsoc(usize),
    /// Positive semidefinite matrices of the given order, packed with [`svec`].
    Psd(usize),
}

impl ConeBlock {
    /// Number of slack coordinates occupied by the block.
    pub fn dim(&self) -> usize {
        match *self {
            ConeBlock::Zero(d) | ConeBlock::Nonneg(d) | ConeBlock::Soc(d) | ConeBlock::Rsoc(d) => d,
            ConeBlock::Psd(k) => svec_len(k),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ConeBlock::Soc(d) if d < 1 => Err(ConicError::InvalidCone("soc needs d >= 1".into())),
            ConeBlock::Rsoc(d) if d < 3 => Err(ConicError::InvalidCone(format!(
                "rsoc needs d >= 3, got {d}"
            ))),
            ConeBlock::Psd(0) => Err(ConicError::InvalidCone("psd order must be >= 1".into())),
            _ => Ok(()),
        }
    }

    /// Whether every row of the block must share one scaling factor.
    pub(crate) fn is_coupled(&self) -> bool {
        matches!(self, ConeBlock::Soc(_) | ConeBlock::Rsoc(_) | ConeBlock::Psd(_))
    }

    /// Projects `v` onto the cone in place.
    pub fn project(&self, v: &mut [f64]) -> Result<()> {
        match *self {
            ConeBlock::Zero(_) => v.iter_mut().for_each(|x| *x = 0.0),
            ConeBlock::Nonneg(_) => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            ConeBlock::Soc(_) => project_soc_in_place(v),
            ConeBlock::Rsoc(_) => project_rsoc_in_place(v),
            ConeBlock::Psd(k) => project_psd_packed(v, k)?,
        }
        Ok(())
    }

    /// Projects `v` onto the dual cone in place. Every block except
    /// `Zero` is self-dual.
    pub fn project_dual(&self, v: &mut [f64]) -> Result<()> {
        match self {
            ConeBlock::Zero(_) => Ok(()),
            _ => self.project(v),
        }
    }

    /// Euclidean distance from `v` to the cone.
    pub fn distance(&self, v: &[f64]) -> Result<f64> {
        let mut p = v.to_vec();
        self.project(&mut p)?;
        Ok(dist(v, &p))
    }

    /// Euclidean distance from `v` to the dual cone.
    pub fn dual_distance(&self, v: &[f64]) -> Result<f64> {
        let mut p = v.to_vec();
        self.project_dual(&mut p)?;
        Ok(dist(v, &p))
    }
}

impl fmt::Display for ConeBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConeBlock::Zero(d) => write!(f, "zero {d}"),
            ConeBlock::Nonneg(d) => write!(f, "nonneg {d}"),
            ConeBlock::Soc(d) => write!(f, "soc {d}"),
            ConeBlock::Rsoc(d) => write!(f, "rsoc {d}"),
            ConeBlock::Psd(k) => write!(f, "psd {k}"),
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Ordered product of primitive cones.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConeBlockSpec {
    blocks: Vec<ConeBlock>,
}

impl ConeBlockSpec {
    pub fn new(blocks: Vec<ConeBlock>) -> Result<Self> {
        for b in &blocks {
            b.validate()?;
        }
        Ok(Self { blocks })
    }

    pub fn push(&mut self, block: ConeBlock) -> Result<usize> {
        block.validate()?;
        self.blocks.push(block);
        Ok(self.blocks.len() - 1)
    }

    pub fn blocks(&self) -> &[ConeBlock] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(ConeBlock::dim).sum()
    }

    /// Row range of every block, in order.
    pub fn ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.blocks
            .iter()
            .map(|b| {
                let r = start..start + b.dim();
                start = r.end;
                r
            })
            .collect()
    }

    pub fn range_of(&self, id: usize) -> Result<Range<usize>> {
        self.ranges().get(id).cloned().ok_or(ConicError::UnknownBlock {
            id,
            count: self.blocks.len(),
        })
    }

    /// Counts blocks matching a predicate; handy for structural checks.
    pub fn count(&self, pred: impl Fn(&ConeBlock) -> bool) -> usize {
        self.blocks.iter().filter(|b| pred(b)).count()
    }

    pub fn project(&self, v: &mut [f64]) -> Result<()> {
        self.check_len(v.len())?;
        for (b, r) in self.blocks.iter().zip(self.ranges()) {
            b.project(&mut v[r])?;
        }
        Ok(())
    }

    pub fn project_dual(&self, v: &mut [f64]) -> Result<()> {
        self.check_len(v.len())?;
        for (b, r) in self.blocks.iter().zip(self.ranges()) {
            b.project_dual(&mut v[r])?;
        }
        Ok(())
    }

    /// Distance from `v` to the product cone.
    pub fn distance(&self, v: &[f64]) -> Result<f64> {
        let mut p = v.to_vec();
        self.project(&mut p)?;
        Ok(dist(v, &p))
    }

    /// Distance from `v` to the dual product cone.
    pub fn dual_distance(&self, v: &[f64]) -> Result<f64> {
        let mut p = v.to_vec();
        self.project_dual(&mut p)?;
        Ok(dist(v, &p))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.total_dim() {
            return Err(ConicError::Dimension(format!(
                "vector of length {len} against cone product of dimension {}",
                self.total_dim()
            )));
        }
        Ok(())
    }
}

/// Length of the packed representation of a symmetric `k`×`k` matrix.
pub fn svec_len(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Position of entry `(i, j)` (with `i ≥ j`) inside a packed order-`k` block.
pub fn svec_index(k: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    // column c holds k - c entries
    j * k - j * j.saturating_sub(1) / 2 + (i - j)
}

/// Packs a symmetric matrix, reading only its lower triangle.
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows();
    let mut out = Vec::with_capacity(svec_len(k));
    for j in 0..k {
        out.push(m[(j, j)]);
        for i in j + 1..k {
            out.push(SQRT_2 * m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], k: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), svec_len(k));
    let mut m = DMatrix::zeros(k, k);
    let mut idx = 0;
    for j in 0..k {
        m[(j, j)] = v[idx];
        idx += 1;
        for i in j + 1..k {
            let x = v[idx] / SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            idx += 1;
        }
    }
    m
}

/// Nearest positive semidefinite matrix in Frobenius norm: negative
/// eigenvalues are clipped to zero.
pub fn project_psd(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = s.nrows();
    if s.ncols() != k {
        return Err(ConicError::Dimension(format!("{}x{} is not square", k, s.ncols())));
    }
    if k == 1 {
        return Ok(DMatrix::from_element(1, 1, s[(0, 0)].max(0.0)));
    }
    if s.iter().any(|x| !x.is_finite()) {
        return Err(ConicError::EigenFailure(k));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(ConicError::EigenFailure(k))?;
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        let mut out = s.clone();
        out.fill_upper_triangle_with_lower_triangle();
        return Ok(out);
    }
    let q = &eig.eigenvectors;
    let mut out = DMatrix::zeros(k, k);
    for (l, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > 0.0 {
            let col = q.column(l);
            out += lam * col * col.transpose();
        }
    }
    let t = out.transpose();
    Ok((out + t) * 0.5)
}

fn project_psd_packed(v: &mut [f64], k: usize) -> Result<()> {
    if k == 1 {
        v[0] = v[0].max(0.0);
        return Ok(());
    }
    let p = project_psd(&smat(v, k))?;
    v.copy_from_slice(&svec(&p));
    Ok(())
}

/// Euclidean projection onto the Lorentz cone `{(t, w) : ‖w‖₂ ≤ t}`.
pub fn project_soc(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_soc_in_place(&mut out);
    out
}

fn project_soc_in_place(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let t = v[0];
    let r = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if r <= t {
        return;
    }
    if r <= -t {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let alpha = 0.5 * (t + r);
    v[0] = alpha;
    let f = alpha / r;
    v[1..].iter_mut().for_each(|x| *x *= f);
}

/// Euclidean projection onto `{(a, b, w) : 2ab ≥ ‖w‖², a, b ≥ 0}`, through the
/// orthogonal map `(a, b) ↦ ((a+b)/√2, (a−b)/√2)` onto the Lorentz cone.
pub fn project_rsoc(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_rsoc_in_place(&mut out);
    out
}

fn rotate(v: &mut [f64]) {
    let (a, b) = (v[0], v[1]);
    v[0] = (a + b) / SQRT_2;
    v[1] = (a - b) / SQRT_2;
}

fn project_rsoc_in_place(v: &mut [f64]) {
    rotate(v);
    project_soc_in_place(v);
    rotate(v);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn soc_examples() {
        assert_eq!(project_soc(&[1.0, 0.5]), vec![1.0, 0.5]);
        assert_eq!(project_soc(&[-1.0, 0.0]), vec![0.0, 0.0]);
        assert!(close(&project_soc(&[0.0, 2.0]), &[1.0, 1.0], 1e-15));
    }

    #[test]
    fn rsoc_interior_and_polar() {
        // 2·1·2 = 4 ≥ 1
        assert!(close(&project_rsoc(&[1.0, 2.0, 1.0]), &[1.0, 2.0, 1.0], 1e-15));
        assert!(close(&project_rsoc(&[-1.0, -1.0, 0.0]), &[0.0, 0.0, 0.0], 1e-15));
        let p = project_rsoc(&[0.0, 0.0, 2.0]);
        assert!(2.0 * p[0] * p[1] >= p[2] * p[2] - 1e-12);
    }

    #[test]
    fn psd_clips_negative_eigenvalues() {
        let s = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, -2.0]);
        let p = project_psd(&s).unwrap();
        assert!(close(p.as_slice(), &[3.0, 0.0, 0.0, 0.0], 1e-14));
    }

    #[test]
    fn svec_roundtrip_and_inner_product() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.5, -1.0, 0.0, -1.0, 2.0, 1.5, 0.0, 1.5, -3.0]);
        assert_eq!(smat(&svec(&a), 3), a);
        let packed: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
        assert!((packed - a.dot(&b)).abs() < 1e-12);
        for i in 0..3 {
            for j in 0..=i {
                let mut e = DMatrix::zeros(3, 3);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                let v = svec(&e);
                let hot = v.iter().position(|x| *x != 0.0).unwrap();
                assert_eq!(hot, svec_index(3, i, j), "({i},{j})");
            }
        }
    }

    #[test]
    fn rsoc_of_dimension_two_is_rejected() {
        assert!(ConeBlockSpec::new(vec![ConeBlock::Rsoc(2)]).is_err());
        assert!(ConeBlockSpec::new(vec![ConeBlock::Psd(0)]).is_err());
    }

    #[test]
    fn spec_ranges_follow_block_order() {
        let spec = ConeBlockSpec::new(vec![ConeBlock::Zero(2), ConeBlock::Psd(3), ConeBlock::Rsoc(3)])
            .unwrap();
        assert_eq!(spec.total_dim(), 2 + 6 + 3);
        assert_eq!(spec.ranges(), vec![0..2, 2..8, 8..11]);
        assert!(spec.range_of(3).is_err());
    }
}
