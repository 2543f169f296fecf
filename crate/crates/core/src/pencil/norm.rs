//! Estimation of the pencil norm `‖p‖_q = max_{‖u‖=1} ‖[uᵀLᵢⱼu]ᵢⱼ‖_q`.
//!
//! The vector runs over all `n²` ordered pairs, so off-diagonal blocks appear
//! twice. Local maxima come from an alternating ascent: for fixed `u` the
//! q-norm is attained by a dual vector `β`, and for fixed `β` the best `u` is
//! the top eigenvector of `Σ βᵢⱼLᵢⱼ`. Each step can only increase the value.
//! For `m ≤ 3` a branch-and-bound over the faces of the cube `[-1, 1]^m`
//! certifies the incumbent to a relative tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::MatrixPencil;
use crate::linalg::{self, random_unit_vector};

/// Relative certification tolerance of the branch-and-bound.
pub const CERTIFY_REL_TOL: f64 = 1e-3;
const NODE_CAP: usize = 400_000;
const ASCENT_ITERS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormOrder {
    One,
    Two,
}

impl NormOrder {
    pub fn as_u8(self) -> u8 {
        match self {
            NormOrder::One => 1,
            NormOrder::Two => 2,
        }
    }

    pub fn from_u8(q: u8) -> Option<Self> {
        match q {
            1 => Some(NormOrder::One),
            2 => Some(NormOrder::Two),
            _ => None,
        }
    }

    fn norm(self, v: &[f64]) -> f64 {
        match self {
            NormOrder::One => v.iter().map(|x| x.abs()).sum(),
            NormOrder::Two => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// The value is the maximum, certified to [`CERTIFY_REL_TOL`] relative
    /// accuracy (exactly when `m = 1`).
    Exact,
    /// The value is attained at the witness but may be below the maximum.
    LowerBound,
}

impl NormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::Exact => "exact",
            NormKind::LowerBound => "lower_bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PencilNormEstimate {
    pub q: NormOrder,
    /// Value at `witness_u`; always a valid lower bound on the norm.
    pub value: f64,
    /// A valid upper bound on the norm. Equals `value` for `m = 1`.
    pub upper: f64,
    pub kind: NormKind,
    pub witness_u: DVector<f64>,
}

impl PencilNormEstimate {
    pub fn is_exact(&self) -> bool {
        self.kind == NormKind::Exact
    }
}

/// The quadratic map `u ↦ [uᵀLᵢⱼu]` over ordered pairs.
struct QuadMap<'a> {
    mats: Vec<&'a DMatrix<f64>>,
    /// Spectral norms of `mats`.
    spec: Vec<f64>,
    q: NormOrder,
    m: usize,
}

impl<'a> QuadMap<'a> {
    fn new(p: &'a MatrixPencil, q: NormOrder) -> Self {
        let mut mats = Vec::new();
        for i in 0..p.n() {
            for j in 0..p.n() {
                if let Some(l) = p.l(i, j) {
                    mats.push(l);
                }
            }
        }
        let spec = mats
            .iter()
            .map(|l| linalg::spectral_norm(l).unwrap_or_else(|_| l.norm()))
            .collect();
        Self { mats, spec, q, m: p.m() }
    }

    fn values(&self, u: &DVector<f64>) -> Vec<f64> {
        self.mats.iter().map(|l| u.dot(&(*l * u))).collect()
    }

    fn eval(&self, u: &DVector<f64>) -> f64 {
        self.q.norm(&self.values(u))
    }

    /// `‖[‖Lᵢⱼ‖₂]‖_q`, an upper bound on the norm over the whole sphere.
    fn global_upper(&self) -> f64 {
        self.q.norm(&self.spec)
    }

    fn dual(&self, v: &[f64]) -> Vec<f64> {
        match self.q {
            NormOrder::One => v
                .iter()
                .map(|x| if *x > 0.0 { 1.0 } else if *x < 0.0 { -1.0 } else { 0.0 })
                .collect(),
            NormOrder::Two => {
                let nv = self.q.norm(v);
                if nv == 0.0 {
                    vec![0.0; v.len()]
                } else {
                    v.iter().map(|x| x / nv).collect()
                }
            }
        }
    }

    fn combine(&self, beta: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.m, self.m);
        for (l, b) in self.mats.iter().zip(beta) {
            if *b != 0.0 {
                out += *l * *b;
            }
        }
        out
    }

    /// Alternating ascent from `u`; returns the final value and point.
    fn ascend(&self, mut u: DVector<f64>) -> (f64, DVector<f64>) {
        let mut best = self.eval(&u);
        for _ in 0..ASCENT_ITERS {
            let beta = self.dual(&self.values(&u));
            let Ok((_, vecs)) = linalg::sorted_eigen(&self.combine(&beta)) else {
                break;
            };
            let cand = vecs[self.m - 1].clone();
            let val = self.eval(&cand);
            if val <= best * (1.0 + 1e-14) {
                if val > best {
                    best = val;
                    u = cand;
                }
                break;
            }
            best = val;
            u = cand;
        }
        (best, u)
    }

    /// Upper bound of the norm over all unit `u` with `‖u − w‖₂ ≤ r`.
    ///
    /// Writes `v(u) = v(w) + J d + R` with `d = u − w`, `Jᵢⱼ = 2wᵀLᵢⱼ` and
    /// `|Rᵢⱼ| ≤ ‖Lᵢⱼ‖r²`. Because both points are unit, `wᵀd = −‖d‖²/2`, so
    /// a linear term only costs its tangential part to first order.
    fn patch_upper(&self, w: &DVector<f64>, r: f64) -> f64 {
        let v = self.values(w);
        let rows: Vec<DVector<f64>> = self.mats.iter().map(|l| (*l * w) * 2.0).collect();
        let linear = |a: &DVector<f64>| -> f64 {
            let aw = a.dot(w);
            let perp = (a - w * aw).norm();
            aw.abs() * r * r / 2.0 + perp * r
        };
        let remainder = self.global_upper() * r * r;
        match self.q {
            NormOrder::Two => {
                let g2: f64 = v.iter().map(|x| x * x).sum();
                let mut a = DVector::zeros(self.m);
                for (row, vi) in rows.iter().zip(&v) {
                    a += row * *vi;
                }
                let jf2: f64 = rows.iter().map(|row| row.norm_squared()).sum();
                (g2 + 2.0 * linear(&a) + jf2 * r * r).sqrt() + remainder
            }
            NormOrder::One => {
                let mut settled = 0.0;
                let mut b = DVector::zeros(self.m);
                let mut loose = 0.0;
                for (row, vi) in rows.iter().zip(&v) {
                    let jn = row.norm();
                    if vi.abs() > jn * r {
                        let s = vi.signum();
                        settled += vi.abs();
                        b += row * s;
                    } else {
                        loose += vi.abs() + jn * r;
                    }
                }
                settled + linear(&b) + loose + remainder
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    upper: f64,
    face: usize,
    center: Vec<f64>,
    half: f64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper
            .total_cmp(&other.upper)
            .then_with(|| other.half.total_cmp(&self.half))
            .then_with(|| other.face.cmp(&self.face))
            .then_with(|| {
                other
                    .center
                    .iter()
                    .zip(&self.center)
                    .map(|(a, b)| a.total_cmp(b))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
    }
}

struct Certified {
    upper: f64,
    witness: DVector<f64>,
    complete: bool,
}

/// Branch-and-bound on the cube faces `x_face = +1` (antipodal symmetry
/// covers the other half).
fn certify(map: &QuadMap<'_>, mut best: f64, mut witness: DVector<f64>) -> Certified {
    let m = map.m;
    let free = m - 1;
    let lift = |face: usize, center: &[f64]| -> DVector<f64> {
        let mut y = DVector::zeros(m);
        let mut it = center.iter();
        for k in 0..m {
            y[k] = if k == face { 1.0 } else { *it.next().unwrap() };
        }
        y
    };
    let bound = |face: usize, center: &[f64], half: f64| -> (f64, f64, DVector<f64>) {
        let y = lift(face, center);
        let ny = y.norm();
        let w = y / ny;
        let r = (2.0 * half * (free as f64).sqrt() / ny).min(2.0);
        let val = map.eval(&w);
        let up = map.patch_upper(&w, r).min(map.global_upper());
        (up.max(val), val, w)
    };

    let mut heap = BinaryHeap::new();
    let mut evaluated = 0usize;
    for face in 0..m {
        let center = vec![0.0; free];
        let (upper, val, w) = bound(face, &center, 1.0);
        evaluated += 1;
        if val > best {
            best = val;
            witness = w;
        }
        heap.push(Node { upper, face, center, half: 1.0 });
    }
    let abs_tol = 1e-14 * map.global_upper();
    while let Some(node) = heap.pop() {
        if node.upper <= best * (1.0 + CERTIFY_REL_TOL) + abs_tol {
            return Certified { upper: node.upper.max(best), witness, complete: true };
        }
        if evaluated >= NODE_CAP {
            return Certified { upper: node.upper.max(best), witness, complete: false };
        }
        let half = node.half / 2.0;
        for corner in 0..(1usize << free) {
            let center: Vec<f64> = (0..free)
                .map(|k| node.center[k] + if corner >> k & 1 == 1 { half } else { -half })
                .collect();
            let (upper, val, w) = bound(node.face, &center, half);
            evaluated += 1;
            if val > best {
                let (polished, pu) = map.ascend(w.clone());
                if polished > val {
                    best = polished;
                    witness = pu;
                } else {
                    best = val;
                    witness = w;
                }
            }
            heap.push(Node { upper, face: node.face, center, half });
        }
    }
    Certified { upper: best, witness, complete: true }
}

impl MatrixPencil {
    /// Estimates `‖p‖_q` with `budget` ascent restarts (at least one).
    ///
    /// Restarts draw from a ChaCha stream seeded with `seed`, so results are
    /// reproducible. For `m ≤ 3` the estimate is certified by branch-and-bound.
    pub fn pencil_norm(&self, q: NormOrder, budget: usize, seed: u64) -> PencilNormEstimate {
        let m = self.m();
        let map = QuadMap::new(self, q);
        let global = map.global_upper();
        let mut e1 = DVector::zeros(m);
        e1[0] = 1.0;
        if global == 0.0 {
            return PencilNormEstimate { q, value: 0.0, upper: 0.0, kind: NormKind::Exact, witness_u: e1 };
        }
        if m == 1 {
            let value = map.eval(&e1);
            return PencilNormEstimate { q, value, upper: value, kind: NormKind::Exact, witness_u: e1 };
        }

        let mut starts: Vec<DVector<f64>> = Vec::new();
        for l in self.l.values() {
            if let Ok((_, vecs)) = linalg::sorted_eigen(l) {
                starts.push(vecs[0].clone());
                starts.push(vecs[m - 1].clone());
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..budget.max(1) {
            starts.push(random_unit_vector(&mut rng, m));
        }
        let mut best = f64::NEG_INFINITY;
        let mut witness = e1;
        for s in starts {
            let (val, u) = map.ascend(s);
            if val > best {
                best = val;
                witness = u;
            }
        }
        witness /= witness.norm();
        best = map.eval(&witness);

        if best >= global * (1.0 - 1e-12) {
            return PencilNormEstimate { q, value: best, upper: global, kind: NormKind::Exact, witness_u: witness };
        }
        if m <= 3 {
            let cert = certify(&map, best, witness);
            let mut w = cert.witness;
            w /= w.norm();
            let value = map.eval(&w);
            let kind = if cert.complete { NormKind::Exact } else { NormKind::LowerBound };
            return PencilNormEstimate { q, value, upper: cert.upper.max(value), kind, witness_u: w };
        }
        PencilNormEstimate { q, value: best, upper: global, kind: NormKind::LowerBound, witness_u: witness }
    }

    /// `‖[uᵀLᵢⱼu]ᵢⱼ‖_q` at a given (not necessarily unit) `u`.
    pub fn quadratic_map_norm(&self, q: NormOrder, u: &DVector<f64>) -> f64 {
        QuadMap::new(self, q).eval(u)
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::m1;
    use super::*;
    use rand::Rng;

    fn dense_sweep_m2(p: &MatrixPencil, q: NormOrder, steps: usize) -> f64 {
        (0..steps)
            .map(|k| {
                let t = std::f64::consts::PI * k as f64 / steps as f64;
                p.quadratic_map_norm(q, &DVector::from_vec(vec![t.cos(), t.sin()]))
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn scalar_pencil_is_exact() {
        let z = m1(0.0);
        let p = MatrixPencil::new(
            z.clone(),
            vec![z.clone(), z],
            [((0, 0), m1(2.0)), ((0, 1), m1(-1.0)), ((1, 1), m1(3.0))],
        )
        .unwrap();
        let est = p.pencil_norm(NormOrder::Two, 4, 0);
        assert_eq!(est.kind, NormKind::Exact);
        assert!((est.value - 15f64.sqrt()).abs() < 1e-14);
        let est1 = p.pencil_norm(NormOrder::One, 4, 0);
        assert!((est1.value - 7.0).abs() < 1e-14);
    }

    #[test]
    fn zero_bilinear_part_has_zero_norm() {
        let z = DMatrix::zeros(3, 3);
        let p = MatrixPencil::new(z.clone(), vec![z.clone(), z.clone()], [((0, 1), z)]).unwrap();
        let est = p.pencil_norm(NormOrder::Two, 2, 0);
        assert_eq!(est.value, 0.0);
        assert_eq!(est.kind, NormKind::Exact);
    }

    #[test]
    fn diagonal_block() {
        let l = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
        let p = MatrixPencil::new(DMatrix::zeros(2, 2), vec![DMatrix::zeros(2, 2)], [((0, 0), l)]).unwrap();
        let est = p.pencil_norm(NormOrder::Two, 8, 1);
        assert!((est.value - 3.0).abs() < 1e-12);
        assert!(est.is_exact());
        assert!((dense_sweep_m2(&p, NormOrder::Two, 20_000) - 3.0).abs() < 1e-6);
    }

    #[test]
    fn witness_is_unit_and_reproduces_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in 2..=4 {
            let sym = |rng: &mut ChaCha8Rng| {
                let a = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
                linalg::symmetrize(&a)
            };
            let l = vec![((0, 0), sym(&mut rng)), ((0, 1), sym(&mut rng)), ((1, 1), sym(&mut rng))];
            let p = MatrixPencil::new(DMatrix::zeros(m, m), vec![DMatrix::zeros(m, m); 2], l).unwrap();
            for q in [NormOrder::One, NormOrder::Two] {
                let est = p.pencil_norm(q, 8, 3);
                assert!((est.witness_u.norm() - 1.0).abs() < 1e-10);
                assert!((p.quadratic_map_norm(q, &est.witness_u) - est.value).abs() < 1e-10);
                assert!(est.upper >= est.value);
                if m <= 3 {
                    assert!(est.is_exact(), "m={m} q={q:?}");
                }
            }
        }
    }

    #[test]
    fn certified_against_sweep_m2() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let sym = |rng: &mut ChaCha8Rng| linalg::symmetrize(&DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0)));
            let l = vec![((0, 0), sym(&mut rng)), ((0, 1), sym(&mut rng)), ((1, 1), sym(&mut rng))];
            let p = MatrixPencil::new(DMatrix::zeros(2, 2), vec![DMatrix::zeros(2, 2); 2], l).unwrap();
            for q in [NormOrder::One, NormOrder::Two] {
                let est = p.pencil_norm(q, 4, 5);
                let sweep = dense_sweep_m2(&p, q, 20_000);
                assert!(est.value >= sweep * (1.0 - CERTIFY_REL_TOL) - 1e-12);
                assert!(est.upper >= sweep - 1e-9);
            }
        }
    }

    #[test]
    fn flat_norm_is_certified() {
        // uᵀIu = 1 on the whole sphere.
        let p = MatrixPencil::new(DMatrix::zeros(3, 3), vec![DMatrix::zeros(3, 3)], [((0, 0), DMatrix::identity(3, 3))])
            .unwrap();
        let est = p.pencil_norm(NormOrder::Two, 1, 0);
        assert!(est.is_exact());
        assert!((est.value - 1.0).abs() < 1e-12);
    }
}
