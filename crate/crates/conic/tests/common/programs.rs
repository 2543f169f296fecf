//! Random cone programs with known interior points or certificates.
#![allow(dead_code)]

use bmirelax_conic::{ConeBlock, ConeBlockSpec, ConicProblem};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller keeps this file free of extra dependencies.
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn normals<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    (0..k).map(|_| normal(rng)).collect()
}

pub fn block_dim(b: &ConeBlock) -> usize {
    b.dim()
}

/// A random point strictly inside the (self-dual) cone, or anything for `Zero`.
pub fn interior<R: Rng>(b: &ConeBlock, rng: &mut R) -> Vec<f64> {
    match *b {
        ConeBlock::Zero(d) => vec![0.0; d],
        ConeBlock::Nonneg(d) => (0..d).map(|_| rng.gen_range(0.5..2.0)).collect(),
        ConeBlock::Soc(d) => {
            let w = normals(rng, d - 1);
            let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut v = vec![nw + rng.gen_range(0.5..1.5)];
            v.extend(w);
            v
        }
        ConeBlock::Rsoc(d) => {
            let w = normals(rng, d - 2);
            let w2 = w.iter().map(|x| x * x).sum::<f64>();
            let a = rng.gen_range(0.5..2.0);
            let b = (w2 + rng.gen_range(0.5..1.5)) / (2.0 * a);
            let mut v = vec![a, b];
            v.extend(w);
            v
        }
        ConeBlock::Psd(k) => {
            let g = DMatrix::from_vec(k, k, normals(rng, k * k));
            let m = &g * g.transpose() / k as f64 + DMatrix::identity(k, k) * 0.5;
            bmirelax_conic::svec(&m)
        }
    }
}

fn random_blocks<R: Rng>(rng: &mut R, n: usize) -> Vec<ConeBlock> {
    let mut blocks = Vec::new();
    if rng.gen_bool(0.5) {
        blocks.push(ConeBlock::Zero(rng.gen_range(1..=(n / 2).max(1))));
    }
    for _ in 0..rng.gen_range(1..=3) {
        blocks.push(match rng.gen_range(0..4) {
            0 => ConeBlock::Nonneg(rng.gen_range(1..=4)),
            1 => ConeBlock::Soc(rng.gen_range(1..=4)),
            2 => ConeBlock::Rsoc(rng.gen_range(3..=4)),
            _ => ConeBlock::Psd(rng.gen_range(1..=3)),
        });
    }
    blocks
}

fn stack<R: Rng>(blocks: &[ConeBlock], rng: &mut R, zero_free: bool) -> DVector<f64> {
    let mut v = Vec::new();
    for b in blocks {
        match b {
            ConeBlock::Zero(d) if zero_free => v.extend(normals(rng, *d)),
            _ => v.extend(interior(b, rng)),
        }
    }
    DVector::from_vec(v)
}

pub struct Feasible {
    pub problem: ConicProblem,
    /// Strictly feasible primal point.
    pub z0: DVector<f64>,
}

/// Primal and dual strictly feasible, so the optimum is attained.
pub fn feasible_program<R: Rng>(rng: &mut R) -> Feasible {
    let n = rng.gen_range(3..=8);
    let blocks = random_blocks(rng, n);
    let m: usize = blocks.iter().map(block_dim).sum();
    let a = DMatrix::from_vec(m, n, normals(rng, m * n));
    let z0 = DVector::from_vec(normals(rng, n));
    let s0 = stack(&blocks, rng, false);
    let y0 = stack(&blocks, rng, true);
    let b = &a * &z0 + s0;
    let c = -(a.transpose() * y0);
    Feasible { problem: ConicProblem::new(a, b, c, ConeBlockSpec::new(blocks).unwrap()).unwrap(), z0 }
}

/// `Aᵀy₀ = 0`, `bᵀy₀ = −1` with `y₀` inside the dual cone.
pub fn infeasible_program<R: Rng>(rng: &mut R) -> ConicProblem {
    let n = rng.gen_range(2..=6);
    let blocks = random_blocks(rng, n);
    let m: usize = blocks.iter().map(block_dim).sum();
    let y0 = stack(&blocks, rng, true);
    let yy = y0.norm_squared();
    let mut a = DMatrix::from_vec(m, n, normals(rng, m * n));
    let proj = &y0 * (y0.transpose() * &a) / yy;
    a -= proj;
    let mut b = DVector::from_vec(normals(rng, m));
    b -= &y0 * ((y0.dot(&b) + 1.0) / yy);
    // dual strictly feasible, so infeasibility is the only valid answer
    let c = -(a.transpose() * stack(&blocks, rng, true));
    ConicProblem::new(a, b, c, ConeBlockSpec::new(blocks).unwrap()).unwrap()
}

/// Primal feasible with a ray `z₀`: `−Az₀ ∈ int K`, `cᵀz₀ = −1`.
pub fn unbounded_program<R: Rng>(rng: &mut R) -> ConicProblem {
    let n = rng.gen_range(2..=6);
    let blocks = random_blocks(rng, n);
    let m: usize = blocks.iter().map(block_dim).sum();
    let z0 = DVector::from_vec(normals(rng, n));
    let s0 = stack(&blocks, rng, false);
    let mut a = DMatrix::from_vec(m, n, normals(rng, m * n));
    let fix = (&a * &z0 + s0) * z0.transpose() / z0.norm_squared();
    a -= fix;
    let z1 = DVector::from_vec(normals(rng, n));
    let b = &a * z1 + stack(&blocks, rng, false);
    let mut c = DVector::from_vec(normals(rng, n));
    c -= &z0 * ((c.dot(&z0) + 1.0) / z0.norm_squared());
    ConicProblem::new(a, b, c, ConeBlockSpec::new(blocks).unwrap()).unwrap()
}

pub fn scale(p: &ConicProblem) -> f64 {
    1.0 + p.a.amax().max(p.b.amax()).max(p.c.amax())
}

/// Distance from `y` to the dual cone.
pub fn dual_cone_distance(cones: &ConeBlockSpec, y: &DVector<f64>) -> f64 {
    let mut p = y.as_slice().to_vec();
    cones.project_dual(&mut p).unwrap();
    p.iter().zip(y.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}
