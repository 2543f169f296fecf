//! The cones `C₁` (PSD), `C₂` (every 2×2 principal minor PSD) and `C₃`
//! (`Hᵢᵢ + Hⱼⱼ ≥ 2|Hᵢⱼ|`) that `X − xxᵀ` is relaxed into, with their duals.

use std::fmt;
use std::str::FromStr;

use bmirelax_conic::{solve, ConeBlock, ConeBlockSpec, ConicProblem, SolverSettings, SolverStatus};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use bmirelax_conic::{project_psd, project_rsoc, project_soc};

use crate::error::{BmiError, Result};
use crate::linalg::{ensure_symmetric, min_eigenvalue};

/// Default absolute tolerance for membership tests on unit-scaled data.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConeKind {
    /// `C₁`, the PSD cone.
    Sdp,
    /// `C₂`, matrices whose 2×2 principal submatrices are PSD.
    Socp,
    /// `C₃`, the parabolic cone.
    Parabolic,
}

impl ConeKind {
    pub const ALL: [ConeKind; 3] = [ConeKind::Sdp, ConeKind::Socp, ConeKind::Parabolic];

    pub fn as_str(self) -> &'static str {
        match self {
            ConeKind::Sdp => "sdp",
            ConeKind::Socp => "socp",
            ConeKind::Parabolic => "parabolic",
        }
    }

    /// `ζ` such that `tr(Λ)/η ≤ ζ/‖p‖₂` places `ηI + α(Λ)` inside the dual cone.
    ///
    /// With `n = 1` the cone `C₂` coincides with `C₁`, so the `C₁` constant applies.
    pub fn zeta(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            ConeKind::Sdp => 1.0,
            ConeKind::Socp if n <= 1.0 => 1.0,
            ConeKind::Socp => 1.0 / (n - 1.0),
            ConeKind::Parabolic => 1.0 / n.sqrt(),
        }
    }

    /// `ω` in the recovery condition `d_F(x̌)·‖p‖₂ ≤ ω·s(x̌)`.
    pub fn omega(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            ConeKind::Sdp => 0.25,
            ConeKind::Socp if n <= 1 => 0.25,
            ConeKind::Socp => 1.0 / (2.0 * nf),
            ConeKind::Parabolic => 1.0 / (2.0 + 2.0 * nf.sqrt()),
        }
    }
}

impl fmt::Display for ConeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConeKind {
    type Err = BmiError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sdp" | "c1" => Ok(ConeKind::Sdp),
            "socp" | "c2" => Ok(ConeKind::Socp),
            "parabolic" | "c3" => Ok(ConeKind::Parabolic),
            other => Err(BmiError::Input(format!(
                "unknown cone '{other}', expected sdp, socp or parabolic"
            ))),
        }
    }
}

/// Whether `H ∈ C_kind` up to `tol`.
pub fn member(kind: ConeKind, h: &DMatrix<f64>, tol: f64) -> Result<bool> {
    ensure_symmetric(h, || "H".to_string())?;
    let n = h.nrows();
    match kind {
        ConeKind::Sdp => Ok(min_eigenvalue(h)? >= -tol),
        ConeKind::Socp => {
            let scale = 1.0 + h.amax().powi(2);
            for i in 0..n {
                if h[(i, i)] < -tol {
                    return Ok(false);
                }
                for j in 0..i {
                    if h[(i, i)] * h[(j, j)] < h[(i, j)].powi(2) - tol * scale {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
        ConeKind::Parabolic => {
            for i in 0..n {
                if h[(i, i)] < -tol {
                    return Ok(false);
                }
                for j in 0..i {
                    if h[(i, i)] + h[(j, j)] < 2.0 * h[(i, j)].abs() - tol {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualMembership {
    pub inside: bool,
    /// Largest `τ` with `G − τI` still in the dual cone.
    pub margin: f64,
    /// For `C₂*`: the margin of the even diagonal split
    /// `min_{i<j} λ_min([[Gᵢᵢ/(n−1), Gᵢⱼ], [Gᵢⱼ, Gⱼⱼ/(n−1)]])`. A nonnegative
    /// value certifies membership without a solve.
    pub split_margin: Option<f64>,
}

/// Membership of `G` in the dual cone of `C_kind`, with its margin.
pub fn dual_member(kind: ConeKind, g: &DMatrix<f64>, tol: f64, settings: &SolverSettings) -> Result<DualMembership> {
    ensure_symmetric(g, || "G".to_string())?;
    let n = g.nrows();
    let (margin, split_margin) = match kind {
        ConeKind::Sdp => (min_eigenvalue(g)?, None),
        ConeKind::Parabolic => (diagonal_dominance_margin(g), None),
        ConeKind::Socp if n <= 2 => (min_eigenvalue(g)?, Some(min_eigenvalue(g)?)),
        ConeKind::Socp => (pairwise_margin(g, settings)?, Some(split_margin(g)?)),
    };
    Ok(DualMembership { inside: margin >= -tol, margin, split_margin })
}

/// `min_i (Gᵢᵢ − Σ_{j≠i} |Gᵢⱼ|)`.
pub fn diagonal_dominance_margin(g: &DMatrix<f64>) -> f64 {
    (0..g.nrows())
        .map(|i| g[(i, i)] - (0..g.ncols()).filter(|&j| j != i).map(|j| g[(i, j)].abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

fn split_margin(g: &DMatrix<f64>) -> Result<f64> {
    let n = g.nrows();
    let w = 1.0 / (n as f64 - 1.0);
    let mut worst = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let block = DMatrix::from_row_slice(2, 2, &[g[(i, i)] * w, g[(i, j)], g[(i, j)], g[(j, j)] * w]);
            worst = worst.min(min_eigenvalue(&block)?);
        }
    }
    Ok(worst)
}

/// `max τ` such that `G − τI = Σ_{i<j} Eᵢⱼ Hᵢⱼ Eᵢⱼᵀ` with every `Hᵢⱼ ⪰ 0`.
///
/// Variables are `τ` followed by `(a, b, d)` for each pair, where
/// `Hᵢⱼ = [[a, b], [b, d]]`.
fn pairwise_margin(g: &DMatrix<f64>, settings: &SolverSettings) -> Result<f64> {
    let n = g.nrows();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let nvar = 1 + 3 * pairs.len();
    let neq = n * (n + 1) / 2;
    let rows = neq + 3 * pairs.len();
    let mut a = DMatrix::zeros(rows, nvar);
    let mut rhs = DVector::zeros(rows);

    // equality rows: diagonal entries first, then off-diagonal pairs
    for i in 0..n {
        a[(i, 0)] = 1.0;
        rhs[i] = g[(i, i)];
    }
    for (p, &(i, j)) in pairs.iter().enumerate() {
        let col = 1 + 3 * p;
        a[(i, col)] = 1.0;
        a[(j, col + 2)] = 1.0;
        a[(n + p, col + 1)] = 1.0;
        rhs[n + p] = g[(i, j)];
    }
    let s2 = std::f64::consts::SQRT_2;
    for p in 0..pairs.len() {
        let col = 1 + 3 * p;
        let row = neq + 3 * p;
        a[(row, col)] = -1.0;
        a[(row + 1, col + 1)] = -s2;
        a[(row + 2, col + 2)] = -1.0;
    }
    let mut c = DVector::zeros(nvar);
    c[0] = -1.0;
    let mut blocks = vec![ConeBlock::Zero(neq)];
    blocks.extend(std::iter::repeat_n(ConeBlock::Psd(2), pairs.len()));
    let problem = ConicProblem::new(a, rhs, c, ConeBlockSpec::new(blocks)?)?;
    let result = solve(&problem, settings)?;
    match result.status {
        SolverStatus::Optimal | SolverStatus::Inaccurate => Ok(result.z[0]),
        other => Err(BmiError::SolveFailed {
            status: other.as_str().into(),
            context: format!(
                "pairwise dual-cone decomposition of a {n}x{n} matrix (primal residual {:.2e}, dual residual {:.2e})",
                result.primal_residual, result.dual_residual
            ),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetrize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(n: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(n, n, v)
    }

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        symmetrize(&DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn membership_examples() {
        let id = DMatrix::identity(3, 3);
        for kind in ConeKind::ALL {
            assert!(member(kind, &id, 0.0).unwrap());
            assert!(!member(kind, &mat(2, &[1.0, 2.0, 2.0, 1.0]), 1e-8).unwrap());
            assert!(member(kind, &mat(2, &[1.0, 1.0, 1.0, 1.0]), 1e-8).unwrap());
        }
        assert!(member(ConeKind::Sdp, &mat(2, &[1.0, 2.0, 2.5, 1.0]), 0.0).is_err());
    }

    #[test]
    fn dual_examples() {
        let s = SolverSettings::default();
        let g = DMatrix::identity(3, 3) * 2.5;
        for kind in ConeKind::ALL {
            let d = dual_member(kind, &g, 1e-8, &s).unwrap();
            assert!(d.inside, "{kind}");
            assert!((d.margin - 2.5).abs() < 1e-5, "{kind} {}", d.margin);
        }
        let g = mat(2, &[2.0, -1.0, -1.0, 2.0]);
        assert_eq!(dual_member(ConeKind::Parabolic, &g, 0.0, &s).unwrap().margin, 1.0);
        let g = mat(2, &[1.0, 2.0, 2.0, 5.0]);
        let d = dual_member(ConeKind::Socp, &g, 0.0, &s).unwrap();
        assert!(d.inside);
        assert!((d.margin - (3.0 - 8f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn pairwise_margin_against_direct_decomposition() {
        // G = I + (sum of three PSD 2x2 blocks); margin at least 1.
        let g = mat(3, &[3.0, 1.0, -0.5, 1.0, 4.0, 0.8, -0.5, 0.8, 2.5]);
        let s = SolverSettings::default();
        let d = dual_member(ConeKind::Socp, &g, 1e-8, &s).unwrap();
        let split = d.split_margin.unwrap();
        // the even split is one admissible decomposition
        assert!(d.margin >= 2.0 * split - 1e-5);
        // C₁ ⊆ C₂ gives C₂* ⊆ C₁*, so the margin is at most λ_min
        assert!(d.margin <= min_eigenvalue(&g).unwrap() + 1e-5);
        assert!(d.margin >= diagonal_dominance_margin(&g) - 1e-5);
    }

    #[test]
    fn inclusion_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let n = rng.gen_range(1..=4);
            let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let psd = &b * b.transpose();
            for kind in ConeKind::ALL {
                assert!(member(kind, &psd, 1e-10).unwrap());
            }
            let h = random_sym(&mut rng, n) + DMatrix::identity(n, n) * rng.gen_range(0.0..2.0);
            if member(ConeKind::Socp, &h, 0.0).unwrap() {
                assert!(member(ConeKind::Parabolic, &h, 1e-12).unwrap());
            }
            if member(ConeKind::Sdp, &h, 0.0).unwrap() {
                assert!(member(ConeKind::Socp, &h, 1e-12).unwrap());
            }
        }
    }

    #[test]
    fn sdp_is_self_dual() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = SolverSettings::default();
        for _ in 0..1000 {
            let n = rng.gen_range(1..=4);
            let g = random_sym(&mut rng, n) + DMatrix::identity(n, n) * rng.gen_range(0.0..1.5);
            let d = dual_member(ConeKind::Sdp, &g, 1e-9, &s).unwrap();
            assert_eq!(d.inside, member(ConeKind::Sdp, &g, 1e-9).unwrap());
        }
    }

    #[test]
    fn dual_pairing_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = SolverSettings::default();
        let mut checked = 0;
        for _ in 0..400 {
            let n = rng.gen_range(2..=3);
            let g = random_sym(&mut rng, n) + DMatrix::identity(n, n) * rng.gen_range(0.0..2.5);
            let h = random_sym(&mut rng, n) + DMatrix::identity(n, n) * rng.gen_range(0.0..2.5);
            for kind in [ConeKind::Sdp, ConeKind::Parabolic] {
                if dual_member(kind, &g, 0.0, &s).unwrap().inside && member(kind, &h, 0.0).unwrap() {
                    assert!(g.dot(&h) >= -1e-10);
                    checked += 1;
                }
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn constants() {
        assert_eq!(ConeKind::Socp.zeta(4), 1.0 / 3.0);
        assert_eq!(ConeKind::Parabolic.zeta(4), 0.5);
        assert_eq!(ConeKind::Socp.omega(3), 1.0 / 6.0);
        assert_eq!(ConeKind::Parabolic.omega(4), 1.0 / 6.0);
        assert_eq!("PARABOLIC".parse::<ConeKind>().unwrap(), ConeKind::Parabolic);
        assert!("lp".parse::<ConeKind>().is_err());
    }
}
