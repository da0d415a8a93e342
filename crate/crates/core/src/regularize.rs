//! Classification of descriptor pencils, reduction of regular index-one
//! systems to semi-explicit form and elimination of the algebraic part.

use nalgebra::{Complex, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{dim_err, Error, Result};
use crate::linalg::{
    cond2, eigenvalues, inverse, rank_threshold, vstack, CMat, FullSvd, Mat,
};
use crate::sysrep::{DescriptorSystem, SemiExplicitSystem, StateSpaceSystem, Tolerances};

/// Seed of the random probe points used by the regularity test.
pub const PROBE_SEED: u64 = 0x5eed_0f_9e37;

const PROBES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PencilClassification {
    pub regular: bool,
    pub index_le_one: bool,
    /// Number of finite generalized eigenvalues; zero for singular pencils.
    pub finite_eig_count: usize,
    /// Condition number of `[E1; A2]`; infinite unless the index is at most one.
    pub cond_e1a2: f64,
}

/// Makes the largest-magnitude entry of every column of `u` positive,
/// flipping the same columns of `v`.
fn normalize_signs(u: &mut Mat, v: &mut Mat, cols: usize) {
    for j in 0..cols {
        let col = u.column(j);
        let (mut best, mut val) = (0.0_f64, 0.0);
        for &x in col.iter() {
            if x.abs() > best {
                best = x.abs();
                val = x;
            }
        }
        if val < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
}

/// Left singular basis of `e` split after its numerical rank.
struct RowCompression {
    u: Mat,
    rank: usize,
}

fn row_compression(e: &Mat, tol: &Tolerances) -> RowCompression {
    let n = e.nrows();
    if *e == Mat::identity(n, n) {
        return RowCompression {
            u: Mat::identity(n, n),
            rank: n,
        };
    }
    let mut svd = FullSvd::new(e);
    let rank = svd.rank(rank_threshold(n, tol.rank_tol, svd.max()));
    let k = svd.s.len();
    normalize_signs(&mut svd.u, &mut svd.v, k);
    RowCompression { u: svd.u, rank }
}

fn csigma_min(m: &CMat) -> f64 {
    crate::linalg::csvd_values(m)
        .last()
        .copied()
        .unwrap_or(f64::INFINITY)
}

/// Decides regularity by probing `σ_min(s0 E − A)` at random complex points
/// and the index by the rank of `[E; (I − E E⁺) A]`.
pub fn classify_pencil(e: &Mat, a: &Mat, tol: &Tolerances) -> Result<PencilClassification> {
    let n = a.nrows();
    if e.shape() != (n, n) || a.ncols() != n {
        return Err(dim_err("E and A must be square of equal size"));
    }
    if n == 0 {
        return Ok(PencilClassification {
            regular: true,
            index_le_one: true,
            finite_eig_count: 0,
            cond_e1a2: 1.0,
        });
    }
    let scale = e.norm().max(a.norm());
    let ratio = if e.norm() > 0.0 { a.norm() / e.norm() } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    let mut probe = None;
    for _ in 0..PROBES {
        let radius = ratio * rng.random_range(0.5..2.0);
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let s0 = Complex::from_polar(radius, phase);
        let pencil = CMat::from_fn(n, n, |i, j| s0 * e[(i, j)] - a[(i, j)]);
        let smin = csigma_min(&pencil);
        let thr = rank_threshold(n, tol.rank_tol, scale * (1.0 + radius));
        if smin > thr {
            probe = Some(pencil);
            break;
        }
    }
    let Some(pencil) = probe else {
        return Ok(PencilClassification {
            regular: false,
            index_le_one: false,
            finite_eig_count: 0,
            cond_e1a2: f64::INFINITY,
        });
    };

    let rc = row_compression(e, tol);
    let d = rc.rank;
    let u1 = rc.u.columns(0, d).into_owned();
    let u2 = rc.u.columns(d, n - d).into_owned();
    let e1 = u1.transpose() * e;
    let a2 = u2.transpose() * a;
    let stacked = vstack(&e1, &a2);
    let ssvd = FullSvd::new(&stacked);
    let full_rank = ssvd.rank(rank_threshold(n, tol.rank_tol, ssvd.max())) == n;

    if full_rank {
        return Ok(PencilClassification {
            regular: true,
            index_le_one: true,
            finite_eig_count: d,
            cond_e1a2: cond2(&stacked),
        });
    }

    // Higher index: count nonzero eigenvalues of (s0 E − A)⁻¹ E, which are
    // 1 / (s0 − λ) for the finite eigenvalues λ.
    let lu = pencil.lu();
    let k = lu
        .solve(&e.map(|x| Complex::new(x, 0.0)))
        .ok_or_else(|| Error::Numerical("probe pencil became singular".into()))?;
    let mut mu = crate::riccati::OrderedSchur::new(&k, |_| false)?
        .eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect::<Vec<_>>();
    mu.sort_by(|x, y| y.total_cmp(x));
    let cut = (n as f64) * f64::EPSILON.sqrt() * mu.first().copied().unwrap_or(0.0);
    let finite = mu.iter().filter(|&&x| x > cut).count();
    Ok(PencilClassification {
        regular: true,
        index_le_one: false,
        finite_eig_count: finite,
        cond_e1a2: f64::INFINITY,
    })
}

/// Splits a regular index-one descriptor system into differential rows
/// (`d = rank E`) and algebraic rows by an orthogonal row compression.
pub fn to_semiexplicit(sys: &DescriptorSystem, tol: &Tolerances) -> Result<SemiExplicitSystem> {
    let class = classify_pencil(sys.e(), sys.a(), tol)?;
    if !class.regular {
        return Err(Error::NotRegular(class));
    }
    if !class.index_le_one {
        return Err(Error::IndexTooHigh(class));
    }
    let n = sys.order();
    let rc = row_compression(sys.e(), tol);
    let d = rc.rank;
    let u1t = rc.u.columns(0, d).transpose();
    let u2t = rc.u.columns(d, n - d).transpose();
    SemiExplicitSystem::new(
        &u1t * sys.e(),
        &u1t * sys.a(),
        &u1t * sys.b(),
        &u2t * sys.a(),
        &u2t * sys.b(),
        sys.c().clone(),
        sys.d().clone(),
    )
}

/// Residual of the algebraic constraints `A2 x0 + B2 u0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyCheck {
    pub residual: f64,
    pub pass: bool,
}

pub fn check_consistency(
    sys: &SemiExplicitSystem,
    x0: &DVector<f64>,
    u0: &DVector<f64>,
    tol: &Tolerances,
) -> Result<ConsistencyCheck> {
    if x0.len() != sys.order() || u0.len() != sys.io_dim() {
        return Err(dim_err("initial state or input has the wrong length"));
    }
    let residual = (sys.a2() * x0 + sys.b2() * u0).norm();
    let pass = residual <= tol.residual_tol * (1.0 + x0.norm() + u0.norm());
    Ok(ConsistencyCheck { residual, pass })
}

/// Recovers the eliminated algebraic state from the differential state and
/// the input.
///
/// In the coordinates `x = V [x1; x2]` the constraint reads
/// `A21 x1 + A22 x2 + B2 u = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMap {
    pub a21: Mat,
    pub a22: Mat,
    pub b2: Mat,
    pub basis_v: Mat,
}

impl ConstraintMap {
    /// `x2 = −A22⁻¹ (A21 x1 + B2 u)`.
    pub fn algebraic_state(&self, x1: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        if self.a22.nrows() == 0 {
            return Ok(DVector::zeros(0));
        }
        let rhs = &self.a21 * x1 + &self.b2 * u;
        let sol = self
            .a22
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("A22 is singular".into()))?;
        Ok(-sol)
    }

    /// Full descriptor state `V [x1; x2]`.
    pub fn reconstruct(&self, x1: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let x2 = self.algebraic_state(x1, u)?;
        let mut z = DVector::zeros(x1.len() + x2.len());
        z.rows_mut(0, x1.len()).copy_from(x1);
        z.rows_mut(x1.len(), x2.len()).copy_from(&x2);
        Ok(&self.basis_v * z)
    }
}

/// Result of eliminating the algebraic equations.
#[derive(Debug, Clone)]
pub struct StateSpaceReduction {
    pub system: StateSpaceSystem,
    pub constraints: ConstraintMap,
    pub cond_sigma_e: f64,
    pub cond_a22: f64,
}

/// Schur complement with respect to `A22` in the basis where
/// `E1 = U1 [Σ 0] Vᵀ`.
pub fn to_statespace(sys: &SemiExplicitSystem, tol: &Tolerances) -> Result<StateSpaceReduction> {
    let n = sys.order();
    let d = sys.differential_dim();
    let (u1, sigma, v) = if d == n && *sys.e1() == Mat::identity(n, n) {
        (Mat::identity(n, n), vec![1.0; n], Mat::identity(n, n))
    } else {
        let mut svd = FullSvd::new(sys.e1());
        normalize_signs(&mut svd.u, &mut svd.v, d);
        (svd.u, svd.s, svd.v)
    };
    let cond_sigma_e = match (sigma.first(), sigma.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    };
    if cond_sigma_e > tol.cond_limit() {
        return Err(Error::IllConditioned {
            what: "the nonzero singular values of E1",
            cond: cond_sigma_e,
        });
    }
    let v1 = v.columns(0, d).into_owned();
    let v2 = v.columns(d, n - d).into_owned();
    let a1u = u1.transpose() * sys.a1();
    let a11 = &a1u * &v1;
    let a12 = &a1u * &v2;
    let a21 = sys.a2() * &v1;
    let a22 = sys.a2() * &v2;
    let b1 = u1.transpose() * sys.b1();
    let c1 = sys.c() * &v1;
    let c2 = sys.c() * &v2;

    let cond_a22 = cond2(&a22);
    if cond_a22 > tol.cond_limit() {
        return Err(Error::IllConditioned {
            what: "A22",
            cond: cond_a22,
        });
    }
    let a22_inv = inverse(&a22).ok_or(Error::IllConditioned {
        what: "A22",
        cond: f64::INFINITY,
    })?;
    let sig_inv = Mat::from_diagonal(&DVector::from_iterator(d, sigma.iter().map(|s| 1.0 / s)));
    let k = &a12 * &a22_inv;
    let a_t = &sig_inv * (&a11 - &k * &a21);
    let b_t = &sig_inv * (&b1 - &k * sys.b2());
    let c_t = &c1 - &c2 * &a22_inv * &a21;
    let d_t = sys.d() - &c2 * &a22_inv * sys.b2();

    Ok(StateSpaceReduction {
        system: StateSpaceSystem::new(a_t, b_t, c_t, d_t)?,
        constraints: ConstraintMap {
            a21,
            a22,
            b2: sys.b2().clone(),
            basis_v: v,
        },
        cond_sigma_e,
        cond_a22,
    })
}

/// `to_semiexplicit` followed by `to_statespace`.
pub fn descriptor_to_statespace(
    sys: &DescriptorSystem,
    tol: &Tolerances,
) -> Result<StateSpaceReduction> {
    to_statespace(&to_semiexplicit(sys, tol)?, tol)
}

/// Finite generalized eigenvalues of a regular index-one pencil, i.e. the
/// eigenvalues of the reduced state matrix.
pub fn finite_eigenvalues(sys: &DescriptorSystem, tol: &Tolerances) -> Result<Vec<Complex<f64>>> {
    let red = descriptor_to_statespace(sys, tol)?;
    Ok(eigenvalues(red.system.a()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysrep::TransferFunction;
    use approx::assert_abs_diff_eq;

    fn m(r: usize, c: usize, v: &[f64]) -> Mat {
        Mat::from_row_slice(r, c, v)
    }

    #[test]
    fn ode_pencil() {
        let n = 4;
        let c = classify_pencil(&Mat::identity(n, n), &(-Mat::identity(n, n)), &Tolerances::default())
            .unwrap();
        assert!(c.regular && c.index_le_one);
        assert_eq!(c.finite_eig_count, n);
    }

    #[test]
    fn decoupled_algebraic_pencil() {
        let e = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let a = m(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let c = classify_pencil(&e, &a, &Tolerances::default()).unwrap();
        assert!(c.regular && c.index_le_one);
        assert_eq!(c.finite_eig_count, 1);
    }

    #[test]
    fn nilpotent_index_two() {
        let e = m(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let c = classify_pencil(&e, &Mat::identity(2, 2), &Tolerances::default()).unwrap();
        assert!(c.regular);
        assert!(!c.index_le_one);
        assert_eq!(c.finite_eig_count, 0);
    }

    #[test]
    fn singular_pencil_detected() {
        // common null vector of E and A
        let e = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let a = m(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let c = classify_pencil(&e, &a, &Tolerances::default()).unwrap();
        assert!(!c.regular && !c.index_le_one);
        let sys = DescriptorSystem::new(e, a, m(2, 1, &[1.0, 1.0]), m(1, 2, &[1.0, 1.0]), m(1, 1, &[0.0]))
            .unwrap();
        assert!(matches!(to_semiexplicit(&sys, &Tolerances::default()), Err(Error::NotRegular(_))));
    }

    fn split_example() -> DescriptorSystem {
        DescriptorSystem::new(
            m(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            m(2, 2, &[-1.0, 0.0, 0.0, 1.0]),
            m(2, 1, &[1.0, 1.0]),
            m(1, 2, &[1.0, 1.0]),
            m(1, 1, &[0.0]),
        )
        .unwrap()
    }

    #[test]
    fn semiexplicit_row_split() {
        let se = to_semiexplicit(&split_example(), &Tolerances::default()).unwrap();
        assert_eq!(se.differential_dim(), 1);
        assert_eq!(se.algebraic_dim(), 1);
        assert_eq!(se.a2(), &m(1, 2, &[0.0, 1.0]));
        assert_eq!(se.b2(), &m(1, 1, &[1.0]));
        // x1' = -x1 + u, 0 = x2 + u, y = x1 + x2
        let tol = Tolerances::default();
        for w in [0.1, 1.0, 7.0] {
            let s = Complex::new(0.3, w);
            let g = se.eval_transfer(s, &tol).unwrap()[(0, 0)];
            let exact = Complex::new(1.0, 0.0) / (s + 1.0) - 1.0;
            assert!((g - exact).norm() < 1e-14);
        }
    }

    #[test]
    fn identity_e_passes_through() {
        let a = m(2, 2, &[-1.0, 2.0, 0.0, -3.0]);
        let sys = DescriptorSystem::new(
            Mat::identity(2, 2),
            a.clone(),
            m(2, 1, &[1.0, 0.0]),
            m(1, 2, &[0.0, 1.0]),
            m(1, 1, &[0.5]),
        )
        .unwrap();
        let tol = Tolerances::default();
        let se = to_semiexplicit(&sys, &tol).unwrap();
        assert_eq!(se.e1(), &Mat::identity(2, 2));
        assert_eq!(se.algebraic_dim(), 0);
        let red = to_statespace(&se, &tol).unwrap();
        assert_eq!(red.system.a(), &a);
        assert_eq!(red.system.d(), sys.d());
    }

    #[test]
    fn consistency_residuals() {
        let se = SemiExplicitSystem::new(
            m(1, 2, &[1.0, 0.0]),
            m(1, 2, &[-1.0, 1.0]),
            m(1, 1, &[0.0]),
            m(1, 2, &[0.0, 1.0]),
            m(1, 1, &[1.0]),
            m(1, 2, &[1.0, 1.0]),
            m(1, 1, &[0.0]),
        )
        .unwrap();
        let tol = Tolerances::default();
        let x0 = DVector::from_vec(vec![5.0, -2.0]);
        let ok = check_consistency(&se, &x0, &DVector::from_vec(vec![2.0]), &tol).unwrap();
        assert!(ok.pass);
        assert_eq!(ok.residual, 0.0);
        let bad = check_consistency(&se, &x0, &DVector::from_vec(vec![0.0]), &tol).unwrap();
        assert!(!bad.pass);
        assert_abs_diff_eq!(bad.residual, 2.0);

        let red = to_statespace(&se, &tol).unwrap();
        let sys = &red.system;
        assert_abs_diff_eq!(sys.a()[(0, 0)], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sys.b()[(0, 0)], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sys.c()[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sys.d()[(0, 0)], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn no_constraints_is_consistent() {
        let se = SemiExplicitSystem::new(
            Mat::identity(2, 2),
            Mat::identity(2, 2),
            m(2, 1, &[1.0, 1.0]),
            Mat::zeros(0, 2),
            Mat::zeros(0, 1),
            m(1, 2, &[1.0, 1.0]),
            m(1, 1, &[0.0]),
        )
        .unwrap();
        let r = check_consistency(
            &se,
            &DVector::from_vec(vec![3.0, 4.0]),
            &DVector::from_vec(vec![1.0]),
            &Tolerances::default(),
        )
        .unwrap();
        assert!(r.pass);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn constraint_map_reconstruction() {
        let tol = Tolerances::default();
        let red = descriptor_to_statespace(&split_example(), &tol).unwrap();
        let x1 = DVector::from_vec(vec![0.7]);
        let u = DVector::from_vec(vec![-1.3]);
        let x2 = red.constraints.algebraic_state(&x1, &u).unwrap();
        let c = &red.constraints;
        let res = &c.a21 * &x1 + &c.a22 * &x2 + &c.b2 * &u;
        assert!(res.norm() < 1e-14);
        let v = &c.basis_v;
        assert!((v.transpose() * v - Mat::identity(2, 2)).norm() < 1e-12);
    }
}
