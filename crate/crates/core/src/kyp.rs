//! Stability and passivity analysis through the Kalman-Yakubovich-Popov
//! inequality, and construction of port-Hamiltonian realizations from its
//! solutions.

use log::warn;
use nalgebra::Cholesky;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    block2, cond2, fro, hstack, inverse, max_eig_sym, min_eig_sym, norm2, rank_threshold, skew,
    spectral_abscissa, sqrtm_psd, sym, sym_eigen, FullSvd, Mat,
};
use crate::riccati::{self, solve_stabilizing};
use crate::sysrep::{PhSystem, StateSpaceSystem, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityCheck {
    pub stable: bool,
    pub spectral_abscissa: f64,
}

pub fn stability_check(sys: &StateSpaceSystem) -> StabilityCheck {
    let spectral_abscissa = spectral_abscissa(sys.a());
    StabilityCheck {
        stable: spectral_abscissa < 0.0,
        spectral_abscissa,
    }
}

/// Solution `Q̂` of the KYP inequality
/// `[[AᵀQ + QA, QB − Cᵀ], [BᵀQ − C, −(D + Dᵀ)]] ⪯ 0`.
#[derive(Debug, Clone, Serialize)]
pub struct KypSolution {
    #[serde(skip)]
    pub q_hat: Mat,
    /// Frobenius norm of the Riccati residual that `Q̂` solves.
    pub residual: f64,
    /// Largest eigenvalue of the KYP block at `Q̂`.
    pub lmi_max_eig: f64,
    pub projected: bool,
    /// Orthonormal basis of the kernel of `D + Dᵀ` in the projected case.
    #[serde(skip)]
    pub u2_basis: Option<Mat>,
    /// Residual `‖Q̂ B2 − C2ᵀ‖_F` of the projected constraint.
    pub constraint_residual: Option<f64>,
    /// Shift added to `D + Dᵀ` when the ε-regularized path was used.
    pub epsilon: Option<f64>,
    /// Dissipation margin `δ` when `Q̂` solves the Riccati equation with `δI`
    /// added, used when the minimal solution is numerically singular.
    pub margin: Option<f64>,
}

/// Handling of a singular `D + Dᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SingularFeedthrough {
    /// Restrict to the range of `D + Dᵀ` and enforce `Q̂ B2 = C2ᵀ`.
    #[default]
    Project,
    /// Replace `D + Dᵀ` by `D + Dᵀ + εI`.
    Epsilon(f64),
}

/// `λ_max` of the KYP block at `q`.
pub fn lmi_max_eig(sys: &StateSpaceSystem, q: &Mat) -> f64 {
    let (a, b, c, d) = (sys.a(), sys.b(), sys.c(), sys.d());
    let top_left = a.transpose() * q + q * a;
    let off = q * b - c.transpose();
    let block = block2(&top_left, &off, &off.transpose(), &(-(d + d.transpose())));
    max_eig_sym(&block)
}

/// `AᵀQ + QA + (QB − Cᵀ) R0⁻¹ (BᵀQ − C)` for `R0 = D + Dᵀ (+ shift)`.
pub fn kyp_riccati_residual(sys: &StateSpaceSystem, q: &Mat, shift: f64) -> Result<Mat> {
    let m = sys.io_dim();
    let r0 = sys.d() + sys.d().transpose() + Mat::identity(m, m) * shift;
    let r_inv = inverse(&r0).ok_or_else(|| Error::Numerical("D + Dᵀ is singular".into()))?;
    let off = q * sys.b() - sys.c().transpose();
    Ok(sys.a().transpose() * q + q * sys.a() + &off * r_inv * off.transpose())
}

/// Relative distance to the imaginary axis below which Hamiltonian
/// eigenvalues are treated as lying on it.
pub(crate) fn axis_tol(tol: &Tolerances) -> f64 {
    10.0 * tol.rank_tol
}

fn riccati_to_passivity(e: Error) -> Error {
    match e {
        Error::Riccati(msg) => Error::NotPassive(msg),
        other => other,
    }
}

/// Stabilizing solution of `aᵀQ + Qa + QGQ + H = 0` with `a = A − B R0⁻¹ C`,
/// `G = B R0⁻¹ Bᵀ`, `H = Cᵀ R0⁻¹ C`.
fn regular_riccati(
    a: &Mat,
    b: &Mat,
    c: &Mat,
    r0: &Mat,
    tol: &Tolerances,
) -> Result<riccati::RiccatiSolution> {
    let (ac, g, h) = riccati_data(a, b, c, r0)?;
    solve_stabilizing(&ac, &g, &h, axis_tol(tol)).map_err(riccati_to_passivity)
}

fn riccati_data(a: &Mat, b: &Mat, c: &Mat, r0: &Mat) -> Result<(Mat, Mat, Mat)> {
    let r_inv = inverse(r0).ok_or_else(|| Error::Numerical("D + Dᵀ is singular".into()))?;
    let ac = a - b * &r_inv * c;
    let g = sym(&(b * &r_inv * b.transpose()));
    let h = sym(&(c.transpose() * &r_inv * c));
    Ok((ac, g, h))
}

/// Stabilizing solution of the Riccati equation with `h` replaced by
/// `h + δI`. It satisfies the KYP inequality strictly and is positive
/// definite when `a` is Hurwitz.
fn margin_riccati(a: &Mat, b: &Mat, c: &Mat, r0: &Mat, delta: f64, tol: &Tolerances) -> Result<Mat> {
    let (ac, g, h) = riccati_data(a, b, c, r0)?;
    let n = h.nrows();
    let h = h + Mat::identity(n, n) * delta;
    let sol = solve_stabilizing(&ac, &g, &h, axis_tol(tol)).map_err(riccati_to_passivity)?;
    Ok(sol.x)
}

/// Margin used when the minimal storage is numerically singular, relative
/// to `1 + ‖C R0⁻¹ Cᵀ‖`.
const STORAGE_MARGIN: f64 = 1e-10;

fn require_positive_definite(q: &Mat, tol: &Tolerances) -> Result<()> {
    let lmin = min_eig_sym(q);
    let floor = tol.rank_tol * q.nrows().max(1) as f64 * norm2(q);
    if q.nrows() > 0 && lmin <= floor {
        return Err(Error::NotPassive(format!(
            "storage matrix is not positive definite (smallest eigenvalue {lmin:.3e})"
        )));
    }
    Ok(())
}

fn check_lmi(sys: &StateSpaceSystem, q: &Mat, tol: &Tolerances) -> Result<f64> {
    let lmax = lmi_max_eig(sys, q);
    let scale = 1.0 + norm2(q) * (norm2(sys.a()) + norm2(sys.b())) + norm2(sys.c()) + norm2(sys.d());
    if lmax > tol.psd_tol * scale {
        return Err(Error::NotPassive(format!(
            "KYP inequality violated at the computed solution (largest eigenvalue {lmax:.3e})"
        )));
    }
    Ok(lmax)
}

/// Solves the KYP inequality with the default projection handling of a
/// singular feedthrough.
pub fn solve_kyp(sys: &StateSpaceSystem, tol: &Tolerances) -> Result<KypSolution> {
    solve_kyp_with(sys, tol, SingularFeedthrough::Project)
}

pub fn solve_kyp_with(
    sys: &StateSpaceSystem,
    tol: &Tolerances,
    singular: SingularFeedthrough,
) -> Result<KypSolution> {
    let stab = stability_check(sys);
    if !stab.stable {
        return Err(Error::NotStable {
            abscissa: stab.spectral_abscissa,
        });
    }
    let n = sys.order();
    let m = sys.io_dim();
    let r0 = sym(&(sys.d() + sys.d().transpose()));
    let (vals, _) = sym_eigen(&r0);
    let r_scale = vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let thr = rank_threshold(m, tol.rank_tol, r_scale.max(sys.d().norm()));
    if vals.iter().any(|&v| v < -thr) {
        return Err(Error::NotPassive(format!(
            "D + Dᵀ is indefinite (smallest eigenvalue {:.3e})",
            vals[0]
        )));
    }
    let regular = r_scale > 0.0 && vals.iter().all(|&v| v > thr);

    if regular || matches!(singular, SingularFeedthrough::Epsilon(_)) {
        let eps = match singular {
            SingularFeedthrough::Epsilon(e) if !regular => e,
            _ => 0.0,
        };
        let shifted = &r0 + Mat::identity(m, m) * eps;
        let sol = regular_riccati(sys.a(), sys.b(), sys.c(), &shifted, tol)?;
        let (q, margin) = match require_positive_definite(&sol.x, tol) {
            Ok(()) if cond2(&sol.x) <= 1.0 / f64::EPSILON.sqrt() => (sol.x, None),
            checked => {
                // Numerically uncontrollable directions make the minimal
                // storage singular or so ill-conditioned that LMI roundoff
                // dominates in the pH coordinates; a small dissipation margin
                // restores definiteness.
                let (_, _, h) = riccati_data(sys.a(), sys.b(), sys.c(), &shifted)?;
                let base = STORAGE_MARGIN * (1.0 + norm2(&h));
                let mut found = None;
                for k in 0..4 {
                    let delta = base * 1e-2_f64.powi(k);
                    let Ok(q) = margin_riccati(sys.a(), sys.b(), sys.c(), &shifted, delta, tol) else {
                        continue;
                    };
                    match require_positive_definite(&q, tol) {
                        Ok(()) => {
                            found = Some((q, delta));
                            break;
                        }
                        Err(err) => log::debug!("margin {delta:.3e}: {err}"),
                    }
                }
                match (found, checked) {
                    (Some((q, delta)), _) => {
                        warn!("minimal KYP solution is numerically singular; using dissipation margin {delta:.3e}");
                        (q, Some(delta))
                    }
                    (None, Ok(())) => (sol.x, None),
                    (None, Err(e)) => return Err(e),
                }
            }
        };
        let residual = fro(&kyp_riccati_residual(sys, &q, eps)?);
        let lmi = lmi_max_eig(sys, &q);
        if eps == 0.0 {
            check_lmi(sys, &q, tol)?;
        }
        return Ok(KypSolution {
            q_hat: q,
            residual,
            lmi_max_eig: lmi,
            projected: false,
            u2_basis: None,
            constraint_residual: None,
            epsilon: (eps > 0.0).then_some(eps),
            margin,
        });
    }
    if n == 0 {
        return Ok(KypSolution {
            q_hat: Mat::zeros(0, 0),
            residual: 0.0,
            lmi_max_eig: lmi_max_eig(sys, &Mat::zeros(0, 0)),
            projected: true,
            u2_basis: None,
            constraint_residual: Some(0.0),
            epsilon: None,
            margin: None,
        });
    }
    projected_kyp(sys, &r0, thr, tol)
}

/// Projected KYP solve for singular `D + Dᵀ`.
///
/// With `D + Dᵀ = U1 Λ1 U1ᵀ` the inequality splits into a Riccati inequality
/// in the range directions and the equality `Q B2 = C2ᵀ` for
/// `B2 = B U2`, `C2 = U2ᵀ C`. In the coordinates `x = [B2 N] x'`, with `N`
/// spanning `ker C2`, every admissible `Q` is block diagonal
/// `diag(C2 B2, X)`, and `X` solves a reduced Riccati equation.
fn projected_kyp(sys: &StateSpaceSystem, r0: &Mat, thr: f64, tol: &Tolerances) -> Result<KypSolution> {
    let n = sys.order();
    let (vals, vecs) = sym_eigen(r0);
    let null: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] <= thr).collect();
    let range: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > thr).collect();
    let u2 = vecs.select_columns(&null);
    let u1 = vecs.select_columns(&range);
    let lam1_inv = Mat::from_diagonal(&nalgebra::DVector::from_iterator(
        range.len(),
        range.iter().map(|&i| 1.0 / vals[i]),
    ));

    let b2_full = sys.b() * &u2;
    let c2_full = u2.transpose() * sys.c();

    // Input directions that do not reach the state must not reach the output.
    let bsvd = FullSvd::new(&b2_full.transpose());
    let brank = bsvd.rank(rank_threshold(n, tol.rank_tol, bsvd.max().max(sys.b().norm())));
    let w_range = bsvd.u.columns(0, brank).into_owned();
    let w_null = bsvd.u.columns(brank, u2.ncols() - brank).into_owned();
    let leak = (w_null.transpose() * &c2_full).norm();
    if leak > tol.residual_tol * (1.0 + sys.c().norm()) {
        return Err(Error::NotPassive(format!(
            "lossless feedthrough channel with output but no input coupling (residual {leak:.3e})"
        )));
    }
    let b2 = &b2_full * &w_range;
    let c2 = w_range.transpose() * &c2_full;
    let r2 = b2.ncols();

    let z = c2.clone() * &b2;
    let asym = fro(&(&z - z.transpose()));
    if asym > tol.residual_tol * (1.0 + fro(&z)) {
        return Err(Error::ConstraintViolation { residual: asym });
    }
    let z = sym(&z);
    if r2 > 0 && min_eig_sym(&z) <= 0.0 {
        return Err(Error::NotPassive(format!(
            "C2 B2 is not positive definite (smallest eigenvalue {:.3e})",
            min_eig_sym(&z)
        )));
    }

    // Basis of ker C2.
    let csvd = FullSvd::new(&c2);
    let crank = csvd.rank(rank_threshold(n, tol.rank_tol, csvd.max()));
    let kernel = csvd.v.columns(crank, n - crank).into_owned();
    if kernel.ncols() + r2 != n {
        return Err(Error::NotPassive("C2 B2 is singular".into()));
    }
    let t = hstack(&b2, &kernel);
    let t_inv = inverse(&t).ok_or_else(|| Error::Numerical("singular projection basis".into()))?;

    let a_p = &t_inv * sys.a() * &t;
    let b1_p = &t_inv * sys.b() * &u1;
    let c1_p = u1.transpose() * sys.c() * &t;
    let ac = &a_p - &b1_p * &lam1_inv * &c1_p;
    let g = sym(&(&b1_p * &lam1_inv * b1_p.transpose()));
    let h = sym(&(c1_p.transpose() * &lam1_inv * &c1_p));

    let k = n - r2;
    let a11 = ac.view((0, 0), (r2, r2)).into_owned();
    let a12 = ac.view((0, r2), (r2, k)).into_owned();
    let a21 = ac.view((r2, 0), (k, r2)).into_owned();
    let a22 = ac.view((r2, r2), (k, k)).into_owned();
    let g11 = g.view((0, 0), (r2, r2)).into_owned();
    let g12 = g.view((0, r2), (r2, k)).into_owned();
    let g22 = g.view((r2, r2), (k, k)).into_owned();
    let h11 = h.view((0, 0), (r2, r2)).into_owned();
    let h12 = h.view((0, r2), (r2, k)).into_owned();
    let h22 = h.view((r2, r2), (k, k)).into_owned();

    let ric11 = a11.transpose() * &z + &z * &a11 + &z * &g11 * &z + &h11;
    let neg = sym(&(-ric11));
    if r2 > 0 && min_eig_sym(&neg) <= rank_threshold(r2, tol.rank_tol, norm2(&neg)) {
        return Err(Error::NotPassive(format!(
            "no strictly dissipative storage along the lossless input directions (eigenvalue {:.3e})",
            -min_eig_sym(&neg)
        )));
    }
    let n_inv = inverse(&neg).ok_or_else(|| Error::Numerical("singular reduced block".into()))?;
    let kk = a21.transpose() + &z * &g12;
    let cc = &z * &a12 + &h12;
    let g_t = sym(&(&g22 + kk.transpose() * &n_inv * &kk));
    let a_t = &a22 + kk.transpose() * &n_inv * &cc;
    let h_t = sym(&(&h22 + cc.transpose() * &n_inv * &cc));
    let sol = solve_stabilizing(&a_t, &g_t, &h_t, axis_tol(tol)).map_err(riccati_to_passivity)?;
    let x = sol.x;
    let residual = fro(&riccati::residual(&a_t, &g_t, &h_t, &x));

    let mut q_p = Mat::zeros(n, n);
    q_p.view_mut((0, 0), (r2, r2)).copy_from(&z);
    q_p.view_mut((r2, r2), (k, k)).copy_from(&x);
    let q = sym(&(t_inv.transpose() * q_p * &t_inv));
    require_positive_definite(&q, tol)?;

    let constraint = fro(&(&q * &b2_full - c2_full.transpose()));
    if constraint > tol.residual_tol * (1.0 + norm2(&q) * norm2(&b2_full) + norm2(&c2_full)) {
        return Err(Error::ConstraintViolation {
            residual: constraint,
        });
    }
    let lmi = check_lmi(sys, &q, tol)?;
    Ok(KypSolution {
        q_hat: q,
        residual,
        lmi_max_eig: lmi,
        projected: true,
        u2_basis: Some(u2),
        constraint_residual: Some(constraint),
        epsilon: None,
        margin: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PassivityVerdict {
    pub stable: bool,
    pub passive: bool,
    pub spectral_abscissa: f64,
    pub certificate: Option<KypSolution>,
    /// Reason reported by the KYP solve when no certificate was found.
    pub diagnosis: Option<String>,
}

pub fn passivity_check(sys: &StateSpaceSystem, tol: &Tolerances) -> PassivityVerdict {
    let stab = stability_check(sys);
    let (certificate, diagnosis) = if stab.stable {
        match solve_kyp(sys, tol) {
            Ok(sol) => (Some(sol), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (
            None,
            Some(format!("unstable (spectral abscissa {:.6e})", stab.spectral_abscissa)),
        )
    };
    PassivityVerdict {
        stable: stab.stable,
        passive: certificate.is_some(),
        spectral_abscissa: stab.spectral_abscissa,
        certificate,
        diagnosis,
    }
}

/// Factorization `Q̂ = TᵀT` defining the energy coordinates `z = T x`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Factorization {
    /// `T = Lᵀ` for the Cholesky factor `Q̂ = L Lᵀ`.
    #[default]
    Cholesky,
    /// `T = Q̂^{1/2}`.
    SymmetricSqrt,
}

/// pH realization with the state transformation that produced it.
#[derive(Debug, Clone)]
pub struct KypRealization {
    pub ph: PhSystem,
    pub t: Mat,
    pub t_inv: Mat,
    pub cond_t: f64,
}

pub fn energy_factor(q: &Mat, kind: Factorization) -> Result<Mat> {
    match kind {
        Factorization::Cholesky => Cholesky::new(sym(q))
            .map(|c| c.l().transpose())
            .ok_or_else(|| Error::NotPassive("KYP solution is not positive definite".into())),
        Factorization::SymmetricSqrt => {
            if q.nrows() > 0 && min_eig_sym(q) <= 0.0 {
                return Err(Error::NotPassive("KYP solution is not positive definite".into()));
            }
            Ok(sqrtm_psd(q))
        }
    }
}

/// pH form in the coordinates `z = T x` where `Q̂ = TᵀT`:
/// `J = skew(TAT⁻¹)`, `R = −sym(TAT⁻¹)`, `F = ½(TB + (CT⁻¹)ᵀ)`,
/// `P = ½((CT⁻¹)ᵀ − TB)`, `S = sym(D)`, `N = skew(D)`, `E = Q = I`.
/// With an ε-shifted certificate `S = sym(D) + ε/2 I`.
pub fn ph_from_kyp_with(
    sys: &StateSpaceSystem,
    sol: &KypSolution,
    kind: Factorization,
    tol: &Tolerances,
) -> Result<KypRealization> {
    let n = sys.order();
    let t = energy_factor(&sol.q_hat, kind)?;
    let t_inv = inverse(&t).ok_or_else(|| Error::Numerical("singular energy factor".into()))?;
    let cond_t = crate::linalg::cond2(&t);
    if cond_t > tol.cond_limit() {
        warn!("energy coordinate transformation is ill-conditioned (cond {cond_t:.3e})");
    }
    let ah = &t * sys.a() * &t_inv;
    let bh = &t * sys.b();
    let cht = (sys.c() * &t_inv).transpose();
    // An ε-shifted certificate proves passivity of D + ε/2 I, which is the
    // feedthrough realized here.
    let mut s = sym(sys.d());
    if let Some(eps) = sol.epsilon {
        warn!("pH realization carries the regularization shift: S = sym(D) + {:.3e} I", eps / 2.0);
        s += Mat::identity(sys.io_dim(), sys.io_dim()) * (eps / 2.0);
    }
    let ph = PhSystem::new(
        Mat::identity(n, n),
        skew(&ah),
        -sym(&ah),
        Mat::identity(n, n),
        (&bh + &cht) * 0.5,
        (&cht - &bh) * 0.5,
        s,
        skew(sys.d()),
    )?;
    Ok(KypRealization {
        ph,
        t,
        t_inv,
        cond_t,
    })
}

pub fn ph_from_kyp(sys: &StateSpaceSystem, sol: &KypSolution) -> Result<PhSystem> {
    ph_from_kyp_with(sys, sol, Factorization::Cholesky, &Tolerances::default()).map(|r| r.ph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysrep::validate_ph;
    use approx::assert_abs_diff_eq;

    fn scalar(a: f64, b: f64, c: f64, d: f64) -> StateSpaceSystem {
        let s = |x| Mat::from_element(1, 1, x);
        StateSpaceSystem::new(s(a), s(b), s(c), s(d)).unwrap()
    }

    #[test]
    fn stability_examples() {
        assert_eq!(stability_check(&scalar(-1.0, 1.0, 1.0, 0.0)).spectral_abscissa, -1.0);
        let osc = StateSpaceSystem::new(
            Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            Mat::zeros(2, 1),
            Mat::zeros(1, 2),
            Mat::zeros(1, 1),
        )
        .unwrap();
        let st = stability_check(&osc);
        assert!(!st.stable);
        assert_abs_diff_eq!(st.spectral_abscissa, 0.0, epsilon = 1e-14);
        let un = StateSpaceSystem::new(
            Mat::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.5]),
            Mat::zeros(2, 1),
            Mat::zeros(1, 2),
            Mat::zeros(1, 1),
        )
        .unwrap();
        assert_abs_diff_eq!(stability_check(&un).spectral_abscissa, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn scalar_regular_kyp() {
        let sol = solve_kyp(&scalar(-1.0, 1.0, 1.0, 1.0), &Tolerances::default()).unwrap();
        assert!(!sol.projected);
        assert_abs_diff_eq!(sol.q_hat[(0, 0)], 3.0 - 2.0 * 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn scalar_projected_kyp() {
        let sol = solve_kyp(&scalar(-1.0, 1.0, 1.0, 0.0), &Tolerances::default()).unwrap();
        assert!(sol.projected);
        assert_abs_diff_eq!(sol.q_hat[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn scalar_sign_contradiction() {
        let r = solve_kyp(&scalar(-1.0, 1.0, -1.0, 0.0), &Tolerances::default());
        assert!(matches!(r, Err(Error::NotPassive(_))), "{r:?}");
        let v = passivity_check(&scalar(-1.0, 1.0, -1.0, 0.0), &Tolerances::default());
        assert!(v.stable && !v.passive);
    }

    #[test]
    fn unstable_is_not_passive() {
        let v = passivity_check(&scalar(1.0, 1.0, 1.0, 1.0), &Tolerances::default());
        assert!(!v.stable && !v.passive && v.certificate.is_none());
    }

    #[test]
    fn scalar_ph_form() {
        let sys = scalar(-1.0, 1.0, 1.0, 1.0);
        let sol = solve_kyp(&sys, &Tolerances::default()).unwrap();
        let ph = ph_from_kyp(&sys, &sol).unwrap();
        let q: f64 = 3.0 - 2.0 * 2f64.sqrt();
        assert_abs_diff_eq!(ph.j()[(0, 0)], 0.0);
        assert_abs_diff_eq!(ph.r()[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ph.s()[(0, 0)], 1.0);
        assert_abs_diff_eq!(ph.f()[(0, 0)], 0.5 * (q.sqrt() + 1.0 / q.sqrt()), epsilon = 1e-12);
        assert_abs_diff_eq!(ph.p()[(0, 0)], 0.5 * (1.0 / q.sqrt() - q.sqrt()), epsilon = 1e-12);
        let w = ph.passivity_block();
        assert!(w.determinant().abs() < 1e-10);
        assert!(validate_ph(&ph, &Tolerances::default()).pass);
    }

    #[test]
    fn already_ph_form_is_split() {
        // A = J0 - R0, B = Cᵀ, D = 1, Q̂ = I admissible
        let a = Mat::from_row_slice(2, 2, &[-1.0, 2.0, -2.0, -1.0]);
        let b = Mat::from_column_slice(2, 1, &[1.0, 0.5]);
        let sys = StateSpaceSystem::new(a.clone(), b.clone(), b.transpose(), Mat::identity(1, 1)).unwrap();
        let sol = KypSolution {
            q_hat: Mat::identity(2, 2),
            residual: 0.0,
            lmi_max_eig: lmi_max_eig(&sys, &Mat::identity(2, 2)),
            projected: false,
            u2_basis: None,
            constraint_residual: None,
            epsilon: None,
            margin: None,
        };
        assert!(sol.lmi_max_eig <= 0.0);
        let ph = ph_from_kyp(&sys, &sol).unwrap();
        assert_eq!(ph.j(), &skew(&a));
        assert_eq!(ph.r(), &(-sym(&a)));
        assert_eq!(ph.f(), &b);
        assert_eq!(ph.p(), &Mat::zeros(2, 1));
    }

    #[test]
    fn epsilon_path_is_opt_in() {
        let sys = scalar(-1.0, 1.0, 1.0, 0.0);
        let sol = solve_kyp_with(&sys, &Tolerances::default(), SingularFeedthrough::Epsilon(1e-6)).unwrap();
        assert!(!sol.projected);
        assert_eq!(sol.epsilon, Some(1e-6));
        assert!(sol.q_hat[(0, 0)] > 0.0);
        let ph = ph_from_kyp(&sys, &sol).unwrap();
        assert_abs_diff_eq!(ph.s()[(0, 0)], 5e-7, epsilon = 1e-20);
        assert!(validate_ph(&ph, &Tolerances::default()).pass);
    }
}
