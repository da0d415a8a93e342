//! Positive-real balanced truncation.
//!
//! The positive-real Gramians are the minimal solutions of the dual pair of
//! Riccati equations
//!
//! ```text
//! A X + X Aᵀ + (X Cᵀ − B) R0⁻¹ (C X − Bᵀ) = 0
//! Aᵀ Y + Y A + (Y B − Cᵀ) R0⁻¹ (Bᵀ Y − C) = 0,      R0 = D + Dᵀ,
//! ```
//!
//! equivalently the Lur'e equations `A X + X Aᵀ = −Kc Kcᵀ`,
//! `X Cᵀ − B = −Kc Jcᵀ`, `Jc Jcᵀ = R0` and their duals.

use std::io::Write;

use log::{info, warn};
use nalgebra::Cholesky;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kyp::{self, KypSolution, SingularFeedthrough};
use crate::linalg::{fro, inverse, min_eig_sym, norm2, psd_factor, rank_threshold, sym, sym_eigen, FullSvd, Mat};
use crate::riccati::solve_stabilizing;
use crate::sysrep::{PhSystem, StateSpaceSystem, Tolerances};

/// Default relative truncation threshold `π_j < 1e-8 π_1`.
pub const DEFAULT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct PrGramians {
    pub x_min: Mat,
    pub y_min: Mat,
    pub kc: Mat,
    pub jc: Mat,
    pub ko: Mat,
    pub jo: Mat,
    /// Shift added to `D + Dᵀ` when the feedthrough was singular.
    pub epsilon: Option<f64>,
}

/// Positive-real characteristic values in descending order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrSpectrum {
    pub pi_values: Vec<f64>,
}

impl PrSpectrum {
    /// CSV with header `j,pi_j`, `j` counted from one.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "pi_j"])?;
        for (j, p) in self.pi_values.iter().enumerate() {
            w.write_record([(j + 1).to_string(), format!("{p:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// How many states to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Truncation {
    /// Keep this many states (clamped to the order).
    Order(usize),
    /// Drop states with `π_j < threshold · π_1`.
    Threshold(f64),
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Threshold(DEFAULT_THRESHOLD)
    }
}

/// Shift used when `D + Dᵀ` is singular: `1e-6 (1 + ‖D‖₂)`.
pub fn default_epsilon(d: &Mat) -> f64 {
    1e-6 * (1.0 + norm2(d))
}

/// True when `D + Dᵀ` is numerically singular.
pub fn feedthrough_is_singular(d: &Mat, tol: &Tolerances) -> bool {
    let r0 = sym(&(d + d.transpose()));
    let (vals, _) = sym_eigen(&r0);
    let scale = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    scale == 0.0 || vals[0] <= rank_threshold(d.nrows(), tol.rank_tol, scale)
}

fn pr_riccati(a: &Mat, b: &Mat, c: &Mat, r_inv: &Mat, tol: &Tolerances) -> Result<Mat> {
    let ac = a - b * r_inv * c;
    let g = sym(&(b * r_inv * b.transpose()));
    let h = sym(&(c.transpose() * r_inv * c));
    let sol = solve_stabilizing(&ac, &g, &h, kyp::axis_tol(tol)).map_err(|e| match e {
        Error::Riccati(msg) => Error::NotPassive(msg),
        other => other,
    })?;
    Ok(sol.x)
}

/// Positive-real Gramians with `ε = 1e-6 (1 + ‖D‖₂)` when `D + Dᵀ` is
/// singular.
pub fn pr_gramians(sys: &StateSpaceSystem, tol: &Tolerances) -> Result<PrGramians> {
    let eps = feedthrough_is_singular(sys.d(), tol).then(|| default_epsilon(sys.d()));
    pr_gramians_with(sys, tol, eps)
}

pub fn pr_gramians_with(
    sys: &StateSpaceSystem,
    tol: &Tolerances,
    epsilon: Option<f64>,
) -> Result<PrGramians> {
    let stab = kyp::stability_check(sys);
    if !stab.stable {
        return Err(Error::NotStable {
            abscissa: stab.spectral_abscissa,
        });
    }
    let m = sys.io_dim();
    let shift = epsilon.unwrap_or(0.0);
    if let Some(e) = epsilon {
        info!("positive-real Gramians use D + Dᵀ + {e:.3e} I");
    }
    let r0 = sym(&(sys.d() + sys.d().transpose())) + Mat::identity(m, m) * shift;
    let l = Cholesky::new(r0.clone())
        .ok_or_else(|| Error::NotPassive("D + Dᵀ is not positive definite".into()))?
        .l();
    let r_inv = inverse(&r0).ok_or_else(|| Error::Numerical("D + Dᵀ is singular".into()))?;

    let (a, b, c) = (sys.a(), sys.b(), sys.c());
    let (at, bt, ct) = (a.transpose(), b.transpose(), c.transpose());
    let (x, y) = if sys.order() > 32 {
        std::thread::scope(|s| {
            let hx = s.spawn(|| pr_riccati(&at, &ct, &bt, &r_inv, tol));
            let y = pr_riccati(a, b, c, &r_inv, tol);
            (hx.join().expect("Riccati thread panicked"), y)
        })
    } else {
        (pr_riccati(&at, &ct, &bt, &r_inv, tol), pr_riccati(a, b, c, &r_inv, tol))
    };
    let (x, y) = (x?, y?);

    let jc = l.clone();
    let jo = l.transpose();
    let jc_inv = inverse(&jc).ok_or_else(|| Error::Numerical("singular Lur'e factor".into()))?;
    let kc = -(&x * c.transpose() - b) * jc_inv.transpose();
    let ko = -(jc_inv * (b.transpose() * &y - c));
    Ok(PrGramians {
        x_min: x,
        y_min: y,
        kc,
        jc,
        ko,
        jo,
        epsilon,
    })
}

/// Frobenius norms of the six Lur'e residuals
/// `[AX + XAᵀ + KcKcᵀ, XCᵀ − B + KcJcᵀ, JcJcᵀ − R0, AᵀY + YA + KoᵀKo,
/// YB − Cᵀ + KoᵀJo, JoᵀJo − R0]`.
pub fn lure_residuals(sys: &StateSpaceSystem, g: &PrGramians) -> [f64; 6] {
    let (a, b, c, d) = (sys.a(), sys.b(), sys.c(), sys.d());
    let m = sys.io_dim();
    let r0 = d + d.transpose() + Mat::identity(m, m) * g.epsilon.unwrap_or(0.0);
    let (x, y) = (&g.x_min, &g.y_min);
    [
        fro(&(a * x + x * a.transpose() + &g.kc * g.kc.transpose())),
        fro(&(x * c.transpose() - b + &g.kc * g.jc.transpose())),
        fro(&(&g.jc * g.jc.transpose() - &r0)),
        fro(&(a.transpose() * y + y * a + g.ko.transpose() * &g.ko)),
        fro(&(y * b - c.transpose() + g.ko.transpose() * &g.jo)),
        fro(&(g.jo.transpose() * &g.jo - &r0)),
    ]
}

/// `π_j = sqrt(eig_j(X Eᵀ Y E))`, computed as the singular values of
/// `Lyᵀ E Lx` for `X = Lx Lxᵀ`, `Y = Ly Lyᵀ`.
pub fn pr_characteristic_values(g: &PrGramians, e: &Mat) -> PrSpectrum {
    let lx = psd_factor(&g.x_min);
    let ly = psd_factor(&g.y_min);
    let mut pi_values = FullSvd::new(&(ly.transpose() * e * lx)).s;
    pi_values.iter_mut().for_each(|p| *p = p.max(0.0));
    PrSpectrum { pi_values }
}

#[derive(Debug, Clone)]
pub struct PrbtReduction {
    pub reduced: StateSpaceSystem,
    pub spectrum: PrSpectrum,
    /// Right projection `T_b` (n × r).
    pub tb: Mat,
    /// Left projection `W_b` (r × n), `W_b T_b = I`.
    pub wb: Mat,
    /// `W_b X Wᵀ_b` and `Tᵀ_b Y T_b`; both equal `diag(π_1..π_r)`.
    pub balanced_x: Mat,
    pub balanced_y: Mat,
    pub epsilon: Option<f64>,
}

/// Square-root balancing and truncation. States whose characteristic value
/// is numerically zero are always dropped.
pub fn prbt_reduce(
    sys: &StateSpaceSystem,
    trunc: Truncation,
    tol: &Tolerances,
) -> Result<PrbtReduction> {
    let g = pr_gramians(sys, tol)?;
    prbt_reduce_with(sys, &g, trunc, tol)
}

pub fn prbt_reduce_with(
    sys: &StateSpaceSystem,
    g: &PrGramians,
    trunc: Truncation,
    tol: &Tolerances,
) -> Result<PrbtReduction> {
    let n = sys.order();
    let lx = psd_factor(&g.x_min);
    let ly = psd_factor(&g.y_min);
    let svd = FullSvd::new(&(ly.transpose() * &lx));
    let spectrum = PrSpectrum {
        pi_values: svd.s.clone(),
    };
    let pi1 = svd.max();
    let nonzero = svd.rank(rank_threshold(n, tol.rank_tol, pi1));
    let keep = match trunc {
        Truncation::Order(k) => k.min(nonzero),
        Truncation::Threshold(t) => {
            if !(t >= 0.0) {
                return Err(Error::InvalidArgument(format!("negative threshold {t}")));
            }
            svd.s[..nonzero].iter().filter(|&&p| p >= t * pi1).count()
        }
    };
    let inv_sqrt = Mat::from_diagonal(&nalgebra::DVector::from_iterator(
        keep,
        svd.s[..keep].iter().map(|s| 1.0 / s.sqrt()),
    ));
    let tb = &lx * svd.v.columns(0, keep) * &inv_sqrt;
    let wb = &inv_sqrt * svd.u.columns(0, keep).transpose() * ly.transpose();
    let reduced = StateSpaceSystem::new(
        &wb * sys.a() * &tb,
        &wb * sys.b(),
        sys.c() * &tb,
        sys.d().clone(),
    )?;
    let balanced_x = &wb * &g.x_min * wb.transpose();
    let balanced_y = tb.transpose() * &g.y_min * &tb;
    Ok(PrbtReduction {
        reduced,
        spectrum,
        tb,
        wb,
        balanced_x,
        balanced_y,
        epsilon: g.epsilon,
    })
}

#[derive(Debug, Clone)]
pub struct PrbtRealization {
    pub ph: PhSystem,
    pub reduction: PrbtReduction,
    pub certificate: KypSolution,
}

/// Reduction followed by the KYP construction on the reduced model. With a
/// singular feedthrough the projected KYP solve is tried first and the
/// ε-shifted one used as fallback.
pub fn prbt_to_ph(
    sys: &StateSpaceSystem,
    trunc: Truncation,
    tol: &Tolerances,
) -> Result<PrbtRealization> {
    prbt_to_ph_with(sys, trunc, None, tol)
}

/// As [`prbt_to_ph`] with an explicit shift for a singular `D + Dᵀ`
/// (`None` selects [`default_epsilon`]). The shift is ignored when
/// `D + Dᵀ` is nonsingular.
pub fn prbt_to_ph_with(
    sys: &StateSpaceSystem,
    trunc: Truncation,
    epsilon: Option<f64>,
    tol: &Tolerances,
) -> Result<PrbtRealization> {
    let eps = feedthrough_is_singular(sys.d(), tol)
        .then(|| epsilon.unwrap_or_else(|| default_epsilon(sys.d())));
    if let Some(e) = eps {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {e}")));
        }
    }
    let g = pr_gramians_with(sys, tol, eps)?;
    let reduction = prbt_reduce_with(sys, &g, trunc, tol)?;
    let red = &reduction.reduced;
    let certificate = match kyp::solve_kyp(red, tol) {
        Ok(sol) => sol,
        Err(e) => match reduction.epsilon {
            Some(eps) => {
                warn!("projected KYP solve on the reduced model failed ({e}); using D + Dᵀ + {eps:.3e} I");
                kyp::solve_kyp_with(red, tol, SingularFeedthrough::Epsilon(eps))?
            }
            None => return Err(e),
        },
    };
    if red.order() > 0 && min_eig_sym(&certificate.q_hat) <= 0.0 {
        return Err(Error::NotPassive("reduced model has no positive definite storage".into()));
    }
    let ph = kyp::ph_from_kyp_with(red, &certificate, kyp::Factorization::Cholesky, tol)?.ph;
    Ok(PrbtRealization {
        ph,
        reduction,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar(a: f64, b: f64, c: f64, d: f64) -> StateSpaceSystem {
        let s = |x| Mat::from_element(1, 1, x);
        StateSpaceSystem::new(s(a), s(b), s(c), s(d)).unwrap()
    }

    #[test]
    fn scalar_gramians_and_factors() {
        let sys = scalar(-1.0, 1.0, 1.0, 1.0);
        let g = pr_gramians(&sys, &Tolerances::default()).unwrap();
        // x² − 6x + 1 = 0, minimal root
        let root = 3.0 - 2.0 * 2f64.sqrt();
        assert_abs_diff_eq!(g.x_min[(0, 0)], root, epsilon = 1e-12);
        assert_abs_diff_eq!(g.y_min[(0, 0)], root, epsilon = 1e-12);
        for r in lure_residuals(&sys, &g) {
            assert!(r < 1e-12, "{r}");
        }
        let pi = pr_characteristic_values(&g, &Mat::identity(1, 1));
        assert_abs_diff_eq!(pi.pi_values[0], root, epsilon = 1e-12);
    }

    #[test]
    fn no_input_gives_zero_gramian() {
        let sys = scalar(-1.0, 0.0, 1.0, 1.0);
        let g = pr_gramians(&sys, &Tolerances::default()).unwrap();
        assert_abs_diff_eq!(g.x_min[(0, 0)], 0.0, epsilon = 1e-14);
        let pi = pr_characteristic_values(&g, &Mat::identity(1, 1));
        assert_abs_diff_eq!(pi.pi_values[0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn symmetric_system_has_equal_gramians() {
        let a = Mat::from_row_slice(2, 2, &[-2.0, 0.5, 0.5, -1.0]);
        let b = Mat::from_column_slice(2, 1, &[1.0, 0.3]);
        let sys = StateSpaceSystem::new(a, b.clone(), b.transpose(), Mat::identity(1, 1)).unwrap();
        let g = pr_gramians(&sys, &Tolerances::default()).unwrap();
        assert!((&g.x_min - &g.y_min).norm() < 1e-12);
    }

    #[test]
    fn spectrum_csv_header() {
        let mut buf = Vec::new();
        PrSpectrum { pi_values: vec![0.5, 0.25] }.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "j,pi_j\n1,5e-1\n2,2.5e-1\n");
    }

    #[test]
    fn order_request_is_clamped() {
        let sys = scalar(-1.0, 1.0, 1.0, 1.0);
        let red = prbt_reduce(&sys, Truncation::Order(5), &Tolerances::default()).unwrap();
        assert_eq!(red.reduced.order(), 1);
        assert_abs_diff_eq!(red.reduced.b()[(0, 0)] * red.reduced.c()[(0, 0)], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(red.reduced.a()[(0, 0)], -1.0, epsilon = 1e-12);
    }
}
