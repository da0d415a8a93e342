//! Stabilizing solutions of algebraic Riccati equations of the form
//!
//! ```text
//! a^T X + X a + X g X + h = 0,        a + g X  Hurwitz,
//! ```
//!
//! computed from the stable invariant subspace of the Hamiltonian matrix
//! `[[a, g], [-h, -a^T]]`. The subspace is obtained from a complex Schur
//! form whose diagonal is reordered with Givens swaps so that the stable
//! eigenvalues lead.

use nalgebra::{Complex, Schur};

use crate::error::{Error, Result};
use crate::linalg::{block2, sym, to_complex, CMat, Mat};

type C64 = Complex<f64>;

/// Ordered complex Schur decomposition `h = z t z^*` with the eigenvalues
/// selected by `select` moved to the leading diagonal positions.
pub struct OrderedSchur {
    pub z: CMat,
    pub t: CMat,
    /// Number of selected eigenvalues.
    pub selected: usize,
}

/// Givens rotation `[c s; -conj(s) c]` with real `c` mapping `(f, g)` to `(r, 0)`.
fn givens(f: C64, g: C64) -> (f64, C64) {
    let gn = g.norm();
    if gn == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    let fn_ = f.norm();
    if fn_ == 0.0 {
        return (0.0, g.conj() / gn);
    }
    let d = fn_.hypot(gn);
    let phase = f / fn_;
    (fn_ / d, phase * g.conj() / d)
}

/// Applies `x <- c x + s y`, `y <- c y - conj(s) x` elementwise.
fn rot(x: &mut [C64], y: &mut [C64], c: f64, s: C64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let tmp = *xi * c + s * *yi;
        *yi = *yi * c - s.conj() * *xi;
        *xi = tmp;
    }
}

/// Swaps the adjacent diagonal entries `k` and `k + 1` of the triangular
/// factor.
fn swap_adjacent(t: &mut CMat, z: &mut CMat, k: usize) {
    let n = t.nrows();
    let t11 = t[(k, k)];
    let t22 = t[(k + 1, k + 1)];
    let (c, s) = givens(t[(k, k + 1)], t22 - t11);
    if k + 2 < n {
        let mut rk: Vec<C64> = (k + 2..n).map(|j| t[(k, j)]).collect();
        let mut rk1: Vec<C64> = (k + 2..n).map(|j| t[(k + 1, j)]).collect();
        rot(&mut rk, &mut rk1, c, s);
        for (idx, j) in (k + 2..n).enumerate() {
            t[(k, j)] = rk[idx];
            t[(k + 1, j)] = rk1[idx];
        }
    }
    if k > 0 {
        let mut ck: Vec<C64> = (0..k).map(|i| t[(i, k)]).collect();
        let mut ck1: Vec<C64> = (0..k).map(|i| t[(i, k + 1)]).collect();
        rot(&mut ck, &mut ck1, c, s.conj());
        for i in 0..k {
            t[(i, k)] = ck[i];
            t[(i, k + 1)] = ck1[i];
        }
    }
    t[(k, k)] = t22;
    t[(k + 1, k + 1)] = t11;
    let mut zk: Vec<C64> = z.column(k).iter().copied().collect();
    let mut zk1: Vec<C64> = z.column(k + 1).iter().copied().collect();
    rot(&mut zk, &mut zk1, c, s.conj());
    for i in 0..n {
        z[(i, k)] = zk[i];
        z[(i, k + 1)] = zk1[i];
    }
}

impl OrderedSchur {
    pub fn new(h: &CMat, select: impl Fn(C64) -> bool) -> Result<Self> {
        let n = h.nrows();
        if n == 0 {
            return Ok(OrderedSchur {
                z: CMat::zeros(0, 0),
                t: CMat::zeros(0, 0),
                selected: 0,
            });
        }
        let schur = Schur::try_new(h.clone(), f64::EPSILON, 100 * n)
            .ok_or_else(|| Error::Numerical("complex Schur iteration did not converge".into()))?;
        let (mut z, mut t) = schur.unpack();
        // The complex Schur factor is triangular up to roundoff below the diagonal.
        for j in 0..n {
            for i in j + 1..n {
                t[(i, j)] = C64::new(0.0, 0.0);
            }
        }
        let mut placed = 0;
        for j in 0..n {
            if select(t[(j, j)]) {
                let mut k = j;
                while k > placed {
                    swap_adjacent(&mut t, &mut z, k - 1);
                    k -= 1;
                }
                placed += 1;
            }
        }
        Ok(OrderedSchur { z, t, selected: placed })
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }
}

/// Diagnostics of a Riccati solve.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub x: Mat,
    /// Smallest distance of a Hamiltonian eigenvalue to the imaginary axis.
    pub gap: f64,
    /// Condition number of the leading block of the invariant-subspace basis.
    pub basis_cond: f64,
}

/// Stabilizing solution of `a^T X + X a + X g X + h = 0`.
///
/// Fails when the Hamiltonian has eigenvalues within `axis_tol · ‖H‖` of the
/// imaginary axis, or when the stable subspace is not a graph subspace.
pub fn solve_stabilizing(a: &Mat, g: &Mat, h: &Mat, axis_tol: f64) -> Result<RiccatiSolution> {
    let n = a.nrows();
    if n == 0 {
        return Ok(RiccatiSolution {
            x: Mat::zeros(0, 0),
            gap: f64::INFINITY,
            basis_cond: 1.0,
        });
    }
    let ham = block2(a, g, &(-h), &(-a.transpose()));
    let scale = ham.norm().max(f64::MIN_POSITIVE);
    let schur = OrderedSchur::new(&to_complex(&ham), |z| z.re < 0.0)?;
    let gap = schur
        .eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, z| acc.min(z.re.abs()));
    if gap <= axis_tol * scale {
        return Err(Error::Riccati(format!(
            "Hamiltonian matrix has eigenvalues on or near the imaginary axis (distance {gap:.3e})"
        )));
    }
    if schur.selected != n {
        return Err(Error::Riccati(format!(
            "stable invariant subspace has dimension {} instead of {n}",
            schur.selected
        )));
    }
    let u1 = schur.z.view((0, 0), (n, n)).into_owned();
    let u2 = schur.z.view((n, 0), (n, n)).into_owned();
    let svals = crate::linalg::csvd_values(&u1);
    let smax = svals.first().copied().unwrap_or(0.0);
    let smin = svals.last().copied().unwrap_or(f64::INFINITY);
    let basis_cond = if smin == 0.0 { f64::INFINITY } else { smax / smin };
    if !basis_cond.is_finite() || basis_cond > 1.0 / (f64::EPSILON * 16.0) {
        return Err(Error::Riccati(format!(
            "stable invariant subspace is not a graph subspace (cond {basis_cond:.3e})"
        )));
    }
    // X = U2 U1^{-1}  <=>  U1^T X^T = U2^T
    let xt = u1
        .transpose()
        .lu()
        .solve(&u2.transpose())
        .ok_or_else(|| Error::Riccati("singular invariant subspace basis".into()))?;
    let x = sym(&xt.transpose().map(|z| z.re));
    Ok(RiccatiSolution { x, gap, basis_cond })
}

/// Residual `a^T X + X a + X g X + h`.
pub fn residual(a: &Mat, g: &Mat, h: &Mat, x: &Mat) -> Mat {
    a.transpose() * x + x * a + x * g * x + h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn ordered_schur_reconstructs_and_orders() {
        let m = random(7, 3);
        let h = to_complex(&m);
        let s = OrderedSchur::new(&h, |z| z.re < 0.0).unwrap();
        let back = &s.z * &s.t * s.z.adjoint();
        assert!((back - &h).norm() < 1e-12 * h.norm().max(1.0));
        let eig = s.eigenvalues();
        for (i, z) in eig.iter().enumerate() {
            assert_eq!(z.re < 0.0, i < s.selected, "eigenvalue {i} = {z}");
        }
        let unitary = s.z.adjoint() * &s.z;
        assert!((unitary - CMat::identity(7, 7)).norm() < 1e-12);
    }

    #[test]
    fn scalar_lqr_riccati() {
        // a^T x + x a - x^2 + 1 = 0 with a = 1 -> x = 1 + sqrt(2)
        let a = Mat::from_element(1, 1, 1.0);
        let g = Mat::from_element(1, 1, -1.0);
        let h = Mat::from_element(1, 1, 1.0);
        let sol = solve_stabilizing(&a, &g, &h, 1e-12).unwrap();
        assert_abs_diff_eq!(sol.x[(0, 0)], 1.0 + 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn random_care_residual_small() {
        let n = 12;
        let a = random(n, 11);
        let b = random(n, 12).columns(0, 3).into_owned();
        let g = -(&b * b.transpose());
        let c = random(n, 13);
        let h = c.transpose() * &c;
        let sol = solve_stabilizing(&a, &g, &h, 1e-12).unwrap();
        let res = residual(&a, &g, &h, &sol.x);
        assert!(res.norm() < 1e-9 * (1.0 + sol.x.norm()), "{}", res.norm());
        let closed = &a + &g * &sol.x;
        assert!(crate::linalg::spectral_abscissa(&closed) < 0.0);
    }

    #[test]
    fn imaginary_axis_eigenvalues_rejected() {
        // lossless oscillator with zero weighting: Hamiltonian has eigenvalues +-i
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let z = Mat::zeros(2, 2);
        assert!(solve_stabilizing(&a, &z, &z, 1e-10).is_err());
    }
}
