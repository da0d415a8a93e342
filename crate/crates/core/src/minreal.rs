//! Minimal realizations through orthogonal staircase forms.

use crate::linalg::{rank_threshold, FullSvd, Mat};
use crate::sysrep::{StateSpaceSystem, Tolerances};

#[derive(Debug, Clone)]
pub struct StaircaseResult {
    /// `(Zᵀ A Z, Zᵀ B, C Z, D)`.
    pub transformed: StateSpaceSystem,
    /// Dimension of the leading controllable (or, for the dual form,
    /// observable) block.
    pub controllable_dim: usize,
    pub orthogonal_basis: Mat,
}

/// Orthogonal reduction of `(A, B)` to block upper Hessenberg form. The
/// leading `k` states are controllable; the trailing ones are not reached by
/// the input.
fn staircase(a: &Mat, b: &Mat, tol: &Tolerances) -> (Mat, Mat, Mat, usize) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut b = b.clone();
    let mut z = Mat::identity(n, n);
    let scale = a.norm().max(b.norm());
    if n == 0 || scale == 0.0 {
        return (a, b, z, 0);
    }
    // Roundoff in the coupling blocks is amplified by small earlier blocks,
    // so the cutoff never drops below √ε relative.
    let thr = rank_threshold(n, tol.rank_tol, scale).max(f64::EPSILON.sqrt() * scale);
    let mut k = 0;
    let mut block = b.clone();
    while k < n {
        let svd = FullSvd::new(&block);
        let r = svd.rank(thr);
        if r == 0 {
            break;
        }
        let mut t = Mat::identity(n, n);
        t.view_mut((k, k), (n - k, n - k)).copy_from(&svd.u);
        a = t.transpose() * &a * &t;
        b = t.transpose() * &b;
        z = &z * &t;
        let prev = k;
        k += r;
        if k < n {
            block = a.view((k, prev), (n - k, r)).into_owned();
        }
    }
    (a, b, z, k)
}

pub fn staircase_controllable(sys: &StateSpaceSystem, tol: &Tolerances) -> StaircaseResult {
    let (a, b, z, k) = staircase(sys.a(), sys.b(), tol);
    let c = sys.c() * &z;
    StaircaseResult {
        transformed: StateSpaceSystem::new(a, b, c, sys.d().clone()).expect("shapes preserved"),
        controllable_dim: k,
        orthogonal_basis: z,
    }
}

/// Dual staircase on `(Aᵀ, Cᵀ)`; `controllable_dim` is the observable
/// dimension and the leading block of the transformed system is observable.
pub fn staircase_observable(sys: &StateSpaceSystem, tol: &Tolerances) -> StaircaseResult {
    let (_, _, z, k) = staircase(&sys.a().transpose(), &sys.c().transpose(), tol);
    let a = z.transpose() * sys.a() * &z;
    let b = z.transpose() * sys.b();
    let c = sys.c() * &z;
    StaircaseResult {
        transformed: StateSpaceSystem::new(a, b, c, sys.d().clone()).expect("shapes preserved"),
        controllable_dim: k,
        orthogonal_basis: z,
    }
}

fn leading_block(sys: &StateSpaceSystem, k: usize) -> StateSpaceSystem {
    StateSpaceSystem::new(
        sys.a().view((0, 0), (k, k)).into_owned(),
        sys.b().rows(0, k).into_owned(),
        sys.c().columns(0, k).into_owned(),
        sys.d().clone(),
    )
    .expect("leading block is consistent")
}

/// Removes uncontrollable then unobservable states.
pub fn minimal_realization(sys: &StateSpaceSystem, tol: &Tolerances) -> StateSpaceSystem {
    let ctrb = staircase_controllable(sys, tol);
    let reach = leading_block(&ctrb.transformed, ctrb.controllable_dim);
    let obsv = staircase_observable(&reach, tol);
    leading_block(&obsv.transformed, obsv.controllable_dim)
}
