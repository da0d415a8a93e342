//! Benchmark systems and random instance families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cond2, skew, Mat};
use crate::sysrep::{ph_to_statespace, DescriptorSystem, LtiSystem, PhSystem, StateSpaceSystem};

/// The 5×5 illustrative descriptor system with scalar feedthrough 9.3.
pub fn example5() -> DescriptorSystem {
    #[rustfmt::skip]
    let e = Mat::from_row_slice(5, 5, &[
        0.0, 0.0, 19.0, 15.0, 5.0,
        0.0, 4.0, 14.0, 13.0, 14.0,
        0.0, 9.0, 10.0, 1.0, 11.0,
        0.0, 7.0, 9.0, 6.0, 12.0,
        0.0, 8.0, 1.0, 17.0, 20.0,
    ]);
    #[rustfmt::skip]
    let a = Mat::from_row_slice(5, 5, &[
        17.0, 10.0, 10.0, 15.0, 7.0,
        9.0, 2.0, 4.0, 6.0, 9.0,
        18.0, 8.0, 20.0, 12.0, 15.0,
        5.0, 1.0, 4.0, 2.0, 19.0,
        14.0, 15.0, 3.0, 3.0, 12.0,
    ]);
    let b = Mat::from_column_slice(5, 1, &[2.0, 20.0, 1.0, 2.0, 18.0]);
    let c = Mat::from_row_slice(1, 5, &[16.0, 19.0, 3.0, 14.0, 14.0]);
    let d = Mat::from_element(1, 1, 9.3);
    DescriptorSystem::new(e, a, b, c, d).expect("fixed example is consistent")
}

/// RLC ladder: series resistor-inductor branches with shunt capacitors,
/// driven by a voltage source at the first branch; the output is the
/// source current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    pub sections: usize,
    pub resistance: f64,
    pub inductance: f64,
    pub capacitance: f64,
}

impl LadderSpec {
    pub fn new(sections: usize) -> Self {
        LadderSpec {
            sections,
            resistance: 1.0,
            inductance: 1.0,
            capacitance: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.resistance, self.inductance, self.capacitance];
        if self.sections == 0 || vals.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(
                "ladder needs at least one section and positive component values".into(),
            ));
        }
        Ok(())
    }
}

/// States are ordered `(φ1, q1, φ2, q2, ...)`: inductor flux and capacitor
/// charge of each section. Energy is `Σ φ²/2L + q²/2C`.
pub fn ladder_network(spec: &LadderSpec) -> Result<PhSystem> {
    spec.validate()?;
    let n = 2 * spec.sections;
    let mut j = Mat::zeros(n, n);
    let mut r = Mat::zeros(n, n);
    let mut q = Mat::zeros(n, n);
    for k in 0..spec.sections {
        let (phi, chg) = (2 * k, 2 * k + 1);
        j[(phi, chg)] = -1.0;
        j[(chg, phi)] = 1.0;
        if k > 0 {
            let prev = 2 * k - 1;
            j[(phi, prev)] = 1.0;
            j[(prev, phi)] = -1.0;
        }
        r[(phi, phi)] = spec.resistance;
        q[(phi, phi)] = 1.0 / spec.inductance;
        q[(chg, chg)] = 1.0 / spec.capacitance;
    }
    let mut f = Mat::zeros(n, 1);
    f[(0, 0)] = 1.0;
    PhSystem::new(
        Mat::identity(n, n),
        j,
        r,
        q,
        f,
        Mat::zeros(n, 1),
        Mat::zeros(1, 1),
        Mat::zeros(1, 1),
    )
}

pub fn ladder_statespace(spec: &LadderSpec) -> Result<StateSpaceSystem> {
    match ph_to_statespace(&ladder_network(spec)?) {
        LtiSystem::StateSpace(ss) => Ok(ss),
        LtiSystem::Descriptor(_) => unreachable!("ladder has E = I"),
    }
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let qr = gaussian(rng, n, n).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
        }
    }
    q
}

/// Random pH system with `Q = I`, `E = I` and passivity block
/// `W = K Kᵀ / (n + m) + 0.1 I`, so `λ_min(R) ≥ 0.1`.
pub fn random_passive_ph(n: usize, m: usize, seed: u64) -> Result<PhSystem> {
    if m == 0 {
        return Err(Error::InvalidArgument("at least one port is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = skew(&gaussian(&mut rng, n, n));
    let k = gaussian(&mut rng, n + m, n + m);
    let w = &k * k.transpose() / (n + m) as f64 + Mat::identity(n + m, n + m) * 0.1;
    let w = crate::linalg::sym(&w);
    let r = w.view((0, 0), (n, n)).into_owned();
    let p = w.view((0, n), (n, m)).into_owned();
    let s = w.view((n, n), (m, m)).into_owned();
    let f = gaussian(&mut rng, n, m);
    let nn = skew(&gaussian(&mut rng, m, m));
    PhSystem::new(
        Mat::identity(n, n),
        j,
        r,
        Mat::identity(n, n),
        f,
        p,
        s,
        nn,
    )
}

/// State-space form of [`random_passive_ph`]: stable and strictly passive.
pub fn random_passive(n: usize, m: usize, seed: u64) -> Result<StateSpaceSystem> {
    match ph_to_statespace(&random_passive_ph(n, m, seed)?) {
        LtiSystem::StateSpace(ss) => Ok(ss),
        LtiSystem::Descriptor(_) => unreachable!("E = I"),
    }
}

/// Random regular index-one descriptor system of order `n` with
/// `rank E = d`. `E = U diag(σ, 0) Vᵀ` with `σ ∈ [0.5, 2]` and the algebraic
/// block of `A` kept well conditioned.
pub fn random_index1(n: usize, d: usize, m: usize, seed: u64) -> Result<DescriptorSystem> {
    if d > n || m == 0 {
        return Err(Error::InvalidArgument(format!(
            "invalid random index-one dimensions n={n} d={d} m={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_orthogonal(&mut rng, n);
    let v = random_orthogonal(&mut rng, n);
    let mut sigma = Mat::zeros(n, n);
    for i in 0..d {
        sigma[(i, i)] = rng.random_range(0.5..2.0);
    }
    let e = &u * sigma * v.transpose();
    let a22_cond = |a: &Mat| {
        let blk = (u.transpose() * a * &v).view((d, d), (n - d, n - d)).into_owned();
        cond2(&blk)
    };
    let mut a = gaussian(&mut rng, n, n);
    while a22_cond(&a) > 1e3 {
        a = gaussian(&mut rng, n, n);
    }
    let b = gaussian(&mut rng, n, m);
    let c = gaussian(&mut rng, m, n);
    let dd = gaussian(&mut rng, m, m);
    DescriptorSystem::new(e, a, b, c, dd)
}

/// Random state-space system with spectral abscissa at most −0.5.
pub fn random_stable(n: usize, m: usize, seed: u64) -> Result<StateSpaceSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a0 = gaussian(&mut rng, n, n);
    let shift = crate::linalg::spectral_abscissa(&a0).max(0.0) + 0.5;
    let a = a0 - Mat::identity(n, n) * shift;
    let b = gaussian(&mut rng, n, m);
    let c = gaussian(&mut rng, m, n);
    let d = gaussian(&mut rng, m, m);
    StateSpaceSystem::new(a, b, c, d)
}
