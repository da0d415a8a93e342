//! Nearest port-Hamiltonian system by a fast projected gradient method.
//!
//! The distance of a decomposition `(M, J, R, F, P, S)` to a system
//! `(E, A, B, C, D)` is
//!
//! ```text
//! w_e ‖E − M‖² + w_k ‖skew(Δ)‖² + w_s ‖sym(Δ)‖² + w_b ‖B − (F − P)‖²
//!     + w_c ‖C − (F + P)ᵀ‖² + w_d ‖(D + Dᵀ)/2 − S‖²,    Δ = A − (J − R),
//! ```
//!
//! minimized over `Jᵀ = −J`, `M ⪰ 0` and `[[R, P], [Pᵀ, S]] ⪰ 0`.

use std::io::Write;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{dim_err, Error, Result};
use crate::kyp::{self, Factorization};
use crate::linalg::{block2, fro, inverse, min_eig_sym, norm2, rank_threshold, skew, sym, Mat};
use crate::sysrep::{DescriptorSystem, PhSystem, StateSpaceSystem, Tolerances};

#[derive(Debug, Clone, PartialEq)]
pub struct PhDecomposition {
    pub m: Mat,
    pub j: Mat,
    pub r: Mat,
    pub f: Mat,
    pub p: Mat,
    pub s: Mat,
}

/// Measured constraint violations of a decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub j_skew_violation: f64,
    pub m_min_eig: f64,
    pub w_min_eig: f64,
    pub feasible: bool,
}

impl PhDecomposition {
    pub fn zeros(n: usize, m: usize) -> Self {
        PhDecomposition {
            m: Mat::zeros(n, n),
            j: Mat::zeros(n, n),
            r: Mat::zeros(n, n),
            f: Mat::zeros(n, m),
            p: Mat::zeros(n, m),
            s: Mat::zeros(m, m),
        }
    }

    pub fn order(&self) -> usize {
        self.j.nrows()
    }

    pub fn io_dim(&self) -> usize {
        self.s.nrows()
    }

    pub fn passivity_block(&self) -> Mat {
        block2(&self.r, &self.p, &self.p.transpose(), &self.s)
    }

    /// Parts of a pH system with `Q = I`.
    pub fn from_ph(ph: &PhSystem) -> Self {
        PhDecomposition {
            m: ph.e().clone(),
            j: ph.j().clone(),
            r: ph.r().clone(),
            f: ph.f().clone(),
            p: ph.p().clone(),
            s: ph.s().clone(),
        }
    }

    pub fn feasibility(&self, tol: &Tolerances) -> Feasibility {
        let j_skew_violation = fro(&(&self.j + self.j.transpose()));
        let m_min_eig = min_eig_sym(&self.m);
        let w = self.passivity_block();
        let w_min_eig = min_eig_sym(&w);
        let feasible = j_skew_violation <= tol.psd_tol * (1.0 + fro(&self.j))
            && m_min_eig >= -tol.psd_tol * (1.0 + norm2(&self.m))
            && w_min_eig >= -tol.psd_tol * (1.0 + norm2(&w));
        Feasibility {
            j_skew_violation,
            m_min_eig,
            w_min_eig,
            feasible,
        }
    }

    /// Projection onto the feasible set. `R`, `P`, `S` are projected jointly
    /// through the passivity block.
    pub fn project(&self) -> Self {
        let n = self.order();
        let m = self.io_dim();
        let w = project_psd(&self.passivity_block());
        PhDecomposition {
            m: project_psd(&self.m),
            j: project_skew(&self.j),
            r: w.view((0, 0), (n, n)).into_owned(),
            p: w.view((0, n), (n, m)).into_owned(),
            s: w.view((n, n), (m, m)).into_owned(),
            f: self.f.clone(),
        }
    }

    fn axpy(&self, alpha: f64, other: &Self) -> Self {
        PhDecomposition {
            m: &self.m + &other.m * alpha,
            j: &self.j + &other.j * alpha,
            r: &self.r + &other.r * alpha,
            f: &self.f + &other.f * alpha,
            p: &self.p + &other.p * alpha,
            s: &self.s + &other.s * alpha,
        }
    }

    fn check_dims(&self, sys: &DescriptorSystem) -> Result<()> {
        if self.order() != sys.order() || self.io_dim() != sys.io_dim() {
            return Err(dim_err(format!(
                "decomposition of size ({}, {}) does not match system of size ({}, {})",
                self.order(),
                self.io_dim(),
                sys.order(),
                sys.io_dim()
            )));
        }
        Ok(())
    }
}

/// Weights of the six objective terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Weights {
    pub e: f64,
    pub a_skew: f64,
    pub a_sym: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            e: 1.0,
            a_skew: 1.0,
            a_sym: 1.0,
            b: 1.0,
            c: 1.0,
            d: 1.0,
        }
    }
}

impl Weights {
    fn max(&self) -> f64 {
        [self.e, self.a_skew, self.a_sym, self.b, self.c, self.d]
            .into_iter()
            .fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<()> {
        let all = [self.e, self.a_skew, self.a_sym, self.b, self.c, self.d];
        if all.iter().all(|w| *w >= 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("objective weights must be nonnegative".into()))
        }
    }
}

pub fn project_skew(x: &Mat) -> Mat {
    skew(x)
}

pub fn project_psd(x: &Mat) -> Mat {
    crate::linalg::project_psd(x)
}

struct Residuals {
    e: Mat,
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
}

fn residuals(dec: &PhDecomposition, sys: &DescriptorSystem) -> Residuals {
    Residuals {
        e: sys.e() - &dec.m,
        a: sys.a() - (&dec.j - &dec.r),
        b: sys.b() - (&dec.f - &dec.p),
        c: sys.c() - (&dec.f + &dec.p).transpose(),
        d: sym(sys.d()) - &dec.s,
    }
}

fn sq(m: &Mat) -> f64 {
    m.norm_squared()
}

pub fn objective(dec: &PhDecomposition, sys: &DescriptorSystem, w: &Weights) -> Result<f64> {
    dec.check_dims(sys)?;
    let r = residuals(dec, sys);
    Ok(w.e * sq(&r.e)
        + w.a_skew * sq(&skew(&r.a))
        + w.a_sym * sq(&sym(&r.a))
        + w.b * sq(&r.b)
        + w.c * sq(&r.c)
        + w.d * sq(&r.d))
}

/// Euclidean gradient of [`objective`] with respect to each part.
pub fn gradient(dec: &PhDecomposition, sys: &DescriptorSystem, w: &Weights) -> Result<PhDecomposition> {
    dec.check_dims(sys)?;
    let r = residuals(dec, sys);
    let ga = skew(&r.a) * w.a_skew + sym(&r.a) * w.a_sym;
    let gb = &r.b * w.b;
    let gc = r.c.transpose() * w.c;
    Ok(PhDecomposition {
        m: &r.e * (-2.0 * w.e),
        j: &ga * -2.0,
        r: &ga * 2.0,
        f: (&gb + &gc) * -2.0,
        p: (&gb - &gc) * 2.0,
        s: &r.d * (-2.0 * w.d),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StepPolicy {
    Fixed(f64),
    /// Step `1 / L` with `L = 4 max(weights)`.
    Lipschitz,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FgmOptions {
    pub max_iters: usize,
    pub step_policy: StepPolicy,
    pub restart: bool,
    pub weights: Weights,
    pub seed: u64,
    pub stop_tol: f64,
}

impl Default for FgmOptions {
    fn default() -> Self {
        FgmOptions {
            max_iters: 10_000,
            step_policy: StepPolicy::Lipschitz,
            restart: true,
            weights: Weights::default(),
            seed: 0,
            stop_tol: 1e-10,
        }
    }
}

impl FgmOptions {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if let StepPolicy::Fixed(h) = self.step_policy {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidArgument(format!("invalid step size {h}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptTrace {
    pub objective_per_iter: Vec<f64>,
    pub restarts: Vec<usize>,
    pub final_objective: f64,
    pub converged: bool,
}

impl OptTrace {
    /// CSV with header `iter,objective,restart_flag`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "objective", "restart_flag"])?;
        let mut restarts = self.restarts.iter().peekable();
        for (k, f) in self.objective_per_iter.iter().enumerate() {
            let flag = restarts.next_if(|&&r| r == k).is_some();
            w.write_record([k.to_string(), format!("{f:e}"), u8::from(flag).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// How the reported pH system stores `M`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub enum QConvention {
    /// `E = I`, `Q = M⁻¹` in the coordinates `z = M x` when `M ≻ 0`;
    /// otherwise falls back to [`QConvention::Descriptor`].
    #[default]
    InverseM,
    /// `E = M`, `Q = I`.
    Descriptor,
}

#[derive(Debug, Clone)]
pub struct NearestResult {
    pub ph: PhSystem,
    pub decomposition: PhDecomposition,
    pub trace: OptTrace,
}

/// Accelerated projected gradient iteration with function-value restarts.
///
/// The step for `(R, P, S)` is taken in the metric of the passivity block,
/// where `P` appears twice, so its gradient is halved before projecting.
pub fn fgm_nearest_ph(
    sys: &DescriptorSystem,
    init: &PhDecomposition,
    opts: &FgmOptions,
) -> Result<NearestResult> {
    fgm_nearest_ph_with(sys, init, opts, QConvention::default(), &Tolerances::default())
}

pub fn fgm_nearest_ph_with(
    sys: &DescriptorSystem,
    init: &PhDecomposition,
    opts: &FgmOptions,
    convention: QConvention,
    tol: &Tolerances,
) -> Result<NearestResult> {
    opts.validate()?;
    init.check_dims(sys)?;
    let w = &opts.weights;
    let step = match opts.step_policy {
        StepPolicy::Fixed(h) => h,
        StepPolicy::Lipschitz => {
            let l = 4.0 * w.max();
            if l > 0.0 {
                1.0 / l
            } else {
                0.0
            }
        }
    };
    let descend = |x: &PhDecomposition| -> Result<PhDecomposition> {
        let mut g = gradient(x, sys, w)?;
        g.p *= 0.5;
        Ok(x.axpy(-step, &g).project())
    };

    let mut x = init.project();
    let mut fx = objective(&x, sys, w)?;
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut trace = vec![fx];
    let mut restarts = Vec::new();
    let mut converged = false;
    let mut best = (fx, x.clone());

    for k in 1..=opts.max_iters {
        let mut x_new = descend(&y)?;
        let mut f_new = objective(&x_new, sys, w)?;
        if opts.restart && f_new > fx {
            restarts.push(k);
            t = 1.0;
            x_new = descend(&x)?;
            f_new = objective(&x_new, sys, w)?;
        }
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_new;
        y = x_new.axpy(momentum, &x_new.axpy(-1.0, &x));
        x = x_new;
        fx = f_new;
        t = t_new;
        trace.push(fx);
        if fx < best.0 {
            best = (fx, x.clone());
        }
        if k >= 10 {
            let old = trace[k - 10];
            if old - fx <= opts.stop_tol * old {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        warn!(
            "nearest pH iteration stopped after {} iterations without meeting the stopping rule",
            opts.max_iters
        );
    }
    let (final_objective, dec) = best;
    if trace.last() != Some(&final_objective) {
        trace.push(final_objective);
    }
    let ph = decomposition_to_ph(&dec, sys, convention, tol)?;
    Ok(NearestResult {
        ph,
        decomposition: dec,
        trace: OptTrace {
            objective_per_iter: trace,
            restarts,
            final_objective,
            converged,
        },
    })
}

/// pH system from a decomposition, with `N = skew(D)`.
pub fn decomposition_to_ph(
    dec: &PhDecomposition,
    sys: &DescriptorSystem,
    convention: QConvention,
    tol: &Tolerances,
) -> Result<PhSystem> {
    let n = dec.order();
    let nn = skew(sys.d());
    let m_sym = sym(&dec.m);
    let invertible = n == 0 || min_eig_sym(&m_sym) > rank_threshold(n, tol.rank_tol, norm2(&m_sym));
    if convention == QConvention::InverseM && invertible {
        let q = sym(&inverse(&m_sym).ok_or_else(|| Error::Numerical("singular M".into()))?);
        return PhSystem::new(
            Mat::identity(n, n),
            dec.j.clone(),
            dec.r.clone(),
            q,
            dec.f.clone(),
            dec.p.clone(),
            dec.s.clone(),
            nn,
        );
    }
    if convention == QConvention::InverseM {
        warn!("M is singular; reporting the descriptor form E = M, Q = I");
    }
    PhSystem::new(
        m_sym,
        dec.j.clone(),
        dec.r.clone(),
        Mat::identity(n, n),
        dec.f.clone(),
        dec.p.clone(),
        dec.s.clone(),
        nn,
    )
}

/// Starting point for the iteration and the target system in the matching
/// coordinates.
#[derive(Debug, Clone)]
pub struct LmiInit {
    pub decomposition: PhDecomposition,
    /// Target in the coordinates of the decomposition.
    pub target: DescriptorSystem,
    /// `z = T x` relating the target to the input system (identity when the
    /// given coordinates are kept).
    pub transform: Mat,
    /// True when the KYP route failed and a projected random point is used.
    pub fallback: bool,
}

/// Coordinates in which the nearest problem is posed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub enum Coordinates {
    /// Energy coordinates `z = T x` of the KYP certificate `Q̂ = TᵀT`.
    #[default]
    Certificate,
    /// The coordinates of the input realization.
    Given,
}

/// Projected random decomposition scaled to the system's magnitude.
pub fn random_init(sys: &DescriptorSystem, seed: u64) -> PhDecomposition {
    let n = sys.order();
    let m = sys.io_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = (sys.a().norm() + sys.e().norm() + sys.b().norm() + sys.c().norm())
        / ((n * n + 2 * n * m).max(1) as f64).sqrt();
    let mut g = |r: usize, c: usize| {
        Mat::from_fn(r, c, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale.max(1e-3)
        })
    };
    PhDecomposition {
        m: g(n, n),
        j: g(n, n),
        r: g(n, n),
        f: g(n, m),
        p: g(n, m),
        s: g(m, m),
    }
    .project()
}

/// Initial decomposition from the KYP construction (`M = I`, parts of the
/// pH form in energy coordinates). A singular `D + Dᵀ` for which the
/// projected solve fails is retried with a small shift; when no certificate
/// exists a projected random point is used.
pub fn lmi_init(sys: &StateSpaceSystem, coords: Coordinates, seed: u64, tol: &Tolerances) -> LmiInit {
    let n = sys.order();
    let given = DescriptorSystem::from(sys);
    let kyp_route = kyp::solve_kyp(sys, tol)
        .or_else(|e| {
            if !crate::prbt::feedthrough_is_singular(sys.d(), tol) {
                return Err(e);
            }
            let eps = crate::prbt::default_epsilon(sys.d());
            warn!("projected KYP solve failed ({e}); initializing from D + Dᵀ + {eps:.3e} I");
            kyp::solve_kyp_with(sys, tol, kyp::SingularFeedthrough::Epsilon(eps))
        })
        .and_then(|sol| kyp::ph_from_kyp_with(sys, &sol, Factorization::Cholesky, tol));
    match kyp_route {
        Ok(real) => match coords {
            Coordinates::Certificate => {
                let target = DescriptorSystem::from(&sys.transform(&real.t, &real.t_inv));
                LmiInit {
                    decomposition: PhDecomposition::from_ph(&real.ph),
                    target,
                    transform: real.t,
                    fallback: false,
                }
            }
            Coordinates::Given => {
                // Back to the input coordinates: M = TᵀT, J -> TᵀJT, ...
                let ph = &real.ph;
                let t = &real.t;
                let tt = t.transpose();
                let dec = PhDecomposition {
                    m: sym(&(&tt * t)),
                    j: skew(&(&tt * ph.j() * t)),
                    r: sym(&(&tt * ph.r() * t)),
                    f: &tt * ph.f(),
                    p: &tt * ph.p(),
                    s: ph.s().clone(),
                };
                LmiInit {
                    decomposition: dec.project(),
                    target: given,
                    transform: Mat::identity(n, n),
                    fallback: false,
                }
            }
        },
        Err(e) => {
            warn!("KYP initialization failed ({e}); starting from a projected random point");
            LmiInit {
                decomposition: random_init(&given, seed),
                target: given,
                transform: Mat::identity(n, n),
                fallback: true,
            }
        }
    }
}

/// Runs independent iterations from several starting points in parallel and
/// returns the results ordered by final objective.
pub fn multi_start(
    sys: &DescriptorSystem,
    inits: &[PhDecomposition],
    opts: &FgmOptions,
    convention: QConvention,
    tol: &Tolerances,
) -> Result<Vec<NearestResult>> {
    let mut results = std::thread::scope(|s| {
        let handles: Vec<_> = inits
            .iter()
            .map(|init| s.spawn(move || fgm_nearest_ph_with(sys, init, opts, convention, tol)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("optimization thread panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    results.sort_by(|a, b| a.trace.final_objective.total_cmp(&b.trace.final_objective));
    Ok(results)
}

/// Starting points for a multi-start run: the given point followed by
/// `count − 1` seeded random perturbations of it, all projected.
pub fn perturbed_starts(base: &PhDecomposition, count: usize, seed: u64, scale: f64) -> Vec<PhDecomposition> {
    let mut out = vec![base.project()];
    for k in 1..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let mut noise = |x: &Mat| {
            Mat::from_fn(x.nrows(), x.ncols(), |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
        };
        let pert = PhDecomposition {
            m: noise(&base.m),
            j: noise(&base.j),
            r: noise(&base.r),
            f: noise(&base.f),
            p: noise(&base.p),
            s: noise(&base.s),
        };
        out.push(base.axpy(1.0, &pert).project());
    }
    out
}
