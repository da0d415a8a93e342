//! System representations, transfer-function evaluation and structural
//! validation of port-Hamiltonian realizations.

use std::io::{Read, Write};

use nalgebra::Complex;
use serde::Serialize;

use crate::error::{dim_err, Error, Result};
use crate::linalg::{cnorm2, csolve, fro, min_eig_sym, norm2, sym, CMat, Mat};

type C64 = Complex<f64>;

/// Numerical thresholds used throughout the pipeline.
///
/// `rank_tol` is a per-dimension relative factor: a singular value counts as
/// zero when it is below `n · rank_tol · σ_max`. Condition numbers above
/// `1 / rank_tol` are treated as singular. `psd_tol` is relative to
/// `1 + ‖X‖₂` of the matrix being checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub rank_tol: f64,
    pub psd_tol: f64,
    pub residual_tol: f64,
    pub freq_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_tol: f64::EPSILON,
            psd_tol: 1e-8,
            residual_tol: 1e-8,
            freq_tol: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [self.rank_tol, self.psd_tol, self.residual_tol, self.freq_tol];
        if all.iter().all(|&t| t > 0.0 && t.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("tolerances must be positive and finite".into()))
        }
    }

    /// Largest condition number still treated as nonsingular.
    pub fn cond_limit(&self) -> f64 {
        1.0 / self.rank_tol
    }
}

fn check_shape(name: &str, m: &Mat, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(dim_err(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Descriptor system `E x' = A x + B u`, `y = C x + D u` with square
/// input/output channels.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSystem {
    e: Mat,
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
}

impl DescriptorSystem {
    pub fn new(e: Mat, a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        let n = a.nrows();
        let m = d.nrows();
        if m == 0 {
            return Err(dim_err("at least one input/output channel is required"));
        }
        check_shape("E", &e, n, n)?;
        check_shape("A", &a, n, n)?;
        check_shape("B", &b, n, m)?;
        check_shape("C", &c, m, n)?;
        check_shape("D", &d, m, m)?;
        Ok(DescriptorSystem { e, a, b, c, d })
    }

    pub fn e(&self) -> &Mat {
        &self.e
    }
    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }
    pub fn order(&self) -> usize {
        self.a.nrows()
    }
    pub fn io_dim(&self) -> usize {
        self.d.nrows()
    }
}

impl From<&StateSpaceSystem> for DescriptorSystem {
    fn from(ss: &StateSpaceSystem) -> Self {
        let n = ss.order();
        DescriptorSystem {
            e: Mat::identity(n, n),
            a: ss.a.clone(),
            b: ss.b.clone(),
            c: ss.c.clone(),
            d: ss.d.clone(),
        }
    }
}

/// Strangeness-free semi-explicit system
/// `E1 x' = A1 x + B1 u`, `0 = A2 x + B2 u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiExplicitSystem {
    e1: Mat,
    a1: Mat,
    b1: Mat,
    a2: Mat,
    b2: Mat,
    c: Mat,
    d: Mat,
    cond_e1a2: f64,
}

impl SemiExplicitSystem {
    /// Builds the system and checks that `[E1; A2]` is invertible.
    #[allow(clippy::too_many_arguments)]
    pub fn new(e1: Mat, a1: Mat, b1: Mat, a2: Mat, b2: Mat, c: Mat, d: Mat) -> Result<Self> {
        let n = e1.ncols();
        let dd = e1.nrows();
        let aa = a2.nrows();
        let m = d.nrows();
        if m == 0 {
            return Err(dim_err("at least one input/output channel is required"));
        }
        if dd + aa != n {
            return Err(dim_err(format!("d + a = {} + {} differs from n = {n}", dd, aa)));
        }
        check_shape("A1", &a1, dd, n)?;
        check_shape("B1", &b1, dd, m)?;
        check_shape("A2", &a2, aa, n)?;
        check_shape("B2", &b2, aa, m)?;
        check_shape("C", &c, m, n)?;
        check_shape("D", &d, m, m)?;
        let stacked = crate::linalg::vstack(&e1, &a2);
        let cond_e1a2 = crate::linalg::cond2(&stacked);
        if !cond_e1a2.is_finite() {
            return Err(Error::IllConditioned {
                what: "[E1; A2]",
                cond: cond_e1a2,
            });
        }
        Ok(SemiExplicitSystem {
            e1,
            a1,
            b1,
            a2,
            b2,
            c,
            d,
            cond_e1a2,
        })
    }

    pub fn e1(&self) -> &Mat {
        &self.e1
    }
    pub fn a1(&self) -> &Mat {
        &self.a1
    }
    pub fn b1(&self) -> &Mat {
        &self.b1
    }
    pub fn a2(&self) -> &Mat {
        &self.a2
    }
    pub fn b2(&self) -> &Mat {
        &self.b2
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }
    /// Condition number of `[E1; A2]`.
    pub fn cond_e1a2(&self) -> f64 {
        self.cond_e1a2
    }
    pub fn order(&self) -> usize {
        self.e1.ncols()
    }
    pub fn differential_dim(&self) -> usize {
        self.e1.nrows()
    }
    pub fn algebraic_dim(&self) -> usize {
        self.a2.nrows()
    }
    pub fn io_dim(&self) -> usize {
        self.d.nrows()
    }

    /// The same system as a descriptor system with `E = [E1; 0]`.
    pub fn to_descriptor(&self) -> DescriptorSystem {
        let n = self.order();
        let aa = self.algebraic_dim();
        DescriptorSystem {
            e: crate::linalg::vstack(&self.e1, &Mat::zeros(aa, n)),
            a: crate::linalg::vstack(&self.a1, &self.a2),
            b: crate::linalg::vstack(&self.b1, &self.b2),
            c: self.c.clone(),
            d: self.d.clone(),
        }
    }
}

/// Standard state-space system `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceSystem {
    a: Mat,
    b: Mat,
    c: Mat,
    d: Mat,
}

impl StateSpaceSystem {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Mat) -> Result<Self> {
        let n = a.nrows();
        let m = d.nrows();
        if m == 0 {
            return Err(dim_err("at least one input/output channel is required"));
        }
        check_shape("A", &a, n, n)?;
        check_shape("B", &b, n, m)?;
        check_shape("C", &c, m, n)?;
        check_shape("D", &d, m, m)?;
        Ok(StateSpaceSystem { a, b, c, d })
    }

    /// Pure feedthrough system of order zero.
    pub fn static_gain(d: Mat) -> Result<Self> {
        let m = d.nrows();
        Self::new(Mat::zeros(0, 0), Mat::zeros(0, m), Mat::zeros(m, 0), d)
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }
    pub fn order(&self) -> usize {
        self.a.nrows()
    }
    pub fn io_dim(&self) -> usize {
        self.d.nrows()
    }

    /// Applies the state transformation `z = T x`.
    pub fn transform(&self, t: &Mat, t_inv: &Mat) -> StateSpaceSystem {
        StateSpaceSystem {
            a: t * &self.a * t_inv,
            b: t * &self.b,
            c: &self.c * t_inv,
            d: self.d.clone(),
        }
    }

    pub fn into_parts(self) -> (Mat, Mat, Mat, Mat) {
        (self.a, self.b, self.c, self.d)
    }
}

/// Port-Hamiltonian descriptor system
/// `E x' = (J - R) Q x + (F - P) u`, `y = (F + P)^T Q x + (S + N) u`
/// with Hamiltonian `½ xᵀ Eᵀ Q x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhSystem {
    e: Mat,
    j: Mat,
    r: Mat,
    q: Mat,
    f: Mat,
    p: Mat,
    s: Mat,
    n: Mat,
}

impl PhSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(e: Mat, j: Mat, r: Mat, q: Mat, f: Mat, p: Mat, s: Mat, n: Mat) -> Result<Self> {
        let nn = j.nrows();
        let m = s.nrows();
        if m == 0 {
            return Err(dim_err("at least one port is required"));
        }
        check_shape("E", &e, nn, nn)?;
        check_shape("J", &j, nn, nn)?;
        check_shape("R", &r, nn, nn)?;
        check_shape("Q", &q, nn, nn)?;
        check_shape("F", &f, nn, m)?;
        check_shape("P", &p, nn, m)?;
        check_shape("S", &s, m, m)?;
        check_shape("N", &n, m, m)?;
        Ok(PhSystem {
            e,
            j,
            r,
            q,
            f,
            p,
            s,
            n,
        })
    }

    pub fn e(&self) -> &Mat {
        &self.e
    }
    pub fn j(&self) -> &Mat {
        &self.j
    }
    pub fn r(&self) -> &Mat {
        &self.r
    }
    pub fn q(&self) -> &Mat {
        &self.q
    }
    pub fn f(&self) -> &Mat {
        &self.f
    }
    pub fn p(&self) -> &Mat {
        &self.p
    }
    pub fn s(&self) -> &Mat {
        &self.s
    }
    pub fn n(&self) -> &Mat {
        &self.n
    }
    pub fn order(&self) -> usize {
        self.j.nrows()
    }
    pub fn io_dim(&self) -> usize {
        self.s.nrows()
    }

    /// Passivity block `[[R, P], [Pᵀ, S]]`.
    pub fn passivity_block(&self) -> Mat {
        crate::linalg::block2(&self.r, &self.p, &self.p.transpose(), &self.s)
    }

    /// Stored energy `½ xᵀ Eᵀ Q x`.
    pub fn hamiltonian(&self, x: &nalgebra::DVector<f64>) -> f64 {
        0.5 * (x.transpose() * self.e.transpose() * &self.q * x)[(0, 0)]
    }

    pub fn has_identity_e(&self) -> bool {
        let n = self.order();
        self.e == Mat::identity(n, n)
    }
}

/// Either a standard or a descriptor realization.
#[derive(Debug, Clone, PartialEq)]
pub enum LtiSystem {
    StateSpace(StateSpaceSystem),
    Descriptor(DescriptorSystem),
}

impl LtiSystem {
    pub fn order(&self) -> usize {
        match self {
            LtiSystem::StateSpace(s) => s.order(),
            LtiSystem::Descriptor(s) => s.order(),
        }
    }

    pub fn to_descriptor(&self) -> DescriptorSystem {
        match self {
            LtiSystem::StateSpace(s) => s.into(),
            LtiSystem::Descriptor(s) => s.clone(),
        }
    }
}

/// `(E, (J−R)Q, F−P, (F+P)ᵀQ, S+N)`; a state-space system when `E = I`.
pub fn ph_to_statespace(ph: &PhSystem) -> LtiSystem {
    let a = (&ph.j - &ph.r) * &ph.q;
    let b = &ph.f - &ph.p;
    let c = (&ph.f + &ph.p).transpose() * &ph.q;
    let d = &ph.s + &ph.n;
    if ph.has_identity_e() {
        LtiSystem::StateSpace(StateSpaceSystem { a, b, c, d })
    } else {
        LtiSystem::Descriptor(DescriptorSystem {
            e: ph.e.clone(),
            a,
            b,
            c,
            d,
        })
    }
}

/// Sampled transfer-function values on a strictly increasing frequency grid
/// (rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    frequencies: Vec<f64>,
    values: Vec<CMat>,
}

impl FrequencyResponse {
    pub fn new(frequencies: Vec<f64>, values: Vec<CMat>) -> Result<Self> {
        if frequencies.len() != values.len() {
            return Err(dim_err(format!(
                "{} frequencies but {} response values",
                frequencies.len(),
                values.len()
            )));
        }
        if frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "frequencies must be strictly increasing".into(),
            ));
        }
        if let Some(first) = values.first() {
            if values.iter().any(|v| v.shape() != first.shape()) {
                return Err(dim_err("response values differ in shape"));
            }
        }
        Ok(FrequencyResponse { frequencies, values })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }
    pub fn values(&self) -> &[CMat] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }
    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// CSV with header `omega,re_11,im_11,re_12,...` in row-major entry order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let (r, c) = self.values.first().map(|v| v.shape()).unwrap_or((0, 0));
        let mut header = vec!["omega".to_string()];
        for i in 1..=r {
            for j in 1..=c {
                header.push(format!("re_{i}{j}"));
                header.push(format!("im_{i}{j}"));
            }
        }
        w.write_record(&header)?;
        for (omega, val) in self.frequencies.iter().zip(&self.values) {
            let mut rec = vec![format!("{omega:e}")];
            for i in 0..r {
                for j in 0..c {
                    rec.push(format!("{:e}", val[(i, j)].re));
                    rec.push(format!("{:e}", val[(i, j)].im));
                }
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        let entries = header.len().saturating_sub(1) / 2;
        let side = (entries as f64).sqrt().round() as usize;
        if header.get(0) != Some("omega") || side * side != entries || header.len() % 2 == 0 {
            return Err(Error::Parse("unexpected frequency response CSV header".into()));
        }
        let mut freqs = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let nums: Vec<f64> = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(e.to_string()))?;
            freqs.push(nums[0]);
            values.push(CMat::from_fn(side, side, |i, j| {
                let k = 1 + 2 * (i * side + j);
                C64::new(nums[k], nums[k + 1])
            }));
        }
        Self::new(freqs, values)
    }
}

/// Logarithmically spaced grid from `wmin` to `wmax` (inclusive).
pub fn log_grid(wmin: f64, wmax: f64, npts: usize) -> Result<Vec<f64>> {
    if !(wmin > 0.0 && wmax > wmin && npts >= 2) {
        return Err(Error::InvalidArgument(format!(
            "invalid grid {wmin}:{wmax}:{npts}"
        )));
    }
    let (l0, l1) = (wmin.log10(), wmax.log10());
    Ok((0..npts)
        .map(|k| 10f64.powf(l0 + (l1 - l0) * k as f64 / (npts - 1) as f64))
        .collect())
}

/// Default Bode grid: 400 points from 1e-2 to 1e4 rad/s.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-2, 1e4, 400).expect("static grid")
}

/// Transfer-function evaluation `G(s)`.
pub trait TransferFunction {
    fn eval_transfer(&self, s: C64, tol: &Tolerances) -> Result<CMat>;

    /// `G(iω)` over a frequency grid.
    fn frequency_response(&self, omegas: &[f64], tol: &Tolerances) -> Result<FrequencyResponse> {
        let values = omegas
            .iter()
            .map(|&w| self.eval_transfer(C64::new(0.0, w), tol))
            .collect::<Result<Vec<_>>>()?;
        FrequencyResponse::new(omegas.to_vec(), values)
    }
}

fn singular_check(s: C64, cond: f64, tol: &Tolerances) -> Result<()> {
    if !cond.is_finite() || cond > tol.cond_limit() {
        Err(Error::SingularPencil { s, cond })
    } else {
        Ok(())
    }
}

impl TransferFunction for DescriptorSystem {
    fn eval_transfer(&self, s: C64, tol: &Tolerances) -> Result<CMat> {
        let n = self.order();
        let d = self.d.map(|x| C64::new(x, 0.0));
        if n == 0 {
            return Ok(d);
        }
        let pencil = CMat::from_fn(n, n, |i, j| s * self.e[(i, j)] - self.a[(i, j)]);
        let (x, cond) = csolve(&pencil, &self.b.map(|x| C64::new(x, 0.0)));
        singular_check(s, cond, tol)?;
        let x = x.ok_or(Error::SingularPencil { s, cond })?;
        Ok(self.c.map(|x| C64::new(x, 0.0)) * x + d)
    }
}

impl TransferFunction for StateSpaceSystem {
    fn eval_transfer(&self, s: C64, tol: &Tolerances) -> Result<CMat> {
        DescriptorSystem::from(self).eval_transfer(s, tol)
    }

    fn frequency_response(&self, omegas: &[f64], tol: &Tolerances) -> Result<FrequencyResponse> {
        let n = self.order();
        let d = self.d.map(|x| C64::new(x, 0.0));
        if n == 0 {
            return FrequencyResponse::new(omegas.to_vec(), vec![d; omegas.len()]);
        }
        // One Hessenberg reduction, then O(n^2) solves per frequency.
        let hess = self.a.clone().hessenberg();
        let q = hess.q();
        let h = hess.h();
        let qb = (q.transpose() * &self.b).map(|x| C64::new(x, 0.0));
        let cq = (&self.c * &q).map(|x| C64::new(x, 0.0));
        let mut values = Vec::with_capacity(omegas.len());
        for &w in omegas {
            let s = C64::new(0.0, w);
            let (x, cond) = hessenberg_solve(&h, s, &qb);
            singular_check(s, cond, tol)?;
            let x = x.ok_or(Error::SingularPencil { s, cond })?;
            values.push(&cq * x + &d);
        }
        FrequencyResponse::new(omegas.to_vec(), values)
    }
}

/// Solves `(s I − H) X = rhs` for upper Hessenberg `H` by Gaussian
/// elimination with adjacent-row pivoting.
fn hessenberg_solve(h: &Mat, s: C64, rhs: &CMat) -> (Option<CMat>, f64) {
    let n = h.nrows();
    let mut m = CMat::from_fn(n, n, |i, j| {
        let v = C64::new(-h[(i, j)], 0.0);
        if i == j {
            v + s
        } else {
            v
        }
    });
    let mut x = rhs.clone();
    let k_cols = x.ncols();
    for k in 0..n.saturating_sub(1) {
        if m[(k + 1, k)].norm() > m[(k, k)].norm() {
            m.swap_rows(k, k + 1);
            x.swap_rows(k, k + 1);
        }
        let piv = m[(k, k)];
        if piv.norm() == 0.0 {
            continue;
        }
        let l = m[(k + 1, k)] / piv;
        if l.norm() != 0.0 {
            m[(k + 1, k)] = C64::new(0.0, 0.0);
            for j in k + 1..n {
                let t = m[(k, j)];
                m[(k + 1, j)] -= l * t;
            }
            for j in 0..k_cols {
                let t = x[(k, j)];
                x[(k + 1, j)] -= l * t;
            }
        }
    }
    let mut pmax = 0.0_f64;
    let mut pmin = f64::INFINITY;
    for i in 0..n {
        let p = m[(i, i)].norm();
        pmax = pmax.max(p);
        pmin = pmin.min(p);
    }
    if pmin == 0.0 {
        return (None, f64::INFINITY);
    }
    for j in 0..k_cols {
        for i in (0..n).rev() {
            let mut acc = x[(i, j)];
            for k in i + 1..n {
                acc -= m[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = acc / m[(i, i)];
        }
    }
    (Some(x), pmax / pmin)
}

impl TransferFunction for PhSystem {
    fn eval_transfer(&self, s: C64, tol: &Tolerances) -> Result<CMat> {
        ph_to_statespace(self).eval_transfer(s, tol)
    }

    fn frequency_response(&self, omegas: &[f64], tol: &Tolerances) -> Result<FrequencyResponse> {
        ph_to_statespace(self).frequency_response(omegas, tol)
    }
}

impl TransferFunction for LtiSystem {
    fn eval_transfer(&self, s: C64, tol: &Tolerances) -> Result<CMat> {
        match self {
            LtiSystem::StateSpace(x) => x.eval_transfer(s, tol),
            LtiSystem::Descriptor(x) => x.eval_transfer(s, tol),
        }
    }

    fn frequency_response(&self, omegas: &[f64], tol: &Tolerances) -> Result<FrequencyResponse> {
        match self {
            LtiSystem::StateSpace(x) => x.frequency_response(omegas, tol),
            LtiSystem::Descriptor(x) => x.frequency_response(omegas, tol),
        }
    }
}

impl TransferFunction for SemiExplicitSystem {
    fn eval_transfer(&self, s: C64, tol: &Tolerances) -> Result<CMat> {
        self.to_descriptor().eval_transfer(s, tol)
    }
}

/// Maximum over the grid of `‖G1(ω) − G2(ω)‖₂ / max(1, ‖G1(ω)‖₂)`.
pub fn response_error(g1: &FrequencyResponse, g2: &FrequencyResponse) -> Result<f64> {
    response_error_with(g1, g2, Tolerances::default().freq_tol)
}

pub fn response_error_with(
    g1: &FrequencyResponse,
    g2: &FrequencyResponse,
    freq_tol: f64,
) -> Result<f64> {
    if g1.len() != g2.len()
        || g1
            .frequencies
            .iter()
            .zip(&g2.frequencies)
            .any(|(a, b)| (a - b).abs() > freq_tol * a.abs().max(1.0))
    {
        return Err(Error::GridMismatch);
    }
    let mut worst = 0.0_f64;
    for (a, b) in g1.values.iter().zip(&g2.values) {
        if a.shape() != b.shape() {
            return Err(dim_err("responses have different channel counts"));
        }
        let err = cnorm2(&(a - b)) / cnorm2(a).max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// One structural check of a port-Hamiltonian realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationCheck {
    pub name: &'static str,
    /// Measured quantity: a norm of the violation for symmetry checks, the
    /// smallest eigenvalue for semidefiniteness checks.
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&ValidationCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<12} {:>14} {:>14}  status", "check", "measured", "threshold")?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<12} {:>14.6e} {:>14.6e}  {}",
                c.name,
                c.measured,
                c.threshold,
                if c.pass { "ok" } else { "FAIL" }
            )?;
        }
        write!(f, "overall: {}", if self.pass { "pass" } else { "FAIL" })
    }
}

/// Checks every structural invariant of a pH realization and reports the
/// measured violations. Never fails.
pub fn validate_ph(ph: &PhSystem, tol: &Tolerances) -> ValidationReport {
    let t = tol.psd_tol;
    let mut checks = Vec::new();
    let mut sym_check = |name, violation: f64, scale: f64| {
        let threshold = t * (1.0 + scale);
        checks.push(ValidationCheck {
            name,
            measured: violation,
            threshold,
            pass: violation <= threshold,
        });
    };
    sym_check("J_skew", fro(&(&ph.j + ph.j.transpose())), fro(&ph.j));
    sym_check("R_sym", fro(&(&ph.r - ph.r.transpose())), fro(&ph.r));
    sym_check("S_sym", fro(&(&ph.s - ph.s.transpose())), fro(&ph.s));
    sym_check("N_skew", fro(&(&ph.n + ph.n.transpose())), fro(&ph.n));
    let qte = ph.q.transpose() * &ph.e;
    sym_check("QtE_sym", fro(&(&qte - qte.transpose())), fro(&qte));

    let mut psd_check = |name, m: &Mat| {
        let lmin = min_eig_sym(m);
        let threshold = -t * (1.0 + norm2(&sym(m)));
        checks.push(ValidationCheck {
            name,
            measured: lmin,
            threshold,
            pass: lmin >= threshold,
        });
    };
    psd_check("R_psd", &ph.r);
    psd_check("W_psd", &ph.passivity_block());
    psd_check("QtE_psd", &qte);

    let pass = checks.iter().all(|c| c.pass);
    ValidationReport { checks, pass }
}
