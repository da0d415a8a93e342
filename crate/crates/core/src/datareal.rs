//! State-space realization from sampled input/output data.
//!
//! Markov parameters are estimated by least-squares deconvolution, then
//! realized with the eigensystem realization algorithm (ERA) and optionally
//! mapped to continuous time by the bilinear transform.

use std::io::{Read, Write};

use log::warn;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{dim_err, Error, Result};
use crate::linalg::{inverse, rank_threshold, FullSvd, Mat};
use crate::sysrep::{StateSpaceSystem, Tolerances};

/// Uniformly sampled square input/output record.
#[derive(Debug, Clone, PartialEq)]
pub struct IOSequence {
    dt: f64,
    inputs: Vec<DVector<f64>>,
    outputs: Vec<DVector<f64>>,
}

impl IOSequence {
    pub fn new(dt: f64, inputs: Vec<DVector<f64>>, outputs: Vec<DVector<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample time must be positive, got {dt}")));
        }
        if inputs.len() != outputs.len() {
            return Err(dim_err(format!(
                "{} input samples but {} output samples",
                inputs.len(),
                outputs.len()
            )));
        }
        let m = inputs.first().map_or(0, |u| u.len());
        if m == 0 {
            return Err(Error::InsufficientData("no samples or no channels".into()));
        }
        if inputs.iter().chain(&outputs).any(|v| v.len() != m) {
            return Err(dim_err("inputs and outputs must all have the same channel count"));
        }
        Ok(IOSequence { dt, inputs, outputs })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[DVector<f64>] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.inputs[0].len()
    }

    /// CSV with header `t,u_1..u_m,y_1..y_m`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let m = self.channels();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=m).map(|i| format!("u_{i}")));
        header.extend((1..=m).map(|i| format!("y_{i}")));
        w.write_record(&header)?;
        for (k, (u, y)) in self.inputs.iter().zip(&self.outputs).enumerate() {
            let mut rec = vec![format!("{:e}", k as f64 * self.dt)];
            rec.extend(u.iter().chain(y.iter()).map(|x| format!("{x:e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout of [`IOSequence::write_csv`]; the time column must
    /// be uniform.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("t") || header.len() < 3 || header.len() % 2 == 0 {
            return Err(Error::Parse("expected header t,u_1..u_m,y_1..y_m".into()));
        }
        let m = (header.len() - 1) / 2;
        let mut t = Vec::new();
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let nums: Vec<f64> = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(e.to_string()))?;
            if nums.len() != 2 * m + 1 {
                return Err(Error::Parse("ragged data row".into()));
            }
            t.push(nums[0]);
            inputs.push(DVector::from_column_slice(&nums[1..=m]));
            outputs.push(DVector::from_column_slice(&nums[m + 1..]));
        }
        if t.len() < 2 {
            return Err(Error::InsufficientData("need at least two samples".into()));
        }
        let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        let uniform = t
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-6 * dt.abs());
        if !uniform {
            return Err(Error::Parse("time column is not uniformly spaced".into()));
        }
        Self::new(dt, inputs, outputs)
    }
}

/// Excitation signals offered by the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum InputPreset {
    /// `u₀ = (1, …, 1)`, zero afterwards.
    Impulse,
    Step,
    /// Independent ±1 pseudo-random binary sequences per channel.
    Prbs,
}

pub fn input_preset(preset: InputPreset, samples: usize, channels: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|k| match preset {
            InputPreset::Impulse => DVector::from_element(channels, if k == 0 { 1.0 } else { 0.0 }),
            InputPreset::Step => DVector::from_element(channels, 1.0),
            InputPreset::Prbs => {
                DVector::from_fn(channels, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
            }
        })
        .collect()
}

/// Response of `x_{k+1} = A x_k + B u_k`, `y_k = C x_k + D u_k` from `x₀ = 0`.
pub fn simulate_discrete(sys: &StateSpaceSystem, inputs: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let m = sys.io_dim();
    if inputs.iter().any(|u| u.len() != m) {
        return Err(dim_err("input samples do not match the system's channel count"));
    }
    let mut x = DVector::zeros(sys.order());
    let mut out = Vec::with_capacity(inputs.len());
    for u in inputs {
        out.push(sys.c() * &x + sys.d() * u);
        x = sys.a() * &x + sys.b() * u;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovEstimate {
    /// `H₀ … H_horizon`.
    pub markov: Vec<Mat>,
    /// Relative least-squares residual `‖Y − Φ Θ‖ / ‖Y‖`.
    pub residual: f64,
}

/// Least-squares deconvolution `y_k = Σ_{j ≤ horizon} H_j u_{k−j}` with zero
/// initial conditions.
pub fn markov_from_io(seq: &IOSequence, horizon: usize, tol: &Tolerances) -> Result<MarkovEstimate> {
    let m = seq.channels();
    let k = seq.len();
    let p = m * (horizon + 1);
    if k < horizon + 1 {
        return Err(Error::InsufficientData(format!(
            "{k} samples cannot determine {} Markov parameters",
            horizon + 1
        )));
    }
    let mut phi = Mat::zeros(k, p);
    let mut y = Mat::zeros(k, m);
    for t in 0..k {
        for j in 0..=horizon.min(t) {
            let u = &seq.inputs[t - j];
            for c in 0..m {
                phi[(t, j * m + c)] = u[c];
            }
        }
        for c in 0..m {
            y[(t, c)] = seq.outputs[t][c];
        }
    }
    // Φ = Q R; the singular values of R are those of Φ.
    let qr = phi.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let svd = FullSvd::new(&r);
    let smax = svd.max();
    let thr = rank_threshold(k.max(p), tol.rank_tol, smax);
    let rank = svd.rank(thr);
    if smax == 0.0 || rank < p {
        return Err(Error::RankDeficientExcitation { rank, needed: p });
    }
    // R θ = Qᵀ Y with R square of full rank p.
    let rhs = svd.u.columns(0, p).transpose() * (q.transpose() * &y);
    let mut scaled = rhs;
    for i in 0..p {
        scaled.row_mut(i).scale_mut(1.0 / svd.s[i]);
    }
    let theta = svd.v.columns(0, p) * scaled;
    let ynorm = y.norm();
    let residual = if ynorm > 0.0 {
        (&y - &phi * &theta).norm() / ynorm
    } else {
        0.0
    };
    let markov = (0..=horizon)
        .map(|j| theta.rows(j * m, m).transpose())
        .collect();
    Ok(MarkovEstimate { markov, residual })
}

/// Order selection for [`era_realize`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub enum EraOrder {
    /// Numerical rank of the Hankel matrix at `rank_tol`.
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone)]
pub struct EraResult {
    /// Discrete-time realization.
    pub system: StateSpaceSystem,
    pub hankel_singular_values: Vec<f64>,
    /// False when the trailing Markov parameters are still above
    /// `residual_tol` relative to the largest one.
    pub decayed: bool,
}

/// Eigensystem realization from `H₀ … H_L`; `H₀` becomes the feedthrough.
pub fn era_realize(markov: &[Mat], order: EraOrder, tol: &Tolerances) -> Result<EraResult> {
    let h0 = markov
        .first()
        .ok_or_else(|| Error::InsufficientData("no Markov parameters".into()))?;
    let m = h0.nrows();
    if m == 0 || markov.iter().any(|h| h.shape() != (m, m)) {
        return Err(dim_err("Markov parameters must be nonempty square matrices of one size"));
    }
    let l = markov.len() - 1;
    // Hankel blocks use H_{i+j+1} and the shifted H_{i+j+2}, i < rows, j < cols
    let rows = l / 2;
    let cols = l - rows;
    if let EraOrder::Fixed(k) = order {
        if k > m * rows.min(cols) {
            return Err(Error::InsufficientData(format!(
                "order {k} needs a larger Hankel matrix than {} Markov parameters allow",
                markov.len()
            )));
        }
    }
    let scale = markov.iter().skip(1).map(|h| h.norm()).fold(0.0, f64::max);
    let decayed = l == 0 || markov[l].norm() <= tol.residual_tol * scale.max(f64::MIN_POSITIVE);
    if !decayed {
        warn!(
            "trailing Markov parameter has norm {:.3e} relative to the largest; the response may not have settled",
            markov[l].norm() / scale
        );
    }
    if rows == 0 || cols == 0 || scale == 0.0 {
        if matches!(order, EraOrder::Fixed(k) if k > 0) {
            return Err(Error::InsufficientData("not enough Markov parameters".into()));
        }
        return Ok(EraResult {
            system: StateSpaceSystem::static_gain(h0.clone())?,
            hankel_singular_values: Vec::new(),
            decayed,
        });
    }
    let hank = |shift: usize| {
        let mut h = Mat::zeros(rows * m, cols * m);
        for i in 0..rows {
            for j in 0..cols {
                h.view_mut((i * m, j * m), (m, m))
                    .copy_from(&markov[i + j + 1 + shift]);
            }
        }
        h
    };
    let h1 = hank(0);
    let h2 = hank(1);
    let svd = FullSvd::new(&h1);
    let sv = svd.s.clone();
    let thr = rank_threshold(rows.max(cols) * m, tol.rank_tol, sv[0]);
    let rank = sv.iter().filter(|&&s| s > thr).count();
    let k = match order {
        EraOrder::Auto => rank,
        EraOrder::Fixed(k) => {
            if k > rank {
                warn!("requested order {k} exceeds the numerical Hankel rank {rank}");
            }
            k
        }
    };
    if k > sv.len() || (k > 0 && sv[k - 1] == 0.0) {
        return Err(Error::Numerical(format!("Hankel matrix has rank below the requested order {k}")));
    }
    let uk = svd.u.columns(0, k).into_owned();
    let vk = svd.v.columns(0, k).into_owned();
    let s_half_inv = Mat::from_diagonal(&DVector::from_fn(k, |i, _| 1.0 / sv[i].sqrt()));
    let s_half = Mat::from_diagonal(&DVector::from_fn(k, |i, _| sv[i].sqrt()));
    let obs = &uk * &s_half;
    let ctr = &s_half * vk.transpose();
    let a = &s_half_inv * uk.transpose() * &h2 * &vk * &s_half_inv;
    let b = ctr.columns(0, m).into_owned();
    let c = obs.rows(0, m).into_owned();
    Ok(EraResult {
        system: StateSpaceSystem::new(a, b, c, h0.clone())?,
        hankel_singular_values: sv,
        decayed,
    })
}

/// Markov parameters `D, CB, CAB, …` of a discrete system.
pub fn markov_parameters(sys: &StateSpaceSystem, count: usize) -> Vec<Mat> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(sys.d().clone());
    let mut ab = sys.b().clone();
    for _ in 1..count {
        out.push(sys.c() * &ab);
        ab = sys.a() * ab;
    }
    out
}

/// Bilinear (Tustin) map `z = (1 + s dt/2) / (1 − s dt/2)` from discrete to
/// continuous time. The transfer function is preserved exactly:
/// `G_c(s) = G_d(z(s))`.
pub fn tustin_to_continuous(sys: &StateSpaceSystem, dt: f64) -> Result<StateSpaceSystem> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("sample time must be positive, got {dt}")));
    }
    let n = sys.order();
    if n == 0 {
        return Ok(sys.clone());
    }
    let alpha = 2.0 / dt;
    let i = Mat::identity(n, n);
    let k = inverse(&(sys.a() + &i)).ok_or(Error::IllConditioned {
        what: "A + I (eigenvalue at z = -1)",
        cond: f64::INFINITY,
    })?;
    let gain = (2.0 * alpha).sqrt();
    let a = &k * (sys.a() - &i) * alpha;
    let b = &k * sys.b() * gain;
    let c = sys.c() * &k * gain;
    let d = sys.d() - sys.c() * &k * sys.b();
    StateSpaceSystem::new(a, b, c, d)
}

/// Inverse of [`tustin_to_continuous`]: discretization with sample time
/// `dt` by the bilinear map.
pub fn tustin_to_discrete(sys: &StateSpaceSystem, dt: f64) -> Result<StateSpaceSystem> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("sample time must be positive, got {dt}")));
    }
    let n = sys.order();
    if n == 0 {
        return Ok(sys.clone());
    }
    let alpha = 2.0 / dt;
    let i = Mat::identity(n, n);
    let k = inverse(&(&i * alpha - sys.a())).ok_or(Error::IllConditioned {
        what: "2/dt I - A (eigenvalue at s = 2/dt)",
        cond: f64::INFINITY,
    })?;
    let gain = (2.0 * alpha).sqrt();
    let a = &k * (&i * alpha + sys.a());
    let b = &k * sys.b() * gain;
    let c = sys.c() * &k * gain;
    let d = sys.d() + sys.c() * &k * sys.b();
    StateSpaceSystem::new(a, b, c, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysrep::TransferFunction;
    use approx::assert_abs_diff_eq;
    use nalgebra::Complex;

    fn scalar(a: f64, b: f64, c: f64, d: f64) -> StateSpaceSystem {
        let s = |x| Mat::from_element(1, 1, x);
        StateSpaceSystem::new(s(a), s(b), s(c), s(d)).unwrap()
    }

    fn seq_for(sys: &StateSpaceSystem, preset: InputPreset, k: usize, seed: u64) -> IOSequence {
        let u = input_preset(preset, k, sys.io_dim(), seed);
        let y = simulate_discrete(sys, &u).unwrap();
        IOSequence::new(0.1, u, y).unwrap()
    }

    #[test]
    fn impulse_gives_response_directly() {
        let sys = scalar(0.5, 1.0, 1.0, 0.0);
        let seq = seq_for(&sys, InputPreset::Impulse, 12, 0);
        let est = markov_from_io(&seq, 8, &Tolerances::default()).unwrap();
        for (j, h) in est.markov.iter().enumerate() {
            assert_eq!(h[(0, 0)], seq.outputs()[j][0]);
        }
    }

    #[test]
    fn noise_input_recovers_markov_parameters() {
        let sys = scalar(0.5, 1.0, 1.0, 0.0);
        let seq = seq_for(&sys, InputPreset::Prbs, 400, 11);
        let est = markov_from_io(&seq, 40, &Tolerances::default()).unwrap();
        assert!(est.markov[0][(0, 0)].abs() < 1e-6);
        for k in 1..=40 {
            assert_abs_diff_eq!(est.markov[k][(0, 0)], 0.5f64.powi(k as i32 - 1), epsilon = 1e-6);
        }
    }

    #[test]
    fn zero_input_is_rank_deficient() {
        let u = vec![DVector::zeros(1); 20];
        let seq = IOSequence::new(1.0, u.clone(), u).unwrap();
        assert!(matches!(
            markov_from_io(&seq, 3, &Tolerances::default()),
            Err(Error::RankDeficientExcitation { .. })
        ));
    }

    #[test]
    fn geometric_sequence_is_first_order() {
        let mut markov = vec![Mat::zeros(1, 1)];
        markov.extend((0..20).map(|k| Mat::from_element(1, 1, 0.5f64.powi(k))));
        let res = era_realize(&markov, EraOrder::Auto, &Tolerances::default()).unwrap();
        let s = &res.system;
        assert_eq!(s.order(), 1);
        assert_abs_diff_eq!(s.a()[(0, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.b()[(0, 0)] * s.c()[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_markov_is_feedthrough() {
        let mut markov = vec![Mat::from_element(1, 1, 3.0)];
        markov.extend((0..10).map(|_| Mat::zeros(1, 1)));
        let res = era_realize(&markov, EraOrder::Auto, &Tolerances::default()).unwrap();
        assert_eq!(res.system.order(), 0);
        assert_eq!(res.system.d()[(0, 0)], 3.0);
    }

    #[test]
    fn tustin_matches_substitution() {
        let sys = scalar(0.5, 1.0, 1.0, 0.2);
        let dt = 0.05;
        let cont = tustin_to_continuous(&sys, dt).unwrap();
        let tol = Tolerances::default();
        for w in [0.0, 0.3, 7.0, 90.0] {
            let s = Complex::new(0.0, w);
            let z = (Complex::new(1.0, 0.0) + s * dt / 2.0) / (Complex::new(1.0, 0.0) - s * dt / 2.0);
            let gd = sys.eval_transfer(z, &tol).unwrap()[(0, 0)];
            let gc = cont.eval_transfer(s, &tol).unwrap()[(0, 0)];
            assert!((gd - gc).norm() < 1e-12 * gd.norm());
        }
    }

    #[test]
    fn bilinear_maps_are_inverse() {
        let sys = crate::bench::random_stable(4, 2, 3).unwrap();
        let back = tustin_to_continuous(&tustin_to_discrete(&sys, 0.02).unwrap(), 0.02).unwrap();
        let tol = Tolerances::default();
        for w in [0.1, 3.0, 40.0] {
            let s = Complex::new(0.0, w);
            let g0 = sys.eval_transfer(s, &tol).unwrap();
            let g1 = back.eval_transfer(s, &tol).unwrap();
            assert!((&g0 - &g1).norm() < 1e-10 * g0.norm());
        }
    }

    #[test]
    fn csv_round_trip() {
        let sys = scalar(0.5, 1.0, 1.0, 0.0);
        let seq = seq_for(&sys, InputPreset::Prbs, 30, 2);
        let mut buf = Vec::new();
        seq.write_csv(&mut buf).unwrap();
        let back = IOSequence::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.outputs(), seq.outputs());
        assert!((back.dt() - 0.1).abs() < 1e-15);
    }
}
