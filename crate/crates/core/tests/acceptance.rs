//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always reach the output.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{Complex, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use phreal::bench;
use phreal::datareal::{self, EraOrder, InputPreset, IOSequence};
use phreal::kyp;
use phreal::linalg::{min_eig_sym, norm2, skew, Mat};
use phreal::minreal;
use phreal::nearestph::{self, Coordinates, FgmOptions, PhDecomposition, QConvention, Weights};
use phreal::pipeline::{self, Method, PipelineInput, PipelineOptions};
use phreal::prbt;
use phreal::regularize;
use phreal::sysrep::{DescriptorSystem, StateSpaceSystem, Tolerances, TransferFunction};

const S_REFERENCE: f64 = 0.2204;

/// Criteria whose stated expectation cannot be met; they are reported but
/// do not change the exit status.
/// 6b: the stated Gramian (3 − √5)/2 is not a root of x² − 6x + 1, which
/// both positive-real Riccati equations reduce to for (−1, 1, 1, 1).
const KNOWN_RED: &[&str] = &["6b"];

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn report(id: &'static str, pass: bool, detail: String) -> Outcome {
    println!("{} {:>3}  {}", if pass { "PASS" } else { "FAIL" }, id, detail);
    Outcome { id, pass, detail }
}

fn example5_input() -> PipelineInput {
    PipelineInput::System(pipeline::bench_system("example5", 0).unwrap())
}

fn rel_err(a: &nalgebra::DMatrix<Complex<f64>>, b: &nalgebra::DMatrix<Complex<f64>>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let opts = PipelineOptions {
        method: Method::Simple,
        ..Default::default()
    };
    match pipeline::realize(&example5_input(), &opts) {
        Ok(out) => {
            let secs = t.elapsed().as_secs_f64();
            let r = &out.report;
            let pass = r.output_order == 4 && r.validation.pass && r.response_error <= 1e-6 && secs < 5.0;
            report(
                "1",
                pass,
                format!(
                    "example5 simple: order {} (4), validation {}, response error {:.2e} (<= 1e-6), {:.2} s (< 5 s)",
                    r.output_order, r.validation.pass, r.response_error, secs
                ),
            )
        }
        Err(e) => report("1", false, format!("example5 simple failed: {e}")),
    }
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let opts = PipelineOptions {
        method: Method::Prbt,
        ..Default::default()
    };
    match pipeline::realize(&example5_input(), &opts) {
        Ok(out) => {
            let secs = t.elapsed().as_secs_f64();
            let s = out.ph.s()[(0, 0)];
            let err = out.report.response_error;
            let pass = (s - S_REFERENCE).abs() <= 1e-3 && err <= 1e-4 && secs < 10.0;
            report(
                "2",
                pass,
                format!("example5 prbt: S = {s:.6} (0.2204 +- 1e-3), response error {err:.2e} (<= 1e-4), {secs:.2} s (< 10 s)"),
            )
        }
        Err(e) => report("2", false, format!("example5 prbt failed: {e}")),
    }
}

fn criterion_3() -> Outcome {
    let tol = Tolerances::default();
    let ss = regularize::descriptor_to_statespace(&bench::example5(), &tol)
        .unwrap()
        .system;
    let init = nearestph::lmi_init(&ss, Coordinates::Certificate, 0, &tol);
    let opts = FgmOptions::default();
    let single = match nearestph::fgm_nearest_ph(&init.target, &init.decomposition, &opts) {
        Ok(r) => r,
        Err(e) => return report("3", false, format!("example5 nearest failed: {e}")),
    };
    let starts = nearestph::perturbed_starts(&init.decomposition, 10, 1, 1.0);
    let multi = nearestph::multi_start(&init.target, &starts, &opts, QConvention::default(), &tol).unwrap();
    let best = multi[0].trace.final_objective;
    let f = single.trace.final_objective;
    let feas = single.decomposition.feasibility(&tol);
    let s = single.decomposition.s[(0, 0)];
    let pass = feas.feasible && (f - best).abs() <= 1e-3 && (s - S_REFERENCE).abs() <= 1e-3;
    report(
        "3",
        pass,
        format!(
            "example5 nearest: feasible {}, objective {f:.3e} vs best of 10 starts {best:.3e} (+- 1e-3), S = {s:.6} (0.2204 +- 1e-3)",
            feas.feasible
        ),
    )
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let input = PipelineInput::System(pipeline::bench_system("ladder", 100).unwrap());
    let opts = PipelineOptions {
        method: Method::Prbt,
        ..Default::default()
    };
    match pipeline::realize(&input, &opts) {
        Ok(out) => {
            let secs = t.elapsed().as_secs_f64();
            let r = &out.report;
            let pass = r.input_order == 200 && r.output_order <= 40 && r.response_error <= 1e-4 && secs < 120.0;
            report(
                "4",
                pass,
                format!(
                    "ladder 200 prbt (threshold 1e-8 pi_1): order {} (<= 40), response error {:.2e} (<= 1e-4), validation {}, {:.1} s (< 120 s)",
                    r.output_order, r.response_error, r.validation.pass, secs
                ),
            )
        }
        Err(e) => report("4", false, format!("ladder prbt failed: {e}")),
    }
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_res = 0.0_f64;
    let mut worst_tf = 0.0_f64;
    let mut min_q = f64::INFINITY;
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let n = 1 + (seed as usize * 13) % 50;
        let m = 1 + seed as usize % 3;
        let sys = bench::random_passive(n, m, seed).unwrap();
        let sol = match kyp::solve_kyp(&sys, &tol) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let a2 = norm2(sys.a());
        worst_res = worst_res.max(sol.residual / (1.0 + a2 * a2));
        min_q = min_q.min(min_eig_sym(&sol.q_hat));
        let ph = kyp::ph_from_kyp(&sys, &sol).unwrap();
        for _ in 0..20 {
            let sigma: f64 = rng.random_range(0.0..1.0);
            let omega = 10f64.powf(rng.random_range(-2.0..2.0));
            let s = Complex::new(sigma, omega);
            let g = sys.eval_transfer(s, &tol).unwrap();
            let h = ph.eval_transfer(s, &tol).unwrap();
            worst_tf = worst_tf.max(rel_err(&h, &g));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = failures.is_empty() && worst_res <= 1e-8 && min_q > 0.0 && worst_tf <= 1e-10 && secs < 60.0;
    let mut detail = format!(
        "KYP on 100 random passive systems: max residual/(1+|A|^2) {worst_res:.2e} (<= 1e-8), min eig Q {min_q:.2e} (> 0), max transfer rel. error {worst_tf:.2e} (<= 1e-10), {secs:.1} s (< 60 s)"
    );
    if !failures.is_empty() {
        detail.push_str(&format!("; failures: {}", failures.join(", ")));
    }
    report("5", pass, detail)
}

fn criterion_6() -> Vec<Outcome> {
    let tol = Tolerances::default();
    let s = |x| Mat::from_element(1, 1, x);
    let sys = StateSpaceSystem::new(s(-1.0), s(1.0), s(1.0), s(1.0)).unwrap();
    let closed = 3.0 - 2.0 * 2f64.sqrt();
    let q = kyp::solve_kyp(&sys, &tol).map(|k| k.q_hat[(0, 0)]);
    let a = match q {
        Ok(q) => report(
            "6a",
            (q - closed).abs() <= 1e-10,
            format!("scalar KYP (-1,1,1,1): Q = {q:.12} vs 3 - 2 sqrt 2 = {closed:.12} (1e-10)"),
        ),
        Err(e) => report("6a", false, format!("scalar KYP failed: {e}")),
    };
    let stated = (3.0 - 5f64.sqrt()) / 2.0;
    let b = match prbt::pr_gramians(&sys, &tol) {
        Ok(g) => {
            let x = g.x_min[(0, 0)];
            let y = g.y_min[(0, 0)];
            report(
                "6b",
                (x - stated).abs() <= 1e-10 && (y - stated).abs() <= 1e-10,
                format!(
                    "scalar PRBT Gramians (-1,1,1,1): X = {x:.12}, Y = {y:.12} vs stated (3 - sqrt 5)/2 = {stated:.12} (1e-10); residual of x^2 - 6x + 1 at X: {:.1e}",
                    x * x - 6.0 * x + 1.0
                ),
            )
        }
        Err(e) => report("6b", false, format!("scalar PRBT Gramians failed: {e}")),
    };
    vec![a, b]
}

fn random_decomposition(rng: &mut ChaCha8Rng, n: usize, m: usize) -> PhDecomposition {
    PhDecomposition {
        m: gaussian(rng, n, n),
        j: gaussian(rng, n, n),
        r: gaussian(rng, n, n),
        f: gaussian(rng, n, m),
        p: gaussian(rng, n, m),
        s: gaussian(rng, m, m),
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let w = Weights {
        e: 1.3,
        a_skew: 0.7,
        a_sym: 1.9,
        b: 0.4,
        c: 1.1,
        d: 2.2,
    };
    let mut worst_grad = 0.0_f64;
    let mut worst_proj = 0.0_f64;
    let mut worst_zero = 0.0_f64;
    for _ in 0..20 {
        let (n, m) = (3, 2);
        let sys = DescriptorSystem::new(
            gaussian(&mut rng, n, n),
            gaussian(&mut rng, n, n),
            gaussian(&mut rng, n, m),
            gaussian(&mut rng, m, n),
            gaussian(&mut rng, m, m),
        )
        .unwrap();
        let x = random_decomposition(&mut rng, n, m);
        let g = nearestph::gradient(&x, &sys, &w).unwrap();
        let h = 1e-5;
        let mut num = Vec::new();
        let mut ana = Vec::new();
        for part in 0..6 {
            let (rows, cols) = match part {
                0 | 1 | 2 => (n, n),
                3 | 4 => (n, m),
                _ => (m, m),
            };
            for i in 0..rows {
                for j in 0..cols {
                    let bump = |d: f64| {
                        let mut y = x.clone();
                        let slot = match part {
                            0 => &mut y.m,
                            1 => &mut y.j,
                            2 => &mut y.r,
                            3 => &mut y.f,
                            4 => &mut y.p,
                            _ => &mut y.s,
                        };
                        slot[(i, j)] += d;
                        nearestph::objective(&y, &sys, &w).unwrap()
                    };
                    num.push((bump(h) - bump(-h)) / (2.0 * h));
                    let ga = match part {
                        0 => &g.m,
                        1 => &g.j,
                        2 => &g.r,
                        3 => &g.f,
                        4 => &g.p,
                        _ => &g.s,
                    };
                    ana.push(ga[(i, j)]);
                }
            }
        }
        let num = DVector::from_vec(num);
        let ana = DVector::from_vec(ana);
        worst_grad = worst_grad.max((&num - &ana).norm() / ana.norm());

        let p = x.project();
        let pp = p.project();
        let diff = [
            (&pp.m - &p.m).norm(),
            (&pp.j - &p.j).norm(),
            (&pp.r - &p.r).norm(),
            (&pp.f - &p.f).norm(),
            (&pp.p - &p.p).norm(),
            (&pp.s - &p.s).norm(),
        ];
        let scale = 1.0 + p.passivity_block().norm() + p.m.norm() + p.j.norm();
        worst_proj = worst_proj.max(diff.iter().fold(0.0, |a: f64, &b| a.max(b)) / scale);

        // a system that is exactly of pH form
        let d = &p;
        let nn = skew(&gaussian(&mut rng, m, m));
        let ph_sys = DescriptorSystem::new(
            d.m.clone(),
            &d.j - &d.r,
            &d.f - &d.p,
            (&d.f + &d.p).transpose(),
            &d.s + &nn,
        )
        .unwrap();
        worst_zero = worst_zero.max(nearestph::objective(d, &ph_sys, &Weights::default()).unwrap());
    }
    let pass = worst_grad <= 1e-6 && worst_proj <= 1e-12 && worst_zero <= 1e-8;
    report(
        "7",
        pass,
        format!(
            "FGM: gradient vs central differences {worst_grad:.2e} (<= 1e-6, 20 points), projection idempotence {worst_proj:.2e} (<= 1e-12), objective on pH data {worst_zero:.2e} (<= 1e-8)"
        ),
    )
}

fn criterion_8() -> Outcome {
    let t = Instant::now();
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let points = [
        Complex::new(0.3, 1.7),
        Complex::new(0.0, 0.05),
        Complex::new(1.1, -4.0),
        Complex::new(0.0, 25.0),
        Complex::new(2.5, 0.0),
    ];
    let mut worst = 0.0_f64;
    let mut failures = Vec::new();
    for seed in 0..100u64 {
        let n = rng.random_range(2..=10);
        let d = rng.random_range(1..n);
        let m = rng.random_range(1..=3);
        let sys = bench::random_index1(n, d, m, seed).unwrap();
        let red = match regularize::descriptor_to_statespace(&sys, &tol) {
            Ok(r) => r.system,
            Err(e) => {
                failures.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        let min = minreal::minimal_realization(&red, &tol);
        for &s in &points {
            let (Ok(g), Ok(g1), Ok(g2)) = (
                sys.eval_transfer(s, &tol),
                red.eval_transfer(s, &tol),
                min.eval_transfer(s, &tol),
            ) else {
                continue;
            };
            worst = worst.max(rel_err(&g1, &g)).max(rel_err(&g2, &g));
        }
    }

    // ERA round trip on random stable discrete systems of order 3
    let data_tol = Tolerances {
        rank_tol: 1e-8,
        ..tol
    };
    let mut era_worst = 0.0_f64;
    let mut orders = Vec::new();
    for seed in 0..10u64 {
        let mut r = ChaCha8Rng::seed_from_u64(100 + seed);
        let a0 = gaussian(&mut r, 3, 3);
        let rho = phreal::linalg::eigenvalues(&a0).iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        let disc = StateSpaceSystem::new(
            a0 * (0.6 / rho),
            gaussian(&mut r, 3, 1),
            gaussian(&mut r, 1, 3),
            gaussian(&mut r, 1, 1),
        )
        .unwrap();
        let u = datareal::input_preset(InputPreset::Prbs, 1500, 1, seed);
        let y = datareal::simulate_discrete(&disc, &u).unwrap();
        let seq = IOSequence::new(1.0, u, y).unwrap();
        let est = datareal::markov_from_io(&seq, 80, &tol).unwrap();
        let era = datareal::era_realize(&est.markov, EraOrder::Auto, &data_tol).unwrap();
        orders.push(era.system.order());
        for k in 0..64 {
            let z = Complex::from_polar(1.0, std::f64::consts::PI * k as f64 / 63.0);
            let g = disc.eval_transfer(z, &tol).unwrap();
            let h = era.system.eval_transfer(z, &tol).unwrap();
            era_worst = era_worst.max(rel_err(&h, &g));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = failures.is_empty() && worst <= 1e-8 && era_worst <= 1e-6 && orders.iter().all(|&o| o == 3);
    let mut detail = format!(
        "regularize + minreal on 100 random index-1 systems: max transfer rel. error {worst:.2e} (<= 1e-8); ERA order-3 round trip: orders {orders:?}, max rel. error {era_worst:.2e} (<= 1e-6); {secs:.1} s"
    );
    if !failures.is_empty() {
        detail.push_str(&format!("; failures: {}", failures.join(", ")));
    }
    report("8", pass, detail)
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored
    let mut outcomes = vec![criterion_1(), criterion_2(), criterion_3(), criterion_4(), criterion_5()];
    outcomes.extend(criterion_6());
    outcomes.push(criterion_7());
    outcomes.push(criterion_8());
    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| !o.pass).collect();
    let passed = outcomes.len() - failed.len();
    println!("acceptance: {passed} of {} checks passed", outcomes.len());
    let unexpected: Vec<&&Outcome> = failed.iter().filter(|o| !KNOWN_RED.contains(&o.id)).collect();
    for o in &failed {
        if KNOWN_RED.contains(&o.id) {
            println!("known red {}: {}", o.id, o.detail);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
