//! End-to-end realization pipelines and benchmark tables.

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use serde::Serialize;

use crate::bench::{self, LadderSpec};
use crate::datareal::{self, EraOrder, IOSequence};
use crate::error::{Error, Result};
use crate::io::{self, SystemFile};
use crate::kyp::{self, PassivityVerdict, SingularFeedthrough, StabilityCheck};
use crate::minreal;
use crate::nearestph::{self, Coordinates, FgmOptions, OptTrace, QConvention};
use crate::prbt::{self, PrSpectrum, Truncation};
use crate::regularize::{self, PencilClassification};
use crate::sysrep::{
    default_grid, ph_to_statespace, response_error, validate_ph, FrequencyResponse, LtiSystem, PhSystem,
    StateSpaceSystem, Tolerances, TransferFunction, ValidationReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Minimal realization, KYP solve and energy coordinates.
    Simple,
    /// Positive-real balanced truncation.
    Prbt,
    /// Nearest pH system by projected fast gradient iteration.
    Nearest,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Simple, Method::Prbt, Method::Nearest];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Simple => "simple",
            Method::Prbt => "prbt",
            Method::Nearest => "nearest",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Method::Simple),
            "prbt" => Ok(Method::Prbt),
            "nearest" => Ok(Method::Nearest),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// Starting data of a pipeline run.
#[derive(Debug, Clone)]
pub enum PipelineInput {
    Data(IOSequence),
    System(SystemFile),
}

impl PipelineInput {
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineInput::Data(_) => "data",
            PipelineInput::System(s) => s.kind(),
        }
    }
}

/// `.csv` files are read as input/output data, anything else as a JSON
/// system file.
pub fn load_input(path: impl AsRef<Path>) -> Result<PipelineInput> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        Ok(PipelineInput::Data(IOSequence::read_csv(File::open(path)?)?))
    } else {
        Ok(PipelineInput::System(io::read_system(path)?))
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub method: Method,
    pub truncation: Truncation,
    /// Shift for a singular `D + Dᵀ`; by default the projected KYP solve is
    /// used and the shift only where it fails.
    pub epsilon: Option<f64>,
    pub grid: Vec<f64>,
    pub seed: u64,
    pub tol: Tolerances,
    pub fgm: FgmOptions,
    pub coordinates: Coordinates,
    /// Number of nearest-pH starting points (the KYP point and seeded
    /// perturbations of it).
    pub starts: usize,
    pub era_order: EraOrder,
    /// Number of Markov parameters beyond `H₀`; defaults to a quarter of the
    /// record, at most 400.
    pub era_horizon: Option<usize>,
    /// Relative rank tolerance for the Hankel matrix of measured data.
    pub data_rank_tol: f64,
    pub timeout_s: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            method: Method::Simple,
            truncation: Truncation::default(),
            epsilon: None,
            grid: default_grid(),
            seed: 0,
            tol: Tolerances::default(),
            fgm: FgmOptions::default(),
            coordinates: Coordinates::default(),
            starts: 1,
            era_order: EraOrder::Auto,
            era_horizon: None,
            data_rank_tol: 1e-8,
            timeout_s: 3600.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTime {
    pub stage: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub method: Method,
    pub input_kind: &'static str,
    pub input_order: usize,
    pub output_order: usize,
    /// Wall-clock time of the method stage.
    pub wall_time_s: f64,
    pub response_error: f64,
    pub validation: ValidationReport,
    pub stages: Vec<StageTime>,
    /// Shift used for a singular `D + Dᵀ`, if any.
    pub epsilon: Option<f64>,
    pub nearest_objective: Option<f64>,
}

impl PipelineReport {
    pub fn success(&self) -> bool {
        self.validation.pass
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub ph: PhSystem,
    /// Unstructured model the method started from.
    pub input_system: LtiSystem,
    pub input_response: FrequencyResponse,
    pub output_response: FrequencyResponse,
    pub spectrum: Option<PrSpectrum>,
    pub trace: Option<OptTrace>,
    pub report: PipelineReport,
}

impl PipelineOutput {
    /// Writes `<stem>.ph.sys`, `<stem>.input.csv`, `<stem>.output.csv`,
    /// `<stem>.report.json` and, where available, `<stem>.pi.csv` or
    /// `<stem>.trace.csv`. Returns the written paths.
    pub fn write_to(&self, dir: impl AsRef<Path>, stem: &str) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let path = |suffix: &str| dir.join(format!("{stem}.{suffix}"));
        let mut written = Vec::new();
        let p = path("ph.sys");
        io::write_system(&p, &SystemFile::Ph(self.ph.clone()))?;
        written.push(p);
        let p = path("input.csv");
        self.input_response.write_csv(File::create(&p)?)?;
        written.push(p);
        let p = path("output.csv");
        self.output_response.write_csv(File::create(&p)?)?;
        written.push(p);
        if let Some(sp) = &self.spectrum {
            let p = path("pi.csv");
            sp.write_csv(File::create(&p)?)?;
            written.push(p);
        }
        if let Some(tr) = &self.trace {
            let p = path("trace.csv");
            tr.write_csv(File::create(&p)?)?;
            written.push(p);
        }
        let p = path("report.json");
        io::write_json(&p, &self.report)?;
        written.push(p);
        Ok(written)
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Stage { .. } | Error::Timeout { .. } => e,
        other => Error::Stage {
            stage: name,
            error: Box::new(other),
        },
    })
}

struct Clock {
    start: Instant,
    limit_s: f64,
    stages: Vec<StageTime>,
}

impl Clock {
    fn run<T>(&mut self, name: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = stage(name, f());
        let seconds = t.elapsed().as_secs_f64();
        info!("{name}: {seconds:.3} s");
        self.stages.push(StageTime { stage: name, seconds });
        if self.start.elapsed().as_secs_f64() > self.limit_s {
            return Err(Error::Timeout {
                stage: name.to_string(),
                limit_s: self.limit_s,
            });
        }
        out
    }
}

/// Brings any input to an unstructured state-space model, skipping the
/// stages that are already done. Returns the model and the order of the
/// input as given.
fn to_statespace_model(input: &PipelineInput, opts: &PipelineOptions, clock: &mut Clock) -> Result<(StateSpaceSystem, usize)> {
    let tol = &opts.tol;
    match input {
        PipelineInput::Data(seq) => {
            let horizon = opts.era_horizon.unwrap_or((seq.len() / 4).clamp(1, 400));
            let est = clock.run("markov", || datareal::markov_from_io(seq, horizon, tol))?;
            let data_tol = Tolerances {
                rank_tol: tol.rank_tol.max(opts.data_rank_tol),
                ..*tol
            };
            let era = clock.run("era", || datareal::era_realize(&est.markov, opts.era_order, &data_tol))?;
            let cont = clock.run("tustin", || datareal::tustin_to_continuous(&era.system, seq.dt()))?;
            let order = cont.order();
            Ok((cont, order))
        }
        PipelineInput::System(file) => {
            let order = file.order();
            let ss = match file {
                SystemFile::StateSpace(s) => s.clone(),
                SystemFile::Ph(ph) => match ph_to_statespace(ph) {
                    LtiSystem::StateSpace(s) => s,
                    LtiSystem::Descriptor(d) => {
                        clock.run("regularize", || regularize::descriptor_to_statespace(&d, tol))?.system
                    }
                },
                SystemFile::Descriptor(d) => {
                    clock.run("regularize", || regularize::descriptor_to_statespace(d, tol))?.system
                }
                SystemFile::SemiExplicit(s) => clock.run("regularize", || regularize::to_statespace(s, tol))?.system,
            };
            Ok((ss, order))
        }
    }
}

struct MethodResult {
    ph: PhSystem,
    spectrum: Option<PrSpectrum>,
    trace: Option<OptTrace>,
    epsilon: Option<f64>,
}

fn run_simple(ss: &StateSpaceSystem, opts: &PipelineOptions) -> Result<MethodResult> {
    let tol = &opts.tol;
    let min = minreal::minimal_realization(ss, tol);
    let sol = match kyp::solve_kyp(&min, tol) {
        Ok(sol) => sol,
        Err(e) if prbt::feedthrough_is_singular(min.d(), tol) => {
            let eps = opts.epsilon.unwrap_or_else(|| prbt::default_epsilon(min.d()));
            log::warn!("projected KYP solve failed ({e}); retrying with D + Dᵀ + {eps:.3e} I");
            kyp::solve_kyp_with(&min, tol, SingularFeedthrough::Epsilon(eps))?
        }
        Err(e) => return Err(e),
    };
    let epsilon = sol.epsilon;
    let ph = kyp::ph_from_kyp_with(&min, &sol, kyp::Factorization::Cholesky, tol)?.ph;
    Ok(MethodResult {
        ph,
        spectrum: None,
        trace: None,
        epsilon,
    })
}

fn run_prbt(ss: &StateSpaceSystem, opts: &PipelineOptions) -> Result<MethodResult> {
    let real = prbt::prbt_to_ph_with(ss, opts.truncation, opts.epsilon, &opts.tol)?;
    Ok(MethodResult {
        ph: real.ph,
        epsilon: real.certificate.epsilon,
        spectrum: Some(real.reduction.spectrum),
        trace: None,
    })
}

fn run_nearest(ss: &StateSpaceSystem, opts: &PipelineOptions) -> Result<MethodResult> {
    let tol = &opts.tol;
    let init = nearestph::lmi_init(ss, opts.coordinates, opts.seed, tol);
    let fgm = FgmOptions {
        seed: opts.seed,
        ..opts.fgm
    };
    let best = if opts.starts > 1 {
        let a = init.target.a();
        let scale = 0.1 * (a.norm() / (a.nrows().max(1) as f64).sqrt()).max(1.0);
        let starts = nearestph::perturbed_starts(&init.decomposition, opts.starts, opts.seed, scale);
        nearestph::multi_start(&init.target, &starts, &fgm, QConvention::default(), tol)?
            .into_iter()
            .next()
            .expect("at least one start")
    } else {
        nearestph::fgm_nearest_ph_with(&init.target, &init.decomposition, &fgm, QConvention::default(), tol)?
    };
    Ok(MethodResult {
        ph: best.ph,
        spectrum: None,
        trace: Some(best.trace),
        epsilon: None,
    })
}

/// Runs one pipeline: conversion to state space as needed, then the chosen
/// method, frequency responses on `opts.grid` and validation of the result.
pub fn realize(input: &PipelineInput, opts: &PipelineOptions) -> Result<PipelineOutput> {
    opts.tol.validate()?;
    let mut clock = Clock {
        start: Instant::now(),
        limit_s: opts.timeout_s,
        stages: Vec::new(),
    };
    let (ss, input_order) = to_statespace_model(input, opts, &mut clock)?;
    let t = Instant::now();
    let res = match opts.method {
        Method::Simple => clock.run("simple", || run_simple(&ss, opts))?,
        Method::Prbt => clock.run("prbt", || run_prbt(&ss, opts))?,
        Method::Nearest => clock.run("nearest", || run_nearest(&ss, opts))?,
    };
    let wall_time_s = t.elapsed().as_secs_f64();
    let tol = &opts.tol;
    let (input_response, output_response) = clock.run("response", || {
        Ok((ss.frequency_response(&opts.grid, tol)?, res.ph.frequency_response(&opts.grid, tol)?))
    })?;
    let err = stage("response", response_error(&input_response, &output_response))?;
    let validation = validate_ph(&res.ph, tol);
    let report = PipelineReport {
        method: opts.method,
        input_kind: input.kind(),
        input_order,
        output_order: res.ph.order(),
        wall_time_s,
        response_error: err,
        validation,
        stages: clock.stages,
        epsilon: res.epsilon,
        nearest_objective: res.trace.as_ref().map(|t| t.final_objective),
    };
    Ok(PipelineOutput {
        ph: res.ph,
        input_system: LtiSystem::StateSpace(ss),
        input_response,
        output_response,
        spectrum: res.spectrum,
        trace: res.trace,
        report,
    })
}

/// Structural and passivity diagnostics of a stored system.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub kind: &'static str,
    pub order: usize,
    pub io_dim: usize,
    pub classification: Option<PencilClassification>,
    pub stability: Option<StabilityCheck>,
    pub passivity: Option<PassivityVerdict>,
    pub validation: Option<ValidationReport>,
    /// Failure of the conversion to state space, if any.
    pub conversion_error: Option<String>,
}

pub fn analyze(file: &SystemFile, tol: &Tolerances) -> AnalysisReport {
    let desc = file.to_descriptor();
    let classification = match file {
        SystemFile::StateSpace(_) => None,
        _ => regularize::classify_pencil(desc.e(), desc.a(), tol).ok(),
    };
    let validation = match file {
        SystemFile::Ph(ph) => Some(validate_ph(ph, tol)),
        _ => None,
    };
    let ss = match file {
        SystemFile::StateSpace(s) => Ok(s.clone()),
        SystemFile::SemiExplicit(s) => regularize::to_statespace(s, tol).map(|r| r.system),
        _ => regularize::descriptor_to_statespace(&desc, tol).map(|r| r.system),
    };
    let (stability, passivity, conversion_error) = match ss {
        Ok(ss) => (Some(kyp::stability_check(&ss)), Some(kyp::passivity_check(&ss, tol)), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    AnalysisReport {
        kind: file.kind(),
        order: file.order(),
        io_dim: file.io_dim(),
        classification,
        stability,
        passivity,
        validation,
        conversion_error,
    }
}

impl fmt::Display for AnalysisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "kind: {}  order: {}  ports: {}", self.kind, self.order, self.io_dim)?;
        if let Some(c) = &self.classification {
            writeln!(
                f,
                "pencil: regular={} index<=1={} finite eigenvalues={} cond([E1;A2])={:.3e}",
                c.regular, c.index_le_one, c.finite_eig_count, c.cond_e1a2
            )?;
        }
        if let Some(s) = &self.stability {
            writeln!(f, "stable: {} (spectral abscissa {:.6e})", s.stable, s.spectral_abscissa)?;
        }
        if let Some(p) = &self.passivity {
            write!(f, "passive: {}", p.passive)?;
            if let Some(d) = &p.diagnosis {
                write!(f, " ({d})")?;
            }
            writeln!(f)?;
        }
        if let Some(e) = &self.conversion_error {
            writeln!(f, "state-space conversion failed: {e}")?;
        }
        if let Some(v) = &self.validation {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Named benchmark generators.
pub fn bench_system(name: &str, sections: usize) -> Result<SystemFile> {
    match name {
        "example5" => Ok(SystemFile::Descriptor(bench::example5())),
        "ladder" => Ok(SystemFile::Ph(bench::ladder_network(&LadderSpec::new(sections))?)),
        other => Err(Error::InvalidArgument(format!(
            "unknown benchmark `{other}` (expected example5 or ladder)"
        ))),
    }
}

/// Default file name of a benchmark, e.g. `example5.sys` or `ladder200.sys`.
pub fn bench_file_name(name: &str, sections: usize) -> String {
    match name {
        "ladder" => format!("ladder{}.sys", 2 * sections),
        other => format!("{other}.sys"),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub example: String,
    pub method: Method,
    pub order: Option<usize>,
    pub seconds: Option<f64>,
    pub response_error: Option<f64>,
    pub valid: bool,
    pub failure: Option<String>,
}

/// Runs every method on the illustrative example and a ladder of the given
/// size.
pub fn bench_all(sections: usize, opts: &PipelineOptions) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    for (label, file) in [
        ("example5".to_string(), bench_system("example5", sections)?),
        (format!("ladder{}", 2 * sections), bench_system("ladder", sections)?),
    ] {
        let input = PipelineInput::System(file);
        for method in Method::ALL {
            let o = PipelineOptions {
                method,
                ..opts.clone()
            };
            let row = match realize(&input, &o) {
                Ok(out) => TimingRow {
                    example: label.clone(),
                    method,
                    order: Some(out.report.output_order),
                    seconds: Some(out.report.wall_time_s),
                    response_error: Some(out.report.response_error),
                    valid: out.report.validation.pass,
                    failure: None,
                },
                Err(e) => TimingRow {
                    example: label.clone(),
                    method,
                    order: None,
                    seconds: None,
                    response_error: None,
                    valid: false,
                    failure: Some(e.to_string()),
                },
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Markdown table with one row per example and one column per method.
pub fn timing_table(rows: &[TimingRow]) -> String {
    let mut out = String::from("| example | simple | prbt | nearest |\n|---|---|---|---|\n");
    let mut examples: Vec<&str> = Vec::new();
    for r in rows {
        if !examples.contains(&r.example.as_str()) {
            examples.push(&r.example);
        }
    }
    for ex in examples {
        out.push_str(&format!("| {ex} |"));
        for m in Method::ALL {
            let cell = match rows.iter().find(|r| r.example == ex && r.method == m) {
                Some(TimingRow {
                    seconds: Some(s),
                    order: Some(o),
                    valid,
                    ..
                }) => format!(" {s:.3} s (order {o}{}) |", if *valid { "" } else { ", invalid" }),
                Some(TimingRow {
                    failure: Some(f), ..
                }) if f.contains("time limit") => " timeout |".to_string(),
                Some(_) => " failed |".to_string(),
                None => " - |".to_string(),
            };
            out.push_str(&cell);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("fast".parse::<Method>().is_err());
    }

    #[test]
    fn example5_simple_pipeline() {
        let input = PipelineInput::System(bench_system("example5", 0).unwrap());
        let out = realize(&input, &PipelineOptions::default()).unwrap();
        assert_eq!(out.report.input_order, 5);
        assert_eq!(out.report.output_order, 4);
        assert!(out.report.success());
        assert!(out.report.response_error < 1e-6);
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let s = |x| crate::linalg::Mat::from_element(1, 1, x);
        let unstable = StateSpaceSystem::new(s(1.0), s(1.0), s(1.0), s(1.0)).unwrap();
        let input = PipelineInput::System(SystemFile::StateSpace(unstable));
        let opts = PipelineOptions {
            method: Method::Prbt,
            ..Default::default()
        };
        let err = realize(&input, &opts).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "prbt", .. }), "{err}");
    }

    #[test]
    fn zero_time_limit_reports_timeout() {
        let input = PipelineInput::System(bench_system("example5", 0).unwrap());
        let opts = PipelineOptions {
            timeout_s: 0.0,
            ..Default::default()
        };
        assert!(matches!(realize(&input, &opts), Err(Error::Timeout { .. })));
    }

    #[test]
    fn timing_table_layout() {
        let rows = vec![
            TimingRow {
                example: "x".into(),
                method: Method::Simple,
                order: Some(2),
                seconds: Some(0.5),
                response_error: Some(0.0),
                valid: true,
                failure: None,
            },
            TimingRow {
                example: "x".into(),
                method: Method::Prbt,
                order: None,
                seconds: None,
                response_error: None,
                valid: false,
                failure: Some("time limit of 3600 s exceeded during prbt".into()),
            },
        ];
        let t = timing_table(&rows);
        assert!(t.starts_with("| example | simple | prbt | nearest |"));
        assert!(t.contains("| x | 0.500 s (order 2) | timeout | - |"));
    }
}
