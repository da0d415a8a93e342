use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use phreal::datareal::{self, EraOrder, InputPreset, IOSequence};
use phreal::error::Error;
use phreal::io::{self, SystemFile};
use phreal::nearestph::Coordinates;
use phreal::pipeline::{self, Method, PipelineOptions};
use phreal::prbt::Truncation;
use phreal::sysrep::{log_grid, ph_to_statespace, LtiSystem, StateSpaceSystem, Tolerances};

#[derive(Parser)]
#[command(name = "phreal", version, about = "Port-Hamiltonian realization of linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a port-Hamiltonian realization of a system or data file.
    Realize(RealizeArgs),
    /// Print structure, stability and passivity diagnostics of a system file.
    Analyze {
        input: PathBuf,
    },
    /// Write benchmark systems; with --all also run every method on them.
    Bench(BenchArgs),
    /// Sample a continuous-time system (bilinear discretization) under a
    /// preset excitation and write input/output data as CSV.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Simple,
    Prbt,
    Nearest,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Simple => Method::Simple,
            MethodArg::Prbt => Method::Prbt,
            MethodArg::Nearest => Method::Nearest,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CoordsArg {
    Certificate,
    Given,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Impulse,
    Step,
    Prbs,
}

#[derive(Args)]
struct RealizeArgs {
    /// `.sys` system file or `.csv` input/output data.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "simple")]
    method: MethodArg,
    /// Reduced order for prbt (overrides --threshold); model order for data.
    #[arg(long)]
    order: Option<usize>,
    /// Keep characteristic values at least threshold * pi_1 (prbt).
    #[arg(long, default_value_t = 1e-8)]
    threshold: f64,
    /// Shift of D + D^T used when the feedthrough is singular.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Frequency grid wmin:wmax:npts in rad/s.
    #[arg(long, default_value = "1e-2:1e4:400")]
    grid: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Print per-stage wall-clock times.
    #[arg(long)]
    timing: bool,
    /// Coordinates of the nearest-pH problem.
    #[arg(long, value_enum, default_value = "certificate")]
    coords: CoordsArg,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    /// Number of nearest-pH starting points.
    #[arg(long, default_value_t = 1)]
    starts: usize,
    /// Markov parameters used for data input.
    #[arg(long)]
    horizon: Option<usize>,
    /// Soft time limit in seconds.
    #[arg(long, default_value_t = 3600.0)]
    timeout: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// example5 or ladder.
    name: Option<String>,
    #[arg(long, default_value_t = 100)]
    sections: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Write both benchmarks and run every method on them.
    #[arg(long)]
    all: bool,
    /// With --all, also write timing.md.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SimulateArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "prbs")]
    preset: PresetArg,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("grid must be wmin:wmax:npts, got `{s}`");
    }
    let wmin: f64 = parts[0].parse().context("grid wmin")?;
    let wmax: f64 = parts[1].parse().context("grid wmax")?;
    let npts: usize = parts[2].parse().context("grid npts")?;
    Ok(log_grid(wmin, wmax, npts)?)
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "system".into())
}

fn realize(args: &RealizeArgs) -> Result<bool> {
    let input = pipeline::load_input(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let method = Method::from(args.method);
    let opts = PipelineOptions {
        method,
        truncation: match args.order {
            Some(k) => Truncation::Order(k),
            None => Truncation::Threshold(args.threshold),
        },
        epsilon: args.epsilon,
        grid: parse_grid(&args.grid)?,
        seed: args.seed,
        fgm: phreal::nearestph::FgmOptions {
            max_iters: args.max_iters,
            seed: args.seed,
            ..Default::default()
        },
        coordinates: match args.coords {
            CoordsArg::Certificate => Coordinates::Certificate,
            CoordsArg::Given => Coordinates::Given,
        },
        starts: args.starts.max(1),
        era_order: match (&input, args.order) {
            (pipeline::PipelineInput::Data(_), Some(k)) => EraOrder::Fixed(k),
            _ => EraOrder::Auto,
        },
        era_horizon: args.horizon,
        timeout_s: args.timeout,
        ..Default::default()
    };
    let name = stem(&args.input);
    let out = match pipeline::realize(&input, &opts) {
        Ok(out) => out,
        Err(e @ Error::Timeout { .. }) => {
            std::fs::create_dir_all(&args.out)?;
            let report = serde_json::json!({
                "method": method.to_string(),
                "timeout": e.to_string(),
                "limit_s": args.timeout,
            });
            io::write_json(args.out.join(format!("{name}.{method}.timeout.json")), &report)?;
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    let written = out.write_to(&args.out, &format!("{name}.{method}"))?;
    let r = &out.report;
    println!(
        "{method}: order {} -> {}, response error {:.3e}, validation {}",
        r.input_order,
        r.output_order,
        r.response_error,
        if r.validation.pass { "passed" } else { "FAILED" }
    );
    if let Some(eps) = r.epsilon {
        println!("feedthrough regularized with epsilon = {eps:.3e}");
    }
    if let Some(f) = r.nearest_objective {
        println!("nearest objective {f:.6e}");
    }
    if !r.validation.pass {
        println!("{}", r.validation);
    }
    if args.timing {
        println!("| stage | seconds |\n|---|---|");
        for s in &r.stages {
            println!("| {} | {:.4} |", s.stage, s.seconds);
        }
        println!("method wall time: {:.4} s", r.wall_time_s);
    }
    for p in written {
        log::info!("wrote {}", p.display());
    }
    Ok(r.success())
}

fn analyze(input: &Path) -> Result<bool> {
    if input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let seq = IOSequence::read_csv(File::open(input)?)?;
        println!(
            "data: {} samples, {} channels, dt = {:e} s",
            seq.len(),
            seq.channels(),
            seq.dt()
        );
        return Ok(true);
    }
    let file = io::read_system(input).with_context(|| format!("reading {}", input.display()))?;
    let report = pipeline::analyze(&file, &Tolerances::default());
    print!("{report}");
    Ok(true)
}

fn bench(args: &BenchArgs) -> Result<bool> {
    std::fs::create_dir_all(&args.out)?;
    let names: Vec<&str> = if args.all {
        vec!["example5", "ladder"]
    } else {
        match &args.name {
            Some(n) => vec![n.as_str()],
            None => bail!("give a benchmark name (example5, ladder) or --all"),
        }
    };
    for name in names {
        let sys = pipeline::bench_system(name, args.sections)?;
        let path = args.out.join(pipeline::bench_file_name(name, args.sections));
        io::write_system(&path, &sys)?;
        println!("wrote {}", path.display());
    }
    if args.all {
        let rows = pipeline::bench_all(args.sections, &PipelineOptions::default())?;
        let table = pipeline::timing_table(&rows);
        print!("{table}");
        for r in rows.iter().filter(|r| r.failure.is_some()) {
            println!("{} / {}: {}", r.example, r.method, r.failure.as_deref().unwrap_or(""));
        }
        if args.timing {
            std::fs::write(args.out.join("timing.md"), &table)?;
            io::write_json(args.out.join("timing.json"), &rows)?;
        }
    }
    Ok(true)
}

fn continuous_model(file: &SystemFile) -> Result<StateSpaceSystem> {
    let tol = Tolerances::default();
    Ok(match file {
        SystemFile::StateSpace(s) => s.clone(),
        SystemFile::Ph(ph) => match ph_to_statespace(ph) {
            LtiSystem::StateSpace(s) => s,
            LtiSystem::Descriptor(d) => phreal::regularize::descriptor_to_statespace(&d, &tol)?.system,
        },
        SystemFile::Descriptor(d) => phreal::regularize::descriptor_to_statespace(d, &tol)?.system,
        SystemFile::SemiExplicit(s) => phreal::regularize::to_statespace(s, &tol)?.system,
    })
}

fn simulate(args: &SimulateArgs) -> Result<bool> {
    let file = io::read_system(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let cont = continuous_model(&file)?;
    let disc = datareal::tustin_to_discrete(&cont, args.dt)?;
    let preset = match args.preset {
        PresetArg::Impulse => InputPreset::Impulse,
        PresetArg::Step => InputPreset::Step,
        PresetArg::Prbs => InputPreset::Prbs,
    };
    let u = datareal::input_preset(preset, args.samples, disc.io_dim(), args.seed);
    let y = datareal::simulate_discrete(&disc, &u)?;
    let seq = IOSequence::new(args.dt, u, y)?;
    seq.write_csv(File::create(&args.out)?)?;
    println!("wrote {} samples to {}", seq.len(), args.out.display());
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Realize(a) => realize(a),
        Command::Analyze { input } => analyze(input),
        Command::Bench(a) => bench(a),
        Command::Simulate(a) => simulate(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
