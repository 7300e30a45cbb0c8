use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use statloc::bell::{outcome_distribution, ExperimentSpec, JointDistribution, Sign, SingletWeight, SpecFile, Vec3};
use statloc::experiments::{
    chsh_settings, run_chsh_scan, run_free_will_suite, run_locality_audit, run_no_signalling_suite, run_sampler_check,
    run_signalling_demo, CampaignReport, LocalityTarget, SignallingWeight, Tolerance, EXACT_TOL,
};
use statloc::ising::{Boundary, IsingModel};
use statloc::rng::DEFAULT_SEED;
use statloc::weight::DEFAULT_ENUMERATION_CAP;
use statloc::Error;

#[derive(Parser, Debug)]
#[command(name = "statloc", version, about = "Exact and sampled checks for statistically local lattice models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ising model on a rectangular lattice
    #[command(subcommand)]
    Ising(IsingCommand),
    /// Photon-trajectory model of a two-wing spin-correlation experiment
    #[command(subcommand)]
    Bell(BellCommand),
}

#[derive(Subcommand, Debug)]
enum IsingCommand {
    /// Exact distribution by enumeration
    Exact {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Largest number of configurations to enumerate
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Metropolis sampling, checked against the exact distribution when small enough
    Sample {
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Number of recorded sweeps
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Independent chains; the output depends on this but not on --workers
        #[arg(long, default_value_t = 4)]
        chains: usize,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Compare local and global probability ratios for random nearby pairs
    Locality {
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args, Debug)]
struct LatticeArgs {
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    /// Coupling C >= 0 in exp(-C H)
    #[arg(long, allow_hyphen_values = true)]
    coupling: f64,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Open)]
    boundary: BoundaryArg,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum BoundaryArg {
    Open,
    Periodic,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads (0 = one per core)
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args, Debug)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; defaults to a file in $STATLOC_OUT_DIR if set, else stdout
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, env = "STATLOC_OUT_DIR", hide_env_values = true)]
    out_dir: Option<PathBuf>,
    /// Print a human-readable summary to stderr
    #[arg(long)]
    summary: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum BellCommand {
    /// Outcome distribution P(α, β)
    Distribution {
        /// Angle between the settings in degrees; sets a = 0°, b = θ in the x-z plane
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// E(θ) = -cos θ and CHSH values over an angle grid
    ChshScan {
        /// Comma-separated angles in degrees
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = grid(19, 180.0))]
        angles: Vec<f64>,
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Local versus global probability ratios on the vertex-state factor model
    Locality {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Pre-measurement record distributions across the four CHSH settings
    FreeWill {
        /// Rotation of the CHSH settings in degrees
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        phi: f64,
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Single-wing marginals must be 1/2 for every right-wing setting
    NoSignalling {
        /// Right-wing setting angles in degrees; the left setting comes from the spec
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = grid(12, 165.0))]
        angles: Vec<f64>,
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Normalization and marginal shift under the signalling weight family
    SignallingDemo {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = grid(12, 165.0))]
        angles: Vec<f64>,
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args, Debug)]
struct SpecArgs {
    /// Experiment spec file (TOML); defaults to the extent-8 lattice with a = z, b = x
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Annihilation weight; overrides the spec file
    #[arg(long, value_enum)]
    weight: Option<WeightArg>,
    /// Signalling strength in [0, 1)
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum WeightArg {
    Canonical,
    Signalling,
}

/// `n` evenly spaced angles from 0 to `last` degrees.
fn grid(n: usize, last: f64) -> Vec<f64> {
    (0..n).map(|k| last * k as f64 / (n - 1) as f64).collect()
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
}

/// A failure that maps to an exit status of 2.
enum Failure {
    Model(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            let record = match f {
                Failure::Model(e) => ErrorRecord { error: e.kind(), message: e.to_string() },
                Failure::Io(message) => ErrorRecord { error: "io", message },
            };
            eprintln!("{}", serde_json::to_string(&record).expect("error records serialize"));
            ExitCode::from(2)
        }
    }
}

/// Returns whether every check passed.
fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Ising(cmd) => run_ising(cmd),
        Command::Bell(cmd) => run_bell(cmd),
    }
}

fn set_workers(run: &RunArgs) -> Result<(), Failure> {
    if run.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(run.workers)
            .build_global()
            .map_err(|e| Failure::Io(format!("cannot start worker pool: {e}")))?;
    }
    Ok(())
}

fn build_ising(l: &LatticeArgs) -> Result<IsingModel, Failure> {
    let boundary = match l.boundary {
        BoundaryArg::Open => Boundary::Open,
        BoundaryArg::Periodic => Boundary::Periodic,
    };
    Ok(IsingModel::with_boundary(l.width, l.height, l.coupling, boundary)?)
}

fn run_ising(cmd: IsingCommand) -> Result<bool, Failure> {
    match cmd {
        IsingCommand::Exact { lattice, cap, out } => {
            let ising = build_ising(&lattice)?;
            let sites = ising.num_sites();
            let count = 1u128.checked_shl(sites as u32).unwrap_or(u128::MAX);
            if count > cap as u128 {
                return Err(Error::Capacity { count, cap }.into());
            }
            let entries = ising.exact_distribution()?.sorted_entries();
            let text = match out.format {
                Format::Csv => entries.iter().fold(String::new(), |mut s, (c, p)| {
                    let _ = writeln!(s, "{c},{p:e}");
                    s
                }),
                Format::Json => {
                    #[derive(Serialize)]
                    struct Row<'a> {
                        config: &'a str,
                        probability: f64,
                    }
                    let rows: Vec<Row> = entries.iter().map(|(c, p)| Row { config: c, probability: *p }).collect();
                    json_text(&rows)
                }
            };
            let name = format!("ising-exact-{}x{}", lattice.width, lattice.height);
            emit(&out, &name, &text)?;
            Ok(true)
        }
        IsingCommand::Sample { lattice, samples, chains, run, out } => {
            set_workers(&run)?;
            let ising = build_ising(&lattice)?;
            let mut result = run_sampler_check(&ising, samples, run.seed, chains)?;
            for (m, n) in result.stats.magnetization_histogram() {
                result.report.observe(format!("magnetization-count({m})"), n as f64);
            }
            report_out(&result.report, &out, &format!("ising-sample-{}x{}", lattice.width, lattice.height))
        }
        IsingCommand::Locality { lattice, trials, run, out } => {
            set_workers(&run)?;
            let ising = build_ising(&lattice)?;
            let report = run_locality_audit(&LocalityTarget::Ising(ising), trials, run.seed)?;
            report_out(&report, &out, "ising-locality")
        }
    }
}

fn load_spec(args: &SpecArgs) -> Result<ExperimentSpec, Failure> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
            SpecFile::parse(&text)?.build()?
        }
        None => ExperimentSpec::extent8(Vec3::Z, Vec3::X, 0.001)?,
    };
    match (args.weight, args.lambda) {
        (Some(WeightArg::Canonical), _) => spec = spec.with_rule(Arc::new(SingletWeight)),
        (Some(WeightArg::Signalling), lambda) => {
            let lambda = lambda.ok_or_else(|| Error::Input("--weight signalling needs --lambda".into()))?;
            spec = spec.with_rule(Arc::new(SignallingWeight::new(lambda)?));
        }
        (None, Some(_)) => return Err(Error::Input("--lambda only applies with --weight signalling".into()).into()),
        (None, None) => {}
    }
    // refuse early rather than enumerate past the cap
    let geometries = statloc::bell::count_pairings(spec.lattice(), &spec.left_emitter(), &spec.right_emitter());
    let configs = geometries.saturating_mul(4);
    if configs > args.cap as u128 {
        return Err(Error::Capacity { count: configs, cap: args.cap }.into());
    }
    for w in spec.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(spec)
}

fn run_bell(cmd: BellCommand) -> Result<bool, Failure> {
    match cmd {
        BellCommand::Distribution { theta, spec, out } => {
            let is_canonical = spec.weight != Some(WeightArg::Signalling);
            let mut s = load_spec(&spec)?;
            if let Some(deg) = theta {
                s = s.with_settings(Vec3::from_degrees(0.0), Vec3::from_degrees(deg))?;
            }
            let canonical = is_canonical && s.rule().name() == "canonical";
            let d = outcome_distribution(&s)?;
            let mut report = CampaignReport::new("distribution", None);
            let singlet = JointDistribution::singlet(s.a_meas(), s.b_meas());
            for a in Sign::BOTH {
                for b in Sign::BOTH {
                    let id = format!("P({}{})", a.as_char(), b.as_char());
                    if canonical {
                        report.check(id, singlet.get(a, b), d.get(a, b), Tolerance::Absolute(EXACT_TOL));
                    } else {
                        report.observe(id, d.get(a, b));
                    }
                }
            }
            report.observe("E", d.correlation());
            report_out(&report, &out, "bell-distribution")
        }
        BellCommand::ChshScan { angles, spec, out } => {
            let s = load_spec(&spec)?;
            let radians: Vec<f64> = angles.iter().map(|d| d.to_radians()).collect();
            let report = run_chsh_scan(&s, &radians)?;
            report_out(&report, &out, "bell-chsh-scan")
        }
        BellCommand::Locality { trials, spec, run, out } => {
            set_workers(&run)?;
            let s = load_spec(&spec)?;
            let report = run_locality_audit(&LocalityTarget::Bell(s), trials, run.seed)?;
            report_out(&report, &out, "bell-locality")
        }
        BellCommand::FreeWill { phi, spec, run, out } => {
            set_workers(&run)?;
            let s = load_spec(&spec)?;
            let specs = chsh_settings(phi.to_radians())
                .iter()
                .map(|&(a, b)| s.with_settings(a, b))
                .collect::<Result<Vec<_>, _>>()?;
            let report = run_free_will_suite(&specs, run.seed)?;
            report_out(&report, &out, "bell-free-will")
        }
        BellCommand::NoSignalling { angles, spec, out } => {
            let s = load_spec(&spec)?;
            let specs = angles
                .iter()
                .map(|&deg| s.with_settings(s.a_meas(), Vec3::from_degrees(deg)))
                .collect::<Result<Vec<_>, _>>()?;
            let report = run_no_signalling_suite(&specs)?;
            report_out(&report, &out, "bell-no-signalling")
        }
        BellCommand::SignallingDemo { angles, spec, out } => {
            let lambda = spec.lambda.unwrap_or(0.5);
            let args = SpecArgs { weight: None, lambda: None, ..spec };
            let s = load_spec(&args)?;
            let settings: Vec<(Vec3, Vec3)> = angles.iter().map(|&deg| (s.a_meas(), Vec3::from_degrees(deg))).collect();
            let report = run_signalling_demo(&s, lambda, &settings)?;
            report_out(&report, &out, "bell-signalling-demo")
        }
    }
}

fn json_text<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn report_out(report: &CampaignReport, out: &OutputArgs, name: &str) -> Result<bool, Failure> {
    let text = match out.format {
        Format::Csv => report.to_csv(),
        Format::Json => json_text(report),
    };
    emit(out, name, &text)?;
    if out.summary {
        eprint!("{}", report.summary());
    }
    Ok(report.passed())
}

fn emit(out: &OutputArgs, name: &str, text: &str) -> Result<(), Failure> {
    let ext = match out.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let path = match (&out.output, &out.out_dir) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) => Some(dir.join(format!("{name}.{ext}"))),
        (None, None) => None,
    };
    match path {
        Some(p) => write_file(&p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}
