use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;

use fbl_core::engine::fbl_norm;
use fbl_core::error::Error;
use fbl_core::estimate::NormEstimate;
use fbl_core::experiments::{catalog, parse_params, run_experiment_with, ExperimentReport};
use fbl_core::extension::{extension_constant, SubspaceSpec};
use fbl_core::lattice::GeneratorBinding;
use fbl_core::linear_map::LinearMap;
use fbl_core::optimize::OptimizerConfig;
use fbl_core::space::{Exponent, SpaceSpec};
use fbl_core::summing::{pi_1_exact_linfty_domain, pi_p_lower, pi_q1_lower};

/// Norm estimates in free Banach lattices over finite-dimensional spaces.
#[derive(Parser, Debug)]
#[command(name = "fbl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the lattice norm of an expression in the free generators.
    Norm {
        /// Space JSON; overrides the "space" field of the binding.
        #[arg(long)]
        space: Option<PathBuf>,
        /// Binding JSON with the generator vectors.
        #[arg(long)]
        binding: PathBuf,
        /// Expression such as "abs(d0)+abs(d1)".
        #[arg(long)]
        expr: String,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate π_p of a linear map, or π_{p,1} with --q1.
    Summing {
        #[arg(long)]
        map: PathBuf,
        /// Estimate the (p,1)-summing norm instead.
        #[arg(long)]
        q1: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate the constant for extending a map on a subspace into ℓ_p.
    Extend {
        #[arg(long)]
        subspace: PathBuf,
        /// Map JSON whose column l is the image of the l-th subspace basis vector.
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run one catalog experiment, or all of them.
    Experiment(ExperimentArgs),
    /// Print the experiment catalog.
    List,
}

#[derive(Args, Debug)]
struct Common {
    /// Lattice exponent: a number ≥ 1 or "inf".
    #[arg(long, default_value = "1")]
    p: String,
    #[command(flatten)]
    opt: OptArgs,
    /// Write the result here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OptArgs {
    /// Seed for all randomized searches [env: FBL_SEED, default 0].
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    family_size: Option<usize>,
    /// Sign enumeration is allowed up to 2^enum_cap vectors.
    #[arg(long)]
    enum_cap: Option<usize>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(long, required_unless_present = "all", conflicts_with = "all")]
    name: Option<String>,
    /// Run the whole catalog in parallel; --output names a directory.
    #[arg(long)]
    all: bool,
    /// Parameter overrides as KEY=VALUE.
    #[arg(long, num_args = 1..)]
    params: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Gnuplot data file for experiments that produce a series.
    #[arg(long)]
    gnuplot: Option<PathBuf>,
    #[command(flatten)]
    opt: OptArgs,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

enum Failure {
    Input(String),
    Internal(String),
    RuleFailed,
}

impl Failure {
    fn input(what: impl Display, err: impl Display) -> Self {
        Failure::Input(format!("{what}: {err}"))
    }

    fn core(what: &str, err: Error) -> Self {
        if err.is_input_error() {
            Failure::input(what, err)
        } else {
            Failure::Internal(format!("{what}: {err}"))
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("error: {}", msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    if let Err(f) = configure_threads() {
        return report(f);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    match f {
        Failure::Input(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Failure::Internal(msg) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
        Failure::RuleFailed => ExitCode::from(3),
    }
}

fn configure_threads() -> Outcome {
    let Ok(raw) = std::env::var("FBL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| Failure::input("FBL_THREADS", format!("expected a thread count, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Internal(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Norm { space, binding, expr, common } => {
            let b = load_binding(&binding, space.as_deref())?;
            let e = fbl_core::dsl::parse(&expr).map_err(|err| Failure::input("expr", err))?;
            let est = fbl_norm(&e, &b, exponent(&common.p)?, &optimizer(&common.opt)?).map_err(|err| Failure::core("norm", err))?;
            emit_estimate(&est, common.output.as_deref())
        }
        Command::Summing { map, q1, common } => {
            let t: LinearMap = load_json("map", &map)?;
            let p = exponent(&common.p)?;
            let cfg = optimizer(&common.opt)?;
            let est = if q1 {
                pi_q1_lower(&t, p, &cfg)
            } else if p.is_one() && t.domain.r.is_inf() && t.codomain.r.is_one() {
                pi_1_exact_linfty_domain(&t).map_err(|err| Failure::core("summing", err))?
            } else {
                pi_p_lower(&t, p, &cfg)
            };
            emit_estimate(&est, common.output.as_deref())
        }
        Command::Extend { subspace, map, common } => {
            let sub: SubspaceSpec = load_json("subspace", &subspace)?;
            let t: LinearMap = load_json("map", &map)?;
            let est = extension_constant(&sub, &t, exponent(&common.p)?, &optimizer(&common.opt)?).map_err(|err| Failure::core("extend", err))?;
            emit_estimate(&est, common.output.as_deref())
        }
        Command::Experiment(args) => experiment(args),
        Command::List => {
            let mut text = String::new();
            for entry in catalog() {
                let defaults: Vec<String> = entry.defaults.iter().map(|(k, v)| format!("{k}={v}")).collect();
                text.push_str(&format!("{:<24} {}\n", entry.name, entry.summary));
                if !defaults.is_empty() {
                    text.push_str(&format!("{:<24} defaults: {}\n", "", defaults.join(" ")));
                }
            }
            stdout(&text)
        }
    }
}

fn experiment(args: ExperimentArgs) -> Outcome {
    let cfg = optimizer(&args.opt)?;
    let params = parse_params(&args.params).map_err(|err| Failure::input("params", err))?;
    if args.all {
        return experiment_all(&args, &params, &cfg);
    }
    let name = args.name.as_deref().unwrap_or_default();
    let rep = run_experiment_with(name, &params, &cfg).map_err(|err| Failure::core("experiment", err))?;
    write_out(args.output.as_deref(), &render(&rep, args.format)?)?;
    if let Some(path) = &args.gnuplot {
        match rep.to_gnuplot() {
            Some(data) => fs::write(path, data).map_err(|err| Failure::input(format!("gnuplot {}", path.display()), err))?,
            None => eprintln!("note: {name} produces no series; {} not written", path.display()),
        }
    }
    if rep.passed() {
        Ok(())
    } else {
        Err(Failure::RuleFailed)
    }
}

fn experiment_all(args: &ExperimentArgs, params: &BTreeMap<String, String>, cfg: &OptimizerConfig) -> Outcome {
    if !params.is_empty() {
        return Err(Failure::input("params", "overrides need a single --name"));
    }
    let Some(dir) = &args.output else {
        return Err(Failure::input("output", "--all needs an output directory"));
    };
    fs::create_dir_all(dir).map_err(|err| Failure::input(format!("output {}", dir.display()), err))?;
    let reports: Vec<(&str, fbl_core::error::Result<ExperimentReport>)> = catalog()
        .par_iter()
        .map(|entry| (entry.name, run_experiment_with(entry.name, params, cfg)))
        .collect();
    let mut all_passed = true;
    for (name, rep) in reports {
        let rep = rep.map_err(|err| Failure::core(name, err))?;
        let path = dir.join(format!("{name}.{}", args.format.extension()));
        write_out(Some(&path), &render(&rep, args.format)?)?;
        if let Some(data) = rep.to_gnuplot() {
            let path = dir.join(format!("{name}.dat"));
            fs::write(&path, data).map_err(|err| Failure::input(format!("output {}", path.display()), err))?;
        }
        stdout(&format!("{name:<24} {}", if rep.passed() { "PASS" } else { "FAIL" }))?;
        all_passed &= rep.passed();
    }
    if all_passed {
        Ok(())
    } else {
        Err(Failure::RuleFailed)
    }
}

fn render(rep: &ExperimentReport, format: Format) -> Result<String, Failure> {
    let out = match format {
        Format::Json => rep.to_json(),
        Format::Csv => rep.to_csv(),
    };
    out.map_err(|err| Failure::Internal(format!("report: {err}")))
}

fn exponent(raw: &str) -> Result<Exponent, Failure> {
    raw.parse().map_err(|err| Failure::input("p", err))
}

fn optimizer(opt: &OptArgs) -> Result<OptimizerConfig, Failure> {
    let seed = match opt.seed {
        Some(s) => s,
        None => match std::env::var("FBL_SEED") {
            Ok(raw) => raw.trim().parse().map_err(|_| Failure::input("FBL_SEED", format!("expected an unsigned integer, got '{raw}'")))?,
            Err(_) => 0,
        },
    };
    let mut cfg = OptimizerConfig::default().with_seed(seed);
    if let Some(r) = opt.restarts {
        cfg.restarts = r;
    }
    if let Some(m) = opt.max_iter {
        cfg.max_iter = m;
    }
    if let Some(f) = opt.family_size {
        if f == 0 {
            return Err(Failure::input("family-size", "must be positive"));
        }
        cfg.family_size = Some(f);
    }
    if let Some(c) = opt.enum_cap {
        cfg.enum_cap = c;
    }
    Ok(cfg)
}

fn read(what: &str, path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|err| Failure::input(format!("{what} {}", path.display()), err))
}

fn load_json<T: DeserializeOwned>(what: &str, path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(what, path)?).map_err(|err| Failure::input(what, err))
}

/// The binding file may carry its own space or leave it to --space.
fn load_binding(path: &Path, space: Option<&Path>) -> Result<GeneratorBinding, Failure> {
    let mut value: serde_json::Value = load_json("binding", path)?;
    if let Some(sp) = space {
        let s: SpaceSpec = load_json("space", sp)?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Failure::input("binding", "expected a JSON object with a \"vectors\" field"))?;
        obj.insert("space".into(), serde_json::to_value(s).map_err(|err| Failure::Internal(err.to_string()))?);
    }
    serde_json::from_value(value).map_err(|err| Failure::input("binding", err))
}

fn emit_estimate(est: &NormEstimate, output: Option<&Path>) -> Outcome {
    let json = serde_json::to_string_pretty(est).map_err(|err| Failure::Internal(format!("estimate: {err}")))?;
    write_out(output, &json)
}

fn write_out(output: Option<&Path>, text: &str) -> Outcome {
    match output {
        Some(path) => fs::write(path, format!("{}\n", text.trim_end())).map_err(|err| Failure::input(format!("output {}", path.display()), err)),
        None => stdout(text),
    }
}

/// Prints a block of text; a closed pipe ends output quietly.
fn stdout(text: &str) -> Outcome {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", text.trim_end()).and_then(|_| out.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(Failure::Internal(format!("stdout: {e}"))),
    }
}
