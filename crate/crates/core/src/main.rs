use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use renyi_portfolio::bench::{
    generate_instance, run_benchmark, verify_suite, write_plot_script, write_trace_csv,
    BenchConfig, VerifyConfig,
};
use renyi_portfolio::oracle::reference_optimum;
use renyi_portfolio::solvers::{run_method, Method, SolverConfig};
use renyi_portfolio::{Error, MarketInstance, Portfolio, RiskProfile};

#[derive(Parser)]
#[command(
    name = "renyi-portfolio",
    version,
    about = "CRRA portfolio selection as Rényi information projection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance with one method and write its trace CSV.
    Solve(SolveArgs),
    /// Run the full solver comparison protocol.
    Bench(BenchArgs),
    /// Run the identity battery on seeded random instances.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file (JSON); a seeded random instance is used when omitted.
    instance: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 50)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value = "info_proj_eg")]
    method: Method,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    error_target: Option<f64>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long, default_value_t = 50)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated risk aversions.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 1.5])]
    rho: Vec<f64>,
    /// Comma-separated methods; all when omitted.
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    error_target: f64,
    #[arg(long, default_value = "bench_out")]
    out: PathBuf,
    /// Also write a matplotlib script for the traces.
    #[arg(long)]
    plot_script: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Comma-separated risk aversions.
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 1.0, 1.5, 1.9])]
    rho: Vec<f64>,
    /// Break the covering balance to exercise the failure path.
    #[arg(long)]
    corrupt_covering: bool,
}

enum Failure {
    Usage(String),
    Verification,
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(e) => Failure::Io(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn solve(args: SolveArgs) -> Result<(), Failure> {
    let instance = match &args.instance {
        Some(path) => MarketInstance::from_json(&fs::read_to_string(path)?)?,
        None => generate_instance(args.k, args.m, args.seed)?,
    };
    let profile = RiskProfile::new(args.rho)?;
    let reference = reference_optimum(&instance, &profile, 1e-10)?;
    let config = SolverConfig::new(profile)
        .with_max_iters(args.max_iters)
        .with_tol(args.tol)
        .with_reference(reference.value, args.error_target);
    let trace = run_method(
        args.method,
        &instance,
        &Portfolio::uniform(instance.m())?,
        &config,
    )?;
    match &args.out {
        Some(path) => write_trace_csv(
            BufWriter::new(fs::File::create(path)?),
            &[&trace],
            reference.value,
        )?,
        None => write_trace_csv(std::io::stdout().lock(), &[&trace], reference.value)?,
    }
    eprintln!(
        "{}: {} iterations, status {}, final error {:e}",
        args.method,
        trace.records.len(),
        trace.status.as_str(),
        reference.value - trace.final_objective()
    );
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    let config = BenchConfig {
        k: args.k,
        m: args.m,
        seed: args.seed,
        rho_list: args.rho,
        methods: if args.method.is_empty() {
            Method::ALL.to_vec()
        } else {
            args.method
        },
        max_iters: args.max_iters,
        tol: args.tol,
        error_target: args.error_target,
        output_path: args.out,
    };
    config.validate()?;
    let report = run_benchmark(&config)?;
    if args.plot_script {
        write_plot_script(&config.output_path)?;
    }
    for c in &report.comparisons {
        for o in &c.outcomes {
            println!(
                "rho={} {:<13} iterations_to_target={} status={}",
                c.rho,
                o.method.as_str(),
                o.iterations_to_target.map_or(-1, |n| n as i64),
                o.trace.status.as_str()
            );
        }
    }
    println!("summary: {}", report.summary_file.display());
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<(), Failure> {
    let report = verify_suite(&VerifyConfig {
        instances: args.instances,
        seed: args.seed,
        rhos: args.rho,
        corrupt_covering: args.corrupt_covering,
    })?;
    print!("{}", report.render());
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => solve(args),
        Command::Bench(args) => bench(args),
        Command::Verify(args) => verify(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Verification) => {
            eprintln!("verification failed");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(3)
        }
    }
}
