use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mgd::baselines::BarrierConfig;
use mgd_cli::commands::{self, IngestKind, IngestOptions};
use mgd_cli::config::{DataFormat, ExperimentConfig, Family, Target};
use mgd_cli::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "mgd", version, about = "Moment guided diffusion sampler")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "MGD_THREADS")]
    threads: Option<usize>,
    /// Bitwise reproducible reductions regardless of thread count.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run MGD at one σ² and write samples, trace and summary.
    Sample(Experiment),
    /// Run MGD over a list of σ² values and tabulate entropies.
    Sweep(Experiment),
    /// Steps MALA and MGD need to reach a KL target on double wells.
    Benchmark(Benchmark),
    /// Clean a price series or field and write it as a field file.
    Ingest(Ingest),
    /// Scattering moments of each sample in a file, as CSV.
    Scatter(Scatter),
    /// Histogram entropy of the values in a file.
    Entropy(Entropy),
}

/// Settings come from `--config`, then flags override them.
#[derive(Args)]
struct Experiment {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<DataFormat>,
    /// monomial:r, quadratic, abs, scattering:J,L or logpoly:c0,c1,...
    #[arg(long)]
    family: Option<Family>,
    /// Comma separated.
    #[arg(long, value_delimiter = ',')]
    sigma2: Option<Vec<f64>>,
    #[arg(long)]
    n_steps: Option<usize>,
    #[arg(long)]
    n_rep: Option<usize>,
    #[arg(long)]
    n_mc: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Reference law for KL: poly:θ1,θ2,... or abs:a,b.
    #[arg(long)]
    target: Option<Target>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Benchmark {
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.8,1.2")]
    betas: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    kl_target: f64,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    nrep: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// MALA censoring budget.
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, short, default_value = "mgd-benchmark")]
    output: PathBuf,
}

#[derive(Args)]
struct Ingest {
    #[arg(value_enum)]
    kind: IngestKind,
    input: PathBuf,
    #[arg(long, value_enum)]
    format: Option<DataFormat>,
    /// Turn prices into log-returns first.
    #[arg(long)]
    log_returns: bool,
    #[arg(long)]
    no_standardize: bool,
    /// Crop to dyadic sizes for the scattering family.
    #[arg(long)]
    scattering: bool,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct Scatter {
    input: PathBuf,
    #[arg(long, value_enum)]
    format: Option<DataFormat>,
    #[arg(long, short = 'J', default_value_t = 3)]
    j: usize,
    #[arg(long, short = 'L', default_value_t = 4)]
    l: usize,
    /// Write here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Entropy {
    input: PathBuf,
    #[arg(long, value_enum)]
    format: Option<DataFormat>,
    #[arg(long, default_value_t = 500)]
    bins: usize,
}

fn experiment(e: Experiment, deterministic: bool) -> CliResult<ExperimentConfig> {
    let mut c = match &e.config {
        Some(p) => ExperimentConfig::from_json(
            &std::fs::read_to_string(p).map_err(|err| CliError::config(format!("cannot read {}: {err}", p.display())))?,
        )?,
        None => ExperimentConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = e.$field { c.$field = v; })* };
    }
    set!(family, sigma2, n_rep, seed, bins, output);
    if e.data.is_some() {
        c.data = e.data;
    }
    if e.format.is_some() {
        c.data_format = e.format;
    }
    if e.n_mc.is_some() {
        c.n_mc = e.n_mc;
    }
    if e.n_steps.is_some() {
        c.n_steps = e.n_steps;
    }
    if e.target.is_some() {
        c.target = e.target;
    }
    c.deterministic |= deterministic;
    Ok(c)
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print(v: &serde_json::Value) {
    emit(&(serde_json::to_string_pretty(v).expect("json values serialize") + "\n"));
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    match cli.command {
        Command::Sample(e) => print(&commands::sample(&experiment(e, cli.deterministic)?)?),
        Command::Sweep(e) => print(&commands::sweep(&experiment(e, cli.deterministic)?)?),
        Command::Benchmark(b) => {
            let mut c = BarrierConfig {
                betas: b.betas,
                kl_target: b.kl_target,
                ..BarrierConfig::default()
            };
            if let Some(v) = b.chains {
                c.mala_chains = v;
            }
            if let Some(v) = b.nrep {
                c.mgd_n_rep = v;
            }
            if let Some(v) = b.seed {
                c.seed = v;
            }
            if let Some(v) = b.max_steps {
                c.mala_max_steps = v;
            }
            emit(&commands::benchmark(&c, &b.output)?);
        }
        Command::Ingest(i) => print(&commands::ingest(&IngestOptions {
            input: i.input,
            format: i.format,
            kind: i.kind,
            log_returns: i.log_returns,
            standardize: !i.no_standardize,
            scattering: i.scattering,
            output: i.output,
        })?),
        Command::Scatter(s) => {
            let csv = commands::scatter(&s.input, s.format, s.j, s.l)?;
            match s.output {
                Some(p) => std::fs::write(p, csv)?,
                None => emit(&csv),
            }
        }
        Command::Entropy(e) => print(&commands::entropy(&e.input, e.format, e.bins)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mgd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
