use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use snc_core::bounds::{Analyzer, Metric};
use snc_core::corpus;
use snc_core::counterexample::CounterexampleConfig;
use snc_core::experiments::{self, MethodChoice, Site, SweepSpec};
use snc_core::network::{parse_network, TandemNetwork};
use snc_core::sim::{Policy, SimConfig};

/// Delay and backlog bounds for tandem networks of Markov-modulated processes.
///
/// NETWORK is a JSON file or one of the built-in corpora:
/// fig1a, fig1b, sinktree_up, sinktree_down.
#[derive(Parser, Debug)]
#[command(name = "snc", version)]
struct Cli {
    /// Omit the timestamp comment line from CSV output.
    #[arg(long, global = true, default_value_t = true, action = ArgAction::Set)]
    deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check stability and the martingale-site assumptions.
    Validate { network: String },
    /// Optimized bound curve for flow 1.
    Analyze {
        network: String,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Server index for the martingale analysis, or `auto`.
        #[arg(long = "at", default_value = "auto")]
        at: String,
        #[arg(long, value_enum, default_value_t = MetricArg::Delay)]
        metric: MetricArg,
        /// Inclusive range A..B of delays or backlogs.
        #[arg(long, default_value = "0..100")]
        range: String,
        /// Also report the delay quantile at this violation probability.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Empirical tail of flow 1 by slotted simulation.
    Simulate {
        network: String,
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PolicyArg::CrossPriority)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 1)]
        replications: usize,
        #[arg(long, default_value_t = 10_000)]
        warmup: u64,
        #[arg(long, value_enum, default_value_t = MetricArg::Delay)]
        metric: MetricArg,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Delay quantiles while one numeric network field varies.
    Sweep {
        network: String,
        /// JSON pointer (`/servers/1/service/rate`) or dotted path.
        #[arg(long)]
        param: String,
        /// lo:hi:step
        #[arg(long)]
        range: String,
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
        /// Add a simulated quantile per point.
        #[arg(long)]
        with_sim: bool,
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PolicyArg::CrossPriority)]
        policy: PolicyArg,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Monte-Carlo check of the double-supremum tail bound.
    Counterexample {
        #[arg(long, default_value_t = 1.0)]
        mean: f64,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [50u64, 100, 200])]
        horizons: Vec<u64>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// x grid as lo:hi:step
        #[arg(long, default_value = "0:10:0.25")]
        x: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Pmoo,
    Martingale,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MetricArg {
    Delay,
    Backlog,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Delay => Metric::Delay,
            MetricArg::Backlog => Metric::Backlog,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PolicyArg {
    CrossPriority,
    Fifo,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::CrossPriority => Policy::CrossPriority,
            PolicyArg::Fifo => Policy::FifoAggregate,
        }
    }
}

fn load_network(arg: &str) -> Result<TandemNetwork> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        return parse_network(&text).with_context(|| format!("parsing {arg}"));
    }
    match corpus::by_name(arg) {
        Some(net) => Ok(net),
        None => bail!(
            "`{arg}` is neither a readable file nor a built-in network ({})",
            corpus::NAMES.join(", ")
        ),
    }
}

fn parse_site(at: &str) -> Result<Site> {
    if at == "auto" {
        return Ok(Site::Auto);
    }
    let h: usize = at
        .parse()
        .with_context(|| format!("--at expects a server index or `auto`, got `{at}`"))?;
    Ok(Site::At(h))
}

fn emit<R: Serialize>(rows: &[R], output: Option<&Path>, deterministic: bool) -> Result<()> {
    let stamp = if deterministic {
        None
    } else {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Some(format!("generated at unix time {secs}"))
    };
    match output {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            experiments::write_csv(BufWriter::new(f), rows, stamp.as_deref())?;
        }
        None => experiments::write_csv(io::stdout().lock(), rows, stamp.as_deref())?,
    }
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SNC_THREADS") {
        let n: usize = v
            .parse()
            .with_context(|| format!("SNC_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            bail!("SNC_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let det = cli.deterministic;
    match cli.command {
        Command::Validate { network } => {
            let net = load_network(&network)?;
            let report = experiments::run_validate(&net)?;
            println!("{report}");
        }
        Command::Analyze {
            network,
            method,
            at,
            metric,
            range,
            epsilon,
            output,
        } => {
            let net = load_network(&network)?;
            let choice = match method {
                MethodArg::Pmoo => MethodChoice::Pmoo,
                MethodArg::Martingale => MethodChoice::Martingale(parse_site(&at)?),
            };
            let values = experiments::parse_int_range(&range)?;
            let an = Analyzer::new(net)?;
            let rows = experiments::run_analyze(&an, choice, metric.into(), &values)?;
            emit(&rows, output.as_deref(), det)?;
            if let Some(eps) = epsilon {
                for (m, q) in experiments::quantiles(&an, choice, eps) {
                    let site = m.site().map(|h| format!(" h={h}")).unwrap_or_default();
                    match q {
                        Ok(t) => eprintln!("{}{site}: delay quantile at {eps:e} = {t}", m.label()),
                        Err(e) => eprintln!("{}{site}: {e}", m.label()),
                    }
                }
            }
        }
        Command::Simulate {
            network,
            steps,
            seed,
            policy,
            replications,
            warmup,
            metric,
            output,
        } => {
            let net = load_network(&network)?;
            let cfg = SimConfig {
                steps,
                seed,
                policy: policy.into(),
                replications,
                warmup: warmup.min(steps),
            };
            let rows = experiments::run_simulate(&net, &cfg, metric.into())?;
            emit(&rows, output.as_deref(), det)?;
        }
        Command::Sweep {
            network,
            param,
            range,
            epsilon,
            with_sim,
            steps,
            seed,
            policy,
            output,
        } => {
            let net = load_network(&network)?;
            let spec = SweepSpec {
                param,
                values: experiments::parse_float_range(&range)?,
                epsilon,
                simulation: with_sim.then(|| SimConfig {
                    steps,
                    seed,
                    policy: policy.into(),
                    replications: 1,
                    warmup: SimConfig::default().warmup.min(steps),
                }),
            };
            let rows = experiments::run_sweep(&net, &spec)?;
            emit(&rows, output.as_deref(), det)?;
        }
        Command::Counterexample {
            mean,
            theta,
            horizons,
            trials,
            seed,
            x,
            output,
        } => {
            let cfg = CounterexampleConfig {
                service_mean: mean,
                theta_star: theta,
                horizons,
                x_grid: experiments::parse_float_range(&x)?,
                trials,
                seed,
            };
            let rows = experiments::run_counterexample(&cfg)?;
            emit(&rows, output.as_deref(), det)?;
        }
    }
    io::stdout().flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
