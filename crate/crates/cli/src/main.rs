mod audit;
mod commands;
mod render;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use colmkt_core::lp::vertex_dim_limit;

use commands::{CliError, Options, Report, Status};

/// Collective arbitrage and super-hedging analysis of finite multi-agent markets.
#[derive(Parser, Debug)]
#[command(name = "colmkt", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Print the report as JSON instead of a table
    #[arg(long, global = true)]
    json: bool,
    /// deterministic | zero_sum_partition:t=<time> | path to an exchange file
    #[arg(long, global = true, value_name = "MODE")]
    exchanges: Option<String>,
    /// Restrict to the sub-market on times s..t
    #[arg(long, global = true, value_name = "S:T")]
    horizon: Option<String>,
    /// Audit a generated suite instead of a market file (n=<count>)
    #[arg(long, global = true, value_name = "n=COUNT")]
    random: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Largest polytope dimension for vertex enumeration
    #[arg(long, global = true, env = "COLMKT_MAX_VERTEX_DIM", value_name = "DIM")]
    max_vertex_dim: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a market file
    Validate { market: PathBuf },
    /// Global no-arbitrage, or one agent's with --agent
    Na {
        market: PathBuf,
        /// Agent name or 1-based index
        #[arg(long)]
        agent: Option<String>,
    },
    /// Collective no-arbitrage with a witness when it fails
    Nca { market: PathBuf },
    /// An equivalent collective martingale measure and the set's dimension
    Measures { market: PathBuf },
    /// Vertices of the closed set of collective martingale measures
    Vertices { market: PathBuf },
    /// Collective super-hedging price with a hedge certificate
    Superhedge { market: PathBuf, claim: PathBuf },
    /// Collective sub-hedging price
    Subhedge { market: PathBuf, claim: PathBuf },
    /// Lower and upper prices of a claim
    Gap { market: PathBuf, claim: PathBuf },
    /// Replicating strategy or a separating vector
    Replicate { market: PathBuf, claim: PathBuf },
    /// Market completeness
    Complete { market: PathBuf },
    /// Arbitrage-free price vectors of a claim
    Priceset { market: PathBuf, claim: PathBuf },
    /// Market extended by the claim priced under an equivalent measure
    Extend { market: PathBuf, claim: PathBuf },
    /// Roll a self-financing strategy forward
    CsfRoll { market: PathBuf, strategy: PathBuf },
    /// Run the invariant suite on a market or on --random instances
    Audit { market: Option<PathBuf> },
}

fn execute(cli: &Cli) -> Result<Report, CliError> {
    let g = &cli.global;
    let opts = Options {
        exchanges: g.exchanges.clone(),
        horizon: g.horizon.clone(),
        random: g.random.clone(),
        seed: g.seed,
        max_vertex_dim: g.max_vertex_dim.unwrap_or_else(vertex_dim_limit),
    };
    let limit = opts.max_vertex_dim;
    let load = |path: &PathBuf| commands::load(path, &opts);
    let with_claim = |market: &PathBuf, claim: &PathBuf| -> Result<_, CliError> {
        let (model, space) = load(market)?;
        let f = commands::load_claim(claim, &model)?;
        Ok((model, space, f))
    };
    match &cli.command {
        Command::Validate { market } => Ok(commands::validate(&load(market)?.0)),
        Command::Na { market, agent } => commands::na(&load(market)?.0, agent.as_deref()),
        Command::Nca { market } => {
            let (m, y) = load(market)?;
            commands::nca(&m, &y)
        }
        Command::Measures { market } => {
            let (m, y) = load(market)?;
            commands::measures(&m, &y)
        }
        Command::Vertices { market } => {
            let (m, y) = load(market)?;
            commands::vertices(&m, &y, limit)
        }
        Command::Superhedge { market, claim } => {
            let (m, y, f) = with_claim(market, claim)?;
            commands::superhedge(&m, &y, &f)
        }
        Command::Subhedge { market, claim } => {
            let (m, y, f) = with_claim(market, claim)?;
            commands::subhedge(&m, &y, &f)
        }
        Command::Gap { market, claim } => {
            let (m, y, f) = with_claim(market, claim)?;
            commands::gap(&m, &y, &f)
        }
        Command::Replicate { market, claim } => {
            let (m, y, f) = with_claim(market, claim)?;
            commands::replication(&m, &y, &f)
        }
        Command::Complete { market } => {
            let (m, y) = load(market)?;
            commands::complete(&m, &y)
        }
        Command::Priceset { market, claim } => {
            let (m, y, f) = with_claim(market, claim)?;
            commands::priceset(&m, &y, &f, limit)
        }
        Command::Extend { market, claim } => {
            let (m, y, f) = with_claim(market, claim)?;
            commands::extend(&m, &y, &f)
        }
        Command::CsfRoll { market, strategy } => commands::csf_roll(&load(market)?.0, strategy),
        Command::Audit { market } => match (market, &opts.random) {
            (None, Some(r)) => Ok(audit::audit_random(audit::parse_random(r)?, opts.seed)),
            (Some(path), None) => {
                let (m, y) = load(path)?;
                Ok(audit::audit_market(&m, &y, opts.seed))
            }
            (Some(_), Some(_)) => Err(CliError::Input(
                "give either a market file or --random, not both".into(),
            )),
            (None, None) => Err(CliError::Input(
                "audit needs a market file or --random n=<count>".into(),
            )),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            let text = if cli.global.json {
                let mut s = serde_json::to_string_pretty(&report.body).expect("report serializes");
                s.push('\n');
                s
            } else {
                render::table(&report.body)
            };
            // a closed pipe is not worth a panic
            let _ = std::io::stdout().write_all(text.as_bytes());
            match report.status {
                Status::Holds => ExitCode::SUCCESS,
                Status::Violated => ExitCode::from(2),
            }
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(2)
        }
    }
}
