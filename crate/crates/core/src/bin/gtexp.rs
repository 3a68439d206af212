use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gtexp::cli::{cmd_check, cmd_eval, cmd_hit, CheckKind, Format, HitMode, RunConfig};

/// Game-theoretic upper expectations on imprecise probability trees.
#[derive(Parser)]
#[command(name = "gtexp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Upper and lower expectation of a finitary variable at a situation.
    Eval(Common),
    /// Hitting probabilities and expected hitting times.
    Hit(Common),
    /// Consistency checks.
    Check {
        #[arg(value_enum)]
        kind: CheckArg,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Tree document (JSON).
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Variable document (JSON).
    #[arg(long)]
    variable: Option<PathBuf>,
    /// Process document (JSON), for `check supermartingale`.
    #[arg(long)]
    process: Option<PathBuf>,
    /// Comma-joined state labels; empty for the initial situation.
    #[arg(long, default_value = "")]
    situation: String,
    /// Comma-joined target states.
    #[arg(long, value_delimiter = ',')]
    target: Vec<String>,
    #[arg(long, value_enum, default_value = "upper-prob")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 64)]
    max_n: usize,
    #[arg(long, default_value_t = 3)]
    k_stable: usize,
    #[arg(long, default_value_t = 1_000_000)]
    budget: u128,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
    /// Write the approximation trace as CSV to this path.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    UpperProb,
    LowerProb,
    UpperTime,
    LowerTime,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Axioms,
    Supermartingale,
    OracleCompare,
    RegressionS8,
}

impl From<Common> for RunConfig {
    fn from(c: Common) -> Self {
        RunConfig {
            tree: c.tree,
            variable: c.variable,
            process: c.process,
            situation: c.situation,
            target: c.target,
            mode: match c.mode {
                ModeArg::UpperProb => HitMode::UpperProb,
                ModeArg::LowerProb => HitMode::LowerProb,
                ModeArg::UpperTime => HitMode::UpperTime,
                ModeArg::LowerTime => HitMode::LowerTime,
            },
            tol: c.tol,
            max_n: c.max_n,
            k_stable: c.k_stable,
            budget: c.budget,
            seed: c.seed,
            format: match c.format {
                FormatArg::Table => Format::Table,
                FormatArg::Json => Format::Json,
                FormatArg::Csv => Format::Csv,
            },
            trace_csv: c.trace_csv,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Eval(c) => cmd_eval(&c.into()),
        Command::Hit(c) => cmd_hit(&c.into()),
        Command::Check { kind, common } => {
            let kind = match kind {
                CheckArg::Axioms => CheckKind::Axioms,
                CheckArg::Supermartingale => CheckKind::Supermartingale,
                CheckArg::OracleCompare => CheckKind::OracleCompare,
                CheckArg::RegressionS8 => CheckKind::RegressionS8,
            };
            cmd_check(kind, &common.into())
        }
    };
    print!("{}", outcome.stdout);
    eprint!("{}", outcome.stderr);
    ExitCode::from(outcome.exit_code as u8)
}
