use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod io;

use commands::Outcome;

/// Inspect, merge, simulate and check operation-set logs.
///
/// Exit status: 0 on success, 1 on bad input, 2 when a checked property is
/// violated.
#[derive(Parser, Debug)]
#[command(name = "opsets", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the document a log describes.
    Interp {
        /// Log file, or `-` for standard input.
        log: String,
        #[command(flatten)]
        view: ViewArgs,
    },
    /// Print the document after each operation of the log, in ID order.
    History {
        log: String,
        #[command(flatten)]
        view: ViewArgs,
    },
    /// Write the canonical union of several logs.
    Merge {
        #[arg(required = true)]
        logs: Vec<String>,
        #[arg(short, long, default_value = "-")]
        output: String,
    },
    /// Run the network simulator and print its trace as JSON.
    Sim {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(short, long, default_value = "-")]
        output: String,
    },
    /// Run a property checker and print a JSON report.
    Check {
        #[command(subcommand)]
        check: CheckCommand,
    },
    /// Print a random insertion log in causal delivery order, in the format
    /// `check rga --log` reads.
    GenCrdtLog {
        #[arg(long, env = "OPSETS_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        max_ops: usize,
    },
}

#[derive(Args, Debug, Clone)]
pub struct ViewArgs {
    /// Root object, as `counter@node`; `root` is the reserved ID `0@`.
    #[arg(long, default_value = "root")]
    pub root: String,
    #[arg(long, value_enum, default_value_t = Mode::Map)]
    pub mode: Mode,
    #[arg(long, value_enum, default_value_t = Register::Mv)]
    pub register: Register,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Map,
    List,
    Tree,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Register {
    Mv,
    Lww,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum WorkloadArg {
    Map,
    List,
    Tree,
    Text,
}

#[derive(Args, Debug, Clone)]
pub struct SimArgs {
    #[arg(long, default_value_t = 3)]
    pub nodes: usize,
    #[arg(long, default_value_t = 100)]
    pub ops: usize,
    #[arg(long, env = "OPSETS_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0)]
    pub loss: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dup: f64,
    #[arg(long, default_value_t = 3)]
    pub max_delay: u64,
    #[arg(long, value_enum, default_value_t = WorkloadArg::Map)]
    pub workload: WorkloadArg,
    /// A partition window `FROM:TO:GROUPS`, with groups of node indices
    /// separated by `/`, e.g. `10:40:0,1/2`. May be repeated.
    #[arg(long = "partition")]
    pub partitions: Vec<String>,
    /// Pick one random partition window from the seed.
    #[arg(long, conflicts_with = "partitions")]
    pub random_partition: bool,
    /// Stop before the anti-entropy phase.
    #[arg(long)]
    pub no_anti_entropy: bool,
}

#[derive(Subcommand, Debug)]
enum CheckCommand {
    /// Check that concurrent typing runs are not interleaved.
    ///
    /// Without `--log`, runs seeded random trials; `--scenario greeting`
    /// checks the "Hello!" example with " Alice" and " Charlie".
    NoInterleaving {
        #[command(flatten)]
        trials: TrialArgs,
        #[arg(long, value_enum, conflicts_with = "log")]
        scenario: Option<Scenario>,
        /// A list log; `--xs` and `--ys` name the runs' element IDs.
        #[arg(long, requires_all = ["xs", "ys"])]
        log: Option<String>,
        /// The list object holding the text.
        #[arg(long, default_value = "root")]
        list: String,
        #[arg(long, value_delimiter = ',')]
        xs: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        ys: Vec<String>,
    },
    /// Check the four strong list specification conditions on random
    /// insert/delete logs.
    Astrong {
        #[command(flatten)]
        trials: TrialArgs,
        #[arg(long, default_value_t = 30)]
        max_ops: usize,
    },
    /// Compare RGA against the sequential list interpretation.
    Rga {
        #[command(flatten)]
        trials: TrialArgs,
        /// An insertion log in delivery order:
        /// `{"ops":[{"id":[c,"n"],"ref":[c,"n"]|null},...]}`.
        #[arg(long)]
        log: Option<String>,
        #[arg(long, default_value_t = 50)]
        max_ops: usize,
    },
    /// Run seeded simulations and check that replicas converge.
    Convergence {
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Args, Debug, Clone, Copy)]
pub struct TrialArgs {
    #[arg(long, env = "OPSETS_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Greeting,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Interp { log, view } => commands::interp(&log, &view),
        Command::History { log, view } => commands::history(&log, &view),
        Command::Merge { logs, output } => commands::merge(&logs, &output),
        Command::Sim { sim, output } => commands::sim(&sim, &output),
        Command::GenCrdtLog { seed, max_ops } => commands::gen_crdt_log(seed, max_ops),
        Command::Check { check } => match check {
            CheckCommand::NoInterleaving {
                trials,
                scenario,
                log,
                list,
                xs,
                ys,
            } => match (scenario, log) {
                (Some(Scenario::Greeting), _) => commands::check_greeting(),
                (None, Some(log)) => commands::check_log_interleaving(&log, &list, &xs, &ys),
                (None, None) => commands::check_random_interleaving(trials),
            },
            CheckCommand::Astrong { trials, max_ops } => commands::check_astrong(trials, max_ops),
            CheckCommand::Rga {
                trials,
                log,
                max_ops,
            } => commands::check_rga(trials, log.as_deref(), max_ops),
            CheckCommand::Convergence { trials, sim } => commands::check_convergence(trials, &sim),
        },
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
