//! `cmdp`: generate, validate and solve uniformly-feasible constrained MDPs.
//!
//! Exit status: 0 success, 1 invalid input, 2 enumeration cap exceeded,
//! 3 internal consistency failure (including a failed oracle check).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cmdp_core::commands::{
    report_has_failed_check, run_command, Command, StartSpec, DEFAULT_MAX_ITERS, DEFAULT_MAX_ROUNDS,
};
use cmdp_core::format::InstanceFile;
use cmdp_core::generate::{gen_instance, GenOptions, ThresholdChoice};
use cmdp_core::oracle::OracleCheck;
use cmdp_core::{CmdpError, SlacknessMode};

#[derive(Parser, Debug)]
#[command(name = "cmdp", version, about = "Uniformly-feasible constrained MDP solvers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Check an instance document and report every violation.
    Validate(Common),
    /// Evaluate V and J for one policy (the threshold policy by default).
    Eval {
        #[command(flatten)]
        common: Common,
        /// Comma-separated action labels, one per state.
        #[arg(long)]
        policy: Option<String>,
    },
    /// Uniform optimum of the MDP restricted to the threshold policy's DP set.
    SolveDp(Common),
    /// Run the off-line improvement algorithm.
    RunA {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Slack::Relative)]
        slackness: Slack,
        /// threshold, dp, or a file holding comma-separated labels.
        #[arg(long, default_value = "dp")]
        start: String,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        max_iters: usize,
    },
    /// Run the PI refinement loop on full action sets.
    Refine {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Slack::Relative)]
        slackness: Slack,
        /// threshold, dp, a (final policy of run-a), or a label file.
        #[arg(long, default_value = "a")]
        start: String,
        #[arg(long, default_value_t = DEFAULT_MAX_ROUNDS)]
        max_rounds: usize,
    },
    /// Run the on-line asynchronous method along a sampled trajectory.
    Online {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "threshold")]
        start: String,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Brute-force certificate for small instances.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Checks to run; repeat or comma-separate. Defaults to all.
        #[arg(long = "check", value_enum, value_delimiter = ',')]
        checks: Vec<CheckArg>,
        #[arg(long, env = "CMDP_ENUM_CAP", default_value_t = 1_000_000)]
        cap: u64,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    instance: PathBuf,
    /// Write the structured report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the structured report on stdout instead of the table.
    #[arg(long)]
    json: bool,
    /// Include wall time in the structured report (makes it non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    states: usize,
    #[arg(long)]
    actions: usize,
    #[arg(long)]
    seed: u64,
    /// Mix every transition row with the uniform distribution.
    #[arg(long)]
    communicating: bool,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    /// How to choose the threshold policy.
    #[arg(long, value_enum, default_value_t = Threshold::MinCost)]
    threshold: Threshold,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Threshold {
    /// Unconstrained cost minimizer.
    MinCost,
    /// Seeded uniform action per state.
    Random,
}

impl From<Threshold> for ThresholdChoice {
    fn from(t: Threshold) -> Self {
        match t {
            Threshold::MinCost => ThresholdChoice::CostMinimizer,
            Threshold::Random => ThresholdChoice::Random,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Slack {
    Zero,
    Relative,
}

impl From<Slack> for SlacknessMode {
    fn from(s: Slack) -> Self {
        match s {
            Slack::Zero => SlacknessMode::Zero,
            Slack::Relative => SlacknessMode::RelativeToThreshold,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CheckArg {
    Phi,
    Vstar,
    Tf,
    Corollary,
}

impl From<CheckArg> for OracleCheck {
    fn from(c: CheckArg) -> Self {
        match c {
            CheckArg::Phi => OracleCheck::Phi,
            CheckArg::Vstar => OracleCheck::VStar,
            CheckArg::Tf => OracleCheck::Tf,
            CheckArg::Corollary => OracleCheck::Corollary,
        }
    }
}

enum Failure {
    Input(String),
    Cap(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Cap(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Cap(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<CmdpError> for Failure {
    fn from(e: CmdpError) -> Self {
        if matches!(e, CmdpError::CountTooLarge { .. }) {
            Failure::Cap(e.to_string())
        } else if e.is_internal() {
            Failure::Internal(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

fn start_spec(text: &str) -> Result<StartSpec, Failure> {
    Ok(match text {
        "threshold" => StartSpec::Threshold,
        "dp" => StartSpec::Dp,
        "a" => StartSpec::AlgorithmA,
        path => {
            let labels = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{path}: {e}")))?;
            StartSpec::Labels(labels.trim().to_string())
        }
    })
}

fn write_out(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn gen(args: &GenArgs) -> Result<(), Failure> {
    let opts = GenOptions {
        states: args.states,
        actions_per_state: args.actions,
        seed: args.seed,
        communicating: args.communicating,
        gamma: args.gamma,
        beta: args.beta,
        threshold: args.threshold.into(),
    };
    let text = InstanceFile::from_instance(&gen_instance(&opts)?).to_json();
    match &args.out {
        Some(path) => write_out(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cmd: Command, common: &Common) -> Result<(), Failure> {
    let text = fs::read_to_string(&common.instance)
        .map_err(|e| Failure::Input(format!("{}: {e}", common.instance.display())))?;
    let file = InstanceFile::from_json(&text)?;
    let started = Instant::now();
    let mut report = run_command(&cmd, &file)?;
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    if common.timing {
        report.wall_time_ms = Some(elapsed_ms);
    }
    let json = report.to_json();
    if let Some(path) = &common.out {
        write_out(path, &json)?;
    }
    if common.json {
        print!("{json}");
    } else {
        print!("{}", report.render_table());
        eprintln!("wall time: {elapsed_ms:.3} ms");
    }
    if report_has_failed_check(&report) {
        return Err(Failure::Internal("oracle check failed".into()));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Gen(args) => gen(&args),
        Cmd::Validate(common) => execute(Command::Validate, &common),
        Cmd::Eval { common, policy } => execute(Command::Eval { policy }, &common),
        Cmd::SolveDp(common) => execute(Command::SolveDp, &common),
        Cmd::RunA { common, slackness, start, max_iters } => {
            let start = start_spec(&start)?;
            execute(Command::RunA { slackness: slackness.into(), start, max_iters }, &common)
        }
        Cmd::Refine { common, slackness, start, max_rounds } => {
            let start = start_spec(&start)?;
            execute(Command::Refine { slackness: slackness.into(), start, max_rounds }, &common)
        }
        Cmd::Online { common, start, steps, seed } => {
            let start = start_spec(&start)?;
            execute(Command::Online { start, steps, seed }, &common)
        }
        Cmd::Oracle { common, checks, cap } => {
            let checks: Vec<OracleCheck> = if checks.is_empty() {
                OracleCheck::ALL.to_vec()
            } else {
                checks.into_iter().map(Into::into).collect()
            };
            execute(Command::Oracle { checks, cap }, &common)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
