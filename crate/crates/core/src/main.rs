use std::path::PathBuf;
use std::process::ExitCode;

use carnot::cli::{self, CliError, Command, ExperimentConfig};
use carnot::operator::{GroupRef, OperatorSpec};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "carnot", version, about = "Subelliptic evolution operators on Carnot groups")]
struct Cli {
    /// Registry name, inline JSON, or @file.
    #[arg(long, global = true, value_parser = cli::parse_group)]
    group: Option<GroupRef>,
    /// Operator spec as inline JSON or @file.
    #[arg(long = "op", global = true, value_parser = cli::parse_operator)]
    op: Option<OperatorSpec>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for the report, CSV table and plot script.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    stem: Option<String>,
    #[arg(long, global = true)]
    no_plot: bool,
    /// Write the normalized config to this file.
    #[arg(long, global = true)]
    save_config: Option<PathBuf>,
    /// Print the JSON report instead of the summary.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Carnot-Caratheodory distance between two points.
    Distance(cli::DistanceArgs),
    /// Heisenberg heat kernel table.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Fundamental solution by the parametrix series.
    #[command(subcommand)]
    Parametrix(ParametrixCmd),
    /// Mean value formula on a known solution.
    Meanvalue(cli::MeanValueArgs),
    #[command(subcommand)]
    Harnack(HarnackCmd),
    /// Acceptance criteria.
    Selftest(cli::SelftestArgs),
    /// Run a saved config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum KernelCmd {
    Bake(cli::BakeArgs),
    Eval(cli::KernelEvalArgs),
}

#[derive(Subcommand)]
enum ParametrixCmd {
    Eval(cli::ParametrixEvalArgs),
    Verify(cli::ParametrixVerifyArgs),
}

#[derive(Subcommand)]
enum HarnackCmd {
    Chain(cli::ChainArgs),
    Parabolic(cli::ParabolicArgs),
    Invariant(cli::InvariantArgs),
    Maxprinciple(cli::ProbeArgs),
}

fn config(args: Cli) -> Result<(ExperimentConfig, Option<PathBuf>, bool), CliError> {
    let command = match args.cmd {
        Cmd::Distance(a) => Command::Distance(a),
        Cmd::Kernel(KernelCmd::Bake(a)) => Command::KernelBake(a),
        Cmd::Kernel(KernelCmd::Eval(a)) => Command::KernelEval(a),
        Cmd::Parametrix(ParametrixCmd::Eval(a)) => Command::ParametrixEval(a),
        Cmd::Parametrix(ParametrixCmd::Verify(a)) => Command::ParametrixVerify(a),
        Cmd::Meanvalue(a) => Command::Meanvalue(a),
        Cmd::Harnack(HarnackCmd::Chain(a)) => Command::HarnackChain(a),
        Cmd::Harnack(HarnackCmd::Parabolic(a)) => Command::HarnackParabolic(a),
        Cmd::Harnack(HarnackCmd::Invariant(a)) => Command::HarnackInvariant(a),
        Cmd::Harnack(HarnackCmd::Maxprinciple(a)) => Command::HarnackMaxprinciple(a),
        Cmd::Selftest(a) => Command::Selftest(a),
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", config.display())))?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            override_common(&mut cfg, args.group, args.op, args.seed, args.out, args.stem, args.no_plot);
            return Ok((cfg, args.save_config, args.json));
        }
    };
    let mut cfg = ExperimentConfig::new(command);
    override_common(&mut cfg, args.group, args.op, args.seed, args.out, args.stem, args.no_plot);
    Ok((cfg, args.save_config, args.json))
}

fn override_common(
    cfg: &mut ExperimentConfig,
    group: Option<GroupRef>,
    op: Option<OperatorSpec>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    stem: Option<String>,
    no_plot: bool,
) {
    if group.is_some() {
        cfg.group = group;
    }
    if op.is_some() {
        cfg.operator = op;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if out.is_some() {
        cfg.output.dir = out;
    }
    if let Some(s) = stem {
        cfg.output.stem = s;
    }
    if no_plot {
        cfg.output.plot = false;
    }
}

fn run(args: Cli) -> Result<i32, CliError> {
    let (cfg, save, json) = config(args)?;
    if let Some(path) = save {
        std::fs::write(&path, cfg.to_json()).map_err(|e| CliError::Failed(format!("writing {}: {e}", path.display())))?;
    }
    let out = cli::execute(&cfg)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&out.report).expect("report serializes"));
    } else {
        for l in &out.lines {
            println!("{l}");
        }
    }
    for p in cli::write_outputs(&out)? {
        eprintln!("wrote {}", p.display());
    }
    for name in out.report.failing() {
        eprintln!("failed check: {name}");
    }
    Ok(out.exit_code())
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match run(args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("carnot: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
