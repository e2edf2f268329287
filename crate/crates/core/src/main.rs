//! `spiralgrad` — train and evaluate a tiny scalar-autodiff MLP on the
//! two-spiral problem, from the command line.

use std::io::Write as _;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use spiralgrad::cli::{
    cmd_eval, cmd_gen_data, cmd_plot_loss, cmd_plot_spiral, cmd_train, load_config, CliError,
};

#[derive(Parser)]
#[command(
    name = "spiralgrad",
    version,
    about = "Scalar reverse-mode autodiff MLP trainer for two-spiral classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Config file of `key = value` lines (defaults apply when omitted).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset CSV: output for gen-data, input for train/plot-spiral.
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Override the config's checkpoint path.
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,
    /// Directory for emitted artifacts (default: current directory).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Resume from the checkpoint file when it exists.
    #[arg(long)]
    resume: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the training dataset this config would generate.
    GenData(CommonArgs),
    /// Train (or resume) and save checkpoint, loss text, and loss chart.
    Train(CommonArgs),
    /// Evaluate a checkpoint on the held-out spiral and write the report.
    Eval(CommonArgs),
    /// Re-emit the loss figure files from a checkpoint.
    PlotLoss(CommonArgs),
    /// Render a dataset or predictions CSV as a scatter SVG.
    PlotSpiral(CommonArgs),
}

fn out_dir(args: &CommonArgs) -> PathBuf {
    args.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut stdout = stdout.lock();
    match cli.command {
        Command::GenData(args) => {
            let cfg = load_config(
                args.config.as_deref(),
                args.seed,
                args.checkpoint.as_deref(),
                args.resume,
            )?;
            let path = match &args.data {
                Some(p) => p.clone(),
                None => out_dir(&args).join("spiral.csv"),
            };
            cmd_gen_data(&cfg, &path)
        }
        Command::Train(args) => {
            let cfg = load_config(
                args.config.as_deref(),
                args.seed,
                args.checkpoint.as_deref(),
                args.resume,
            )?;
            cmd_train(&cfg, args.data.as_deref(), &out_dir(&args), &mut stdout)
        }
        Command::Eval(args) => {
            let cfg = load_config(
                args.config.as_deref(),
                args.seed,
                args.checkpoint.as_deref(),
                args.resume,
            )?;
            cmd_eval(&cfg, &out_dir(&args), &mut stdout).map(|_| ())
        }
        Command::PlotLoss(args) => {
            let cfg = load_config(
                args.config.as_deref(),
                args.seed,
                args.checkpoint.as_deref(),
                args.resume,
            )?;
            cmd_plot_loss(&cfg.checkpoint_path, &out_dir(&args)).map(|_| ())
        }
        Command::PlotSpiral(args) => {
            let data = args.data.clone().ok_or_else(|| {
                CliError::Usage("plot-spiral needs --data <FILE> pointing at a CSV".to_string())
            })?;
            cmd_plot_spiral(&data, &out_dir(&args)).map(|_| ())
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version are not usage errors.
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        let _ = writeln!(std::io::stderr(), "error: {err}");
        std::process::exit(err.exit_code());
    }
}
