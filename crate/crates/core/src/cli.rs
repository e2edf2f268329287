//! Command implementations behind the binary: config loading with flag
//! overrides, dataset generation, training with checkpoint/resume, held-out
//! evaluation, and figure emission. Each command is an ordinary function
//! over paths and a writer, so the whole surface is testable without
//! spawning a process; the binary maps errors to exit codes (0 success,
//! 1 usage/config, 2 data/checkpoint/output).

use crate::config::{parse_config, ConfigError};
use crate::data::{load_csv, save_csv, DataError};
use crate::plot::{emit_loss_plot, emit_scatter_plot, PlotArtifact, PlotError};
use crate::train::{
    load_checkpoint, lr_schedule, save_checkpoint, EpochLossLog, EvalReport, Experiment,
    ExperimentConfig, TrainError,
};

use std::io::Write;
use std::path::Path;

use thiserror::Error;

/// Any command failure, tagged with how the process should exit.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for usage/config problems, 2 for data/checkpoint/output problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Train(TrainError::Config(_)) => 1,
            _ => 2,
        }
    }
}

/// Reads the config file (if any) and applies the flag overrides.
pub fn load_config(
    config: Option<&Path>,
    seed: Option<u64>,
    checkpoint: Option<&Path>,
    resume: bool,
) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match config {
        Some(path) => parse_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(path) = checkpoint {
        cfg.checkpoint_path = path.to_path_buf();
    }
    if resume {
        cfg.resume = true;
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    if dir.as_os_str().is_empty() {
        return Ok(());
    }
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(parent) => ensure_dir(parent),
        None => Ok(()),
    }
}

fn print_line(w: &mut impl Write, line: &str) -> Result<(), CliError> {
    writeln!(w, "{line}").map_err(|source| CliError::Io {
        path: "<stdout>".to_string(),
        source,
    })
}

/// Writes the training dataset a run with this config would generate. The
/// command consumes the generator exactly like `train` does (parameter init
/// first, then the data draw), so the file matches the internal dataset
/// byte for byte.
pub fn cmd_gen_data(cfg: &ExperimentConfig, path: &Path) -> Result<(), CliError> {
    let exp = Experiment::setup(cfg, None)?;
    ensure_parent(path)?;
    save_csv(path, &exp.train_data)?;
    Ok(())
}

/// The shared evaluation tail: score the held-out set, print the summary,
/// and write `eval.txt` plus `predictions.csv` into the output directory.
fn run_eval(
    exp: &mut Experiment,
    cfg: &ExperimentConfig,
    out_dir: &Path,
    w: &mut impl Write,
) -> Result<EvalReport, CliError> {
    let eval_data = Experiment::eval_dataset(cfg);
    let report = exp.evaluate_on(&eval_data)?;
    print_line(w, &report.summary_line())?;
    ensure_dir(out_dir)?;
    let report_path = out_dir.join("eval.txt");
    std::fs::write(&report_path, format!("{}\n", report.summary_line())).map_err(|source| {
        CliError::Io {
            path: report_path.display().to_string(),
            source,
        }
    })?;
    save_csv(&out_dir.join("predictions.csv"), &report.predictions)?;
    Ok(report)
}

/// Trains (or resumes) a model: one stdout line per epoch actually run,
/// then saves the checkpoint and emits the loss figure files. When a resumed
/// checkpoint already covers every configured epoch, prints the
/// already-complete notice and runs only the evaluation tail.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    data_path: Option<&Path>,
    out_dir: &Path,
    w: &mut impl Write,
) -> Result<(), CliError> {
    let data = match data_path {
        Some(path) => Some(load_csv(path)?),
        None => None,
    };
    let mut exp = Experiment::setup(cfg, data)?;

    let mut start_epoch = 1;
    if cfg.resume && cfg.checkpoint_path.exists() {
        let checkpoint = load_checkpoint(&cfg.checkpoint_path)?;
        start_epoch = exp.resume_from(&checkpoint)?;
    }

    if start_epoch > cfg.epochs {
        print_line(w, "Training already complete, running eval only")?;
        run_eval(&mut exp, cfg, out_dir, w)?;
    } else {
        exp.train_to(cfg, start_epoch)?;
        for &(epoch, loss) in exp.log.entries() {
            if epoch < start_epoch {
                continue; // epochs restored from the checkpoint, not run now
            }
            let lr = lr_schedule(epoch, cfg);
            print_line(w, &format!("Epoch: {epoch} Loss: {loss:?} LR: {lr:?}"))?;
        }
    }

    ensure_parent(&cfg.checkpoint_path)?;
    save_checkpoint(&cfg.checkpoint_path, &exp.checkpoint())?;
    ensure_dir(out_dir)?;
    emit_loss_plot(&exp.log, &out_dir.join("loss.txt"))?;
    Ok(())
}

/// Loads the checkpoint, rebuilds the model, and evaluates on the held-out
/// set drawn from the config's evaluation stream.
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    w: &mut impl Write,
) -> Result<EvalReport, CliError> {
    let mut exp = Experiment::setup(cfg, None)?;
    let checkpoint = load_checkpoint(&cfg.checkpoint_path)?;
    exp.resume_from(&checkpoint)?;
    run_eval(&mut exp, cfg, out_dir, w)
}

/// Re-emits the loss figure files from a saved checkpoint's loss history.
pub fn cmd_plot_loss(
    checkpoint_path: &Path,
    out_dir: &Path,
) -> Result<Vec<PlotArtifact>, CliError> {
    let checkpoint = load_checkpoint(checkpoint_path)?;
    let mut log = EpochLossLog::new();
    for (i, &loss) in checkpoint.losses.iter().enumerate() {
        log.push(i + 1, loss);
    }
    ensure_dir(out_dir)?;
    Ok(emit_loss_plot(&log, &out_dir.join("loss.txt"))?)
}

/// Renders a dataset (or predictions) CSV as a scatter SVG named after the
/// input file.
pub fn cmd_plot_spiral(data_path: &Path, out_dir: &Path) -> Result<PlotArtifact, CliError> {
    let samples = load_csv(data_path)?;
    let stem = data_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scatter");
    ensure_dir(out_dir)?;
    Ok(emit_scatter_plot(
        &samples,
        &out_dir.join(format!("{stem}.svg")),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::ConfigIssue;

    /// 20-sample config that trains in milliseconds.
    fn fast_cfg(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            seed: 11,
            train_n_per_class: 10,
            eval_n_per_class: 10,
            epochs: 3,
            batch_size: 20,
            checkpoint_path: dir.join("model.txt"),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn exit_codes_split_usage_from_data_problems() {
        assert_eq!(CliError::Usage("bad".into()).exit_code(), 1);
        assert_eq!(
            CliError::Train(TrainError::Config(ConfigIssue::NotPositive {
                field: "epochs"
            }))
            .exit_code(),
            1
        );
        assert_eq!(
            CliError::Train(TrainError::ParamCount {
                expected: 37,
                got: 36
            })
            .exit_code(),
            2
        );
        assert_eq!(CliError::Plot(PlotError::EmptyLog).exit_code(), 2);
    }

    #[test]
    fn flag_overrides_beat_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg_path = dir.path().join("run.cfg");
        std::fs::write(&cfg_path, "seed = 1\nepochs = 9\n").unwrap();
        let cfg = load_config(
            Some(&cfg_path),
            Some(99),
            Some(&dir.path().join("other.txt")),
            true,
        )
        .unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.epochs, 9);
        assert_eq!(cfg.checkpoint_path, dir.path().join("other.txt"));
        assert!(cfg.resume);
        assert_eq!(
            load_config(None, None, None, false).unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn gen_data_matches_the_training_runs_internal_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fast_cfg(dir.path());
        let csv = dir.path().join("spiral.csv");
        cmd_gen_data(&cfg, &csv).unwrap();
        let exp = Experiment::setup(&cfg, None).unwrap();
        assert_eq!(load_csv(&csv).unwrap(), exp.train_data);
    }

    #[test]
    fn train_prints_epochs_and_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fast_cfg(dir.path());
        let out = dir.path().join("out");
        let mut stdout = Vec::new();
        cmd_train(&cfg, None, &out, &mut stdout).unwrap();

        let text = String::from_utf8(stdout).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("Epoch: 1 Loss: "));
        assert!(lines[0].contains(" LR: 1.0"));
        assert!(lines[2].starts_with("Epoch: 3 "));

        let ck = std::fs::read_to_string(&cfg.checkpoint_path).unwrap();
        assert!(ck.starts_with("epochs=3\n"));
        let coords = std::fs::read_to_string(out.join("loss.txt")).unwrap();
        assert_eq!(coords.split(' ').count(), 3);
        assert!(out.join("loss.svg").exists());
    }

    #[test]
    fn training_with_external_data_equals_generated_data() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = fast_cfg(dir.path());
        let csv = dir.path().join("spiral.csv");
        cmd_gen_data(&cfg, &csv).unwrap();

        let out_a = dir.path().join("a");
        let mut cfg_a = cfg.clone();
        cfg_a.checkpoint_path = dir.path().join("a.txt");
        cmd_train(&cfg_a, Some(&csv), &out_a, &mut Vec::new()).unwrap();

        let out_b = dir.path().join("b");
        let mut cfg_b = cfg.clone();
        cfg_b.checkpoint_path = dir.path().join("b.txt");
        cmd_train(&cfg_b, None, &out_b, &mut Vec::new()).unwrap();

        assert_eq!(
            std::fs::read(&cfg_a.checkpoint_path).unwrap(),
            std::fs::read(&cfg_b.checkpoint_path).unwrap()
        );
    }

    #[test]
    fn resume_skips_completed_epochs_and_reports_only_new_ones() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let mut cfg = fast_cfg(dir.path());
        cfg.epochs = 2;
        cmd_train(&cfg, None, &out, &mut Vec::new()).unwrap();

        // Extend to 5 total epochs; only 3..=5 run and print.
        cfg.epochs = 5;
        cfg.resume = true;
        let mut stdout = Vec::new();
        cmd_train(&cfg, None, &out, &mut stdout).unwrap();
        let text = String::from_utf8(stdout).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("Epoch: 3 "));
        // The saved checkpoint covers the full history.
        let ck = std::fs::read_to_string(&cfg.checkpoint_path).unwrap();
        assert!(ck.starts_with("epochs=5\n"));
        let coords = std::fs::read_to_string(out.join("loss.txt")).unwrap();
        assert_eq!(coords.split(' ').count(), 5);
    }

    #[test]
    fn already_complete_resume_runs_only_the_eval_tail() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let mut cfg = fast_cfg(dir.path());
        cmd_train(&cfg, None, &out, &mut Vec::new()).unwrap();

        cfg.resume = true;
        let mut stdout = Vec::new();
        cmd_train(&cfg, None, &out, &mut stdout).unwrap();
        let text = String::from_utf8(stdout).unwrap();
        assert!(text.starts_with("Training already complete, running eval only\n"));
        assert!(!text.contains("Epoch:"));
        assert!(text.lines().any(|l| l.starts_with("n=20 correct=")));
        assert!(out.join("eval.txt").exists());
        assert!(out.join("predictions.csv").exists());
    }

    #[test]
    fn eval_reads_the_checkpoint_and_writes_the_report() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let cfg = fast_cfg(dir.path());
        cmd_train(&cfg, None, &out, &mut Vec::new()).unwrap();

        let mut stdout = Vec::new();
        let report = cmd_eval(&cfg, &out, &mut stdout).unwrap();
        assert_eq!(report.n, 20);
        let text = String::from_utf8(stdout).unwrap();
        assert_eq!(text.trim_end(), report.summary_line());
        assert_eq!(
            std::fs::read_to_string(out.join("eval.txt")).unwrap(),
            format!("{}\n", report.summary_line())
        );
        let predictions = load_csv(&out.join("predictions.csv")).unwrap();
        assert_eq!(predictions.len(), 20);
        assert_eq!(predictions, report.predictions);

        // Without a checkpoint the command fails as a data error.
        let mut missing = cfg.clone();
        missing.checkpoint_path = dir.path().join("absent.txt");
        let err = cmd_eval(&missing, &out, &mut Vec::new()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn plot_commands_round_trip_saved_state() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let cfg = fast_cfg(dir.path());
        cmd_train(&cfg, None, &out, &mut Vec::new()).unwrap();

        let replot = dir.path().join("replot");
        let artifacts = cmd_plot_loss(&cfg.checkpoint_path, &replot).unwrap();
        assert_eq!(artifacts.len(), 2);
        assert_eq!(
            std::fs::read(out.join("loss.txt")).unwrap(),
            std::fs::read(replot.join("loss.txt")).unwrap()
        );

        let csv = dir.path().join("points.csv");
        cmd_gen_data(&cfg, &csv).unwrap();
        let artifact = cmd_plot_spiral(&csv, &replot).unwrap();
        assert_eq!(artifact.path, replot.join("points.svg"));
        let svg = std::fs::read_to_string(replot.join("points.svg")).unwrap();
        assert_eq!(svg.matches("r=\"0.02\"").count(), 20);
    }

    #[test]
    fn mismatched_checkpoint_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let cfg = fast_cfg(dir.path());
        cmd_train(&cfg, None, &out, &mut Vec::new()).unwrap();

        // Same checkpoint, narrower architecture: parameter count mismatch.
        let mut narrow = cfg.clone();
        narrow.hidden_sizes = vec![2];
        let err = cmd_eval(&narrow, &out, &mut Vec::new()).unwrap_err();
        assert!(matches!(
            err,
            CliError::Train(TrainError::ParamCount { .. })
        ));
        assert_eq!(err.exit_code(), 2);
    }
}
