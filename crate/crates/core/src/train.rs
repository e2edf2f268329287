//! Max-margin training: loss graph construction, the scheduled full-batch
//! gradient-descent loop, checkpoint save/resume, and sign-based evaluation.
//!
//! The loss for a labelled point is `relu(1 - target*score) / batch_size`,
//! wired once as a fixed tail on top of the network's forward graph:
//! `mul(score, target) -> mul(·, -1) -> add(·, 1) -> relu -> mul(·,
//! 1/batch_size)`. Training walks the dataset sequentially (no shuffling),
//! re-evaluating the same graph per sample, accumulating gradients with
//! `backward`, and stepping parameters once per full batch with a linearly
//! decaying learning rate.

use crate::data::{generate_spiral, Dataset, Sample};
use crate::engine::{EngineError, GraphStore, NodeId};
use crate::nn::{new_mlp, ForwardBinding, MlpSpec, NnError};
use crate::rng::Rng;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors from training, checkpointing, and evaluation.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Config(#[from] ConfigIssue),
    #[error("expected a dataset of {expected} samples, got {got}")]
    DatasetSize { expected: usize, got: usize },
    #[error("start epoch {start_epoch} is outside 1..={max} (configured epochs + 1)")]
    StartEpoch { start_epoch: usize, max: usize },
    #[error("checkpoint has {got} parameters, model expects {expected}")]
    ParamCount { expected: usize, got: usize },
    #[error("checkpoint declares {epochs} completed epochs but lists {losses} losses")]
    LossCount { epochs: usize, losses: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    CheckpointFormat {
        path: String,
        line: usize,
        msg: String,
    },
}

/// A configuration problem (caught both by the config parser and before
/// training starts).
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigIssue {
    #[error("{field} must be at least 1")]
    NotPositive { field: &'static str },
    #[error("batch_size {batch} must divide the training set size {dataset}")]
    BatchDivisibility { batch: usize, dataset: usize },
    #[error("{field} must be finite")]
    NotFinite { field: &'static str },
    #[error("hidden layer sizes must all be at least 1")]
    ZeroHiddenSize,
}

/// Everything one experiment run needs, with defaults matching the reference
/// setup: 50 points per class for both splits, 35 epochs, full batches of
/// 100, learning rate decaying linearly from 1.0 by 0.9 over a 100-epoch
/// horizon, two hidden layers of four neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub train_n_per_class: usize,
    pub eval_n_per_class: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_base: f64,
    pub lr_decay: f64,
    pub lr_horizon: usize,
    pub hidden_sizes: Vec<usize>,
    pub checkpoint_path: PathBuf,
    pub resume: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            train_n_per_class: 50,
            eval_n_per_class: 50,
            epochs: 35,
            batch_size: 100,
            lr_base: 1.0,
            lr_decay: 0.9,
            lr_horizon: 100,
            hidden_sizes: vec![4, 4],
            checkpoint_path: PathBuf::from("checkpoint.txt"),
            resume: false,
        }
    }
}

impl ExperimentConfig {
    /// Checks the cross-field constraints: positive counts, finite rates,
    /// and batch size dividing the training set size (full batches only).
    pub fn validate(&self) -> Result<(), ConfigIssue> {
        for (field, value) in [
            ("train_n_per_class", self.train_n_per_class),
            ("eval_n_per_class", self.eval_n_per_class),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("lr_horizon", self.lr_horizon),
        ] {
            if value == 0 {
                return Err(ConfigIssue::NotPositive { field });
            }
        }
        for (field, value) in [("lr_base", self.lr_base), ("lr_decay", self.lr_decay)] {
            if !value.is_finite() {
                return Err(ConfigIssue::NotFinite { field });
            }
        }
        if self.hidden_sizes.contains(&0) {
            return Err(ConfigIssue::ZeroHiddenSize);
        }
        let dataset = 2 * self.train_n_per_class;
        if !dataset.is_multiple_of(self.batch_size) {
            return Err(ConfigIssue::BatchDivisibility {
                batch: self.batch_size,
                dataset,
            });
        }
        Ok(())
    }

    /// Full layer list: hidden sizes plus the single-score output layer.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = self.hidden_sizes.clone();
        sizes.push(1);
        sizes
    }
}

/// Per-epoch total-loss history, epochs consecutive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochLossLog {
    entries: Vec<(usize, f64)>,
}

impl EpochLossLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends one epoch's total loss. Epochs must arrive in order, without
    /// gaps, and hinge totals are never negative.
    pub fn push(&mut self, epoch: usize, total_loss: f64) {
        assert!(epoch >= 1, "epochs are 1-based");
        if let Some(&(last, _)) = self.entries.last() {
            assert_eq!(epoch, last + 1, "epochs must be consecutive");
        }
        assert!(total_loss >= 0.0, "hinge loss totals cannot be negative");
        self.entries.push((epoch, total_loss));
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }
    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
    pub fn losses(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, l)| l).collect()
    }
}

/// The wired hinge-loss graph: reusable input/target leaves, the three
/// constant leaves, and the loss root on top of a network's forward binding.
#[derive(Debug, Clone)]
pub struct LossGraph {
    input_x_id: NodeId,
    input_y_id: NodeId,
    target_id: NodeId,
    multiplier_id: NodeId,
    bias_id: NodeId,
    batch_scale_id: NodeId,
    loss_id: NodeId,
    binding: ForwardBinding,
    tail: Vec<NodeId>,
}

impl LossGraph {
    pub fn input_x_id(&self) -> NodeId {
        self.input_x_id
    }
    pub fn input_y_id(&self) -> NodeId {
        self.input_y_id
    }
    pub fn target_id(&self) -> NodeId {
        self.target_id
    }
    pub fn multiplier_id(&self) -> NodeId {
        self.multiplier_id
    }
    pub fn bias_id(&self) -> NodeId {
        self.bias_id
    }
    pub fn batch_scale_id(&self) -> NodeId {
        self.batch_scale_id
    }
    pub fn loss_id(&self) -> NodeId {
        self.loss_id
    }
    pub fn binding(&self) -> &ForwardBinding {
        &self.binding
    }
    /// The network's score node (the binding's single output).
    pub fn score_id(&self) -> NodeId {
        self.binding.output()
    }

    /// Loads one sample into the input/target leaves and re-evaluates the
    /// whole graph. Returns the loss value.
    pub fn evaluate_sample(
        &self,
        store: &mut GraphStore,
        sample: &Sample,
    ) -> Result<f64, TrainError> {
        store.set_data(self.input_x_id, sample.x)?;
        store.set_data(self.input_y_id, sample.y)?;
        store.set_data(self.target_id, f64::from(sample.label))?;
        self.binding.reevaluate(store)?;
        store.recompute(&self.tail)?;
        Ok(store.data(self.loss_id)?)
    }
}

/// Wires input leaves, the forward graph, and the hinge tail
/// `relu((score*target)*(-1) + 1) * (1/batch_size)` in that operation order.
pub fn build_loss_graph(
    store: &mut GraphStore,
    mlp: &MlpSpec,
    batch_size: usize,
) -> Result<LossGraph, TrainError> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    let input_x_id = store.create_value(0.0, false);
    let input_y_id = store.create_value(0.0, false);
    let target_id = store.create_value(0.0, false);

    let mut binding = None;
    let outputs = mlp.forward(store, &[input_x_id, input_y_id], &mut binding)?;
    let binding = binding.expect("forward fills the binding");
    let score = outputs[0];

    let multiplier_id = store.create_value(-1.0, false);
    let bias_id = store.create_value(1.0, false);
    let batch_scale_id = store.create_value(1.0 / batch_size as f64, false);

    let lossone = store.multiply(score, target_id)?;
    let losstwo = store.multiply(lossone, multiplier_id)?;
    let lossthree = store.add(losstwo, bias_id)?;
    let lossfour = store.relu(lossthree)?;
    let loss_id = store.multiply(lossfour, batch_scale_id)?;

    Ok(LossGraph {
        input_x_id,
        input_y_id,
        target_id,
        multiplier_id,
        bias_id,
        batch_scale_id,
        loss_id,
        binding,
        tail: vec![lossone, losstwo, lossthree, lossfour, loss_id],
    })
}

/// Learning rate for a 1-based epoch:
/// `lr_base - lr_decay*(epoch-1)/lr_horizon`.
pub fn lr_schedule(epoch: usize, cfg: &ExperimentConfig) -> f64 {
    assert!(epoch >= 1, "epochs are 1-based");
    cfg.lr_base - cfg.lr_decay * (epoch - 1) as f64 / cfg.lr_horizon as f64
}

/// Runs epochs `start_epoch..=cfg.epochs` over the dataset in order. Per
/// sample: load, re-evaluate, accumulate the epoch total, backpropagate, and
/// clear non-parameter gradients so parameter gradients keep accumulating;
/// at each full-batch boundary, take one SGD step at the epoch's scheduled
/// rate and clear all gradients. Appends one `(epoch, total_loss)` entry per
/// epoch and returns the extended log. `start_epoch = cfg.epochs + 1` is the
/// already-complete case: no work, log returned unchanged.
pub fn train(
    store: &mut GraphStore,
    loss_graph: &LossGraph,
    dataset: &[Sample],
    cfg: &ExperimentConfig,
    start_epoch: usize,
    mut log: EpochLossLog,
) -> Result<EpochLossLog, TrainError> {
    cfg.validate()?;
    let expected = 2 * cfg.train_n_per_class;
    if dataset.len() != expected {
        return Err(TrainError::DatasetSize {
            expected,
            got: dataset.len(),
        });
    }
    if start_epoch == 0 || start_epoch > cfg.epochs + 1 {
        return Err(TrainError::StartEpoch {
            start_epoch,
            max: cfg.epochs + 1,
        });
    }

    for epoch in start_epoch..=cfg.epochs {
        let lr = lr_schedule(epoch, cfg);
        let mut total_loss = 0.0;
        for (i, sample) in dataset.iter().enumerate() {
            total_loss += loss_graph.evaluate_sample(store, sample)?;
            store.backward(loss_graph.loss_id())?;
            store.zero_nonparam_grads(loss_graph.loss_id())?;
            if (i + 1) % cfg.batch_size == 0 {
                store.step(loss_graph.loss_id(), lr)?;
                store.zero_grads(loss_graph.loss_id())?;
            }
        }
        log.push(epoch, total_loss);
    }
    Ok(log)
}

/// Classification summary over one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub correct: usize,
    /// correct/n rounded half-away-from-zero to 2 decimals.
    pub accuracy: f64,
    /// Input points with the *predicted* label.
    pub predictions: Vec<Sample>,
}

impl EvalReport {
    /// The one-line text form: `n=<N> correct=<C> accuracy=<A>`.
    pub fn summary_line(&self) -> String {
        format!(
            "n={} correct={} accuracy={:?}",
            self.n, self.correct, self.accuracy
        )
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Scores every sample through the bound forward graph. The decision is the
/// score's sign: non-negative maps to label +1 for reporting, but a sample
/// counts as correct only when the sign equals the target exactly — a zero
/// score is always wrong, even though it is *reported* as +1.
pub fn evaluate(
    store: &mut GraphStore,
    binding: &ForwardBinding,
    dataset: &[Sample],
) -> Result<EvalReport, TrainError> {
    assert!(!dataset.is_empty(), "evaluate needs a non-empty dataset");
    let x_id = binding.input_ids()[0];
    let y_id = binding.input_ids()[1];
    let score_id = binding.output();

    let mut correct = 0usize;
    let mut predictions = Vec::with_capacity(dataset.len());
    for sample in dataset {
        store.set_data(x_id, sample.x)?;
        store.set_data(y_id, sample.y)?;
        binding.reevaluate(store)?;
        let s = sign(store.data(score_id)?);
        let predicted = if s >= 0.0 { 1 } else { -1 };
        if s == f64::from(sample.label) {
            correct += 1;
        }
        predictions.push(Sample {
            x: sample.x,
            y: sample.y,
            label: predicted,
        });
    }
    let n = dataset.len();
    let accuracy = (correct as f64 / n as f64 * 100.0).round() / 100.0;
    Ok(EvalReport {
        n,
        correct,
        accuracy,
        predictions,
    })
}

/// Persisted training state: completed epoch count, one loss per epoch, and
/// the flat parameter vector in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epochs_done: usize,
    pub losses: Vec<f64>,
    pub params: Vec<f64>,
}

fn render_floats(vals: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:?}");
    }
    out
}

fn parse_floats(path: &str, line: usize, text: &str) -> Result<Vec<f64>, TrainError> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| TrainError::CheckpointFormat {
                    path: path.to_string(),
                    line,
                    msg: format!("bad number {tok:?}"),
                })
        })
        .collect()
}

/// Writes the three-line text form:
/// `epochs=<int>` / `losses=<comma-separated>` / `params=<comma-separated>`,
/// each line newline-terminated, numbers rendered with enough digits to
/// round-trip exactly.
pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), TrainError> {
    if checkpoint.losses.len() != checkpoint.epochs_done {
        return Err(TrainError::LossCount {
            epochs: checkpoint.epochs_done,
            losses: checkpoint.losses.len(),
        });
    }
    let text = format!(
        "epochs={}\nlosses={}\nparams={}\n",
        checkpoint.epochs_done,
        render_floats(&checkpoint.losses),
        render_floats(&checkpoint.params),
    );
    std::fs::write(path, text).map_err(|source| TrainError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a file written by [`save_checkpoint`], with line-numbered
/// diagnostics for missing keys, malformed numbers, and a loss list whose
/// length disagrees with the declared epoch count.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, TrainError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| TrainError::Io {
        path: name.clone(),
        source,
    })?;
    let lines: Vec<&str> = text.lines().collect();

    let field = |idx: usize, key: &str| -> Result<String, TrainError> {
        let raw = lines.get(idx).ok_or_else(|| TrainError::CheckpointFormat {
            path: name.clone(),
            line: idx + 1,
            msg: format!("missing `{key}=` line"),
        })?;
        raw.strip_prefix(&format!("{key}="))
            .map(str::to_string)
            .ok_or_else(|| TrainError::CheckpointFormat {
                path: name.clone(),
                line: idx + 1,
                msg: format!("expected `{key}=...`, got {raw:?}"),
            })
    };

    let epochs_text = field(0, "epochs")?;
    let epochs_done: usize =
        epochs_text
            .trim()
            .parse()
            .map_err(|_| TrainError::CheckpointFormat {
                path: name.clone(),
                line: 1,
                msg: format!("bad epoch count {epochs_text:?}"),
            })?;
    let losses = parse_floats(&name, 2, &field(1, "losses")?)?;
    let params = parse_floats(&name, 3, &field(2, "params")?)?;
    if let Some(extra) = lines.get(3).filter(|l| !l.trim().is_empty()) {
        return Err(TrainError::CheckpointFormat {
            path: name,
            line: 4,
            msg: format!("unexpected trailing content {extra:?}"),
        });
    }
    if losses.len() != epochs_done {
        return Err(TrainError::LossCount {
            epochs: epochs_done,
            losses: losses.len(),
        });
    }
    Ok(Checkpoint {
        epochs_done,
        losses,
        params,
    })
}

/// Overwrites the model's parameters and the loss log from a checkpoint.
/// Returns the next epoch to run (`epochs_done + 1`).
pub fn apply_checkpoint(
    store: &mut GraphStore,
    mlp: &MlpSpec,
    log: &mut EpochLossLog,
    checkpoint: &Checkpoint,
) -> Result<usize, TrainError> {
    let ids = mlp.get_parameters();
    if checkpoint.params.len() != ids.len() {
        return Err(TrainError::ParamCount {
            expected: ids.len(),
            got: checkpoint.params.len(),
        });
    }
    if checkpoint.losses.len() != checkpoint.epochs_done {
        return Err(TrainError::LossCount {
            epochs: checkpoint.epochs_done,
            losses: checkpoint.losses.len(),
        });
    }
    for (&id, &v) in ids.iter().zip(&checkpoint.params) {
        store.set_data(id, v)?;
    }
    *log = EpochLossLog::new();
    for (i, &l) in checkpoint.losses.iter().enumerate() {
        log.push(i + 1, l);
    }
    Ok(checkpoint.epochs_done + 1)
}

/// One experiment's working state: store, network, loss graph, training
/// data, and loss history — everything the commands and tests drive.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub store: GraphStore,
    pub mlp: MlpSpec,
    pub loss_graph: LossGraph,
    pub train_data: Dataset,
    pub log: EpochLossLog,
}

impl Experiment {
    /// Builds the store, draws the network init, then draws (or adopts) the
    /// training set, then wires the loss graph. The parameter draw always
    /// happens first so the generator stream, and therefore a generated
    /// dataset, is the same whether or not the parameters are later
    /// overwritten by a checkpoint.
    pub fn setup(cfg: &ExperimentConfig, data: Option<Dataset>) -> Result<Experiment, TrainError> {
        cfg.validate()?;
        let mut store = GraphStore::new();
        let mut rng = Rng::new(cfg.seed);
        let mlp = new_mlp(&mut store, 2, &cfg.layer_sizes(), &mut rng)?;
        let train_data = match data {
            Some(d) => d,
            None => generate_spiral(&mut rng, cfg.train_n_per_class),
        };
        let loss_graph = build_loss_graph(&mut store, &mlp, cfg.batch_size)?;
        Ok(Experiment {
            store,
            mlp,
            loss_graph,
            train_data,
            log: EpochLossLog::new(),
        })
    }

    /// The held-out dataset, drawn from its own stream at `seed + 1`.
    pub fn eval_dataset(cfg: &ExperimentConfig) -> Dataset {
        generate_spiral(
            &mut Rng::new(cfg.seed.wrapping_add(1)),
            cfg.eval_n_per_class,
        )
    }

    /// Trains epochs `start_epoch..=cfg.epochs`, extending the log.
    pub fn train_to(
        &mut self,
        cfg: &ExperimentConfig,
        start_epoch: usize,
    ) -> Result<(), TrainError> {
        let log = std::mem::take(&mut self.log);
        self.log = train(
            &mut self.store,
            &self.loss_graph,
            &self.train_data,
            cfg,
            start_epoch,
            log,
        )?;
        Ok(())
    }

    /// Loads a checkpoint into the model and log; returns the next epoch.
    pub fn resume_from(&mut self, checkpoint: &Checkpoint) -> Result<usize, TrainError> {
        apply_checkpoint(&mut self.store, &self.mlp, &mut self.log, checkpoint)
    }

    /// Snapshot of the current state in canonical parameter order.
    pub fn checkpoint(&self) -> Checkpoint {
        let params = self
            .mlp
            .get_parameters()
            .iter()
            .map(|&id| self.store.data(id).expect("parameter ids are valid"))
            .collect();
        Checkpoint {
            epochs_done: self.log.len(),
            losses: self.log.losses(),
            params,
        }
    }

    /// Runs the sign-based classifier over a dataset.
    pub fn evaluate_on(&mut self, dataset: &[Sample]) -> Result<EvalReport, TrainError> {
        evaluate(&mut self.store, self.loss_graph.binding(), dataset)
    }
}
