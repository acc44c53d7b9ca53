use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{batch_loss, LossKind};
use super::network::{Gradients, Mode, Network};
use super::optim::{Optimizer, OptimizerKind};
use crate::cc::CcConfig;
use crate::error::{Error, Result};
use crate::simplex::{smooth_labels, OneHotLabel, PositiveComposition, SimplexPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LabelMode {
    Hard,
    /// `(1 - ε) e_y + ε/K`.
    Smoothed { epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    pub label_mode: LabelMode,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// L2 penalty `wd/2 ‖W‖²` on the head weights only.
    pub weight_decay: f64,
    pub dropout_on: bool,
    pub batchnorm_on: bool,
    pub optimizer: OptimizerKind,
    #[serde(skip)]
    pub cc: CcConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss_kind: LossKind::CrossEntropy,
            label_mode: LabelMode::Hard,
            learning_rate: 1e-3,
            batch_size: 128,
            epochs: 100,
            seed: 0,
            weight_decay: 0.0,
            dropout_on: false,
            batchnorm_on: false,
            optimizer: OptimizerKind::Adam,
            cc: CcConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if let LabelMode::Smoothed { epsilon } = self.label_mode {
            if !(0.0..=1.0).contains(&epsilon) {
                return Err(Error::InvalidParameter(format!(
                    "epsilon must lie in [0, 1], got {epsilon}"
                )));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        Ok(())
    }

    /// Training targets for class labels under this label mode.
    pub fn targets(&self, labels: &[usize], k: usize) -> Result<Vec<SimplexPoint>> {
        labels
            .iter()
            .map(|&c| {
                let hard = OneHotLabel::new(c, k)?;
                match self.label_mode {
                    LabelMode::Hard => Ok(hard.to_simplex()),
                    LabelMode::Smoothed { epsilon } => smooth_labels(hard, epsilon, None),
                }
            })
            .collect()
    }
}

/// Labelled examples with features as rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&c| c >= num_classes) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    /// Data loss plus the weight-decay penalty.
    pub loss: f64,
    pub data_loss: f64,
    pub penalty: f64,
    pub mean_neg_log_c: f64,
    pub grads: Gradients,
    pub zeroed: usize,
    pub sample_losses: Vec<f64>,
    pub sample_zeroed: Vec<bool>,
    pub outputs: Vec<PositiveComposition>,
}

/// Batch-mean loss and parameter gradients, including the weight-decay term.
pub fn loss_and_grad<R: Rng + ?Sized>(
    net: &mut Network,
    batch: &Array2<f64>,
    targets: &[SimplexPoint],
    config: &TrainConfig,
    mode: Mode,
    rng: &mut R,
) -> Result<LossAndGrad> {
    let (outputs, cache) = net.forward(batch, mode, rng)?;
    let bl = batch_loss(config.loss_kind, &config.cc, &outputs, targets)?;
    let mut grads = net.backward(&cache, &bl.grad_logits);
    let penalty = add_weight_decay(net, &mut grads, config.weight_decay);
    Ok(LossAndGrad {
        loss: bl.mean + penalty,
        data_loss: bl.mean,
        penalty,
        mean_neg_log_c: bl.mean_neg_log_c,
        grads,
        zeroed: bl.zeroed,
        sample_losses: bl.sample_losses,
        sample_zeroed: bl.sample_zeroed,
        outputs,
    })
}

fn add_weight_decay(net: &Network, grads: &mut Gradients, wd: f64) -> f64 {
    if wd == 0.0 {
        return 0.0;
    }
    let (w, _) = net.head();
    let idx = net.head_weight_index();
    for (g, v) in grads.0[idx].iter_mut().zip(w.iter()) {
        *g += wd * v;
    }
    0.5 * wd * w.iter().map(|v| v * v).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Mean training objective (data loss plus penalty) in eval mode.
    pub loss: f64,
    pub accuracy: f64,
}

/// Eval-mode objective and accuracy on a whole dataset.
pub fn evaluate(net: &Network, data: &Dataset, config: &TrainConfig) -> Result<Evaluation> {
    let outputs = net.predict(&data.features)?;
    let targets = config.targets(&data.labels, data.num_classes)?;
    let bl = batch_loss(config.loss_kind, &config.cc, &outputs, &targets)?;
    let (w, _) = net.head();
    let penalty = 0.5 * config.weight_decay * w.iter().map(|v| v * v).sum::<f64>();
    Ok(Evaluation {
        loss: bl.mean + penalty,
        accuracy: accuracy(&outputs, &data.labels),
    })
}

/// Fraction of outputs whose argmax is the true class.
pub fn accuracy(outputs: &[PositiveComposition], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = outputs
        .iter()
        .zip(labels)
        .filter(|(o, &c)| o.argmax() == c)
        .count();
    hits as f64 / labels.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: Network,
    /// Eval-mode objective on the training set before the first step.
    pub initial_train_loss: f64,
    pub metrics: Vec<EpochMetrics>,
}

/// Minibatch training. Shuffling and dropout draw from one generator seeded
/// by `config.seed`, so runs are reproducible bit for bit.
pub fn train(mut net: Network, split: &Split, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let k = net.output_dim();
    if split.train.num_classes != k || split.test.num_classes != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: split.train.num_classes,
        });
    }
    if split.train.is_empty() {
        return Err(Error::Shape("empty training set".into()));
    }
    let initial_train_loss = evaluate(&net, &split.train, config)?.loss;
    let mut metrics = Vec::with_capacity(config.epochs);
    if config.epochs == 0 {
        return Ok(TrainOutcome {
            net,
            initial_train_loss,
            metrics,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, &net);
    let targets = config.targets(&split.train.labels, k)?;
    let mut order: Vec<usize> = (0..split.train.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut zeroed = 0usize;
        let mut seen = 0usize;
        for (b, rows) in order.chunks(config.batch_size).enumerate() {
            let x = split.train.features.select(Axis(0), rows);
            let y: Vec<SimplexPoint> = rows.iter().map(|&i| targets[i].clone()).collect();
            let step = loss_and_grad(&mut net, &x, &y, config, Mode::Train, &mut rng);
            let lg = match step {
                Ok(lg) if lg.loss.is_finite() => lg,
                Ok(lg) => {
                    return Err(non_finite(epoch, b, &format!("loss {}", lg.loss), zeroed, seen))
                }
                Err(e) => return Err(non_finite(epoch, b, &e.to_string(), zeroed, seen)),
            };
            zeroed += lg.zeroed;
            seen += rows.len();
            optimizer.step(&mut net, &lg.grads);
        }
        let train_eval = evaluate(&net, &split.train, config)
            .map_err(|e| non_finite(epoch, usize::MAX, &e.to_string(), zeroed, seen))?;
        if !train_eval.loss.is_finite() {
            return Err(non_finite(epoch, usize::MAX, "evaluation loss", zeroed, seen));
        }
        let test_acc = accuracy(&net.predict(&split.test.features)?, &split.test.labels);
        log::debug!(
            "epoch {epoch}: loss {:.6} train acc {:.4} test acc {test_acc:.4}",
            train_eval.loss,
            train_eval.accuracy
        );
        metrics.push(EpochMetrics {
            epoch,
            train_loss: train_eval.loss,
            train_acc: train_eval.accuracy,
            test_acc,
        });
    }
    Ok(TrainOutcome {
        net,
        initial_train_loss,
        metrics,
    })
}

fn non_finite(epoch: usize, batch: usize, cause: &str, zeroed: usize, seen: usize) -> Error {
    let at = if batch == usize::MAX {
        "end-of-epoch evaluation".to_string()
    } else {
        format!("batch {batch}")
    };
    Error::NonFiniteLoss {
        epoch,
        snapshot: format!("{at}: {cause}; zeroed-gradient samples so far {zeroed}/{seen}"),
    }
}
