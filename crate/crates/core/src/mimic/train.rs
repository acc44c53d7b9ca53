use std::sync::mpsc::sync_channel;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::expert::{argmax_set, greedy_action, ExpertPolicy};
use super::game::TabularGame;
use super::guidance::{check_games, sample_index, FeatureMap, GuidanceSample, GuidanceStream};
use crate::cc::CcConfig;
use crate::error::{Error, Result};
use crate::minitrain::{
    batch_loss_value, loss_and_grad, LossKind, Mode, Network, NetworkSpec, Optimizer, OptimizerKind,
    TrainConfig,
};
use crate::numeric::{derive_seed, mean_sd};
use crate::simplex::{PositiveComposition, SimplexPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MimicLoss {
    /// Cross-entropy to the guidance vectors.
    Amn,
    /// Cross-entropy plus `-log C` of the network output.
    CcAmn,
}

impl MimicLoss {
    pub fn loss_kind(self) -> LossKind {
        match self {
            MimicLoss::Amn => LossKind::CrossEntropy,
            MimicLoss::CcAmn => LossKind::ContinuousCategorical,
        }
    }
}

/// Batch-mean mimic loss.
pub fn mimic_loss(
    outputs: &[PositiveComposition],
    guidance: &[SimplexPoint],
    kind: MimicLoss,
    cc: &CcConfig,
) -> Result<f64> {
    batch_loss_value(kind.loss_kind(), cc, outputs, guidance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "game")]
pub enum MimicMode {
    MultiTask,
    /// Train on one game only, by index into the game list.
    SingleTask(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MimicConfig {
    pub loss: MimicLoss,
    pub epochs: usize,
    /// Gradient steps per epoch; each step draws one fresh batch per game.
    pub steps_per_epoch: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub hidden: usize,
    pub epsilon_behavior: f64,
    pub horizon: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    /// Generate guidance on a separate thread through a bounded buffer.
    pub pipelined: bool,
    #[serde(skip)]
    pub cc: CcConfig,
}

impl Default for MimicConfig {
    fn default() -> Self {
        Self {
            loss: MimicLoss::Amn,
            epochs: 200,
            steps_per_epoch: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            hidden: 32,
            epsilon_behavior: 0.1,
            horizon: super::guidance::DEFAULT_HORIZON,
            eval_episodes: 20,
            seed: 0,
            pipelined: false,
            cc: CcConfig::default(),
        }
    }
}

/// One CSV row: a game's statistics for one epoch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MimicMetrics {
    pub epoch: usize,
    pub mode: String,
    pub game_id: usize,
    /// Mean pre-update batch loss over the epoch's samples from this game.
    pub loss: f64,
    pub eval_return_mean: f64,
    pub eval_return_sd: f64,
    /// Mean `KL(expert ‖ mimic)` over the epoch's visited states, after the epoch.
    pub kl_to_expert: f64,
    pub zeroed_grad_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct MimicOutcome {
    pub net: Network,
    pub features: FeatureMap,
    /// Indices (into the input game list) that were trained on.
    pub active_games: Vec<usize>,
    pub metrics: Vec<MimicMetrics>,
    /// Loss on each epoch's samples before and after that epoch's updates.
    pub epoch_loss_change: Vec<(f64, f64)>,
}

impl MimicOutcome {
    /// Action probabilities of the mimic for every state of an active game.
    pub fn policy_table(&self, game_index_in_active: usize) -> Result<Array2<f64>> {
        policy_table(&self.net, &self.features, game_index_in_active)
    }
}

pub fn policy_table(net: &Network, features: &FeatureMap, game_index: usize) -> Result<Array2<f64>> {
    let x = Array2::from_shape_fn((features.n_states, features.dim()), |(s, j)| {
        features.encode(s, game_index)[j]
    });
    let outputs = net.predict(&x)?;
    let k = net.output_dim();
    Ok(Array2::from_shape_fn((features.n_states, k), |(s, a)| outputs[s].values()[a]))
}

/// Dense(hidden) → relu → dense(A) → softmax.
pub fn mimic_network(features: &FeatureMap, n_actions: usize, hidden: usize, seed: u64) -> Result<Network> {
    NetworkSpec::new(features.dim(), n_actions)
        .dense(hidden)
        .relu()
        .build(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn to_batch(samples: &[GuidanceSample]) -> (Array2<f64>, Vec<SimplexPoint>) {
    let d = samples[0].state_features.len();
    let x = Array2::from_shape_fn((samples.len(), d), |(i, j)| samples[i].state_features[j]);
    (x, samples.iter().map(|s| s.guidance.clone()).collect())
}

/// Trains a fresh mimic network by alternating guidance generation with
/// gradient steps. Single-task mode trains on the selected game alone, as if
/// it were the only game given.
pub fn train_mimic(
    games: &[TabularGame],
    experts: &[ExpertPolicy],
    config: &MimicConfig,
    mode: MimicMode,
) -> Result<MimicOutcome> {
    check_games(games, experts)?;
    let active_games: Vec<usize> = match mode {
        MimicMode::MultiTask => (0..games.len()).collect(),
        MimicMode::SingleTask(i) if i < games.len() => vec![i],
        MimicMode::SingleTask(i) => {
            return Err(Error::InvalidParameter(format!(
                "game index {i} out of range for {} games",
                games.len()
            )))
        }
    };
    if config.batch_size == 0 || config.steps_per_epoch == 0 {
        return Err(Error::InvalidParameter(
            "batch size and steps per epoch must be >= 1".into(),
        ));
    }
    let act_games: Vec<&TabularGame> = active_games.iter().map(|&i| &games[i]).collect();
    let act_experts: Vec<&ExpertPolicy> = active_games.iter().map(|&i| &experts[i]).collect();
    let features = FeatureMap {
        n_states: games[0].n_states(),
        n_games: act_games.len(),
    };
    let n_actions = games[0].n_actions();
    let mut net = mimic_network(&features, n_actions, config.hidden, derive_seed(config.seed, &[0]))?;
    let mode_name = match mode {
        MimicMode::MultiTask => "multi-task",
        MimicMode::SingleTask(_) => "single-task",
    };
    let mut outcome = MimicOutcome {
        net: net.clone(),
        features,
        active_games: active_games.clone(),
        metrics: Vec::new(),
        epoch_loss_change: Vec::new(),
    };
    if config.epochs == 0 {
        return Ok(outcome);
    }

    let mut streams = act_games
        .iter()
        .enumerate()
        .map(|(i, g)| {
            GuidanceStream::new(
                g,
                config.epsilon_behavior,
                config.horizon,
                derive_seed(config.seed, &[1, i as u64]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let train_config = TrainConfig {
        loss_kind: config.loss.loss_kind(),
        learning_rate: config.learning_rate,
        optimizer: config.optimizer,
        batch_size: config.batch_size,
        cc: config.cc.clone(),
        ..TrainConfig::default()
    };
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, &net);
    let total_steps = config.epochs * config.steps_per_epoch;

    // one produced item = one step's batch for every active game
    let produce = |streams: &mut Vec<GuidanceStream>| -> Vec<Vec<GuidanceSample>> {
        streams
            .iter_mut()
            .enumerate()
            .map(|(i, st)| st.next_samples(act_games[i], act_experts[i], &features, i, config.batch_size))
            .collect()
    };

    let mut consume = |step_batches: Vec<Vec<GuidanceSample>>,
                       step: usize,
                       epoch_state: &mut EpochState|
     -> Result<()> {
        let epoch = step / config.steps_per_epoch + 1;
        if step.is_multiple_of(config.steps_per_epoch) {
            epoch_state.reset(&net, act_games.len());
        }
        let all: Vec<GuidanceSample> = step_batches.iter().flatten().cloned().collect();
        let (x, y) = to_batch(&all);
        let mut no_dropout = ChaCha8Rng::seed_from_u64(0);
        let lg = loss_and_grad(&mut net, &x, &y, &train_config, Mode::Train, &mut no_dropout)
            .map_err(|e| epoch_state.abort(epoch, &e.to_string()))?;
        if !lg.loss.is_finite() {
            return Err(epoch_state.abort(epoch, &format!("loss {}", lg.loss)));
        }
        let mut offset = 0;
        for (gi, b) in step_batches.iter().enumerate() {
            let range = offset..offset + b.len();
            epoch_state.loss_sum[gi] += lg.sample_losses[range.clone()].iter().sum::<f64>();
            epoch_state.zeroed[gi] += lg.sample_zeroed[range].iter().filter(|z| **z).count();
            epoch_state.seen[gi] += b.len();
            offset += b.len();
        }
        epoch_state.samples.extend(all);
        optimizer.step(&mut net, &lg.grads);

        if (step + 1).is_multiple_of(config.steps_per_epoch) {
            let rows = epoch_state.finish(
                epoch,
                mode_name,
                &net,
                &act_games,
                &act_experts,
                &features,
                config,
            )?;
            outcome.metrics.extend(rows.0);
            outcome.epoch_loss_change.push(rows.1);
        }
        Ok(())
    };

    let mut epoch_state = EpochState::default();
    if config.pipelined {
        std::thread::scope(|scope| -> Result<()> {
            let (tx, rx) = sync_channel::<Vec<Vec<GuidanceSample>>>(4);
            let mut producer_streams = streams.clone();
            let producer = scope.spawn(move || {
                for _ in 0..total_steps {
                    if tx.send(produce(&mut producer_streams)).is_err() {
                        break;
                    }
                }
            });
            let mut result = Ok(());
            for (step, batches) in rx.iter().enumerate() {
                if let Err(e) = consume(batches, step, &mut epoch_state) {
                    result = Err(e);
                    break;
                }
            }
            drop(rx);
            producer.join().expect("guidance producer panicked");
            result
        })?;
    } else {
        for step in 0..total_steps {
            let batches = produce(&mut streams);
            consume(batches, step, &mut epoch_state)?;
        }
    }
    outcome.net = net;
    Ok(outcome)
}

#[derive(Default)]
struct EpochState {
    start_net: Option<Network>,
    samples: Vec<GuidanceSample>,
    loss_sum: Vec<f64>,
    zeroed: Vec<usize>,
    seen: Vec<usize>,
}

impl EpochState {
    fn reset(&mut self, net: &Network, n_games: usize) {
        self.start_net = Some(net.clone());
        self.samples.clear();
        self.loss_sum = vec![0.0; n_games];
        self.zeroed = vec![0; n_games];
        self.seen = vec![0; n_games];
    }

    fn abort(&self, epoch: usize, cause: &str) -> Error {
        let zeroed: usize = self.zeroed.iter().sum();
        let seen: usize = self.seen.iter().sum();
        let frac = if seen == 0 { 0.0 } else { zeroed as f64 / seen as f64 };
        Error::NonFiniteLoss {
            epoch,
            snapshot: format!("{cause}; zeroed-gradient fraction this epoch {frac:.4} ({zeroed}/{seen})"),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &mut self,
        epoch: usize,
        mode_name: &str,
        net: &Network,
        games: &[&TabularGame],
        experts: &[&ExpertPolicy],
        features: &FeatureMap,
        config: &MimicConfig,
    ) -> Result<(Vec<MimicMetrics>, (f64, f64))> {
        let (x, y) = to_batch(&self.samples);
        let kind = config.loss.loss_kind();
        let start_net = self.start_net.take().expect("epoch started");
        let before = batch_loss_value(kind, &config.cc, &start_net.predict(&x)?, &y)?;
        let after = batch_loss_value(kind, &config.cc, &net.predict(&x)?, &y)?;

        let mut rows = Vec::with_capacity(games.len());
        for (gi, (game, expert)) in games.iter().zip(experts).enumerate() {
            let table = policy_table(net, features, gi)?;
            let visited: Vec<usize> = self
                .samples
                .iter()
                .filter(|s| s.game_id == game.id)
                .map(|s| s.state)
                .collect();
            let kl = visited
                .iter()
                .map(|&s| kl_divergence(expert.policy.row(s).as_slice().unwrap(), table.row(s).as_slice().unwrap()))
                .sum::<f64>()
                / visited.len().max(1) as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[2, epoch as u64, game.id as u64]));
            let (eval_return_mean, eval_return_sd) = evaluate_policy(
                &table,
                game,
                config.eval_episodes.max(1),
                config.horizon,
                &EvalOptions::default(),
                &mut rng,
            );
            rows.push(MimicMetrics {
                epoch,
                mode: mode_name.to_string(),
                game_id: game.id,
                loss: self.loss_sum[gi] / self.seen[gi].max(1) as f64,
                eval_return_mean,
                eval_return_sd,
                kl_to_expert: kl,
                zeroed_grad_fraction: self.zeroed[gi] as f64 / self.seen[gi].max(1) as f64,
            });
        }
        Ok((rows, (before, after)))
    }
}

fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a.ln() - b.ln()))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ActionSelection {
    /// Most probable action, lowest index on ties.
    #[default]
    Greedy,
    /// Draw from the action distribution.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalOptions {
    pub selection: ActionSelection,
    /// Discount applied to rewards; `None` gives the undiscounted score.
    pub discount: Option<f64>,
}

/// Mean and standard deviation of episode returns from the start state.
pub fn evaluate_policy<R: Rng + ?Sized>(
    policy: &Array2<f64>,
    game: &TabularGame,
    episodes: usize,
    horizon: usize,
    options: &EvalOptions,
    rng: &mut R,
) -> (f64, f64) {
    assert!(horizon >= 1, "horizon must be >= 1");
    let returns: Vec<f64> = (0..episodes)
        .map(|_| {
            let mut s = game.start_state;
            let mut total = 0.0;
            let mut weight = 1.0;
            for _ in 0..horizon {
                if game.is_terminal(s) {
                    break;
                }
                let row = policy.index_axis(Axis(0), s);
                let row = row.as_slice().expect("contiguous rows");
                let a = match options.selection {
                    ActionSelection::Greedy => greedy_action(row),
                    ActionSelection::Sample => sample_index(row, rng),
                };
                let (next, r) = game.step(s, a, rng);
                total += weight * r;
                if let Some(g) = options.discount {
                    weight *= g;
                }
                s = next;
            }
            total
        })
        .collect();
    let (mean, sd) = mean_sd(&returns);
    (mean, if sd.is_nan() { 0.0 } else { sd })
}

/// Fraction of non-terminal states where the mimic's greedy action is one of
/// the expert's greedy actions.
pub fn greedy_agreement(mimic: &Array2<f64>, expert: &ExpertPolicy, game: &TabularGame) -> f64 {
    let states: Vec<usize> = game.non_terminal_states().collect();
    let hits = states
        .iter()
        .filter(|&&s| {
            let best = greedy_action(mimic.row(s).as_slice().expect("contiguous"));
            argmax_set(expert.policy.row(s).as_slice().expect("contiguous")).contains(&best)
        })
        .count();
    hits as f64 / states.len().max(1) as f64
}
