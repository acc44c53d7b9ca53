use std::path::Path;

use anyhow::{Context, Result};
use clap::Args;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use contcat::mimic::{
    default_games, evaluate_policy, expert_policy, greedy_agreement, train_mimic, value_iteration,
    ActionSelection, EvalOptions, ExpertPolicy, MimicConfig, MimicLoss, MimicMode, TabularGame,
};
use contcat::numeric::derive_seed;

use crate::config::{init_threads, out_dir, resolve, usage, write_csv, write_manifest};
use crate::Common;

fn experts(games: &[TabularGame], temperature: f64) -> Result<Vec<ExpertPolicy>> {
    games
        .iter()
        .map(|g| Ok(expert_policy(&value_iteration(g)?, temperature)?))
        .collect()
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// multi-task or single-task.
    #[arg(long)]
    mode: Option<String>,
    /// Game index for single-task mode.
    #[arg(long)]
    game: Option<usize>,
    /// amn or cc-amn.
    #[arg(long)]
    loss: Option<String>,
    /// Expert softmax temperature.
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    steps_per_epoch: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Probability of a uniform action in the behaviour policy.
    #[arg(long)]
    epsilon_behavior: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Evaluation episodes per game and epoch.
    #[arg(long)]
    eval_episodes: Option<usize>,
    /// Generate guidance on a separate thread.
    #[arg(long)]
    pipelined: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSettings {
    seed: u64,
    output_dir: String,
    threads: usize,
    mode: String,
    game: Option<usize>,
    loss: String,
    temperature: f64,
    epochs: usize,
    steps_per_epoch: usize,
    batch_size: usize,
    learning_rate: f64,
    hidden: usize,
    epsilon_behavior: f64,
    horizon: usize,
    eval_episodes: usize,
    pipelined: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let m = MimicConfig::default();
        Self {
            seed: m.seed,
            output_dir: "out/mimic-train".into(),
            threads: 0,
            mode: "multi-task".into(),
            game: None,
            loss: "amn".into(),
            temperature: 1.0,
            epochs: m.epochs,
            steps_per_epoch: m.steps_per_epoch,
            batch_size: m.batch_size,
            learning_rate: m.learning_rate,
            hidden: m.hidden,
            epsilon_behavior: m.epsilon_behavior,
            horizon: m.horizon,
            eval_episodes: m.eval_episodes,
            pipelined: m.pipelined,
        }
    }
}

/// One entry of a stored mimic policy.
#[derive(Debug, Serialize, Deserialize)]
struct PolicyEntry {
    game_id: usize,
    state: usize,
    action: usize,
    probability: f64,
}

pub fn mimic_train(args: &TrainArgs) -> Result<()> {
    let s: TrainSettings = resolve(args.common.config.as_deref(), args)?;
    init_threads(s.threads)?;
    let mode = match (s.mode.as_str(), s.game) {
        ("multi-task", None) => MimicMode::MultiTask,
        ("multi-task", Some(_)) => return Err(usage("--game only applies to single-task mode")),
        ("single-task", Some(g)) => MimicMode::SingleTask(g),
        ("single-task", None) => return Err(usage("single-task mode needs --game")),
        (other, _) => return Err(usage(format!("unknown mode `{other}`"))),
    };
    let loss = match s.loss.as_str() {
        "amn" => MimicLoss::Amn,
        "cc-amn" => MimicLoss::CcAmn,
        other => return Err(usage(format!("unknown loss `{other}`; use amn or cc-amn"))),
    };
    if s.pipelined {
        log::warn!("pipelined guidance generation is not covered by the reproducibility guarantee");
    }
    let games = default_games();
    let experts = experts(&games, s.temperature)?;
    let config = MimicConfig {
        loss,
        epochs: s.epochs,
        steps_per_epoch: s.steps_per_epoch,
        batch_size: s.batch_size,
        learning_rate: s.learning_rate,
        hidden: s.hidden,
        epsilon_behavior: s.epsilon_behavior,
        horizon: s.horizon,
        eval_episodes: s.eval_episodes,
        seed: s.seed,
        pipelined: s.pipelined,
        ..MimicConfig::default()
    };
    let outcome = train_mimic(&games, &experts, &config, mode)?;

    let mut policy = Vec::new();
    for (slot, &gi) in outcome.active_games.iter().enumerate() {
        let table = outcome.policy_table(slot)?;
        for ((state, action), p) in table.indexed_iter() {
            policy.push(PolicyEntry {
                game_id: games[gi].id,
                state,
                action,
                probability: *p,
            });
        }
        println!(
            "game {}: greedy agreement with expert {:.3}",
            games[gi].id,
            greedy_agreement(&table, &experts[gi], &games[gi])
        );
    }
    let dir = out_dir(&s.output_dir);
    write_manifest(&dir, "mimic-train", s.seed, &s)?;
    write_csv(&dir.join("metrics.csv"), &outcome.metrics)?;
    write_csv(&dir.join("policy.csv"), &policy)?;
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// policy.csv written by mimic-train.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// greedy or sample.
    #[arg(long)]
    selection: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalSettings {
    seed: u64,
    output_dir: String,
    threads: usize,
    policy: Option<String>,
    temperature: f64,
    episodes: usize,
    horizon: usize,
    selection: String,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: "out/mimic-eval".into(),
            threads: 0,
            policy: None,
            temperature: 1.0,
            episodes: 100,
            horizon: contcat::mimic::DEFAULT_HORIZON,
            selection: "greedy".into(),
        }
    }
}

#[derive(Debug, Serialize)]
struct EvalRow {
    game_id: usize,
    policy: &'static str,
    return_mean: f64,
    return_sd: f64,
    greedy_agreement: f64,
}

fn read_policy(path: &Path, games: &[TabularGame]) -> Result<Vec<Option<Array2<f64>>>> {
    let mut tables: Vec<Option<Array2<f64>>> = vec![None; games.len()];
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    for entry in reader.deserialize::<PolicyEntry>() {
        let e = entry.map_err(|err| usage(format!("{}: {err}", path.display())))?;
        let gi = games
            .iter()
            .position(|g| g.id == e.game_id)
            .ok_or_else(|| usage(format!("{}: unknown game {}", path.display(), e.game_id)))?;
        let (n_s, n_a) = (games[gi].n_states(), games[gi].n_actions());
        if e.state >= n_s || e.action >= n_a {
            return Err(usage(format!(
                "{}: entry ({}, {}) is outside the {n_s}×{n_a} table",
                path.display(),
                e.state,
                e.action
            )));
        }
        tables[gi].get_or_insert_with(|| Array2::zeros((n_s, n_a)))[[e.state, e.action]] = e.probability;
    }
    Ok(tables)
}

pub fn mimic_eval(args: &EvalArgs) -> Result<()> {
    let s: EvalSettings = resolve(args.common.config.as_deref(), args)?;
    init_threads(s.threads)?;
    if s.horizon == 0 || s.episodes == 0 {
        return Err(usage("episodes and horizon must be >= 1"));
    }
    let selection = match s.selection.as_str() {
        "greedy" => ActionSelection::Greedy,
        "sample" => ActionSelection::Sample,
        other => return Err(usage(format!("unknown selection `{other}`"))),
    };
    let games = default_games();
    let experts = experts(&games, s.temperature)?;
    let mimics = match &s.policy {
        Some(p) => read_policy(Path::new(p), &games)?,
        None => vec![None; games.len()],
    };
    let mut rows = Vec::new();
    for (gi, game) in games.iter().enumerate() {
        let uniform = Array2::from_elem((game.n_states(), game.n_actions()), 1.0 / game.n_actions() as f64);
        let mut candidates: Vec<(&'static str, &Array2<f64>, ActionSelection)> = vec![
            ("expert", &experts[gi].policy, selection),
            ("uniform", &uniform, ActionSelection::Sample),
        ];
        if let Some(table) = &mimics[gi] {
            candidates.push(("mimic", table, selection));
        }
        for (slot, (name, table, sel)) in candidates.into_iter().enumerate() {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(s.seed, &[game.id as u64, slot as u64]));
            let options = EvalOptions {
                selection: sel,
                discount: None,
            };
            let (mean, sd) = evaluate_policy(table, game, s.episodes, s.horizon, &options, &mut rng);
            rows.push(EvalRow {
                game_id: game.id,
                policy: name,
                return_mean: mean,
                return_sd: sd,
                greedy_agreement: greedy_agreement(table, &experts[gi], game),
            });
            println!("game {} {name:<8} return {mean:.4} ± {sd:.4}", game.id);
        }
    }
    let dir = out_dir(&s.output_dir);
    write_manifest(&dir, "mimic-eval", s.seed, &s)?;
    write_csv(&dir.join("evaluation.csv"), &rows)?;
    Ok(())
}
