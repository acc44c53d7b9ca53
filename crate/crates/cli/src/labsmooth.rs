use anyhow::Result;
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use contcat::labsmooth::{
    default_grid, make_blobs, project_representation, run_ablation, AblationSettings, BlobsSpec,
    LossColumn,
};
use contcat::minitrain::{train, LabelMode, LossKind, NetworkSpec, OptimizerKind, TrainConfig};
use contcat::numeric::derive_seed;

use crate::config::{init_threads, out_dir, parse_list, resolve, usage, write_csv, write_manifest};
use crate::Common;

/// Flags shared by both label-smoothing commands.
#[derive(Args, Debug, Serialize)]
pub struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// sgd or adam.
    #[arg(long)]
    optimizer: Option<String>,
    /// Label smoothing for the LS and CC-LS losses.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Number of classes in the blobs dataset.
    #[arg(long = "num-classes")]
    #[serde(rename = "k")]
    k: Option<usize>,
    /// Input dimension of the blobs dataset.
    #[arg(long)]
    d: Option<usize>,
    /// Distance between class means.
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
}

fn optimizer(name: &str) -> Result<OptimizerKind> {
    match name {
        "adam" => Ok(OptimizerKind::Adam),
        "sgd" => Ok(OptimizerKind::Sgd),
        other => Err(usage(format!("unknown optimizer `{other}`"))),
    }
}

#[derive(Args, Debug, Serialize)]
pub struct AblateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    train: TrainFlags,
    /// Runs per grid cell.
    #[arg(long)]
    replicates: Option<usize>,
    /// Head weight decay in rows where it is switched on.
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Training samples generated per class (before the 80/20 split).
    #[arg(long)]
    n_per_class: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AblateSettings {
    seed: u64,
    output_dir: String,
    threads: usize,
    replicates: usize,
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    optimizer: String,
    epsilon: f64,
    weight_decay: f64,
    k: usize,
    d: usize,
    n_per_class: usize,
    separation: f64,
    noise_sd: f64,
}

impl Default for AblateSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        let a = AblationSettings::default();
        let b = BlobsSpec::default();
        Self {
            seed: 0,
            output_dir: "out/ls-ablate".into(),
            threads: 0,
            replicates: 3,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            optimizer: "adam".into(),
            epsilon: a.epsilon,
            weight_decay: a.weight_decay,
            k: b.k,
            d: b.d,
            n_per_class: b.n_per_class,
            separation: b.separation,
            noise_sd: b.noise_sd,
        }
    }
}

pub fn ls_ablate(args: &AblateArgs) -> Result<()> {
    let s: AblateSettings = resolve(args.common.config.as_deref(), args)?;
    init_threads(s.threads)?;
    let spec = BlobsSpec {
        k: s.k,
        d: s.d,
        n_per_class: s.n_per_class,
        separation: s.separation,
        noise_sd: s.noise_sd,
        seed: s.seed,
    };
    let settings = AblationSettings {
        base: TrainConfig {
            epochs: s.epochs,
            learning_rate: s.learning_rate,
            batch_size: s.batch_size,
            optimizer: optimizer(&s.optimizer)?,
            ..TrainConfig::default()
        },
        epsilon: s.epsilon,
        weight_decay: s.weight_decay,
        seed: s.seed,
    };
    let report = run_ablation(&spec, &default_grid(s.replicates), &settings)?;
    let dir = out_dir(&s.output_dir);
    write_manifest(&dir, "ls-ablate", s.seed, &s)?;
    let table = report.table();
    write_csv(&dir.join("ablation.csv"), &table)?;
    write_csv(&dir.join("runs.csv"), &report.runs)?;

    println!("{:<16} {:>16} {:>16} {:>16}", "config", "baseline", "ls", "cc_ls");
    for r in &table {
        println!(
            "{:<16} {:>8.4} ± {:<5.3} {:>8.4} ± {:<5.3} {:>8.4} ± {:<5.3}",
            r.config, r.baseline_mean, r.baseline_sd, r.ls_mean, r.ls_sd, r.cc_ls_mean, r.cc_ls_sd
        );
    }
    for cell in report.failed_cells() {
        log::warn!(
            "cell {} / {} produced no completed run",
            cell.cell.regularizers.label(),
            cell.cell.loss_column.name()
        );
    }
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct ProjectArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    train: TrainFlags,
    /// Three distinct class indices, e.g. 0,1,2.
    #[arg(long)]
    classes: Option<String>,
    /// baseline, ls or cc-ls.
    #[arg(long)]
    loss: Option<String>,
    /// Samples per class and split in the projection.
    #[arg(long)]
    n_per_class: Option<usize>,
    /// Samples generated per class for training (before the 80/20 split).
    #[arg(long)]
    blobs_per_class: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectSettings {
    seed: u64,
    output_dir: String,
    threads: usize,
    classes: String,
    loss: String,
    n_per_class: usize,
    blobs_per_class: usize,
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    optimizer: String,
    epsilon: f64,
    k: usize,
    d: usize,
    separation: f64,
    noise_sd: f64,
}

impl Default for ProjectSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        let b = BlobsSpec::default();
        Self {
            seed: 0,
            output_dir: "out/ls-project".into(),
            threads: 0,
            classes: "0,1,2".into(),
            loss: "cc-ls".into(),
            n_per_class: 200,
            blobs_per_class: 1000,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            optimizer: "adam".into(),
            epsilon: 0.1,
            k: b.k,
            d: b.d,
            separation: b.separation,
            noise_sd: b.noise_sd,
        }
    }
}

pub fn ls_project(args: &ProjectArgs) -> Result<()> {
    let s: ProjectSettings = resolve(args.common.config.as_deref(), args)?;
    init_threads(s.threads)?;
    let classes = parse_list::<usize>(&s.classes, "classes")?;
    let triple: [usize; 3] = classes
        .try_into()
        .map_err(|_| usage("--classes takes exactly three indices"))?;
    let column: LossColumn = serde_json::from_value(serde_json::Value::String(s.loss.clone()))
        .map_err(|_| usage(format!("unknown loss `{}`; use baseline, ls or cc-ls", s.loss)))?;
    let spec = BlobsSpec {
        k: s.k,
        d: s.d,
        n_per_class: s.blobs_per_class,
        separation: s.separation,
        noise_sd: s.noise_sd,
        seed: s.seed,
    };
    let split = make_blobs(&spec)?;
    let (loss_kind, label_mode) = match column {
        LossColumn::Baseline => (LossKind::CrossEntropy, LabelMode::Hard),
        LossColumn::Ls => (LossKind::CrossEntropy, LabelMode::Smoothed { epsilon: s.epsilon }),
        LossColumn::CcLs => (
            LossKind::ContinuousCategorical,
            LabelMode::Smoothed { epsilon: s.epsilon },
        ),
    };
    let config = TrainConfig {
        loss_kind,
        label_mode,
        epochs: s.epochs,
        learning_rate: s.learning_rate,
        batch_size: s.batch_size,
        optimizer: optimizer(&s.optimizer)?,
        seed: s.seed,
        ..TrainConfig::default()
    };
    let net = NetworkSpec::desk_default(s.d, s.k, false, false)
        .build(&mut ChaCha8Rng::seed_from_u64(derive_seed(s.seed, &[1])))?;
    let outcome = train(net, &split, &config)?;
    let report = project_representation(&outcome.net, &split, triple, s.n_per_class)?;

    let dir = out_dir(&s.output_dir);
    write_manifest(&dir, "ls-project", s.seed, &s)?;
    write_csv(&dir.join("projection.csv"), &report.points)?;
    write_csv(&dir.join("training.csv"), &outcome.metrics)?;
    println!(
        "wcss/bcss  train {:.4}  test {:.4}",
        report.wcss_bcss_train, report.wcss_bcss_test
    );
    Ok(())
}
