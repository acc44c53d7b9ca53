use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::blobs::{make_blobs, BlobsSpec};
use crate::error::{Error, Result};
use crate::minitrain::{train, LabelMode, LossKind, NetworkSpec, Split, TrainConfig};
use crate::numeric::{derive_seed, mean_sd, ordered_map};

/// Which regularizers are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Regularizers {
    pub dropout: bool,
    pub weight_decay: bool,
    pub batchnorm: bool,
}

impl Regularizers {
    /// Row label such as `dropout+wd+bn`, or `none`.
    pub fn label(&self) -> String {
        let parts: Vec<&str> = [
            (self.dropout, "dropout"),
            (self.weight_decay, "wd"),
            (self.batchnorm, "bn"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, name)| *name)
        .collect();
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }

    fn row_index(&self) -> usize {
        REGULARIZER_ROWS
            .iter()
            .position(|r| r == self)
            .expect("every combination is listed")
    }
}

const fn regs(dropout: bool, weight_decay: bool, batchnorm: bool) -> Regularizers {
    Regularizers {
        dropout,
        weight_decay,
        batchnorm,
    }
}

/// The eight regularizer combinations in table row order: batchnorm on for
/// the first four rows, weight decay alternating in pairs, dropout fastest.
pub const REGULARIZER_ROWS: [Regularizers; 8] = [
    regs(true, true, true),
    regs(false, true, true),
    regs(true, false, true),
    regs(false, false, true),
    regs(true, true, false),
    regs(false, true, false),
    regs(true, false, false),
    regs(false, false, false),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossColumn {
    /// Cross-entropy on hard labels.
    Baseline,
    /// Cross-entropy on smoothed labels.
    Ls,
    /// Continuous-categorical loss on smoothed labels.
    CcLs,
}

impl LossColumn {
    pub const ALL: [LossColumn; 3] = [LossColumn::Baseline, LossColumn::Ls, LossColumn::CcLs];

    pub fn name(&self) -> &'static str {
        match self {
            LossColumn::Baseline => "baseline",
            LossColumn::Ls => "ls",
            LossColumn::CcLs => "cc_ls",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationCell {
    pub regularizers: Regularizers,
    pub loss_column: LossColumn,
    pub replicates: usize,
}

/// All 24 cells, row-major in [`REGULARIZER_ROWS`] order.
pub fn default_grid(replicates: usize) -> Vec<AblationCell> {
    REGULARIZER_ROWS
        .iter()
        .flat_map(|&regularizers| {
            LossColumn::ALL.iter().map(move |&loss_column| AblationCell {
                regularizers,
                loss_column,
                replicates,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSettings {
    /// Optimizer, learning rate, batch size and epochs shared by every run.
    pub base: TrainConfig,
    /// Smoothing for the LS and CC-LS columns.
    pub epsilon: f64,
    /// Head weight decay when the regularizer is on.
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for AblationSettings {
    fn default() -> Self {
        Self {
            base: TrainConfig::default(),
            epsilon: 0.1,
            weight_decay: 1e-4,
            seed: 0,
        }
    }
}

impl AblationSettings {
    fn run_config(&self, cell: &AblationCell, seed: u64) -> TrainConfig {
        let r = cell.regularizers;
        let (loss_kind, label_mode) = match cell.loss_column {
            LossColumn::Baseline => (LossKind::CrossEntropy, LabelMode::Hard),
            LossColumn::Ls => (
                LossKind::CrossEntropy,
                LabelMode::Smoothed {
                    epsilon: self.epsilon,
                },
            ),
            LossColumn::CcLs => (
                LossKind::ContinuousCategorical,
                LabelMode::Smoothed {
                    epsilon: self.epsilon,
                },
            ),
        };
        TrainConfig {
            loss_kind,
            label_mode,
            seed,
            weight_decay: if r.weight_decay { self.weight_decay } else { 0.0 },
            dropout_on: r.dropout,
            batchnorm_on: r.batchnorm,
            ..self.base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub config: String,
    pub loss_column: LossColumn,
    pub replicate: usize,
    pub seed: u64,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub final_test_acc: f64,
    /// Empty on success, otherwise the abort reason.
    pub error: String,
}

impl RunRecord {
    pub fn completed(&self) -> bool {
        self.error.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: AblationCell,
    /// Mean and standard deviation of final test accuracy over completed runs.
    pub mean: f64,
    pub sd: f64,
    pub completed: usize,
    /// Every replicate aborted.
    pub failed: bool,
}

/// One table row: a regularizer combination with mean and sd per column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub config: String,
    pub baseline_mean: f64,
    pub baseline_sd: f64,
    pub ls_mean: f64,
    pub ls_sd: f64,
    pub cc_ls_mean: f64,
    pub cc_ls_sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub runs: Vec<RunRecord>,
    pub cells: Vec<CellSummary>,
}

impl AblationReport {
    /// Rows in [`REGULARIZER_ROWS`] order for every combination present in
    /// the grid; absent or failed cells read as NaN.
    pub fn table(&self) -> Vec<TableRow> {
        REGULARIZER_ROWS
            .iter()
            .filter(|r| self.cells.iter().any(|c| c.cell.regularizers == **r))
            .map(|r| {
                let stat = |col: LossColumn| {
                    self.cells
                        .iter()
                        .find(|c| c.cell.regularizers == *r && c.cell.loss_column == col)
                        .filter(|c| !c.failed)
                        .map_or((f64::NAN, f64::NAN), |c| (c.mean, c.sd))
                };
                let (baseline_mean, baseline_sd) = stat(LossColumn::Baseline);
                let (ls_mean, ls_sd) = stat(LossColumn::Ls);
                let (cc_ls_mean, cc_ls_sd) = stat(LossColumn::CcLs);
                TableRow {
                    config: r.label(),
                    baseline_mean,
                    baseline_sd,
                    ls_mean,
                    ls_sd,
                    cc_ls_mean,
                    cc_ls_sd,
                }
            })
            .collect()
    }

    pub fn failed_cells(&self) -> Vec<&CellSummary> {
        self.cells.iter().filter(|c| c.failed).collect()
    }
}

/// Trains every replicate of every cell on one shared blobs dataset.
///
/// A run's seed depends on its regularizer row and replicate only, so the
/// three loss columns of a row start from identical networks and batch
/// orders.
pub fn run_ablation(
    spec: &BlobsSpec,
    grid: &[AblationCell],
    settings: &AblationSettings,
) -> Result<AblationReport> {
    if let Some(bad) = grid.iter().find(|c| c.replicates < 2) {
        return Err(Error::InvalidParameter(format!(
            "cells need at least 2 replicates, got {}",
            bad.replicates
        )));
    }
    if !(0.0..=1.0).contains(&settings.epsilon) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in [0, 1], got {}",
            settings.epsilon
        )));
    }
    settings.base.validate()?;
    let split = make_blobs(spec)?;
    let jobs: Vec<(usize, usize)> = grid
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.replicates).map(move |r| (i, r)))
        .collect();
    let runs = ordered_map(&jobs, |&(i, r)| run_one(&split, spec, &grid[i], r, settings));

    let cells = grid
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            let accs: Vec<f64> = jobs
                .iter()
                .zip(&runs)
                .filter(|((ci, _), run)| *ci == i && run.completed())
                .map(|(_, run)| run.final_test_acc)
                .collect();
            let (mean, sd) = mean_sd(&accs);
            if accs.is_empty() {
                log::warn!("cell {} / {} failed in every replicate", cell.regularizers.label(), cell.loss_column.name());
            }
            CellSummary {
                cell: *cell,
                mean,
                sd,
                completed: accs.len(),
                failed: accs.is_empty(),
            }
        })
        .collect();
    Ok(AblationReport { runs, cells })
}

fn run_one(
    split: &Split,
    spec: &BlobsSpec,
    cell: &AblationCell,
    replicate: usize,
    settings: &AblationSettings,
) -> RunRecord {
    let row = cell.regularizers.row_index() as u64;
    let seed = derive_seed(settings.seed, &[row, replicate as u64]);
    let config = settings.run_config(cell, seed);
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
    let mut record = RunRecord {
        config: cell.regularizers.label(),
        loss_column: cell.loss_column,
        replicate,
        seed,
        initial_train_loss: f64::NAN,
        final_train_loss: f64::NAN,
        final_test_acc: f64::NAN,
        error: String::new(),
    };
    let result = NetworkSpec::desk_default(spec.d, spec.k, config.dropout_on, config.batchnorm_on)
        .build(&mut init_rng)
        .and_then(|net| train(net, split, &config));
    match result {
        Ok(out) => {
            record.initial_train_loss = out.initial_train_loss;
            if let Some(last) = out.metrics.last() {
                record.final_train_loss = last.train_loss;
                record.final_test_acc = last.test_acc;
            }
        }
        Err(e) => {
            log::warn!("run {} / {} #{replicate} aborted: {e}", record.config, cell.loss_column.name());
            record.error = e.to_string();
        }
    }
    record
}
