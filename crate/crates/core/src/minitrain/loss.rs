use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cc::{CcConfig, CcParams};
use crate::error::{Error, Result};
use crate::simplex::{PositiveComposition, SimplexPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `-Σ y_k log λ_k`
    CrossEntropy,
    /// Cross-entropy plus `-log C(λ)`.
    ContinuousCategorical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleLoss {
    pub cross_entropy: f64,
    /// `-log C(λ)`; zero for the cross-entropy loss.
    pub neg_log_c: f64,
    /// Gradient with respect to the logits feeding the softmax.
    pub grad_logits: Vec<f64>,
    /// The continuous-categorical zeroing policy fired for this sample.
    pub zeroed: bool,
}

impl SampleLoss {
    pub fn value(&self) -> f64 {
        self.cross_entropy + self.neg_log_c
    }
}

pub fn sample_loss(
    kind: LossKind,
    cc: &CcConfig,
    output: &PositiveComposition,
    target: &SimplexPoint,
) -> Result<SampleLoss> {
    if output.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: output.dim(),
            got: target.dim(),
        });
    }
    let y = target.values();
    let p = output.values();
    let cross_entropy = -y
        .iter()
        .zip(output.log_values())
        .map(|(a, b)| a * b)
        .sum::<f64>();
    match kind {
        LossKind::CrossEntropy => {
            let y_sum: f64 = y.iter().sum();
            Ok(SampleLoss {
                cross_entropy,
                neg_log_c: 0.0,
                grad_logits: p.iter().zip(y).map(|(pk, yk)| pk * y_sum - yk).collect(),
                zeroed: false,
            })
        }
        LossKind::ContinuousCategorical => {
            let params = CcParams::from_composition(output.clone());
            let (log_c, grad) = cc.log_norm_const_and_grad(&params, target)?;
            // chain rule through log-softmax: dz_j = g_j - p_j Σ_k g_k
            let g_sum: f64 = grad.gradient.iter().sum();
            let grad_logits = grad
                .gradient
                .iter()
                .zip(p)
                .map(|(g, pk)| g - pk * g_sum)
                .collect();
            Ok(SampleLoss {
                cross_entropy,
                neg_log_c: -log_c,
                grad_logits,
                zeroed: grad.zeroed,
            })
        }
    }
}

/// Batch-mean loss and its gradient with respect to the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub mean: f64,
    pub mean_cross_entropy: f64,
    pub mean_neg_log_c: f64,
    /// Rows are per-sample logit gradients already divided by the batch size.
    pub grad_logits: Array2<f64>,
    pub zeroed: usize,
    /// Per-sample loss values, in batch order.
    pub sample_losses: Vec<f64>,
    pub sample_zeroed: Vec<bool>,
}

pub fn batch_loss(
    kind: LossKind,
    cc: &CcConfig,
    outputs: &[PositiveComposition],
    targets: &[SimplexPoint],
) -> Result<BatchLoss> {
    if outputs.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} outputs but {} targets",
            outputs.len(),
            targets.len()
        )));
    }
    if outputs.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    let n = outputs.len();
    let k = outputs[0].dim();
    let mut grad_logits = Array2::zeros((n, k));
    let mut ce_sum = 0.0;
    let mut nlc_sum = 0.0;
    let mut sample_losses = Vec::with_capacity(n);
    let mut sample_zeroed = Vec::with_capacity(n);
    for (i, (out, target)) in outputs.iter().zip(targets).enumerate() {
        let s = sample_loss(kind, cc, out, target).map_err(|e| e.at_sample(i))?;
        ce_sum += s.cross_entropy;
        nlc_sum += s.neg_log_c;
        sample_losses.push(s.value());
        sample_zeroed.push(s.zeroed);
        for (dst, g) in grad_logits.row_mut(i).iter_mut().zip(&s.grad_logits) {
            *dst = g / n as f64;
        }
    }
    let nf = n as f64;
    Ok(BatchLoss {
        mean: (ce_sum + nlc_sum) / nf,
        mean_cross_entropy: ce_sum / nf,
        mean_neg_log_c: nlc_sum / nf,
        grad_logits,
        zeroed: sample_zeroed.iter().filter(|z| **z).count(),
        sample_losses,
        sample_zeroed,
    })
}

/// Batch-mean loss without gradients.
pub fn batch_loss_value(
    kind: LossKind,
    cc: &CcConfig,
    outputs: &[PositiveComposition],
    targets: &[SimplexPoint],
) -> Result<f64> {
    if outputs.len() != targets.len() || outputs.is_empty() {
        return Err(Error::Shape(format!(
            "{} outputs and {} targets; need equal non-zero counts",
            outputs.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (i, (out, target)) in outputs.iter().zip(targets).enumerate() {
        let cross_entropy = -target
            .values()
            .iter()
            .zip(out.log_values())
            .map(|(a, b)| a * b)
            .sum::<f64>();
        let neg_log_c = match kind {
            LossKind::CrossEntropy => 0.0,
            LossKind::ContinuousCategorical => {
                if out.dim() != target.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: out.dim(),
                        got: target.dim(),
                    }
                    .at_sample(i));
                }
                let params = CcParams::from_composition(out.clone());
                -cc.log_norm_const(&params).map_err(|e| e.at_sample(i))?.0
            }
        };
        total += cross_entropy + neg_log_c;
    }
    Ok(total / outputs.len() as f64)
}
