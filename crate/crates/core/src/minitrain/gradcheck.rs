use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{Mode, Network};
use super::train::{loss_and_grad, TrainConfig};
use crate::simplex::SimplexPoint;

const DROPOUT_SEED: u64 = 0x6772_6164;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    /// Worst `|analytic - numeric| / max(|analytic|, |numeric|, 1e-3)`.
    pub max_rel_error: f64,
    /// `(tensor, element)` where the worst error occurred.
    pub worst_at: (usize, usize),
    pub n_params: usize,
    /// Samples on which the continuous-categorical gradient was zeroed.
    pub zeroed_samples: usize,
    /// True when zeroing fired: the analytic gradient then deliberately
    /// differs from the numeric one and the error is not a defect.
    pub flagged: bool,
}

/// Central finite differences of the training objective against
/// [`loss_and_grad`], over every parameter. Train mode is used with a fixed
/// dropout mask.
pub fn gradcheck(
    net: &Network,
    batch: &Array2<f64>,
    targets: &[SimplexPoint],
    config: &TrainConfig,
    step: f64,
) -> GradcheckReport {
    assert!(
        (1e-7..=1e-3).contains(&step),
        "finite-difference step must lie in [1e-7, 1e-3], got {step}"
    );
    let objective = |n: &Network| -> Option<f64> {
        let mut n = n.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(DROPOUT_SEED);
        loss_and_grad(&mut n, batch, targets, config, Mode::Train, &mut rng)
            .ok()
            .map(|lg| lg.loss)
    };
    let mut base = net.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(DROPOUT_SEED);
    let analytic = match loss_and_grad(&mut base, batch, targets, config, Mode::Train, &mut rng) {
        Ok(lg) => lg,
        Err(_) => {
            return GradcheckReport {
                max_rel_error: f64::INFINITY,
                worst_at: (0, 0),
                n_params: net.param_sizes().iter().sum(),
                zeroed_samples: 0,
                flagged: false,
            }
        }
    };

    let sizes = net.param_sizes();
    let mut worst = (0.0f64, (0, 0));
    for (t, &size) in sizes.iter().enumerate() {
        for e in 0..size {
            let shifted = |delta: f64| {
                let mut n = net.clone();
                n.params_mut()[t][e] += delta;
                objective(&n)
            };
            let numeric = match (shifted(step), shifted(-step)) {
                (Some(p), Some(m)) => (p - m) / (2.0 * step),
                _ => f64::NAN,
            };
            let a = analytic.grads.0[t][e];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            let err = if err.is_nan() { f64::INFINITY } else { err };
            if err > worst.0 {
                worst = (err, (t, e));
            }
        }
    }
    GradcheckReport {
        max_rel_error: worst.0,
        worst_at: worst.1,
        n_params: sizes.iter().sum(),
        zeroed_samples: analytic.zeroed,
        flagged: analytic.zeroed > 0,
    }
}
