//! Brute-force checks of the closed-form normalizer.
//!
//! Everything here integrates over the simplex directly (Monte Carlo with
//! uniform proposals) or uses one-dimensional closed forms, so it shares no
//! code path with the signed-term summation in [`crate::cc`].
//!
//! Measure convention: `dy` is the Lebesgue measure on the first `K-1`
//! coordinates, under which the simplex has volume `1/(K-1)!`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::cc::{log_norm_const, CcConfig, CcParams, NormalizerMethod};
use crate::error::{Error, Result};
use crate::numeric::{derive_seed, ln_factorial, median, ordered_map};
use crate::simplex::{fill_uniform_simplex, sample_uniform_simplex};

/// Largest dimension at which the Monte Carlo oracle is trusted.
pub const MAX_TRUSTED_K: usize = 6;
/// Sample count from which the oracle's standard error is trusted.
pub const MIN_TRUSTED_SAMPLES: usize = 10_000;
pub const DEFAULT_ESS_FLOOR: f64 = 1_000.0;
/// Absolute per-coordinate distance from the centroid used by the probe's near-centroid row.
pub const NEAR_CENTROID_DEVIATION: f64 = 1e-4;
/// Relative floor on the standard error used by [`McEstimate::z_score`]. A
/// constant integrand (the centroid) has zero sampling variance, and the
/// estimate then differs from the exact value by rounding alone.
pub const ROUNDING_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl McEstimate {
    /// Number of standard errors between the estimate and `x`.
    pub fn z_score(&self, x: f64) -> f64 {
        let se = self.stderr.max(ROUNDING_FLOOR * self.value.abs());
        if se == 0.0 {
            if x == self.value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (x - self.value) / se
        }
    }

    pub fn trusted(&self) -> bool {
        self.n_samples >= MIN_TRUSTED_SAMPLES
    }
}

fn check_trusted(k: usize) -> Result<()> {
    if !(2..=MAX_TRUSTED_K).contains(&k) {
        return Err(Error::UntrustedDimension(k));
    }
    Ok(())
}

fn check_samples(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 Monte Carlo samples, got {n}"
        )));
    }
    Ok(())
}

/// Monte Carlo estimate of `1/C(λ) = ∫ ∏ λ_k^{y_k} dy`.
pub fn mc_inv_norm_const<R: Rng + ?Sized>(
    params: &CcParams,
    n: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    let k = params.dim();
    check_trusted(k)?;
    check_samples(n)?;
    let eta = params.log_lambda();
    let eta_max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut y = vec![0.0; k];
    // Welford on the shifted integrand exp(y·η - η_max) ∈ (0, 1].
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n {
        fill_uniform_simplex(&mut y, rng);
        let h = (y.iter().zip(eta).map(|(a, b)| a * b).sum::<f64>() - eta_max).exp();
        let delta = h - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (h - mean);
    }
    let sd = (m2 / (n - 1) as f64).sqrt();
    let scale = (eta_max - ln_factorial(k - 1)).exp();
    Ok(McEstimate {
        value: scale * mean,
        stderr: scale * sd / (n as f64).sqrt(),
        n_samples: n,
    })
}

/// `1/C(λ) = (λ1 - λ2) / log(λ1/λ2)` at `K = 2`, evaluated as
/// `λ2 · expm1(d) / d` with `d = log λ1 - log λ2` to avoid cancellation.
pub fn closed_form_k2(params: &CcParams) -> Result<f64> {
    if params.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: params.dim(),
        });
    }
    let eta = params.log_lambda();
    let d = eta[0] - eta[1];
    if d == 0.0 {
        return Err(Error::FullTie);
    }
    Ok(params.lambda()[1] * d.exp_m1() / d)
}

/// `log C` at the centroid `(1/K, ..., 1/K)`: the integrand is constant `1/K`
/// over a simplex of volume `1/(K-1)!`, so `C = K!`.
pub fn uniform_limit_log_c(k: usize) -> f64 {
    ln_factorial(k)
}

/// Self-normalized importance-sampling estimate of `E[y]` under the
/// distribution, using uniform proposals weighted by `∏ λ_k^{y_k}`.
pub fn importance_mean<R: Rng + ?Sized>(
    params: &CcParams,
    n: usize,
    rng: &mut R,
    ess_floor: f64,
) -> Result<Vec<McEstimate>> {
    let k = params.dim();
    check_trusted(k)?;
    check_samples(n)?;
    let eta = params.log_lambda();
    let eta_max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut y = vec![0.0; k];
    let mut sw = 0.0;
    let mut sw2 = 0.0;
    let mut swy = vec![0.0; k];
    let mut sw2y = vec![0.0; k];
    let mut sw2y2 = vec![0.0; k];
    for _ in 0..n {
        fill_uniform_simplex(&mut y, rng);
        let w = (y.iter().zip(eta).map(|(a, b)| a * b).sum::<f64>() - eta_max).exp();
        let w2 = w * w;
        sw += w;
        sw2 += w2;
        for j in 0..k {
            swy[j] += w * y[j];
            sw2y[j] += w2 * y[j];
            sw2y2[j] += w2 * y[j] * y[j];
        }
    }
    let ess = sw * sw / sw2;
    if ess < ess_floor {
        return Err(Error::LowEffectiveSampleSize {
            ess,
            floor: ess_floor,
        });
    }
    Ok((0..k)
        .map(|j| {
            let mu = swy[j] / sw;
            // delta-method variance of a ratio estimator
            let num = (sw2y2[j] - 2.0 * mu * sw2y[j] + mu * mu * sw2).max(0.0);
            McEstimate {
                value: mu,
                stderr: num.sqrt() / sw,
                n_samples: n,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub lambda_descriptor: String,
    pub condition_number: f64,
    pub oracle_rel_deviation: Option<f64>,
}

/// Settings for [`precision_probe`].
#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Monte Carlo samples per oracle comparison (only for `K <= 6`).
    pub oracle_samples: usize,
}

/// Measures cancellation in the closed-form sum for random parameters drawn
/// uniformly on the simplex, plus one near-centroid parameter per `K`.
///
/// Rows come out sorted by `K` (in input order) then trial index, with the
/// near-centroid row last for each `K`.
pub fn precision_probe(config: &ProbeConfig) -> Result<Vec<PrecisionRow>> {
    if config.trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    if let Some(bad) = config.k_values.iter().find(|k| **k < 2) {
        return Err(Error::InvalidParameter(format!("K must be >= 2, got {bad}")));
    }
    let jobs: Vec<(usize, usize)> = config
        .k_values
        .iter()
        .flat_map(|&k| (0..=config.trials).map(move |t| (k, t)))
        .collect();
    Ok(ordered_map(&jobs, |&(k, trial)| probe_one(config, k, trial)))
}

fn probe_one(config: &ProbeConfig, k: usize, trial: usize) -> PrecisionRow {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[k as u64, trial as u64]));
    let near_centroid = trial == config.trials;
    let lambda = if near_centroid {
        near_centroid_lambda(k, NEAR_CENTROID_DEVIATION, &mut rng)
    } else {
        sample_uniform_simplex(k, &mut rng)
            .expect("K >= 2")
            .into_vec()
            .into_iter()
            .map(|v| v.max(1e-300))
            .collect()
    };
    let descriptor = if near_centroid {
        format!("near-centroid:{NEAR_CENTROID_DEVIATION:e}")
    } else {
        format!("uniform-draw:{trial}")
    };
    let params = CcParams::new(lambda).expect("entries are positive");
    // the probe measures the closed-form sum, not the accurate default route
    let closed = CcConfig {
        method: NormalizerMethod::ClosedForm,
        ..CcConfig::default()
    };
    let condition_number = closed.diagnostics(&params).condition_number;
    let oracle_rel_deviation = match closed.log_norm_const(&params) {
        Ok((log_c, _)) if k <= MAX_TRUSTED_K => {
            mc_inv_norm_const(&params, config.oracle_samples, &mut rng)
                .ok()
                .map(|mc| ((-log_c).exp() - mc.value).abs() / mc.value)
        }
        _ => None,
    };
    PrecisionRow {
        k,
        lambda_descriptor: descriptor,
        condition_number,
        oracle_rel_deviation,
    }
}

/// A composition whose largest absolute deviation from `1/K` equals `deviation`.
pub fn near_centroid_lambda<R: Rng + ?Sized>(k: usize, deviation: f64, rng: &mut R) -> Vec<f64> {
    let mut d: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
    let mean = d.iter().sum::<f64>() / k as f64;
    d.iter_mut().for_each(|x| *x -= mean);
    let scale = d.iter().map(|x| x.abs()).fold(0.0, f64::max);
    d.iter()
        .map(|x| 1.0 / k as f64 + deviation * x / scale)
        .collect()
}

/// Median condition number per `K`, in first-appearance order.
pub fn median_condition_by_k(rows: &[PrecisionRow]) -> Vec<(usize, f64)> {
    let mut ks: Vec<usize> = Vec::new();
    for r in rows {
        if !ks.contains(&r.k) {
            ks.push(r.k);
        }
    }
    ks.into_iter()
        .map(|k| {
            let conds: Vec<f64> = rows
                .iter()
                .filter(|r| r.k == k)
                .map(|r| r.condition_number)
                .collect();
            (k, median(&conds))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Too few samples for the standard error to be meaningful.
    StderrTooLarge,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub case: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub lambda: String,
    /// `1/C` from the library's normalizer.
    pub analytic: f64,
    /// Reference value (Monte Carlo or one-dimensional closed form).
    pub reference: f64,
    pub stderr: f64,
    /// Discrepancy in the case's unit: standard errors, or relative error for exact references.
    pub discrepancy: f64,
    pub status: CheckStatus,
}

/// Settings for [`agreement_suite`].
#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub k_max: usize,
    pub n_samples: usize,
    pub random_per_k: usize,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            k_max: MAX_TRUSTED_K,
            n_samples: 1_000_000,
            random_per_k: 4,
            seed: 0,
        }
    }
}

/// Compares the closed-form normalizer with the oracles: Monte Carlo at the
/// centroid and at random parameters for every `K` in `2..=k_max` (3-stderr
/// rule), and the one-dimensional closed form at `K = 2` (relative 1e-10).
pub fn agreement_suite(config: &CheckConfig) -> Result<Vec<CheckRow>> {
    if !(2..=MAX_TRUSTED_K).contains(&config.k_max) {
        return Err(Error::UntrustedDimension(config.k_max));
    }
    let mut rows = Vec::new();
    for k in 2..=config.k_max {
        for case in 0..=config.random_per_k {
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[k as u64, case as u64]));
            let (name, lambda) = if case == 0 {
                ("centroid".to_string(), vec![1.0 / k as f64; k])
            } else {
                let p = sample_uniform_simplex(k, &mut rng)?.into_vec();
                (format!("random-{case}"), p.into_iter().map(|v| v.max(1e-300)).collect())
            };
            let params = CcParams::new(lambda.clone())?;
            let lambda_text = lambda
                .iter()
                .map(|v| format!("{v:.6}"))
                .collect::<Vec<_>>()
                .join(";");
            let analytic = match log_norm_const(&params) {
                Ok((log_c, _)) => (-log_c).exp(),
                Err(_) => f64::NAN,
            };
            let mc = mc_inv_norm_const(&params, config.n_samples, &mut rng)?;
            let z = mc.z_score(analytic);
            let status = if !mc.trusted() {
                CheckStatus::StderrTooLarge
            } else if z.abs() <= 3.0 {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            };
            rows.push(CheckRow {
                case: format!("mc-{name}"),
                k,
                lambda: lambda_text.clone(),
                analytic,
                reference: mc.value,
                stderr: mc.stderr,
                discrepancy: z,
                status,
            });
            if k == 2 && case > 0 {
                let closed = closed_form_k2(&params)?;
                let rel = (analytic - closed).abs() / closed;
                rows.push(CheckRow {
                    case: format!("closed-form-{name}"),
                    k,
                    lambda: lambda_text,
                    analytic,
                    reference: closed,
                    stderr: 0.0,
                    discrepancy: rel,
                    status: if rel < 1e-10 {
                        CheckStatus::Pass
                    } else {
                        CheckStatus::Fail
                    },
                });
            }
        }
    }
    Ok(rows)
}
