//! The continuous-categorical distribution on the simplex.
//!
//! The density at `y` is `C(λ) ∏ λ_k^{y_k}` with respect to the
//! `(K-1)`-coordinate Lebesgue measure on the simplex. The inverse normalizing
//! constant has the closed form
//!
//! ```text
//! 1 / C(λ) = (-1)^{K+1} Σ_k λ_k / ∏_{i≠k} log(λ_i / λ_k)
//! ```
//!
//! which is the divided difference of `exp` at the nodes `η = log λ`. The sum
//! cancels badly near ties between entries of `λ` and for large `K`, so every
//! evaluation reports an [`EvalDiagnostics`] describing how much cancellation
//! the closed form suffers. By default values are computed through an
//! equivalent cancellation-free route; see [`NormalizerMethod`].

mod divdiff;
mod sampler;

use std::sync::atomic::{AtomicBool, Ordering};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{ln_factorial, neumaier_sum};
use crate::simplex::{log_sum_exp, PositiveComposition, SimplexPoint};

pub use sampler::{sample_cc, CcSampler, DEFAULT_MIN_ACCEPTANCE};

/// Parameter `λ` of the distribution. Entries are strictly positive; they do
/// not have to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CcParams {
    lambda: PositiveComposition,
}

impl CcParams {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Ok(Self {
            lambda: PositiveComposition::from_values(values)?,
        })
    }

    pub fn from_log_values(eta: Vec<f64>) -> Result<Self> {
        Ok(Self {
            lambda: PositiveComposition::from_log_values(eta)?,
        })
    }

    pub fn from_composition(lambda: PositiveComposition) -> Self {
        Self { lambda }
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn dim(&self) -> usize {
        self.lambda.dim()
    }

    pub fn lambda(&self) -> &[f64] {
        self.lambda.values()
    }

    pub fn log_lambda(&self) -> &[f64] {
        self.lambda.log_values()
    }

    pub fn composition(&self) -> &PositiveComposition {
        &self.lambda
    }
}

/// A real number stored as a sign and a natural-log magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLogTerm {
    pub sign: f64,
    pub log_magnitude: f64,
}

impl SignedLogTerm {
    pub fn value(&self) -> f64 {
        self.sign * self.log_magnitude.exp()
    }
}

/// Numerical health of one evaluation of the normalizing constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalDiagnostics {
    /// `Σ|term| / |Σ term|`; infinite when the sum cancels to zero.
    pub condition_number: f64,
    pub near_centroid: bool,
    pub tie_adjusted: bool,
    /// Smallest `|log(λ_i / λ_k)|` over pairs, measured before tie adjustment.
    pub min_log_ratio: f64,
}

/// Thresholds governing tie handling and gradient zeroing.
#[derive(Debug, Clone, PartialEq)]
pub struct CcConfig {
    /// `near_centroid` fires when `max_k |K p_k - 1|` is below this, with `p = λ / Σλ`.
    pub centroid_threshold: f64,
    /// Condition numbers above this zero the normalizer's gradient.
    pub condition_bound: f64,
    /// Log-ratios smaller than this count as exact ties.
    pub tie_tolerance: f64,
    /// Spacing, on the log scale, used to separate tied entries.
    pub tie_jitter: f64,
    /// Dimensions above this log a one-time warning.
    pub soft_max_k: usize,
    pub method: NormalizerMethod,
}

/// How the value of `1/C(λ)` is obtained. Diagnostics always describe the
/// closed-form sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizerMethod {
    /// Exponential of the bidiagonal node matrix; accurate to a few ulps
    /// regardless of ties or `K`.
    #[default]
    Accurate,
    /// The signed closed-form sum itself, with its cancellation error.
    ClosedForm,
}

impl Default for CcConfig {
    fn default() -> Self {
        Self {
            centroid_threshold: 1e-3,
            condition_bound: 1e8,
            tie_tolerance: 1e-12,
            tie_jitter: 1e-9,
            soft_max_k: 12,
            method: NormalizerMethod::Accurate,
        }
    }
}

/// Gradient of the negative log-likelihood with respect to `η = log λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NllGradient {
    pub gradient: Vec<f64>,
    pub diag: EvalDiagnostics,
    /// The `-log C` contribution was replaced by zero.
    pub zeroed: bool,
}

struct Evaluation {
    /// Node positions after tie adjustment.
    eta: Vec<f64>,
    /// Node positions as given.
    nodes: Vec<f64>,
    /// `log(1/C)` from the accurate route, when selected.
    accurate: Option<f64>,
    /// Divided-difference terms `e^{η_k} / ∏_{i≠k} (η_k - η_i)`, scaled by `e^{-log_scale}`.
    scaled: Vec<f64>,
    log_scale: f64,
    /// `Σ scaled`, i.e. `e^{-log_scale} / C(λ)`.
    total: f64,
    diag: EvalDiagnostics,
    uniform: bool,
}

impl Evaluation {
    fn log_inv_norm_const(&self) -> Result<f64> {
        if let Some(v) = self.accurate {
            return if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NumericalFailure {
                    signed_sum: self.total,
                    diag: self.diag,
                })
            };
        }
        if self.total > 0.0 && self.total.is_finite() {
            Ok(self.log_scale + self.total.ln())
        } else {
            Err(Error::NumericalFailure {
                signed_sum: self.total,
                diag: self.diag,
            })
        }
    }
}

static WARNED_LARGE_K: AtomicBool = AtomicBool::new(false);

impl CcConfig {
    /// The `K` signed terms `λ_k / ∏_{i≠k} log(λ_i/λ_k)` whose signed sum,
    /// times `(-1)^{K+1}`, is `1/C(λ)`. Tied entries are jittered apart first.
    pub fn inv_norm_const_terms(&self, params: &CcParams) -> Result<Vec<SignedLogTerm>> {
        let (eta, _) = self.separate_ties(params.log_lambda());
        let eta = eta.ok_or(Error::FullTie)?;
        Ok(raw_terms(&eta))
    }

    /// `log C(λ)` together with diagnostics.
    pub fn log_norm_const(&self, params: &CcParams) -> Result<(f64, EvalDiagnostics)> {
        let eval = self.evaluate(params);
        let log_inv = eval.log_inv_norm_const()?;
        Ok((-log_inv, eval.diag))
    }

    /// Diagnostics alone; available even when the value cannot be computed.
    pub fn diagnostics(&self, params: &CcParams) -> EvalDiagnostics {
        self.evaluate(params).diag
    }

    /// Negative log-density `-log C(λ) - Σ y_k log λ_k`.
    pub fn nll(&self, params: &CcParams, y: &SimplexPoint) -> Result<f64> {
        check_dims(params, y)?;
        let (log_c, _) = self.log_norm_const(params)?;
        Ok(-log_c - dot(y.values(), params.log_lambda()))
    }

    /// Mean of the distribution, equal to `-∂ log C / ∂η`. No zeroing is applied.
    pub fn mean(&self, params: &CcParams) -> Result<(Vec<f64>, EvalDiagnostics)> {
        let eval = self.evaluate(params);
        let mean = mean_from(&eval)?;
        Ok((mean, eval.diag))
    }

    /// Gradient of [`CcConfig::nll`] in `η`. Inside the unstable region
    /// (near the centroid, or condition number above the bound) the `-log C`
    /// part is replaced by zero and the result is flagged.
    ///
    /// Zeroing drops the gradient of `-log C`, which equals the mean of the
    /// distribution. At the exact centroid that mean is `(1/K, ..., 1/K)`,
    /// parallel to the all-ones direction, so nothing is lost once `λ` is
    /// constrained to the simplex.
    pub fn grad_nll(&self, params: &CcParams, y: &SimplexPoint) -> Result<NllGradient> {
        check_dims(params, y)?;
        let eval = self.evaluate(params);
        self.gradient_from(&eval, y)
    }

    /// `log C(λ)` and the gradient of the negative log-likelihood from a
    /// single evaluation of the normalizer.
    pub fn log_norm_const_and_grad(
        &self,
        params: &CcParams,
        y: &SimplexPoint,
    ) -> Result<(f64, NllGradient)> {
        check_dims(params, y)?;
        let eval = self.evaluate(params);
        let log_inv = eval.log_inv_norm_const()?;
        Ok((-log_inv, self.gradient_from(&eval, y)?))
    }

    fn gradient_from(&self, eval: &Evaluation, y: &SimplexPoint) -> Result<NllGradient> {
        let zeroed = self.in_unstable_region(&eval.diag);
        let gradient = if zeroed {
            y.values().iter().map(|v| -v).collect()
        } else {
            let mean = mean_from(eval)?;
            mean.iter().zip(y.values()).map(|(m, v)| m - v).collect()
        };
        Ok(NllGradient {
            gradient,
            diag: eval.diag,
            zeroed,
        })
    }

    pub fn in_unstable_region(&self, diag: &EvalDiagnostics) -> bool {
        diag.near_centroid || !(diag.condition_number <= self.condition_bound)
    }

    /// Returns the tie-separated nodes (or `None` when every entry is tied)
    /// and whether any adjustment was made.
    fn separate_ties(&self, eta: &[f64]) -> (Option<Vec<f64>>, bool) {
        let k = eta.len();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eta[a].total_cmp(&eta[b]));
        if eta[order[k - 1]] - eta[order[0]] < self.tie_tolerance {
            return (None, true);
        }
        let mut out = eta.to_vec();
        let mut adjusted = false;
        let mut start = 0;
        while start < k {
            let mut end = start + 1;
            while end < k && eta[order[end]] - eta[order[end - 1]] < self.tie_tolerance {
                end += 1;
            }
            let m = end - start;
            if m > 1 {
                adjusted = true;
                let center = order[start..end].iter().map(|&i| eta[i]).sum::<f64>() / m as f64;
                let half = (m - 1) as f64 / 2.0;
                for (j, &i) in order[start..end].iter().enumerate() {
                    out[i] = center + (j as f64 - half) * self.tie_jitter;
                }
            }
            start = end;
        }
        (Some(out), adjusted)
    }

    fn evaluate(&self, params: &CcParams) -> Evaluation {
        let k = params.dim();
        if k > self.soft_max_k && !WARNED_LARGE_K.swap(true, Ordering::Relaxed) {
            log::warn!(
                "evaluating the continuous-categorical normalizer at K={k} (> {}); \
                 the closed-form sum cancels heavily at this size",
                self.soft_max_k
            );
        }
        let eta_in = params.log_lambda();
        let near_centroid = self.near_centroid(eta_in);
        let min_log_ratio = min_gap(eta_in);

        let (eta, tie_adjusted) = self.separate_ties(eta_in);
        let Some(eta) = eta else {
            // Every entry equal: the integrand is constant, so 1/C = λ / (K-1)!.
            let mean_eta = eta_in.iter().sum::<f64>() / k as f64;
            return Evaluation {
                eta: eta_in.to_vec(),
                nodes: eta_in.to_vec(),
                accurate: None,
                scaled: vec![1.0 / k as f64; k],
                log_scale: mean_eta - ln_factorial(k - 1),
                total: 1.0,
                diag: EvalDiagnostics {
                    condition_number: 1.0,
                    near_centroid,
                    tie_adjusted,
                    min_log_ratio,
                },
                uniform: true,
            };
        };

        // Divided-difference convention: sign flips relative to `raw_terms` by (-1)^{K-1}.
        let flip = if k % 2 == 1 { 1.0 } else { -1.0 };
        let terms = raw_terms(&eta);
        let log_scale = terms
            .iter()
            .map(|t| t.log_magnitude)
            .fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = terms
            .iter()
            .map(|t| flip * t.sign * (t.log_magnitude - log_scale).exp())
            .collect();

        let mut by_magnitude = scaled.clone();
        by_magnitude.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
        let total = neumaier_sum(by_magnitude.iter().copied());
        let abs_total: f64 = by_magnitude.iter().map(|s| s.abs()).sum();
        let condition_number = if total == 0.0 {
            f64::INFINITY
        } else {
            abs_total / total.abs()
        };

        let accurate = match self.method {
            NormalizerMethod::Accurate => Some(divdiff::log_exp_divided_difference(eta_in)),
            NormalizerMethod::ClosedForm => None,
        };
        Evaluation {
            eta,
            nodes: eta_in.to_vec(),
            accurate,
            scaled,
            log_scale,
            total,
            diag: EvalDiagnostics {
                condition_number,
                near_centroid,
                tie_adjusted,
                min_log_ratio,
            },
            uniform: false,
        }
    }

    fn near_centroid(&self, eta: &[f64]) -> bool {
        let k = eta.len() as f64;
        let lse = log_sum_exp(eta);
        eta.iter()
            .map(|e| (k * (e - lse).exp() - 1.0).abs())
            .fold(0.0, f64::max)
            < self.centroid_threshold
    }
}

fn raw_terms(eta: &[f64]) -> Vec<SignedLogTerm> {
    (0..eta.len())
        .map(|k| {
            let mut negatives = 0usize;
            let mut log_denominator = 0.0;
            for (i, e) in eta.iter().enumerate() {
                if i == k {
                    continue;
                }
                let diff = e - eta[k];
                if diff < 0.0 {
                    negatives += 1;
                }
                log_denominator += diff.abs().ln();
            }
            SignedLogTerm {
                sign: if negatives.is_multiple_of(2) { 1.0 } else { -1.0 },
                log_magnitude: eta[k] - log_denominator,
            }
        })
        .collect()
}

/// `∂ log(1/C) / ∂η_k` from the divided-difference terms:
/// `∂F/∂η_k = g_k + Σ_{j≠k} (g_j + g_k) / (η_j - η_k)` with `F = Σ g`.
///
/// The accurate route uses `∂/∂η_k exp[η] = exp[η, η_k]`.
fn mean_from(eval: &Evaluation) -> Result<Vec<f64>> {
    let log_f = eval.log_inv_norm_const()?;
    let k = eval.eta.len();
    if eval.uniform {
        return Ok(vec![1.0 / k as f64; k]);
    }
    if eval.accurate.is_some() {
        let mut nodes = eval.nodes.clone();
        nodes.push(0.0);
        return Ok((0..k)
            .map(|kk| {
                nodes[k] = eval.nodes[kk];
                (divdiff::log_exp_divided_difference(&nodes) - log_f).exp()
            })
            .collect());
    }
    let g = &eval.scaled;
    let eta = &eval.eta;
    Ok((0..k)
        .map(|kk| {
            let parts = std::iter::once(g[kk]).chain(
                (0..k)
                    .filter(|&j| j != kk)
                    .map(|j| (g[j] + g[kk]) / (eta[j] - eta[kk])),
            );
            neumaier_sum(parts) / eval.total
        })
        .collect())
}

fn min_gap(eta: &[f64]) -> f64 {
    let mut sorted = eta.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

fn check_dims(params: &CcParams, y: &SimplexPoint) -> Result<()> {
    if params.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: y.dim(),
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// [`CcConfig::inv_norm_const_terms`] with default thresholds.
pub fn inv_norm_const_terms(params: &CcParams) -> Result<Vec<SignedLogTerm>> {
    CcConfig::default().inv_norm_const_terms(params)
}

/// [`CcConfig::log_norm_const`] with default thresholds.
pub fn log_norm_const(params: &CcParams) -> Result<(f64, EvalDiagnostics)> {
    CcConfig::default().log_norm_const(params)
}

/// [`CcConfig::nll`] with default thresholds.
pub fn cc_nll(params: &CcParams, y: &SimplexPoint) -> Result<f64> {
    CcConfig::default().nll(params, y)
}

/// [`CcConfig::grad_nll`] with default thresholds.
pub fn grad_cc_nll(params: &CcParams, y: &SimplexPoint) -> Result<NllGradient> {
    CcConfig::default().grad_nll(params, y)
}

/// [`CcConfig::mean`] with default thresholds.
pub fn cc_mean(params: &CcParams) -> Result<(Vec<f64>, EvalDiagnostics)> {
    CcConfig::default().mean(params)
}
