use rand::Rng;

use super::{log_norm_const, CcParams};
use crate::error::{Error, Result};
use crate::numeric::ln_factorial;
use crate::simplex::{fill_uniform_simplex, SimplexPoint};

pub const DEFAULT_MIN_ACCEPTANCE: f64 = 1e-4;

/// Exact rejection sampler: uniform proposals on the simplex, accepted with
/// probability `∏ λ_k^{y_k} / max_k λ_k`.
#[derive(Debug, Clone)]
pub struct CcSampler {
    eta: Vec<f64>,
    eta_max: f64,
    acceptance_rate: f64,
}

impl CcSampler {
    pub fn new(params: &CcParams, min_acceptance: f64) -> Result<Self> {
        let eta = params.log_lambda().to_vec();
        let eta_max = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // E_uniform[∏ λ^y] = (K-1)! / C(λ)
        let (log_c, _) = log_norm_const(params)?;
        let acceptance_rate = (ln_factorial(eta.len() - 1) - log_c - eta_max).exp();
        if acceptance_rate < min_acceptance {
            return Err(Error::AcceptanceTooLow {
                rate: acceptance_rate,
                min: min_acceptance,
            });
        }
        Ok(Self {
            eta,
            eta_max,
            acceptance_rate,
        })
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.acceptance_rate
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SimplexPoint {
        let mut y = vec![0.0; self.eta.len()];
        loop {
            fill_uniform_simplex(&mut y, rng);
            let log_accept: f64 =
                y.iter().zip(&self.eta).map(|(a, b)| a * b).sum::<f64>() - self.eta_max;
            if log_accept >= 0.0 || rng.random::<f64>() < log_accept.exp() {
                return SimplexPoint::from_vec_unchecked(y);
            }
        }
    }
}

/// One draw with the default acceptance floor.
pub fn sample_cc<R: Rng + ?Sized>(params: &CcParams, rng: &mut R) -> Result<SimplexPoint> {
    Ok(CcSampler::new(params, DEFAULT_MIN_ACCEPTANCE)?.sample(rng))
}
