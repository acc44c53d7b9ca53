//! The continuous-categorical (CC) distribution on the probability simplex,
//! with desk-scale laboratories for CC label smoothing and CC actor-mimic
//! policy distillation.
//!
//! * [`simplex`]: value types for compositions and elementary transforms.
//! * [`cc`]: normalizing constant, log-likelihood, gradients, sampling.
//! * [`oracle`]: brute-force checks of [`cc`] and the precision probe.
//! * [`minitrain`]: a small dense-network trainer with CE and CC losses.
//! * [`labsmooth`]: label-smoothing ablation and representation analysis.
//! * [`mimic`]: tabular actor-mimic experiments.

pub mod cc;
pub mod error;
pub mod labsmooth;
pub mod mimic;
pub mod minitrain;
pub mod numeric;
pub mod oracle;
pub mod simplex;

pub use cc::{
    cc_mean, cc_nll, grad_cc_nll, inv_norm_const_terms, log_norm_const, sample_cc, CcConfig,
    CcParams, EvalDiagnostics, NllGradient, NormalizerMethod, SignedLogTerm,
};
pub use error::{Error, Result};
pub use simplex::{OneHotLabel, PositiveComposition, SimplexPoint};
