use ndarray::Array2;

use crate::error::{Error, Result};
use crate::simplex::{softmax, SimplexPoint};

/// Tie tolerance when reading off the set of greedy actions.
pub const ARGMAX_TOLERANCE: f64 = 1e-9;

/// Boltzmann policy over action values.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPolicy {
    pub q_values: Array2<f64>,
    pub temperature: f64,
    /// Rows are `softmax(Q[s, ·] / temperature)`.
    pub policy: Array2<f64>,
}

pub fn expert_policy(q_values: &Array2<f64>, temperature: f64) -> Result<ExpertPolicy> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let mut policy = Array2::zeros(q_values.raw_dim());
    for (s, row) in q_values.rows().into_iter().enumerate() {
        let scaled: Vec<f64> = row.iter().map(|q| q / temperature).collect();
        let p = softmax(&scaled)?;
        policy.row_mut(s).assign(&ndarray::ArrayView1::from(p.values()));
    }
    Ok(ExpertPolicy {
        q_values: q_values.clone(),
        temperature,
        policy,
    })
}

impl ExpertPolicy {
    pub fn n_states(&self) -> usize {
        self.policy.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.policy.ncols()
    }

    /// The policy row at `s` as a simplex point.
    pub fn guidance(&self, s: usize) -> SimplexPoint {
        SimplexPoint::new(self.policy.row(s).to_vec()).expect("softmax rows lie on the simplex")
    }
}

/// Actions whose probability is within tolerance of the row maximum.
pub fn argmax_set(row: &[f64]) -> Vec<usize> {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = ARGMAX_TOLERANCE * best.abs().max(1.0);
    (0..row.len()).filter(|&a| best - row[a] <= tol).collect()
}

/// First index of the row maximum.
pub fn greedy_action(row: &[f64]) -> usize {
    let mut best = 0;
    for (a, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = a;
        }
    }
    best
}
