//! Value types for simplex-valued data and the elementary transforms on them.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on `|sum - 1|` accepted by [`SimplexPoint::new`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Smallest entry a [`PositiveComposition`] may hold.
pub const POSITIVE_FLOOR: f64 = 1e-300;

/// A point of the probability simplex: `K >= 2` non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidSimplex(format!(
                "need at least 2 entries, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidSimplex(format!("entry {bad} is negative or non-finite")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidSimplex(format!("entries sum to {sum}")));
        }
        Ok(Self(values))
    }

    /// The centroid `(1/K, ..., 1/K)`.
    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("K must be >= 2, got {k}")));
        }
        Ok(Self(vec![1.0 / k as f64; k]))
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= 2);
        Self(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest entry (lowest index on ties).
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

/// Strictly positive composition with cached natural logs.
///
/// The entries need not sum to one: the continuous-categorical density is
/// invariant to rescaling its parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveComposition {
    values: Vec<f64>,
    log_values: Vec<f64>,
}

impl PositiveComposition {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 entries, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values
            .iter()
            .find(|v| !v.is_finite() || **v < POSITIVE_FLOOR)
        {
            return Err(Error::InvalidParameter(format!(
                "entry {bad} is not a finite value >= {POSITIVE_FLOOR:e}"
            )));
        }
        let log_values = values.iter().map(|v| v.ln()).collect();
        Ok(Self { values, log_values })
    }

    /// Builds the composition from log-entries; logs below `ln(1e-300)` are clamped.
    pub fn from_log_values(log_values: Vec<f64>) -> Result<Self> {
        if log_values.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 entries, got {}",
                log_values.len()
            )));
        }
        let floor = POSITIVE_FLOOR.ln();
        let mut log_values = log_values;
        for lv in log_values.iter_mut() {
            if lv.is_nan() || *lv == f64::INFINITY {
                return Err(Error::InvalidParameter(format!("log-entry {lv} is not finite")));
            }
            if *lv < floor {
                *lv = floor;
            }
        }
        let values: Vec<f64> = log_values.iter().map(|lv| lv.exp()).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("log-entry overflows".into()));
        }
        Ok(Self { values, log_values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.log_values)
    }

    /// Renormalized copy as a simplex point.
    pub fn to_simplex(&self) -> SimplexPoint {
        let lse = log_sum_exp(&self.log_values);
        SimplexPoint::from_vec_unchecked(self.log_values.iter().map(|lv| (lv - lse).exp()).collect())
    }
}

/// A hard class label, i.e. a vertex `e_k` of the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneHotLabel {
    class_index: usize,
    k: usize,
}

impl OneHotLabel {
    pub fn new(class_index: usize, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("K must be >= 2, got {k}")));
        }
        if class_index >= k {
            return Err(Error::InvalidParameter(format!(
                "class index {class_index} out of range for K={k}"
            )));
        }
        Ok(Self { class_index, k })
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn to_simplex(&self) -> SimplexPoint {
        let mut v = vec![0.0; self.k];
        v[self.class_index] = 1.0;
        SimplexPoint::from_vec_unchecked(v)
    }
}

/// `(1 - epsilon) e_k + epsilon u`, with `u` the centroid unless given.
pub fn smooth_labels(
    y: OneHotLabel,
    epsilon: f64,
    u: Option<&SimplexPoint>,
) -> Result<SimplexPoint> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in [0, 1], got {epsilon}"
        )));
    }
    let k = y.dim();
    let mut out = match u {
        Some(u) => {
            if u.dim() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: u.dim(),
                });
            }
            u.values().iter().map(|v| epsilon * v).collect::<Vec<_>>()
        }
        None => vec![epsilon / k as f64; k],
    };
    out[y.class_index()] += 1.0 - epsilon;
    Ok(SimplexPoint::from_vec_unchecked(out))
}

/// Max-shifted softmax; the log-entries are the exact log-softmax values.
pub fn softmax(logits: &[f64]) -> Result<PositiveComposition> {
    if logits.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 logits, got {}",
            logits.len()
        )));
    }
    if let Some(bad) = logits.iter().find(|z| !z.is_finite()) {
        return Err(Error::InvalidParameter(format!("logit {bad} is not finite")));
    }
    let lse = log_sum_exp(logits);
    PositiveComposition::from_log_values(logits.iter().map(|z| z - lse).collect())
}

/// Uniform draw on the simplex from normalized standard-exponential spacings.
pub fn sample_uniform_simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<SimplexPoint> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("K must be >= 2, got {k}")));
    }
    let mut v = vec![0.0; k];
    fill_uniform_simplex(&mut v, rng);
    Ok(SimplexPoint::from_vec_unchecked(v))
}

/// Allocation-free variant of [`sample_uniform_simplex`] for hot loops.
#[inline]
pub(crate) fn fill_uniform_simplex<R: Rng + ?Sized>(out: &mut [f64], rng: &mut R) {
    let mut total = 0.0;
    for slot in out.iter_mut() {
        let e: f64 = Exp1.sample(rng);
        *slot = e;
        total += e;
    }
    let inv = 1.0 / total;
    for slot in out.iter_mut() {
        *slot *= inv;
    }
}

/// Clips entries below `floor` up to exactly `floor` and rescales the rest so
/// the result sums to one. Entries already at or above the floor pass through
/// untouched when nothing needs clipping.
pub fn project_to_positive(p: &SimplexPoint, floor: f64) -> Result<PositiveComposition> {
    let k = p.dim();
    if !(floor > 0.0) || floor * k as f64 >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "floor must satisfy 0 < floor * K < 1, got floor={floor}, K={k}"
        )));
    }
    let mut clipped = vec![false; k];
    let mut out = p.values().to_vec();
    loop {
        let mut changed = false;
        for (v, c) in out.iter().zip(clipped.iter_mut()) {
            if !*c && *v < floor {
                *c = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let n_clipped = clipped.iter().filter(|c| **c).count() as f64;
        let free_mass: f64 = p
            .values()
            .iter()
            .zip(&clipped)
            .filter(|(_, c)| !**c)
            .map(|(v, _)| v)
            .sum();
        let scale = (1.0 - n_clipped * floor) / free_mass;
        for ((o, v), c) in out.iter_mut().zip(p.values()).zip(&clipped) {
            *o = if *c { floor } else { v * scale };
        }
    }
    PositiveComposition::from_values(out)
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}
