use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minitrain::{Dataset, Split};

/// Isotropic Gaussian classes in `d` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobsSpec {
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    pub n_per_class: usize,
    /// Distance between class means.
    pub separation: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for BlobsSpec {
    fn default() -> Self {
        Self {
            k: 4,
            d: 8,
            n_per_class: 200,
            separation: 3.0,
            noise_sd: 1.0,
            seed: 0,
        }
    }
}

impl BlobsSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::InvalidParameter(format!("need K >= 3, got {}", self.k)));
        }
        if self.d < 2 {
            return Err(Error::InvalidParameter(format!("need d >= 2, got {}", self.d)));
        }
        if self.n_per_class < 5 {
            return Err(Error::InvalidParameter(
                "need at least 5 samples per class for an 80/20 split".into(),
            ));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "separation must be finite and non-negative, got {}",
                self.separation
            )));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise_sd must be positive, got {}",
                self.noise_sd
            )));
        }
        Ok(())
    }

    /// Class means. With `d >= K` they are `separation/√2 · e_k`, exactly
    /// `separation` apart; otherwise random directions rescaled to that mean
    /// pairwise distance.
    pub fn means(&self) -> Vec<Array1<f64>> {
        if self.d >= self.k {
            let scale = self.separation / std::f64::consts::SQRT_2;
            return (0..self.k)
                .map(|c| {
                    let mut m = Array1::zeros(self.d);
                    m[c] = scale;
                    m
                })
                .collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x6d65_616e);
        let raw: Vec<Array1<f64>> = (0..self.k)
            .map(|_| Array1::from_shape_fn(self.d, |_| StandardNormal.sample(&mut rng)))
            .collect();
        let mut total = 0.0;
        let mut pairs = 0.0;
        for a in 0..self.k {
            for b in a + 1..self.k {
                total += (&raw[a] - &raw[b]).mapv(|v| v * v).sum().sqrt();
                pairs += 1.0;
            }
        }
        let scale = self.separation / (total / pairs);
        raw.into_iter().map(|m| m * scale).collect()
    }
}

/// Samples the blobs and splits each class 80/20 into train and test.
pub fn make_blobs(spec: &BlobsSpec) -> Result<Split> {
    spec.validate()?;
    let means = spec.means();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_test = ((spec.n_per_class as f64) * 0.2).round() as usize;
    let n_train = spec.n_per_class - n_test;
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for (c, mean) in means.iter().enumerate() {
        let mut class_rows: Vec<Array1<f64>> = (0..spec.n_per_class)
            .map(|_| {
                mean + &Array1::from_shape_fn(spec.d, |_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    spec.noise_sd * z
                })
            })
            .collect();
        class_rows.shuffle(&mut rng);
        for (i, row) in class_rows.into_iter().enumerate() {
            if i < n_train {
                train_rows.push((row, c));
            } else {
                test_rows.push((row, c));
            }
        }
    }
    Ok(Split {
        train: to_dataset(train_rows, spec)?,
        test: to_dataset(test_rows, spec)?,
    })
}

fn to_dataset(rows: Vec<(Array1<f64>, usize)>, spec: &BlobsSpec) -> Result<Dataset> {
    let mut x = Array2::zeros((rows.len(), spec.d));
    let mut labels = Vec::with_capacity(rows.len());
    for (i, (row, c)) in rows.into_iter().enumerate() {
        x.row_mut(i).assign(&row);
        labels.push(c);
    }
    Dataset::new(x, labels, spec.k)
}

/// Test accuracy of the classifier that assigns each test point to the
/// nearest class mean estimated on the training set.
pub fn nearest_centroid_accuracy(split: &Split) -> f64 {
    let k = split.train.num_classes;
    let d = split.train.features.ncols();
    let mut centroids = Array2::<f64>::zeros((k, d));
    let mut counts = vec![0usize; k];
    for (row, &c) in split.train.features.rows().into_iter().zip(&split.train.labels) {
        let mut dst = centroids.row_mut(c);
        dst += &row;
        counts[c] += 1;
    }
    for (c, n) in counts.iter().enumerate() {
        if *n > 0 {
            centroids.row_mut(c).mapv_inplace(|v| v / *n as f64);
        }
    }
    let hits = split
        .test
        .features
        .rows()
        .into_iter()
        .zip(&split.test.labels)
        .filter(|(row, &c)| {
            let best = (0..k)
                .min_by(|&a, &b| {
                    let da = (&centroids.row(a) - row).mapv(|v| v * v).sum();
                    let db = (&centroids.row(b) - row).mapv(|v| v * v).sum();
                    da.total_cmp(&db)
                })
                .expect("K >= 1");
            best == c
        })
        .count();
    hits as f64 / split.test.len().max(1) as f64
}
