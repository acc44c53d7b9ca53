//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function takes plain numbers or comma-separated text and
//! returns a JSON string, so the page needs no generated type glue.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use contcat::cc::CcSampler;
use contcat::oracle::{median_condition_by_k, precision_probe, ProbeConfig};
use contcat::{CcConfig, CcParams, NormalizerMethod, SimplexPoint};

const MAX_SAMPLES: usize = 20_000;
const MIN_ACCEPTANCE: f64 = 1e-3;

#[derive(Debug, Serialize)]
pub struct Evaluation {
    pub log_c: f64,
    pub closed_form_log_c: Option<f64>,
    pub condition_number: f64,
    pub near_centroid: bool,
    pub tie_adjusted: bool,
    pub gradient_zeroed: bool,
    pub mean: Vec<f64>,
    pub nll: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Samples {
    pub k: usize,
    pub acceptance_rate: f64,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct ProbeSummary {
    pub k: usize,
    pub median_condition_number: f64,
    pub max_condition_number: f64,
}

fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("cannot parse `{s}`")))
        .collect()
}

fn params(lambda: &str) -> Result<CcParams, String> {
    CcParams::new(parse_list(lambda)?).map_err(|e| e.to_string())
}

/// Normalizer, diagnostics and mean for `lambda`, plus the negative
/// log-density at `y` when `y` is non-empty.
pub fn evaluate_params(lambda: &str, y: &str) -> Result<Evaluation, String> {
    let params = params(lambda)?;
    let config = CcConfig::default();
    let (log_c, diag) = config.log_norm_const(&params).map_err(|e| e.to_string())?;
    let closed = CcConfig {
        method: NormalizerMethod::ClosedForm,
        ..CcConfig::default()
    };
    let closed_diag = closed.diagnostics(&params);
    let closed_form_log_c = closed.log_norm_const(&params).ok().map(|(v, _)| v);
    let (mean, _) = config.mean(&params).map_err(|e| e.to_string())?;
    let nll = if y.trim().is_empty() {
        None
    } else {
        let point = SimplexPoint::new(parse_list(y)?).map_err(|e| e.to_string())?;
        Some(config.nll(&params, &point).map_err(|e| e.to_string())?)
    };
    Ok(Evaluation {
        log_c,
        closed_form_log_c,
        condition_number: closed_diag.condition_number,
        near_centroid: diag.near_centroid,
        tie_adjusted: diag.tie_adjusted,
        gradient_zeroed: config.in_unstable_region(&closed_diag),
        mean,
        nll,
    })
}

/// `n` exact draws from CC(`lambda`).
pub fn draw_samples(lambda: &str, n: usize, seed: u64) -> Result<Samples, String> {
    if n > MAX_SAMPLES {
        return Err(format!("at most {MAX_SAMPLES} samples per request"));
    }
    let params = params(lambda)?;
    let sampler = CcSampler::new(&params, MIN_ACCEPTANCE).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n).map(|_| sampler.sample(&mut rng).into_vec()).collect();
    Ok(Samples {
        k: params.dim(),
        acceptance_rate: sampler.acceptance_rate(),
        points,
    })
}

/// Condition number of the closed-form sum across dimensions.
pub fn probe_dimensions(k_values: &str, trials: usize, seed: u64) -> Result<Vec<ProbeSummary>, String> {
    let k_values = parse_list(k_values)?
        .into_iter()
        .map(|k| {
            if k.fract() == 0.0 && (2.0..=40.0).contains(&k) {
                Ok(k as usize)
            } else {
                Err(format!("K must be an integer in 2..=40, got {k}"))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    if k_values.is_empty() {
        return Err("the K list is empty".into());
    }
    let rows = precision_probe(&ProbeConfig {
        k_values,
        trials: trials.clamp(1, 200),
        seed,
        oracle_samples: 0,
    })
    .map_err(|e| e.to_string())?;
    Ok(median_condition_by_k(&rows)
        .into_iter()
        .map(|(k, median)| ProbeSummary {
            k,
            median_condition_number: median,
            max_condition_number: rows
                .iter()
                .filter(|r| r.k == k)
                .map(|r| r.condition_number)
                .fold(0.0, f64::max),
        })
        .collect())
}

fn to_js<T: Serialize>(result: Result<T, String>) -> Result<String, JsError> {
    let value = result.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn evaluate(lambda: &str, y: &str) -> Result<String, JsError> {
    to_js(evaluate_params(lambda, y))
}

#[wasm_bindgen]
pub fn sample(lambda: &str, n: usize, seed: u64) -> Result<String, JsError> {
    to_js(draw_samples(lambda, n, seed))
}

#[wasm_bindgen]
pub fn probe(k_values: &str, trials: usize, seed: u64) -> Result<String, JsError> {
    to_js(probe_dimensions(k_values, trials, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_a_known_parameter() {
        let e = evaluate_params("0.8, 0.2", "0.5,0.5").unwrap();
        assert!((e.log_c - 0.8374598837442717).abs() < 1e-12);
        assert!((e.closed_form_log_c.unwrap() - e.log_c).abs() < 1e-12);
        assert!(!e.near_centroid && !e.gradient_zeroed);
        assert!((e.mean.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(e.nll.is_some());
    }

    #[test]
    fn centroid_is_flagged() {
        let e = evaluate_params("1,1,1", "").unwrap();
        assert!((e.log_c - 2f64.ln()).abs() < 1e-12);
        assert!(e.near_centroid && e.gradient_zeroed);
        assert!(e.nll.is_none());
    }

    #[test]
    fn bad_input_is_reported() {
        assert!(evaluate_params("0.8,x", "").is_err());
        assert!(evaluate_params("0.8,-0.2", "").is_err());
        assert!(evaluate_params("0.8,0.2", "0.5,0.6").is_err());
        assert!(draw_samples("0.5,0.5", MAX_SAMPLES + 1, 0).is_err());
        assert!(probe_dimensions("1,3", 5, 0).is_err());
        assert!(probe_dimensions("", 5, 0).is_err());
    }

    #[test]
    fn samples_are_reproducible_points_on_the_simplex() {
        let a = draw_samples("0.2,0.3,0.5", 100, 9).unwrap();
        let b = draw_samples("0.2,0.3,0.5", 100, 9).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.k, 3);
        for p in &a.points {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn probe_reports_one_summary_per_dimension() {
        let s = probe_dimensions("3,9", 10, 1).unwrap();
        assert_eq!(s.iter().map(|r| r.k).collect::<Vec<_>>(), vec![3, 9]);
        assert!(s[0].median_condition_number < s[1].median_condition_number);
    }

    #[test]
    fn json_shape() {
        let v: serde_json::Value = serde_json::to_value(evaluate_params("0.8,0.2", "").unwrap()).unwrap();
        for key in ["log_c", "condition_number", "near_centroid", "mean", "gradient_zeroed"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
