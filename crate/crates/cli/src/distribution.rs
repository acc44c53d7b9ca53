use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};

use contcat::oracle::{
    agreement_suite, median_condition_by_k, precision_probe, CheckConfig, CheckStatus, ProbeConfig,
};
use contcat::{CcConfig, CcParams, NormalizerMethod, SimplexPoint};

use crate::config::{init_threads, out_dir, parse_list, resolve, usage, write_csv, write_manifest, AcceptanceFailure};
use crate::Common;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Comma-separated positive entries of λ.
    #[arg(allow_hyphen_values = true)]
    lambda: String,
    /// Also print the negative log-density at this simplex point.
    #[arg(long, allow_hyphen_values = true)]
    y: Option<String>,
    /// How 1/C is computed: accurate or closed-form.
    #[arg(long, default_value = "accurate")]
    method: String,
}

pub fn cc_eval(args: &EvalArgs) -> Result<()> {
    let lambda = parse_list::<f64>(&args.lambda, "lambda")?;
    let method = match args.method.as_str() {
        "accurate" => NormalizerMethod::Accurate,
        "closed-form" => NormalizerMethod::ClosedForm,
        other => return Err(usage(format!("unknown method `{other}`"))),
    };
    let config = CcConfig {
        method,
        ..CcConfig::default()
    };
    let params = CcParams::new(lambda)?;
    let (log_c, diag) = config.log_norm_const(&params)?;
    let mut line = format!(
        "{log_c},{},{},{}",
        diag.condition_number, diag.near_centroid, diag.tie_adjusted
    );
    if let Some(y) = &args.y {
        let y = SimplexPoint::new(parse_list::<f64>(y, "y")?)?;
        line.push_str(&format!(",{}", config.nll(&params, &y)?));
    }
    println!("{line}");
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct CheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// Monte Carlo samples per case.
    #[arg(long)]
    n_samples: Option<usize>,
    /// Largest dimension checked (at most 6).
    #[arg(long = "k-max")]
    k_max: Option<usize>,
    /// Random parameters per dimension, besides the centroid.
    #[arg(long)]
    random_per_k: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckSettings {
    seed: u64,
    output_dir: String,
    threads: usize,
    n_samples: usize,
    k_max: usize,
    random_per_k: usize,
}

impl Default for CheckSettings {
    fn default() -> Self {
        let c = CheckConfig::default();
        Self {
            seed: c.seed,
            output_dir: "out/cc-check".into(),
            threads: 0,
            n_samples: c.n_samples,
            k_max: c.k_max,
            random_per_k: c.random_per_k,
        }
    }
}

pub fn cc_check(args: &CheckArgs) -> Result<()> {
    let s: CheckSettings = resolve(args.common.config.as_deref(), args)?;
    init_threads(s.threads)?;
    let rows = agreement_suite(&CheckConfig {
        k_max: s.k_max,
        n_samples: s.n_samples,
        random_per_k: s.random_per_k,
        seed: s.seed,
    })?;
    let dir = out_dir(&s.output_dir);
    write_manifest(&dir, "cc-check", s.seed, &s)?;
    write_csv(&dir.join("check.csv"), &rows)?;
    let mut bad = 0;
    for r in &rows {
        let tag = match r.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::StderrTooLarge => "WARN stderr too large for a meaningful check",
        };
        println!("{:<24} K={} discrepancy={:.3e}  {tag}", r.case, r.k, r.discrepancy);
        bad += usize::from(r.status != CheckStatus::Pass);
    }
    if bad > 0 {
        return Err(AcceptanceFailure(format!("{bad} of {} cases did not pass", rows.len())).into());
    }
    println!("all {} cases within tolerance", rows.len());
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct ProbeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    common: Common,
    /// Comma-separated dimensions, e.g. 3,6,9,12,15.
    #[arg(long = "k")]
    k: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Monte Carlo samples for the oracle deviation column (K <= 6).
    #[arg(long)]
    oracle_samples: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeSettings {
    seed: u64,
    output_dir: String,
    threads: usize,
    k: String,
    trials: usize,
    oracle_samples: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: "out/probe-precision".into(),
            threads: 0,
            k: "3,6,9,12,15".into(),
            trials: 50,
            oracle_samples: 100_000,
        }
    }
}

pub fn probe_precision(args: &ProbeArgs) -> Result<()> {
    let s: ProbeSettings = resolve(args.common.config.as_deref(), args)?;
    let k_values = parse_list::<usize>(&s.k, "K list")?;
    if k_values.is_empty() {
        return Err(usage("the K list is empty"));
    }
    init_threads(s.threads)?;
    let rows = precision_probe(&ProbeConfig {
        k_values,
        trials: s.trials,
        seed: s.seed,
        oracle_samples: s.oracle_samples,
    })?;
    let dir = out_dir(&s.output_dir);
    write_manifest(&dir, "probe-precision", s.seed, &s)?;
    write_csv(&dir.join("precision.csv"), &rows)?;
    let summary: Vec<String> = median_condition_by_k(&rows)
        .iter()
        .map(|(k, m)| format!("K={k}: {m:.3e}"))
        .collect();
    println!("median condition number  {}", summary.join("  "));
    Ok(())
}
