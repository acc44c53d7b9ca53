//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ndarray::{array, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use contcat::cc::{cc_mean, CcSampler, DEFAULT_MIN_ACCEPTANCE, cc_nll, grad_cc_nll, log_norm_const, CcConfig, CcParams};
use contcat::labsmooth::{
    cluster_geometry, make_blobs, plane_basis, project_representation, wcss_bcss, BlobsSpec,
};
use contcat::mimic::{
    default_games, expert_policy, greedy_agreement, mimic_loss, train_mimic, value_iteration,
    MimicConfig, MimicLoss, MimicMode, TabularGame,
};
use contcat::minitrain::{
    batch_loss, gradcheck, train, LabelMode, LossKind, NetworkSpec, TrainConfig,
};
use contcat::numeric::{derive_seed, median};
use contcat::oracle::{
    closed_form_k2, mc_inv_norm_const, median_condition_by_k,
    near_centroid_lambda, precision_probe, uniform_limit_log_c, ProbeConfig, 
};
use contcat::simplex::{sample_uniform_simplex, SimplexPoint};

type Outcome = Result<String, String>;
type Criterion<'a> = (u32, &'static str, Box<dyn Fn() -> Outcome + 'a>);

fn rng(tag: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(20_240_601, tag))
}

fn random_lambda<R: Rng>(k: usize, r: &mut R) -> CcParams {
    let p = sample_uniform_simplex(k, r).unwrap().into_vec();
    CcParams::new(p.into_iter().map(|v| v.max(1e-12)).collect()).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Two-sided threshold giving 500 comparisons the same family-wise false-alarm
/// rate (0.27%) as a single 3-stderr comparison.
const FAMILY_Z: f64 = 4.5486;

fn oracle_agreement() -> Outcome {
    let mut worst = 0.0f64;
    let mut misses = Vec::new();
    for k in 2..=6 {
        for i in 0..100 {
            let mut r = rng(&[1, k as u64, i]);
            let params = random_lambda(k, &mut r);
            let analytic = (-log_norm_const(&params).map_err(|e| e.to_string())?.0).exp();
            let mc = mc_inv_norm_const(&params, 1_000_000, &mut r).map_err(|e| e.to_string())?;
            let z = mc.z_score(analytic).abs();
            worst = worst.max(z);
            if z > 3.0 {
                misses.push(format!("K={k} #{i} z={z:.2}"));
            }
        }
    }
    ensure(worst <= FAMILY_Z, || {
        format!("max |z| = {worst:.2} exceeds {FAMILY_Z:.2}; beyond 3 stderr: {}", misses.join(", "))
    })?;
    Ok(format!(
        "500 parameters, max |z| = {worst:.2} <= {FAMILY_Z:.2}; {} beyond 3 stderr (1.35 expected by chance){}",
        misses.len(),
        if misses.is_empty() { String::new() } else { format!(": {}", misses.join(", ")) }
    ))
}

fn k2_closed_form() -> Outcome {
    let mut r = rng(&[2]);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < 100 {
        let a: f64 = r.random_range(1e-3..1.0);
        let b: f64 = r.random_range(1e-3..1.0);
        if a == b {
            continue;
        }
        let params = CcParams::new(vec![a, b]).unwrap();
        let value = (-log_norm_const(&params).map_err(|e| e.to_string())?.0).exp();
        let reference = (a - b) / (a / b).ln();
        let closed = closed_form_k2(&params).map_err(|e| e.to_string())?;
        worst = worst.max((value - reference).abs() / reference);
        worst = worst.max((value - closed).abs() / closed);
        done += 1;
    }
    ensure(worst < 1e-10, || format!("max relative error {worst:e}"))?;
    Ok(format!("100 pairs, max relative error {worst:.2e}"))
}

fn uniform_limit() -> Outcome {
    let mut details = Vec::new();
    for k in 2..=6 {
        let params = CcParams::new(vec![1.0 / k as f64; k]).unwrap();
        let (log_c, _) = log_norm_const(&params).map_err(|e| e.to_string())?;
        let expected = uniform_limit_log_c(k);
        ensure((log_c - expected).abs() < 1e-12, || format!("K={k}: {log_c} vs {expected}"))?;
        let mc = mc_inv_norm_const(&params, 1_000_000, &mut rng(&[3, k as u64]))
            .map_err(|e| e.to_string())?;
        let z = mc.z_score((-log_c).exp());
        ensure(z.abs() <= 3.0, || format!("K={k}: Monte Carlo z = {z}"))?;
        details.push(format!("K={k} ok"));
    }
    Ok(details.join(", "))
}

fn invariances() -> Outcome {
    let mut worst_scale = 0.0f64;
    let mut worst_perm = 0.0f64;
    for k in 2..=6 {
        for i in 0..100 {
            let mut r = rng(&[4, k as u64, i]);
            let params = random_lambda(k, &mut r);
            let (base, _) = log_norm_const(&params).map_err(|e| e.to_string())?;
            for c in [0.5, 2.0, 10.0] {
                let scaled = CcParams::new(params.lambda().iter().map(|v| c * v).collect()).unwrap();
                let (v, _) = log_norm_const(&scaled).map_err(|e| e.to_string())?;
                worst_scale = worst_scale.max((v - (base - f64::ln(c))).abs());
            }
            let mut perm = params.lambda().to_vec();
            perm.rotate_left(1 + i as usize % (k - 1));
            perm.swap(0, k - 1);
            let (v, _) = log_norm_const(&CcParams::new(perm).unwrap()).map_err(|e| e.to_string())?;
            worst_perm = worst_perm.max((v - base).abs());
        }
    }
    ensure(worst_scale < 1e-10 && worst_perm < 1e-10, || {
        format!("scale {worst_scale:e}, permutation {worst_perm:e}")
    })?;
    Ok(format!("500 parameters, scale {worst_scale:.1e}, permutation {worst_perm:.1e}"))
}

fn gradients() -> Outcome {
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut attempt = 0u64;
    while count < 100 {
        attempt += 1;
        let mut r = rng(&[5, attempt]);
        let k = r.random_range(2..=6usize);
        let params = random_lambda(k, &mut r);
        let y = sample_uniform_simplex(k, &mut r).unwrap();
        let grad = grad_cc_nll(&params, &y).map_err(|e| e.to_string())?;
        if grad.zeroed {
            continue;
        }
        let eta = params.log_lambda().to_vec();
        let numeric: Vec<f64> = (0..k)
            .map(|j| {
                let mut up = eta.clone();
                let mut down = eta.clone();
                up[j] += h;
                down[j] -= h;
                let f = |e: Vec<f64>| cc_nll(&CcParams::from_log_values(e).unwrap(), &y).unwrap();
                (f(up) - f(down)) / (2.0 * h)
            })
            .collect();
        let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-8);
        let err = grad
            .gradient
            .iter()
            .zip(&numeric)
            .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()))
            / scale;
        worst = worst.max(err);
        count += 1;
    }
    ensure(worst < 1e-5, || format!("grad_cc_nll max relative error {worst:e}"))?;

    let mut r = rng(&[5, 0]);
    let net = NetworkSpec::new(4, 3).dense(6).tanh().build(&mut r).unwrap();
    let x = Array2::from_shape_fn((6, 4), |_| r.random_range(-1.5..1.5));
    let targets: Vec<SimplexPoint> = (0..6).map(|_| sample_uniform_simplex(3, &mut r).unwrap()).collect();
    let mut net_errors = Vec::new();
    for kind in [LossKind::CrossEntropy, LossKind::ContinuousCategorical] {
        let config = TrainConfig {
            loss_kind: kind,
            ..TrainConfig::default()
        };
        let report = gradcheck(&net, &x, &targets, &config, 1e-5);
        ensure(report.max_rel_error < 1e-4, || format!("{kind:?} network gradcheck {report:?}"))?;
        net_errors.push(format!("{kind:?} {:.1e}", report.max_rel_error));
    }
    Ok(format!("cc max rel {worst:.1e}; network {}", net_errors.join(", ")))
}

fn mean_parameter() -> Outcome {
    let n = 100_000;
    let mut worst = 0.0f64;
    let mut done = 0;
    let mut attempt = 0u64;
    while done < 10 {
        attempt += 1;
        let mut r = rng(&[6, attempt]);
        let params = random_lambda(3, &mut r);
        let Ok(sampler) = CcSampler::new(&params, DEFAULT_MIN_ACCEPTANCE) else {
            continue;
        };
        let (mean, _) = cc_mean(&params).map_err(|e| e.to_string())?;
        let mut sum = [0.0; 3];
        let mut sum_sq = [0.0; 3];
        for _ in 0..n {
            for (j, v) in sampler.sample(&mut r).values().iter().enumerate() {
                sum[j] += v;
                sum_sq[j] += v * v;
            }
        }
        for j in 0..3 {
            let m = sum[j] / n as f64;
            let se = ((sum_sq[j] / n as f64 - m * m) / (n - 1) as f64).sqrt();
            let z = ((m - mean[j]) / se).abs();
            worst = worst.max(z);
            ensure(z <= 3.0, || format!("λ #{attempt} coordinate {j}: {m} vs {} (z = {z:.2})", mean[j]))?;
        }
        done += 1;
    }
    Ok(format!("10 parameters, {n} draws each, max |z| = {worst:.2}"))
}

fn instability() -> Outcome {
    let rows = precision_probe(&ProbeConfig {
        k_values: vec![3, 6, 9, 12, 15],
        trials: 50,
        seed: 7,
        oracle_samples: 10_000,
    })
    .map_err(|e| e.to_string())?;
    let medians = median_condition_by_k(&rows);
    ensure(medians.windows(2).all(|w| w[0].1 <= w[1].1), || format!("medians {medians:?}"))?;

    let lambda = near_centroid_lambda(3, 1e-4, &mut rng(&[7]));
    let params = CcParams::new(lambda).unwrap();
    let closed = CcConfig {
        method: contcat::NormalizerMethod::ClosedForm,
        ..CcConfig::default()
    };
    let diag = closed.diagnostics(&params);
    ensure(diag.near_centroid && diag.condition_number > 1e3, || format!("{diag:?}"))?;
    let y = SimplexPoint::new(vec![0.2, 0.3, 0.5]).unwrap();
    let grad = grad_cc_nll(&params, &y).map_err(|e| e.to_string())?;
    ensure(grad.zeroed, || "zeroing policy inactive at the near-centroid fixture".into())?;
    let summary: Vec<String> = medians.iter().map(|(k, m)| format!("K={k} {m:.1e}")).collect();
    Ok(format!(
        "medians {}; fixture condition {:.1e}",
        summary.join(" "),
        diag.condition_number
    ))
}

fn loss_identities() -> Outcome {
    let cc = CcConfig::default();
    let spec = BlobsSpec {
        n_per_class: 50,
        ..BlobsSpec::default()
    };
    let split = make_blobs(&spec).map_err(|e| e.to_string())?;
    let net = NetworkSpec::desk_default(spec.d, spec.k, false, false)
        .build(&mut rng(&[8]))
        .map_err(|e| e.to_string())?;
    let outputs = net.predict(&split.train.features).map_err(|e| e.to_string())?;
    let smoothed = TrainConfig {
        label_mode: LabelMode::Smoothed { epsilon: 0.1 },
        ..TrainConfig::default()
    };
    let targets = smoothed
        .targets(&split.train.labels, spec.k)
        .map_err(|e| e.to_string())?;
    let ls = batch_loss(LossKind::CrossEntropy, &cc, &outputs, &targets).map_err(|e| e.to_string())?;
    let cc_ls =
        batch_loss(LossKind::ContinuousCategorical, &cc, &outputs, &targets).map_err(|e| e.to_string())?;
    let mean_neg_log_c = outputs
        .iter()
        .map(|o| -log_norm_const(&CcParams::from_composition(o.clone())).unwrap().0)
        .sum::<f64>()
        / outputs.len() as f64;
    let d_ls = (cc_ls.mean - ls.mean - mean_neg_log_c).abs();
    ensure(d_ls < 1e-10, || format!("CC-LS identity off by {d_ls:e}"))?;

    let amn = mimic_loss(&outputs, &targets, MimicLoss::Amn, &cc).map_err(|e| e.to_string())?;
    let cc_amn = mimic_loss(&outputs, &targets, MimicLoss::CcAmn, &cc).map_err(|e| e.to_string())?;
    let d_amn = (cc_amn - amn - mean_neg_log_c).abs();
    ensure(d_amn < 1e-10, || format!("CC-AMN identity off by {d_amn:e}"))?;

    let base = TrainConfig {
        epochs: 5,
        seed: 3,
        ..TrainConfig::default()
    };
    let zero_ls = TrainConfig {
        label_mode: LabelMode::Smoothed { epsilon: 0.0 },
        ..base.clone()
    };
    let a = train(net.clone(), &split, &base).map_err(|e| e.to_string())?;
    let b = train(net, &split, &zero_ls).map_err(|e| e.to_string())?;
    ensure(a.metrics == b.metrics && a.net == b.net, || "ε=0 diverged from the baseline".into())?;
    Ok(format!("CC-LS {d_ls:.1e}, CC-AMN {d_amn:.1e}, ε=0 run identical"))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_contcat")
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`contcat {}` exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn ablation_harness(dir: &Path) -> Outcome {
    let out = dir.join("ablate");
    let start = Instant::now();
    run_cli(&["ls-ablate", "--replicates", "3", "--seed", "0", "--output-dir", out.to_str().unwrap()])?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut table = csv::Reader::from_path(out.join("ablation.csv")).map_err(|e| e.to_string())?;
    let header: Vec<String> = table.headers().unwrap().iter().map(String::from).collect();
    let expected = ["config", "baseline_mean", "baseline_sd", "ls_mean", "ls_sd", "cc_ls_mean", "cc_ls_sd"];
    ensure(header == expected, || format!("table header {header:?}"))?;
    let rows: Vec<csv::StringRecord> = table.records().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    ensure(rows.len() == 8, || format!("{} table rows", rows.len()))?;

    let mut runs = csv::Reader::from_path(out.join("runs.csv")).map_err(|e| e.to_string())?;
    let mut n = 0;
    for rec in runs.deserialize::<std::collections::HashMap<String, String>>() {
        let rec = rec.map_err(|e| e.to_string())?;
        let initial: f64 = rec["initial_train_loss"].parse().map_err(|_| "bad loss".to_string())?;
        let last: f64 = rec["final_train_loss"].parse().map_err(|_| "bad loss".to_string())?;
        ensure(rec["error"].is_empty() && last < initial, || format!("run did not improve: {rec:?}"))?;
        n += 1;
    }
    ensure(n == 72, || format!("{n} runs instead of 72"))?;
    Ok(format!("72 runs, all decreased train loss, {elapsed:.0}s"))
}

fn representation() -> Outcome {
    let mut r = rng(&[10]);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let v: Vec<Array1<f64>> = (0..3)
            .map(|_| Array1::from_shape_fn(6, |_| r.random_range(-3.0..3.0)))
            .collect();
        let [e1, e2] = plane_basis(v[0].view(), v[1].view(), v[2].view()).map_err(|e| e.to_string())?;
        worst = worst
            .max((e1.dot(&e1) - 1.0).abs())
            .max((e2.dot(&e2) - 1.0).abs())
            .max(e1.dot(&e2).abs());
    }
    ensure(worst < 1e-10, || format!("orthonormality error {worst:e}"))?;

    let fixture = [[0.0, 0.0], [0.0, 2.0], [10.0, 0.0], [10.0, 2.0]];
    let ratio = wcss_bcss(&fixture, &[0, 0, 1, 1]).map_err(|e| e.to_string())?;
    ensure(ratio == 0.04, || format!("fixture ratio {ratio}"))?;

    let points: Vec<[f64; 2]> = (0..30).map(|_| [r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)]).collect();
    let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let base = wcss_bcss(&points, &labels).map_err(|e| e.to_string())?;
    let (s, c) = 1.1f64.sin_cos();
    let moved: Vec<[f64; 2]> = points
        .iter()
        .map(|p| [c * p[0] - s * p[1] + 7.0, s * p[0] + c * p[1] - 3.0])
        .collect();
    let drift = (wcss_bcss(&moved, &labels).map_err(|e| e.to_string())? - base).abs();
    ensure(drift < 1e-9, || format!("rigid motion changed the ratio by {drift:e}"))?;

    let spec = BlobsSpec {
        k: 4,
        d: 8,
        n_per_class: 300,
        separation: 10.0,
        noise_sd: 1.0,
        seed: 4,
    };
    let split = make_blobs(&spec).map_err(|e| e.to_string())?;
    let net = NetworkSpec::desk_default(spec.d, spec.k, false, false)
        .build(&mut rng(&[10, 1]))
        .map_err(|e| e.to_string())?;
    let config = TrainConfig {
        epochs: 30,
        ..TrainConfig::default()
    };
    let trained = train(net, &split, &config).map_err(|e| e.to_string())?;
    let report = project_representation(&trained.net, &split, [0, 1, 2], 50).map_err(|e| e.to_string())?;
    for split_name in ["train", "test"] {
        let (xy, labels) = report.split_points(split_name);
        let geometry = cluster_geometry(&xy, &labels).map_err(|e| e.to_string())?;
        ensure(geometry.separated(), || format!("{split_name} clusters overlap: {geometry:?}"))?;
    }
    Ok(format!(
        "orthonormality {worst:.1e}, fixture 0.04, rigid drift {drift:.1e}, clusters separated"
    ))
}

fn experts(games: &[TabularGame], t: f64) -> Vec<contcat::mimic::ExpertPolicy> {
    games
        .iter()
        .map(|g| expert_policy(&value_iteration(g).unwrap(), t).unwrap())
        .collect()
}

fn mimic_harness() -> Outcome {
    let transitions = vec![
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![0.0, 1.0], vec![0.0, 1.0]],
    ];
    let g = TabularGame::new(0, transitions, array![[0.0, 1.0], [0.0, 0.0]], 0.9, &[1], 0)
        .map_err(|e| e.to_string())?;
    let q = value_iteration(&g).map_err(|e| e.to_string())?;
    ensure((q[[0, 1]] - 1.0).abs() < 1e-8 && (q[[0, 0]] - 0.9).abs() < 1e-8, || format!("{q:?}"))?;

    let games = default_games();
    let cool = experts(&games, 1.0);
    let mut agreements = Vec::new();
    for seed in 0..5 {
        let config = MimicConfig {
            seed,
            eval_episodes: 1,
            ..MimicConfig::default()
        };
        let out = train_mimic(&games, &cool, &config, MimicMode::SingleTask(0)).map_err(|e| e.to_string())?;
        let table = out.policy_table(0).map_err(|e| e.to_string())?;
        agreements.push(greedy_agreement(&table, &cool[0], &games[0]));
    }
    let med = median(&agreements);
    ensure(med >= 0.9, || format!("median agreement {med} ({agreements:?})"))?;

    let hot = experts(&games, 5.0);
    let config = MimicConfig {
        loss: MimicLoss::CcAmn,
        eval_episodes: 1,
        ..MimicConfig::default()
    };
    let out = train_mimic(&games, &hot, &config, MimicMode::SingleTask(0)).map_err(|e| e.to_string())?;
    let zeroed = out.metrics.iter().map(|m| m.zeroed_grad_fraction).fold(0.0, f64::max);
    ensure(zeroed > 0.0, || "no zeroed gradients under CC-AMN with hot experts".into())?;

    let short = MimicConfig {
        loss: MimicLoss::CcAmn,
        epochs: 10,
        ..MimicConfig::default()
    };
    let single = train_mimic(&games, &cool, &short, MimicMode::SingleTask(1)).map_err(|e| e.to_string())?;
    let multi = train_mimic(&games[1..], &cool[1..], &short, MimicMode::MultiTask).map_err(|e| e.to_string())?;
    let same = single.metrics.iter().zip(&multi.metrics).all(|(a, b)| {
        (a.loss, a.eval_return_mean, a.eval_return_sd, a.kl_to_expert, a.zeroed_grad_fraction)
            == (b.loss, b.eval_return_mean, b.eval_return_sd, b.kl_to_expert, b.zeroed_grad_fraction)
    }) && single.metrics.len() == multi.metrics.len()
        && single.net == multi.net;
    ensure(same, || "single-task and one-game multi-task runs differ".into())?;
    Ok(format!("median agreement {med:.3}, peak zeroed fraction {zeroed:.3}, L=1 identical"))
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism(dir: &Path) -> Outcome {
    let policy = dir.join("det-mimic-train-0").join("policy.csv");
    let commands: Vec<(&str, Vec<String>)> = vec![
        ("cc-check", vec!["--n-samples".into(), "20000".into(), "--seed".into(), "5".into()]),
        ("probe-precision", vec!["--k".into(), "3,6,9".into(), "--trials".into(), "5".into(), "--oracle-samples".into(), "10000".into()]),
        ("ls-ablate", vec!["--replicates".into(), "2".into(), "--epochs".into(), "3".into(), "--n-per-class".into(), "30".into(), "--seed".into(), "7".into()]),
        ("ls-project", vec!["--epochs".into(), "3".into(), "--blobs-per-class".into(), "100".into(), "--n-per-class".into(), "20".into()]),
        ("mimic-train", vec!["--mode".into(), "single-task".into(), "--game".into(), "0".into(), "--loss".into(), "cc-amn".into(), "--epochs".into(), "5".into()]),
        ("mimic-eval", vec!["--policy".into(), policy.to_string_lossy().into_owned(), "--episodes".into(), "50".into(), "--selection".into(), "sample".into()]),
    ];
    let mut checked = 0;
    for (cmd, extra) in &commands {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.join(format!("det-{cmd}-{run}"));
            let mut args: Vec<&str> = vec![cmd, "--output-dir", out.to_str().unwrap()];
            args.extend(extra.iter().map(String::as_str));
            run_cli(&args)?;
            let files = csv_files(&out);
            ensure(!files.is_empty(), || format!("{cmd} wrote no CSV"))?;
            ensure(out.join("manifest.json").exists(), || format!("{cmd} wrote no manifest"))?;
            outputs.push(files);
        }
        ensure(outputs[0] == outputs[1], || format!("{cmd} outputs differ between runs"))?;
        checked += outputs[0].len();
    }
    let a = run_cli(&["cc-eval", "0.1,0.3,0.6", "--y", "0.2,0.2,0.6"])?;
    let b = run_cli(&["cc-eval", "0.1,0.3,0.6", "--y", "0.2,0.2,0.6"])?;
    ensure(a == b, || "cc-eval output differs".into())?;
    Ok(format!("7 commands, {checked} CSV files byte-identical"))
}

fn main() {
    let dir = std::env::temp_dir().join(format!("contcat-acceptance-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    let criteria: Vec<Criterion> = vec![
        (1, "oracle agreement", Box::new(oracle_agreement)),
        (2, "K=2 closed form", Box::new(k2_closed_form)),
        (3, "uniform limit", Box::new(uniform_limit)),
        (4, "scale and permutation invariance", Box::new(invariances)),
        (5, "gradient correctness", Box::new(gradients)),
        (6, "mean parameter", Box::new(mean_parameter)),
        (7, "instability characterization", Box::new(instability)),
        (8, "loss identities", Box::new(loss_identities)),
        (9, "ablation harness", Box::new(|| ablation_harness(&dir))),
        (10, "representation analysis", Box::new(representation)),
        (11, "mimic harness", Box::new(mimic_harness)),
        (12, "determinism", Box::new(|| determinism(&dir))),
    ];
    let mut failed = 0;
    for (id, name, check) in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    let _ = fs::remove_dir_all(&dir);
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
