use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;
use crate::cc::{log_norm_const, CcParams};
use crate::simplex::SimplexPoint;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(&mut r))
}

fn small_net(seed: u64) -> Network {
    NetworkSpec::new(4, 3).dense(6).tanh().build(&mut rng(seed)).unwrap()
}

fn interior_targets(n: usize, k: usize, seed: u64) -> Vec<SimplexPoint> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| crate::simplex::sample_uniform_simplex(k, &mut r).unwrap())
        .collect()
}

fn cfg(kind: LossKind) -> TrainConfig {
    TrainConfig {
        loss_kind: kind,
        ..TrainConfig::default()
    }
}

/// Three well separated Gaussian clusters in 2-D.
fn separable_blobs(n_per_class: usize, seed: u64) -> Dataset {
    let centers = [[0.0, 6.0], [5.2, -3.0], [-5.2, -3.0]];
    let mut r = rng(seed);
    let mut x = Array2::zeros((3 * n_per_class, 2));
    let mut labels = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for i in 0..n_per_class {
            let row = c * n_per_class + i;
            for d in 0..2 {
                let z: f64 = StandardNormal.sample(&mut r);
                x[[row, d]] = center[d] + z;
            }
            labels.push(c);
        }
    }
    Dataset::new(x, labels, 3).unwrap()
}

#[test]
fn zero_head_gives_uniform_outputs() {
    let mut net = NetworkSpec::desk_default(5, 4, true, true)
        .build(&mut rng(1))
        .unwrap();
    net.zero_head();
    let x = normal_matrix(7, 5, 2);
    for out in net.predict(&x).unwrap() {
        assert!(out.values().iter().all(|v| (v - 0.25).abs() < 1e-15));
    }
    let (w, _) = net.head();
    assert!(w.iter().all(|v| *v == 0.0));
}

#[test]
fn eval_mode_is_repeatable_and_dropout_zero_is_identity() {
    let mut net = NetworkSpec::new(3, 3)
        .dense(8)
        .relu()
        .dropout(0.0)
        .dense(8)
        .relu()
        .build(&mut rng(3))
        .unwrap();
    let x = normal_matrix(5, 3, 4);
    let a = net.predict(&x).unwrap();
    let b = net.predict(&x).unwrap();
    assert_eq!(a, b);
    let (c, _) = net.forward(&x, Mode::Train, &mut rng(9)).unwrap();
    assert_eq!(a, c);
}

#[test]
fn forward_rejects_wrong_width() {
    let net = small_net(1);
    assert!(matches!(
        net.predict(&Array2::zeros((2, 5))),
        Err(crate::Error::Shape(_))
    ));
}

#[test]
fn cross_entropy_at_equality_is_entropy() {
    let mut net = small_net(5);
    let x = normal_matrix(4, 4, 6);
    let (outs, _) = net.forward(&x, Mode::Eval, &mut rng(0)).unwrap();
    let targets: Vec<SimplexPoint> = outs.iter().map(|o| o.to_simplex()).collect();
    let bl = batch_loss(
        LossKind::CrossEntropy,
        &Default::default(),
        &outs,
        &targets,
    )
    .unwrap();
    let entropy: f64 = outs
        .iter()
        .map(|o| -o.values().iter().map(|p| p * p.ln()).sum::<f64>())
        .sum::<f64>()
        / 4.0;
    assert!((bl.mean - entropy).abs() < 1e-12);
}

#[test]
fn cross_entropy_on_hard_labels_is_negative_log_probability() {
    let mut net = small_net(7);
    let x = normal_matrix(6, 4, 8);
    let labels = [0, 1, 2, 2, 1, 0];
    let config = cfg(LossKind::CrossEntropy);
    let targets = config.targets(&labels, 3).unwrap();
    let lg = loss_and_grad(&mut net, &x, &targets, &config, Mode::Eval, &mut rng(0)).unwrap();
    let expected = lg
        .outputs
        .iter()
        .zip(labels)
        .map(|(o, c)| -o.values()[c].ln())
        .sum::<f64>()
        / 6.0;
    assert!((lg.loss - expected).abs() < 1e-12);
}

#[test]
fn network_gradcheck_both_losses() {
    let net = small_net(11);
    let x = normal_matrix(5, 4, 12);
    let targets = interior_targets(5, 3, 13);
    for kind in [LossKind::CrossEntropy, LossKind::ContinuousCategorical] {
        let report = gradcheck(&net, &x, &targets, &cfg(kind), 1e-5);
        assert!(!report.flagged);
        assert!(report.max_rel_error < 1e-4, "{kind:?}: {report:?}");
    }
}

#[test]
fn gradcheck_covers_dropout_batchnorm_and_weight_decay() {
    let net = NetworkSpec::new(4, 3)
        .dense(5)
        .tanh()
        .dropout(0.3)
        .batchnorm()
        .dense(5)
        .tanh()
        .build(&mut rng(21))
        .unwrap();
    let x = normal_matrix(6, 4, 22);
    let targets = interior_targets(6, 3, 23);
    for kind in [LossKind::CrossEntropy, LossKind::ContinuousCategorical] {
        let config = TrainConfig {
            weight_decay: 0.05,
            ..cfg(kind)
        };
        let report = gradcheck(&net, &x, &targets, &config, 1e-5);
        assert!(report.max_rel_error < 1e-4, "{kind:?}: {report:?}");
    }
}

#[test]
fn gradcheck_flags_the_zeroing_region() {
    let mut net = small_net(31);
    net.zero_head();
    let x = normal_matrix(5, 4, 32);
    let targets = interior_targets(5, 3, 33);
    let report = gradcheck(&net, &x, &targets, &cfg(LossKind::ContinuousCategorical), 1e-5);
    assert!(report.flagged);
    assert_eq!(report.zeroed_samples, 5);
}

#[test]
fn zero_epochs_is_a_no_op() {
    let data = separable_blobs(10, 1);
    let split = Split {
        train: data.clone(),
        test: data,
    };
    let net = NetworkSpec::new(2, 3).dense(4).relu().build(&mut rng(2)).unwrap();
    let config = TrainConfig {
        epochs: 0,
        ..TrainConfig::default()
    };
    let out = train(net.clone(), &split, &config).unwrap();
    assert!(out.metrics.is_empty());
    assert_eq!(out.net, net);
}

#[test]
fn training_is_deterministic_and_learns_separable_blobs() {
    let data = separable_blobs(60, 4);
    let split = Split {
        train: data.clone(),
        test: separable_blobs(20, 5),
    };
    let config = TrainConfig {
        epochs: 50,
        batch_size: 32,
        learning_rate: 1e-2,
        seed: 3,
        dropout_on: true,
        ..TrainConfig::default()
    };
    let build = || {
        NetworkSpec::desk_default(2, 3, true, false)
            .build(&mut rng(6))
            .unwrap()
    };
    let a = train(build(), &split, &config).unwrap();
    let b = train(build(), &split, &config).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.metrics.len(), 50);
    assert!(a.metrics.last().unwrap().train_acc >= 0.95);
    assert!(a.metrics.last().unwrap().train_loss < a.initial_train_loss);
}

#[test]
fn cc_training_runs_with_smoothed_labels() {
    let data = separable_blobs(30, 8);
    let split = Split {
        train: data.clone(),
        test: data,
    };
    let config = TrainConfig {
        loss_kind: LossKind::ContinuousCategorical,
        label_mode: LabelMode::Smoothed { epsilon: 0.1 },
        epochs: 20,
        batch_size: 16,
        learning_rate: 1e-2,
        batchnorm_on: true,
        weight_decay: 1e-4,
        ..TrainConfig::default()
    };
    let net = NetworkSpec::desk_default(2, 3, false, true)
        .build(&mut rng(9))
        .unwrap();
    let out = train(net, &split, &config).unwrap();
    assert!(out.metrics.last().unwrap().train_loss < out.initial_train_loss);
    assert!(out.metrics.last().unwrap().train_acc > 0.9);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad_eps = TrainConfig {
        label_mode: LabelMode::Smoothed { epsilon: 1.5 },
        ..TrainConfig::default()
    };
    assert!(bad_eps.validate().is_err());
    let bad_lr = TrainConfig {
        learning_rate: 0.0,
        ..TrainConfig::default()
    };
    assert!(bad_lr.validate().is_err());
}

#[test]
fn weight_decay_contracts_only_the_head() {
    let mut net = small_net(41);
    let x = normal_matrix(5, 4, 42);
    // targets equal to the outputs make the cross-entropy gradient vanish
    let targets: Vec<SimplexPoint> = net
        .predict(&x)
        .unwrap()
        .iter()
        .map(|o| o.to_simplex())
        .collect();
    let (lr, wd) = (0.1, 0.5);
    let config = TrainConfig {
        weight_decay: wd,
        ..cfg(LossKind::CrossEntropy)
    };
    let before = net.clone();
    let mut opt = Optimizer::new(OptimizerKind::Sgd, lr, &net);
    let lg = loss_and_grad(&mut net, &x, &targets, &config, Mode::Eval, &mut rng(0)).unwrap();
    opt.step(&mut net, &lg.grads);
    let (w0, _) = before.head();
    let (w1, _) = net.head();
    for (a, b) in w0.iter().zip(w1.iter()) {
        assert!((b - (1.0 - lr * wd) * a).abs() < 1e-12);
    }
    let mut b = before.clone();
    let mut n = net.clone();
    let (pb, pn) = (b.params_mut(), n.params_mut());
    for (t, (u, v)) in pb.iter().zip(&pn).enumerate().take(pb.len() - 2) {
        for (a, c) in u.iter().zip(v.iter()) {
            assert!((a - c).abs() < 1e-12, "tensor {t} moved");
        }
    }
}

#[test]
fn batchnorm_eval_is_per_sample() {
    let mut net = NetworkSpec::new(3, 3)
        .dense(5)
        .batchnorm()
        .relu()
        .build(&mut rng(51))
        .unwrap();
    // move the running statistics away from their initial values
    for s in 0..5 {
        net.forward(&normal_matrix(8, 3, 60 + s), Mode::Train, &mut rng(s))
            .unwrap();
    }
    let x = normal_matrix(6, 3, 52);
    let full = net.predict(&x).unwrap();
    for i in 0..6 {
        let single = net.predict(&x.slice(ndarray::s![i..i + 1, ..]).to_owned()).unwrap();
        assert_eq!(single[0], full[i]);
    }
}

#[test]
fn adam_takes_bias_corrected_first_step() {
    let mut net = NetworkSpec::new(1, 2).build(&mut rng(1)).unwrap();
    let before = net.clone();
    let grads = Gradients(vec![vec![2.0, -3.0], vec![0.5, 0.0]]);
    let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1, &net);
    opt.step(&mut net, &grads);
    let (w0, b0) = before.head();
    let (w1, b1) = net.head();
    // first Adam step moves each coordinate by lr * sign(g)
    assert!((w1[[0, 0]] - (w0[[0, 0]] - 0.1)).abs() < 1e-7);
    assert!((w1[[0, 1]] - (w0[[0, 1]] + 0.1)).abs() < 1e-7);
    assert!((b1[0] - (b0[0] - 0.1)).abs() < 1e-7);
    assert_eq!(b1[1], b0[1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn head_bias_shift_leaves_outputs_unchanged(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let mut net = small_net(seed);
        let x = normal_matrix(3, 4, seed ^ 1);
        let a = net.predict(&x).unwrap();
        net.head_mut().1.mapv_inplace(|b| b + shift);
        let b = net.predict(&x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            for (p, q) in u.values().iter().zip(v.values()) {
                prop_assert!((p - q).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cc_minus_ce_is_mean_negative_log_c(seed in any::<u64>()) {
        let mut net = small_net(seed);
        let x = normal_matrix(8, 4, seed ^ 2);
        let targets = interior_targets(8, 3, seed ^ 3);
        let mut r = rng(0);
        let ce = loss_and_grad(&mut net, &x, &targets, &cfg(LossKind::CrossEntropy), Mode::Eval, &mut r).unwrap();
        let cc = loss_and_grad(&mut net, &x, &targets, &cfg(LossKind::ContinuousCategorical), Mode::Eval, &mut r).unwrap();
        let direct = ce
            .outputs
            .iter()
            .map(|o| -log_norm_const(&CcParams::from_composition(o.clone())).unwrap().0)
            .sum::<f64>()
            / 8.0;
        prop_assert!((cc.loss - ce.loss - direct).abs() < 1e-10);
    }
}
