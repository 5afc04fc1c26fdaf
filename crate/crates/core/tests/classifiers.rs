use augbench::corpus::Label::{self, Negative as N, Positive as P};
use augbench::features::SparseVector;
use augbench::models::{
    fit, loss_and_gradient, ClassifierKind, ClassifierSpec, FittedModel, ForestParams, GbtParams, Hyperparams,
    LogRegParams, NaiveBayesParams,
};
use augbench::models::tree::Node;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sv(values: &[f64]) -> SparseVector<f64> {
    SparseVector::from_dense(values)
}

fn spec(h: Hyperparams, seed: u64) -> ClassifierSpec {
    ClassifierSpec::new(h, seed).unwrap()
}

#[test]
fn naive_bayes_matches_hand_posteriors() {
    // Two negatives on tokens 0 and 1, two positives on tokens 2 and 3.
    let x = vec![
        sv(&[1.0, 0.0, 0.0, 0.0]),
        sv(&[0.0, 1.0, 0.0, 0.0]),
        sv(&[0.0, 0.0, 1.0, 0.0]),
        sv(&[0.0, 0.0, 0.0, 1.0]),
    ];
    let y = [N, N, P, P];
    let model = fit(&spec(Hyperparams::NaiveBayes(NaiveBayesParams { alpha: 1.0 }), 0), &x, &y)
        .unwrap()
        .model;
    // Smoothed likelihoods: own tokens (1+1)/(2+4) = 1/3, others 1/6.
    let own: f64 = 2.0 / 6.0;
    let other: f64 = 1.0 / 6.0;
    let cases: [(Vec<f64>, f64); 4] = [
        (vec![1.0, 0.0, 0.0, 0.0], other / (own + other)),
        (vec![0.0, 0.0, 1.0, 0.0], own / (own + other)),
        (vec![1.0, 0.0, 1.0, 0.0], 0.5),
        (vec![0.0, 0.0, 0.0, 2.0], own * own / (own * own + other * other)),
    ];
    for (input, expected) in cases {
        let p = model.predict_proba(&sv(&input)).unwrap();
        assert!((p - expected).abs() < 1e-12, "{input:?}: {p} vs {expected}");
    }
    let FittedModel::NaiveBayes(nb) = model.model() else {
        panic!("expected naive Bayes");
    };
    assert!((nb.log_prior()[0] - 0.5f64.ln()).abs() < 1e-12);
    let post = nb.posterior(&sv(&[1.0, 0.0, 0.0, 0.0]));
    assert!((post[0] + post[1] - 1.0).abs() < 1e-12);
}

#[test]
fn naive_bayes_huge_alpha_predicts_prior() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<SparseVector<f64>> = (0..40).map(|_| sv(&[rng.random(), rng.random(), rng.random()])).collect();
    let y: Vec<Label> = (0..40).map(|i| if i % 4 == 0 { P } else { N }).collect();
    let model = fit(&spec(Hyperparams::NaiveBayes(NaiveBayesParams { alpha: 1e9 }), 0), &x, &y)
        .unwrap()
        .model;
    for _ in 0..50 {
        let probe = sv(&[rng.random::<f64>() * 5.0, rng.random(), rng.random::<f64>() * 5.0]);
        assert_eq!(model.predict(&probe).unwrap(), N);
        assert!((model.predict_proba(&probe).unwrap() - 0.25).abs() < 1e-6);
    }
}

fn random_problem(rng: &mut ChaCha8Rng) -> (Vec<f64>, f64, Vec<SparseVector<f64>>, Vec<f64>) {
    let d = rng.random_range(2..=6);
    let n = rng.random_range(3..=12);
    let x = (0..n)
        .map(|_| {
            let row: Vec<f64> = (0..d)
                .map(|_| if rng.random_bool(0.6) { rng.random_range(-2.0..2.0) } else { 0.0 })
                .collect();
            sv(&row)
        })
        .collect();
    let y = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
    let w = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    (w, rng.random_range(-1.0..1.0), x, y)
}

#[test]
fn logreg_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-5;
    for case in 0..10 {
        let (w, b, x, y) = random_problem(&mut rng);
        let l2 = rng.random_range(0.0..0.1);
        let (_, gw, gb) = loss_and_gradient(&w, b, &x, &y, l2);
        let mut analytic = gw.clone();
        analytic.push(gb);
        let mut numeric = Vec::new();
        for j in 0..=w.len() {
            let shifted = |delta: f64| {
                let mut w2 = w.clone();
                let mut b2 = b;
                if j < w.len() {
                    w2[j] += delta;
                } else {
                    b2 += delta;
                }
                loss_and_gradient(&w2, b2, &x, &y, l2).0
            };
            numeric.push((shifted(h) - shifted(-h)) / (2.0 * h));
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rel = diff / scale.max(1e-12);
        assert!(rel < 1e-4, "case {case}: relative error {rel}");
    }
}

#[test]
fn logreg_fits_separable_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..20 {
        let positive = i % 2 == 0;
        let a = rng.random_range(1.0..3.0) * if positive { 1.0 } else { -1.0 };
        x.push(sv(&[a, rng.random_range(-2.0..2.0)]));
        y.push(if positive { P } else { N });
    }
    let model = fit(&ClassifierSpec::default_for(ClassifierKind::LogReg, 0), &x, &y).unwrap().model;
    let preds = model.predict_all(&x).unwrap();
    let acc = preds.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
    assert!(acc >= 0.99, "training accuracy {acc}");
    let FittedModel::LogReg(lr) = model.model() else {
        panic!("expected logistic regression");
    };
    let h = lr.loss_history();
    assert!(h.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn single_stump_reproduces_threshold() {
    let xs = [0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9];
    let x: Vec<SparseVector<f64>> = xs.iter().map(|&v| sv(&[v])).collect();
    let y: Vec<Label> = xs.iter().map(|&v| if v > 0.5 { P } else { N }).collect();
    let params = ForestParams {
        n_trees: 1,
        max_depth: Some(1),
        bootstrap: false,
        ..ForestParams::default()
    };
    let model = fit(&spec(Hyperparams::RandomForest(params), 1), &x, &y).unwrap().model;
    let FittedModel::RandomForest(rf) = model.model() else {
        panic!("expected random forest");
    };
    match &rf.trees()[0].nodes()[0] {
        Node::Split { feature, threshold, .. } => {
            assert_eq!(*feature, 0);
            assert!((threshold - 0.5).abs() < 1e-12, "threshold {threshold}");
        }
        other => panic!("expected a split at the root, got {other:?}"),
    }
    assert_eq!(model.predict_all(&x).unwrap(), y);
}

#[test]
fn forest_vote_fraction_counts_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x: Vec<SparseVector<f64>> = (0..30).map(|_| sv(&[rng.random(), rng.random()])).collect();
    let y: Vec<Label> = x.iter().map(|v| if v.get(0) + 0.3 * v.get(1) > 0.6 { P } else { N }).collect();
    let params = ForestParams {
        n_trees: 3,
        ..ForestParams::default()
    };
    let model = fit(&spec(Hyperparams::RandomForest(params), 5), &x, &y).unwrap().model;
    let FittedModel::RandomForest(rf) = model.model() else {
        panic!("expected random forest");
    };
    for _ in 0..20 {
        let probe = sv(&[rng.random(), rng.random()]);
        let votes = rf.trees().iter().filter(|t| t.evaluate(&probe) == 1.0).count();
        assert_eq!(model.predict_proba(&probe).unwrap(), votes as f64 / 3.0);
    }
}

fn xor(rng: &mut ChaCha8Rng, n: usize) -> (Vec<SparseVector<f64>>, Vec<Label>) {
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        x.push(sv(&[a, b]));
        y.push(if (a > 0.0) != (b > 0.0) { P } else { N });
    }
    (x, y)
}

fn accuracy(model: &augbench::TrainedClassifier, x: &[SparseVector<f64>], y: &[Label]) -> f64 {
    let preds = model.predict_all(x).unwrap();
    preds.iter().zip(y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

#[test]
fn trees_learn_xor() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (x, y) = xor(&mut rng, 500);
    let (xt, yt) = xor(&mut rng, 500);
    for kind in [ClassifierKind::RandomForest, ClassifierKind::GradientBoostedTrees] {
        let model = fit(&ClassifierSpec::default_for(kind, 13), &x, &y).unwrap().model;
        let acc = accuracy(&model, &xt, &yt);
        assert!(acc >= 0.90, "{kind:?}: test accuracy {acc}");
    }
}

#[test]
fn gbt_training_loss_is_non_increasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (x, y) = xor(&mut rng, 300);
    let model = fit(&spec(Hyperparams::GradientBoostedTrees(GbtParams::default()), 0), &x, &y)
        .unwrap()
        .model;
    let FittedModel::GradientBoostedTrees(gbt) = model.model() else {
        panic!("expected boosted trees");
    };
    let loss = gbt.training_loss();
    assert_eq!(loss.len(), 101);
    for (i, w) in loss.windows(2).enumerate() {
        assert!(w[1] <= w[0] + 1e-12, "round {}: {} -> {}", i + 1, w[0], w[1]);
    }
    assert!(loss[100] < loss[0]);
}

#[test]
fn refits_are_byte_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (x, y) = xor(&mut rng, 200);
    let (probe, _) = xor(&mut rng, 50);
    let x: Vec<SparseVector<f64>> = x.iter().map(|v| sv(&[v.get(0).abs(), v.get(1).abs(), v.get(0) * v.get(1)])).collect();
    let probe: Vec<SparseVector<f64>> =
        probe.iter().map(|v| sv(&[v.get(0).abs(), v.get(1).abs(), v.get(0) * v.get(1)])).collect();
    let hyper = [
        Hyperparams::LogReg(LogRegParams::default()),
        Hyperparams::NaiveBayes(NaiveBayesParams::default()),
        Hyperparams::RandomForest(ForestParams::default()),
        Hyperparams::GradientBoostedTrees(GbtParams::default()),
    ];
    for h in hyper {
        let s = spec(h, 99);
        let a = fit(&s, &x, &y).unwrap().model;
        let b = fit(&s, &x, &y).unwrap().model;
        assert_eq!(a.to_json().to_string(), b.to_json().to_string(), "{:?}", s.kind());
        let pa: Vec<u64> = probe.iter().map(|p| a.predict_proba(p).unwrap().to_bits()).collect();
        let pb: Vec<u64> = probe.iter().map(|p| b.predict_proba(p).unwrap().to_bits()).collect();
        assert_eq!(pa, pb);
    }
}

#[test]
fn f32_models_train_too() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let (x, y) = xor(&mut rng, 300);
    let x32: Vec<SparseVector<f32>> = x
        .iter()
        .map(|v| SparseVector::from_dense(&[v.get(0) as f32, v.get(1) as f32]))
        .collect();
    let model = fit(&ClassifierSpec::default_for(ClassifierKind::RandomForest, 1), &x32, &y).unwrap().model;
    let preds = model.predict_all(&x32).unwrap();
    let acc = preds.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
    assert!(acc > 0.95);
}
