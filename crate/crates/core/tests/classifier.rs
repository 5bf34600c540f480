mod common;

use common::*;
use glaucoct::classifier::*;
use glaucoct::data::{FeatureMatrix, Label};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn gauss(r: &mut impl Rng) -> f64 {
    StandardNormal.sample(r)
}

fn random_labels(r: &mut impl Rng, n: usize) -> Vec<Label> {
    (0..n).map(|_| if r.random_bool(0.5) { Label::Glaucoma } else { Label::Normal }).collect()
}

#[test]
fn gradient_matches_central_differences() {
    let mut r = rng(41);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = r.random_range(1..6);
        let h = r.random_range(1..9);
        let model = Mlp::init(d, h, &mut r);
        let n = r.random_range(1..12);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| 2.0 * gauss(&mut r)).collect()).collect();
        let labels = random_labels(&mut r, n);
        let xs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let (_, grad) = mlp_gradient(&model, &xs, &labels).unwrap();

        let step = 1e-6;
        let mut numeric = vec![0.0; grad.len()];
        for k in 0..grad.len() {
            let mut plus = model.clone();
            plus.params_mut()[k] += step;
            let mut minus = model.clone();
            minus.params_mut()[k] -= step;
            let lp = mlp_gradient(&plus, &xs, &labels).unwrap().0;
            let lm = mlp_gradient(&minus, &xs, &labels).unwrap().0;
            numeric[k] = (lp - lm) / (2.0 * step);
        }
        let diff: f64 = grad.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = grad.iter().map(|g| g * g).sum::<f64>().sqrt().max(numeric.iter().map(|g| g * g).sum::<f64>().sqrt());
        worst = worst.max(diff / scale.max(1e-12));
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn raising_an_active_output_weight_raises_the_score() {
    let mut r = rng(42);
    for _ in 0..50 {
        let model = Mlp::init(3, 4, &mut r);
        let x: Vec<f64> = (0..3).map(|_| gauss(&mut r)).collect();
        // hidden unit k is active when its pre-activation is positive
        let p = model.params();
        for k in 0..4 {
            let pre = p[3 * 4 + k] + (0..3).map(|i| p[k * 3 + i] * x[i]).sum::<f64>();
            if pre <= 0.0 {
                continue;
            }
            let mut bumped = model.clone();
            bumped.params_mut()[3 * 4 + 4 + k] += 0.1;
            assert!(mlp_forward(&bumped, &x).unwrap() > mlp_forward(&model, &x).unwrap());
        }
    }
}

fn blobs(r: &mut impl Rng, n: usize) -> (FeatureMatrix, Vec<Label>) {
    let labels: Vec<Label> = (0..n).map(|i| if i % 2 == 0 { Label::Normal } else { Label::Glaucoma }).collect();
    let rows = labels
        .iter()
        .map(|l| {
            let c = if l.is_positive() { 2.0 } else { -2.0 };
            vec![c + 0.7 * gauss(r), -c + 0.7 * gauss(r)]
        })
        .collect();
    let ids = (0..n).map(|i| format!("b{i}")).collect();
    (FeatureMatrix::from_rows(ids, vec!["x".into(), "y".into()], rows).unwrap(), labels)
}

#[test]
fn separable_blobs_are_learned() {
    let mut r = rng(43);
    let (x, y) = blobs(&mut r, 200);
    let cfg = TrainConfig {
        epochs: 200,
        ..Default::default()
    };
    let (model, trace) = mlp_train(&x, &y, &cfg, None).unwrap();
    let scores: Vec<f64> = (0..200).map(|i| mlp_forward(&model, x.row(i)).unwrap()).collect();
    let report = evaluate_scores(&scores, &y);
    assert!(report.acc >= 0.95, "training accuracy {}", report.acc);
    assert!(trace.train_loss.last().unwrap() < &trace.train_loss[0]);

    let (again, trace2) = mlp_train(&x, &y, &cfg, None).unwrap();
    assert_eq!(model, again);
    assert_eq!(trace, trace2);
}

#[test]
fn validation_split_picks_best_epoch() {
    let mut r = rng(44);
    let (x, y) = blobs(&mut r, 80);
    let (vx, vy) = blobs(&mut r, 40);
    let cfg = TrainConfig {
        epochs: 30,
        ..Default::default()
    };
    let (_, trace) = mlp_train(&x, &y, &cfg, Some((&vx, &vy))).unwrap();
    assert_eq!(trace.val_loss.len(), 31);
    let best = trace.val_loss[trace.best_epoch];
    assert!(trace.val_loss.iter().all(|&v| v >= best));
}

#[test]
fn trapezoid_auc_equals_pair_counting() {
    let mut r = rng(45);
    for case in 0..100 {
        let n = r.random_range(4..60);
        let mut labels = random_labels(&mut r, n);
        labels[0] = Label::Normal;
        labels[1] = Label::Glaucoma;
        // few distinct values so that ties across classes occur
        let levels = if case % 3 == 0 { 4 } else { 1000 };
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64 / levels as f64).collect();
        let got = evaluate_scores(&scores, &labels).auc.unwrap();
        let want = auc_pairs_oracle(&scores, &labels);
        assert!((got - want).abs() <= 1e-12, "case {case}: {got} vs {want}");
        assert!((pairwise_auc(&scores, &labels).unwrap() - want).abs() <= 1e-12);
    }
}

#[test]
fn auc_edge_cases_and_symmetries() {
    let labels = [Label::Glaucoma, Label::Glaucoma, Label::Normal, Label::Normal];
    let perfect = evaluate_scores(&[0.9, 0.8, 0.1, 0.2], &labels);
    assert_eq!(perfect.auc, Some(1.0));
    assert_eq!(perfect.acc, 1.0);
    assert_eq!(evaluate_scores(&[0.3; 4], &labels).auc, Some(0.5));

    let mut r = rng(46);
    let n = 50;
    let labels = random_labels(&mut r, n);
    let scores: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
    let base = evaluate_scores(&scores, &labels);
    let warped: Vec<f64> = scores.iter().map(|s| s.powi(3)).collect();
    assert_eq!(evaluate_scores(&warped, &labels).auc, base.auc);
    let flipped: Vec<Label> = labels
        .iter()
        .map(|l| if l.is_positive() { Label::Normal } else { Label::Glaucoma })
        .collect();
    let mirror: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
    let swapped = evaluate_scores(&scores, &flipped);
    assert!((swapped.auc.unwrap() - (1.0 - base.auc.unwrap())).abs() < 1e-12);
    let both = evaluate_scores(&mirror, &flipped);
    assert_eq!((both.sn, both.spc), (base.spc, base.sn));
    for w in base.roc.windows(2) {
        assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
    }
    assert_eq!(base.roc.first(), Some(&(0.0, 0.0)));
    assert_eq!(base.roc.last(), Some(&(1.0, 1.0)));

    let single = evaluate_scores(&[0.2, 0.7], &[Label::Normal, Label::Normal]);
    assert!(single.auc().is_err());
    assert_eq!(single.spc, 0.5);
}

#[test]
fn f_score_zero_when_nothing_is_positive() {
    let r = evaluate_scores(&[0.1, 0.2, 0.3], &[Label::Glaucoma, Label::Normal, Label::Normal]);
    assert_eq!((r.tp, r.fs, r.sn, r.spc), (0, 0.0, 0.0, 1.0));
}

#[test]
fn standardizer_uses_training_statistics() {
    let m = |v: &[f64]| {
        let ids = (0..v.len()).map(|i| format!("r{i}")).collect();
        FeatureMatrix::from_rows(ids, vec!["f".into()], v.iter().map(|&x| vec![x]).collect()).unwrap()
    };
    let s = fit_standardizer(&m(&[1.0, 2.0, 3.0])).unwrap();
    let z = apply_standardizer(&s, &m(&[1.0, 2.0, 3.0])).unwrap();
    let sd = (2.0f64 / 3.0).sqrt();
    assert_eq!(z.column(0), vec![-1.0 / sd, 0.0, 1.0 / sd]);
    let mean: f64 = z.column(0).iter().sum::<f64>() / 3.0;
    let var: f64 = z.column(0).iter().map(|v| v * v).sum::<f64>() / 3.0;
    assert!(mean.abs() < 1e-9 && (var.sqrt() - 1.0).abs() < 1e-9);

    // test rows are shifted by the train mean, not their own
    let t = apply_standardizer(&s, &m(&[100.0, 102.0])).unwrap();
    assert_eq!(t.column(0), vec![98.0 / sd, 100.0 / sd]);
    assert!(matches!(fit_standardizer(&m(&[4.0, 4.0])), Err(glaucoct::Error::ZeroVariance(_))));
}

#[test]
fn trained_model_text_round_trip() {
    let mut r = rng(47);
    let (x, y) = blobs(&mut r, 60);
    let s = fit_standardizer(&x).unwrap();
    let (mlp, _) = mlp_train(&apply_standardizer(&s, &x).unwrap(), &y, &TrainConfig { epochs: 5, ..Default::default() }, None).unwrap();
    let model = TrainedModel { standardizer: s, mlp };
    let back = TrainedModel::from_text(&model.to_text()).unwrap();
    assert_eq!(back, model);
    assert_eq!(back.predict(&x).unwrap(), model.predict(&x).unwrap());
    assert!(TrainedModel::from_text("not a model").is_err());
}
