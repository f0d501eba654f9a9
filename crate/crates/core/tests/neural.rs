use hlwnet::neural::*;
use hlwnet::rng::rng_for;
use proptest::prelude::*;
use rand::Rng;

fn random_rows(seed: u64, n: usize, width: usize) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed, &[1]);
    (0..n).map(|_| (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

/// Total loss over a few samples, for finite differences.
fn total_loss(m: &Mlp, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    xs.iter().zip(ys).map(|(x, y)| m.loss(&m.forward(x).unwrap(), y)).sum()
}

fn check_gradient(spec: MlpSpec, ys: Vec<Vec<f64>>, seed: u64) {
    let mut m = Mlp::new(spec.clone(), &mut rng_for(seed, &[2])).unwrap();
    // Nonzero biases so no unit sits exactly at a ReLU kink by construction.
    let mut rng = rng_for(seed, &[3]);
    for p in m.params_mut() {
        *p += rng.gen_range(-0.1..0.1);
    }
    let xs = random_rows(seed, ys.len(), spec.input_width());
    let mut grads = vec![0.0; m.params().len()];
    for (x, y) in xs.iter().zip(&ys) {
        m.backward(&m.forward_trace(x).unwrap(), y, &mut grads).unwrap();
    }
    let h = 1e-6;
    for i in 0..grads.len() {
        let orig = m.params()[i];
        m.params_mut()[i] = orig + h;
        let up = total_loss(&m, &xs, &ys);
        m.params_mut()[i] = orig - h;
        let down = total_loss(&m, &xs, &ys);
        m.params_mut()[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let scale = fd.abs().max(grads[i].abs());
        assert!((fd - grads[i]).abs() <= 1e-5 * scale + 1e-9, "{spec:?} param {i}: analytic {} numeric {fd}", grads[i]);
    }
}

#[test]
fn gradients_match_finite_differences() {
    use Activation::*;
    let regress = |n: usize, w: usize| random_rows(9, n, w);
    for (i, hidden) in [Identity, Relu, Sigmoid].into_iter().enumerate() {
        for out in [Identity, Sigmoid] {
            let spec = MlpSpec::new(vec![3, 7, 5, 2], vec![hidden, hidden, out], LossKind::Mse).unwrap();
            let ys = if out == Sigmoid {
                regress(6, 2).iter().map(|r| r.iter().map(|v| v.abs()).collect()).collect()
            } else {
                regress(6, 2)
            };
            check_gradient(spec, ys, i as u64);
        }
        let spec = MlpSpec::new(vec![4, 6, 3], vec![hidden, Softmax], LossKind::CrossEntropy).unwrap();
        // One-hot and soft targets.
        let ys = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.2, 0.5, 0.3], vec![0.0, 1.0, 0.0]];
        check_gradient(spec, ys, 10 + i as u64);
    }
}

#[test]
fn forward_pass_matches_a_hand_written_one() {
    let spec = MlpSpec::relu_stack(vec![3, 16, 4, 1], Activation::Sigmoid, LossKind::Mse).unwrap();
    let m = Mlp::new(spec, &mut rng_for(4, &[])).unwrap();
    let dense = |l: usize, x: &[f64]| -> Vec<f64> {
        let (w, b) = m.layer(l);
        (0..b.len()).map(|o| b[o] + (0..x.len()).map(|i| w[o * x.len() + i] * x[i]).sum::<f64>()).collect()
    };
    let relu = |v: Vec<f64>| v.into_iter().map(|z| if z > 0.0 { z } else { 0.0 }).collect::<Vec<_>>();
    for x in random_rows(5, 50, 3) {
        let h1 = relu(dense(0, &x));
        let h2 = relu(dense(1, &h1));
        let z = dense(2, &h2)[0];
        let want = 1.0 / (1.0 + (-z).exp());
        let got = m.forward(&x).unwrap()[0];
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn saved_models_predict_identically() {
    let spec = MlpSpec::relu_stack(vec![3, 16, 4, 1], Activation::Sigmoid, LossKind::Mse).unwrap();
    let m = Mlp::new(spec, &mut rng_for(6, &[])).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    save_model(&m, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, m);
    for x in random_rows(7, 100, 3) {
        assert_eq!(m.forward(&x).unwrap(), back.forward(&x).unwrap());
    }
}

#[test]
fn corrupt_model_files_are_rejected() {
    let spec = MlpSpec::relu_stack(vec![2, 3, 1], Activation::Identity, LossKind::Mse).unwrap();
    let text = {
        let mut b = ModelBundle::default();
        b.models.insert("m".into(), Mlp::zeros(spec).unwrap());
        b.to_text()
    };
    assert!(ModelBundle::from_text(&text).is_ok());
    assert!(ModelBundle::from_text("").is_err());
    assert!(ModelBundle::from_text(&text.replacen("relu", "tanh", 1)).is_err());
    let truncated: String = text.lines().take(text.lines().count() - 2).map(|l| format!("{l}\n")).collect();
    assert!(ModelBundle::from_text(&truncated).is_err());
}

fn regression_task() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let xs = random_rows(8, 400, 2);
    let ys = xs.iter().map(|x| vec![0.5 + 0.3 * x[0] * x[1] + 0.1 * x[0]]).collect();
    (xs, ys)
}

#[test]
fn training_is_deterministic_and_learns() {
    let (xs, ys) = regression_task();
    let spec = MlpSpec::relu_stack(vec![2, 16, 1], Activation::Identity, LossKind::Mse).unwrap();
    let cfg = TrainConfig { epochs: 150, learning_rate: 1e-2, ..TrainConfig::default() };
    let run = || {
        let mut m = Mlp::new(spec.clone(), &mut rng_for(1, &[])).unwrap();
        let before = mean_loss(&m, &xs, &ys).unwrap();
        let curve = train(&mut m, &xs, &ys, &cfg).unwrap();
        (m, curve, before)
    };
    let (a, curve, before) = run();
    let (b, _, _) = run();
    assert_eq!(a, b);
    let split = split_index(xs.len(), cfg.validation_fraction);
    let val = mean_loss(&a, &xs[split..], &ys[split..]).unwrap();
    assert!((val - curve.best_validation()).abs() < 1e-12);
    assert!(val < 0.05 * before, "validation {val} from {before}");
}

#[test]
fn softmax_classifier_learns_a_separable_task() {
    let xs = random_rows(12, 300, 2);
    let ys: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| {
            let k = if x[0] > 0.3 {
                0
            } else if x[1] > 0.0 {
                1
            } else {
                2
            };
            (0..3).map(|i| if i == k { 1.0 } else { 0.0 }).collect()
        })
        .collect();
    let spec = MlpSpec::relu_stack(vec![2, 24, 3], Activation::Softmax, LossKind::CrossEntropy).unwrap();
    let mut m = Mlp::new(spec, &mut rng_for(2, &[])).unwrap();
    let cfg = TrainConfig { epochs: 300, learning_rate: 1e-2, validation_fraction: 0.0, ..TrainConfig::default() };
    train(&mut m, &xs, &ys, &cfg).unwrap();
    let argmax = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
    let hits = xs.iter().zip(&ys).filter(|(x, y)| argmax(&m.forward(x).unwrap()) == argmax(y)).count();
    assert!(hits as f64 >= 0.95 * xs.len() as f64, "{hits} of {}", xs.len());
}

#[test]
fn shape_errors_are_reported() {
    let spec = MlpSpec::relu_stack(vec![3, 4, 1], Activation::Identity, LossKind::Mse).unwrap();
    let m = Mlp::zeros(spec).unwrap();
    assert!(m.forward(&[1.0, 2.0]).is_err());
    assert!(MlpSpec::new(vec![3, 4, 1], vec![Activation::Softmax, Activation::Identity], LossKind::Mse).is_err());
    assert!(MlpSpec::new(vec![3, 2], vec![Activation::Identity], LossKind::CrossEntropy).is_err());
    assert!(train(&mut m.clone(), &[], &[], &TrainConfig::default()).is_err());
}

proptest! {
    #[test]
    fn normalization_round_trips(rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 4), 2..30)) {
        let b = ColumnBounds::fit(&rows).unwrap();
        for r in &rows {
            let n = b.normalize(r);
            for (c, v) in n.iter().enumerate() {
                let span = b.hi[c] - b.lo[c];
                if span > 0.0 {
                    prop_assert!((-1e-12..=1.0 + 1e-12).contains(v));
                    prop_assert!((b.denormalize_value(c, *v) - r[c]).abs() <= 1e-9 * span.max(1.0));
                }
            }
        }
    }

    #[test]
    fn adam_steps_against_the_gradient(g in proptest::collection::vec(-10f64..10.0, 1..8)) {
        let mut params = vec![0.0; g.len()];
        let mut adam = AdamState::new(g.len(), AdamConfig::default());
        adam.step(&mut params, &g);
        for (p, gi) in params.iter().zip(&g) {
            prop_assert!(*gi == 0.0 || p.signum() == -gi.signum());
        }
    }
}
