//! Analytic gradients against central finite differences.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

const STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;
/// Denominator floor: below this, gradients are compared absolutely.
const FLOOR: f64 = 1e-5;

fn max_relative_error(model: &Classifier<f64>, batch: &[(&Input<f64>, usize)]) -> f64 {
    let (_, analytic) = model.loss_and_grad(batch).unwrap();
    let analytic: Vec<f64> = analytic.tensors().concat();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let mut flat = 0;
    let n_tensors = probe.tensors().len();
    for t in 0..n_tensors {
        let len = probe.tensors()[t].len();
        for i in 0..len {
            let orig = probe.tensors()[t][i];
            probe.tensors_mut()[t][i] = orig + STEP;
            let up = probe.loss(batch).unwrap();
            probe.tensors_mut()[t][i] = orig - STEP;
            let down = probe.loss(batch).unwrap();
            probe.tensors_mut()[t][i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let a = analytic[flat];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(rel);
            flat += 1;
        }
    }
    worst
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn randomize_biases(model: &mut Classifier<f64>, rng: &mut ChaCha8Rng) {
    for b in [
        &mut model.mlp.hidden1.bias,
        &mut model.mlp.hidden2.bias,
        &mut model.mlp.output.bias,
    ] {
        b.mapv_inplace(|_| rng.random_range(-0.3..0.3));
    }
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let cfg = ModelConfig {
        hidden1: 4,
        hidden2: 3,
        d_model: 4,
    };
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = Classifier::<f64>::dense(3, 2, &cfg, &mut rng);
        randomize_biases(&mut model, &mut rng);
        let inputs: Vec<Input<f64>> = (0..5)
            .map(|_| Input::vector((0..3).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>()))
            .collect();
        let batch: Vec<(&Input<f64>, usize)> = inputs.iter().map(|x| (x, rng.random_range(0..2))).collect();
        let err = max_relative_error(&model, &batch);
        assert!(err <= TOLERANCE, "seed {seed}: max relative error {err:e}");
    }
}

#[test]
fn cross_attention_gradients_match_finite_differences() {
    let cfg = ModelConfig {
        hidden1: 5,
        hidden2: 4,
        d_model: 3,
    };
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let mut model = Classifier::<f64>::with_cross_attention(4, 3, 3, &cfg, &mut rng);
        randomize_biases(&mut model, &mut rng);
        let inputs: Vec<Input<f64>> = (0..3)
            .map(|_| {
                let n_a = rng.random_range(1..5);
                let n_t = rng.random_range(1..4);
                Input::Pair {
                    audio: random_matrix(n_a, 4, &mut rng),
                    text: random_matrix(n_t, 3, &mut rng),
                }
            })
            .collect();
        let batch: Vec<(&Input<f64>, usize)> = inputs.iter().map(|x| (x, rng.random_range(0..3))).collect();
        let err = max_relative_error(&model, &batch);
        assert!(err <= TOLERANCE, "seed {seed}: max relative error {err:e}");
    }
}

#[test]
fn confident_correct_predictions_have_vanishing_gradient() {
    let cfg = ModelConfig {
        hidden1: 3,
        hidden2: 2,
        d_model: 2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut model = Classifier::<f64>::dense(2, 2, &cfg, &mut rng);
    // output bias dominates: class 0 has probability 1 to machine precision
    model.mlp.output.bias[0] = 60.0;
    model.mlp.output.bias[1] = -60.0;
    let x = Input::vector(vec![0.3, -0.2]);
    let (loss, grad) = model.loss_and_grad(&[(&x, 0)]).unwrap();
    assert!(loss < 1e-9);
    for t in grad.tensors() {
        assert!(t.iter().all(|g| g.abs() < 1e-9));
    }
}

#[test]
fn a_training_step_is_bit_deterministic() {
    let cfg = ModelConfig {
        hidden1: 8,
        hidden2: 4,
        d_model: 4,
    };
    let make = || {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let model = Classifier::<f32>::with_cross_attention(3, 2, 3, &cfg, &mut rng);
        let data: Vec<(Input<f32>, usize)> = (0..10)
            .map(|i| {
                let audio = Array2::from_shape_simple_fn((2 + i % 3, 3), || rng.random_range(-1.0..1.0));
                let text = Array2::from_shape_simple_fn((1 + i % 2, 2), || rng.random_range(-1.0..1.0));
                (Input::Pair { audio, text }, i % 3)
            })
            .collect();
        (model, data)
    };
    let train_cfg = TrainConfig {
        epochs: 3,
        batch_size: 4,
        seed: 5,
        ..TrainConfig::default()
    };
    let (mut a, data_a) = make();
    let (mut b, data_b) = make();
    let ha = train(&mut a, &data_a, &train_cfg).unwrap();
    let hb = train(&mut b, &data_b, &train_cfg).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a, b);
}

#[test]
fn training_reduces_loss_on_separable_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data: Vec<(Input<f32>, usize)> = (0..64)
        .map(|i| {
            let label = i % 2;
            let c = if label == 0 { -1.0 } else { 1.0 };
            let v: Vec<f32> = (0..4).map(|_| c + rng.random_range(-0.3..0.3)).collect();
            (Input::vector(v), label)
        })
        .collect();
    let mut model = Classifier::dense(4, 2, &ModelConfig::default(), &mut rng);
    let history = train(
        &mut model,
        &data,
        &TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    assert!(history.last().unwrap() < &(history[0] * 0.2), "{history:?}");
    let correct = data
        .iter()
        .filter(|(x, y)| model.predict(x).unwrap() == *y)
        .count();
    assert_eq!(correct, 64);
}

#[test]
fn label_and_input_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = Classifier::<f64>::dense(2, 3, &ModelConfig::default(), &mut rng);
    let x = Input::vector(vec![1.0, 2.0]);
    assert!(matches!(model.loss(&[(&x, 3)]), Err(crate::Error::Label { .. })));
    let pair = Input::Pair {
        audio: Array2::zeros((1, 2)),
        text: Array2::zeros((1, 2)),
    };
    assert!(matches!(model.predict(&pair), Err(crate::Error::Shape(_))));
    let bad = TrainConfig {
        batch_size: 0,
        ..TrainConfig::default()
    };
    let mut m = model.clone();
    assert!(matches!(train(&mut m, &[(x, 0)], &bad), Err(crate::Error::Config(_))));
}
