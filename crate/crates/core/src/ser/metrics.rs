use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Shuffled train/test index partition; the first `floor(ratio * n)` go to training.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Split(format!("ratio must lie in (0, 1), got {ratio}")));
    }
    // the epsilon keeps e.g. 0.29 * 100 from flooring to 28
    let n_train = (ratio * n as f64 + 1e-9).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::Split(format!(
            "ratio {ratio} on {n} examples leaves an empty side"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

pub fn split<T: Clone>(examples: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let (train, test) = split_indices(examples.len(), ratio, seed)?;
    Ok((
        train.into_iter().map(|i| examples[i].clone()).collect(),
        test.into_iter().map(|i| examples[i].clone()).collect(),
    ))
}

/// Overall accuracy: classes count in proportion to their frequency.
pub fn weighted_accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() || labels.is_empty() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let correct = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
