//! Dense classifier: two ReLU hidden layers and a softmax output.

use ndarray::{Array2, ArrayView1, ArrayView2, Zip};
use rand::Rng;

use super::ops::softmax;
use super::params::{Dense, Params};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_HIDDEN1: usize = 128;
pub const DEFAULT_HIDDEN2: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub hidden1: Dense<T>,
    pub hidden2: Dense<T>,
    pub output: Dense<T>,
}

/// Activations kept from a batch forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    pub x: Array2<T>,
    pub z1: Array2<T>,
    pub h1: Array2<T>,
    pub z2: Array2<T>,
    pub h2: Array2<T>,
    pub logits: Array2<T>,
}

fn relu<T: Scalar>(z: &Array2<T>) -> Array2<T> {
    z.mapv(|v| v.max(T::zero()))
}

fn relu_backward<T: Scalar>(dh: Array2<T>, z: &Array2<T>) -> Array2<T> {
    let mut dz = dh;
    Zip::from(&mut dz).and(z).for_each(|d, &zv| {
        if zv <= T::zero() {
            *d = T::zero();
        }
    });
    dz
}

impl<T: Scalar> Mlp<T> {
    pub fn zeros(d_in: usize, h1: usize, h2: usize, n_classes: usize) -> Self {
        Mlp {
            hidden1: Dense::zeros(d_in, h1),
            hidden2: Dense::zeros(h1, h2),
            output: Dense::zeros(h2, n_classes),
        }
    }

    pub fn init(d_in: usize, h1: usize, h2: usize, n_classes: usize, rng: &mut impl Rng) -> Self {
        Mlp {
            hidden1: Dense::glorot(d_in, h1, rng),
            hidden2: Dense::glorot(h1, h2, rng),
            output: Dense::glorot(h2, n_classes, rng),
        }
    }

    pub fn d_in(&self) -> usize {
        self.hidden1.d_in()
    }

    pub fn n_classes(&self) -> usize {
        self.output.d_out()
    }

    pub fn forward_batch(&self, x: ArrayView2<T>) -> MlpCache<T> {
        let z1 = self.hidden1.forward(x);
        let h1 = relu(&z1);
        let z2 = self.hidden2.forward(h1.view());
        let h2 = relu(&z2);
        let logits = self.output.forward(h2.view());
        MlpCache {
            x: x.to_owned(),
            z1,
            h1,
            z2,
            h2,
            logits,
        }
    }

    /// Backpropagates `d_logits: [n, classes]`, accumulating into `grad`.
    /// Returns the input gradient when `need_dx`.
    pub fn backward_batch(
        &self,
        cache: &MlpCache<T>,
        d_logits: ArrayView2<T>,
        grad: &mut Mlp<T>,
        need_dx: bool,
    ) -> Option<Array2<T>> {
        let dh2 = self
            .output
            .backward(cache.h2.view(), d_logits, &mut grad.output, true)
            .unwrap();
        let dz2 = relu_backward(dh2, &cache.z2);
        let dh1 = self
            .hidden2
            .backward(cache.h1.view(), dz2.view(), &mut grad.hidden2, true)
            .unwrap();
        let dz1 = relu_backward(dh1, &cache.z1);
        self.hidden1
            .backward(cache.x.view(), dz1.view(), &mut grad.hidden1, need_dx)
    }

    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        check_input(x, self.d_in())?;
        let x = ArrayView1::from(x).insert_axis(ndarray::Axis(0));
        Ok(self.forward_batch(x).logits.row(0).to_vec())
    }
}

pub(crate) fn check_input<T: Scalar>(x: &[T], d_in: usize) -> Result<()> {
    if x.len() != d_in {
        return Err(Error::Shape(format!("input dim {} != {d_in}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("classifier input".into()));
    }
    Ok(())
}

/// Class probabilities `softmax(W3 relu(W2 relu(W1 x + b1) + b2) + b3)`.
pub fn mlp_forward<T: Scalar>(x: &[T], params: &Mlp<T>) -> Result<Vec<T>> {
    Ok(softmax(&params.logits(x)?))
}

impl<T: Scalar> Params<T> for Mlp<T> {
    fn tensors(&self) -> Vec<&[T]> {
        let mut v = self.hidden1.tensors();
        v.extend(self.hidden2.tensors());
        v.extend(self.output.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.hidden1.tensors_mut();
        v.extend(self.hidden2.tensors_mut());
        v.extend(self.output.tensors_mut());
        v
    }

    fn zeros_like(&self) -> Self {
        Mlp {
            hidden1: self.hidden1.zeros_like(),
            hidden2: self.hidden2.zeros_like(),
            output: self.output.zeros_like(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};

    #[test]
    fn zero_network_is_uniform() {
        let m = Mlp::<f64>::zeros(5, 4, 3, 4);
        let p = mlp_forward(&[1.0, -2.0, 3.0, 0.5, 9.0], &m).unwrap();
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn output_bias_shift_is_invisible() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut m = Mlp::<f64>::init(3, 4, 3, 3, &mut rng);
        let x = [0.2, -0.7, 1.1];
        let before = mlp_forward(&x, &m).unwrap();
        m.output.bias.mapv_inplace(|b| b + 123.456);
        let after = mlp_forward(&x, &m).unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    use rand::SeedableRng;

    #[test]
    fn hand_computed_forward_pass() {
        let m = Mlp {
            hidden1: Dense {
                weight: arr2(&[[0.5, -1.0], [1.0, 0.5]]),
                bias: arr1(&[0.1, 0.0]),
            },
            hidden2: Dense {
                weight: arr2(&[[1.0, 0.0], [-1.0, 2.0]]),
                bias: arr1(&[0.0, -0.5]),
            },
            output: Dense {
                weight: arr2(&[[1.0, -1.0], [0.5, 0.0]]),
                bias: arr1(&[0.0, 0.2]),
            },
        };
        // x = [1, 2]
        // z1 = [0.5+2+0.1, -1+1+0] = [2.6, 0]       h1 = [2.6, 0]
        // z2 = [2.6, 0 - 0.5] = [2.6, -0.5]          h2 = [2.6, 0]
        // logits = [2.6, -2.6 + 0.2] = [2.6, -2.4]
        // p0 = 1 / (1 + e^-5)
        let p = mlp_forward(&[1.0, 2.0], &m).unwrap();
        let p0 = 1.0 / (1.0 + (-5.0f64).exp());
        assert!((p[0] - p0).abs() < 1e-15);
        assert!((p[1] - (1.0 - p0)).abs() < 1e-15);
    }

    #[test]
    fn input_errors() {
        let m = Mlp::<f32>::zeros(2, 2, 2, 2);
        assert!(matches!(mlp_forward(&[1.0], &m), Err(Error::Shape(_))));
        assert!(matches!(mlp_forward(&[1.0, f32::NAN], &m), Err(Error::Numeric(_))));
    }

    #[test]
    fn probabilities_are_a_distribution() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let m = Mlp::<f32>::init(8, 128, 16, 5, &mut rng);
        let x: Vec<f32> = (0..8).map(|i| i as f32 * 0.3 - 1.0).collect();
        let p = mlp_forward(&x, &m).unwrap();
        assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
