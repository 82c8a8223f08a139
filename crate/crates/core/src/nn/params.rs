use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::scalar::Scalar;

/// A container of trainable tensors, visited in a fixed order.
///
/// A value of the same type doubles as the gradient and optimizer-moment
/// container.
pub trait Params<T: Scalar>: Sized {
    fn tensors(&self) -> Vec<&[T]>;
    fn tensors_mut(&mut self) -> Vec<&mut [T]>;
    fn zeros_like(&self) -> Self;

    fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += scale * other`, tensor by tensor.
    fn add_scaled(&mut self, other: &Self, scale: T) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

pub(crate) fn slice2<T>(a: &Array2<T>) -> &[T] {
    a.as_slice().expect("parameters are stored contiguously")
}

pub(crate) fn slice2_mut<T>(a: &mut Array2<T>) -> &mut [T] {
    a.as_slice_mut().expect("parameters are stored contiguously")
}

/// Glorot-uniform matrix: entries in `±sqrt(6 / (rows + cols))`.
pub fn glorot<T: Scalar>(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || T::lit(rng.random_range(-limit..=limit)))
}

/// Affine map `x W + b` with `W: [in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        Dense {
            weight: Array2::zeros((d_in, d_out)),
            bias: Array1::zeros(d_out),
        }
    }

    pub fn glorot(d_in: usize, d_out: usize, rng: &mut impl Rng) -> Self {
        Dense {
            weight: glorot(d_in, d_out, rng),
            bias: Array1::zeros(d_out),
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn d_out(&self) -> usize {
        self.weight.ncols()
    }

    /// Row-wise `x W + b` for `x: [n, in]`.
    pub fn forward(&self, x: ArrayView2<T>) -> Array2<T> {
        x.dot(&self.weight) + &self.bias
    }

    /// Accumulates parameter gradients for upstream `dy: [n, out]` into
    /// `grad` and returns `dx: [n, in]`.
    pub fn backward(&self, x: ArrayView2<T>, dy: ArrayView2<T>, grad: &mut Dense<T>, need_dx: bool) -> Option<Array2<T>> {
        grad.weight += &x.t().dot(&dy);
        grad.bias += &dy.sum_axis(Axis(0));
        need_dx.then(|| dy.dot(&self.weight.t()))
    }
}

impl<T: Scalar> Params<T> for Dense<T> {
    fn tensors(&self) -> Vec<&[T]> {
        vec![slice2(&self.weight), self.bias.as_slice().unwrap()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![
            slice2_mut(&mut self.weight),
            self.bias.as_slice_mut().unwrap(),
        ]
    }

    fn zeros_like(&self) -> Self {
        Dense::zeros(self.d_in(), self.d_out())
    }
}
