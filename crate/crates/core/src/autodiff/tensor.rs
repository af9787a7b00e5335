use rand::Rng;

use crate::scalar::Scalar;

/// Dense row-major tensor.
///
/// `grad` is populated by [`super::Tape::backward`] for tape nodes; on
/// long-lived parameter tensors it stays `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    pub shape: Vec<usize>,
    pub data: Vec<S>,
    pub requires_grad: bool,
    pub grad: Option<Vec<S>>,
}

impl<S: Scalar> Tensor<S> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<S>) -> Self {
        let numel: usize = shape.iter().product();
        assert_eq!(
            numel,
            data.len(),
            "shape {:?} does not match data length {}",
            shape,
            data.len()
        );
        Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel: usize = shape.iter().product();
        Tensor {
            shape,
            data: vec![S::zero(); numel],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn scalar(v: S) -> Self {
        Tensor::from_vec(vec![1], vec![v])
    }

    /// Mark this tensor as a trainable parameter.
    pub fn with_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.numel() == 1
    }

    /// Number of rows when viewed as a matrix; a 1-D tensor is one row.
    pub fn rows(&self) -> usize {
        match self.shape.len() {
            1 => 1,
            2 => self.shape[0],
            _ => panic!("rows() on tensor of rank {}", self.shape.len()),
        }
    }

    /// Row width when viewed as a matrix.
    pub fn cols(&self) -> usize {
        match self.shape.len() {
            1 => self.shape[0],
            2 => self.shape[1],
            _ => panic!("cols() on tensor of rank {}", self.shape.len()),
        }
    }

    /// Convert element-wise to another scalar precision.
    pub fn cast<T: Scalar>(&self) -> Tensor<T> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| T::from_f64(v.as_f64())).collect(),
            requires_grad: self.requires_grad,
            grad: None,
        }
    }
}

/// Xavier-uniform initialization: values drawn from `[-s, s]` with
/// `s = sqrt(6 / (rows + cols))`. Deterministic under a fixed rng.
pub fn xavier_init<S: Scalar, R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor<S> {
    assert!(
        rows >= 1 && cols >= 1,
        "xavier_init requires positive dimensions, got {rows}x{cols}"
    );
    let s = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| S::from_f64(rng.gen_range(-s..=s)))
        .collect();
    Tensor::from_vec(vec![rows, cols], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn xavier_single_value_within_bound() {
        let mut rng = stream(3, "t");
        let t: Tensor<f64> = xavier_init(1, 1, &mut rng);
        let bound = 3.0f64.sqrt();
        assert!(
            t.data[0].abs() <= bound,
            "{} outside [-sqrt3, sqrt3]",
            t.data[0]
        );
    }

    #[test]
    fn xavier_deterministic_under_seed() {
        let a: Tensor<f32> = xavier_init(5, 7, &mut stream(42, "x"));
        let b: Tensor<f32> = xavier_init(5, 7, &mut stream(42, "x"));
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn xavier_sample_mean_near_zero() {
        let t: Tensor<f64> = xavier_init(64, 64, &mut stream(11, "mean"));
        let mean: f64 = t.data.iter().sum::<f64>() / t.data.len() as f64;
        assert!(mean.abs() < 0.05, "sample mean {mean} too far from 0");
    }

    #[test]
    #[should_panic(expected = "positive dimensions")]
    fn xavier_rejects_zero_dims() {
        let _: Tensor<f64> = xavier_init(0, 3, &mut stream(0, "z"));
    }

    #[test]
    fn shape_must_match_data() {
        let t = Tensor::<f32>::from_vec(vec![2, 3], vec![0.0; 6]);
        assert_eq!(t.numel(), 6);
        assert_eq!(t.rows(), 2);
        assert_eq!(t.cols(), 3);
    }
}
