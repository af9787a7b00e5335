use crate::scalar::Scalar;

use super::tensor::Tensor;

/// Adam optimizer state: bias-corrected first/second moments per parameter.
#[derive(Debug, Clone)]
pub struct AdamState<S> {
    pub lr: S,
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
    /// Update count; incremented by exactly 1 per [`AdamState::step`].
    pub t: u64,
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
}

impl<S: Scalar> AdamState<S> {
    /// Suggested defaults: beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    pub fn new(lr: S) -> Self {
        AdamState {
            lr,
            beta1: S::from_f64(0.9),
            beta2: S::from_f64(0.999),
            eps: S::from_f64(1e-8),
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Apply one bias-corrected update. `params` and `grads` are aligned;
    /// a `None` gradient is treated as zero. Moment buffers are allocated on
    /// first use and must keep their parameter order across steps.
    pub fn step(&mut self, params: &mut [&mut Tensor<S>], grads: &[Option<Vec<S>>]) {
        assert_eq!(
            params.len(),
            grads.len(),
            "adam: params/grads length mismatch"
        );
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![S::zero(); p.numel()]).collect();
            self.v = self.m.clone();
        }
        assert_eq!(self.m.len(), params.len(), "adam: parameter count changed");
        self.t += 1;
        let t = self.t as i32;
        let bc1 = S::one() - self.beta1.powi(t);
        let bc2 = S::one() - self.beta2.powi(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            assert_eq!(
                self.m[i].len(),
                p.numel(),
                "adam: parameter {i} shape changed"
            );
            let Some(g) = g else { continue };
            assert_eq!(g.len(), p.numel(), "adam: gradient {i} shape mismatch");
            for (j, gj) in g.iter().enumerate() {
                let m = &mut self.m[i][j];
                *m = self.beta1 * *m + (S::one() - self.beta1) * *gj;
                let v = &mut self.v[i][j];
                *v = self.beta2 * *v + (S::one() - self.beta2) * *gj * *gj;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                p.data[j] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_bitwise_unchanged() {
        let mut p = Tensor::from_vec(vec![3], vec![0.5f32, -1.25, 3.75]).with_grad();
        let before = p.data.clone();
        let mut adam = AdamState::new(0.1f32);
        adam.step(&mut [&mut p], &[Some(vec![0.0; 3])]);
        assert_eq!(p.data, before);
        assert_eq!(adam.t, 1);
        adam.step(&mut [&mut p], &[None]);
        assert_eq!(p.data, before);
        assert_eq!(adam.t, 2);
    }

    #[test]
    fn first_step_magnitude_is_about_lr() {
        // at t=1 bias correction cancels: |update| = lr * |g| / (|g| + eps)
        let mut p = Tensor::from_vec(vec![1], vec![2.0f64]).with_grad();
        let mut adam = AdamState::new(0.01f64);
        adam.step(&mut [&mut p], &[Some(vec![0.5])]);
        let delta = (2.0 - p.data[0]).abs();
        assert!((delta - 0.01).abs() < 1e-8, "first-step size {delta}");
    }

    #[test]
    fn converges_on_scalar_quadratic() {
        // descend f(w) = (w - 3)^2 from w = 0, lr = 0.1, 200 steps
        let mut w = Tensor::from_vec(vec![1], vec![0.0f64]).with_grad();
        let mut adam = AdamState::new(0.1f64);
        for _ in 0..200 {
            let g = 2.0 * (w.data[0] - 3.0);
            adam.step(&mut [&mut w], &[Some(vec![g])]);
        }
        assert!(
            (w.data[0] - 3.0).abs() < 0.05,
            "w = {} after 200 steps",
            w.data[0]
        );
    }

    #[test]
    #[should_panic(expected = "length mismatch")]
    fn rejects_misaligned_grads() {
        let mut p = Tensor::from_vec(vec![1], vec![0.0f32]).with_grad();
        let mut adam = AdamState::new(0.1f32);
        adam.step(&mut [&mut p], &[]);
    }
}
