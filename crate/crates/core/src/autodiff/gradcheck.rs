use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::Scalar;

use super::tensor::Tensor;

#[derive(Debug, Error)]
pub enum GradCheckError {
    #[error("function is not deterministic: two evaluations differ ({0} vs {1})")]
    NonDeterministic(f64, f64),
}

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_coord: usize,
    pub coords_checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Compare analytic gradients against central finite differences of a
/// deterministic scalar function of the parameters.
///
/// For each parameter tensor, up to `max_coords_per_tensor` coordinates are
/// sampled (all of them when the tensor is small enough). The relative error
/// of a coordinate is `|analytic - numeric| / max(|analytic|, |numeric|,
/// 1e-8)`; the report carries the maximum over all sampled coordinates.
pub fn finite_diff_check<S: Scalar>(
    names: &[String],
    params: &mut [Tensor<S>],
    analytic: &[Vec<S>],
    f: &mut dyn FnMut(&[Tensor<S>]) -> S,
    h: f64,
    max_coords_per_tensor: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GradCheckReport, GradCheckError> {
    assert!(h > 0.0, "finite_diff_check: h must be positive");
    assert_eq!(names.len(), params.len());
    assert_eq!(analytic.len(), params.len());

    let base = f(params).as_f64();
    let again = f(params).as_f64();
    if base != again {
        return Err(GradCheckError::NonDeterministic(base, again));
    }

    let hs = S::from_f64(h);
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_coord: 0,
        coords_checked: 0,
    };
    for pi in 0..params.len() {
        let n = params[pi].numel();
        assert_eq!(
            analytic[pi].len(),
            n,
            "analytic gradient for {} has wrong length",
            names[pi]
        );
        let coords: Vec<usize> = if n <= max_coords_per_tensor {
            (0..n).collect()
        } else {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(rng);
            all.truncate(max_coords_per_tensor);
            all
        };
        for ci in coords {
            let orig = params[pi].data[ci];
            params[pi].data[ci] = orig + hs;
            let plus = f(params).as_f64();
            params[pi].data[ci] = orig - hs;
            let minus = f(params).as_f64();
            params[pi].data[ci] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[pi][ci].as_f64();
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.coords_checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = names[pi].clone();
                report.worst_coord = ci;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn square_at_three() {
        let names = vec!["x".to_string()];
        let mut params = vec![Tensor::from_vec(vec![1], vec![3.0f64])];
        let analytic = vec![vec![6.0f64]];
        let mut f = |p: &[Tensor<f64>]| p[0].data[0] * p[0].data[0];
        let report = finite_diff_check(
            &names,
            &mut params,
            &analytic,
            &mut f,
            1e-6,
            usize::MAX,
            &mut stream(0, "gc"),
        )
        .unwrap();
        assert!(report.max_rel_err < 1e-6, "rel err {}", report.max_rel_err);
    }

    #[test]
    fn constant_function_has_zero_error() {
        let names = vec!["x".to_string()];
        let mut params = vec![Tensor::from_vec(vec![2], vec![1.0f64, -2.0])];
        let analytic = vec![vec![0.0f64, 0.0]];
        let mut f = |_: &[Tensor<f64>]| 42.0f64;
        let report = finite_diff_check(
            &names,
            &mut params,
            &analytic,
            &mut f,
            1e-4,
            usize::MAX,
            &mut stream(0, "gc"),
        )
        .unwrap();
        assert_eq!(report.max_rel_err, 0.0);
        assert_eq!(report.coords_checked, 2);
    }

    #[test]
    fn detects_non_determinism() {
        let names = vec!["x".to_string()];
        let mut params = vec![Tensor::from_vec(vec![1], vec![1.0f64])];
        let analytic = vec![vec![0.0f64]];
        let mut calls = 0u32;
        let mut f = |_: &[Tensor<f64>]| {
            calls += 1;
            calls as f64
        };
        let err = finite_diff_check(
            &names,
            &mut params,
            &analytic,
            &mut f,
            1e-4,
            usize::MAX,
            &mut stream(0, "gc"),
        );
        assert!(matches!(err, Err(GradCheckError::NonDeterministic(_, _))));
    }
}
