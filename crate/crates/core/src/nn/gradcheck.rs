use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Parameters;

/// Parameter count above which a seeded subsample is checked instead of
/// every coordinate.
const FULL_CHECK_LIMIT: usize = 2000;

/// Gradient magnitudes below this are compared absolutely rather than
/// relatively; central differences cannot resolve them to relative precision.
const DENOMINATOR_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Flat index of the worst coordinate.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares analytic gradients against central differences.
///
/// `loss_and_grad` must be deterministic and return the scalar loss together
/// with its gradient, shaped like the parameters. Every coordinate is checked
/// up to 2000 parameters; larger sets use a subsample seeded by `seed`.
/// Failures are reported, never thrown.
pub fn finite_diff_check<P, F>(loss_and_grad: F, params: &P, tolerance: f64, step: f64, seed: u64) -> GradCheckReport
where
    P: Parameters,
    F: Fn(&P) -> (f64, P),
{
    let (_, grads) = loss_and_grad(params);
    let analytic = grads.flat();
    let base = params.flat();
    let n = base.len();
    let indices: Vec<usize> = if n <= FULL_CHECK_LIMIT {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = sample(&mut rng, n, FULL_CHECK_LIMIT).into_vec();
        idx.sort_unstable();
        idx
    };

    let mut probe = params.clone();
    let mut values = base.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: indices.len(),
        tolerance,
        passed: true,
    };
    for &i in &indices {
        values[i] = base[i] + step;
        probe.set_flat(&values);
        let plus = loss_and_grad(&probe).0;
        values[i] = base[i] - step;
        probe.set_flat(&values);
        let minus = loss_and_grad(&probe).0;
        values[i] = base[i];

        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR);
        let err = (a - numeric).abs() / denom;
        if !err.is_finite() || err > report.max_relative_error {
            report.max_relative_error = if err.is_finite() { err } else { f64::INFINITY };
            report.worst_index = i;
            report.analytic = a;
            report.numeric = numeric;
        }
    }
    report.passed = report.max_relative_error <= tolerance;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn sum_of_params_has_unit_gradient() {
        let p = Tensor::vector(vec![0.3, -2.0, 5.0, 1e-3]);
        let report = finite_diff_check(
            |t: &Tensor| (t.data().iter().sum(), Tensor::vector(vec![1.0; t.len()])),
            &p,
            1e-9,
            1e-5,
            0,
        );
        assert!(report.passed, "{report:?}");
        assert!(report.max_relative_error < 1e-9);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let p = Tensor::vector(vec![0.5, 1.5]);
        // d/dx x² = 2x, but report x instead.
        let report = finite_diff_check(
            |t: &Tensor| {
                let loss = t.data().iter().map(|v| v * v).sum();
                (loss, Tensor::vector(t.data().to_vec()))
            },
            &p,
            1e-4,
            1e-5,
            0,
        );
        assert!(!report.passed);
        assert!((report.max_relative_error - 0.5).abs() < 1e-6);
    }

    #[test]
    fn large_parameter_sets_are_subsampled() {
        let p = Tensor::vector(vec![0.1; 5000]);
        let report = finite_diff_check(
            |t: &Tensor| (t.data().iter().map(|v| 0.5 * v * v).sum(), t.clone()),
            &p,
            1e-6,
            1e-5,
            7,
        );
        assert_eq!(report.checked, FULL_CHECK_LIMIT);
        assert!(report.passed);
    }
}
