//! Central finite-difference checking utilities.
//!
//! Used by the unit tests of every tape op and by the acceptance suite's
//! whole-network gradient check at f64.

use ndarray::ArrayD;

/// Relative error between an analytic and a finite-difference value, with
/// an absolute floor so near-zero pairs (where central differences drown
/// in cancellation noise) compare by absolute difference instead.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs());
    if denom < 1e-7 {
        return (analytic - numeric).abs();
    }
    (analytic - numeric).abs() / denom
}

/// Result of checking one parameter tensor.
#[derive(Debug, Clone)]
pub struct CheckedParam {
    pub name: String,
    pub max_relative_error: f64,
    pub checked_indices: usize,
}

/// Central-difference check of `loss` against `analytic_grads` for a set
/// of named f64 parameter tensors.
///
/// `loss` must be a pure function of the parameter vector. For every
/// tensor the probe indices are the first element, the middle element and
/// the last element (deduplicated).
pub fn check_parameters<F>(
    params: &mut Vec<(String, ArrayD<f64>)>,
    analytic_grads: &[(String, ArrayD<f64>)],
    mut loss: F,
    step: f64,
) -> Vec<CheckedParam>
where
    F: FnMut(&[(String, ArrayD<f64>)]) -> f64,
{
    let mut results = Vec::new();
    for pi in 0..params.len() {
        let name = params[pi].0.clone();
        let grad = analytic_grads
            .iter()
            .find(|(n, _)| *n == name)
            .unwrap_or_else(|| panic!("missing analytic gradient for {name}"))
            .1
            .clone();
        let len = params[pi].1.len();
        let mut probes = vec![0usize];
        if len > 2 {
            probes.push(len / 2);
        }
        if len > 1 {
            probes.push(len - 1);
        }
        probes.dedup();
        let mut max_err = 0.0f64;
        for &flat in &probes {
            let orig = params[pi].1.as_slice().expect("contiguous")[flat];
            params[pi].1.as_slice_mut().unwrap()[flat] = orig + step;
            let up = loss(params);
            params[pi].1.as_slice_mut().unwrap()[flat] = orig - step;
            let down = loss(params);
            params[pi].1.as_slice_mut().unwrap()[flat] = orig;
            let numeric = (up - down) / (2.0 * step);
            let analytic = grad.as_slice().expect("contiguous")[flat];
            max_err = max_err.max(relative_error(analytic, numeric));
        }
        results.push(CheckedParam {
            name,
            max_relative_error: max_err,
            checked_indices: probes.len(),
        });
    }
    results
}
