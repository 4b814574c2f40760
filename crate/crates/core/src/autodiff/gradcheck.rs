//! Central finite differences for checking tape gradients.

use alloc::vec::Vec;

use super::Gradient;

/// Denominator floor for [`relative_error`]; below it the comparison is absolute.
pub const REL_ERR_FLOOR: f64 = 1e-5;

/// `|a - b| / max(|a|, |b|, REL_ERR_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERR_FLOOR)
}

/// `(f(p + h e_i) - f(p - h e_i)) / 2h` for every coordinate of every group.
pub fn central_difference<F>(mut f: F, params: &[Vec<f64>], h: f64) -> Vec<Vec<f64>>
where
    F: FnMut(&[Vec<f64>]) -> f64,
{
    let mut work: Vec<Vec<f64>> = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for g in 0..params.len() {
        let mut grad = Vec::with_capacity(params[g].len());
        for i in 0..params[g].len() {
            let orig = work[g][i];
            work[g][i] = orig + h;
            let up = f(&work);
            work[g][i] = orig - h;
            let down = f(&work);
            work[g][i] = orig;
            grad.push((up - down) / (2.0 * h));
        }
        out.push(grad);
    }
    out
}

/// Largest relative error per parameter group.
pub fn max_relative_errors(analytic: &Gradient, numeric: &[Vec<f64>]) -> Vec<f64> {
    assert_eq!(analytic.grads.len(), numeric.len(), "group count");
    analytic
        .grads
        .iter()
        .zip(numeric)
        .map(|(a, n)| {
            assert_eq!(a.len(), n.len(), "group length");
            a.data
                .iter()
                .zip(n)
                .fold(0.0, |m, (&x, &y)| f64::max(m, relative_error(x, y)))
        })
        .collect()
}
