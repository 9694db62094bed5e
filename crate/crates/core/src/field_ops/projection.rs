//! Smooth Heaviside projection of filtered densities.

use crate::error::{Error, Result};

/// Projects one filtered density. Returns the projected value and its
/// derivative with respect to the input. `beta = 0` is the identity.
#[inline]
pub fn heaviside_project(x: f64, beta: f64, eta: f64) -> (f64, f64) {
    if beta == 0.0 {
        return (x, 1.0);
    }
    let denom = (beta * eta).tanh() + (beta * (1.0 - eta)).tanh();
    let t = (beta * (x - eta)).tanh();
    let value = ((beta * eta).tanh() + t) / denom;
    let deriv = beta * (1.0 - t * t) / denom;
    (value, deriv)
}

/// Projects a whole field; validates the threshold.
pub fn project_field(x: &[f64], beta: f64, eta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0 < eta && eta < 1.0) {
        return Err(Error::Config(format!(
            "projection threshold must lie in (0, 1), got {eta}"
        )));
    }
    if !(beta >= 0.0) {
        return Err(Error::Config(format!(
            "projection steepness must be nonnegative, got {beta}"
        )));
    }
    let mut value = Vec::with_capacity(x.len());
    let mut deriv = Vec::with_capacity(x.len());
    for &xi in x {
        let (v, d) = heaviside_project(xi, beta, eta);
        value.push(v);
        deriv.push(d);
    }
    Ok((value, deriv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn endpoints_are_preserved() {
        for beta in [0.0, 1.0, 8.0, 64.0] {
            for eta in [0.3, 0.5, 0.7] {
                let (lo, _) = heaviside_project(0.0, beta, eta);
                let (hi, _) = heaviside_project(1.0, beta, eta);
                assert_relative_eq!(lo, 0.0, epsilon = 1e-14);
                assert_relative_eq!(hi, 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn odd_symmetry_at_the_half_threshold() {
        let (v, _) = heaviside_project(0.5, 6.0, 0.5);
        assert_relative_eq!(v, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn sharp_projection_kills_subthreshold_values() {
        let (v, _) = heaviside_project(0.3, 64.0, 0.5);
        assert!(v < 1e-5, "got {v}");
    }

    #[test]
    fn beta_zero_is_identity() {
        let (xs, ds) = project_field(&[0.1, 0.5, 0.9], 0.0, 0.5).unwrap();
        assert_eq!(xs, vec![0.1, 0.5, 0.9]);
        assert_eq!(ds, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn thresholds_order_projections() {
        // lower threshold projects to larger values (dilate >= erode)
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            let (dilated, _) = heaviside_project(x, 8.0, 0.3);
            let (mid, _) = heaviside_project(x, 8.0, 0.5);
            let (eroded, _) = heaviside_project(x, 8.0, 0.7);
            assert!(dilated >= mid - 1e-14 && mid >= eroded - 1e-14);
        }
    }

    #[test]
    fn derivative_matches_central_differences() {
        // deterministic pseudo-random sample of 100 interior points
        let mut state = 0x2545f4914f6cdd1d_u64;
        let mut rand01 = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let h = 1e-6;
        for _ in 0..100 {
            let x = 0.02 + 0.96 * rand01();
            let beta = 0.5 + 15.0 * rand01();
            let eta = 0.2 + 0.6 * rand01();
            let (_, d) = heaviside_project(x, beta, eta);
            let (vp, _) = heaviside_project(x + h, beta, eta);
            let (vm, _) = heaviside_project(x - h, beta, eta);
            let fd = (vp - vm) / (2.0 * h);
            assert_relative_eq!(d, fd, max_relative = 1e-7, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_bad_thresholds() {
        assert!(project_field(&[0.5], 2.0, 0.0).is_err());
        assert!(project_field(&[0.5], 2.0, 1.0).is_err());
        assert!(project_field(&[0.5], -1.0, 0.5).is_err());
    }
}
