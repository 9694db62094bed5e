//! Density field operations: filtering, Heaviside projection, SIMP material
//! interpolation, symmetry enforcement and their chain rules.

pub mod filter;
pub mod projection;
pub mod symmetry;

pub use filter::{build_filter, FilterOperator};
pub use projection::{heaviside_project, project_field};
pub use symmetry::{symmetrize, symmetrize_gradient, MirrorAxis};

use crate::error::Result;

/// Modified SIMP interpolation of one density: modulus fraction
/// eps + (1 - eps) x^p and the sensitivity factor
/// gamma = (1 - eps) p x^(p-1).
#[inline]
pub fn simp(x: f64, penalty: f64, eps: f64) -> (f64, f64) {
    let fraction = eps + (1.0 - eps) * x.powf(penalty);
    let gamma = (1.0 - eps) * penalty * x.powf(penalty - 1.0);
    (fraction, gamma)
}

/// A filtered design mapped to physical quantities: projected density,
/// projection derivative, modulus fraction and SIMP factor per element.
#[derive(Debug, Clone)]
pub struct PhysicalField {
    pub density: Vec<f64>,
    pub dprojection: Vec<f64>,
    pub fraction: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl PhysicalField {
    /// Builds the physical field from a filtered design. `projection` is
    /// `(beta, eta)`; `None` skips projection (density = filtered design).
    pub fn build(
        x_filtered: &[f64],
        projection: Option<(f64, f64)>,
        penalty: f64,
        eps: f64,
    ) -> Result<PhysicalField> {
        let (density, dprojection) = match projection {
            Some((beta, eta)) => project_field(x_filtered, beta, eta)?,
            None => (x_filtered.to_vec(), vec![1.0; x_filtered.len()]),
        };
        let mut fraction = Vec::with_capacity(density.len());
        let mut gamma = Vec::with_capacity(density.len());
        for &d in &density {
            let (f, g) = simp(d, penalty, eps);
            fraction.push(f);
            gamma.push(g);
        }
        Ok(PhysicalField {
            density,
            dprojection,
            fraction,
            gamma,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn simp_solid_limit() {
        let (f, g) = simp(1.0, 3.0, 1e-6);
        assert_eq!(f, 1.0);
        assert_relative_eq!(g, (1.0 - 1e-6) * 3.0, epsilon = 1e-15);
    }

    #[test]
    fn simp_void_floor() {
        let (f, _) = simp(0.0, 3.0, 1e-6);
        assert_eq!(f, 1e-6);
    }

    #[test]
    fn simp_midpoint_value() {
        let (f, _) = simp(0.5, 3.0, 1e-6);
        assert_relative_eq!(f, 1e-6 + (1.0 - 1e-6) * 0.125, epsilon = 1e-16);
    }

    #[test]
    fn full_chain_rule_matches_finite_differences() {
        // d(simp(project(filter(x))))/dx against central differences of the
        // composed map, checked through a scalar functional.
        let mesh = build_mesh(4, 4, None).unwrap();
        let h = build_filter(&mesh, 2.0).unwrap();
        let n = 16;
        let x: Vec<f64> = (0..n).map(|i| 0.25 + 0.5 * ((i * 31 % 17) as f64 / 16.0)).collect();
        let (beta, eta, p, eps) = (4.0, 0.45, 3.0, 1e-6);

        // functional: sum of modulus fractions
        let eval = |x: &[f64]| -> f64 {
            let xf = h.apply(x).unwrap();
            let field = PhysicalField::build(&xf, Some((beta, eta)), p, eps).unwrap();
            field.fraction.iter().sum()
        };
        // analytic gradient: H'(dproj .* dfraction/ddensity)
        let xf = h.apply(&x).unwrap();
        let field = PhysicalField::build(&xf, Some((beta, eta)), p, eps).unwrap();
        let inner: Vec<f64> = field
            .gamma
            .iter()
            .zip(field.dprojection.iter())
            .map(|(g, d)| g * d)
            .collect();
        let grad = h.chain_rule(&inner).unwrap();

        let step = 1e-6;
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += step;
            xm[j] -= step;
            let fd = (eval(&xp) - eval(&xm)) / (2.0 * step);
            assert_relative_eq!(grad[j], fd, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    proptest! {
        #[test]
        fn simp_is_monotone_with_nonnegative_gamma(x in 0.0f64..1.0, p in 1.0f64..5.0) {
            let eps = 1e-6;
            let (f, g) = simp(x, p, eps);
            prop_assert!(g >= 0.0);
            let (f2, _) = simp((x + 1e-4).min(1.0), p, eps);
            prop_assert!(f2 >= f);
            prop_assert!((eps..=1.0).contains(&f));
        }

        #[test]
        fn projection_bounds_and_ordering(x in 0.0f64..1.0, beta in 0.0f64..32.0, deta in 0.01f64..0.3) {
            let (eroded, _) = heaviside_project(x, beta, 0.5 + deta);
            let (mid, _) = heaviside_project(x, beta, 0.5);
            let (dilated, _) = heaviside_project(x, beta, 0.5 - deta);
            prop_assert!((0.0..=1.0).contains(&mid));
            prop_assert!(dilated >= mid - 1e-14);
            prop_assert!(mid >= eroded - 1e-14);
        }
    }
}
