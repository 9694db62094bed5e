//! Objective, constraints and design sensitivities.
//!
//! Strain-energy responses are self-adjoint: the sensitivity of a degree's
//! energy with respect to a physical density is gamma_j times the element
//! energy already computed during the solve, so no extra linear solves are
//! needed. Energies are normalized per degree to their first-iteration
//! values, which makes objective and constraints dimensionless and the
//! prescribed stroke magnitudes irrelevant.

pub mod stress;

pub use stress::{stress_constraint, von_mises, StressResponse, StressSettings};

use crate::degrees::MechanismDegree;
use crate::error::{Error, Result};
use crate::fem::DegreeSolution;
use crate::field_ops::{FilterOperator, PhysicalField};

/// Normalized energy of one degree and its raw-design sensitivity.
#[derive(Debug, Clone)]
pub struct EnergyResponse {
    pub alpha: f64,
    pub energy: f64,
    /// d(alpha)/dx per raw design variable.
    pub dalpha: Vec<f64>,
}

/// Captures the first-iteration reference energy of a degree, rejecting
/// degenerate (zero-energy) problems.
pub fn reference_energy(degree: MechanismDegree, solution: &DegreeSolution) -> Result<f64> {
    if solution.energy > 0.0 {
        Ok(solution.energy)
    } else {
        Err(Error::DegenerateDegree { degree })
    }
}

/// alpha = E/E0 with the self-adjoint sensitivity chained through
/// projection and filter back to the raw design variables.
pub fn evaluate_energy(
    solution: &DegreeSolution,
    e0: f64,
    field: &PhysicalField,
    filter: &FilterOperator,
) -> Result<EnergyResponse> {
    debug_assert!(e0 > 0.0);
    let inner: Vec<f64> = solution
        .element_energies
        .iter()
        .zip(field.gamma.iter())
        .zip(field.dprojection.iter())
        .map(|((eps, gamma), dproj)| gamma * eps * dproj / e0)
        .collect();
    let dalpha = filter.chain_rule(&inner)?;
    Ok(EnergyResponse {
        alpha: solution.energy / e0,
        energy: solution.energy,
        dalpha,
    })
}

/// Evaluates all degrees against their references, in order.
pub fn evaluate_energies(
    degrees: &[MechanismDegree],
    solutions: &[DegreeSolution],
    e0: &[f64],
    field: &PhysicalField,
    filter: &FilterOperator,
) -> Result<Vec<EnergyResponse>> {
    debug_assert_eq!(degrees.len(), solutions.len());
    debug_assert_eq!(degrees.len(), e0.len());
    solutions
        .iter()
        .zip(e0.iter())
        .map(|(sol, &e0)| evaluate_energy(sol, e0, field, filter))
        .collect()
}

/// Aggregation of the DOC energies into one performance measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    /// f = sum of weighted normalized energies.
    #[default]
    WeightedSum,
    /// Harmonic aggregation f = 1 / sum(1/alpha): a smooth minimum that
    /// emphasizes the weakest degree.
    SmoothMin,
}

/// Combines DOC responses into the performance measure f and its gradient.
/// The optimizer minimizes -f.
pub fn objective(
    responses: &[EnergyResponse],
    weights: Option<&[f64]>,
    kind: ObjectiveKind,
) -> Result<(f64, Vec<f64>)> {
    if responses.is_empty() {
        return Err(Error::Config("objective needs at least one DOC".into()));
    }
    let n = responses[0].dalpha.len();
    if let Some(w) = weights {
        if w.len() != responses.len() {
            return Err(Error::Config(format!(
                "{} objective weights for {} DOCs",
                w.len(),
                responses.len()
            )));
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    match kind {
        ObjectiveKind::WeightedSum => {
            let mut f = 0.0;
            let mut df = vec![0.0; n];
            for (i, r) in responses.iter().enumerate() {
                let w = weight(i);
                f += w * r.alpha;
                for (d, s) in df.iter_mut().zip(r.dalpha.iter()) {
                    *d += w * s;
                }
            }
            Ok((f, df))
        }
        ObjectiveKind::SmoothMin => {
            let mut inv_sum = 0.0;
            for (i, r) in responses.iter().enumerate() {
                inv_sum += weight(i) / r.alpha;
            }
            let f = 1.0 / inv_sum;
            let mut df = vec![0.0; n];
            for (i, r) in responses.iter().enumerate() {
                let w = weight(i) * f * f / (r.alpha * r.alpha);
                for (d, s) in df.iter_mut().zip(r.dalpha.iter()) {
                    *d += w * s;
                }
            }
            Ok((f, df))
        }
    }
}

/// Interpretation of the DOF energy bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyBoundMode {
    /// emax bounds the normalized energy alpha (order-one values).
    #[default]
    Normalized,
    /// emax bounds the raw strain energy.
    Raw,
}

/// One DOF energy constraint g = energy measure / bound - 1 <= 0.
pub fn dof_constraint(
    response: &EnergyResponse,
    e0: f64,
    emax: f64,
    mode: EnergyBoundMode,
) -> Result<(f64, Vec<f64>)> {
    if !(emax > 0.0) {
        return Err(Error::Config(format!(
            "energy bound must be positive, got {emax}"
        )));
    }
    let scale = match mode {
        EnergyBoundMode::Normalized => 1.0 / emax,
        EnergyBoundMode::Raw => e0 / emax,
    };
    let g = response.alpha * scale - 1.0;
    let dg = response.dalpha.iter().map(|d| d * scale).collect();
    Ok((g, dg))
}

/// Optional volume constraint g = mean(density)/vmax - 1 on the physical
/// field, chained back to raw variables.
pub fn volume_constraint(
    field: &PhysicalField,
    filter: &FilterOperator,
    vmax: f64,
) -> Result<(f64, Vec<f64>)> {
    if !(0.0 < vmax && vmax <= 1.0) {
        return Err(Error::Config(format!(
            "volume fraction bound must lie in (0, 1], got {vmax}"
        )));
    }
    let n = field.density.len() as f64;
    let mean = field.density.iter().sum::<f64>() / n;
    let g = mean / vmax - 1.0;
    let inner: Vec<f64> = field
        .dprojection
        .iter()
        .map(|d| d / (n * vmax))
        .collect();
    let dg = filter.chain_rule(&inner)?;
    Ok((g, dg))
}
