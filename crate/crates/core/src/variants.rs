//! Run-mode configuration: the base formulation plus the robust
//! (erode/dilate) and stress-constrained extensions, composable over the
//! same analysis-and-design loop.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which formulation variant a run solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    #[default]
    Base,
    Robust,
    Stress,
    RobustStress,
}

impl RunMode {
    pub fn is_robust(&self) -> bool {
        matches!(self, RunMode::Robust | RunMode::RobustStress)
    }

    pub fn has_stress(&self) -> bool {
        matches!(self, RunMode::Stress | RunMode::RobustStress)
    }
}

/// Erode/dilate projection settings with the steepness continuation
/// schedule.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustSettings {
    /// Intermediate projection threshold.
    pub eta: f64,
    /// Threshold offset: erode at eta + delta, dilate at eta - delta.
    pub delta_eta: f64,
    pub beta_init: f64,
    pub beta_max: f64,
    /// Iterations between doublings of the projection steepness.
    pub beta_doubling_interval: usize,
    /// Robust runs typically use a wider filter; `None` keeps the base
    /// radius.
    pub filter_radius: Option<f64>,
}

impl Default for RobustSettings {
    fn default() -> Self {
        RobustSettings {
            eta: 0.5,
            delta_eta: 0.2,
            beta_init: 1.0,
            beta_max: 64.0,
            beta_doubling_interval: 50,
            filter_radius: None,
        }
    }
}

impl RobustSettings {
    /// Projection steepness at iteration k: doubling every interval,
    /// saturating at the maximum.
    pub fn beta_at(&self, k: usize) -> f64 {
        let doublings = (k / self.beta_doubling_interval) as i32;
        (self.beta_init * 2f64.powi(doublings)).min(self.beta_max)
    }

    /// Thresholds (eroded, intermediate, dilated).
    pub fn thresholds(&self) -> (f64, f64, f64) {
        (self.eta + self.delta_eta, self.eta, self.eta - self.delta_eta)
    }
}

/// How the allowable stress is specified.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StressConfig {
    /// Absolute allowable stress.
    pub sigma_bar: Option<f64>,
    /// Allowable stress as a fraction of a reference run's reported maximum
    /// von Mises stress; requires `reference_report`.
    pub sigma_bar_fraction: Option<f64>,
    /// Report file of the reference run the fraction applies to.
    pub reference_report: Option<PathBuf>,
    /// Power-mean aggregation exponent.
    pub p_agg: f64,
    /// Density relaxation exponent.
    pub q_relax: f64,
    /// Adaptive scaling keeps the aggregated value tracking the true
    /// maximum relaxed stress.
    pub adaptive_scaling: bool,
}

impl Default for StressConfig {
    fn default() -> Self {
        StressConfig {
            sigma_bar: None,
            sigma_bar_fraction: None,
            reference_report: None,
            p_agg: 10.0,
            q_relax: 0.5,
            adaptive_scaling: true,
        }
    }
}

/// Variant selection of one run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct VariantConfig {
    pub mode: RunMode,
    pub robust: RobustSettings,
    pub stress: StressConfig,
}

/// Validated execution plan: which density fields are analyzed, where the
/// objective and the constraints are evaluated, and the per-iteration
/// factorization budget.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub mode: RunMode,
    pub robust: Option<RobustSettings>,
    /// Resolved absolute stress settings (bound already denormalized).
    pub stress: Option<ResolvedStress>,
}

#[derive(Debug, Clone, Copy)]
pub struct ResolvedStress {
    pub sigma_bar: f64,
    pub p_agg: f64,
    pub q_relax: f64,
    pub adaptive_scaling: bool,
}

impl RunPlan {
    /// Physics for the objective: eroded in robust modes, nominal otherwise.
    /// Returns the projection (beta, eta) or `None` for no projection.
    pub fn objective_projection(&self, k: usize) -> Option<(f64, f64)> {
        self.robust
            .as_ref()
            .map(|r| (r.beta_at(k), r.thresholds().0))
    }

    /// Physics for the constraints: dilated in robust modes.
    pub fn constraint_projection(&self, k: usize) -> Option<(f64, f64)> {
        self.robust
            .as_ref()
            .map(|r| (r.beta_at(k), r.thresholds().2))
    }

    /// Projection of the exported nominal design (intermediate threshold).
    pub fn nominal_projection(&self, k: usize) -> Option<(f64, f64)> {
        self.robust
            .as_ref()
            .map(|r| (r.beta_at(k), r.thresholds().1))
    }

    /// Separate objective/constraint assemblies are only needed in robust
    /// modes.
    pub fn factorizations_per_iteration(&self) -> usize {
        if self.robust.is_some() {
            2
        } else {
            1
        }
    }

    /// Whether the steepness continuation has reached its final value; a
    /// robust run may only declare convergence afterwards.
    pub fn continuation_settled(&self, k: usize) -> bool {
        self.robust.is_none_or(|r| r.beta_at(k) >= r.beta_max)
    }
}

/// Checks variant invariants and resolves the plan. The allowable stress
/// must already be absolute here; fraction-of-reference specifications are
/// resolved by the driver, which owns file access.
pub fn configure_variant(config: &VariantConfig, resolved_sigma_bar: Option<f64>) -> Result<RunPlan> {
    let robust = if config.mode.is_robust() {
        let r = config.robust;
        if !(r.eta > 0.0 && r.eta < 1.0) {
            return Err(Error::Config(format!(
                "projection threshold must lie in (0, 1), got {}",
                r.eta
            )));
        }
        if !(r.delta_eta >= 0.0 && r.delta_eta < r.eta.min(1.0 - r.eta)) {
            return Err(Error::Config(format!(
                "threshold offset must satisfy 0 <= delta < min(eta, 1 - eta), got {}",
                r.delta_eta
            )));
        }
        if !(r.beta_init >= 0.0 && r.beta_max >= r.beta_init) {
            return Err(Error::Config("invalid steepness continuation range".into()));
        }
        if r.beta_doubling_interval == 0 {
            return Err(Error::Config("steepness doubling interval must be positive".into()));
        }
        if let Some(radius) = r.filter_radius {
            if !(radius >= 1.0) {
                return Err(Error::Config(format!(
                    "robust filter radius must be >= 1 element, got {radius}"
                )));
            }
        }
        Some(r)
    } else {
        None
    };

    let stress = if config.mode.has_stress() {
        let sigma_bar = resolved_sigma_bar.ok_or_else(|| {
            Error::Config("stress mode needs an allowable stress (absolute or fraction of a reference report)".into())
        })?;
        if !(sigma_bar > 0.0) {
            return Err(Error::Config(format!(
                "allowable stress must be positive, got {sigma_bar}"
            )));
        }
        if config.stress.p_agg < 1.0 {
            return Err(Error::Config(format!(
                "aggregation exponent must be >= 1, got {}",
                config.stress.p_agg
            )));
        }
        if !(config.stress.q_relax >= 0.0) {
            return Err(Error::Config("relaxation exponent must be nonnegative".into()));
        }
        Some(ResolvedStress {
            sigma_bar,
            p_agg: config.stress.p_agg,
            q_relax: config.stress.q_relax,
            adaptive_scaling: config.stress.adaptive_scaling,
        })
    } else {
        None
    };

    Ok(RunPlan {
        mode: config.mode,
        robust,
        stress,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_mode_is_the_identity_plan() {
        let plan = configure_variant(&VariantConfig::default(), None).unwrap();
        assert!(plan.robust.is_none());
        assert!(plan.stress.is_none());
        assert_eq!(plan.factorizations_per_iteration(), 1);
        assert_eq!(plan.objective_projection(0), None);
        assert!(plan.continuation_settled(0));
    }

    #[test]
    fn robust_thresholds_from_the_published_demo() {
        let config = VariantConfig {
            mode: RunMode::Robust,
            robust: RobustSettings {
                eta: 0.5,
                delta_eta: 0.2,
                ..RobustSettings::default()
            },
            ..VariantConfig::default()
        };
        let plan = configure_variant(&config, None).unwrap();
        let (e, i, d) = plan.robust.unwrap().thresholds();
        assert_eq!((e, i, d), (0.7, 0.5, 0.3));
        assert_eq!(plan.factorizations_per_iteration(), 2);
    }

    #[test]
    fn beta_schedule_doubles_and_saturates() {
        let r = RobustSettings::default();
        assert_eq!(r.beta_at(0), 1.0);
        assert_eq!(r.beta_at(49), 1.0);
        assert_eq!(r.beta_at(50), 2.0);
        assert_eq!(r.beta_at(250), 32.0);
        assert_eq!(r.beta_at(300), 64.0);
        assert_eq!(r.beta_at(10_000), 64.0);
    }

    #[test]
    fn stress_fraction_resolution_is_the_drivers_job() {
        let config = VariantConfig {
            mode: RunMode::Stress,
            ..VariantConfig::default()
        };
        assert!(configure_variant(&config, None).is_err());
        let plan = configure_variant(&config, Some(0.4 * 2.5)).unwrap();
        let s = plan.stress.unwrap();
        assert_eq!(s.sigma_bar, 1.0);
    }

    #[test]
    fn invalid_thresholds_are_rejected() {
        let mut config = VariantConfig {
            mode: RunMode::Robust,
            ..VariantConfig::default()
        };
        config.robust.delta_eta = 0.6;
        assert!(configure_variant(&config, None).is_err());
        config.robust.delta_eta = 0.2;
        config.robust.eta = 1.2;
        assert!(configure_variant(&config, None).is_err());
    }

    #[test]
    fn negative_stress_bound_is_rejected() {
        let config = VariantConfig {
            mode: RunMode::Stress,
            ..VariantConfig::default()
        };
        assert!(configure_variant(&config, Some(-1.0)).is_err());
    }
}
