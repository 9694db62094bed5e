//! Sequential convex design updates with move-limit oscillation control and
//! multi-criteria termination.

pub mod mma;

pub use mma::{kkt_residual_norm, MmaOptimizer, StepResult};

use serde::{Deserialize, Serialize};

/// Scalar move limit adapted to the oscillation behaviour of the design
/// variables.
#[derive(Debug, Clone)]
pub struct MoveLimit {
    value: f64,
    clean_streak: usize,
    params: MoveLimitParams,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct MoveLimitParams {
    pub init: f64,
    pub incr: f64,
    pub decr: f64,
    pub min: f64,
    pub max: f64,
    /// Movement-weighted oscillating fraction above which the limit
    /// shrinks.
    pub oscillation_threshold: f64,
    /// Consecutive quiet iterations required before the limit may grow
    /// again: shrink fast, recover slowly, so recurring oscillation
    /// episodes ratchet the limit down and freeze a drifting design.
    pub grow_patience: usize,
}

impl Default for MoveLimitParams {
    fn default() -> Self {
        MoveLimitParams {
            init: 0.2,
            incr: 1.2,
            decr: 0.5,
            min: 5e-4,
            max: 0.2,
            oscillation_threshold: 0.3,
            grow_patience: 20,
        }
    }
}

impl MoveLimit {
    pub fn new(params: MoveLimitParams) -> Self {
        MoveLimit {
            value: params.init.clamp(params.min, params.max),
            clean_streak: 0,
            params,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Shrinks the limit when sign-flipping variables carry too much of the
    /// total movement, grows it after a sustained quiet stretch. Amplitude
    /// weighting separates a terminal limit cycle (a few variables rattling
    /// while the rest stand still) from the broad churn of a productive
    /// phase. Needs the two previous iterates; identity when fewer are
    /// available. Returns the observed oscillating fraction.
    pub fn update(&mut self, x: &[f64], x_prev: &[f64], x_prev2: &[f64]) -> f64 {
        let mut oscillating = 0.0;
        let mut total = 0.0;
        for j in 0..x.len() {
            let d1 = x[j] - x_prev[j];
            let d2 = x_prev[j] - x_prev2[j];
            if d1.abs() > 1e-9 && d2.abs() > 1e-9 {
                total += d1.abs();
                if d1 * d2 < 0.0 {
                    oscillating += d1.abs();
                }
            }
        }
        let fraction = if total == 0.0 { 0.0 } else { oscillating / total };
        if fraction > self.params.oscillation_threshold {
            self.value *= self.params.decr;
            self.clean_streak = 0;
        } else {
            self.clean_streak += 1;
            if self.clean_streak >= self.params.grow_patience {
                self.value *= self.params.incr;
            }
        }
        self.value = self.value.clamp(self.params.min, self.params.max);
        fraction
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    DesignChange,
    Kkt,
    MaxIterations,
}

/// Stop decision of one iteration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TerminationReport {
    pub converged: bool,
    pub reason: Option<StopReason>,
    pub change: f64,
    pub kkt_norm: f64,
    pub feasible: bool,
}

impl TerminationReport {
    pub fn should_stop(&self) -> bool {
        self.reason.is_some()
    }
}

/// Termination tolerances.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct TerminationSettings {
    /// Max design change below which a feasible design counts as converged.
    pub change_tol: f64,
    pub kkt_tol: f64,
    pub feasibility_tol: f64,
    pub max_iterations: usize,
}

impl Default for TerminationSettings {
    fn default() -> Self {
        TerminationSettings {
            change_tol: 1e-3,
            kkt_tol: 1e-4,
            feasibility_tol: 1e-4,
            max_iterations: 500,
        }
    }
}

/// Converged iff feasible and either the design change or the KKT norm is
/// below tolerance; hard stop at the iteration cap.
pub fn check_termination(
    change: f64,
    kkt_norm: f64,
    g: &[f64],
    k: usize,
    settings: &TerminationSettings,
) -> TerminationReport {
    let feasible = g.iter().all(|&gi| gi <= settings.feasibility_tol);
    let mut report = TerminationReport {
        converged: false,
        reason: None,
        change,
        kkt_norm,
        feasible,
    };
    if feasible && change < settings.change_tol {
        report.converged = true;
        report.reason = Some(StopReason::DesignChange);
    } else if feasible && kkt_norm < settings.kkt_tol {
        report.converged = true;
        report.reason = Some(StopReason::Kkt);
    } else if k + 1 >= settings.max_iterations {
        report.reason = Some(StopReason::MaxIterations);
    }
    report
}
