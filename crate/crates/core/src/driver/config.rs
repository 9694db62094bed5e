//! Run configuration: constants, problem definition and variant settings.
//!
//! A run is fully described by one TOML file; the CLI exposes the common
//! fields as flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::degrees::{validate_degree_sets, DegreeSets, MechanismDegree, RotationConvention};
use crate::error::{Error, Result};
use crate::field_ops::MirrorAxis;
use crate::optimizer::{MoveLimitParams, TerminationSettings};
use crate::responses::{EnergyBoundMode, ObjectiveKind};
use crate::variants::VariantConfig;

/// Material/regularization constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Constants {
    /// Void-to-solid stiffness ratio.
    pub stiffness_ratio: f64,
    pub poisson: f64,
    pub penalty: f64,
    /// Filter radius in element widths.
    pub filter_radius: f64,
    /// Homogeneous initial design value.
    pub x_init: f64,
    /// Lower bound on raw design variables (keeps the design set open at 0).
    pub x_min: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            stiffness_ratio: 1e-6,
            poisson: 0.3,
            penalty: 3.0,
            filter_radius: 2.0,
            x_init: 0.5,
            x_min: 1e-3,
        }
    }
}

/// Complete description of one optimization run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub nelx: usize,
    pub nely: usize,
    pub nelz: Option<usize>,
    /// Mechanism degrees to stiffen.
    pub doc: Vec<MechanismDegree>,
    /// Mechanism degrees to keep compliant.
    pub dof: Vec<MechanismDegree>,
    /// Energy bound per DOF, same order as `dof`.
    pub emax: Vec<f64>,
    /// Whether `emax` bounds the normalized or the raw energy.
    pub emax_mode: EnergyBoundMode,
    pub constants: Constants,
    #[serde(flatten)]
    pub variant: VariantConfig,
    /// Mirror axes enforced on the design every iteration.
    pub symmetry: Vec<MirrorAxis>,
    pub objective: ObjectiveKind,
    /// Optional per-DOC objective weights.
    pub weights: Option<Vec<f64>>,
    /// Optional volume-fraction bound on the physical design.
    pub volume_fraction: Option<f64>,
    pub rotation_convention: RotationConvention,
    pub termination: TerminationSettings,
    pub move_limit: MoveLimitParams,
    /// Seeded pseudo-random initial design instead of the homogeneous one.
    pub seed: Option<u64>,
    /// Worker threads; the analysis pipeline is deterministic and currently
    /// runs serially regardless.
    pub threads: usize,
    pub output_dir: Option<PathBuf>,
    /// Write a density snapshot every this many iterations.
    pub snapshot_every: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            nelx: 0,
            nely: 0,
            nelz: None,
            doc: Vec::new(),
            dof: Vec::new(),
            emax: Vec::new(),
            emax_mode: EnergyBoundMode::default(),
            constants: Constants::default(),
            variant: VariantConfig::default(),
            symmetry: vec![MirrorAxis::X],
            objective: ObjectiveKind::default(),
            weights: None,
            volume_fraction: None,
            rotation_convention: RotationConvention::default(),
            termination: TerminationSettings::default(),
            move_limit: MoveLimitParams::default(),
            seed: None,
            threads: 1,
            output_dir: None,
            snapshot_every: None,
        }
    }
}

impl RunConfig {
    /// Minimal problem setup from the canonical call signature.
    pub fn flexure(
        nelx: usize,
        nely: usize,
        doc: &[MechanismDegree],
        dof: &[MechanismDegree],
        emax: &[f64],
    ) -> RunConfig {
        RunConfig {
            nelx,
            nely,
            doc: doc.to_vec(),
            dof: dof.to_vec(),
            emax: emax.to_vec(),
            ..RunConfig::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(format!("cannot parse config: {e}")))
    }

    pub fn from_toml_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Checks everything that does not need file access, before any
    /// allocation. Returns the validated degree sets.
    pub fn validate(&self) -> Result<DegreeSets> {
        if self.nelx == 0 || self.nely == 0 || self.nelz == Some(0) {
            return Err(Error::Config(format!(
                "element counts must be positive (got {} x {}{})",
                self.nelx,
                self.nely,
                self.nelz.map(|z| format!(" x {z}")).unwrap_or_default()
            )));
        }
        let sets = validate_degree_sets(&self.doc, &self.dof, self.nelz.is_some())?;
        if self.emax.len() != self.dof.len() {
            return Err(Error::Config(format!(
                "{} energy bounds for {} DOFs",
                self.emax.len(),
                self.dof.len()
            )));
        }
        if let Some(bad) = self.emax.iter().find(|&&e| !(e > 0.0)) {
            return Err(Error::Config(format!(
                "energy bounds must be positive, got {bad}"
            )));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.doc.len() {
                return Err(Error::Config(format!(
                    "{} objective weights for {} DOCs",
                    w.len(),
                    self.doc.len()
                )));
            }
        }
        let c = &self.constants;
        if !(c.stiffness_ratio > 0.0 && c.stiffness_ratio < 1.0) {
            return Err(Error::Config("stiffness ratio must lie in (0, 1)".into()));
        }
        if !(0.0..0.5).contains(&c.poisson) {
            return Err(Error::Config("Poisson ratio must lie in [0, 0.5)".into()));
        }
        if !(c.penalty >= 1.0) {
            return Err(Error::Config("SIMP penalty must be >= 1".into()));
        }
        if !(c.filter_radius >= 1.0) {
            return Err(Error::Config("filter radius must be >= 1 element".into()));
        }
        if !(c.x_min > 0.0 && c.x_min < 1.0) {
            return Err(Error::Config("design floor must lie in (0, 1)".into()));
        }
        if !(c.x_init >= c.x_min && c.x_init <= 1.0) {
            return Err(Error::Config(format!(
                "initial design {} outside [{}, 1]",
                c.x_init, c.x_min
            )));
        }
        if let Some(v) = self.volume_fraction {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config("volume fraction must lie in (0, 1]".into()));
            }
        }
        if self.threads == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        if self.termination.max_iterations == 0 {
            return Err(Error::Config("iteration cap must be positive".into()));
        }
        Ok(sets)
    }

    /// Filter radius, honoring the robust override.
    pub fn effective_filter_radius(&self) -> f64 {
        if self.variant.mode.is_robust() {
            self.variant
                .robust
                .filter_radius
                .unwrap_or(self.constants.filter_radius)
        } else {
            self.constants.filter_radius
        }
    }
}
