//! Topology optimization of short-stroke flexures.
//!
//! The engine maximizes the strain energy of prescribed mechanism
//! degrees-of-constraint while bounding the strain energy of
//! degrees-of-freedom, all evaluated under prescribed displacements of a
//! rigid top interface relative to a fixed bottom interface. Variants add
//! erode/dilate robustness and aggregated stress constraints.

pub mod degrees;
pub mod driver;
pub mod error;
pub mod fem;
pub mod field_ops;
pub mod mesh;
pub mod optimizer;
pub mod responses;
pub mod variants;

pub use degrees::{
    prescribed, prescribed_2d, prescribed_3d, validate_degree_sets, DegreeSets, MechanismDegree,
    PrescribedField, RotationConvention,
};
pub use error::{Error, Result};
pub use fem::{condensed_energy_oracle, DegreeSolution, GlobalSystem, SolveStats};
pub use field_ops::{build_filter, FilterOperator, MirrorAxis, PhysicalField};
pub use mesh::{build_mesh, interface_sets, Mesh};

pub use driver::{measure_non_discreteness, run, RunConfig, RunResult};
pub use optimizer::{check_termination, StopReason, TerminationReport, TerminationSettings};
pub use responses::{EnergyBoundMode, ObjectiveKind};
pub use variants::{RunMode, VariantConfig};
