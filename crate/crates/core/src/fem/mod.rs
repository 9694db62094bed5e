//! Finite-element analysis: element matrices, sparse assembly with
//! design-dependent moduli, partitioned factor/solve for prescribed
//! displacements, and strain energies.

pub mod band;
pub mod element;
pub mod oracle;
pub mod system;

pub use element::{
    constitutive_2d, constitutive_3d, element_stiffness_2d, element_stiffness_3d,
    strain_displacement_2d, strain_displacement_3d, ElementStiffness,
};
pub use oracle::condensed_energy_oracle;
pub use system::{DegreeSolution, GlobalSystem, SolveStats};
