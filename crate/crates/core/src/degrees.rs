//! Mechanism degrees and their prescribed interface displacement fields.
//!
//! A mechanism degree is one rigid-body motion of the top interface relative
//! to the fixed bottom interface. Bottom nodes are fixed at zero in all
//! components; top nodes receive the motion of the degree at unit stroke.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// One rigid-body motion of the top interface. `Tx`/`Ty`/`Rz` exist in 2D;
/// all six in 3D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismDegree {
    Tx,
    Ty,
    Tz,
    Rx,
    Ry,
    Rz,
}

impl MechanismDegree {
    pub const ALL_2D: [MechanismDegree; 3] =
        [MechanismDegree::Tx, MechanismDegree::Ty, MechanismDegree::Rz];

    pub const ALL_3D: [MechanismDegree; 6] = [
        MechanismDegree::Tx,
        MechanismDegree::Ty,
        MechanismDegree::Tz,
        MechanismDegree::Rx,
        MechanismDegree::Ry,
        MechanismDegree::Rz,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MechanismDegree::Tx => "tx",
            MechanismDegree::Ty => "ty",
            MechanismDegree::Tz => "tz",
            MechanismDegree::Rx => "rx",
            MechanismDegree::Ry => "ry",
            MechanismDegree::Rz => "rz",
        }
    }

    /// Whether this degree is meaningful on a mesh of the given dimension.
    pub fn valid_in(&self, three_d: bool) -> bool {
        three_d || Self::ALL_2D.contains(self)
    }
}

impl fmt::Display for MechanismDegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismDegree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tx" => Ok(MechanismDegree::Tx),
            "ty" => Ok(MechanismDegree::Ty),
            "tz" => Ok(MechanismDegree::Tz),
            "rx" => Ok(MechanismDegree::Rx),
            "ry" => Ok(MechanismDegree::Ry),
            "rz" => Ok(MechanismDegree::Rz),
            other => Err(Error::Config(format!("unknown mechanism degree \"{other}\""))),
        }
    }
}

/// How the in-plane rotation degree prescribes top-node displacements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationConvention {
    /// Unit x-translation combined with a linear v profile, zero at
    /// mid-width: u = 1, v = 1 - 2 x / nelx.
    #[default]
    Interface,
    /// Linearized rigid rotation about the domain centroid at unit angle.
    Centered,
}

/// Prescribed displacement values on the interface node components of one
/// degree. Sparse: only interface components are present.
#[derive(Debug, Clone)]
pub struct PrescribedField {
    /// (global displacement component, value), ascending by component.
    entries: Vec<(usize, f64)>,
}

impl PrescribedField {
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// Global component indices, ascending. This is the prescribed set `p`.
    pub fn components(&self) -> Vec<usize> {
        self.entries.iter().map(|&(d, _)| d).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|&(_, v)| v).collect()
    }

    /// Scales all prescribed values (stroke magnitude).
    pub fn scaled(&self, factor: f64) -> PrescribedField {
        PrescribedField {
            entries: self.entries.iter().map(|&(d, v)| (d, v * factor)).collect(),
        }
    }
}

/// Prescribed field of a 2D degree: bottom row fixed, top row moved.
pub fn prescribed_2d(
    degree: MechanismDegree,
    mesh: &Mesh,
    convention: RotationConvention,
) -> Result<PrescribedField> {
    if mesh.is_3d() {
        return Err(Error::InvalidArgument(
            "prescribed_2d called on a 3D mesh".into(),
        ));
    }
    if !degree.valid_in(false) {
        return Err(Error::InvalidArgument(format!(
            "degree {degree} is not available in 2D"
        )));
    }
    let nelx = mesh.nelx() as f64;
    let nely = mesh.nely() as f64;
    let mut entries = Vec::new();
    for &node in mesh.interface_bottom() {
        entries.push((2 * node, 0.0));
        entries.push((2 * node + 1, 0.0));
    }
    for &node in mesh.interface_top() {
        let (i, _, _) = mesh.node_coords(node);
        let x = i as f64;
        let (u, v) = match degree {
            MechanismDegree::Tx => (1.0, 0.0),
            MechanismDegree::Ty => (0.0, 1.0),
            MechanismDegree::Rz => match convention {
                RotationConvention::Interface => (1.0, 1.0 - 2.0 * x / nelx),
                RotationConvention::Centered => (-nely / 2.0, x - nelx / 2.0),
            },
            _ => unreachable!(),
        };
        entries.push((2 * node, u));
        entries.push((2 * node + 1, v));
    }
    entries.sort_unstable_by_key(|&(d, _)| d);
    Ok(PrescribedField { entries })
}

/// Prescribed field of a 3D degree: bottom face fixed, top face moved.
/// Rotations are linearized rigid motions about the domain centroid at unit
/// angle: u = axis x (r - c).
pub fn prescribed_3d(degree: MechanismDegree, mesh: &Mesh) -> Result<PrescribedField> {
    if !mesh.is_3d() {
        return Err(Error::InvalidArgument(
            "prescribed_3d called on a 2D mesh".into(),
        ));
    }
    let cx = mesh.nelx() as f64 / 2.0;
    let cy = mesh.nely() as f64 / 2.0;
    let cz = mesh.nelz().unwrap() as f64 / 2.0;
    let mut entries = Vec::new();
    for &node in mesh.interface_bottom() {
        for c in 0..3 {
            entries.push((3 * node + c, 0.0));
        }
    }
    for &node in mesh.interface_top() {
        let (i, j, k) = mesh.node_coords(node);
        let (rx, ry, rz) = (i as f64 - cx, j as f64 - cy, k as f64 - cz);
        let (u, v, w) = match degree {
            MechanismDegree::Tx => (1.0, 0.0, 0.0),
            MechanismDegree::Ty => (0.0, 1.0, 0.0),
            MechanismDegree::Tz => (0.0, 0.0, 1.0),
            // axis x (r - c) for unit rotation about each coordinate axis
            MechanismDegree::Rx => (0.0, -rz, ry),
            MechanismDegree::Ry => (rz, 0.0, -rx),
            MechanismDegree::Rz => (-ry, rx, 0.0),
        };
        entries.push((3 * node, u));
        entries.push((3 * node + 1, v));
        entries.push((3 * node + 2, w));
    }
    entries.sort_unstable_by_key(|&(d, _)| d);
    Ok(PrescribedField { entries })
}

/// Prescribed field for either dimension.
pub fn prescribed(
    degree: MechanismDegree,
    mesh: &Mesh,
    convention: RotationConvention,
) -> Result<PrescribedField> {
    if mesh.is_3d() {
        prescribed_3d(degree, mesh)
    } else {
        prescribed_2d(degree, mesh, convention)
    }
}

/// Validated DOC/DOF degree sets. Degree order is DOCs first, then DOFs.
#[derive(Debug, Clone)]
pub struct DegreeSets {
    doc: Vec<MechanismDegree>,
    dof: Vec<MechanismDegree>,
}

impl DegreeSets {
    pub fn doc(&self) -> &[MechanismDegree] {
        &self.doc
    }

    pub fn dof(&self) -> &[MechanismDegree] {
        &self.dof
    }

    /// All active degrees, DOCs first.
    pub fn all(&self) -> Vec<MechanismDegree> {
        self.doc.iter().chain(self.dof.iter()).copied().collect()
    }

    pub fn n_doc(&self) -> usize {
        self.doc.len()
    }

    pub fn n_dof(&self) -> usize {
        self.dof.len()
    }
}

/// Checks DOC/DOF lists: disjoint, each nonempty, no duplicates, valid for
/// the mesh dimension.
pub fn validate_degree_sets(
    doc: &[MechanismDegree],
    dof: &[MechanismDegree],
    three_d: bool,
) -> Result<DegreeSets> {
    if doc.is_empty() {
        return Err(Error::Config("at least one DOC is required".into()));
    }
    if dof.is_empty() {
        return Err(Error::Config("at least one DOF is required".into()));
    }
    let mut seen = Vec::new();
    for &d in doc.iter().chain(dof.iter()) {
        if !d.valid_in(three_d) {
            return Err(Error::Config(format!(
                "degree {d} is only available in 3D problems"
            )));
        }
        if seen.contains(&d) {
            let side = if doc.contains(&d) && dof.contains(&d) {
                "appears in both doc and dof"
            } else {
                "is listed twice"
            };
            return Err(Error::Config(format!("degree {d} {side}")));
        }
        seen.push(d);
    }
    Ok(DegreeSets {
        doc: doc.to_vec(),
        dof: dof.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    fn field_value(f: &PrescribedField, dof: usize) -> f64 {
        f.entries()
            .iter()
            .find(|&&(d, _)| d == dof)
            .map(|&(_, v)| v)
            .unwrap()
    }

    #[test]
    fn ty_moves_top_nodes_up() {
        let mesh = build_mesh(4, 3, None).unwrap();
        let f = prescribed_2d(MechanismDegree::Ty, &mesh, RotationConvention::default()).unwrap();
        for &node in mesh.interface_top() {
            assert_eq!(field_value(&f, 2 * node), 0.0);
            assert_eq!(field_value(&f, 2 * node + 1), 1.0);
        }
        for &node in mesh.interface_bottom() {
            assert_eq!(field_value(&f, 2 * node), 0.0);
            assert_eq!(field_value(&f, 2 * node + 1), 0.0);
        }
    }

    #[test]
    fn rz_profile_is_linear_in_x() {
        let mesh = build_mesh(4, 4, None).unwrap();
        let f = prescribed_2d(MechanismDegree::Rz, &mesh, RotationConvention::default()).unwrap();
        // midpoint: v = 0; corners: +1 at x = 0, -1 at x = nelx
        let mid = mesh.node_id(2, 4, 0);
        assert_eq!(field_value(&f, 2 * mid + 1), 0.0);
        let left = mesh.node_id(0, 4, 0);
        let right = mesh.node_id(4, 4, 0);
        assert_eq!(field_value(&f, 2 * left + 1), 1.0);
        assert_eq!(field_value(&f, 2 * right + 1), -1.0);
        // u = 1 across the whole top interface
        for &node in mesh.interface_top() {
            assert_eq!(field_value(&f, 2 * node), 1.0);
        }
    }

    #[test]
    fn centered_rotation_is_affine_and_zero_at_center() {
        let mesh = build_mesh(6, 4, None).unwrap();
        let f = prescribed_2d(MechanismDegree::Rz, &mesh, RotationConvention::Centered).unwrap();
        let mid = mesh.node_id(3, 4, 0);
        assert_eq!(field_value(&f, 2 * mid + 1), 0.0);
        for &node in mesh.interface_top() {
            assert_eq!(field_value(&f, 2 * node), -2.0); // -nely/2
        }
    }

    #[test]
    fn tz_is_unit_lift_of_the_top_face() {
        let mesh = build_mesh(2, 2, Some(2)).unwrap();
        let f = prescribed_3d(MechanismDegree::Tz, &mesh).unwrap();
        for &node in mesh.interface_top() {
            assert_eq!(field_value(&f, 3 * node), 0.0);
            assert_eq!(field_value(&f, 3 * node + 1), 0.0);
            assert_eq!(field_value(&f, 3 * node + 2), 1.0);
        }
    }

    #[test]
    fn rz_3d_vanishes_on_the_centroid_axis() {
        let mesh = build_mesh(2, 2, Some(2)).unwrap();
        let f = prescribed_3d(MechanismDegree::Rz, &mesh).unwrap();
        let center = mesh.node_id(1, 1, 2);
        assert_eq!(field_value(&f, 3 * center), 0.0);
        assert_eq!(field_value(&f, 3 * center + 1), 0.0);
    }

    #[test]
    fn rx_3d_matches_the_cross_product() {
        // rx at a top node with y = c_y + d: u = x_hat x (r - c)
        // = (0, -(z - c_z), y - c_y), so v = -nelz/2 and w = d.
        let mesh = build_mesh(2, 4, Some(2)).unwrap();
        let f = prescribed_3d(MechanismDegree::Rx, &mesh).unwrap();
        let node = mesh.node_id(1, 3, 2); // y = 3 = c_y + 1
        assert_eq!(field_value(&f, 3 * node), 0.0);
        assert_eq!(field_value(&f, 3 * node + 1), -1.0);
        assert_eq!(field_value(&f, 3 * node + 2), 1.0);
    }

    #[test]
    fn translations_preserve_top_node_distances() {
        let mesh = build_mesh(3, 3, None).unwrap();
        for deg in [MechanismDegree::Tx, MechanismDegree::Ty] {
            let f = prescribed_2d(deg, &mesh, RotationConvention::default()).unwrap();
            let top = mesh.interface_top();
            for pair in top.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                let du = field_value(&f, 2 * a) - field_value(&f, 2 * b);
                let dv = field_value(&f, 2 * a + 1) - field_value(&f, 2 * b + 1);
                assert_eq!(du, 0.0);
                assert_eq!(dv, 0.0);
            }
        }
    }

    #[test]
    fn degree_set_validation() {
        let ok = validate_degree_sets(&[MechanismDegree::Ty], &[MechanismDegree::Tx], false);
        assert!(ok.is_ok());
        assert_eq!(ok.unwrap().all(), vec![MechanismDegree::Ty, MechanismDegree::Tx]);

        let overlap = validate_degree_sets(&[MechanismDegree::Tx], &[MechanismDegree::Tx], false);
        assert!(matches!(overlap, Err(Error::Config(_))));

        let empty = validate_degree_sets(&[], &[MechanismDegree::Tx], false);
        assert!(matches!(empty, Err(Error::Config(_))));

        let dup = validate_degree_sets(
            &[MechanismDegree::Ty, MechanismDegree::Ty],
            &[MechanismDegree::Tx],
            false,
        );
        assert!(dup.is_err());

        let bad_dim = validate_degree_sets(&[MechanismDegree::Rx], &[MechanismDegree::Tx], false);
        assert!(bad_dim.is_err());

        assert!(validate_degree_sets(&[MechanismDegree::Rx], &[MechanismDegree::Tx], true).is_ok());
    }

    #[test]
    fn degree_names_round_trip() {
        for d in MechanismDegree::ALL_3D {
            assert_eq!(d.name().parse::<MechanismDegree>().unwrap(), d);
        }
        assert!("qz".parse::<MechanismDegree>().is_err());
    }
}
