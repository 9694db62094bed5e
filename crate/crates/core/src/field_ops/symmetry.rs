//! Symmetry enforcement by averaging mirror element pairs.
//!
//! Values and sensitivities are averaged with the same operator, so the
//! optimizer effectively works on the symmetric reduced problem and cannot
//! drift away from a symmetric optimum through round-off.

use serde::{Deserialize, Serialize};

use crate::mesh::Mesh;

/// Mirror direction: `X` pairs elements across the vertical mid-plane
/// (ex <-> nelx-1-ex), and likewise for `Y` and `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MirrorAxis {
    X,
    Y,
    Z,
}

/// Averages mirror pairs in place for each requested axis.
pub fn symmetrize(mesh: &Mesh, values: &mut [f64], axes: &[MirrorAxis]) {
    assert_eq!(values.len(), mesh.n_elements());
    for &axis in axes {
        mirror_average(mesh, values, axis);
    }
}

/// Gradient counterpart of [`symmetrize`]; the averaging operator is its own
/// consistent pull-back for mirror-symmetric designs.
pub fn symmetrize_gradient(mesh: &Mesh, grad: &mut [f64], axes: &[MirrorAxis]) {
    symmetrize(mesh, grad, axes);
}

fn mirror_average(mesh: &Mesh, values: &mut [f64], axis: MirrorAxis) {
    let nelx = mesh.nelx();
    let nely = mesh.nely();
    let nelz = mesh.nelz().unwrap_or(1);
    for ex in 0..nelx {
        for ey in 0..nely {
            for ez in 0..nelz {
                let (mx, my, mz) = match axis {
                    MirrorAxis::X => (nelx - 1 - ex, ey, ez),
                    MirrorAxis::Y => (ex, nely - 1 - ey, ez),
                    MirrorAxis::Z => (ex, ey, nelz - 1 - ez),
                };
                let a = mesh.element_id(ex, ey, ez);
                let b = mesh.element_id(mx, my, mz);
                if a < b {
                    let avg = 0.5 * (values[a] + values[b]);
                    values[a] = avg;
                    values[b] = avg;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    #[test]
    fn pair_average_on_a_two_element_strip() {
        let mesh = build_mesh(2, 1, None).unwrap();
        let mut x = vec![0.2, 0.8];
        symmetrize(&mesh, &mut x, &[MirrorAxis::X]);
        assert_eq!(x, vec![0.5, 0.5]);
    }

    #[test]
    fn symmetric_fields_are_fixed_points() {
        let mesh = build_mesh(4, 2, None).unwrap();
        let mut x = vec![0.0; 8];
        for ex in 0..4 {
            for ey in 0..2 {
                x[mesh.element_id(ex, ey, 0)] = (ex.min(3 - ex) * 10 + ey) as f64;
            }
        }
        let before = x.clone();
        symmetrize(&mesh, &mut x, &[MirrorAxis::X]);
        assert_eq!(x, before);
    }

    #[test]
    fn idempotent_and_mirror_invariant() {
        let mesh = build_mesh(5, 3, None).unwrap();
        let mut x: Vec<f64> = (0..15).map(|i| (i as f64 * 0.618).fract()).collect();
        let mut mirrored = vec![0.0; 15];
        for ex in 0..5 {
            for ey in 0..3 {
                mirrored[mesh.element_id(4 - ex, ey, 0)] = x[mesh.element_id(ex, ey, 0)];
            }
        }
        symmetrize(&mesh, &mut x, &[MirrorAxis::X]);
        symmetrize(&mesh, &mut mirrored, &[MirrorAxis::X]);
        assert_eq!(x, mirrored);

        let once = x.clone();
        symmetrize(&mesh, &mut x, &[MirrorAxis::X]);
        assert_eq!(x, once);
    }

    #[test]
    fn double_axis_gives_quadrant_symmetry() {
        let mesh = build_mesh(4, 4, None).unwrap();
        let mut x: Vec<f64> = (0..16).map(|i| i as f64).collect();
        symmetrize(&mesh, &mut x, &[MirrorAxis::X, MirrorAxis::Y]);
        for ex in 0..4 {
            for ey in 0..4 {
                let v = x[mesh.element_id(ex, ey, 0)];
                assert_eq!(v, x[mesh.element_id(3 - ex, ey, 0)]);
                assert_eq!(v, x[mesh.element_id(ex, 3 - ey, 0)]);
            }
        }
    }

    #[test]
    fn z_mirror_on_a_3d_mesh() {
        let mesh = build_mesh(1, 1, Some(2)).unwrap();
        let mut x = vec![0.0, 1.0];
        symmetrize(&mesh, &mut x, &[MirrorAxis::Z]);
        assert_eq!(x, vec![0.5, 0.5]);
    }
}
