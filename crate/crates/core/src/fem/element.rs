//! Element stiffness matrices at unit Young's modulus.
//!
//! 2D: plane-stress bilinear quadrilateral on a unit square, assembled from
//! the classical closed-form coefficient vector. 3D: trilinear hexahedron on
//! a unit cube via 2x2x2 Gauss quadrature (exact for the trilinear
//! integrand). Local node order is counterclockwise from the lower-left
//! corner, z-min quad first in 3D, matching [`crate::mesh::Mesh::element_nodes`].

use crate::error::{Error, Result};

/// Symmetric element stiffness matrix at unit Young's modulus.
#[derive(Debug, Clone)]
pub struct ElementStiffness {
    side: usize,
    matrix: Vec<f64>,
    poisson: f64,
}

impl ElementStiffness {
    /// Number of element displacement components (8 in 2D, 24 in 3D).
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn poisson(&self) -> f64 {
        self.poisson
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.side + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.matrix
    }

    /// u' K u at unit modulus.
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.side);
        let mut acc = 0.0;
        for (row, &ui) in u.iter().enumerate() {
            let r = &self.matrix[row * self.side..(row + 1) * self.side];
            let mut s = 0.0;
            for (kij, &uj) in r.iter().zip(u.iter()) {
                s += kij * uj;
            }
            acc += ui * s;
        }
        acc
    }

    fn symmetrized(side: usize, mut matrix: Vec<f64>, poisson: f64) -> Self {
        for i in 0..side {
            for j in (i + 1)..side {
                let avg = 0.5 * (matrix[i * side + j] + matrix[j * side + i]);
                matrix[i * side + j] = avg;
                matrix[j * side + i] = avg;
            }
        }
        ElementStiffness {
            side,
            matrix,
            poisson,
        }
    }
}

fn check_poisson(nu: f64) -> Result<()> {
    if !(0.0..0.5).contains(&nu) {
        return Err(Error::InvalidArgument(format!(
            "Poisson ratio must lie in [0, 0.5), got {nu}"
        )));
    }
    Ok(())
}

/// Plane-stress bilinear quad on the unit square, unit modulus, unit
/// thickness. Closed form: 1/(1-nu^2) times the classical coefficient
/// pattern.
pub fn element_stiffness_2d(nu: f64) -> Result<ElementStiffness> {
    check_poisson(nu)?;
    let k = [
        0.5 - nu / 6.0,
        0.125 + nu / 8.0,
        -0.25 - nu / 12.0,
        -0.125 + 3.0 * nu / 8.0,
        -0.25 + nu / 12.0,
        -0.125 - nu / 8.0,
        nu / 6.0,
        0.125 - 3.0 * nu / 8.0,
    ];
    // Index pattern of the coefficient vector over the 8x8 matrix.
    const PATTERN: [[usize; 8]; 8] = [
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ];
    let scale = 1.0 / (1.0 - nu * nu);
    let mut matrix = vec![0.0; 64];
    for (row, cols) in PATTERN.iter().enumerate() {
        for (col, &ki) in cols.iter().enumerate() {
            matrix[row * 8 + col] = scale * k[ki];
        }
    }
    Ok(ElementStiffness::symmetrized(8, matrix, nu))
}

/// Trilinear hex on the unit cube, isotropic elasticity, unit modulus,
/// integrated with 2x2x2 Gauss quadrature.
pub fn element_stiffness_3d(nu: f64) -> Result<ElementStiffness> {
    check_poisson(nu)?;
    let d = constitutive_3d(nu);
    let mut matrix = vec![0.0; 24 * 24];
    let g = 0.5 / f64::sqrt(3.0);
    let points = [0.5 - g, 0.5 + g];
    let weight = 0.125;
    for &x in &points {
        for &y in &points {
            for &z in &points {
                let b = strain_displacement_3d(x, y, z);
                accumulate_btdb(&mut matrix, &b, &d, weight);
            }
        }
    }
    Ok(ElementStiffness::symmetrized(24, matrix, nu))
}

/// matrix += w * B' D B for a 6x24 strain-displacement matrix.
fn accumulate_btdb(matrix: &mut [f64], b: &[[f64; 24]; 6], d: &[[f64; 6]; 6], w: f64) {
    let mut db = [[0.0; 24]; 6];
    for r in 0..6 {
        for c in 0..24 {
            let mut s = 0.0;
            for k in 0..6 {
                s += d[r][k] * b[k][c];
            }
            db[r][c] = s;
        }
    }
    for i in 0..24 {
        for j in 0..24 {
            let mut s = 0.0;
            for k in 0..6 {
                s += b[k][i] * db[k][j];
            }
            matrix[i * 24 + j] += w * s;
        }
    }
}

/// Plane-stress constitutive matrix at unit modulus, strain order
/// [eps_x, eps_y, gamma_xy].
pub fn constitutive_2d(nu: f64) -> [[f64; 3]; 3] {
    let f = 1.0 / (1.0 - nu * nu);
    [
        [f, nu * f, 0.0],
        [nu * f, f, 0.0],
        [0.0, 0.0, f * (1.0 - nu) / 2.0],
    ]
}

/// Isotropic 3D constitutive matrix at unit modulus, strain order
/// [eps_x, eps_y, eps_z, gamma_xy, gamma_yz, gamma_zx].
pub fn constitutive_3d(nu: f64) -> [[f64; 6]; 6] {
    let f = 1.0 / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let a = f * (1.0 - nu);
    let b = f * nu;
    let g = f * (1.0 - 2.0 * nu) / 2.0;
    [
        [a, b, b, 0.0, 0.0, 0.0],
        [b, a, b, 0.0, 0.0, 0.0],
        [b, b, a, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, g, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, g, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, g],
    ]
}

/// Local node offsets of the unit square, counterclockwise from lower-left.
const QUAD_NODES: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];

/// Local node offsets of the unit cube, z-min quad then z-max quad.
const HEX_NODES: [(f64, f64, f64); 8] = [
    (0.0, 0.0, 0.0),
    (1.0, 0.0, 0.0),
    (1.0, 1.0, 0.0),
    (0.0, 1.0, 0.0),
    (0.0, 0.0, 1.0),
    (1.0, 0.0, 1.0),
    (1.0, 1.0, 1.0),
    (0.0, 1.0, 1.0),
];

/// Strain-displacement matrix of the unit-square quad at local (x, y).
pub fn strain_displacement_2d(x: f64, y: f64) -> [[f64; 8]; 3] {
    let mut b = [[0.0; 8]; 3];
    for (i, &(cx, cy)) in QUAD_NODES.iter().enumerate() {
        let sx = if cx > 0.5 { 1.0 } else { -1.0 };
        let sy = if cy > 0.5 { 1.0 } else { -1.0 };
        let fx = if cx > 0.5 { x } else { 1.0 - x };
        let fy = if cy > 0.5 { y } else { 1.0 - y };
        let dndx = sx * fy;
        let dndy = fx * sy;
        b[0][2 * i] = dndx;
        b[1][2 * i + 1] = dndy;
        b[2][2 * i] = dndy;
        b[2][2 * i + 1] = dndx;
    }
    b
}

/// Strain-displacement matrix of the unit-cube hex at local (x, y, z).
pub fn strain_displacement_3d(x: f64, y: f64, z: f64) -> [[f64; 24]; 6] {
    let mut b = [[0.0; 24]; 6];
    for (i, &(cx, cy, cz)) in HEX_NODES.iter().enumerate() {
        let (sx, fx) = if cx > 0.5 { (1.0, x) } else { (-1.0, 1.0 - x) };
        let (sy, fy) = if cy > 0.5 { (1.0, y) } else { (-1.0, 1.0 - y) };
        let (sz, fz) = if cz > 0.5 { (1.0, z) } else { (-1.0, 1.0 - z) };
        let dndx = sx * fy * fz;
        let dndy = fx * sy * fz;
        let dndz = fx * fy * sz;
        let c = 3 * i;
        b[0][c] = dndx;
        b[1][c + 1] = dndy;
        b[2][c + 2] = dndz;
        b[3][c] = dndy;
        b[3][c + 1] = dndx;
        b[4][c + 1] = dndz;
        b[4][c + 2] = dndy;
        b[5][c] = dndz;
        b[5][c + 2] = dndx;
    }
    b
}
