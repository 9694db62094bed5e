//! Dense reference path for strain energies.
//!
//! Assembles the full matrix with plain triple loops, condenses it onto the
//! prescribed components and evaluates 1/2 u_p' S u_p with dense
//! factorizations. Deliberately shares no code with the banded production
//! path; intended for verification at small scale.

use crate::degrees::PrescribedField;
use crate::error::{Error, Result};
use crate::fem::element::{element_stiffness_2d, element_stiffness_3d};
use crate::mesh::Mesh;

const ELEMENT_GUARD: usize = 10_000;

/// Strain energy of a prescribed field via dense Schur-complement
/// condensation. Refuses meshes beyond the test-scale guard.
pub fn condensed_energy_oracle(
    mesh: &Mesh,
    nu: f64,
    modulus_fractions: &[f64],
    field: &PrescribedField,
) -> Result<f64> {
    let n_el = mesh.n_elements();
    if n_el > ELEMENT_GUARD {
        return Err(Error::OracleScale {
            n: n_el,
            limit: ELEMENT_GUARD,
        });
    }
    if modulus_fractions.len() != n_el {
        return Err(Error::InvalidArgument(format!(
            "expected {} modulus fractions, got {}",
            n_el,
            modulus_fractions.len()
        )));
    }
    let ke = if mesh.is_3d() {
        element_stiffness_3d(nu)?
    } else {
        element_stiffness_2d(nu)?
    };

    let n = mesh.n_dofs();
    let mut k = vec![0.0; n * n];
    for e in 0..n_el {
        let dofs = mesh.element_dof_map(e)?;
        let f = modulus_fractions[e];
        for (a, &ga) in dofs.iter().enumerate() {
            for (b, &gb) in dofs.iter().enumerate() {
                k[ga * n + gb] += f * ke.at(a, b);
            }
        }
    }

    let prescribed: Vec<usize> = field.components();
    let up = field.values();
    let mut is_prescribed = vec![false; n];
    for &d in &prescribed {
        if d >= n {
            return Err(Error::InvalidArgument(format!(
                "prescribed component {d} out of range"
            )));
        }
        is_prescribed[d] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&d| !is_prescribed[d]).collect();

    // w = K_fp u_p
    let mut w = vec![0.0; free.len()];
    for (fi, &gf) in free.iter().enumerate() {
        let mut s = 0.0;
        for (pi, &gp) in prescribed.iter().enumerate() {
            s += k[gf * n + gp] * up[pi];
        }
        w[fi] = s;
    }

    // z = K_ff^-1 w by dense Cholesky
    let nf = free.len();
    let mut kff = vec![0.0; nf * nf];
    for (a, &ga) in free.iter().enumerate() {
        for (b, &gb) in free.iter().enumerate() {
            kff[a * nf + b] = k[ga * n + gb];
        }
    }
    let z = dense_spd_solve(&mut kff, nf, &w)?;

    // E = 1/2 (u_p' K_pp u_p - w' z)
    let mut upp = 0.0;
    for (a, &ga) in prescribed.iter().enumerate() {
        for (b, &gb) in prescribed.iter().enumerate() {
            upp += up[a] * k[ga * n + gb] * up[b];
        }
    }
    let wz: f64 = w.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
    Ok(0.5 * (upp - wz))
}

/// Dense Cholesky solve; overwrites `a` with the factor.
fn dense_spd_solve(a: &mut [f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::Singular { pivot: i });
                }
                a[i * n + i] = s.sqrt();
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    let mut x = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            x[i] = x[i] - a[i * n + k] * x[k];
        }
        x[i] /= a[i * n + i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            x[i] = x[i] - a[k * n + i] * x[k];
        }
        x[i] /= a[i * n + i];
    }
    Ok(x)
}
