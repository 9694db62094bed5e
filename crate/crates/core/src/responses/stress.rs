//! Relaxed, aggregated stress constraints on DOF load cases.
//!
//! Von Mises stress is evaluated at element centroids with the solid
//! constitutive law. Relaxation scales each element ratio by density^q so
//! void elements cannot trigger the constraint; aggregation replaces the
//! per-element constraints by one smooth power-mean bound. An adaptive
//! scale factor (carried by the caller, frozen during differentiation)
//! keeps the aggregated value tracking the true maximum.

use crate::error::{Error, Result};
use crate::fem::{constitutive_2d, constitutive_3d, strain_displacement_2d, strain_displacement_3d, DegreeSolution, GlobalSystem};
use crate::field_ops::{FilterOperator, PhysicalField};
use crate::mesh::Mesh;

/// Stress-constraint parameters.
#[derive(Debug, Clone, Copy)]
pub struct StressSettings {
    /// Allowable stress.
    pub sigma_bar: f64,
    /// Power-mean aggregation exponent.
    pub p_agg: f64,
    /// Relaxation exponent on the physical density.
    pub q_relax: f64,
}

/// Aggregated stress constraint of one DOF case.
#[derive(Debug, Clone)]
pub struct StressResponse {
    /// g = scale * power-mean(relaxed ratios) - 1.
    pub g: f64,
    /// dg/dx per raw design variable (adjoint).
    pub dg: Vec<f64>,
    /// max_j density_j^q sigma_vm_j / sigma_bar.
    pub max_ratio: f64,
    /// Power-mean of the relaxed ratios (before scaling).
    pub mean_ratio: f64,
}

/// Centroid von Mises stress per element at solid modulus.
pub fn von_mises(mesh: &Mesh, u: &[f64], nu: f64) -> Vec<f64> {
    let n = mesh.n_elements();
    let mut vm = Vec::with_capacity(n);
    if mesh.is_3d() {
        let d = constitutive_3d(nu);
        let b = strain_displacement_3d(0.5, 0.5, 0.5);
        let mut ue = [0.0; 24];
        for e in 0..n {
            gather(mesh, e, u, &mut ue);
            let mut strain = [0.0; 6];
            for (r, row) in b.iter().enumerate() {
                strain[r] = row.iter().zip(ue.iter()).map(|(a, b)| a * b).sum();
            }
            let mut sigma = [0.0; 6];
            for r in 0..6 {
                sigma[r] = (0..6).map(|c| d[r][c] * strain[c]).sum();
            }
            vm.push(von_mises_3d(&sigma));
        }
    } else {
        let d = constitutive_2d(nu);
        let b = strain_displacement_2d(0.5, 0.5);
        let mut ue = [0.0; 8];
        for e in 0..n {
            gather(mesh, e, u, &mut ue);
            let mut strain = [0.0; 3];
            for (r, row) in b.iter().enumerate() {
                strain[r] = row.iter().zip(ue.iter()).map(|(a, b)| a * b).sum();
            }
            let sigma = [
                d[0][0] * strain[0] + d[0][1] * strain[1],
                d[1][0] * strain[0] + d[1][1] * strain[1],
                d[2][2] * strain[2],
            ];
            vm.push(von_mises_2d(&sigma));
        }
    }
    vm
}

fn gather(mesh: &Mesh, e: usize, u: &[f64], ue: &mut [f64]) {
    let m = mesh.dofs_per_node();
    for (l, node) in mesh.element_nodes(e).unwrap().into_iter().enumerate() {
        for c in 0..m {
            ue[l * m + c] = u[node * m + c];
        }
    }
}

fn von_mises_2d(s: &[f64; 3]) -> f64 {
    (s[0] * s[0] + s[1] * s[1] - s[0] * s[1] + 3.0 * s[2] * s[2]).max(0.0).sqrt()
}

fn von_mises_3d(s: &[f64; 6]) -> f64 {
    let d01 = s[0] - s[1];
    let d12 = s[1] - s[2];
    let d20 = s[2] - s[0];
    (0.5 * (d01 * d01 + d12 * d12 + d20 * d20)
        + 3.0 * (s[3] * s[3] + s[4] * s[4] + s[5] * s[5]))
        .max(0.0)
        .sqrt()
}

/// d(vm)/d(sigma) for the 2D stress vector; zero at vanishing stress.
fn dvm_2d(s: &[f64; 3], vm: f64) -> [f64; 3] {
    if vm < 1e-300 {
        return [0.0; 3];
    }
    [
        (2.0 * s[0] - s[1]) / (2.0 * vm),
        (2.0 * s[1] - s[0]) / (2.0 * vm),
        3.0 * s[2] / vm,
    ]
}

fn dvm_3d(s: &[f64; 6], vm: f64) -> [f64; 6] {
    if vm < 1e-300 {
        return [0.0; 6];
    }
    [
        (2.0 * s[0] - s[1] - s[2]) / (2.0 * vm),
        (2.0 * s[1] - s[0] - s[2]) / (2.0 * vm),
        (2.0 * s[2] - s[0] - s[1]) / (2.0 * vm),
        3.0 * s[3] / vm,
        3.0 * s[4] / vm,
        3.0 * s[5] / vm,
    ]
}

/// Evaluates the aggregated relaxed stress constraint of one DOF case and
/// its sensitivity via one adjoint substitution on the factored system.
///
/// `scale` is the adaptive aggregation scale; it is treated as a constant
/// here and updated between iterations by the caller.
#[allow(clippy::too_many_arguments)]
pub fn stress_constraint(
    mesh: &Mesh,
    system: &mut GlobalSystem,
    solution: &DegreeSolution,
    sigma_vm: &[f64],
    field: &PhysicalField,
    filter: &FilterOperator,
    settings: &StressSettings,
    scale: f64,
) -> Result<StressResponse> {
    if settings.p_agg < 1.0 {
        return Err(Error::Config(format!(
            "aggregation exponent must be >= 1, got {}",
            settings.p_agg
        )));
    }
    if !(settings.sigma_bar > 0.0) {
        return Err(Error::Config(format!(
            "allowable stress must be positive, got {}",
            settings.sigma_bar
        )));
    }
    let n = mesh.n_elements();
    debug_assert_eq!(sigma_vm.len(), n);
    let p = settings.p_agg;
    let q = settings.q_relax;
    let sb = settings.sigma_bar;

    // relaxed ratios s_j = density^q vm / sigma_bar and their power mean
    let mut ratios = Vec::with_capacity(n);
    let mut max_ratio = 0.0_f64;
    let mut mean_pow = 0.0;
    for e in 0..n {
        let s = field.density[e].powf(q) * sigma_vm[e] / sb;
        max_ratio = max_ratio.max(s);
        mean_pow += s.powf(p);
        ratios.push(s);
    }
    mean_pow /= n as f64;
    let mean_ratio = mean_pow.powf(1.0 / p);
    let g = scale * mean_ratio - 1.0;

    if mean_ratio == 0.0 {
        // fully unstressed/void: constraint is -1 with zero gradient
        return Ok(StressResponse {
            g,
            dg: vec![0.0; n],
            max_ratio,
            mean_ratio,
        });
    }

    // dg/ds_j = scale * mean^(1-p) * s_j^(p-1) / N
    let lead = scale * mean_ratio.powf(1.0 - p) / n as f64;

    // explicit density term plus adjoint load over displacements
    let mut dg_phys = vec![0.0; n];
    let mut adj_load = vec![0.0; mesh.n_dofs()];
    let nu = system.element_stiffness().poisson();
    let m = mesh.dofs_per_node();
    if mesh.is_3d() {
        let d = constitutive_3d(nu);
        let b = strain_displacement_3d(0.5, 0.5, 0.5);
        let mut ue = [0.0; 24];
        for e in 0..n {
            if ratios[e] == 0.0 {
                continue;
            }
            let dgds = lead * ratios[e].powf(p - 1.0);
            dg_phys[e] = dgds * q * field.density[e].powf(q - 1.0) * sigma_vm[e] / sb;
            gather(mesh, e, &solution.u, &mut ue);
            let mut strain = [0.0; 6];
            for (r, row) in b.iter().enumerate() {
                strain[r] = row.iter().zip(ue.iter()).map(|(a, b)| a * b).sum();
            }
            let mut sigma = [0.0; 6];
            for r in 0..6 {
                sigma[r] = (0..6).map(|c| d[r][c] * strain[c]).sum();
            }
            let dvm = dvm_3d(&sigma, sigma_vm[e]);
            // dvm' D B scattered with the chain coefficient
            let coeff = dgds * field.density[e].powf(q) / sb;
            let mut dvm_d = [0.0; 6];
            for c in 0..6 {
                dvm_d[c] = (0..6).map(|r| dvm[r] * d[r][c]).sum();
            }
            for (l, node) in mesh.element_nodes(e).unwrap().into_iter().enumerate() {
                for c in 0..m {
                    let col = l * m + c;
                    let v: f64 = (0..6).map(|r| dvm_d[r] * b[r][col]).sum();
                    adj_load[node * m + c] += coeff * v;
                }
            }
        }
    } else {
        let d = constitutive_2d(nu);
        let b = strain_displacement_2d(0.5, 0.5);
        let mut ue = [0.0; 8];
        for e in 0..n {
            if ratios[e] == 0.0 {
                continue;
            }
            let dgds = lead * ratios[e].powf(p - 1.0);
            dg_phys[e] = dgds * q * field.density[e].powf(q - 1.0) * sigma_vm[e] / sb;
            gather(mesh, e, &solution.u, &mut ue);
            let mut strain = [0.0; 3];
            for (r, row) in b.iter().enumerate() {
                strain[r] = row.iter().zip(ue.iter()).map(|(a, b)| a * b).sum();
            }
            let sigma = [
                d[0][0] * strain[0] + d[0][1] * strain[1],
                d[1][0] * strain[0] + d[1][1] * strain[1],
                d[2][2] * strain[2],
            ];
            let dvm = dvm_2d(&sigma, sigma_vm[e]);
            let coeff = dgds * field.density[e].powf(q) / sb;
            let mut dvm_d = [0.0; 3];
            for c in 0..3 {
                dvm_d[c] = (0..3).map(|r| dvm[r] * d[r][c]).sum();
            }
            for (l, node) in mesh.element_nodes(e).unwrap().into_iter().enumerate() {
                for c in 0..m {
                    let col = l * m + c;
                    let v: f64 = (0..3).map(|r| dvm_d[r] * b[r][col]).sum();
                    adj_load[node * m + c] += coeff * v;
                }
            }
        }
    }

    // adjoint: K_ff lambda = dG/du_f, then
    // dg/d(density_e) -= gamma_e * lambda_e' k_e u_e
    let lambda = system.solve_adjoint(&adj_load)?;
    let ke = system.element_stiffness();
    let side = ke.side();
    let mut le = vec![0.0; side];
    let mut ue = vec![0.0; side];
    for e in 0..n {
        let m = mesh.dofs_per_node();
        for (l, node) in mesh.element_nodes(e)?.into_iter().enumerate() {
            for c in 0..m {
                le[l * m + c] = lambda[node * m + c];
                ue[l * m + c] = solution.u[node * m + c];
            }
        }
        let mut bilinear = 0.0;
        for a in 0..side {
            let mut s = 0.0;
            for bb in 0..side {
                s += ke.at(a, bb) * ue[bb];
            }
            bilinear += le[a] * s;
        }
        dg_phys[e] -= field.gamma[e] * bilinear;
    }

    // chain through projection and filter
    let inner: Vec<f64> = dg_phys
        .iter()
        .zip(field.dprojection.iter())
        .map(|(d, dp)| d * dp)
        .collect();
    let dg = filter.chain_rule(&inner)?;
    Ok(StressResponse {
        g,
        dg,
        max_ratio,
        mean_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrees::{prescribed_2d, MechanismDegree, RotationConvention};
    use crate::field_ops::build_filter;
    use crate::mesh::build_mesh;
    use approx::assert_relative_eq;

    fn interface_partition(mesh: &Mesh) -> Vec<usize> {
        let m = mesh.dofs_per_node();
        let mut p: Vec<usize> = mesh
            .interface_bottom()
            .iter()
            .chain(mesh.interface_top().iter())
            .flat_map(|&n| (0..m).map(move |c| n * m + c))
            .collect();
        p.sort_unstable();
        p
    }

    #[test]
    fn rigid_translation_is_stress_free() {
        let mesh = build_mesh(3, 3, None).unwrap();
        let mut u = vec![0.0; mesh.n_dofs()];
        for node in 0..mesh.n_nodes() {
            u[2 * node] = 0.7;
            u[2 * node + 1] = -0.2;
        }
        let vm = von_mises(&mesh, &u, 0.3);
        assert!(vm.iter().all(|&v| v < 1e-13));
    }

    #[test]
    fn uniaxial_stretch_matches_hand_computation() {
        // single element, top edge v = 1, bottom fixed, u = 0 everywhere:
        // strain (0, 1, 0), sigma = (nu, 1, 0)/(1-nu^2),
        // vm = sqrt(1 + nu^2 - nu)/(1 - nu^2).
        let mesh = build_mesh(1, 1, None).unwrap();
        let mut u = vec![0.0; 8];
        for &node in mesh.interface_top() {
            u[2 * node + 1] = 1.0;
        }
        let vm = von_mises(&mesh, &u, 0.3);
        let expect = (1.0_f64 + 0.09 - 0.3).sqrt() / 0.91;
        assert_relative_eq!(vm[0], expect, max_relative = 1e-13);
    }

    #[test]
    fn stress_scales_linearly_with_displacement() {
        let mesh = build_mesh(2, 2, None).unwrap();
        let u: Vec<f64> = (0..mesh.n_dofs()).map(|i| (i as f64 * 0.3).sin()).collect();
        let u3: Vec<f64> = u.iter().map(|v| 3.0 * v).collect();
        let vm = von_mises(&mesh, &u, 0.3);
        let vm3 = von_mises(&mesh, &u3, 0.3);
        for (a, b) in vm.iter().zip(vm3.iter()) {
            assert_relative_eq!(3.0 * a, b, max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    fn stress_g_of(mesh: &Mesh, x: &[f64], settings: &StressSettings, scale: f64) -> f64 {
        let h = build_filter(mesh, 2.0).unwrap();
        let xf = h.apply(x).unwrap();
        let field = PhysicalField::build(&xf, None, 3.0, 1e-6).unwrap();
        let p = interface_partition(mesh);
        let mut sys = GlobalSystem::new(mesh, 0.3, &p).unwrap();
        sys.assemble(&field.fraction).unwrap();
        sys.factor().unwrap();
        let bc = prescribed_2d(MechanismDegree::Ty, mesh, RotationConvention::default()).unwrap();
        let sol = sys.solve_degree(&bc).unwrap();
        let vm = von_mises(mesh, &sol.u, 0.3);
        stress_constraint(mesh, &mut sys, &sol, &vm, &field, &h, settings, scale)
            .unwrap()
            .g
    }

    #[test]
    fn uniform_ratios_aggregate_to_their_value() {
        // constant relaxed ratio c across elements gives g = c - 1
        let mesh = build_mesh(2, 2, None).unwrap();
        let h = build_filter(&mesh, 1.0).unwrap();
        let field = PhysicalField::build(&[1.0; 4], None, 3.0, 1e-6).unwrap();
        let p = interface_partition(&mesh);
        let mut sys = GlobalSystem::new(&mesh, 0.3, &p).unwrap();
        sys.assemble(&field.fraction).unwrap();
        sys.factor().unwrap();
        let bc = prescribed_2d(MechanismDegree::Ty, &mesh, RotationConvention::default()).unwrap();
        let sol = sys.solve_degree(&bc).unwrap();
        let c = 0.8;
        let vm = vec![c * 2.5; 4];
        let settings = StressSettings {
            sigma_bar: 2.5,
            p_agg: 10.0,
            q_relax: 0.5,
        };
        let resp =
            stress_constraint(&mesh, &mut sys, &sol, &vm, &field, &h, &settings, 1.0).unwrap();
        assert_relative_eq!(resp.g, c - 1.0, max_relative = 1e-12);
        assert_relative_eq!(resp.max_ratio, c, max_relative = 1e-12);
    }

    #[test]
    fn void_floor_design_is_far_from_the_bound() {
        let mesh = build_mesh(3, 3, None).unwrap();
        let h = build_filter(&mesh, 1.0).unwrap();
        // densities at the variable floor: relaxation kills the stress
        let field = PhysicalField::build(&[1e-3; 9], None, 3.0, 1e-6).unwrap();
        let p = interface_partition(&mesh);
        let mut sys = GlobalSystem::new(&mesh, 0.3, &p).unwrap();
        sys.assemble(&field.fraction).unwrap();
        sys.factor().unwrap();
        let bc = prescribed_2d(MechanismDegree::Ty, &mesh, RotationConvention::default()).unwrap();
        let sol = sys.solve_degree(&bc).unwrap();
        let vm = von_mises(&mesh, &sol.u, 0.3);
        let settings = StressSettings {
            sigma_bar: 1.0,
            p_agg: 10.0,
            q_relax: 0.5,
        };
        let resp =
            stress_constraint(&mesh, &mut sys, &sol, &vm, &field, &h, &settings, 1.0).unwrap();
        assert!(resp.g < -0.9, "g = {}", resp.g);
    }

    #[test]
    fn aggregated_gradient_matches_central_differences() {
        let mesh = build_mesh(4, 4, None).unwrap();
        let n = 16;
        let x: Vec<f64> = (0..n)
            .map(|i| 0.3 + 0.4 * (((i * 2654435761) % 89) as f64 / 88.0))
            .collect();
        let settings = StressSettings {
            sigma_bar: 0.5,
            p_agg: 10.0,
            q_relax: 0.5,
        };
        let scale = 1.3;

        let h = build_filter(&mesh, 2.0).unwrap();
        let xf = h.apply(&x).unwrap();
        let field = PhysicalField::build(&xf, None, 3.0, 1e-6).unwrap();
        let p = interface_partition(&mesh);
        let mut sys = GlobalSystem::new(&mesh, 0.3, &p).unwrap();
        sys.assemble(&field.fraction).unwrap();
        sys.factor().unwrap();
        let bc = prescribed_2d(MechanismDegree::Ty, &mesh, RotationConvention::default()).unwrap();
        let sol = sys.solve_degree(&bc).unwrap();
        let vm = von_mises(&mesh, &sol.u, 0.3);
        let resp =
            stress_constraint(&mesh, &mut sys, &sol, &vm, &field, &h, &settings, scale).unwrap();

        let step = 1e-6;
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += step;
            xm[j] -= step;
            let fd = (stress_g_of(&mesh, &xp, &settings, scale)
                - stress_g_of(&mesh, &xm, &settings, scale))
                / (2.0 * step);
            assert_relative_eq!(resp.dg[j], fd, max_relative = 1e-4, epsilon = 1e-10);
        }
    }

    #[test]
    fn adjoint_costs_one_substitution() {
        let mesh = build_mesh(3, 3, None).unwrap();
        let h = build_filter(&mesh, 2.0).unwrap();
        let field = PhysicalField::build(&[0.5; 9], None, 3.0, 1e-6).unwrap();
        let p = interface_partition(&mesh);
        let mut sys = GlobalSystem::new(&mesh, 0.3, &p).unwrap();
        sys.assemble(&field.fraction).unwrap();
        sys.factor().unwrap();
        let bc = prescribed_2d(MechanismDegree::Ty, &mesh, RotationConvention::default()).unwrap();
        let sol = sys.solve_degree(&bc).unwrap();
        let vm = von_mises(&mesh, &sol.u, 0.3);
        let settings = StressSettings {
            sigma_bar: 1.0,
            p_agg: 8.0,
            q_relax: 0.5,
        };
        stress_constraint(&mesh, &mut sys, &sol, &vm, &field, &h, &settings, 1.0).unwrap();
        assert_eq!(sys.stats().adjoint_substitutions, 1);
        assert_eq!(sys.stats().substitutions, 1);
        assert_eq!(sys.stats().factorizations, 1);
    }

    #[test]
    fn rejects_bad_settings() {
        let mesh = build_mesh(2, 2, None).unwrap();
        let h = build_filter(&mesh, 1.0).unwrap();
        let field = PhysicalField::build(&[0.5; 4], None, 3.0, 1e-6).unwrap();
        let p = interface_partition(&mesh);
        let mut sys = GlobalSystem::new(&mesh, 0.3, &p).unwrap();
        sys.assemble(&field.fraction).unwrap();
        sys.factor().unwrap();
        let bc = prescribed_2d(MechanismDegree::Ty, &mesh, RotationConvention::default()).unwrap();
        let sol = sys.solve_degree(&bc).unwrap();
        let vm = von_mises(&mesh, &sol.u, 0.3);
        let bad = StressSettings {
            sigma_bar: 1.0,
            p_agg: 0.5,
            q_relax: 0.5,
        };
        assert!(
            stress_constraint(&mesh, &mut sys, &sol, &vm, &field, &h, &bad, 1.0).is_err()
        );
    }
}
