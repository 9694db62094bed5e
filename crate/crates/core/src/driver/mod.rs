//! The nested analysis-and-design loop, result collection and exports.

pub mod config;
pub mod export;

pub use config::{Constants, RunConfig};
pub use export::{
    export_all, export_density, read_report, write_log, write_report, DensityFormat, RunReport,
};

use crate::degrees::{prescribed, MechanismDegree, PrescribedField};
use crate::error::{Error, Result};
use crate::fem::{DegreeSolution, GlobalSystem, SolveStats};
use crate::field_ops::{build_filter, symmetrize, symmetrize_gradient, PhysicalField};
use crate::mesh::build_mesh;
use crate::optimizer::{
    check_termination, kkt_residual_norm, MmaOptimizer, MoveLimit, StopReason, TerminationReport,
};
use crate::responses::{
    dof_constraint, evaluate_energies, objective, stress::StressSettings, stress_constraint,
    von_mises,
};
use crate::variants::{configure_variant, RunPlan};

/// One logged design iteration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct IterationRow {
    pub k: usize,
    /// Performance measure (sum of normalized DOC energies by default).
    pub f: f64,
    /// Constraint values: energy bounds per DOF, then stress constraints
    /// (stress modes), then the volume bound when enabled.
    pub g: Vec<f64>,
    /// Max design change of the step taken at this iteration.
    pub change: f64,
    pub kkt: f64,
    /// Raw strain energies per degree, DOCs first.
    pub energies: Vec<f64>,
}

/// Density fields of the converged design.
#[derive(Debug, Clone)]
pub struct DesignFields {
    pub raw: Vec<f64>,
    pub filtered: Vec<f64>,
    /// Physical density of the nominal design: the filtered field in base
    /// and stress modes, the intermediate projection in robust modes.
    pub nominal: Vec<f64>,
    pub eroded: Option<Vec<f64>>,
    pub dilated: Option<Vec<f64>>,
}

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: RunConfig,
    /// Active degrees, DOCs first; orders `alphas`, `energies` and log
    /// columns.
    pub degrees: Vec<MechanismDegree>,
    pub n_doc: usize,
    pub design: DesignFields,
    pub log: Vec<IterationRow>,
    pub iterations: usize,
    pub termination: TerminationReport,
    pub f: f64,
    pub g: Vec<f64>,
    pub constraint_labels: Vec<String>,
    pub alphas: Vec<f64>,
    pub reference_energies: Vec<f64>,
    pub energies: Vec<f64>,
    /// Max centroid von Mises stress per DOF case at the final design.
    pub max_vm_per_dof: Vec<f64>,
    pub max_vm: f64,
    pub mnd: f64,
    pub stats: SolveStats,
    /// Resolved allowable stress (stress modes).
    pub sigma_bar: Option<f64>,
}

impl RunResult {
    /// Process exit code: 0 converged, 2 iteration cap.
    pub fn exit_code(&self) -> i32 {
        if self.termination.converged {
            0
        } else {
            2
        }
    }
}

/// Fraction of gray material: mean of 4 x (1 - x); 0 for a binary design,
/// 1 for uniform 0.5.
pub fn measure_non_discreteness(density: &[f64]) -> f64 {
    if density.is_empty() {
        return 0.0;
    }
    density.iter().map(|&x| 4.0 * x * (1.0 - x)).sum::<f64>() / density.len() as f64
}

/// Resolves the allowable stress: absolute value, or a fraction of the
/// maximum von Mises stress reported by a reference run.
fn resolve_sigma_bar(config: &RunConfig) -> Result<Option<f64>> {
    if !config.variant.mode.has_stress() {
        return Ok(None);
    }
    let s = &config.variant.stress;
    if let Some(abs) = s.sigma_bar {
        return Ok(Some(abs));
    }
    match (s.sigma_bar_fraction, &s.reference_report) {
        (Some(fraction), Some(path)) => {
            let report = export::read_report(path)?;
            if !(report.max_vm > 0.0) {
                return Err(Error::Config(format!(
                    "reference report {} has no positive max stress",
                    path.display()
                )));
            }
            Ok(Some(fraction * report.max_vm))
        }
        _ => Err(Error::Config(
            "stress mode needs sigma_bar, or sigma_bar_fraction with reference_report".into(),
        )),
    }
}

fn initial_design(n: usize, config: &RunConfig) -> Vec<f64> {
    match config.seed {
        None => vec![config.constants.x_init; n],
        Some(seed) => {
            // splitmix64 stream, mapped to the open design interval
            let mut state = seed;
            (0..n)
                .map(|_| {
                    state = state.wrapping_add(0x9e3779b97f4a7c15);
                    let mut z = state;
                    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
                    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
                    let u = ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64;
                    config.constants.x_min + (1.0 - config.constants.x_min) * u
                })
                .collect()
        }
    }
}

struct Analysis<'a> {
    field_obj: PhysicalField,
    field_con_storage: Option<PhysicalField>,
    doc_solutions: Vec<DegreeSolution>,
    dof_solutions: Vec<DegreeSolution>,
    x_filtered: Vec<f64>,
    plan: &'a RunPlan,
}

impl Analysis<'_> {
    fn field_con(&self) -> &PhysicalField {
        self.field_con_storage.as_ref().unwrap_or(&self.field_obj)
    }
}

/// Solves all active degrees at iteration k: one assembly/factorization for
/// the objective field, a second one for the constraint field in robust
/// modes.
fn analyze<'a>(
    k: usize,
    x: &[f64],
    filter: &crate::field_ops::FilterOperator,
    system: &mut GlobalSystem,
    fields_bc: &[PrescribedField],
    n_doc: usize,
    plan: &'a RunPlan,
    config: &RunConfig,
) -> Result<Analysis<'a>> {
    let c = &config.constants;
    let x_filtered = filter.apply(x)?;
    let field_obj = PhysicalField::build(
        &x_filtered,
        plan.objective_projection(k),
        c.penalty,
        c.stiffness_ratio,
    )?;
    system.assemble(&field_obj.fraction)?;
    system.factor()?;
    let mut doc_solutions = Vec::with_capacity(n_doc);
    for bc in &fields_bc[..n_doc] {
        doc_solutions.push(system.solve_degree(bc)?);
    }

    let mut field_con_storage = None;
    if plan.robust.is_some() {
        let field_con = PhysicalField::build(
            &x_filtered,
            plan.constraint_projection(k),
            c.penalty,
            c.stiffness_ratio,
        )?;
        system.assemble(&field_con.fraction)?;
        system.factor()?;
        field_con_storage = Some(field_con);
    }
    let mut dof_solutions = Vec::with_capacity(fields_bc.len() - n_doc);
    for bc in &fields_bc[n_doc..] {
        dof_solutions.push(system.solve_degree(bc)?);
    }

    Ok(Analysis {
        field_obj,
        field_con_storage,
        doc_solutions,
        dof_solutions,
        x_filtered,
        plan,
    })
}

/// Runs the full optimization loop. Performs no file output except optional
/// density snapshots (`snapshot_every` with `output_dir`).
pub fn run(config: &RunConfig) -> Result<RunResult> {
    let sets = config.validate()?;
    if config.snapshot_every.is_some() && config.output_dir.is_none() {
        return Err(Error::Config(
            "density snapshots need an output directory".into(),
        ));
    }
    let mesh = build_mesh(config.nelx, config.nely, config.nelz)?;
    let filter = build_filter(&mesh, config.effective_filter_radius())?;
    let sigma_bar = resolve_sigma_bar(config)?;
    let plan = configure_variant(&config.variant, sigma_bar)?;

    let degrees = sets.all();
    let n_doc = sets.n_doc();
    let fields_bc: Vec<PrescribedField> = degrees
        .iter()
        .map(|&d| prescribed(d, &mesh, config.rotation_convention))
        .collect::<Result<_>>()?;
    let partition = fields_bc[0].components();
    let mut system = GlobalSystem::new(&mesh, config.constants.poisson, &partition)?;

    let n = mesh.n_elements();
    let c = config.constants;
    let mut x = initial_design(n, config);
    let mut x_prev = x.clone();
    let mut mma = MmaOptimizer::new(n, c.x_min, 1.0);
    let mut move_limit = MoveLimit::new(config.move_limit);
    let mut e0: Option<Vec<f64>> = None;
    let n_stress = if plan.stress.is_some() { sets.n_dof() } else { 0 };
    let mut stress_scales = vec![1.0; n_stress];

    let mut constraint_labels: Vec<String> = sets
        .dof()
        .iter()
        .map(|d| format!("energy_{d}"))
        .collect();
    if plan.stress.is_some() {
        for d in sets.dof() {
            constraint_labels.push(format!("stress_{d}"));
        }
    }
    if config.volume_fraction.is_some() {
        constraint_labels.push("volume".into());
    }

    let mut log: Vec<IterationRow> = Vec::new();
    let max_iter = config.termination.max_iterations;

    for k in 0..max_iter {
        symmetrize(&mesh, &mut x, &config.symmetry);
        let analysis = analyze(
            k, &x, &filter, &mut system, &fields_bc, n_doc, &plan, config,
        )?;

        if e0.is_none() {
            let mut refs = Vec::with_capacity(degrees.len());
            for (deg, sol) in degrees
                .iter()
                .zip(analysis.doc_solutions.iter().chain(analysis.dof_solutions.iter()))
            {
                refs.push(crate::responses::reference_energy(*deg, sol)?);
            }
            e0 = Some(refs);
        }
        let e0v = e0.as_ref().unwrap();

        let doc_resp = evaluate_energies(
            sets.doc(),
            &analysis.doc_solutions,
            &e0v[..n_doc],
            &analysis.field_obj,
            &filter,
        )?;
        let (f, df) = objective(&doc_resp, config.weights.as_deref(), config.objective)?;
        let dof_resp = evaluate_energies(
            sets.dof(),
            &analysis.dof_solutions,
            &e0v[n_doc..],
            analysis.field_con(),
            &filter,
        )?;

        let mut g = Vec::new();
        let mut dg: Vec<Vec<f64>> = Vec::new();
        for (j, resp) in dof_resp.iter().enumerate() {
            let (gj, dgj) =
                dof_constraint(resp, e0v[n_doc + j], config.emax[j], config.emax_mode)?;
            g.push(gj);
            dg.push(dgj);
        }
        if let Some(stress) = &plan.stress {
            let settings = StressSettings {
                sigma_bar: stress.sigma_bar,
                p_agg: stress.p_agg,
                q_relax: stress.q_relax,
            };
            for (j, sol) in analysis.dof_solutions.iter().enumerate() {
                let vm = von_mises(&mesh, &sol.u, c.poisson);
                let resp = stress_constraint(
                    &mesh,
                    &mut system,
                    sol,
                    &vm,
                    analysis.field_con(),
                    &filter,
                    &settings,
                    stress_scales[j],
                )?;
                g.push(resp.g);
                dg.push(resp.dg);
                if stress.adaptive_scaling && resp.mean_ratio > 0.0 {
                    stress_scales[j] =
                        0.5 * stress_scales[j] + 0.5 * (resp.max_ratio / resp.mean_ratio);
                }
            }
        }
        if let Some(vmax) = config.volume_fraction {
            let (gv, dgv) = crate::responses::volume_constraint(analysis.field_con(), &filter, vmax)?;
            g.push(gv);
            dg.push(dgv);
        }

        let mut obj_grad: Vec<f64> = df.iter().map(|d| -d).collect();
        symmetrize_gradient(&mesh, &mut obj_grad, &config.symmetry);
        for row in dg.iter_mut() {
            symmetrize_gradient(&mesh, row, &config.symmetry);
        }

        let step = mma.step(&x, &obj_grad, &g, &dg, move_limit.value())?;
        let change = step
            .x
            .iter()
            .zip(x.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        let kkt = kkt_residual_norm(&step.x, c.x_min, 1.0, &obj_grad, &g, &dg, &step);

        let energies: Vec<f64> = analysis
            .doc_solutions
            .iter()
            .chain(analysis.dof_solutions.iter())
            .map(|s| s.energy)
            .collect();
        log.push(IterationRow {
            k,
            f,
            g: g.clone(),
            change,
            kkt,
            energies: energies.clone(),
        });

        if let (Some(every), Some(dir)) = (config.snapshot_every, &config.output_dir) {
            if every > 0 && k % every == 0 {
                let nominal = nominal_density(&analysis, k);
                let path = dir.join(format!("density_{k:04}.pgm"));
                if !mesh.is_3d() {
                    export::export_density(&nominal, &mesh, &path, DensityFormat::Pgm)?;
                }
            }
        }

        let mut report = check_termination(change, kkt, &g, k, &config.termination);
        if report.converged && !plan.continuation_settled(k) {
            // keep iterating until the projection continuation is done
            report.converged = false;
            report.reason = if k + 1 >= max_iter {
                Some(StopReason::MaxIterations)
            } else {
                None
            };
        }

        if report.should_stop() {
            let alphas: Vec<f64> = doc_resp
                .iter()
                .map(|r| r.alpha)
                .chain(dof_resp.iter().map(|r| r.alpha))
                .collect();
            let max_vm_per_dof: Vec<f64> = analysis
                .dof_solutions
                .iter()
                .map(|sol| {
                    von_mises(&mesh, &sol.u, c.poisson)
                        .into_iter()
                        .fold(0.0_f64, f64::max)
                })
                .collect();
            let max_vm = max_vm_per_dof.iter().copied().fold(0.0_f64, f64::max);
            let nominal = nominal_density(&analysis, k);
            let mnd = measure_non_discreteness(&nominal);
            let design = DesignFields {
                raw: x.clone(),
                filtered: analysis.x_filtered.clone(),
                nominal,
                eroded: plan.robust.as_ref().map(|_| analysis.field_obj.density.clone()),
                dilated: plan.robust.as_ref().map(|_| analysis.field_con().density.clone()),
            };
            return Ok(RunResult {
                config: config.clone(),
                degrees,
                n_doc,
                design,
                iterations: log.len(),
                log,
                termination: report,
                f,
                g,
                constraint_labels,
                alphas,
                reference_energies: e0v.clone(),
                energies,
                max_vm_per_dof,
                max_vm,
                mnd,
                stats: system.stats(),
                sigma_bar,
            });
        }

        let ml_before = move_limit.value();
        let osc = move_limit.update(&step.x, &x, &x_prev);
        if std::env::var_os("FLEXOPT_TRACE").is_some() {
            let mean_change: f64 = step
                .x
                .iter()
                .zip(x.iter())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / step.x.len() as f64;
            eprintln!(
                "trace k={k} f={f:.4} change={change:.3e} ml={:.3e} osc={osc:.3} meanratio={:.4} mnd={:.3}",
                move_limit.value(),
                mean_change / ml_before,
                measure_non_discreteness(&nominal_density(&analysis, k)),
            );
        }
        x_prev = std::mem::replace(&mut x, step.x);
    }
    unreachable!("termination check stops at the iteration cap");
}

/// Density of the exported nominal design at one iteration.
fn nominal_density(analysis: &Analysis<'_>, k: usize) -> Vec<f64> {
    match analysis.plan.nominal_projection(k) {
        None => analysis.x_filtered.clone(),
        Some((beta, eta)) => analysis
            .x_filtered
            .iter()
            .map(|&v| crate::field_ops::heaviside_project(v, beta, eta).0)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::degrees::MechanismDegree;
    use crate::variants::RunMode;
    use approx::assert_relative_eq;

    fn small_config(max_iter: usize) -> RunConfig {
        let mut cfg = RunConfig::flexure(
            12,
            12,
            &[MechanismDegree::Tx],
            &[MechanismDegree::Ty],
            &[1.2],
        );
        cfg.termination.max_iterations = max_iter;
        cfg
    }

    #[test]
    fn first_log_row_has_unit_alphas() {
        let result = run(&small_config(3)).unwrap();
        assert_eq!(result.log[0].f, 1.0); // one DOC
        assert_eq!(result.log.len(), 3);
        assert_eq!(result.iterations, 3);
    }

    #[test]
    fn effort_matches_the_self_adjoint_accounting() {
        let result = run(&small_config(5)).unwrap();
        // base: 1 factorization and |D| = 2 substitutions per iteration
        assert_eq!(result.stats.factorizations, 5);
        assert_eq!(result.stats.substitutions, 10);
        assert_eq!(result.stats.adjoint_substitutions, 0);
    }

    #[test]
    fn robust_mode_doubles_the_factorizations() {
        let mut cfg = small_config(4);
        cfg.variant.mode = RunMode::Robust;
        let result = run(&cfg).unwrap();
        assert_eq!(result.stats.factorizations, 8);
        assert_eq!(result.stats.substitutions, 8);
        let d = result.design.dilated.as_ref().unwrap();
        let e = result.design.eroded.as_ref().unwrap();
        for (hi, lo) in d.iter().zip(e.iter()) {
            assert!(hi >= lo);
        }
    }

    #[test]
    fn stress_mode_adds_one_adjoint_per_case() {
        let mut cfg = small_config(4);
        cfg.variant.mode = RunMode::Stress;
        cfg.variant.stress.sigma_bar = Some(1.0);
        let result = run(&cfg).unwrap();
        assert_eq!(result.stats.factorizations, 4);
        assert_eq!(result.stats.substitutions, 8);
        assert_eq!(result.stats.adjoint_substitutions, 4);
        assert_eq!(result.constraint_labels, vec!["energy_ty", "stress_ty"]);
    }

    #[test]
    fn symmetric_runs_stay_symmetric() {
        let result = run(&small_config(6)).unwrap();
        let mesh = build_mesh(12, 12, None).unwrap();
        let d = &result.design.nominal;
        for ex in 0..12 {
            for ey in 0..12 {
                let a = d[mesh.element_id(ex, ey, 0)];
                let b = d[mesh.element_id(11 - ex, ey, 0)];
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_dimension_fails_before_allocation() {
        let cfg = RunConfig::flexure(0, 4, &[MechanismDegree::Tx], &[MechanismDegree::Ty], &[1.0]);
        assert!(matches!(run(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn mnd_levels() {
        assert_eq!(measure_non_discreteness(&[0.0, 1.0, 1.0, 0.0]), 0.0);
        assert_eq!(measure_non_discreteness(&[0.5; 8]), 1.0);
        assert_relative_eq!(
            measure_non_discreteness(&[0.5, 0.5, 1.0, 0.0]),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn seeded_initial_design_is_deterministic() {
        let mut cfg = small_config(2);
        cfg.seed = Some(42);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.design.raw, b.design.raw);
        assert!(a.design.raw.iter().any(|&v| (v - 0.5).abs() > 1e-3));
    }
}
