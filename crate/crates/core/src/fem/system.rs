//! Sparse partitioned global system: assembly, factorization and
//! prescribed-displacement solves.
//!
//! The partition (free vs prescribed components) is fixed per problem, so
//! scatter targets for every element entry are precomputed once. Each design
//! iteration then only refills values, factors the free block once and
//! back-substitutes once per mechanism degree.

use crate::degrees::PrescribedField;
use crate::error::{Error, Result};
use crate::fem::band::BandMatrix;
use crate::fem::element::{element_stiffness_2d, element_stiffness_3d, ElementStiffness};
use crate::mesh::Mesh;

/// Running count of the expensive solver operations.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SolveStats {
    pub factorizations: usize,
    pub substitutions: usize,
    pub adjoint_substitutions: usize,
}

/// Displacements and energies of one mechanism degree.
#[derive(Debug, Clone)]
pub struct DegreeSolution {
    /// Full nodal displacement vector (length n).
    pub u: Vec<f64>,
    /// Total strain energy 1/2 u' K u.
    pub energy: f64,
    /// Per-element strain energy evaluated at full solid modulus, so the
    /// energy sensitivity is gamma_j times this value.
    pub element_energies: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DofIdx {
    Free(u32),
    Prescribed(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SystemState {
    Empty,
    Assembled,
    Factored,
}

/// Design-dependent stiffness system K[x] partitioned into free and
/// prescribed components.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    n_elements: usize,
    side: usize,
    ke: ElementStiffness,
    dof_kind: Vec<DofIdx>,
    free_dofs: Vec<usize>,
    prescribed_dofs: Vec<usize>,
    elem_dofs: Vec<u32>,
    // scatter plans, element-major
    ff_off: Vec<u32>,
    ff_slot: Vec<u32>,
    ff_ab: Vec<u16>,
    fp_off: Vec<u32>,
    fp_ab: Vec<u16>,
    fp_row: Vec<u32>,
    fp_col: Vec<u32>,
    pp_off: Vec<u32>,
    pp_ab: Vec<u16>,
    pp_row: Vec<u32>,
    pp_col: Vec<u32>,
    kff: BandMatrix,
    kfp_vals: Vec<f64>,
    kpp_vals: Vec<f64>,
    state: SystemState,
    stats: SolveStats,
}

impl GlobalSystem {
    /// Builds the partitioned system skeleton for a mesh, Poisson ratio and
    /// prescribed component set (ascending, unique).
    pub fn new(mesh: &Mesh, nu: f64, prescribed: &[usize]) -> Result<Self> {
        let ke = if mesh.is_3d() {
            element_stiffness_3d(nu)?
        } else {
            element_stiffness_2d(nu)?
        };
        let n = mesh.n_dofs();
        let side = ke.side();

        for pair in prescribed.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidArgument(
                    "prescribed components must be ascending and unique".into(),
                ));
            }
        }
        if let Some(&last) = prescribed.last() {
            if last >= n {
                return Err(Error::InvalidArgument(format!(
                    "prescribed component {last} out of range (n = {n})"
                )));
            }
        }

        let mut dof_kind = Vec::with_capacity(n);
        let mut free_dofs = Vec::with_capacity(n - prescribed.len());
        let mut p_iter = prescribed.iter().peekable();
        for dof in 0..n {
            if p_iter.peek() == Some(&&dof) {
                p_iter.next();
                dof_kind.push(DofIdx::Prescribed((prescribed.len() - p_iter.len() - 1) as u32));
            } else {
                dof_kind.push(DofIdx::Free(free_dofs.len() as u32));
                free_dofs.push(dof);
            }
        }

        let n_el = mesh.n_elements();
        let mut elem_dofs = Vec::with_capacity(n_el * side);
        for e in 0..n_el {
            let dofs = mesh.element_dof_map(e)?;
            elem_dofs.extend(dofs.iter().map(|&d| d as u32));
        }

        // free-index bandwidth over element couplings
        let mut bandwidth = 0usize;
        for e in 0..n_el {
            let dofs = &elem_dofs[e * side..(e + 1) * side];
            let mut lo = u32::MAX;
            let mut hi = 0u32;
            for &d in dofs {
                if let DofIdx::Free(f) = dof_kind[d as usize] {
                    lo = lo.min(f);
                    hi = hi.max(f);
                }
            }
            if lo != u32::MAX {
                bandwidth = bandwidth.max((hi - lo) as usize);
            }
        }

        let kff = BandMatrix::zeros(free_dofs.len(), bandwidth);

        let mut sys = GlobalSystem {
            n_elements: n_el,
            side,
            ke,
            dof_kind,
            free_dofs,
            prescribed_dofs: prescribed.to_vec(),
            elem_dofs,
            ff_off: Vec::with_capacity(n_el + 1),
            ff_slot: Vec::new(),
            ff_ab: Vec::new(),
            fp_off: Vec::with_capacity(n_el + 1),
            fp_ab: Vec::new(),
            fp_row: Vec::new(),
            fp_col: Vec::new(),
            pp_off: Vec::with_capacity(n_el + 1),
            pp_ab: Vec::new(),
            pp_row: Vec::new(),
            pp_col: Vec::new(),
            kff,
            kfp_vals: Vec::new(),
            kpp_vals: Vec::new(),
            state: SystemState::Empty,
            stats: SolveStats::default(),
        };
        sys.build_plans()?;
        Ok(sys)
    }

    fn build_plans(&mut self) -> Result<()> {
        let side = self.side;
        self.ff_off.push(0);
        self.fp_off.push(0);
        self.pp_off.push(0);
        for e in 0..self.n_elements {
            let dofs = &self.elem_dofs[e * side..(e + 1) * side];
            for a in 0..side {
                let ka = self.dof_kind[dofs[a] as usize];
                for b in 0..side {
                    let kb = self.dof_kind[dofs[b] as usize];
                    let ab = (a * side + b) as u16;
                    match (ka, kb) {
                        (DofIdx::Free(fa), DofIdx::Free(fb)) if fa >= fb => {
                            let slot = self.kff.slot(fa as usize, fb as usize);
                            let slot = u32::try_from(slot).map_err(|_| {
                                Error::InvalidArgument("mesh too large for banded storage".into())
                            })?;
                            self.ff_slot.push(slot);
                            self.ff_ab.push(ab);
                        }
                        (DofIdx::Free(fa), DofIdx::Prescribed(pb)) => {
                            self.fp_row.push(fa);
                            self.fp_col.push(pb);
                            self.fp_ab.push(ab);
                        }
                        (DofIdx::Prescribed(pa), DofIdx::Prescribed(pb)) if pa >= pb => {
                            self.pp_row.push(pa);
                            self.pp_col.push(pb);
                            self.pp_ab.push(ab);
                        }
                        _ => {}
                    }
                }
            }
            self.ff_off.push(self.ff_slot.len() as u32);
            self.fp_off.push(self.fp_ab.len() as u32);
            self.pp_off.push(self.pp_ab.len() as u32);
        }
        self.kfp_vals = vec![0.0; self.fp_ab.len()];
        self.kpp_vals = vec![0.0; self.pp_ab.len()];
        Ok(())
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_kind.len()
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn element_stiffness(&self) -> &ElementStiffness {
        &self.ke
    }

    pub fn stats(&self) -> SolveStats {
        self.stats
    }

    /// Free block K_ff (lower band). Holds the Cholesky factor after
    /// [`GlobalSystem::factor`].
    pub fn kff(&self) -> &BandMatrix {
        &self.kff
    }

    /// K = sum_e fraction_e * k_e, split into the partition blocks.
    /// Symmetry is exact by construction (symmetrized k_e, single-triangle
    /// storage).
    pub fn assemble(&mut self, modulus_fractions: &[f64]) -> Result<()> {
        if modulus_fractions.len() != self.n_elements {
            return Err(Error::InvalidArgument(format!(
                "expected {} modulus fractions, got {}",
                self.n_elements,
                modulus_fractions.len()
            )));
        }
        if let Some(bad) = modulus_fractions.iter().find(|&&f| !(f > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "modulus fractions must be positive, got {bad}"
            )));
        }
        self.kff.reset();
        let ke = self.ke.values();
        for e in 0..self.n_elements {
            let f = modulus_fractions[e];
            let (lo, hi) = (self.ff_off[e] as usize, self.ff_off[e + 1] as usize);
            for t in lo..hi {
                self.kff
                    .add_at_slot(self.ff_slot[t] as usize, f * ke[self.ff_ab[t] as usize]);
            }
            let (lo, hi) = (self.fp_off[e] as usize, self.fp_off[e + 1] as usize);
            for t in lo..hi {
                self.kfp_vals[t] = f * ke[self.fp_ab[t] as usize];
            }
            let (lo, hi) = (self.pp_off[e] as usize, self.pp_off[e + 1] as usize);
            for t in lo..hi {
                self.kpp_vals[t] = f * ke[self.pp_ab[t] as usize];
            }
        }
        self.state = SystemState::Assembled;
        Ok(())
    }

    /// Cholesky-factors K_ff in place. One factorization serves all degree
    /// solves of the iteration.
    pub fn factor(&mut self) -> Result<()> {
        assert!(
            self.state == SystemState::Assembled,
            "factor() requires a freshly assembled system"
        );
        self.kff.cholesky_in_place()?;
        self.state = SystemState::Factored;
        self.stats.factorizations += 1;
        Ok(())
    }

    /// Prescribed values ordered by prescribed index, validated against the
    /// partition.
    fn prescribed_values(&self, field: &PrescribedField) -> Result<Vec<f64>> {
        let entries = field.entries();
        if entries.len() != self.prescribed_dofs.len() {
            return Err(Error::InvalidArgument(format!(
                "prescribed field has {} components, partition expects {}",
                entries.len(),
                self.prescribed_dofs.len()
            )));
        }
        let mut up = vec![0.0; entries.len()];
        for (&(dof, value), &expected) in entries.iter().zip(self.prescribed_dofs.iter()) {
            if dof != expected {
                return Err(Error::InvalidArgument(format!(
                    "prescribed field component {dof} does not match partition component {expected}"
                )));
            }
            if !value.is_finite() {
                return Err(Error::InvalidArgument(
                    "prescribed displacement is not finite".into(),
                ));
            }
            match self.dof_kind[dof] {
                DofIdx::Prescribed(p) => up[p as usize] = value,
                DofIdx::Free(_) => unreachable!(),
            }
        }
        Ok(up)
    }

    /// Solves K_ff u_f = -K_fp u_p and evaluates the degree energies.
    pub fn solve_degree(&mut self, field: &PrescribedField) -> Result<DegreeSolution> {
        assert!(
            self.state == SystemState::Factored,
            "solve_degree() requires a factored system"
        );
        let up = self.prescribed_values(field)?;

        let mut uf = vec![0.0; self.n_free()];
        for t in 0..self.kfp_vals.len() {
            uf[self.fp_row[t] as usize] -= self.kfp_vals[t] * up[self.fp_col[t] as usize];
        }
        self.kff.substitute_in_place(&mut uf);
        self.stats.substitutions += 1;

        let mut u = vec![0.0; self.n_dofs()];
        for (f, &dof) in self.free_dofs.iter().enumerate() {
            u[dof] = uf[f];
        }
        for (p, &dof) in self.prescribed_dofs.iter().enumerate() {
            u[dof] = up[p];
        }

        // E = 1/2 u_p' f_p with f_p = K_fp' u_f + K_pp u_p (applied loads
        // are zero on the free set).
        let mut fp = vec![0.0; up.len()];
        for t in 0..self.kfp_vals.len() {
            fp[self.fp_col[t] as usize] += self.kfp_vals[t] * uf[self.fp_row[t] as usize];
        }
        for t in 0..self.kpp_vals.len() {
            let (i, j) = (self.pp_row[t] as usize, self.pp_col[t] as usize);
            let v = self.kpp_vals[t];
            fp[i] += v * up[j];
            if i != j {
                fp[j] += v * up[i];
            }
        }
        let energy: f64 = up.iter().zip(fp.iter()).map(|(a, b)| a * b).sum::<f64>() / 2.0;

        let element_energies = self.element_energies(&u);
        Ok(DegreeSolution {
            u,
            energy: energy.max(0.0),
            element_energies,
        })
    }

    /// Per-element strain energies of a displacement field at full solid
    /// modulus.
    pub fn element_energies(&self, u: &[f64]) -> Vec<f64> {
        let side = self.side;
        let mut ue = vec![0.0; side];
        let mut energies = Vec::with_capacity(self.n_elements);
        for e in 0..self.n_elements {
            let dofs = &self.elem_dofs[e * side..(e + 1) * side];
            for (l, &d) in dofs.iter().enumerate() {
                ue[l] = u[d as usize];
            }
            energies.push((0.5 * self.ke.quadratic_form(&ue)).max(0.0));
        }
        energies
    }

    /// Solves K_ff lambda_f = load_f for an adjoint load given on all
    /// components; prescribed components of the result are zero.
    pub fn solve_adjoint(&mut self, load: &[f64]) -> Result<Vec<f64>> {
        assert!(
            self.state == SystemState::Factored,
            "solve_adjoint() requires a factored system"
        );
        if load.len() != self.n_dofs() {
            return Err(Error::InvalidArgument(
                "adjoint load length does not match system size".into(),
            ));
        }
        let mut rhs: Vec<f64> = self.free_dofs.iter().map(|&d| load[d]).collect();
        self.kff.substitute_in_place(&mut rhs);
        self.stats.adjoint_substitutions += 1;
        let mut lambda = vec![0.0; self.n_dofs()];
        for (f, &dof) in self.free_dofs.iter().enumerate() {
            lambda[dof] = rhs[f];
        }
        Ok(lambda)
    }

    /// Element displacement gather, local ordering.
    pub fn element_displacements(&self, e: usize, u: &[f64]) -> Vec<f64> {
        let side = self.side;
        self.elem_dofs[e * side..(e + 1) * side]
            .iter()
            .map(|&d| u[d as usize])
            .collect()
    }
}
