//! Linear density filter with conic weights on element centers.

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Row-stochastic sparse filter H: weights w_ij proportional to
/// max(0, r - dist(center_i, center_j)), renormalized per row (boundary rows
/// included, no padding).
#[derive(Debug, Clone)]
pub struct FilterOperator {
    n: usize,
    row_ptr: Vec<u32>,
    cols: Vec<u32>,
    weights: Vec<f64>,
    radius: f64,
}

impl FilterOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Neighbor (column, weight) pairs of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i] as usize;
        let hi = self.row_ptr[i + 1] as usize;
        self.cols[lo..hi]
            .iter()
            .zip(self.weights[lo..hi].iter())
            .map(|(&c, &w)| (c as usize, w))
    }

    /// Filtered field H x.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "filter expects {} values, got {}",
                self.n,
                x.len()
            )));
        }
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = self.row_ptr[i] as usize;
            let hi = self.row_ptr[i + 1] as usize;
            let mut s = 0.0;
            for t in lo..hi {
                s += self.weights[t] * x[self.cols[t] as usize];
            }
            out[i] = s;
        }
        Ok(out)
    }

    /// Sensitivity pull-back H' s of a filtered-field sensitivity.
    pub fn chain_rule(&self, s_filtered: &[f64]) -> Result<Vec<f64>> {
        if s_filtered.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "filter expects {} values, got {}",
                self.n,
                s_filtered.len()
            )));
        }
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = self.row_ptr[i] as usize;
            let hi = self.row_ptr[i + 1] as usize;
            for t in lo..hi {
                out[self.cols[t] as usize] += self.weights[t] * s_filtered[i];
            }
        }
        Ok(out)
    }
}

/// Builds the conic filter for a structured mesh. Radius is in element
/// widths and must be at least 1.
pub fn build_filter(mesh: &Mesh, radius: f64) -> Result<FilterOperator> {
    if !(radius >= 1.0) {
        return Err(Error::Config(format!(
            "filter radius must be >= 1 element, got {radius}"
        )));
    }
    let n = mesh.n_elements();
    let reach = radius.ceil() as i64;
    let (nelx, nely, nelz) = (
        mesh.nelx() as i64,
        mesh.nely() as i64,
        mesh.nelz().unwrap_or(1) as i64,
    );
    let zrange = if mesh.is_3d() { -reach..=reach } else { 0..=0 };

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut weights = Vec::new();
    row_ptr.push(0u32);
    for e in 0..n {
        let (ex, ey, ez) = mesh.element_coords(e);
        let (ex, ey, ez) = (ex as i64, ey as i64, ez as i64);
        let start = weights.len();
        for dx in -reach..=reach {
            let jx = ex + dx;
            if jx < 0 || jx >= nelx {
                continue;
            }
            for dy in -reach..=reach {
                let jy = ey + dy;
                if jy < 0 || jy >= nely {
                    continue;
                }
                for dz in zrange.clone() {
                    let jz = ez + dz;
                    if jz < 0 || jz >= nelz {
                        continue;
                    }
                    let dist = ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                    let w = radius - dist;
                    if w > 0.0 {
                        cols.push(mesh.element_id(jx as usize, jy as usize, jz as usize) as u32);
                        weights.push(w);
                    }
                }
            }
        }
        let sum: f64 = weights[start..].iter().sum();
        for w in &mut weights[start..] {
            *w /= sum;
        }
        row_ptr.push(weights.len() as u32);
    }
    Ok(FilterOperator {
        n,
        row_ptr,
        cols,
        weights,
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn unit_radius_is_the_identity() {
        let mesh = build_mesh(5, 5, None).unwrap();
        let h = build_filter(&mesh, 1.0).unwrap();
        let x: Vec<f64> = (0..25).map(|i| (i as f64 * 0.37).fract()).collect();
        let xf = h.apply(&x).unwrap();
        assert_eq!(x, xf);
        for i in 0..25 {
            assert_eq!(h.row(i).count(), 1);
        }
    }

    #[test]
    fn interior_stencil_at_radius_two() {
        // dist < 2 around an interior element: self, 4 edge neighbors and 4
        // diagonal neighbors (dist sqrt(2)); weights sum to 1.
        let mesh = build_mesh(5, 5, None).unwrap();
        let h = build_filter(&mesh, 2.0).unwrap();
        let center = mesh.element_id(2, 2, 0);
        let row: Vec<(usize, f64)> = h.row(center).collect();
        assert_eq!(row.len(), 9);
        let total: f64 = row.iter().map(|&(_, w)| w).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        // weights from the explicit cone formula
        let raw_self = 2.0;
        let raw_edge = 1.0;
        let raw_diag = 2.0 - 2.0_f64.sqrt();
        let norm = raw_self + 4.0 * raw_edge + 4.0 * raw_diag;
        for (col, w) in row {
            let (cx, cy, _) = mesh.element_coords(col);
            let d2 = (cx as i64 - 2).pow(2) + (cy as i64 - 2).pow(2);
            let raw = match d2 {
                0 => raw_self,
                1 => raw_edge,
                2 => raw_diag,
                _ => panic!("unexpected neighbor at distance^2 = {d2}"),
            };
            assert_relative_eq!(w, raw / norm, epsilon = 1e-13);
        }
    }

    #[test]
    fn uniform_fields_are_fixed_points() {
        let mesh = build_mesh(7, 4, None).unwrap();
        let h = build_filter(&mesh, 2.4).unwrap();
        let x = vec![0.37; 28];
        let xf = h.apply(&x).unwrap();
        for v in xf {
            assert_relative_eq!(v, 0.37, epsilon = 1e-14);
        }
    }

    #[test]
    fn chain_rule_is_the_transpose() {
        let mesh = build_mesh(4, 3, None).unwrap();
        let h = build_filter(&mesh, 2.0).unwrap();
        let n = 12;
        // check <Hx, s> == <x, H's> on a basis pair
        let x: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0) * 0.11).collect();
        let s: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 5) as f64 - 2.0).collect();
        let hx = h.apply(&x).unwrap();
        let hts = h.chain_rule(&s).unwrap();
        let lhs: f64 = hx.iter().zip(s.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(hts.iter()).map(|(a, b)| a * b).sum();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-13);
    }

    #[test]
    fn uniform_sensitivity_pulls_back_to_column_sums() {
        let mesh = build_mesh(6, 6, None).unwrap();
        let h = build_filter(&mesh, 2.0).unwrap();
        let ones = vec![1.0; 36];
        let pulled = h.chain_rule(&ones).unwrap();
        // explicit column sums of H
        let mut colsum = vec![0.0; 36];
        for i in 0..36 {
            for (j, w) in h.row(i) {
                colsum[j] += w;
            }
        }
        for (a, b) in pulled.iter().zip(colsum.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn impulse_response_is_the_normalized_cone() {
        let mesh = build_mesh(9, 9, None).unwrap();
        let h = build_filter(&mesh, 3.0).unwrap();
        let center = mesh.element_id(4, 4, 0);
        let mut x = vec![0.0; 81];
        x[center] = 1.0;
        let xf = h.apply(&x).unwrap();
        for e in 0..81 {
            let (ex, ey, _) = mesh.element_coords(e);
            let dist = (((ex as i64 - 4).pow(2) + (ey as i64 - 4).pow(2)) as f64).sqrt();
            if dist >= 3.0 {
                assert_eq!(xf[e], 0.0);
            } else {
                // interior rows all have the same normalization here
                let mut norm = 0.0;
                for dx in -3i64..=3 {
                    for dy in -3i64..=3 {
                        let d = ((dx * dx + dy * dy) as f64).sqrt();
                        if d < 3.0 {
                            norm += 3.0 - d;
                        }
                    }
                }
                assert_relative_eq!(xf[e], (3.0 - dist) / norm, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn rejects_sub_element_radius() {
        let mesh = build_mesh(3, 3, None).unwrap();
        assert!(build_filter(&mesh, 0.99).is_err());
    }

    #[test]
    fn works_in_three_dimensions() {
        let mesh = build_mesh(3, 3, Some(3)).unwrap();
        let h = build_filter(&mesh, 1.8).unwrap();
        let x = vec![0.5; 27];
        let xf = h.apply(&x).unwrap();
        for v in xf {
            assert_relative_eq!(v, 0.5, epsilon = 1e-14);
        }
    }

    proptest! {
        #[test]
        fn filtering_preserves_bounds(seed in 0u64..1000, r in 1.0f64..3.5) {
            let mesh = build_mesh(6, 5, None).unwrap();
            let h = build_filter(&mesh, r).unwrap();
            let x: Vec<f64> = (0..30)
                .map(|i| 0.2 + 0.6 * ((seed.wrapping_mul(i as u64 + 13) % 101) as f64 / 100.0))
                .collect();
            let xf = h.apply(&x).unwrap();
            let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in xf {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }
}
