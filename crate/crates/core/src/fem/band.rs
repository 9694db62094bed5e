//! Banded symmetric storage and Cholesky factorization.
//!
//! Structured grids with consecutive node numbering give the reduced
//! stiffness matrix a tight, constant band, so a direct banded Cholesky is
//! the default solver. The factorization is done once per design iteration
//! and reused for every back-substitution. Swapping in another SPD backend
//! only requires replacing this type behind [`crate::fem::GlobalSystem`].

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix: row `i` stores columns
/// `[i - bandwidth, i]` contiguously. After [`BandMatrix::cholesky_in_place`]
/// the storage holds the Cholesky factor L instead.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    width: usize, // bandwidth + 1 = row stride
    vals: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        let width = bandwidth.min(n.saturating_sub(1)) + 1;
        BandMatrix {
            n,
            width,
            vals: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.width - 1
    }

    pub fn reset(&mut self) {
        self.vals.fill(0.0);
    }

    /// Storage slot of entry (i, j); requires i - bandwidth <= j <= i.
    #[inline]
    pub fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i < self.n && i - j < self.width);
        i * self.width + (j + self.width - 1 - i)
    }

    #[inline]
    pub fn add_at_slot(&mut self, slot: usize, v: f64) {
        self.vals[slot] += v;
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j >= self.width {
            0.0
        } else {
            self.vals[self.slot(i, j)]
        }
    }

    /// y = K x for the symmetric matrix represented by the lower band.
    pub fn sym_matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.fill(0.0);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.width - 1);
            let row = &self.vals[i * self.width + (lo + self.width - 1 - i)..i * self.width + self.width];
            let mut diag_plus_lower = 0.0;
            for (k, &v) in row.iter().enumerate() {
                let j = lo + k;
                diag_plus_lower += v * x[j];
                if j < i {
                    y[j] += v * x[i];
                }
            }
            y[i] += diag_plus_lower;
        }
    }

    /// In-place Cholesky: replaces the band by the factor L.
    ///
    /// Fails with the offending pivot index when the matrix is not positive
    /// definite (relative pivot floor; also traps NaN).
    pub fn cholesky_in_place(&mut self) -> Result<()> {
        let n = self.n;
        let w = self.width;
        let max_diag = (0..n)
            .map(|i| self.vals[i * w + w - 1].abs())
            .fold(0.0_f64, f64::max);
        let tol = 1e-13 * max_diag;

        for i in 0..n {
            let lo = i.saturating_sub(w - 1);
            let (before, current) = self.vals.split_at_mut(i * w);
            let row_i = &mut current[..w];
            for j in lo..i {
                // s = sum_k L[i][k] L[j][k], k in [lo, j)
                let len = j - lo;
                let a_off = lo + w - 1 - i;
                let b_off = j * w + (lo + w - 1 - j);
                let a = &row_i[a_off..a_off + len];
                let b = &before[b_off..b_off + len];
                let mut s = 0.0;
                for (x, y) in a.iter().zip(b.iter()) {
                    s += x * y;
                }
                let ljj = before[j * w + w - 1];
                row_i[j + w - 1 - i] = (row_i[j + w - 1 - i] - s) / ljj;
            }
            let a_off = lo + w - 1 - i;
            let mut s = 0.0;
            for &x in &row_i[a_off..w - 1] {
                s += x * x;
            }
            let piv = row_i[w - 1] - s;
            if !(piv > tol) {
                return Err(Error::Singular { pivot: i });
            }
            row_i[w - 1] = piv.sqrt();
        }
        Ok(())
    }

    /// Solves L L' x = b in place, where the band holds the factor L.
    pub fn substitute_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let w = self.width;
        // forward: L y = b
        for i in 0..n {
            let lo = i.saturating_sub(w - 1);
            let off = i * w + (lo + w - 1 - i);
            let row = &self.vals[off..i * w + w - 1];
            let mut s = 0.0;
            for (k, &v) in row.iter().enumerate() {
                s += v * b[lo + k];
            }
            b[i] = (b[i] - s) / self.vals[i * w + w - 1];
        }
        // backward: L' x = y, column sweep with contiguous rows
        for i in (0..n).rev() {
            let lo = i.saturating_sub(w - 1);
            let xi = b[i] / self.vals[i * w + w - 1];
            b[i] = xi;
            let off = i * w + (lo + w - 1 - i);
            let row = &self.vals[off..i * w + w - 1];
            for (k, &v) in row.iter().enumerate() {
                b[lo + k] -= v * xi;
            }
        }
    }
}
