//! Method of moving asymptotes.
//!
//! Each step builds the separable strictly convex approximation around the
//! current iterate (asymptotes expand on monotone variable histories and
//! shrink on oscillation) and solves it with a primal-dual interior point
//! method with elastic constraint variables, so an infeasible subproblem
//! still returns the least-infeasibility point (flagged).

use crate::error::{Error, Result};

const ASY_INIT: f64 = 0.5;
const ASY_INCR: f64 = 1.2;
const ASY_DECR: f64 = 0.7;
const ALBEFA: f64 = 0.1;
const RAA0: f64 = 1e-5;
const A0: f64 = 1.0;
const ELASTIC_C: f64 = 1000.0;
const ELASTIC_D: f64 = 1.0;
const EPSI_MIN: f64 = 1e-10;

/// Subproblem solution. Multipliers are kept for KKT evaluation of the
/// outer problem.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub y: Vec<f64>,
    pub z: f64,
    pub xsi: Vec<f64>,
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
    pub zet: f64,
    pub slack: Vec<f64>,
    /// True when elastic variables stayed active: the constraints could not
    /// be met inside the trust region and the least-infeasible point is
    /// returned.
    pub elastic: bool,
    /// Max-norm KKT residual of the subproblem at exit.
    pub subproblem_kkt: f64,
}

/// MMA state: asymptotes and the two previous iterates.
#[derive(Debug, Clone)]
pub struct MmaOptimizer {
    n: usize,
    x_min: f64,
    x_max: f64,
    iter: usize,
    xold1: Vec<f64>,
    xold2: Vec<f64>,
    low: Vec<f64>,
    upp: Vec<f64>,
}

impl MmaOptimizer {
    pub fn new(n: usize, x_min: f64, x_max: f64) -> Self {
        MmaOptimizer {
            n,
            x_min,
            x_max,
            iter: 0,
            xold1: vec![0.0; n],
            xold2: vec![0.0; n],
            low: vec![x_min; n],
            upp: vec![x_max; n],
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    /// One design update. `obj_grad` is the gradient of the minimization
    /// objective; `g`/`dg` are constraint values g_i <= 0 and gradients.
    /// `move_limit` bounds |x_next - x| per variable.
    pub fn step(
        &mut self,
        x: &[f64],
        obj_grad: &[f64],
        g: &[f64],
        dg: &[Vec<f64>],
        move_limit: f64,
    ) -> Result<StepResult> {
        let n = self.n;
        if x.len() != n || obj_grad.len() != n || dg.iter().any(|d| d.len() != n) {
            return Err(Error::InvalidArgument(
                "optimizer input lengths do not match the variable count".into(),
            ));
        }
        if g.len() != dg.len() {
            return Err(Error::InvalidArgument(
                "constraint values and gradients disagree in count".into(),
            ));
        }
        let finite = x.iter().all(|v| v.is_finite())
            && obj_grad.iter().all(|v| v.is_finite())
            && g.iter().all(|v| v.is_finite())
            && dg.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("non-finite optimizer input".into()));
        }
        if !(move_limit > 0.0) {
            return Err(Error::InvalidArgument("move limit must be positive".into()));
        }

        // vacuous constraint keeps the dual solver well-posed when none given
        let dummy_g;
        let dummy_dg;
        let (g, dg): (&[f64], &[Vec<f64>]) = if g.is_empty() {
            dummy_g = vec![-1.0];
            dummy_dg = vec![vec![0.0; n]];
            (&dummy_g, &dummy_dg)
        } else {
            (g, dg)
        };
        let m = g.len();
        let range = self.x_max - self.x_min;

        // asymptote update
        if self.iter < 2 {
            for j in 0..n {
                self.low[j] = x[j] - ASY_INIT * range;
                self.upp[j] = x[j] + ASY_INIT * range;
            }
        } else {
            for j in 0..n {
                let trend = (x[j] - self.xold1[j]) * (self.xold1[j] - self.xold2[j]);
                let factor = if trend > 0.0 {
                    ASY_INCR
                } else if trend < 0.0 {
                    ASY_DECR
                } else {
                    1.0
                };
                let mut low = x[j] - factor * (self.xold1[j] - self.low[j]);
                let mut upp = x[j] + factor * (self.upp[j] - self.xold1[j]);
                low = low.clamp(x[j] - 10.0 * range, x[j] - 0.01 * range);
                upp = upp.clamp(x[j] + 0.01 * range, x[j] + 10.0 * range);
                self.low[j] = low;
                self.upp[j] = upp;
            }
        }

        // feasible box: asymptote margin and move limit
        let mut alfa = vec![0.0; n];
        let mut beta = vec![0.0; n];
        for j in 0..n {
            alfa[j] = (self.low[j] + ALBEFA * (x[j] - self.low[j]))
                .max(x[j] - move_limit)
                .max(self.x_min);
            beta[j] = (self.upp[j] - ALBEFA * (self.upp[j] - x[j]))
                .min(x[j] + move_limit)
                .min(self.x_max);
        }

        // separable approximation coefficients
        let xmami = range.max(1e-5);
        let mut p0 = vec![0.0; n];
        let mut q0 = vec![0.0; n];
        let mut pc = vec![vec![0.0; n]; m];
        let mut qc = vec![vec![0.0; n]; m];
        for j in 0..n {
            let ux = self.upp[j] - x[j];
            let xl = x[j] - self.low[j];
            let (ux2, xl2) = (ux * ux, xl * xl);
            let dfp = obj_grad[j].max(0.0);
            let dfm = (-obj_grad[j]).max(0.0);
            let pq = 0.001 * (dfp + dfm) + RAA0 / xmami;
            p0[j] = (dfp + pq) * ux2;
            q0[j] = (dfm + pq) * xl2;
            for i in 0..m {
                let dgp = dg[i][j].max(0.0);
                let dgm = (-dg[i][j]).max(0.0);
                let pq = 0.001 * (dgp + dgm) + RAA0 / xmami;
                pc[i][j] = (dgp + pq) * ux2;
                qc[i][j] = (dgm + pq) * xl2;
            }
        }
        let mut b = vec![0.0; m];
        for i in 0..m {
            let mut s = 0.0;
            for j in 0..n {
                s += pc[i][j] / (self.upp[j] - x[j]) + qc[i][j] / (x[j] - self.low[j]);
            }
            b[i] = s - g[i];
        }

        let result = subsolve(
            m, n, &self.low, &self.upp, &alfa, &beta, &p0, &q0, &pc, &qc, &b,
        );

        self.xold2 = std::mem::take(&mut self.xold1);
        self.xold1 = x.to_vec();
        self.iter += 1;
        Ok(result)
    }
}

struct SubState {
    x: Vec<f64>,
    y: Vec<f64>,
    z: f64,
    lam: Vec<f64>,
    xsi: Vec<f64>,
    eta: Vec<f64>,
    mu: Vec<f64>,
    zet: f64,
    s: Vec<f64>,
}

/// Primal-dual interior point solve of the MMA subproblem (the m < n dual
/// reduction; constraint counts here are always tiny).
#[allow(clippy::too_many_arguments)]
fn subsolve(
    m: usize,
    n: usize,
    low: &[f64],
    upp: &[f64],
    alfa: &[f64],
    beta: &[f64],
    p0: &[f64],
    q0: &[f64],
    pc: &[Vec<f64>],
    qc: &[Vec<f64>],
    b: &[f64],
) -> StepResult {
    let a = vec![0.0; m]; // no minimax z-coupling
    let c = vec![ELASTIC_C; m];
    let d = vec![ELASTIC_D; m];

    let mut st = SubState {
        x: alfa.iter().zip(beta.iter()).map(|(a, b)| 0.5 * (a + b)).collect(),
        y: vec![1.0; m],
        z: 1.0,
        lam: vec![1.0; m],
        xsi: (0..n)
            .map(|j| (1.0 / (0.5 * (alfa[j] + beta[j]) - alfa[j])).max(1.0))
            .collect(),
        eta: (0..n)
            .map(|j| (1.0 / (beta[j] - 0.5 * (alfa[j] + beta[j]))).max(1.0))
            .collect(),
        mu: c.iter().map(|ci| (0.5 * ci).max(1.0)).collect(),
        zet: 1.0,
        s: vec![1.0; m],
    };

    let residual = |st: &SubState, epsi: f64| -> (f64, f64) {
        let mut sq = 0.0;
        let mut mx: f64 = 0.0;
        let mut acc = |r: f64| {
            sq += r * r;
            mx = mx.max(r.abs());
        };
        // plam/qlam per variable
        for j in 0..n {
            let ux = upp[j] - st.x[j];
            let xl = st.x[j] - low[j];
            let mut plam = p0[j];
            let mut qlam = q0[j];
            for i in 0..m {
                plam += pc[i][j] * st.lam[i];
                qlam += qc[i][j] * st.lam[i];
            }
            let dpsi = plam / (ux * ux) - qlam / (xl * xl);
            acc(dpsi - st.xsi[j] + st.eta[j]);
            acc(st.xsi[j] * (st.x[j] - alfa[j]) - epsi);
            acc(st.eta[j] * (beta[j] - st.x[j]) - epsi);
        }
        for i in 0..m {
            let mut gv = 0.0;
            for j in 0..n {
                gv += pc[i][j] / (upp[j] - st.x[j]) + qc[i][j] / (st.x[j] - low[j]);
            }
            acc(c[i] + d[i] * st.y[i] - st.mu[i] - st.lam[i]);
            acc(gv - a[i] * st.z - st.y[i] + st.s[i] - b[i]);
            acc(st.mu[i] * st.y[i] - epsi);
            acc(st.lam[i] * st.s[i] - epsi);
        }
        let az: f64 = a.iter().zip(st.lam.iter()).map(|(ai, li)| ai * li).sum();
        acc(A0 - st.zet - az);
        acc(st.zet * st.z - epsi);
        (sq.sqrt(), mx)
    };

    let mut epsi = 1.0;
    let mut resi = residual(&st, epsi);
    while epsi > EPSI_MIN {
        let mut inner = 0;
        while resi.1 > 0.9 * epsi && inner < 200 {
            inner += 1;
            // Newton direction
            let mut delx = vec![0.0; n];
            let mut diagx = vec![0.0; n];
            let mut gg = vec![vec![0.0; n]; m];
            for j in 0..n {
                let ux = upp[j] - st.x[j];
                let xl = st.x[j] - low[j];
                let (ux2, xl2) = (ux * ux, xl * xl);
                let mut plam = p0[j];
                let mut qlam = q0[j];
                for i in 0..m {
                    plam += pc[i][j] * st.lam[i];
                    qlam += qc[i][j] * st.lam[i];
                    gg[i][j] = pc[i][j] / ux2 - qc[i][j] / xl2;
                }
                let dpsi = plam / ux2 - qlam / xl2;
                delx[j] = dpsi - epsi / (st.x[j] - alfa[j]) + epsi / (beta[j] - st.x[j]);
                diagx[j] = 2.0 * (plam / (ux2 * ux) + qlam / (xl2 * xl))
                    + st.xsi[j] / (st.x[j] - alfa[j])
                    + st.eta[j] / (beta[j] - st.x[j]);
            }
            let mut dely = vec![0.0; m];
            let mut dellam = vec![0.0; m];
            let mut diagy = vec![0.0; m];
            let mut diaglamyi = vec![0.0; m];
            for i in 0..m {
                let mut gv = 0.0;
                for j in 0..n {
                    gv += pc[i][j] / (upp[j] - st.x[j]) + qc[i][j] / (st.x[j] - low[j]);
                }
                dely[i] = c[i] + d[i] * st.y[i] - st.lam[i] - epsi / st.y[i];
                dellam[i] = gv - a[i] * st.z - st.y[i] - b[i] + epsi / st.lam[i];
                diagy[i] = d[i] + st.mu[i] / st.y[i];
                diaglamyi[i] = st.s[i] / st.lam[i] + 1.0 / diagy[i];
            }
            let delz: f64 = A0
                - a.iter().zip(st.lam.iter()).map(|(ai, li)| ai * li).sum::<f64>()
                - epsi / st.z;

            // reduced (m+1) system in (dlam, dz)
            let mut aa = vec![vec![0.0; m + 1]; m + 1];
            let mut bb = vec![0.0; m + 1];
            for i in 0..m {
                for k in 0..m {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += gg[i][j] * gg[k][j] / diagx[j];
                    }
                    aa[i][k] = s + if i == k { diaglamyi[i] } else { 0.0 };
                }
                aa[i][m] = a[i];
                aa[m][i] = a[i];
                let mut gdx = 0.0;
                for j in 0..n {
                    gdx += gg[i][j] * delx[j] / diagx[j];
                }
                bb[i] = dellam[i] + dely[i] / diagy[i] - gdx;
            }
            aa[m][m] = -st.zet / st.z;
            bb[m] = delz;
            let sol = solve_dense(&mut aa, &mut bb);
            let dlam = &sol[..m];
            let dz = sol[m];

            let mut dx = vec![0.0; n];
            for j in 0..n {
                let mut glam = 0.0;
                for i in 0..m {
                    glam += gg[i][j] * dlam[i];
                }
                dx[j] = -(delx[j] + glam) / diagx[j];
            }
            let dy: Vec<f64> = (0..m)
                .map(|i| -dely[i] / diagy[i] + dlam[i] / diagy[i])
                .collect();
            let dxsi: Vec<f64> = (0..n)
                .map(|j| {
                    -st.xsi[j] + epsi / (st.x[j] - alfa[j])
                        - st.xsi[j] * dx[j] / (st.x[j] - alfa[j])
                })
                .collect();
            let deta: Vec<f64> = (0..n)
                .map(|j| {
                    -st.eta[j] + epsi / (beta[j] - st.x[j])
                        + st.eta[j] * dx[j] / (beta[j] - st.x[j])
                })
                .collect();
            let dmu: Vec<f64> = (0..m)
                .map(|i| -st.mu[i] + epsi / st.y[i] - st.mu[i] * dy[i] / st.y[i])
                .collect();
            let dzet = -st.zet + epsi / st.z - st.zet * dz / st.z;
            let ds: Vec<f64> = (0..m)
                .map(|i| -st.s[i] + epsi / st.lam[i] - st.s[i] * dlam[i] / st.lam[i])
                .collect();

            // fraction-to-boundary step limit
            let mut stm: f64 = 1.0;
            let mut limit = |dv: f64, v: f64| {
                stm = stm.max(-1.01 * dv / v);
            };
            for i in 0..m {
                limit(dy[i], st.y[i]);
                limit(dlam[i], st.lam[i]);
                limit(dmu[i], st.mu[i]);
                limit(ds[i], st.s[i]);
            }
            limit(dz, st.z);
            limit(dzet, st.zet);
            for j in 0..n {
                limit(dxsi[j], st.xsi[j]);
                limit(deta[j], st.eta[j]);
                limit(dx[j], st.x[j] - alfa[j]);
                limit(-dx[j], beta[j] - st.x[j]);
            }
            let mut steg = 1.0 / stm;

            let old = SubState {
                x: st.x.clone(),
                y: st.y.clone(),
                z: st.z,
                lam: st.lam.clone(),
                xsi: st.xsi.clone(),
                eta: st.eta.clone(),
                mu: st.mu.clone(),
                zet: st.zet,
                s: st.s.clone(),
            };
            let mut new_resi = (2.0 * resi.0, resi.1);
            let mut halvings = 0;
            while new_resi.0 > resi.0 && halvings < 50 {
                for j in 0..n {
                    st.x[j] = old.x[j] + steg * dx[j];
                    st.xsi[j] = old.xsi[j] + steg * dxsi[j];
                    st.eta[j] = old.eta[j] + steg * deta[j];
                }
                for i in 0..m {
                    st.y[i] = old.y[i] + steg * dy[i];
                    st.lam[i] = old.lam[i] + steg * dlam[i];
                    st.mu[i] = old.mu[i] + steg * dmu[i];
                    st.s[i] = old.s[i] + steg * ds[i];
                }
                st.z = old.z + steg * dz;
                st.zet = old.zet + steg * dzet;
                new_resi = residual(&st, epsi);
                steg *= 0.5;
                halvings += 1;
            }
            resi = new_resi;
        }
        epsi *= 0.1;
        resi = residual(&st, epsi);
    }
    // report the residual against the tightest barrier actually solved
    let final_resi = residual(&st, epsi * 10.0);

    let elastic = st.y.iter().any(|&yi| yi > 1e-6);
    StepResult {
        x: st.x,
        lambda: st.lam,
        y: st.y,
        z: st.z,
        xsi: st.xsi,
        eta: st.eta,
        mu: st.mu,
        zet: st.zet,
        slack: st.s,
        elastic,
        subproblem_kkt: final_resi.1,
    }
}

/// Gaussian elimination with partial pivoting for the (m+1) dual system.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for row in (col + 1)..n {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let diag = a[col][col];
        for row in (col + 1)..n {
            let f = a[row][col] / diag;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in (row + 1)..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x
}

/// Max-norm KKT residual of the outer problem at a subproblem solution,
/// using the response values and gradients the step was built from.
pub fn kkt_residual_norm(
    x: &[f64],
    x_min: f64,
    x_max: f64,
    obj_grad: &[f64],
    g: &[f64],
    dg: &[Vec<f64>],
    sol: &StepResult,
) -> f64 {
    let n = x.len();
    let m = g.len();
    let mut sq = 0.0;
    let mut acc = |r: f64| sq += r * r;
    for j in 0..n {
        let mut s = obj_grad[j];
        for i in 0..m {
            s += sol.lambda[i] * dg[i][j];
        }
        acc(s - sol.xsi[j] + sol.eta[j]);
        acc(sol.xsi[j] * (x[j] - x_min));
        acc(sol.eta[j] * (x_max - x[j]));
    }
    for i in 0..m {
        acc(ELASTIC_C + ELASTIC_D * sol.y[i] - sol.mu[i] - sol.lambda[i]);
        acc(g[i] - sol.y[i] + sol.slack[i]);
        acc(sol.mu[i] * sol.y[i]);
        acc(sol.lambda[i] * sol.slack[i]);
    }
    acc(A0 - sol.zet);
    acc(sol.zet * sol.z);
    sq.sqrt()
}
