//! Operator-splitting (ADMM) QP solver with banded KKT factorization,
//! Ruiz equilibration, adaptive step size and active-set polishing.

use crate::error::{Error, Result};
use crate::solver::banded::{BandedLdl, BandedMatrix};
use crate::solver::qp::{interleaved_order, QpData};

const RHO_EQ_FACTOR: f64 = 1e3;
const RHO_MIN: f64 = 1e-3;
const RHO_MAX: f64 = 1e6;
const SCALING_ITERS: usize = 10;
const SCALING_CLAMP: (f64, f64) = (1e-4, 1e4);

#[derive(Debug, Clone)]
pub(crate) struct SolveOptions {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iterations: usize,
    pub check_interval: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub rho: f64,
    pub adaptive_rho: bool,
    pub polish: bool,
    pub polish_delta: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            eps_abs: 1e-8,
            eps_rel: 1e-9,
            max_iterations: 200_000,
            check_interval: 25,
            sigma: 1e-6,
            alpha: 1.6,
            rho: 10.0,
            adaptive_rho: true,
            polish: true,
            polish_delta: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SolveOutcome {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Reusable solver state: scaling, KKT ordering and factorization survive
/// across repeated solves with different bounds (branch-and-bound nodes).
pub(crate) struct AdmmSolver {
    qp: QpData,
    // scaled data
    p_rows: Vec<Vec<(usize, f64)>>,
    q: Vec<f64>,
    a_rows: Vec<Vec<(usize, f64)>>,
    a_cols: Vec<Vec<(usize, f64)>>,
    l: Vec<f64>,
    u: Vec<f64>,
    d_scale: Vec<f64>,
    e_scale: Vec<f64>,
    c_scale: f64,
    // KKT layout
    var_pos: Vec<usize>,
    con_pos: Vec<usize>,
    half_bw: usize,
    equality: Vec<bool>,
    rho_base: f64,
    rho: Vec<f64>,
    kkt: BandedMatrix,
    factor: BandedLdl,
    opts: SolveOptions,
}

impl AdmmSolver {
    pub fn new(qp: QpData, opts: SolveOptions) -> Result<Self> {
        assert!(qp.m > 0, "QP needs at least one constraint");
        let (d_scale, e_scale, c_scale, p_rows, q, a_rows, l, u) = ruiz_scale(&qp);
        let a_cols = cols_of(&a_rows, qp.n);
        let (var_pos, con_pos) = interleaved_order(&qp);

        let mut half_bw = 0usize;
        for (i, row) in p_rows.iter().enumerate() {
            for &(j, _) in row {
                half_bw = half_bw.max(var_pos[i].abs_diff(var_pos[j]));
            }
        }
        for (i, row) in a_rows.iter().enumerate() {
            for &(j, _) in row {
                half_bw = half_bw.max(con_pos[i].abs_diff(var_pos[j]));
            }
        }

        let equality: Vec<bool> = qp
            .l
            .iter()
            .zip(&qp.u)
            .map(|(&lo, &hi)| lo.is_finite() && lo == hi)
            .collect();
        let rho_base = opts.rho;
        let rho: Vec<f64> = equality
            .iter()
            .map(|&eq| rho_for(rho_base, eq))
            .collect();

        let mut solver = Self {
            qp,
            p_rows,
            q,
            a_rows,
            a_cols,
            l,
            u,
            d_scale,
            e_scale,
            c_scale,
            var_pos,
            con_pos,
            half_bw,
            equality,
            rho_base,
            rho,
            kkt: BandedMatrix::new(1, 0),
            factor: identity_factor(),
            opts,
        };
        solver.factorize()?;
        Ok(solver)
    }

    fn dim(&self) -> usize {
        self.qp.n + self.qp.m
    }

    fn assemble_kkt(&self) -> BandedMatrix {
        let mut kkt = BandedMatrix::new(self.dim(), self.half_bw);
        for (i, row) in self.p_rows.iter().enumerate() {
            for &(j, v) in row {
                if j <= i {
                    kkt.add(self.var_pos[i], self.var_pos[j], v);
                }
            }
        }
        for v in 0..self.qp.n {
            kkt.add(self.var_pos[v], self.var_pos[v], self.opts.sigma);
        }
        for (i, row) in self.a_rows.iter().enumerate() {
            for &(j, v) in row {
                kkt.add(self.con_pos[i], self.var_pos[j], v);
            }
            kkt.add(self.con_pos[i], self.con_pos[i], -1.0 / self.rho[i]);
        }
        kkt
    }

    fn factorize(&mut self) -> Result<()> {
        self.kkt = self.assemble_kkt();
        self.factor = self
            .kkt
            .clone()
            .factorize()
            .map_err(|e| Error::InvalidProblem(format!("KKT factorization failed: {e}")))?;
        Ok(())
    }

    /// Solves the KKT system with one step of iterative refinement against
    /// the pristine matrix.
    fn kkt_solve(&self, rhs: &mut [f64], scratch: &mut [f64], scratch2: &mut [f64]) {
        scratch2.copy_from_slice(rhs);
        self.factor.solve(rhs);
        self.kkt.mul(rhs, scratch);
        for k in 0..rhs.len() {
            scratch[k] = scratch2[k] - scratch[k];
        }
        self.factor.solve(scratch);
        for k in 0..rhs.len() {
            rhs[k] += scratch[k];
        }
    }

    /// Solves with the problem's own bounds.
    pub fn solve(&mut self) -> Result<SolveOutcome> {
        self.solve_with_bounds(None, None)
    }

    /// Solves with per-variable bound overrides applied on top of the base
    /// constraint bounds (given in unscaled units, indexed by constraint).
    pub fn solve_with_bounds(
        &mut self,
        overrides: Option<&[(usize, f64, f64)]>,
        warm: Option<(&[f64], &[f64])>,
    ) -> Result<SolveOutcome> {
        let n = self.qp.n;
        let m = self.qp.m;

        let mut l = self.l.clone();
        let mut u = self.u.clone();
        if let Some(ov) = overrides {
            for &(i, lo, hi) in ov {
                l[i] = lo * self.e_scale[i];
                u[i] = hi * self.e_scale[i];
            }
        }

        // rows pinned to a point behave as equalities and want a stiffer rho
        let effective_eq: Vec<bool> = l
            .iter()
            .zip(&u)
            .map(|(&lo, &hi)| lo.is_finite() && lo == hi)
            .collect();
        if effective_eq != self.equality {
            self.equality = effective_eq;
            for i in 0..m {
                self.rho[i] = rho_for(self.rho_base, self.equality[i]);
            }
            self.factorize()?;
        }

        let mut x = vec![0.0; n];
        let mut y = vec![0.0; m];
        if let Some((x0, y0)) = warm {
            for j in 0..n {
                x[j] = x0[j] / self.d_scale[j];
            }
            for i in 0..m {
                y[i] = y0[i] * self.c_scale / self.e_scale[i];
            }
        }
        let mut z = vec![0.0; m];
        self.a_mul(&x, &mut z);
        for i in 0..m {
            z[i] = z[i].clamp(l[i], u[i]);
        }

        let mut rhs = vec![0.0; self.dim()];
        let mut scratch = vec![0.0; self.dim()];
        let mut scratch2 = vec![0.0; self.dim()];
        let mut xt = vec![0.0; n];
        let mut nu = vec![0.0; m];
        let mut work_n = vec![0.0; n];
        let mut work_m = vec![0.0; m];

        let mut prim_res = f64::INFINITY;
        let mut dual_res = f64::INFINITY;
        let mut iterations = 0;
        let mut converged = false;

        let mut next_polish_attempt = self.opts.check_interval * 4;
        let mut polished_accept: Option<(Vec<f64>, Vec<f64>)> = None;

        while iterations < self.opts.max_iterations {
            iterations += 1;

            // KKT solve for (x~, nu)
            for j in 0..n {
                rhs[self.var_pos[j]] = self.opts.sigma * x[j] - self.q[j];
            }
            for i in 0..m {
                rhs[self.con_pos[i]] = z[i] - y[i] / self.rho[i];
            }
            self.kkt_solve(&mut rhs, &mut scratch, &mut scratch2);
            for j in 0..n {
                xt[j] = rhs[self.var_pos[j]];
            }
            for i in 0..m {
                nu[i] = rhs[self.con_pos[i]];
            }

            let alpha = self.opts.alpha;
            for i in 0..m {
                // z~ then relaxed pre-projection value
                let zt = z[i] + (nu[i] - y[i]) / self.rho[i];
                let z_pre = alpha * zt + (1.0 - alpha) * z[i];
                let z_new = (z_pre + y[i] / self.rho[i]).clamp(l[i], u[i]);
                y[i] += self.rho[i] * (z_pre - z_new);
                z[i] = z_new;
            }
            for j in 0..n {
                x[j] = alpha * xt[j] + (1.0 - alpha) * x[j];
            }

            if iterations % self.opts.check_interval == 0
                || iterations == self.opts.max_iterations
            {
                let (rp, rd, ep, ed, np_, nd_) =
                    self.residuals(&x, &y, &z, &mut work_n, &mut work_m);
                prim_res = rp;
                dual_res = rd;
                if rp <= ep && rd <= ed {
                    converged = true;
                    break;
                }
                // an active-set polish usually lands the exact solution and
                // short-circuits the slow tail; retry on a backoff schedule
                if self.opts.polish && iterations >= next_polish_attempt {
                    next_polish_attempt = iterations * 2;
                    if let Some((px, py, prp, prd, passes)) =
                        self.attempt_polish(&y, &z, &l, &u, rp, ep, ed, &mut work_n, &mut work_m)
                    {
                        if passes {
                            polished_accept = Some((px, py));
                            prim_res = prp;
                            dual_res = prd;
                            converged = true;
                            break;
                        }
                    }
                }
                if self.opts.adaptive_rho && iterations % (self.opts.check_interval * 4) == 0 {
                    // np_/nd_ are already the relative residuals
                    let ratio = (np_ / nd_.max(1e-30)).sqrt();
                    if ratio > 5.0 || ratio < 0.2 {
                        self.rho_base = (self.rho_base * ratio).clamp(RHO_MIN, RHO_MAX);
                        for i in 0..m {
                            self.rho[i] = rho_for(self.rho_base, self.equality[i]);
                        }
                        self.factorize()?;
                    }
                }
            }
        }

        if let Some((px, py)) = polished_accept {
            x = px;
            y = py;
        } else if self.opts.polish {
            // final polish: accept whenever it does not regress
            let (_, _, fin_ep, fin_ed, _, _) = self.residuals(&x, &y, &z, &mut work_n, &mut work_m);
            if let Some((px, py, rp, rd, passes)) =
                self.attempt_polish(&y, &z, &l, &u, prim_res, fin_ep, fin_ed, &mut work_n, &mut work_m)
            {
                if passes
                    || (rp <= prim_res.max(1e-30) * 1.001 + 1e-16
                        && rd <= dual_res.max(1e-30) * 1.001 + 1e-16)
                {
                    x = px;
                    y = py;
                    prim_res = rp;
                    dual_res = rd;
                    if passes {
                        converged = true;
                    }
                }
            }
        }

        if !converged {
            return Err(Error::NotConverged {
                iterations,
                primal: prim_res,
                dual: dual_res,
            });
        }

        // unscale
        let x_out: Vec<f64> = (0..n).map(|j| x[j] * self.d_scale[j]).collect();
        let y_out: Vec<f64> = (0..m)
            .map(|i| y[i] * self.e_scale[i] / self.c_scale)
            .collect();
        let objective = self.qp.objective(&x_out);

        Ok(SolveOutcome {
            x: x_out,
            y: y_out,
            objective,
            iterations,
            primal_residual: prim_res,
            dual_residual: dual_res,
        })
    }

    /// Builds an active-set guess from multiplier signs above a threshold.
    fn side_from_multipliers(&self, y: &[f64], l: &[f64], u: &[f64], threshold: f64) -> Vec<i8> {
        (0..self.qp.m)
            .map(|i| {
                if l[i] == u[i] {
                    -1
                } else if y[i] < -threshold && l[i].is_finite() {
                    -1
                } else if y[i] > threshold && u[i].is_finite() {
                    1
                } else {
                    0
                }
            })
            .collect()
    }

    /// Builds an active-set guess from constraint-value proximity to bounds,
    /// with a cushion that widens with the current primal inaccuracy.
    fn side_from_proximity(&self, z: &[f64], l: &[f64], u: &[f64], prim_res: f64) -> Vec<i8> {
        (0..self.qp.m)
            .map(|i| {
                let cushion =
                    (1e-7 * (1.0 + l[i].abs().min(u[i].abs()))).max(30.0 * prim_res * self.e_scale[i]);
                if l[i] == u[i] {
                    -1
                } else if l[i].is_finite() && (z[i] - l[i]).abs() <= cushion {
                    -1
                } else if u[i].is_finite() && (u[i] - z[i]).abs() <= cushion {
                    1
                } else {
                    0
                }
            })
            .collect()
    }

    /// Tries active-set polishes over a ladder of candidate active sets and
    /// returns the candidate with the smallest worst-case residual. A
    /// candidate only counts as passing against tolerance thresholds no
    /// looser than the caller-supplied anchors (which prevents a wild
    /// candidate from inflating its own relative tolerance).
    #[allow(clippy::too_many_arguments)]
    fn attempt_polish(
        &self,
        y: &[f64],
        z: &[f64],
        l: &[f64],
        u: &[f64],
        prim_res: f64,
        anchor_ep: f64,
        anchor_ed: f64,
        work_n: &mut [f64],
        work_m: &mut [f64],
    ) -> Option<(Vec<f64>, Vec<f64>, f64, f64, bool)> {
        let y_ref = y
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(1e-12);
        let mut candidates: Vec<Vec<i8>> = vec![self.side_from_proximity(z, l, u, prim_res)];
        for rel in [1e-3, 1e-6, 1e-10] {
            candidates.push(self.side_from_multipliers(y, l, u, rel * y_ref));
        }
        candidates.dedup();
        let mut best: Option<(Vec<f64>, Vec<f64>, f64, f64, bool)> = None;
        for side in &candidates {
            let Some((px, mut py)) = self.polish(side, l, u) else {
                continue;
            };
            // complementarity needs sign-consistent multipliers; degenerate
            // active sets yield non-unique duals, so clip the wrong-signed
            // part and let the dual residual decide whether the face is right
            for (i, s) in side.iter().enumerate() {
                match s {
                    -1 if l[i] != u[i] => py[i] = py[i].min(0.0),
                    1 => py[i] = py[i].max(0.0),
                    _ => {}
                }
            }
            let mut pz = vec![0.0; self.qp.m];
            self.a_mul(&px, &mut pz);
            for i in 0..self.qp.m {
                pz[i] = pz[i].clamp(l[i], u[i]);
            }
            let (prp, prd, pep, ped, _, _) = self.residuals(&px, &py, &pz, work_n, work_m);
            let passes = prp <= pep.min(anchor_ep) && prd <= ped.min(anchor_ed);
            if std::env::var("ADMM_TRACE").is_ok() {
                let act = side.iter().filter(|s| **s != 0).count();
                eprintln!("    polish cand ({act} active): prp {prp:.2e} prd {prd:.2e} vs ({:.2e},{:.2e})", pep.min(anchor_ep), ped.min(anchor_ed));
            }
            let score = prp.max(prd);
            if passes {
                return Some((px, py, prp, prd, true));
            }
            if best
                .as_ref()
                .map(|(_, _, brp, brd, _)| score < brp.max(*brd))
                .unwrap_or(true)
            {
                best = Some((px, py, prp, prd, false));
            }
        }
        best
    }

    fn a_mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, row) in self.a_rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, v) in row {
                acc += v * x[j];
            }
            out[i] = acc;
        }
    }

    fn at_mul(&self, y: &[f64], out: &mut [f64]) {
        for (j, col) in self.a_cols.iter().enumerate() {
            let mut acc = 0.0;
            for &(i, v) in col {
                acc += v * y[i];
            }
            out[j] = acc;
        }
    }

    fn p_mul_scaled(&self, x: &[f64], out: &mut [f64]) {
        for (i, row) in self.p_rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, v) in row {
                acc += v * x[j];
            }
            out[i] = acc;
        }
    }

    /// Unscaled residuals and their tolerances; the last two values are the
    /// scaled norms used by the adaptive step-size rule.
    fn residuals(
        &self,
        x: &[f64],
        y: &[f64],
        z: &[f64],
        work_n: &mut [f64],
        work_m: &mut [f64],
    ) -> (f64, f64, f64, f64, f64, f64) {
        let n = self.qp.n;
        let m = self.qp.m;

        self.a_mul(x, work_m);
        let mut prim = 0.0;
        let mut ax_norm = 0.0;
        let mut z_norm = 0.0;
        for i in 0..m {
            let inv_e = 1.0 / self.e_scale[i];
            prim = f64::max(prim, ((work_m[i] - z[i]) * inv_e).abs());
            ax_norm = f64::max(ax_norm, (work_m[i] * inv_e).abs());
            z_norm = f64::max(z_norm, (z[i] * inv_e).abs());
        }
        let eps_prim = self.opts.eps_abs + self.opts.eps_rel * ax_norm.max(z_norm);

        self.p_mul_scaled(x, work_n);
        let mut px_norm = 0.0;
        let mut q_norm = 0.0;
        let mut dual_acc = vec![0.0; n];
        self.at_mul(y, &mut dual_acc);
        let mut aty_norm = 0.0;
        let mut dual = 0.0;
        let inv_c = 1.0 / self.c_scale;
        for j in 0..n {
            let inv_d = 1.0 / self.d_scale[j];
            let px = work_n[j] * inv_d * inv_c;
            let qq = self.q[j] * inv_d * inv_c;
            let aty = dual_acc[j] * inv_d * inv_c;
            px_norm = f64::max(px_norm, px.abs());
            q_norm = f64::max(q_norm, qq.abs());
            aty_norm = f64::max(aty_norm, aty.abs());
            dual = f64::max(dual, (px + qq + aty).abs());
        }
        let eps_dual = self.opts.eps_abs + self.opts.eps_rel * px_norm.max(q_norm).max(aty_norm);

        // scales for the adaptive step-size ratio are floored so that a
        // degenerate (all-zero-dual) problem cannot crash the step size
        let prim_scale = ax_norm.max(z_norm).max(1.0);
        let dual_scale = px_norm.max(q_norm).max(aty_norm).max(1.0);
        (
            prim,
            dual,
            eps_prim,
            eps_dual,
            prim / prim_scale,
            dual / dual_scale,
        )
    }

    /// Active-set polish: solves the equality-constrained QP on the detected
    /// active set with light regularization and iterative refinement.
    fn polish(&self, side: &[i8], l: &[f64], u: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.qp.n;
        let m = self.qp.m;
        let dim = self.dim();
        let delta = self.opts.polish_delta;

        let assemble = |reg: f64| -> BandedMatrix {
            let mut kkt = BandedMatrix::new(dim, self.half_bw);
            for (i, row) in self.p_rows.iter().enumerate() {
                for &(j, v) in row {
                    if j <= i {
                        kkt.add(self.var_pos[i], self.var_pos[j], v);
                    }
                }
            }
            for v in 0..n {
                kkt.add(self.var_pos[v], self.var_pos[v], reg);
            }
            for i in 0..m {
                if side[i] != 0 {
                    for &(j, v) in &self.a_rows[i] {
                        kkt.add(self.con_pos[i], self.var_pos[j], v);
                    }
                    kkt.add(self.con_pos[i], self.con_pos[i], -reg.max(delta));
                } else {
                    kkt.add(self.con_pos[i], self.con_pos[i], 1.0);
                }
            }
            kkt
        };

        let exact = assemble(0.0);
        let factor = assemble(delta)
            .factorize()
            .or_else(|_| assemble(delta * 1e3).factorize())
            .ok()?;

        let mut rhs = vec![0.0; dim];
        for j in 0..n {
            rhs[self.var_pos[j]] = -self.q[j];
        }
        for i in 0..m {
            rhs[self.con_pos[i]] = match side[i] {
                -1 => l[i],
                1 => u[i],
                _ => 0.0,
            };
        }
        let target = rhs.clone();
        factor.solve(&mut rhs);

        // two rounds of iterative refinement against the unregularized system
        let mut residual = vec![0.0; dim];
        for _ in 0..2 {
            exact.mul(&rhs, &mut residual);
            for k in 0..dim {
                residual[k] = target[k] - residual[k];
            }
            factor.solve(&mut residual);
            for k in 0..dim {
                rhs[k] += residual[k];
            }
        }

        let mut px = vec![0.0; n];
        for j in 0..n {
            px[j] = rhs[self.var_pos[j]];
        }
        let mut py = vec![0.0; m];
        for i in 0..m {
            if side[i] != 0 {
                py[i] = rhs[self.con_pos[i]];
            }
        }
        if px.iter().chain(py.iter()).any(|v| !v.is_finite()) {
            return None;
        }
        Some((px, py))
    }
}

fn identity_factor() -> BandedLdl {
    let mut m = BandedMatrix::new(1, 0);
    m.add(0, 0, 1.0);
    m.factorize().expect("identity factorizes")
}

fn rho_for(base: f64, equality: bool) -> f64 {
    if equality {
        (base * RHO_EQ_FACTOR).clamp(RHO_MIN, RHO_MAX)
    } else {
        base.clamp(RHO_MIN, RHO_MAX)
    }
}

fn cols_of(rows: &[Vec<(usize, f64)>], n: usize) -> Vec<Vec<(usize, f64)>> {
    let mut cols = vec![Vec::new(); n];
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            cols[j].push((i, v));
        }
    }
    cols
}

type ScaledData = (
    Vec<f64>,
    Vec<f64>,
    f64,
    Vec<Vec<(usize, f64)>>,
    Vec<f64>,
    Vec<Vec<(usize, f64)>>,
    Vec<f64>,
    Vec<f64>,
);

/// Modified Ruiz equilibration with cost normalization.
fn ruiz_scale(qp: &QpData) -> ScaledData {
    let n = qp.n;
    let m = qp.m;
    let mut p = qp.p_rows.clone();
    let mut q = qp.q.clone();
    let mut a = qp.a_rows.clone();
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; m];
    let mut c = 1.0;

    for _ in 0..SCALING_ITERS {
        let mut var_norm = vec![0.0f64; n];
        for (i, row) in p.iter().enumerate() {
            for &(j, v) in row {
                var_norm[i] = var_norm[i].max(v.abs());
                var_norm[j] = var_norm[j].max(v.abs());
            }
        }
        let mut con_norm = vec![0.0f64; m];
        for (i, row) in a.iter().enumerate() {
            for &(j, v) in row {
                var_norm[j] = var_norm[j].max(v.abs());
                con_norm[i] = con_norm[i].max(v.abs());
            }
        }
        let dv: Vec<f64> = var_norm
            .iter()
            .map(|&v| {
                if v <= 0.0 {
                    1.0
                } else {
                    (1.0 / v.sqrt()).clamp(SCALING_CLAMP.0, SCALING_CLAMP.1)
                }
            })
            .collect();
        let de: Vec<f64> = con_norm
            .iter()
            .map(|&v| {
                if v <= 0.0 {
                    1.0
                } else {
                    (1.0 / v.sqrt()).clamp(SCALING_CLAMP.0, SCALING_CLAMP.1)
                }
            })
            .collect();

        for (i, row) in p.iter_mut().enumerate() {
            for entry in row.iter_mut() {
                entry.1 *= dv[i] * dv[entry.0];
            }
        }
        for (j, qj) in q.iter_mut().enumerate() {
            *qj *= dv[j];
        }
        for (i, row) in a.iter_mut().enumerate() {
            for entry in row.iter_mut() {
                entry.1 *= de[i] * dv[entry.0];
            }
        }
        for j in 0..n {
            d[j] *= dv[j];
        }
        for i in 0..m {
            e[i] *= de[i];
        }
    }

    // one-shot cost normalization after equilibration
    let mut p_col_norm = vec![0.0f64; n];
    for (i, row) in p.iter().enumerate() {
        for &(j, v) in row {
            p_col_norm[i] = p_col_norm[i].max(v.abs());
            p_col_norm[j] = p_col_norm[j].max(v.abs());
        }
    }
    let mean_p = p_col_norm.iter().sum::<f64>() / n as f64;
    let q_norm = q.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let denom = mean_p.max(q_norm);
    if denom > 0.0 {
        let gamma = (1.0 / denom).clamp(SCALING_CLAMP.0, SCALING_CLAMP.1);
        for row in p.iter_mut() {
            for entry in row.iter_mut() {
                entry.1 *= gamma;
            }
        }
        for qj in q.iter_mut() {
            *qj *= gamma;
        }
        c = gamma;
    }

    let l: Vec<f64> = qp.l.iter().zip(&e).map(|(&lo, &ei)| lo * ei).collect();
    let u: Vec<f64> = qp.u.iter().zip(&e).map(|(&hi, &ei)| hi * ei).collect();
    (d, e, c, p, q, a, l, u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(qp: QpData) -> SolveOutcome {
        let mut solver = AdmmSolver::new(qp, SolveOptions::default()).unwrap();
        solver.solve().unwrap()
    }

    #[test]
    fn box_constrained_scalar() {
        // min x^2 - 2x s.t. 0 <= x <= 0.7  ->  x = 0.7
        let mut qp = QpData::new(1);
        qp.add_quadratic(0, 0, 2.0);
        qp.q[0] = -2.0;
        qp.add_constraint(0, vec![(0, 1.0)], 0.0, 0.7);
        let out = solve(qp);
        assert!((out.x[0] - 0.7).abs() < 1e-7, "x = {}", out.x[0]);
    }

    #[test]
    fn equality_constrained_projection() {
        // min 1/2 (x1^2 + x2^2) s.t. x1 + x2 = 2  ->  (1, 1)
        let mut qp = QpData::new(2);
        qp.add_quadratic(0, 0, 1.0);
        qp.add_quadratic(1, 1, 1.0);
        qp.add_constraint(0, vec![(0, 1.0), (1, 1.0)], 2.0, 2.0);
        let out = solve(qp);
        assert!((out.x[0] - 1.0).abs() < 1e-7);
        assert!((out.x[1] - 1.0).abs() < 1e-7);
        assert!((out.objective - 1.0).abs() < 1e-7);
    }

    #[test]
    fn small_lp() {
        // min -x1 - x2 s.t. x1 + x2 <= 1.5, 0 <= x <= 1  ->  objective -1.5
        let mut qp = QpData::new(2);
        qp.q = vec![-1.0, -1.0];
        qp.add_constraint(0, vec![(0, 1.0), (1, 1.0)], f64::NEG_INFINITY, 1.5);
        qp.add_constraint(0, vec![(0, 1.0)], 0.0, 1.0);
        qp.add_constraint(0, vec![(1, 1.0)], 0.0, 1.0);
        let out = solve(qp);
        assert!((out.objective + 1.5).abs() < 1e-7, "obj {}", out.objective);
    }

    #[test]
    fn badly_scaled_qp() {
        // min 1/2 * 1e6 (x1 - 1e-3)^2 + 1/2*(x2 - 1e3)^2 with loose boxes
        let mut qp = QpData::new(2);
        qp.add_quadratic(0, 0, 1e6);
        qp.add_quadratic(1, 1, 1.0);
        qp.q = vec![-1e3, -1e3];
        qp.add_constraint(0, vec![(0, 1.0)], -1e4, 1e4);
        qp.add_constraint(0, vec![(1, 1.0)], -1e4, 1e4);
        let out = solve(qp);
        assert!((out.x[0] - 1e-3).abs() < 1e-6);
        assert!((out.x[1] - 1e3).abs() < 1e-3);
    }

    #[test]
    fn warm_start_and_bound_overrides() {
        // min (x-2)^2 with x in [0, 5], then re-solve with x fixed to 1.
        let mut qp = QpData::new(1);
        qp.add_quadratic(0, 0, 2.0);
        qp.q[0] = -4.0;
        qp.add_constraint(0, vec![(0, 1.0)], 0.0, 5.0);
        let mut solver = AdmmSolver::new(qp, SolveOptions::default()).unwrap();
        let free = solver.solve().unwrap();
        assert!((free.x[0] - 2.0).abs() < 1e-7);
        let fixed = solver
            .solve_with_bounds(Some(&[(0, 1.0, 1.0)]), Some((&free.x, &free.y)))
            .unwrap();
        assert!((fixed.x[0] - 1.0).abs() < 1e-7);
    }
}

#[cfg(test)]
mod tuning {
    use super::*;

    #[test]
    #[ignore]
    fn dissect_stuck_leaf() {
        use crate::battery::BatterySpec;
        use crate::opt_mccormick::build_mip;
        use crate::problem::{CostKind, ProblemSpec};
        use crate::response::ResponseModel;
        use crate::timeseries::ImbalanceSeries;
        use std::sync::Arc;

        let series = ImbalanceSeries::new(vec![35.0, -50.0, 15.0], vec![1000.0; 3], 1.0).unwrap();
        let battery = BatterySpec::new(0.0, 100.0, 100.0, 40.0, 40.0, 0.95, 0.95).unwrap();
        let spec = ProblemSpec::new(
            Arc::new(series),
            battery,
            CostKind::Quadratic,
            true,
            ResponseModel::direct(0.01).unwrap(),
            None,
            45.0,
        )
        .unwrap();
        let mip = build_mip(&spec, 24).unwrap();
        // root with the implied fix z1 = 0 (binary index 2)
        let ov: Vec<(usize, f64, f64)> = vec![(mip.binaries[2].box_con, 0.0, 0.0)];
        let opts = SolveOptions {
            max_iterations: 50_000,
            ..Default::default()
        };
        let mut solver = AdmmSolver::new(mip.qp.clone(), opts).unwrap();
        std::env::set_var("ADMM_TRACE", "1");
        match solver.solve_with_bounds(Some(&ov), None) {
            Ok(o) => eprintln!("leaf ok: obj {} iters {}", o.objective, o.iterations),
            Err(e) => eprintln!("leaf: {e}"),
        }
    }

    use super::*;
    use crate::battery::BatterySpec;
    use crate::opt_mccormick::build_mip;
    use crate::problem::{CostKind, ProblemSpec};
    use crate::response::ResponseModel;
    use crate::timeseries::ImbalanceSeries;
    use std::sync::Arc;

    #[test]
    #[ignore]
    fn parameter_sweep_on_hard_node() {
        let series = ImbalanceSeries::new(vec![30.0, -55.0], vec![1000.0; 2], 1.0).unwrap();
        let battery = BatterySpec::new(0.0, 100.0, 100.0, 40.0, 40.0, 1.0, 1.0).unwrap();
        let spec = ProblemSpec::new(
            Arc::new(series),
            battery,
            CostKind::Quadratic,
            false,
            ResponseModel::direct(0.0).unwrap(),
            None,
            50.0,
        )
        .unwrap();
        let mip = build_mip(&spec, 24).unwrap();
        let z1 = mip.binaries[2].box_con; // step 1 residual-sign binary
        for (label, rho, alpha, sigma, adapt) in [
            ("default", 0.1, 1.6, 1e-6, true),
            ("rho1", 1.0, 1.6, 1e-6, true),
            ("rho10", 10.0, 1.6, 1e-6, true),
            ("alpha1", 0.1, 1.0, 1e-6, true),
            ("sigma小", 0.1, 1.6, 1e-8, true),
            ("noadapt", 0.1, 1.6, 1e-6, false),
        ] {
            let mut qp2 = mip.qp.clone();
            qp2.l[z1] = 0.0;
            qp2.u[z1] = 0.0;
            let opts = SolveOptions {
                rho,
                alpha,
                sigma,
                adaptive_rho: adapt,
                max_iterations: 50_000,
                ..Default::default()
            };
            let mut solver = AdmmSolver::new(qp2, opts).unwrap();
            let t0 = std::time::Instant::now();
            match solver.solve_with_bounds(None, None) {
                Ok(o) => eprintln!(
                    "{label}: obj {:.6} iters {} in {:.1} ms",
                    o.objective,
                    o.iterations,
                    t0.elapsed().as_secs_f64() * 1e3
                ),
                Err(e) => eprintln!("{label}: {e}"),
            }
        }
    }
}
