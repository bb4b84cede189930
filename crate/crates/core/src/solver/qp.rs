//! Sparse QP problem data with per-step layout tags.

/// Quadratic program `min 1/2 x'Px + q'x  s.t.  l <= Ax <= u`.
///
/// `p_rows` stores full symmetric rows of `P`; `a_rows` one sparse row per
/// constraint. `var_step` / `con_step` tag each variable and constraint with
/// the time step it belongs to, which drives the banded KKT ordering.
#[derive(Debug, Clone)]
pub(crate) struct QpData {
    pub n: usize,
    pub m: usize,
    pub p_rows: Vec<Vec<(usize, f64)>>,
    pub q: Vec<f64>,
    pub a_rows: Vec<Vec<(usize, f64)>>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    pub var_step: Vec<usize>,
    pub con_step: Vec<usize>,
}

impl QpData {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n: n_vars,
            m: 0,
            p_rows: vec![Vec::new(); n_vars],
            q: vec![0.0; n_vars],
            a_rows: Vec::new(),
            l: Vec::new(),
            u: Vec::new(),
            var_step: vec![0; n_vars],
            con_step: Vec::new(),
        }
    }

    /// Adds `v` to `P[i][j]` (and `P[j][i]` for off-diagonal entries).
    pub fn add_quadratic(&mut self, i: usize, j: usize, v: f64) {
        add_entry(&mut self.p_rows[i], j, v);
        if i != j {
            add_entry(&mut self.p_rows[j], i, v);
        }
    }

    /// Appends a constraint row `l <= a·x <= u`, returning its index.
    pub fn add_constraint(&mut self, step: usize, row: Vec<(usize, f64)>, l: f64, u: f64) -> usize {
        debug_assert!(l <= u);
        self.a_rows.push(row);
        self.l.push(l);
        self.u.push(u);
        self.con_step.push(step);
        self.m += 1;
        self.m - 1
    }


    /// `1/2 x'Px + q'x`.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        for (i, row) in self.p_rows.iter().enumerate() {
            for &(j, v) in row {
                quad += x[i] * v * x[j];
            }
        }
        0.5 * quad + self.q.iter().zip(x).map(|(q, x)| q * x).sum::<f64>()
    }

}

fn add_entry(row: &mut Vec<(usize, f64)>, j: usize, v: f64) {
    for entry in row.iter_mut() {
        if entry.0 == j {
            entry.1 += v;
            return;
        }
    }
    row.push((j, v));
}

/// Interleaved KKT ordering: for each step, its variables then its
/// constraints. Returns (variable -> KKT index, constraint -> KKT index).
pub(crate) fn interleaved_order(qp: &QpData) -> (Vec<usize>, Vec<usize>) {
    let max_step = qp
        .var_step
        .iter()
        .chain(qp.con_step.iter())
        .copied()
        .max()
        .unwrap_or(0);
    let mut var_pos = vec![0usize; qp.n];
    let mut con_pos = vec![0usize; qp.m];
    let mut next = 0usize;
    for step in 0..=max_step {
        for (v, &s) in qp.var_step.iter().enumerate() {
            if s == step {
                var_pos[v] = next;
                next += 1;
            }
        }
        for (c, &s) in qp.con_step.iter().enumerate() {
            if s == step {
                con_pos[c] = next;
                next += 1;
            }
        }
    }
    debug_assert_eq!(next, qp.n + qp.m);
    (var_pos, con_pos)
}
