//! Symmetric banded matrices with an LDL' factorization.
//!
//! The KKT systems assembled here are symmetric quasi-definite (positive
//! diagonal on the primal block, negative on the dual block), so the LDL'
//! factorization exists without pivoting for any symmetric permutation.

/// Lower-band storage: `data[d * dim + i] = M[i + d][i]` for diagonals
/// `d = 0..=half_bw`.
#[derive(Debug, Clone)]
pub(crate) struct BandedMatrix {
    pub dim: usize,
    pub half_bw: usize,
    pub data: Vec<f64>,
}

impl BandedMatrix {
    pub fn new(dim: usize, half_bw: usize) -> Self {
        Self {
            dim,
            half_bw,
            data: vec![0.0; (half_bw + 1) * dim],
        }
    }


    /// Adds `v` at the symmetric position `(r, c)`; only the lower triangle
    /// is stored.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let (hi, lo) = if r >= c { (r, c) } else { (c, r) };
        let d = hi - lo;
        debug_assert!(d <= self.half_bw, "entry ({r},{c}) outside band {d}");
        self.data[d * self.dim + lo] += v;
    }

    /// Symmetric matrix-vector product `out = M x`.
    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let dim = self.dim;
        for i in 0..dim {
            out[i] += self.data[i] * x[i];
        }
        for d in 1..=self.half_bw {
            let band = &self.data[d * dim..(d + 1) * dim];
            for i in 0..dim - d {
                let v = band[i];
                if v != 0.0 {
                    out[i + d] += v * x[i];
                    out[i] += v * x[i + d];
                }
            }
        }
    }

    /// In-place LDL' factorization (no pivoting).
    pub fn factorize(mut self) -> Result<BandedLdl, &'static str> {
        let dim = self.dim;
        let bw = self.half_bw;
        let mut diag = vec![0.0; dim];
        for j in 0..dim {
            let start = j.saturating_sub(bw);
            let mut d_jj = self.data[j];
            for k in start..j {
                let l_jk = self.data[(j - k) * dim + k];
                d_jj -= l_jk * l_jk * diag[k];
            }
            if d_jj == 0.0 || !d_jj.is_finite() {
                return Err("zero or non-finite pivot in LDL factorization");
            }
            diag[j] = d_jj;
            let last = (j + bw).min(dim - 1);
            for i in j + 1..=last {
                let mut v = self.data[(i - j) * dim + j];
                let kstart = i.saturating_sub(bw).max(start);
                for k in kstart..j {
                    v -= self.data[(i - k) * dim + k] * self.data[(j - k) * dim + k] * diag[k];
                }
                self.data[(i - j) * dim + j] = v / d_jj;
            }
        }
        Ok(BandedLdl {
            dim,
            half_bw: bw,
            lower: self.data,
            diag,
        })
    }
}

/// Factorized form: unit lower band `L` and diagonal `D`.
#[derive(Debug, Clone)]
pub(crate) struct BandedLdl {
    dim: usize,
    half_bw: usize,
    lower: Vec<f64>,
    diag: Vec<f64>,
}

impl BandedLdl {
    /// Solves `M x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let dim = self.dim;
        let bw = self.half_bw;
        // forward: L y = b
        for i in 0..dim {
            let start = i.saturating_sub(bw);
            let mut v = b[i];
            for k in start..i {
                v -= self.lower[(i - k) * dim + k] * b[k];
            }
            b[i] = v;
        }
        for i in 0..dim {
            b[i] /= self.diag[i];
        }
        // backward: L' x = y
        for i in (0..dim).rev() {
            let last = (i + bw).min(dim - 1);
            let mut v = b[i];
            for j in i + 1..=last {
                v -= self.lower[(j - i) * dim + i] * b[j];
            }
            b[i] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_and_solve_tridiagonal() {
        // [2 -1 0; -1 2 -1; 0 -1 2] x = [1, 0, 1] -> x = [1, 1, 1]
        let mut m = BandedMatrix::new(3, 1);
        m.add(0, 0, 2.0);
        m.add(1, 1, 2.0);
        m.add(2, 2, 2.0);
        m.add(1, 0, -1.0);
        m.add(2, 1, -1.0);
        let f = m.factorize().unwrap();
        let mut b = vec![1.0, 0.0, 1.0];
        f.solve(&mut b);
        for v in b {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quasi_definite_system() {
        // [1 0 1; 0 1 1; 1 1 -1], a tiny KKT shape.
        let mut m = BandedMatrix::new(3, 2);
        m.add(0, 0, 1.0);
        m.add(1, 1, 1.0);
        m.add(2, 2, -1.0);
        m.add(2, 0, 1.0);
        m.add(2, 1, 1.0);
        let pristine = m.clone();
        let f = m.factorize().unwrap();
        let mut b = vec![1.0, 2.0, 0.5];
        let rhs = b.clone();
        f.solve(&mut b);
        let mut check = vec![0.0; 3];
        pristine.mul(&b, &mut check);
        for (c, r) in check.iter().zip(&rhs) {
            assert!((c - r).abs() < 1e-12);
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let mut m = BandedMatrix::new(4, 2);
        m.add(0, 0, 3.0);
        m.add(1, 1, 4.0);
        m.add(2, 2, 5.0);
        m.add(3, 3, 6.0);
        m.add(1, 0, -1.0);
        m.add(2, 0, 2.0);
        m.add(3, 2, 0.5);
        let x = [1.0, -2.0, 3.0, 0.25];
        let mut out = vec![0.0; 4];
        m.mul(&x, &mut out);
        let dense = [
            [3.0, -1.0, 2.0, 0.0],
            [-1.0, 4.0, 0.0, 0.0],
            [2.0, 0.0, 5.0, 0.5],
            [0.0, 0.0, 0.5, 6.0],
        ];
        for i in 0..4 {
            let want: f64 = (0..4).map(|j| dense[i][j] * x[j]).sum();
            assert!((out[i] - want).abs() < 1e-12);
        }
    }
}
