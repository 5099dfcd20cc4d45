//! Small dense square matrices (n ≤ 3) and closed-form singular values.
//!
//! Singular values come from the eigenvalues of the Gram matrix `MᵀM`,
//! solved in closed form. The smallest one is recovered from `|det M|`
//! where possible, which keeps it accurate for nearly singular inputs.

use std::f64::consts::TAU;

use arrayvec::ArrayVec;

use crate::error::{Error, Result};

pub type Vector = ArrayVec<f64, 3>;

/// Row-major `n × n` matrix, `1 ≤ n ≤ 3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    a: [f64; 9],
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=3).contains(&n), "matrix size {n} not in 1..=3");
        Matrix { n, a: [0.0; 9] }
    }

    pub fn identity(n: usize) -> Self {
        Matrix::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Matrix::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if !(1..=3).contains(&n) || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "expected a square matrix of size 1..=3, got {} row(s)",
                n
            )));
        }
        let mut m = Matrix::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * 3 + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * 3 + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Matrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Self {
        assert_eq!(self.n, other.n);
        let mut out = Matrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(
                    i,
                    j,
                    (0..self.n).map(|k| self.get(i, k) * other.get(k, j)).sum(),
                );
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vector {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        m.a.iter_mut().for_each(|v| *v *= s);
        m
    }

    pub fn det(&self) -> f64 {
        let g = |i, j| self.get(i, j);
        match self.n {
            1 => g(0, 0),
            2 => g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0),
            _ => {
                g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
                    - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
                    + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0))
            }
        }
    }

    /// Inverse by the adjugate; `None` when the determinant is zero.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let g = |i: usize, j: usize| self.get(i, j);
        let mut inv = Matrix::zeros(self.n);
        match self.n {
            1 => inv.set(0, 0, 1.0 / d),
            2 => {
                inv.set(0, 0, g(1, 1) / d);
                inv.set(0, 1, -g(0, 1) / d);
                inv.set(1, 0, -g(1, 0) / d);
                inv.set(1, 1, g(0, 0) / d);
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                        let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                        let cof = g(r0, c0) * g(r1, c1) - g(r0, c1) * g(r1, c0);
                        inv.set(i, j, cof / d);
                    }
                }
            }
        }
        Some(inv)
    }

    /// `MᵀM`.
    pub fn gram(&self) -> Self {
        self.transpose().mul(self)
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(s: &Matrix) -> Vector {
    let g = |i, j| s.get(i, j);
    let mut ev: Vector = match s.n {
        1 => [g(0, 0)].into_iter().collect(),
        2 => {
            let mean = 0.5 * (g(0, 0) + g(1, 1));
            let half = 0.5 * (g(0, 0) - g(1, 1));
            let d = half.hypot(g(0, 1));
            [mean - d, mean + d].into_iter().collect()
        }
        _ => {
            let off = g(0, 1).powi(2) + g(0, 2).powi(2) + g(1, 2).powi(2);
            if off == 0.0 {
                [g(0, 0), g(1, 1), g(2, 2)].into_iter().collect()
            } else {
                let q = (g(0, 0) + g(1, 1) + g(2, 2)) / 3.0;
                let p2 = (g(0, 0) - q).powi(2)
                    + (g(1, 1) - q).powi(2)
                    + (g(2, 2) - q).powi(2)
                    + 2.0 * off;
                let p = (p2 / 6.0).sqrt();
                let mut b = *s;
                for i in 0..3 {
                    b.set(i, i, b.get(i, i) - q);
                }
                let r = (b.scale(1.0 / p).det() / 2.0).clamp(-1.0, 1.0);
                let phi = r.acos() / 3.0;
                let hi = q + 2.0 * p * phi.cos();
                let lo = q + 2.0 * p * (phi + TAU / 3.0).cos();
                [lo, 3.0 * q - hi - lo, hi].into_iter().collect()
            }
        }
    };
    ev.sort_by(f64::total_cmp);
    ev
}

/// Singular values, ascending.
pub fn singular_values(m: &Matrix) -> Vector {
    let mut sv: Vector = symmetric_eigenvalues(&m.gram())
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    let n = m.n;
    if n < 2 {
        return sv;
    }
    // small singular values lose accuracy through the Gram matrix; the
    // largest one of the inverse does not
    if let Some(inv) = m.inverse() {
        let top_inv = symmetric_eigenvalues(&inv.gram())[n - 1].max(0.0).sqrt();
        if top_inv.is_finite() && top_inv > 0.0 {
            sv[0] = (1.0 / top_inv).min(sv[n - 1]);
            if n == 3 {
                sv[1] = (m.det().abs() / (sv[0] * sv[2])).clamp(sv[0], sv[2]);
            }
        }
    }
    sv
}

/// `l(M) = min_{|h|=1} |Mh|`, the smallest singular value.
pub fn min_stretch(m: &Matrix) -> f64 {
    singular_values(m)[0]
}

/// `‖M‖ = max_{|h|=1} |Mh|`, the largest singular value.
pub fn op_norm(m: &Matrix) -> f64 {
    *singular_values(m).last().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        Matrix::from_rows(&rows).unwrap()
    }

    fn oracle_sv(m: &Matrix) -> Vec<f64> {
        let n = m.dim();
        let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m.get(i, j));
        let mut s: Vec<f64> = dm
            .svd(false, false)
            .singular_values
            .iter()
            .copied()
            .collect();
        s.sort_by(f64::total_cmp);
        s
    }

    #[test]
    fn simple_cases() {
        assert_eq!(min_stretch(&Matrix::identity(2)), 1.0);
        assert_eq!(op_norm(&Matrix::identity(3)), 1.0);
        assert_relative_eq!(min_stretch(&Matrix::diagonal(&[2.0, 1.0])), 1.0);
        assert_relative_eq!(op_norm(&Matrix::diagonal(&[2.0, 1.0])), 2.0);
        assert_eq!(min_stretch(&Matrix::diagonal(&[1.0, 0.0])), 0.0);
    }

    #[test]
    fn conformal_square_derivative() {
        // z -> z^2 at z = r e^{iθ}: derivative 2z as a real 2x2 block
        let (r, th) = (0.7_f64, 1.1_f64);
        let (a, b) = (2.0 * r * th.cos(), 2.0 * r * th.sin());
        let m = Matrix::from_rows(&[vec![a, -b], vec![b, a]]).unwrap();
        assert_relative_eq!(min_stretch(&m), 2.0 * r, max_relative = 1e-14);
        assert_relative_eq!(op_norm(&m), 2.0 * r, max_relative = 1e-14);
    }

    #[test]
    fn matches_svd_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2, 3] {
            for _ in 0..2000 {
                let m = random(&mut rng, n);
                let ours = singular_values(&m);
                let theirs = oracle_sv(&m);
                let scale = theirs[n - 1];
                for (a, b) in ours.iter().zip(&theirs) {
                    assert!((a - b).abs() <= 1e-8 * scale, "{ours:?} vs {theirs:?}");
                }
            }
        }
    }

    #[test]
    fn norm_times_inverse_min_stretch_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 3] {
            for _ in 0..500 {
                let m = random(&mut rng, n);
                if m.det().abs() < 1e-3 {
                    continue;
                }
                let inv = m.inverse().unwrap();
                assert_relative_eq!(op_norm(&m) * min_stretch(&inv), 1.0, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random(&mut rng, 3);
        let id = m.mul(&m.inverse().unwrap());
        for i in 0..3 {
            for j in 0..3 {
                assert!((id.get(i, j) - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!(Matrix::diagonal(&[1.0, 0.0]).inverse().is_none());
    }
}
