//! Fixed-size 2×2 complex matrices.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A 2×2 complex matrix indexed as `m[b][a]` (row `b`, column `a`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[[f64; 2]; 2]; 2]", into = "[[[f64; 2]; 2]; 2]")]
pub struct Matrix2(pub [[Complex64; 2]; 2]);

impl Matrix2 {
    pub const fn new(m00: Complex64, m01: Complex64, m10: Complex64, m11: Complex64) -> Self {
        Matrix2([[m00, m01], [m10, m11]])
    }

    pub fn real(m00: f64, m01: f64, m10: f64, m11: f64) -> Self {
        Matrix2([
            [Complex64::new(m00, 0.0), Complex64::new(m01, 0.0)],
            [Complex64::new(m10, 0.0), Complex64::new(m11, 0.0)],
        ])
    }

    pub const fn zero() -> Self {
        Matrix2([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub const fn identity() -> Self {
        Matrix2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub const fn sigma_x() -> Self {
        Matrix2([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn sigma_y() -> Self {
        Matrix2([[ZERO, -I], [I, ZERO]])
    }

    pub fn sigma_z() -> Self {
        Matrix2([[ONE, ZERO], [ZERO, -ONE]])
    }

    /// `x σ_x + y σ_y + z σ_z + t 𝟙`.
    pub fn from_pauli(x: f64, y: f64, z: f64, t: f64) -> Self {
        Matrix2([
            [Complex64::new(t + z, 0.0), Complex64::new(x, -y)],
            [Complex64::new(x, y), Complex64::new(t - z, 0.0)],
        ])
    }

    /// The unit-cell gauge unitary `G_k = diag(1, e^{ik})`.
    pub fn gauge(k: f64) -> Self {
        Matrix2([[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, k)]])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Matrix2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        let m = &self.0;
        Matrix2([[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]])
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let m = &self.0;
        Matrix2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// `u · self · u†`.
    pub fn conjugate_by(&self, u: &Matrix2) -> Self {
        *u * *self * u.adjoint()
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Spectral (largest singular value) norm.
    pub fn op_norm(&self) -> f64 {
        // largest eigenvalue of the Hermitian m†m
        let g = self.adjoint() * *self;
        let (a, d, b) = (g.0[0][0].re, g.0[1][1].re, g.0[0][1].norm());
        let half = (a - d) / 2.0;
        ((a + d) / 2.0 + half.hypot(b)).max(0.0).sqrt()
    }

    /// `max |m − m†|` entrywise.
    pub fn hermiticity_residual(&self) -> f64 {
        (*self - self.adjoint()).max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl Default for Matrix2 {
    fn default() -> Self {
        Matrix2::zero()
    }
}

impl Index<(usize, usize)> for Matrix2 {
    type Output = Complex64;
    fn index(&self, (b, a): (usize, usize)) -> &Complex64 {
        &self.0[b][a]
    }
}

impl IndexMut<(usize, usize)> for Matrix2 {
    fn index_mut(&mut self, (b, a): (usize, usize)) -> &mut Complex64 {
        &mut self.0[b][a]
    }
}

impl Add for Matrix2 {
    type Output = Matrix2;
    fn add(self, rhs: Matrix2) -> Matrix2 {
        let (a, b) = (self.0, rhs.0);
        Matrix2([[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]])
    }
}

impl Sub for Matrix2 {
    type Output = Matrix2;
    fn sub(self, rhs: Matrix2) -> Matrix2 {
        let (a, b) = (self.0, rhs.0);
        Matrix2([[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]])
    }
}

impl Neg for Matrix2 {
    type Output = Matrix2;
    fn neg(self) -> Matrix2 {
        self.scale_re(-1.0)
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;
    fn mul(self, rhs: Matrix2) -> Matrix2 {
        let (a, b) = (self.0, rhs.0);
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Matrix2(out)
    }
}

impl From<[[[f64; 2]; 2]; 2]> for Matrix2 {
    fn from(raw: [[[f64; 2]; 2]; 2]) -> Self {
        let c = |p: [f64; 2]| Complex64::new(p[0], p[1]);
        Matrix2([[c(raw[0][0]), c(raw[0][1])], [c(raw[1][0]), c(raw[1][1])]])
    }
}

impl From<Matrix2> for [[[f64; 2]; 2]; 2] {
    fn from(m: Matrix2) -> Self {
        let p = |c: Complex64| [c.re, c.im];
        [[p(m.0[0][0]), p(m.0[0][1])], [p(m.0[1][0]), p(m.0[1][1])]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (Matrix2::sigma_x(), Matrix2::sigma_y(), Matrix2::sigma_z());
        assert!((x * x - Matrix2::identity()).max_abs() < 1e-15);
        assert!((y * y - Matrix2::identity()).max_abs() < 1e-15);
        // σ_x σ_y = i σ_z
        assert!((x * y - z.scale(I)).max_abs() < 1e-15);
    }

    #[test]
    fn op_norm_of_hermitian_is_largest_eigenvalue_modulus() {
        // eigenvalues t ± ‖x‖ = 0.5 ± 3
        let m = Matrix2::from_pauli(1.0, 2.0, 2.0, 0.5);
        assert!((m.op_norm() - 3.5).abs() < 1e-12);
        assert!((Matrix2::sigma_z().scale_re(2.0).op_norm() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn json_layout_is_row_major_re_im() {
        let m = Matrix2::new(ONE, I, ZERO, Complex64::new(-1.0, 0.0));
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[[1.0,0.0],[0.0,1.0]],[[0.0,0.0],[-1.0,0.0]]]");
        let back: Matrix2 = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
