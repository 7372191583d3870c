//! Small fixed-size complex algebra for coin-space (2x2) operators.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Two-component coin spinor in the {H, V} basis.
pub type Spinor = [C64; 2];

/// Squared norm of a spinor.
#[inline]
pub fn spinor_norm_sqr(s: &Spinor) -> f64 {
    s[0].norm_sqr() + s[1].norm_sqr()
}

/// Dense 2x2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);
    pub const ZERO: Mat2 = Mat2([[ZERO, ZERO], [ZERO, ZERO]]);

    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn diag(a: C64, d: C64) -> Self {
        Mat2([[a, ZERO], [ZERO, d]])
    }

    pub fn sigma_x() -> Self {
        Mat2([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn sigma_y() -> Self {
        Mat2([[ZERO, -I], [I, ZERO]])
    }

    pub fn sigma_z() -> Self {
        Mat2([[ONE, ZERO], [ZERO, -ONE]])
    }

    /// exp(-iθσ_y) = [[cos θ, -sin θ], [sin θ, cos θ]].
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Mat2([[C64::from(c), C64::from(-s)], [C64::from(s), C64::from(c)]])
    }

    /// |+⟩⟨+| + sqrt(1-p)|−⟩⟨−| written in the {H, V} basis.
    pub fn loss(p: f64) -> Self {
        let s = (1.0 - p).max(0.0).sqrt();
        let a = C64::from(0.5 * (1.0 + s));
        let b = C64::from(0.5 * (1.0 - s));
        Mat2([[a, b], [b, a]])
    }

    pub fn scale(&self, z: C64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * z, m[0][1] * z], [m[1][0] * z, m[1][1] * z]])
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d.norm() == 0.0 {
            return None;
        }
        let m = &self.0;
        Some(Mat2([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]))
    }

    pub fn apply(&self, v: &Spinor) -> Spinor {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max componentwise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;

    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

impl Add for Mat2 {
    type Output = Mat2;

    fn add(self, rhs: Mat2) -> Mat2 {
        let mut out = self.0;
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] += rhs.0[i][j];
            }
        }
        Mat2(out)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;

    fn sub(self, rhs: Mat2) -> Mat2 {
        let mut out = self.0;
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] -= rhs.0[i][j];
            }
        }
        Mat2(out)
    }
}
