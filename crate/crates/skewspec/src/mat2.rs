//! Real and complex 2×2 matrix algebra.
//!
//! Covers the pieces the cocycle machinery needs: rotations R_θ, reflections
//! S(θ), closed-form operator norms and singular directions, the SU(1,1) ↔
//! SL(2,ℝ) conjugation by the unitary W, and the two structured matrix
//! classes (the S′ form behind conjugated Szegő matrices and the J form of
//! Jacobi transfer matrices).

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Determinant / structure-relation tolerance used by validity checks.
pub const SL2_TOL: f64 = 1e-12;

/// Real 2×2 matrix, row-major `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Mat2 {
        Mat2 { a, b, c, d }
    }

    /// Rotation by `angle`: `[[cos, -sin], [sin, cos]]`.
    pub fn rotation(angle: f64) -> Mat2 {
        let (s, c) = angle.sin_cos();
        Mat2 { a: c, b: -s, c: s, d: c }
    }

    /// Reflection `S(θ) = [[-cos θ, sin θ], [sin θ, cos θ]]` (det = -1, trace 0).
    pub fn reflection(angle: f64) -> Mat2 {
        let (s, c) = angle.sin_cos();
        Mat2 { a: -c, b: s, c: s, d: c }
    }

    /// Reflection from a unit vector `(cos θ, sin θ)` given directly.
    pub fn reflection_from_unit(u: [f64; 2]) -> Mat2 {
        Mat2 { a: -u[0], b: u[1], c: u[1], d: u[0] }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    pub fn add(&self, rhs: &Mat2) -> Mat2 {
        Mat2::new(self.a + rhs.a, self.b + rhs.b, self.c + rhs.c, self.d + rhs.d)
    }

    pub fn sub(&self, rhs: &Mat2) -> Mat2 {
        Mat2::new(self.a - rhs.a, self.b - rhs.b, self.c - rhs.c, self.d - rhs.d)
    }

    pub fn scale(&self, k: f64) -> Mat2 {
        Mat2::new(k * self.a, k * self.b, k * self.c, k * self.d)
    }

    /// General inverse via the adjugate.
    pub fn inverse(&self) -> Mat2 {
        let inv_det = 1.0 / self.det();
        Mat2::new(self.d * inv_det, -self.b * inv_det, -self.c * inv_det, self.a * inv_det)
    }

    /// Adjugate inverse assuming det = 1 (exact for SL(2,ℝ) inputs).
    pub fn sl2_inverse(&self) -> Mat2 {
        Mat2::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    pub fn frobenius(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    /// Operator 2-norm (largest singular value), closed form.
    pub fn op_norm(&self) -> f64 {
        let q = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        let det = self.det();
        // q² - 4 det² factored to avoid cancellation for near-isometries.
        let disc = ((q - 2.0 * det.abs()) * (q + 2.0 * det.abs())).max(0.0);
        (0.5 * (q + disc.sqrt())).sqrt()
    }

    /// Unit vector spanning the most-expanded image direction (top left-singular
    /// vector, i.e. the dominant eigenvector of M Mᵀ).
    pub fn top_left_singular_vector(&self) -> [f64; 2] {
        // M Mᵀ = [[alpha, beta], [beta, gamma]]
        let alpha = self.a * self.a + self.b * self.b;
        let beta = self.a * self.c + self.b * self.d;
        let gamma = self.c * self.c + self.d * self.d;
        let half_diff = 0.5 * (alpha - gamma);
        let lam_top = 0.5 * (alpha + gamma) + (half_diff * half_diff + beta * beta).sqrt();
        // Pick the better-conditioned eigenvector expression.
        let v = if (lam_top - alpha).abs() > (lam_top - gamma).abs() {
            [beta, lam_top - alpha]
        } else {
            [lam_top - gamma, beta]
        };
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if n == 0.0 {
            // M Mᵀ is a multiple of the identity; any direction works.
            return [1.0, 0.0];
        }
        [v[0] / n, v[1] / n]
    }

    pub fn is_sl2(&self, tol: f64) -> bool {
        (self.det() - 1.0).abs() <= tol
    }
}

/// Complex 2×2 matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2C {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Mat2C {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Mat2C {
        Mat2C { a, b, c, d }
    }

    pub fn identity() -> Mat2C {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Mat2C::new(one, zero, zero, one)
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, rhs: &Mat2C) -> Mat2C {
        Mat2C {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Mat2C {
        Mat2C::new(self.a.conj(), self.c.conj(), self.b.conj(), self.d.conj())
    }

    pub fn sub(&self, rhs: &Mat2C) -> Mat2C {
        Mat2C::new(self.a - rhs.a, self.b - rhs.b, self.c - rhs.c, self.d - rhs.d)
    }

    pub fn max_abs(&self) -> f64 {
        self.a.norm().max(self.b.norm()).max(self.c.norm()).max(self.d.norm())
    }

    /// Operator 2-norm (largest singular value), closed form.
    pub fn op_norm(&self) -> f64 {
        let q = self.a.norm_sqr() + self.b.norm_sqr() + self.c.norm_sqr() + self.d.norm_sqr();
        let det = self.det().norm();
        let disc = ((q - 2.0 * det) * (q + 2.0 * det)).max(0.0);
        (0.5 * (q + disc.sqrt())).sqrt()
    }

    /// Max-entry residual of the U(1,1) relation M* J M = J with J = diag(1, -1).
    pub fn su11_residual(&self) -> f64 {
        let j = Mat2C::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 0.0),
        );
        self.adjoint().mul(&j).mul(self).sub(&j).max_abs()
    }

    pub fn is_su11(&self, tol: f64) -> bool {
        self.su11_residual() <= tol && (self.det() - Complex64::new(1.0, 0.0)).norm() <= tol
    }
}

/// The unitary W = (1/√2) [[1, i], [1, -i]] conjugating SL(2,ℝ) into SU(1,1).
pub fn w_matrix() -> Mat2C {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Mat2C::new(
        Complex64::new(s, 0.0),
        Complex64::new(0.0, s),
        Complex64::new(s, 0.0),
        Complex64::new(0.0, -s),
    )
}

/// W⁻¹ = W* = (1/√2) [[1, 1], [-i, i]].
pub fn w_inverse() -> Mat2C {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Mat2C::new(
        Complex64::new(s, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(0.0, -s),
        Complex64::new(0.0, s),
    )
}

/// Conjugate an SU(1,1) matrix into SL(2,ℝ): W⁻¹ M W, dropping the residual
/// imaginary parts. Errors if the residual exceeds 1e-10 (input not SU(1,1)).
pub fn to_sl2(m: &Mat2C) -> Result<Mat2> {
    let c = w_inverse().mul(m).mul(&w_matrix());
    let imag = c.a.im.abs().max(c.b.im.abs()).max(c.c.im.abs()).max(c.d.im.abs());
    if imag > 1e-10 {
        return Err(Error::NotSu11(imag));
    }
    Ok(Mat2::new(c.a.re, c.b.re, c.c.re, c.d.re))
}

/// Embed a real matrix as a complex one.
pub fn complexify(m: &Mat2) -> Mat2C {
    Mat2C::new(
        Complex64::new(m.a, 0.0),
        Complex64::new(m.b, 0.0),
        Complex64::new(m.c, 0.0),
        Complex64::new(m.d, 0.0),
    )
}

/// Parameters of the S′ class: (1/√(1-s²)) (R_{θ′} + s·S(θ)) with s ∈ [0, 1).
#[derive(Clone, Copy, Debug)]
pub struct SPrimeParams {
    pub s: f64,
    pub theta_prime: f64,
    pub theta: f64,
}

impl SPrimeParams {
    pub fn new(s: f64, theta_prime: f64, theta: f64) -> Result<SPrimeParams> {
        if !(0.0..1.0).contains(&s) {
            return Err(Error::ROutOfRange(s));
        }
        Ok(SPrimeParams { s, theta_prime, theta })
    }

    pub fn realize(&self) -> Mat2 {
        sprime_realize_vec(self.s, self.theta_prime, [self.theta.cos(), self.theta.sin()])
    }
}

/// Realize an S′ matrix with the reflection direction given as a unit vector
/// `(cos θ, sin θ)`. The determinant is 1 - s² before scaling for any unit
/// vector, so the result is exactly SL(2,ℝ) up to rounding.
pub fn sprime_realize_vec(s: f64, theta_prime: f64, u: [f64; 2]) -> Mat2 {
    let f = 1.0 / (1.0 - s * s).sqrt();
    let r = Mat2::rotation(theta_prime);
    let refl = Mat2::reflection_from_unit(u);
    r.add(&refl.scale(s)).scale(f)
}

/// Recover the b-block of the S′ decomposition: given M written as
/// (1/√(1-r²)) (R_{θ′} + r·[b_ij]), returns [b_ij] = (√(1-r²)·M - R_{θ′}) / r.
pub fn sprime_extract(m: &Mat2, r: f64, theta_prime: f64) -> Result<Mat2> {
    if r < 1e-9 {
        return Err(Error::RZero(r));
    }
    let q = (1.0 - r * r).sqrt();
    Ok(m.scale(q).sub(&Mat2::rotation(theta_prime)).scale(1.0 / r))
}

/// Parameters of the J class: [[t, -1/a], [a, 0]] with a > 0.
#[derive(Clone, Copy, Debug)]
pub struct JParams {
    pub t: f64,
    pub a: f64,
}

impl JParams {
    pub fn new(t: f64, a: f64) -> Result<JParams> {
        if a <= 0.0 {
            return Err(Error::NonpositiveA(a));
        }
        Ok(JParams { t, a })
    }

    pub fn realize(&self) -> Mat2 {
        Mat2::new(self.t, -(1.0 / self.a), self.a, 0.0)
    }
}

/// Projective distance between two directions, |sin of the angle| between
/// them; insensitive to sign and scale of either argument.
pub fn projective_distance(u: [f64; 2], v: [f64; 2]) -> f64 {
    let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
    let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return 1.0;
    }
    ((u[0] * v[1] - u[1] * v[0]) / (nu * nv)).abs()
}
