//! Cocycle generators and iteration: the Szegő cocycle (SU(1,1) form and its
//! SL(2,ℝ) conjugate), Jacobi transfer matrices, rotation dressings, and
//! S′-parameter fields.

use std::sync::Arc;

use num_complex::Complex64;

use crate::base::{BaseDynamics, BasePoint, SupportBox};
use crate::error::{Error, Result};
use crate::mat2::{sprime_realize_vec, Mat2, Mat2C, SPrimeParams};
use crate::sampling::SamplingMap;

/// A point α = r·e^{iφ} of the open unit disk.
#[derive(Clone, Copy, Debug)]
pub struct UnitDiskPoint {
    pub r: f64,
    pub phi: f64,
}

impl UnitDiskPoint {
    pub fn new(r: f64, phi: f64) -> Result<UnitDiskPoint> {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::AlphaOutOfDisk(r));
        }
        Ok(UnitDiskPoint { r, phi })
    }

    pub fn from_complex(v: Complex64) -> Result<UnitDiskPoint> {
        let r = v.norm();
        if r >= 1.0 {
            return Err(Error::AlphaOutOfDisk(r));
        }
        Ok(UnitDiskPoint { r, phi: v.arg() })
    }

    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.r, self.phi)
    }
}

/// The spectral parameter z = e^{iψ} with ψ ∈ [0, 2π). The half-phase
/// branch is fixed as z^{1/2} = e^{iψ/2}; the opposite branch only flips
/// the sign of the Szegő matrix, which changes neither the norms nor the
/// projective dynamics.
#[derive(Clone, Copy, Debug)]
pub struct UnitCirclePhase {
    pub psi: f64,
}

impl UnitCirclePhase {
    pub fn new(psi: f64) -> UnitCirclePhase {
        let tau = std::f64::consts::TAU;
        let mut p = psi.rem_euclid(tau);
        if p >= tau {
            p = 0.0;
        }
        UnitCirclePhase { psi: p }
    }

    pub fn theta_prime(&self) -> f64 {
        0.5 * self.psi
    }

    pub fn z(&self) -> Complex64 {
        Complex64::from_polar(1.0, self.psi)
    }
}

/// The Szegő cocycle matrix in SU(1,1):
/// Ā(α, z) = (1/(z^{1/2} √(1−|α|²))) [[z, −ᾱ], [−αz, 1]].
pub fn szego_su11(alpha: &UnitDiskPoint, z: &UnitCirclePhase) -> Mat2C {
    let a = alpha.value();
    let zc = z.z();
    let scale = Complex64::from_polar(1.0, -z.theta_prime()) / (1.0 - alpha.r * alpha.r).sqrt();
    Mat2C::new(scale * zc, scale * (-a.conj()), scale * (-a * zc), scale)
}

/// Convenience wrapper taking the Verblunsky value directly.
pub fn szego_su11_value(alpha: Complex64, z: &UnitCirclePhase) -> Result<Mat2C> {
    Ok(szego_su11(&UnitDiskPoint::from_complex(alpha)?, z))
}

/// The conjugated Szegő matrix in S′ form, built directly from
/// (r, φ, ψ): s = r, θ′ = ψ/2, θ = ψ/2 + φ. Realizing the parameters gives
/// W⁻¹ Ā(r e^{iφ}, z) W entrywise.
pub fn szego_sl2(r: f64, phi: f64, z: &UnitCirclePhase) -> Result<SPrimeParams> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::ROutOfRange(r));
    }
    let tp = z.theta_prime();
    SPrimeParams::new(r, tp, tp + phi)
}

/// Jacobi transfer matrix [[ (E−b)/a, −1/a ], [ a, 0 ]].
pub fn jacobi_step(e: f64, a: f64, b: f64) -> Result<Mat2> {
    if a <= 0.0 {
        return Err(Error::NonpositiveA(a));
    }
    let inv_a = 1.0 / a;
    Ok(Mat2::new((e - b) * inv_a, -inv_a, a, 0.0))
}

/// A low-frequency angle field θ(x) = amplitude · bump(x) · Σ wⱼ cos(2π kⱼ·x + φⱼ),
/// vanishing outside its support box. Weights are normalized so the mode sum
/// stays within [−1, 1].
#[derive(Clone, Debug)]
pub struct AngleField {
    pub support: SupportBox,
    pub amplitude: f64,
    pub modes: Vec<AngleMode>,
}

#[derive(Clone, Copy, Debug)]
pub struct AngleMode {
    pub freq: [i32; 2],
    pub phase: f64,
    pub weight: f64,
}

impl AngleField {
    /// Constant-sign dressing on the support (a single zero-frequency mode).
    pub fn constant(support: SupportBox, amplitude: f64) -> AngleField {
        AngleField {
            support,
            amplitude,
            modes: vec![AngleMode { freq: [0, 0], phase: 0.0, weight: 1.0 }],
        }
    }

    pub fn angle(&self, p: &BasePoint) -> f64 {
        let bump = self.support.bump(p);
        if bump == 0.0 {
            return 0.0;
        }
        let mut g = 0.0;
        for m in &self.modes {
            let mut phase = m.phase;
            for (k, &x) in p.coords().iter().enumerate() {
                phase += std::f64::consts::TAU * m.freq[k] as f64 * x;
            }
            g += m.weight * phase.cos();
        }
        self.amplitude * bump * g
    }
}

/// An S′-parameter field: inside the support box the matrix is realized from
/// bilinearly interpolated (s, reflection-direction) lattice values; outside
/// it falls back to the base generator. Interpolating the direction as a
/// unit vector keeps every realized matrix exactly in S′.
#[derive(Clone)]
pub struct SPrimeField {
    pub support: SupportBox,
    pub theta_prime: f64,
    pub resolution: usize,
    pub dims: usize,
    /// s parameter per lattice node (row-major, first coordinate fastest).
    pub s_values: Vec<f64>,
    /// Reflection direction (cos θ, sin θ) per lattice node.
    pub dir_values: Vec<[f64; 2]>,
    pub base: Arc<Generator>,
}

impl SPrimeField {
    fn node(&self, i: usize, j: usize) -> (f64, [f64; 2]) {
        let n = self.resolution;
        let idx = if self.dims == 1 { i % n } else { (j % n) * n + (i % n) };
        (self.s_values[idx], self.dir_values[idx])
    }

    fn interp(&self, p: &BasePoint) -> (f64, [f64; 2]) {
        let n = self.resolution as f64;
        let x = p.x() * n;
        let i0 = (x.floor() as usize).min(self.resolution - 1);
        let fx = x - i0 as f64;
        let blend = |a: (f64, [f64; 2]), b: (f64, [f64; 2]), t: f64| -> (f64, [f64; 2]) {
            (a.0 * (1.0 - t) + b.0 * t, [a.1[0] * (1.0 - t) + b.1[0] * t, a.1[1] * (1.0 - t) + b.1[1] * t])
        };
        let (s, d) = if self.dims == 1 {
            blend(self.node(i0, 0), self.node(i0 + 1, 0), fx)
        } else {
            let y = p.y() * n;
            let j0 = (y.floor() as usize).min(self.resolution - 1);
            let fy = y - j0 as f64;
            let lo = blend(self.node(i0, j0), self.node(i0 + 1, j0), fx);
            let hi = blend(self.node(i0, j0 + 1), self.node(i0 + 1, j0 + 1), fx);
            blend(lo, hi, fy)
        };
        let norm = (d[0] * d[0] + d[1] * d[1]).sqrt();
        (s.clamp(0.0, 1.0 - 1e-12), [d[0] / norm, d[1] / norm])
    }
}

/// Pointwise matrix evaluator backing [`Generator::Func`].
pub type MatrixFn = Arc<dyn Fn(&BasePoint) -> Result<Mat2> + Send + Sync>;

/// The map x ↦ A(x) behind a cocycle.
#[derive(Clone)]
pub enum Generator {
    Constant(Mat2),
    /// Conjugated Szegő generator W⁻¹ Ā(f(x), z) W, realized through the S′ form.
    SzegoSl2 { f: SamplingMap, z: UnitCirclePhase },
    /// Jacobi transfer generator A_{E,a,b}(x).
    Jacobi { f_a: SamplingMap, f_b: SamplingMap, energy: f64 },
    /// x ↦ R_{θ(x)} · base(x).
    Dressed { base: Arc<Generator>, field: AngleField },
    /// S′-parameter field with fallback to `base` off the support.
    SPrime(SPrimeField),
    /// Arbitrary pointwise map (local projections, synthetic tests).
    Func(MatrixFn),
}

impl std::fmt::Debug for Generator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Generator::Constant(m) => write!(f, "Constant({m:?})"),
            Generator::SzegoSl2 { z, .. } => write!(f, "SzegoSl2 {{ psi: {} }}", z.psi),
            Generator::Jacobi { energy, .. } => write!(f, "Jacobi {{ energy: {energy} }}"),
            Generator::Dressed { base, field } => {
                write!(f, "Dressed {{ amplitude: {}, base: {base:?} }}", field.amplitude)
            }
            Generator::SPrime(sp) => write!(f, "SPrime {{ resolution: {} }}", sp.resolution),
            Generator::Func(_) => write!(f, "Func(..)"),
        }
    }
}

impl Generator {
    pub fn matrix(&self, p: &BasePoint) -> Result<Mat2> {
        match self {
            Generator::Constant(m) => Ok(*m),
            Generator::SzegoSl2 { f, z } => {
                let (r, phi) = f.eval_polar(p);
                if r >= 1.0 - crate::sampling::DISK_MARGIN {
                    return Err(Error::MapOutOfDisk(r));
                }
                Ok(szego_sl2(r, phi, z)?.realize())
            }
            Generator::Jacobi { f_a, f_b, energy } => {
                jacobi_step(*energy, f_a.eval_real(p), f_b.eval_real(p))
            }
            Generator::Dressed { base, field } => {
                let m = base.matrix(p)?;
                let theta = field.angle(p);
                if theta == 0.0 {
                    Ok(m)
                } else {
                    Ok(Mat2::rotation(theta).mul(&m))
                }
            }
            Generator::SPrime(sp) => {
                if sp.support.contains(p) {
                    let (s, dir) = sp.interp(p);
                    Ok(sprime_realize_vec(s, sp.theta_prime, dir))
                } else {
                    sp.base.matrix(p)
                }
            }
            Generator::Func(f) => f(p),
        }
    }
}

/// A continuous cocycle (T, A): the base dynamics plus the generator map.
#[derive(Clone, Debug)]
pub struct Cocycle {
    pub dynamics: BaseDynamics,
    pub generator: Generator,
}

impl Cocycle {
    pub fn new(dynamics: BaseDynamics, generator: Generator) -> Cocycle {
        Cocycle { dynamics, generator }
    }

    pub fn constant(dynamics: BaseDynamics, m: Mat2) -> Cocycle {
        Cocycle::new(dynamics, Generator::Constant(m))
    }

    pub fn szego(dynamics: BaseDynamics, f: SamplingMap, z: UnitCirclePhase) -> Cocycle {
        Cocycle::new(dynamics, Generator::SzegoSl2 { f, z })
    }

    pub fn jacobi(dynamics: BaseDynamics, f_a: SamplingMap, f_b: SamplingMap, energy: f64) -> Cocycle {
        Cocycle::new(dynamics, Generator::Jacobi { f_a, f_b, energy })
    }

    pub fn matrix(&self, p: &BasePoint) -> Result<Mat2> {
        self.generator.matrix(p)
    }

    /// Aⁿ(x): for n ≥ 1 the product A(T^{n−1}x)···A(x), the identity for
    /// n = 0, and for n < 0 the product of adjugate inverses along the
    /// backward orbit, A(T⁻ⁿx)⁻¹···A(T⁻¹x)⁻¹, so that Aⁿ(x)·A⁻ⁿ(Tⁿx) = I.
    ///
    /// Plain products — norms can overflow for strongly hyperbolic cocycles
    /// past a few hundred steps; use [`Cocycle::iterate_normalized`] there.
    pub fn iterate(&self, p: &BasePoint, n: i64) -> Result<Mat2> {
        if n == 0 {
            return Ok(Mat2::IDENTITY);
        }
        if n > 0 {
            let mut prod = Mat2::IDENTITY;
            let mut q = *p;
            for _ in 0..n {
                prod = self.matrix(&q)?.mul(&prod);
                q = self.dynamics.step(&q)?;
            }
            Ok(prod)
        } else {
            let mut prod = Mat2::IDENTITY;
            let mut q = *p;
            for _ in 0..(-n) {
                q = self.dynamics.inverse_step(&q)?;
                prod = self.matrix(&q)?.sl2_inverse().mul(&prod);
            }
            Ok(prod)
        }
    }

    /// Forward product over n steps with per-step Frobenius renormalization.
    /// Returns the renormalized product and the accumulated log scale, so the
    /// true product is `exp(log_scale) * matrix`.
    pub fn iterate_normalized(&self, p: &BasePoint, n: u32) -> Result<(Mat2, f64)> {
        let mut prod = Mat2::IDENTITY;
        let mut log_scale = 0.0;
        let mut q = *p;
        for _ in 0..n {
            prod = self.matrix(&q)?.mul(&prod);
            let f = prod.frobenius();
            prod = prod.scale(1.0 / f);
            log_scale += f.ln();
            q = self.dynamics.step(&q)?;
        }
        Ok((prod, log_scale))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::GOLDEN_MEAN;
    use crate::mat2::to_sl2;
    use crate::sampling::Codomain;

    fn z(psi: f64) -> UnitCirclePhase {
        UnitCirclePhase::new(psi)
    }

    #[test]
    fn szego_free_identity() {
        let m = szego_su11(&UnitDiskPoint::new(0.0, 0.0).unwrap(), &z(0.0));
        assert!(m.sub(&Mat2C::identity()).max_abs() < 1e-15);
    }

    #[test]
    fn szego_free_half_turn_is_diag_i() {
        let m = szego_su11(&UnitDiskPoint::new(0.0, 0.0).unwrap(), &z(std::f64::consts::PI));
        let expect = Mat2C::new(
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, -1.0),
        );
        assert!(m.sub(&expect).max_abs() < 1e-15);
    }

    #[test]
    fn szego_half_real_alpha() {
        let m = szego_su11(&UnitDiskPoint::new(0.5, 0.0).unwrap(), &z(0.0));
        let k = 1.0 / 0.75f64.sqrt();
        assert!((m.a.re - k).abs() < 1e-15 && m.a.im.abs() < 1e-15);
        assert!((m.b.re + 0.5 * k).abs() < 1e-15);
        assert!((m.c.re + 0.5 * k).abs() < 1e-15);
        assert!((m.d.re - k).abs() < 1e-15);
        assert!((m.det() - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(m.su11_residual() < 1e-14);
    }

    #[test]
    fn to_sl2_of_diag_i_is_quarter_rotation() {
        let m = Mat2C::new(
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, -1.0),
        );
        let r = to_sl2(&m).unwrap();
        let expect = Mat2::rotation(std::f64::consts::FRAC_PI_2);
        assert!(r.sub(&expect).max_abs() < 1e-14);
    }

    #[test]
    fn szego_sl2_matches_conjugation_path() {
        let zz = z(0.0);
        let params = szego_sl2(0.5, 0.0, &zz).unwrap();
        let direct = params.realize();
        // Lemma closed form at r = 1/2, φ = 0, ψ = 0.
        assert!((direct.a - 0.5 / 0.75f64.sqrt()).abs() < 1e-12);
        assert!((direct.d - 1.5 / 0.75f64.sqrt()).abs() < 1e-12);
        assert!(direct.b.abs() < 1e-12 && direct.c.abs() < 1e-12);

        let via_su11 = to_sl2(&szego_su11(&UnitDiskPoint::new(0.5, 0.0).unwrap(), &zz)).unwrap();
        assert!(direct.sub(&via_su11).max_abs() < 1e-12);
    }

    #[test]
    fn szego_sl2_two_path_equivalence_random() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let r = 0.95 * next();
            let phi = std::f64::consts::TAU * next();
            let psi = std::f64::consts::TAU * next();
            let zz = z(psi);
            let direct = szego_sl2(r, phi, &zz).unwrap().realize();
            let conj = to_sl2(&szego_su11(&UnitDiskPoint::new(r, phi).unwrap(), &zz)).unwrap();
            assert!(
                direct.sub(&conj).max_abs() <= 1e-12,
                "paths disagree by {}",
                direct.sub(&conj).max_abs()
            );
        }
    }

    #[test]
    fn szego_sl2_zero_radius_is_rotation() {
        let params = szego_sl2(0.0, 1.234, &z(std::f64::consts::PI)).unwrap();
        let m = params.realize();
        let expect = Mat2::rotation(std::f64::consts::FRAC_PI_2);
        assert!(m.sub(&expect).max_abs() < 1e-15);
    }

    #[test]
    fn jacobi_step_examples() {
        assert_eq!(jacobi_step(0.0, 1.0, 0.0).unwrap(), Mat2::new(0.0, -1.0, 1.0, 0.0));
        assert_eq!(jacobi_step(3.0, 1.0, 0.0).unwrap(), Mat2::new(3.0, -1.0, 1.0, 0.0));
        let m = jacobi_step(1.0, 2.0, 0.5).unwrap();
        assert_eq!(m, Mat2::new(0.25, -0.5, 2.0, 0.0));
        assert!((m.det() - 1.0).abs() < 1e-15);
        assert!(jacobi_step(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn iterate_identities() {
        let dynamics = BaseDynamics::rotation(&[GOLDEN_MEAN]).unwrap();
        let f = SamplingMap::constant(Codomain::Disk, 1, Complex64::new(0.4, 0.2));
        let c = Cocycle::szego(dynamics, f, z(1.3));
        let x = BasePoint::new1(0.21);

        assert_eq!(c.iterate(&x, 0).unwrap(), Mat2::IDENTITY);
        let one = c.iterate(&x, 1).unwrap();
        assert!(one.sub(&c.matrix(&x).unwrap()).max_abs() < 1e-15);

        // Inverse identity: Aⁿ(x) · A⁻ⁿ(Tⁿ x) = I for n up to 50.
        for n in [1i64, 7, 25, 50] {
            let fwd = c.iterate(&x, n).unwrap();
            let tn = c.dynamics.iterate_point(&x, n).unwrap();
            let bwd = c.iterate(&tn, -n).unwrap();
            let resid = fwd.mul(&bwd).sub(&Mat2::IDENTITY).max_abs();
            assert!(resid <= 1e-10, "n = {n}: residual {resid}");
        }
    }

    #[test]
    fn cocycle_law() {
        let dynamics = BaseDynamics::skew_shift(GOLDEN_MEAN);
        let f_a = SamplingMap::constant(Codomain::Real, 2, Complex64::new(1.0, 0.0));
        let f_b = SamplingMap::fourier(
            Codomain::Real,
            2,
            vec![crate::sampling::FourierTerm { freq: [1, 0], coef: Complex64::new(0.7, 0.0) }],
        );
        let c = Cocycle::jacobi(dynamics, f_a, f_b, 0.4);
        let x = BasePoint::new2(0.15, 0.67);
        for (m, n) in [(3i64, 5i64), (-4, 9), (12, -6), (-7, -8), (25, 25)] {
            let lhs = c.iterate(&x, m + n).unwrap();
            let tn = c.dynamics.iterate_point(&x, n).unwrap();
            let rhs = c.iterate(&tn, m).unwrap().mul(&c.iterate(&x, n).unwrap());
            let resid = lhs.sub(&rhs).max_abs();
            assert!(resid <= 1e-10, "cocycle law failed at ({m}, {n}): {resid}");
        }
    }

    #[test]
    fn normalized_iteration_matches_plain() {
        let dynamics = BaseDynamics::rotation(&[GOLDEN_MEAN]).unwrap();
        let c = Cocycle::constant(dynamics, Mat2::new(3.0, -1.0, 1.0, 0.0));
        let x = BasePoint::new1(0.0);
        let plain = c.iterate(&x, 20).unwrap();
        let (m, log_scale) = c.iterate_normalized(&x, 20).unwrap();
        let rebuilt = m.scale(log_scale.exp());
        assert!(rebuilt.sub(&plain).max_abs() / plain.op_norm() < 1e-12);
    }

    #[test]
    fn dressed_generator_off_support_equality() {
        let dynamics = BaseDynamics::rotation(&[GOLDEN_MEAN]).unwrap();
        let base = Generator::Constant(Mat2::new(3.0, -1.0, 1.0, 0.0));
        let field = AngleField::constant(SupportBox::new(&[0.2], &[0.4]).unwrap(), 0.3);
        let dressed = Generator::Dressed { base: Arc::new(base), field };
        let c = Cocycle::new(dynamics, dressed);
        let off = c.matrix(&BasePoint::new1(0.8)).unwrap();
        assert_eq!(off, Mat2::new(3.0, -1.0, 1.0, 0.0));
        let on = c.matrix(&BasePoint::new1(0.3)).unwrap();
        assert!(on.sub(&Mat2::new(3.0, -1.0, 1.0, 0.0)).max_abs() > 1e-3);
        assert!(on.is_sl2(1e-12));
    }
}
