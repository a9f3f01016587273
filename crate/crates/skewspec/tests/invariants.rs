//! Property-based invariants spanning the crate: group laws of the matrix
//! algebra, dynamics round trips, sampling-map serialization, and the
//! monotonicity laws of the snap-back functions.

use num_complex::Complex64;
use proptest::prelude::*;
use skewspec::base::{BaseDynamics, BasePoint, GOLDEN_MEAN};
use skewspec::cocycle::{szego_su11, Cocycle, UnitCirclePhase, UnitDiskPoint};
use skewspec::mat2::{to_sl2, Mat2};
use skewspec::sampling::{Codomain, FourierTerm, SamplingMap};
use skewspec::snapback::{h_g, h_g_reconstruction_residual, AnnulusSpec};

proptest! {
    #[test]
    fn step_inverse_round_trip(x in 0.0..1.0f64, y in 0.0..1.0f64, alpha in 0.0..1.0f64) {
        let dyn_ = BaseDynamics::skew_shift(alpha);
        let p = BasePoint::new2(x, y);
        let fwd = dyn_.inverse_step(&dyn_.step(&p).unwrap()).unwrap();
        let bwd = dyn_.step(&dyn_.inverse_step(&p).unwrap()).unwrap();
        for q in [fwd, bwd] {
            for (a, b) in q.coords().iter().zip(p.coords()) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn reflection_rotation_composition(theta in -10.0..10.0f64, gamma in -10.0..10.0f64) {
        // S(θ)·R_γ = S(θ+γ): the identity behind B″ staying in S′.
        let lhs = Mat2::reflection(theta).mul(&Mat2::rotation(gamma));
        let rhs = Mat2::reflection(theta + gamma);
        prop_assert!(lhs.sub(&rhs).max_abs() <= 1e-14);
    }

    #[test]
    fn conjugation_is_a_homomorphism(
        r1 in 0.0..0.9f64, p1 in 0.0..std::f64::consts::TAU,
        r2 in 0.0..0.9f64, p2 in 0.0..std::f64::consts::TAU,
        psi in 0.0..std::f64::consts::TAU,
    ) {
        let z = UnitCirclePhase::new(psi);
        let m1 = szego_su11(&UnitDiskPoint::new(r1, p1).unwrap(), &z);
        let m2 = szego_su11(&UnitDiskPoint::new(r2, p2).unwrap(), &z);
        let lhs = to_sl2(&m1.mul(&m2)).unwrap();
        let rhs = to_sl2(&m1).unwrap().mul(&to_sl2(&m2).unwrap());
        prop_assert!(lhs.sub(&rhs).max_abs() <= 1e-11);
    }

    #[test]
    fn sprime_trace_formula(s in 0.0..0.95f64, tp in -3.2..3.2f64, theta in -2.0 * std::f64::consts::PI..2.0 * std::f64::consts::PI) {
        // trace((1/√(1-s²))(R_{θ'} + s·S(θ))) = 2 cos θ' / √(1-s²): the
        // reflection part is traceless. This is the constant-cocycle oracle.
        let m = skewspec::SPrimeParams::new(s, tp, theta).unwrap().realize();
        let expect = 2.0 * tp.cos() / (1.0 - s * s).sqrt();
        prop_assert!((m.trace() - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        prop_assert!(m.is_sl2(1e-12));
    }

    #[test]
    fn sampling_map_text_round_trip(
        terms in prop::collection::vec((-4i32..=4, -4i32..=4, -0.4..0.4f64, -0.4..0.4f64), 1..5),
        x in 0.0..1.0f64, y in 0.0..1.0f64,
    ) {
        let map = SamplingMap::fourier(
            Codomain::Disk,
            2,
            terms
                .iter()
                .map(|(k1, k2, re, im)| FourierTerm { freq: [*k1, *k2], coef: Complex64::new(*re, *im) })
                .collect(),
        );
        let back = SamplingMap::from_text(&map.to_text()).unwrap();
        let p = BasePoint::new2(x, y);
        prop_assert_eq!(map.eval_complex(&p), back.eval_complex(&p));
        prop_assert_eq!(map.to_text(), back.to_text());
    }

    #[test]
    fn grid_map_round_trip(values in prop::collection::vec(-5.0..5.0f64, 8), x in 0.0..1.0f64) {
        let map = SamplingMap::grid(
            Codomain::Real,
            1,
            8,
            values.iter().map(|v| Complex64::new(*v, 0.0)).collect(),
        )
        .unwrap();
        let back = SamplingMap::from_text(&map.to_text()).unwrap();
        let p = BasePoint::new1(x);
        prop_assert_eq!(map.eval_real(&p), back.eval_real(&p));
    }

    #[test]
    fn snapback_solve_reconstructs(
        r in 0.31..0.79f64, eta in 0.0..std::f64::consts::TAU, eps_t in 0.0..1.0f64,
    ) {
        let ann = AnnulusSpec::new(0.3, 0.8).unwrap();
        let (lo, hi) = ann.eps_window();
        let eps = lo + (hi - lo) * (0.02 + 0.96 * eps_t);
        let rho = AnnulusSpec::rho(r);
        let t = [-rho * eta.cos(), rho * eta.sin()];
        let resid = h_g_reconstruction_residual(t, eps, &ann).unwrap();
        prop_assert!(resid <= 1e-12, "residual {resid}");
        let (s, beta) = h_g(t, eps, &ann).unwrap();
        prop_assert!((0.0..1.0).contains(&s));
        prop_assert!((-std::f64::consts::PI..=std::f64::consts::PI).contains(&beta));
    }

    #[test]
    fn eq2_inverse_identity(x in 0.0..1.0f64, psi in 0.0..std::f64::consts::TAU, n in 1i64..40) {
        let dyn_ = BaseDynamics::rotation(&[GOLDEN_MEAN]).unwrap();
        let f = SamplingMap::fourier(
            Codomain::Disk,
            1,
            vec![FourierTerm { freq: [1, 0], coef: Complex64::new(0.35, 0.2) }],
        );
        let c = Cocycle::szego(dyn_, f, UnitCirclePhase::new(psi));
        let p = BasePoint::new1(x);
        let fwd = c.iterate(&p, n).unwrap();
        let tn = c.dynamics.iterate_point(&p, n).unwrap();
        let bwd = c.iterate(&tn, -n).unwrap();
        // 1e-10 in the bounded regime; once ‖Aⁿ‖ grows (parameters in a
        // gap), a unit-last-place drift of the base point is amplified by
        // the condition number ‖Aⁿ‖², so the bound scales with it.
        let tol = 1e-10 + 1e-12 * fwd.op_norm().powi(2);
        let resid = fwd.mul(&bwd).sub(&Mat2::IDENTITY).max_abs();
        prop_assert!(resid <= tol, "residual {resid}, tol {tol}");
    }
}

#[test]
fn jacobi_truncation_gershgorin_bound() {
    let dyn_ = BaseDynamics::rotation(&[GOLDEN_MEAN]).unwrap();
    let f_a = SamplingMap::constant(Codomain::Real, 1, Complex64::new(1.3, 0.0));
    let f_b = SamplingMap::fourier(
        Codomain::Real,
        1,
        vec![FourierTerm { freq: [1, 0], coef: Complex64::new(0.9, 0.0) }],
    );
    let spec =
        skewspec::truncation_jacobi(&f_a, &f_b, &dyn_, &BasePoint::new1(0.37), 120).unwrap();
    // Eigenvalues lie in [min b − 2 max a, max b + 2 max a].
    for ev in &spec.eigenvalues {
        assert!(ev.abs() <= 0.9 + 2.0 * 1.3 + 1e-9);
    }
}
