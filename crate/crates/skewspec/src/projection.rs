//! The Jacobi projection: a local conjugacy that converts an arbitrary
//! SL(2,ℝ) perturbation supported in a small box K back into the structured
//! class J of Jacobi transfer matrices, without touching hyperbolicity.
//!
//! For x ∈ K the three-matrix product B(Tx)·B(x)·B(T⁻¹x) (with B = A off K)
//! is matched by a product of J-matrices sharing the off-diagonal field: set
//! t₂′ = p (the (1,1) entry of B(x)) and solve
//!
//! ```text
//! t₃′ = t₃ + a₃·(q + 1/a₂)/p,      t₁′ = t₁ + (a₂ − r)/(a₁·p),
//! ```
//!
//! which are the displayed solutions rearranged so that B = A collapses them
//! to t₃ and t₁ exactly (the Φ(A) = A fixed point holds bitwise). The (1,1)
//! entry of the product matches automatically through the determinant once
//! the other three entries do and the (2,2) pivot is nonzero; the entrywise
//! check is still performed as redundancy. The conjugating field Ψ is the
//! identity off K ∪ T(K) and a short product of solved and original matrices
//! on it.

use std::sync::Arc;

use num_complex::Complex64;

use crate::base::{BaseDynamics, BasePoint, OrbitGrid, SupportBox};
use crate::cocycle::{Cocycle, Generator};
use crate::error::{Error, Result};
use crate::hyperbolicity::{certify, seek_uh_neighbor, UhCertificate, UhParams, Verdict};
use crate::mat2::{JParams, Mat2};
use crate::sampling::{Codomain, SamplingMap};

/// Pivot floor realizing the validity neighborhood of the projection: inputs
/// whose (1,1) entry degenerates below this are rejected.
pub const P_FLOOR: f64 = 1e-6;

/// A Jacobi model A_{E,a,b} over some dynamics.
#[derive(Clone, Debug)]
pub struct JacobiModel {
    pub f_a: SamplingMap,
    pub f_b: SamplingMap,
    pub energy: f64,
}

impl JacobiModel {
    pub fn cocycle(&self, dyn_: &BaseDynamics) -> Cocycle {
        Cocycle::jacobi(dyn_.clone(), self.f_a.clone(), self.f_b.clone(), self.energy)
    }

    /// J parameters of A at a point, with the division order matching
    /// [`crate::cocycle::jacobi_step`] so fixed-point cancellations are exact.
    fn params_at(&self, p: &BasePoint) -> Result<JParams> {
        let a = self.f_a.eval_real(p);
        if a <= 0.0 {
            return Err(Error::NonpositiveA(a));
        }
        let inv_a = 1.0 / a;
        Ok(JParams { t: (self.energy - self.f_b.eval_real(p)) * inv_a, a })
    }
}

/// The projection domain: a closed box K whose first two forward images stay
/// clear of it. Disjointness is checked pointwise on the grid with a
/// one-mesh-cell safety margin.
#[derive(Clone, Copy, Debug)]
pub struct ProjectionDomain {
    pub k_box: SupportBox,
}

impl ProjectionDomain {
    pub fn new(k_box: SupportBox) -> ProjectionDomain {
        ProjectionDomain { k_box }
    }

    pub fn validate(&self, dyn_: &BaseDynamics, grid: &OrbitGrid) -> Result<()> {
        let margin = 1.0 / grid.resolution as f64;
        for p in &grid.points {
            if !self.k_box.contains(p) {
                continue;
            }
            let t1 = dyn_.step(p)?;
            if self.k_box.contains_with_margin(&t1, margin) {
                return Err(Error::DomainOverlap(format!(
                    "T(K) meets K near ({:?})",
                    t1.coords()
                )));
            }
            let t2 = dyn_.step(&t1)?;
            if self.k_box.contains_with_margin(&t2, margin) {
                return Err(Error::DomainOverlap(format!(
                    "T²(K) meets K near ({:?})",
                    t2.coords()
                )));
            }
        }
        Ok(())
    }
}

/// One local solve at a center x ∈ K.
#[derive(Clone, Debug)]
pub struct LocalTriple {
    /// Entries of B(x).
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    /// (t, a) of A at T(x), x, T⁻¹(x).
    pub t: [f64; 3],
    pub a: [f64; 3],
    pub t_prime: [f64; 3],
    pub b_prime: [f64; 3],
    pub energy: f64,
    /// Max-entry defect of M₁′M₂′M₃′ against B(Tx)B(x)B(T⁻¹x).
    pub product_residual: f64,
}

/// Solve for the primed J parameters at one center. `a_triple` holds the
/// unperturbed parameters at T(x), x, T⁻¹(x) in that order.
pub fn solve_local(a_triple: &[JParams; 3], b_center: &Mat2, energy: f64) -> Result<LocalTriple> {
    let p = b_center.a;
    if p.abs() < P_FLOOR {
        return Err(Error::PivotTooSmall(p.abs()));
    }
    let (q, r, s) = (b_center.b, b_center.c, b_center.d);
    let [j1, j2, j3] = a_triple;
    let (t1, a1) = (j1.t, j1.a);
    let (t2, a2) = (j2.t, j2.a);
    let (t3, a3) = (j3.t, j3.a);
    let _ = t2;

    let t2p = p;
    let t3p = t3 + a3 * (q + 1.0 / a2) / p;
    let t1p = t1 + (a2 - r) / (a1 * p);
    let t_prime = [t1p, t2p, t3p];
    let b_prime = [energy - t1p * a1, energy - t2p * a2, energy - t3p * a3];

    let lhs = JParams { t: t1, a: a1 }
        .realize()
        .mul(b_center)
        .mul(&JParams { t: t3, a: a3 }.realize());
    let rhs = JParams { t: t1p, a: a1 }
        .realize()
        .mul(&JParams { t: t2p, a: a2 }.realize())
        .mul(&JParams { t: t3p, a: a3 }.realize());
    let product_residual = lhs.sub(&rhs).max_abs();

    Ok(LocalTriple {
        p,
        q,
        r,
        s,
        t: [t1, t2, t3],
        a: [a1, a2, a3],
        t_prime,
        b_prime,
        energy,
        product_residual,
    })
}

/// Pointwise scalar evaluator (the exact perturbed diagonal map).
pub type ScalarFn = Arc<dyn Fn(&BasePoint) -> Result<f64> + Send + Sync>;

/// The projected cocycle Φ(B), the conjugacy Ψ(B), and their residuals.
pub struct ProjectionOutcome {
    pub phi: Cocycle,
    /// Pointwise evaluator for Ψ(B).
    pub psi: crate::cocycle::MatrixFn,
    pub triples: Vec<LocalTriple>,
    pub residual_triple: f64,
    pub residual_conjugacy: f64,
    /// Grid sup of ‖Φ(B)(x) − A(x)‖.
    pub distance: f64,
    /// Exact pointwise perturbed diagonal map b′(y) = E − t′(y)·a(y).
    pub f_b_prime: ScalarFn,
}

fn phi_t_value(
    model: &JacobiModel,
    dyn_: &BaseDynamics,
    b_gen: &Generator,
    k_box: &SupportBox,
    y: &BasePoint,
) -> Result<f64> {
    if k_box.contains(y) {
        // Center rule: t₂′ = p.
        return Ok(b_gen.matrix(y)?.a);
    }
    let back = dyn_.inverse_step(y)?;
    if k_box.contains(&back) {
        // y ∈ T(K): solve at center T⁻¹(y).
        let x = back;
        let b = b_gen.matrix(&x)?;
        let p = b.a;
        if p.abs() < P_FLOOR {
            return Err(Error::PivotTooSmall(p.abs()));
        }
        let j1 = model.params_at(y)?; // A at T(x) = y
        let a2 = model.f_a.eval_real(&x);
        return Ok(j1.t + (a2 - b.c) / (j1.a * p));
    }
    let fwd = dyn_.step(y)?;
    if k_box.contains(&fwd) {
        // y ∈ T⁻¹(K): solve at center T(y).
        let x = fwd;
        let b = b_gen.matrix(&x)?;
        let p = b.a;
        if p.abs() < P_FLOOR {
            return Err(Error::PivotTooSmall(p.abs()));
        }
        let j3 = model.params_at(y)?; // A at T⁻¹(x) = y
        let a2 = model.f_a.eval_real(&x);
        return Ok(j3.t + j3.a * (b.b + 1.0 / a2) / p);
    }
    Ok(model.params_at(y)?.t)
}

/// Apply the projection to B over the domain. B must equal A off K on the
/// grid; the conjugacy identity Ψ(B)(Tx)·B(x)·Ψ(B)(x)⁻¹ = Φ(B)(x) is checked
/// at every grid point.
pub fn project(
    model: &JacobiModel,
    dyn_: &BaseDynamics,
    b: &Cocycle,
    domain: &ProjectionDomain,
    grid: &OrbitGrid,
) -> Result<ProjectionOutcome> {
    domain.validate(dyn_, grid)?;
    let a = model.cocycle(dyn_);

    // C⁰_{A,K} membership.
    let mut off_dev = 0.0f64;
    for p in &grid.points {
        if !domain.k_box.contains(p) {
            off_dev = off_dev.max(a.matrix(p)?.sub(&b.matrix(p)?).op_norm());
        }
    }
    if off_dev > 1e-12 {
        return Err(Error::NotCAK(off_dev));
    }

    // Local solves at every grid center in K (reporting + residuals).
    let mut triples = Vec::new();
    let mut residual_triple = 0.0f64;
    for x in &grid.points {
        if !domain.k_box.contains(x) {
            continue;
        }
        let fwd = dyn_.step(x)?;
        let back = dyn_.inverse_step(x)?;
        let a_triple = [model.params_at(&fwd)?, model.params_at(x)?, model.params_at(&back)?];
        let triple = solve_local(&a_triple, &b.matrix(x)?, model.energy)?;
        residual_triple = residual_triple.max(triple.product_residual);
        triples.push(triple);
    }
    if triples.is_empty() {
        return Err(Error::Invalid("projection domain contains no grid points".into()));
    }

    let model_c = model.clone();
    let dyn_c = dyn_.clone();
    let b_gen = b.generator.clone();
    let k_box = domain.k_box;
    let phi_t = Arc::new(move |y: &BasePoint| phi_t_value(&model_c, &dyn_c, &b_gen, &k_box, y));

    let model_c2 = model.clone();
    let phi_t2 = phi_t.clone();
    let phi_fn = Arc::new(move |y: &BasePoint| -> Result<Mat2> {
        let t = phi_t2(y)?;
        let a = model_c2.f_a.eval_real(y);
        if a <= 0.0 {
            return Err(Error::NonpositiveA(a));
        }
        Ok(Mat2::new(t, -(1.0 / a), a, 0.0))
    });
    let phi = Cocycle::new(dyn_.clone(), Generator::Func(phi_fn.clone()));

    let dyn_c3 = dyn_.clone();
    let b_gen3 = b.generator.clone();
    let phi_fn3 = phi_fn.clone();
    let psi: crate::cocycle::MatrixFn =
        Arc::new(move |y: &BasePoint| -> Result<Mat2> {
            if k_box.contains(y) {
                let back = dyn_c3.inverse_step(y)?;
                return Ok(phi_fn3(&back)?.mul(&b_gen3.matrix(&back)?.sl2_inverse()));
            }
            let back = dyn_c3.inverse_step(y)?;
            if k_box.contains(&back) {
                let back2 = dyn_c3.inverse_step(&back)?;
                return Ok(phi_fn3(&back)?
                    .mul(&phi_fn3(&back2)?)
                    .mul(&b_gen3.matrix(&back2)?.sl2_inverse())
                    .mul(&b_gen3.matrix(&back)?.sl2_inverse()));
            }
            Ok(Mat2::IDENTITY)
        });

    // Global conjugacy identity and distance on the grid.
    let mut residual_conjugacy = 0.0f64;
    let mut distance = 0.0f64;
    for x in &grid.points {
        let fwd = dyn_.step(x)?;
        let lhs = psi(&fwd)?.mul(&b.matrix(x)?).mul(&psi(x)?.inverse());
        let rhs = phi.matrix(x)?;
        residual_conjugacy = residual_conjugacy.max(lhs.sub(&rhs).max_abs());
        distance = distance.max(rhs.sub(&a.matrix(x)?).op_norm());
    }

    let model_c4 = model.clone();
    let phi_t4 = phi_t.clone();
    let f_b_prime: ScalarFn =
        Arc::new(move |y: &BasePoint| -> Result<f64> {
            Ok(model_c4.energy - phi_t4(y)? * model_c4.f_a.eval_real(y))
        });

    Ok(ProjectionOutcome {
        phi,
        psi,
        triples,
        residual_triple,
        residual_conjugacy,
        distance,
        f_b_prime,
    })
}

/// Result of the Jacobi gap-opening pipeline.
pub struct JacobiPerturbOutcome {
    pub f_b_prime: SamplingMap,
    pub certificate: UhCertificate,
    /// Grid sup of ‖A_{E,a,b} − A_{E,a,b′}‖ for the exported map.
    pub distance: f64,
    pub residual_triple: f64,
    pub residual_conjugacy: f64,
    pub trivial: bool,
    pub notes: Vec<String>,
}

/// Sample an exact pointwise map onto a lattice SamplingMap.
fn sample_to_grid(
    f: &dyn Fn(&BasePoint) -> Result<f64>,
    dims: usize,
    resolution: usize,
) -> Result<SamplingMap> {
    let count = if dims == 1 { resolution } else { resolution * resolution };
    let h = 1.0 / resolution as f64;
    let mut values = Vec::with_capacity(count);
    for idx in 0..count {
        let p = if dims == 1 {
            BasePoint::new1((idx % resolution) as f64 * h)
        } else {
            BasePoint::new2((idx % resolution) as f64 * h, (idx / resolution) as f64 * h)
        };
        values.push(Complex64::new(f(&p)?, 0.0));
    }
    SamplingMap::grid(Codomain::Real, dims, resolution, values)
}

/// Gap-opening for Jacobi models: search for a UH neighbor B supported in a
/// valid projection box, project it back into J, and read the perturbed
/// diagonal map off the J parameters (b′ = E − t′·a; the off-diagonal map is
/// untouched). Trace-degenerate starts (f_b ≡ E) are first nudged by a
/// height-1e-3 bump.
#[allow(clippy::too_many_arguments)]
pub fn perturb_jacobi(
    model: &JacobiModel,
    dyn_: &BaseDynamics,
    support: &SupportBox,
    eps_target: f64,
    budget: usize,
    seed: u64,
    grid: &OrbitGrid,
    params: &UhParams,
) -> Result<JacobiPerturbOutcome> {
    let mut notes = Vec::new();
    model.f_a.validate()?;

    let a = model.cocycle(dyn_);
    let cert = certify(&a, grid, params)?;
    if cert.verdict == Verdict::Uh {
        notes.push("cocycle already uniformly hyperbolic: returning f_b unchanged".into());
        return Ok(JacobiPerturbOutcome {
            f_b_prime: model.f_b.clone(),
            certificate: cert,
            distance: 0.0,
            residual_triple: 0.0,
            residual_conjugacy: 0.0,
            trivial: true,
            notes,
        });
    }

    // Degenerate start: f_b ≡ E means trace ≡ 0 everywhere; nudge first.
    let mut working = model.clone();
    let trace_sup = grid
        .points
        .iter()
        .map(|p| (model.f_b.eval_real(p) - model.energy).abs())
        .fold(0.0f64, f64::max);
    if trace_sup < 1e-12 {
        working.f_b = model.f_b.with_bump(support, Complex64::new(1e-3, 0.0), grid.resolution)?;
        notes.push("f_b ≡ E (trace identically zero): nudged by a 1e-3 bump on the support".into());
    }
    let a = working.cocycle(dyn_);

    // Find a projection box inside the support with a healthy pivot and
    // disjoint forward images.
    let mut domain = None;
    for shrink in [1.0, 0.8, 0.6, 0.4] {
        let k_box = support.shrink(shrink);
        let candidate = ProjectionDomain::new(k_box);
        if candidate.validate(dyn_, grid).is_err() {
            continue;
        }
        let mut min_abs_t = f64::INFINITY;
        let mut any = false;
        for p in &grid.points {
            if k_box.contains(p) {
                any = true;
                min_abs_t = min_abs_t.min(working.params_at(p)?.t.abs());
            }
        }
        if any && min_abs_t >= 10.0 * P_FLOOR {
            domain = Some(candidate);
            notes.push(format!(
                "projection box at shrink {shrink}: [{:.4}, {:.4}], min |tr| pivot {min_abs_t:.3e}",
                k_box.lo[0], k_box.hi[0]
            ));
            break;
        }
    }
    let domain = domain.ok_or(Error::PivotTooSmall(0.0))?;

    // Radius ladder as in the CMV pipeline: grow when the seek fails, move
    // smaller when a later stage rejects the candidate.
    let ladder = [0.5, 1.0, 0.75, 0.25, 0.125, 0.0625];
    let mut last_err: Option<Error> = None;
    for (retry, frac) in ladder.into_iter().enumerate() {
        let eps_search = frac * eps_target;
        let seek = match seek_uh_neighbor(
            &a,
            &domain.k_box,
            eps_search,
            budget,
            seed + retry as u64,
            grid,
            params,
        ) {
            Ok(s) => s,
            Err(e) => {
                last_err = Some(Error::NotFound {
                    what: format!("stage seek_uh_neighbor failed: {e}"),
                    tried: retry + 1,
                });
                continue;
            }
        };
        let projection = match project(&working, dyn_, &seek.cocycle, &domain, grid) {
            Ok(o) => o,
            Err(e) => {
                last_err = Some(Error::NotFound {
                    what: format!("stage project failed: {e}"),
                    tried: retry + 1,
                });
                continue;
            }
        };

        let f_b_prime = sample_to_grid(projection.f_b_prime.as_ref(), dyn_.dim(), grid.resolution)?;
        let exported = JacobiModel {
            f_a: working.f_a.clone(),
            f_b: f_b_prime.clone(),
            energy: working.energy,
        };
        let exported_cocycle = exported.cocycle(dyn_);
        let distance = crate::hyperbolicity::cocycle_distance(&a, &exported_cocycle, grid)?;
        if distance > eps_target {
            last_err = Some(Error::NotFound {
                what: format!("stage distance-check failed: {distance} > {eps_target}"),
                tried: retry + 1,
            });
            continue;
        }
        let exported_cert = certify(&exported_cocycle, grid, params)?;
        if exported_cert.verdict != Verdict::Uh {
            last_err = Some(Error::NotFound {
                what: format!("stage certify(Φ(B)) failed: verdict {}", exported_cert.verdict),
                tried: retry + 1,
            });
            continue;
        }
        notes.push(format!(
            "succeeded at retry {retry}: ‖B−A‖ = {:.3e}, ‖Φ(B)−A‖ = {:.3e}, conjugacy residual {:.3e}",
            seek.distance, projection.distance, projection.residual_conjugacy
        ));
        return Ok(JacobiPerturbOutcome {
            f_b_prime,
            certificate: exported_cert,
            distance,
            residual_triple: projection.residual_triple,
            residual_conjugacy: projection.residual_conjugacy,
            trivial: false,
            notes,
        });
    }
    Err(last_err.unwrap_or(Error::NotFound { what: "perturb_jacobi exhausted retries".into(), tried: 6 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{make_grid, GOLDEN_MEAN};
    use crate::cocycle::AngleField;

    fn dyn1() -> BaseDynamics {
        BaseDynamics::rotation(&[GOLDEN_MEAN]).unwrap()
    }

    fn free_model(e: f64) -> JacobiModel {
        JacobiModel {
            f_a: SamplingMap::constant(Codomain::Real, 1, Complex64::new(1.0, 0.0)).with_floor(1e-6),
            f_b: SamplingMap::constant(Codomain::Real, 1, Complex64::new(0.0, 0.0)),
            energy: e,
        }
    }

    fn k_domain() -> ProjectionDomain {
        ProjectionDomain::new(SupportBox::new(&[0.0], &[0.1]).unwrap())
    }

    #[test]
    fn domain_disjointness_golden() {
        let dyn_ = dyn1();
        let grid = make_grid(&dyn_, 64).unwrap();
        assert!(k_domain().validate(&dyn_, &grid).is_ok());
        // A box wider than the rotation step must overlap its image.
        let wide = ProjectionDomain::new(SupportBox::new(&[0.0], &[0.7]).unwrap());
        assert!(matches!(wide.validate(&dyn_, &grid), Err(Error::DomainOverlap(_))));
    }

    #[test]
    fn solve_local_fixed_point_is_bitwise() {
        let model = free_model(3.0);
        let dyn_ = dyn1();
        let x = BasePoint::new1(0.05);
        let fwd = dyn_.step(&x).unwrap();
        let back = dyn_.inverse_step(&x).unwrap();
        let a_triple = [
            model.params_at(&fwd).unwrap(),
            model.params_at(&x).unwrap(),
            model.params_at(&back).unwrap(),
        ];
        let a_mat = model.cocycle(&dyn_).matrix(&x).unwrap();
        let triple = solve_local(&a_triple, &a_mat, 3.0).unwrap();
        // Φ(A) = A: the primed values reproduce the original parameters exactly.
        assert_eq!(triple.t_prime[0], a_triple[0].t);
        assert_eq!(triple.t_prime[1], a_triple[1].t);
        assert_eq!(triple.t_prime[2], a_triple[2].t);
        assert_eq!(triple.product_residual, 0.0);
    }

    #[test]
    fn solve_local_product_identity_perturbed() {
        let model = free_model(3.0);
        let dyn_ = dyn1();
        let x = BasePoint::new1(0.03);
        let fwd = dyn_.step(&x).unwrap();
        let back = dyn_.inverse_step(&x).unwrap();
        let a_triple = [
            model.params_at(&fwd).unwrap(),
            model.params_at(&x).unwrap(),
            model.params_at(&back).unwrap(),
        ];
        let b_center = Mat2::rotation(0.01).mul(&model.cocycle(&dyn_).matrix(&x).unwrap());
        let triple = solve_local(&a_triple, &b_center, 3.0).unwrap();
        assert!(triple.product_residual <= 1e-10, "residual {}", triple.product_residual);
        // a-values pass through untouched.
        assert_eq!(triple.a, [1.0, 1.0, 1.0]);
    }

    #[test]
    fn solve_local_rejects_small_pivot() {
        let a_triple = [
            JParams { t: 1.0, a: 1.0 },
            JParams { t: 0.0, a: 1.0 },
            JParams { t: 1.0, a: 1.0 },
        ];
        let b_center = Mat2::new(0.0, -1.0, 1.0, 0.0);
        assert!(matches!(
            solve_local(&a_triple, &b_center, 0.0),
            Err(Error::PivotTooSmall(_))
        ));
    }

    #[test]
    fn project_fixed_point_exact() {
        let model = free_model(3.0);
        let dyn_ = dyn1();
        let grid = make_grid(&dyn_, 64).unwrap();
        let a = model.cocycle(&dyn_);
        let out = project(&model, &dyn_, &a, &k_domain(), &grid).unwrap();
        assert_eq!(out.residual_triple, 0.0);
        assert_eq!(out.distance, 0.0, "Φ(A) must equal A on the grid");
        // Ψ(A) = id up to one rounding of det in M·M⁻¹.
        for p in &grid.points {
            let psi = (out.psi)(p).unwrap();
            assert!(psi.sub(&Mat2::IDENTITY).max_abs() <= 1e-15);
        }
        assert!(out.residual_conjugacy <= 1e-14);
    }

    #[test]
    fn project_random_perturbations_conjugacy() {
        let model = free_model(3.0);
        let dyn_ = dyn1();
        let grid = make_grid(&dyn_, 64).unwrap();
        let a = model.cocycle(&dyn_);
        let domain = k_domain();
        for trial in 0..20 {
            let amp = 1e-2 / 3.0 * (1.0 + (trial as f64) / 19.0);
            let field = AngleField {
                support: domain.k_box,
                amplitude: amp,
                modes: vec![crate::cocycle::AngleMode {
                    freq: [trial % 3 - 1, 0],
                    phase: 0.37 * trial as f64,
                    weight: 1.0,
                }],
            };
            let b = Cocycle::new(
                dyn_.clone(),
                Generator::Dressed { base: Arc::new(a.generator.clone()), field },
            );
            let out = project(&model, &dyn_, &b, &domain, &grid).unwrap();
            assert!(out.residual_triple <= 1e-10, "triple residual {}", out.residual_triple);
            assert!(out.residual_conjugacy <= 1e-10, "conjugacy residual {}", out.residual_conjugacy);
            // J-membership of Φ(B) on the grid.
            for p in &grid.points {
                let m = out.phi.matrix(p).unwrap();
                assert!(m.c > 0.0);
                assert!((m.b + 1.0 / m.c).abs() <= 1e-12);
                assert_eq!(m.d, 0.0);
            }
        }
    }

    #[test]
    fn project_distance_decreases_with_perturbation() {
        let model = free_model(3.0);
        let dyn_ = dyn1();
        let grid = make_grid(&dyn_, 64).unwrap();
        let a = model.cocycle(&dyn_);
        let domain = k_domain();
        let mut last = f64::INFINITY;
        for amp in [1e-2, 1e-3, 1e-4] {
            let field = AngleField::constant(domain.k_box, amp);
            let b = Cocycle::new(
                dyn_.clone(),
                Generator::Dressed { base: Arc::new(a.generator.clone()), field },
            );
            let out = project(&model, &dyn_, &b, &domain, &grid).unwrap();
            assert!(out.distance < last, "distance not decreasing: {} vs {last}", out.distance);
            last = out.distance;
        }
    }

    #[test]
    fn project_rejects_b_differing_off_k() {
        let model = free_model(3.0);
        let dyn_ = dyn1();
        let grid = make_grid(&dyn_, 64).unwrap();
        let a = model.cocycle(&dyn_);
        let field = AngleField::constant(SupportBox::new(&[0.4], &[0.6]).unwrap(), 0.01);
        let b = Cocycle::new(
            dyn_.clone(),
            Generator::Dressed { base: Arc::new(a.generator.clone()), field },
        );
        assert!(matches!(
            project(&model, &dyn_, &b, &k_domain(), &grid),
            Err(Error::NotCAK(_))
        ));
    }


    #[test]
    fn projection_preserves_certificate_verdict() {
        // Uniform hyperbolicity is a conjugacy invariant; the finite-scale
        // verdicts of B and Φ(B) agree (verified, not assumed). Checked both
        // inside the spectrum (NotUH) and outside (UH).
        let dyn_ = dyn1();
        let grid = make_grid(&dyn_, 64).unwrap();
        let params = crate::hyperbolicity::UhParams { gamma: 100.0, ..Default::default() };
        let domain = k_domain();
        for e in [1.5f64, 3.0] {
            let model = free_model(e);
            let a = model.cocycle(&dyn_);
            let field = AngleField::constant(domain.k_box, 0.01);
            let b = Cocycle::new(
                dyn_.clone(),
                Generator::Dressed { base: Arc::new(a.generator.clone()), field },
            );
            let cert_b = crate::hyperbolicity::certify(&b, &grid, &params).unwrap();
            let out = project(&model, &dyn_, &b, &domain, &grid).unwrap();
            let exported = JacobiModel {
                f_a: model.f_a.clone(),
                f_b: sample_to_grid(out.f_b_prime.as_ref(), 1, 64).unwrap(),
                energy: e,
            };
            let cert_phi =
                crate::hyperbolicity::certify(&exported.cocycle(&dyn_), &grid, &params).unwrap();
            assert_eq!(cert_b.verdict, cert_phi.verdict, "verdicts diverged at E = {e}");
        }
    }

    #[test]
    fn perturb_trivial_outside_spectrum() {
        let model = free_model(3.0);
        let dyn_ = dyn1();
        let grid = make_grid(&dyn_, 32).unwrap();
        let params = UhParams { gamma: 100.0, ..UhParams::default() };
        let support = SupportBox::new(&[0.0], &[0.1]).unwrap();
        let out = perturb_jacobi(&model, &dyn_, &support, 0.1, 30, 9, &grid, &params).unwrap();
        assert!(out.trivial);
        assert_eq!(out.distance, 0.0);
    }

    #[test]
    fn perturb_degenerate_start_nudges() {
        // f_b ≡ E = 0: trace identically zero.
        let model = free_model(0.0);
        let dyn_ = dyn1();
        let grid = make_grid(&dyn_, 32).unwrap();
        let params = UhParams { gamma: 100.0, ..UhParams::default() };
        let support = SupportBox::new(&[0.0], &[0.2]).unwrap();
        match perturb_jacobi(&model, &dyn_, &support, 0.1, 30, 13, &grid, &params) {
            Ok(out) => {
                assert!(out.notes.iter().any(|n| n.contains("trace identically zero")));
            }
            Err(Error::NotFound { what, .. }) => {
                assert!(what.contains("stage"), "unexpected: {what}");
            }
            Err(Error::PivotTooSmall(_)) => {
                // Acceptable: the nudged trace may still sit below the pivot
                // floor on the shrunken boxes at this resolution.
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn perturb_free_model_near_edge_succeeds() {
        let model = free_model(1.999);
        let dyn_ = dyn1();
        let grid = make_grid(&dyn_, 64).unwrap();
        let params = UhParams { gamma: 100.0, ..UhParams::default() };
        let support = SupportBox::new(&[0.02], &[0.22]).unwrap();
        let out = perturb_jacobi(&model, &dyn_, &support, 0.1, 80, 21, &grid, &params).unwrap();
        assert!(!out.trivial);
        assert_eq!(out.certificate.verdict, Verdict::Uh);
        assert!(out.distance <= 0.1);
        assert!(out.residual_conjugacy <= 1e-10);
        // The returned map agrees with f_b away from K ∪ T(K) ∪ T⁻¹(K)
        // (K = [0.02, 0.22] maps to [0.638, 0.838] and [0.402, 0.602]).
        let p = BasePoint::new1(0.3);
        assert!((out.f_b_prime.eval_real(&p) - model.f_b.eval_real(&p)).abs() <= 1e-12);
    }
}
