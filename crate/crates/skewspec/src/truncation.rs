//! Finite truncations, the oracle route to the spectrum.
//!
//! Jacobi models truncate to an N×N principal block of the bi-infinite
//! matrix along the orbit (Dirichlet ends); eigenvalues come from Sturm
//! sequence counts and bisection. CMV models terminate the Szegő recursion
//! with a unimodular boundary coefficient, giving a paraorthogonal
//! polynomial whose zeros all sit on the unit circle; the zeros are located
//! as sign changes of a rotated real form of the recursion and bisected.
//! Both truncations keep the eigenvalues real/unimodular by construction, so
//! the two routes can be compared meaningfully.

use num_complex::Complex64;

use crate::base::{BaseDynamics, BasePoint};
use crate::error::{Error, Result};
use crate::sampling::SamplingMap;

/// Eigenvalues of an N×N Jacobi block, or eigenphases of an order-N
/// paraorthogonal CMV truncation, along the orbit of `base_point`.
#[derive(Clone, Debug)]
pub struct TruncationSpectrum {
    pub size: usize,
    /// Sorted: real eigenvalues (Jacobi) or phases in [0, 2π) (CMV).
    pub eigenvalues: Vec<f64>,
    pub base_point: BasePoint,
    /// CMV only: the phase of the unimodular boundary coefficient.
    pub boundary_phase: Option<f64>,
}

const BISECT_TOL: f64 = 1e-10;

/// Number of eigenvalues of the symmetric tridiagonal (diag, off) below
/// `lam`, by the classical Sturm pivot recurrence. Zero pivots count as
/// negative and are replaced by a small negative value scaled to the local
/// entries, which keeps the next division finite.
fn sturm_count_below(diag: &[f64], off: &[f64], lam: f64) -> usize {
    let n = diag.len();
    let mut count = 0usize;
    let mut q = diag[0] - lam;
    for k in 1..=n {
        if q <= 0.0 {
            count += 1;
        }
        if k == n {
            break;
        }
        let e = off[k - 1];
        let guard = f64::EPSILON * (e.abs() + diag[k].abs() + lam.abs() + 1.0);
        let safe = if q.abs() < guard { -guard } else { q };
        q = diag[k] - lam - e * e / safe;
    }
    count
}

/// All eigenvalues of a symmetric tridiagonal matrix by Sturm bisection,
/// each localized to ±1e-10, ascending.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    // Gershgorin bounds.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..n {
        let mut radius = 0.0;
        if k > 0 {
            radius += off[k - 1].abs();
        }
        if k + 1 < n {
            radius += off[k].abs();
        }
        lo = lo.min(diag[k] - radius);
        hi = hi.max(diag[k] + radius);
    }
    lo -= 1e-8;
    hi += 1e-8;

    (0..n)
        .map(|k| {
            let mut a = lo;
            let mut b = hi;
            while b - a > BISECT_TOL {
                let mid = 0.5 * (a + b);
                if sturm_count_below(diag, off, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// N×N principal block of H_x along the orbit (Dirichlet boundary), solved
/// by Sturm bisection.
pub fn truncation_jacobi(
    f_a: &SamplingMap,
    f_b: &SamplingMap,
    dyn_: &BaseDynamics,
    x: &BasePoint,
    n: usize,
) -> Result<TruncationSpectrum> {
    if n < 1 {
        return Err(Error::Invalid("truncation size must be at least 1".into()));
    }
    let orbit = dyn_.orbit(x, 0, n as i64 - 1)?;
    let diag: Vec<f64> = orbit.iter().map(|p| f_b.eval_real(p)).collect();
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for p in orbit.iter().take(n - 1) {
        let a = f_a.eval_real(p);
        if a <= 0.0 {
            return Err(Error::NonpositiveA(a));
        }
        off.push(a);
    }
    let eigenvalues = tridiagonal_eigenvalues(&diag, &off);
    Ok(TruncationSpectrum { size: n, eigenvalues, base_point: *x, boundary_phase: None })
}

/// The rotated real form whose zeros on [0, 2π) are the zeros of the
/// degree-N paraorthogonal polynomial z·Φ_{N−1}(z) − e^{-iφ_b}·Φ*_{N−1}(z).
/// Positive rescaling during the recursion leaves the sign unchanged.
fn paraorthogonal_form(alphas: &[Complex64], boundary_phase: f64, n: usize, psi: f64) -> f64 {
    let z = Complex64::from_polar(1.0, psi);
    let mut phi = Complex64::new(1.0, 0.0);
    let mut phi_star = Complex64::new(1.0, 0.0);
    for a in alphas {
        let next = z * phi - a.conj() * phi_star;
        phi_star -= *a * z * phi;
        phi = next;
        let scale = phi.norm().max(phi_star.norm());
        if !(1e-100..=1e100).contains(&scale) {
            phi /= scale;
            phi_star /= scale;
        }
    }
    let rot = Complex64::from_polar(1.0, 0.5 * boundary_phase + 0.5 * (2.0 - n as f64) * psi);
    (rot * phi).im
}

/// Eigenphases of the order-N paraorthogonal truncation along the orbit:
/// the Szegő recursion runs with α_0..α_{N−2} sampled from the orbit and a
/// final coefficient e^{i·boundary_phase} on the unit circle. Zeros are
/// located by a 16N-point phase scan plus bisection to ±1e-10.
pub fn truncation_cmv(
    f: &SamplingMap,
    dyn_: &BaseDynamics,
    x: &BasePoint,
    n: usize,
    boundary_phase: f64,
) -> Result<TruncationSpectrum> {
    if n < 1 {
        return Err(Error::Invalid("truncation size must be at least 1".into()));
    }
    let tau = std::f64::consts::TAU;
    let mut alphas = Vec::with_capacity(n.saturating_sub(1));
    if n > 1 {
        for p in dyn_.orbit(x, 0, n as i64 - 2)? {
            let v = f.eval_complex(&p);
            if v.norm() >= 1.0 - crate::sampling::DISK_MARGIN {
                return Err(Error::MapOutOfDisk(v.norm()));
            }
            alphas.push(v);
        }
    }
    let eval = |psi: f64| paraorthogonal_form(&alphas, boundary_phase, n, psi);

    let mut samples_per_root = 16usize;
    for _refine in 0..4 {
        let m = samples_per_root * n;
        let h = tau / m as f64;
        let values: Vec<f64> = (0..=m).map(|j| eval(j as f64 * h)).collect();
        let mut roots: Vec<f64> = Vec::with_capacity(n);
        for j in 0..m {
            let (fa, fb) = (values[j], values[j + 1]);
            if fa == 0.0 {
                roots.push(j as f64 * h);
                continue;
            }
            if fb == 0.0 {
                continue; // captured at the next sample
            }
            if fa.signum() != fb.signum() {
                let mut a = j as f64 * h;
                let mut b = (j + 1) as f64 * h;
                let mut va = fa;
                while b - a > BISECT_TOL {
                    let mid = 0.5 * (a + b);
                    let vm = eval(mid);
                    if vm == 0.0 {
                        a = mid;
                        b = mid;
                        break;
                    }
                    if vm.signum() == va.signum() {
                        a = mid;
                        va = vm;
                    } else {
                        b = mid;
                    }
                }
                roots.push(0.5 * (a + b));
            }
        }
        // Keep phases in [0, 2π); the sample at 2π duplicates 0.
        let mut phases: Vec<f64> = roots
            .into_iter()
            .map(|p| if p >= tau { p - tau } else { p })
            .collect();
        phases.sort_by(|a, b| a.partial_cmp(b).unwrap());
        phases.dedup_by(|a, b| (*a - *b).abs() < 10.0 * BISECT_TOL);
        // Circular dedup: a root straddling the 2π seam shows up at both ends.
        if phases.len() >= 2 && (phases[0] + tau - phases[phases.len() - 1]).abs() < 10.0 * BISECT_TOL {
            phases.pop();
        }
        if phases.len() == n {
            return Ok(TruncationSpectrum {
                size: n,
                eigenvalues: phases,
                base_point: *x,
                boundary_phase: Some(boundary_phase),
            });
        }
        if phases.len() > n {
            return Err(Error::RootCountMismatch { expected: n, found: phases.len() });
        }
        samples_per_root *= 2;
    }
    Err(Error::RootCountMismatch { expected: n, found: 0 })
}

/// Strict circular interlacing of two phase lists (used for the boundary
/// phases 0 and π of the same truncation).
pub fn phases_strictly_interlace(p: &[f64], q: &[f64]) -> bool {
    if p.len() != q.len() || p.is_empty() {
        return false;
    }
    let mut merged: Vec<(f64, u8)> = p.iter().map(|&v| (v, 0u8)).chain(q.iter().map(|&v| (v, 1u8))).collect();
    merged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    (0..merged.len()).all(|k| merged[k].1 != merged[(k + 1) % merged.len()].1)
}
