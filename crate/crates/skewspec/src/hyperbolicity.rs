//! Numerical certification of uniform hyperbolicity, extraction of the
//! unstable direction field and its angle lift, and a budgeted search for
//! nearby uniformly hyperbolic cocycles.
//!
//! The certificate is a finite-scale heuristic, not a proof: it tracks the
//! minimum of ‖Aⁿ(x)‖ over a grid along a doubling schedule of n and issues a
//! tri-state verdict. Undetermined is the honest fallback whenever the growth
//! pattern is ambiguous at the tested scales.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::base::{BasePoint, OrbitGrid, SupportBox};
use crate::cocycle::{AngleField, AngleMode, Cocycle, Generator};
use crate::error::{Error, Result};
use crate::mat2::{projective_distance, Mat2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "UH")]
    Uh,
    #[serde(rename = "NotUH")]
    NotUh,
    Undetermined,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Uh => write!(f, "UH"),
            Verdict::NotUh => write!(f, "NotUH"),
            Verdict::Undetermined => write!(f, "Undetermined"),
        }
    }
}

/// Knobs of the finite-scale test. `gamma` is the norm threshold Γ a
/// schedule point must clear for a UH verdict; `not_uh_cutoff` is the
/// norm-collapse level at n_max below which the verdict is NotUH.
#[derive(Clone, Copy, Debug)]
pub struct UhParams {
    pub n_max: u32,
    pub gamma: f64,
    pub not_uh_cutoff: f64,
    /// Double the grid resolution once and re-run when the first pass says
    /// Undetermined.
    pub escalate: bool,
}

impl Default for UhParams {
    fn default() -> Self {
        UhParams { n_max: 256, gamma: 10.0, not_uh_cutoff: 1.5, escalate: true }
    }
}

impl UhParams {
    pub fn new(n_max: u32, gamma: f64) -> UhParams {
        UhParams { n_max, gamma, ..UhParams::default() }
    }
}

/// Evidence gathered by [`certify`]. `growth_samples` holds, per schedule
/// point n, the minimum over the grid of ‖Aⁿ(x)‖ (saturating at f64::MAX).
/// For a UH verdict, `witness_n` is the first schedule point clearing Γ and
/// `margin` the ratio min_norm(witness)/Γ; otherwise `witness_n` is n_max and
/// `margin` the best ratio reached anywhere on the schedule.
#[derive(Clone, Debug, Serialize)]
pub struct UhCertificate {
    pub verdict: Verdict,
    pub witness_n: u32,
    pub min_norm: f64,
    pub growth_samples: Vec<(u32, f64)>,
    pub margin: f64,
    pub grid_resolution: usize,
}

fn schedule_points(n_max: u32) -> Vec<u32> {
    let mut pts = Vec::new();
    let mut n = 4u32;
    while n <= n_max {
        pts.push(n);
        if n > n_max / 2 {
            break;
        }
        n *= 2;
    }
    if *pts.last().unwrap() != n_max {
        pts.push(n_max);
    }
    pts
}

fn saturating_exp(x: f64) -> f64 {
    let v = x.exp();
    if v.is_finite() {
        v
    } else {
        f64::MAX
    }
}

/// Per schedule point, min over the grid of log ‖Aⁿ(x)‖.
fn schedule_log_mins(c: &Cocycle, grid: &OrbitGrid, schedule: &[u32]) -> Result<Vec<f64>> {
    let n_max = *schedule.last().unwrap();
    let mut mins = vec![f64::INFINITY; schedule.len()];
    for p in &grid.points {
        let mut prod = Mat2::IDENTITY;
        let mut log_acc = 0.0f64;
        let mut q = *p;
        let mut sched_idx = 0;
        for n in 1..=n_max {
            prod = c.matrix(&q)?.mul(&prod);
            let f = prod.frobenius();
            prod = prod.scale(1.0 / f);
            log_acc += f.ln();
            q = c.dynamics.step(&q)?;
            if n == schedule[sched_idx] {
                let log_norm = log_acc + prod.op_norm().ln();
                if log_norm < mins[sched_idx] {
                    mins[sched_idx] = log_norm;
                }
                sched_idx += 1;
            }
        }
    }
    Ok(mins)
}

/// Verdict from the schedule of log-min-norms. Shared by [`certify`] and the
/// fast scan paths so the two routes always agree.
pub(crate) fn verdict_from_schedule(log_mins: &[f64], gamma: f64, cutoff: f64) -> (Verdict, usize) {
    let k = log_mins.len();
    let lg = gamma.ln();
    let hit = log_mins.iter().position(|&m| m >= lg);
    let increasing_tail =
        k >= 3 && log_mins[k - 3] < log_mins[k - 2] && log_mins[k - 2] < log_mins[k - 1];
    let decreasing_tail =
        k >= 3 && log_mins[k - 3] > log_mins[k - 2] && log_mins[k - 2] > log_mins[k - 1];
    let max = log_mins.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let uh = hit.is_some() && increasing_tail;
    // Norm collapse at n_max, sustained decay, or norms bounded below Γ over
    // the whole schedule (the rotation witness).
    let not_uh = log_mins[k - 1] <= cutoff.ln() || decreasing_tail || max < lg;

    match (uh, not_uh) {
        (true, false) => (Verdict::Uh, hit.unwrap()),
        (false, true) => (Verdict::NotUh, k - 1),
        _ => (Verdict::Undetermined, k - 1),
    }
}

pub(crate) fn certificate_from_schedule(
    schedule: &[u32],
    log_mins: &[f64],
    gamma: f64,
    cutoff: f64,
    grid_resolution: usize,
) -> UhCertificate {
    let (verdict, idx) = verdict_from_schedule(log_mins, gamma, cutoff);
    let lg = gamma.ln();
    let max = log_mins.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let margin = match verdict {
        Verdict::Uh => saturating_exp(log_mins[idx] - lg),
        _ => saturating_exp(max - lg),
    };
    UhCertificate {
        verdict,
        witness_n: schedule[idx],
        min_norm: saturating_exp(log_mins[idx]),
        growth_samples: schedule.iter().zip(log_mins).map(|(n, m)| (*n, saturating_exp(*m))).collect(),
        margin,
        grid_resolution,
    }
}

/// Certify or refute uniform hyperbolicity of (T, A) on a grid.
///
/// UH requires some schedule point n with min over the grid of ‖Aⁿ(x)‖ ≥ Γ
/// and strictly increasing minima over the last three schedule points. NotUH
/// requires a collapse (min ≤ cutoff at n_max), a sustained decrease, or
/// norms bounded below Γ across the whole schedule. Anything else is
/// Undetermined; with `escalate` set, the grid resolution is doubled once
/// and the second certificate returned.
pub fn certify(c: &Cocycle, grid: &OrbitGrid, params: &UhParams) -> Result<UhCertificate> {
    if params.n_max < 4 {
        return Err(Error::Invalid(format!("n_max must be at least 4, got {}", params.n_max)));
    }
    if params.gamma <= 1.0 {
        return Err(Error::Invalid(format!("gamma must exceed 1, got {}", params.gamma)));
    }
    let schedule = schedule_points(params.n_max);
    let log_mins = schedule_log_mins(c, grid, &schedule)?;
    let cert = certificate_from_schedule(&schedule, &log_mins, params.gamma, params.not_uh_cutoff, grid.resolution);
    if cert.verdict == Verdict::Undetermined && params.escalate {
        let fine = grid.escalate(&c.dynamics)?;
        let log_mins = schedule_log_mins(c, &fine, &schedule)?;
        return Ok(certificate_from_schedule(
            &schedule,
            &log_mins,
            params.gamma,
            params.not_uh_cutoff,
            fine.resolution,
        ));
    }
    Ok(cert)
}

/// The unstable direction field over a grid: unit vectors u(x) spanning the
/// most-expanded direction, an optional angle lift τ(x) (mod π, since only
/// the line matters), and the worst projective invariance defect
/// max_x dist(A(x)u(x), u(T x)).
#[derive(Clone, Debug)]
pub struct UnstableSection {
    pub grid: OrbitGrid,
    pub u_values: Vec<[f64; 2]>,
    pub tau_values: Vec<f64>,
    pub invariance_residual: f64,
    pub m_used: u32,
}

const SECTION_TOL: f64 = 1e-6;

fn section_direction(c: &Cocycle, p: &BasePoint, m: u32) -> Result<[f64; 2]> {
    let past = c.dynamics.iterate_point(p, -(m as i64))?;
    let (prod, _) = c.iterate_normalized(&past, m)?;
    Ok(prod.top_left_singular_vector())
}

/// Extract the unstable section of a UH-certified cocycle by pushing the
/// most-expanded singular direction of A^m(T^{−m}x) forward to x. The depth
/// m defaults to twice the certificate witness and escalates (×2, ×4) until
/// the invariance residual drops below 1e-6.
pub fn unstable_section(
    c: &Cocycle,
    grid: &OrbitGrid,
    cert: &UhCertificate,
    m: Option<u32>,
) -> Result<UnstableSection> {
    if cert.verdict != Verdict::Uh {
        return Err(Error::NotCertifiedUh(cert.verdict.to_string()));
    }
    let m0 = m.unwrap_or(2 * cert.witness_n).max(cert.witness_n);
    let mut last_residual = f64::INFINITY;
    for factor in [1u32, 2, 4] {
        let depth = m0 * factor;
        let mut u_values = Vec::with_capacity(grid.len());
        for p in &grid.points {
            u_values.push(section_direction(c, p, depth)?);
        }
        let mut residual = 0.0f64;
        for (p, u) in grid.points.iter().zip(&u_values) {
            let image = c.matrix(p)?.apply(*u);
            let next = c.dynamics.step(p)?;
            let u_next = section_direction(c, &next, depth)?;
            residual = residual.max(projective_distance(image, u_next));
        }
        if residual <= SECTION_TOL {
            fix_signs(&mut u_values, grid);
            let n = u_values.len();
            return Ok(UnstableSection {
                grid: grid.clone(),
                u_values,
                tau_values: vec![f64::NAN; n],
                invariance_residual: residual,
                m_used: depth,
            });
        }
        last_residual = residual;
    }
    Err(Error::SectionNotConverged { residual: last_residual, m: m0 * 4 })
}

/// Make the vector field continuous along the grid scan order by flipping
/// signs: each point is aligned with its left neighbor (first coordinate) or
/// the node below it at the start of a row.
fn fix_signs(u: &mut [[f64; 2]], grid: &OrbitGrid) {
    let res = grid.resolution;
    for k in 1..u.len() {
        let anchor = match grid.provenance {
            crate::base::Provenance::UniformLattice => {
                if k % res != 0 {
                    k - 1
                } else {
                    k - res
                }
            }
            crate::base::Provenance::ForwardOrbit => k - 1,
        };
        let dot = u[anchor][0] * u[k][0] + u[anchor][1] * u[k][1];
        if dot < 0.0 {
            u[k][0] = -u[k][0];
            u[k][1] = -u[k][1];
        }
    }
}

fn principal_mod_pi(x: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let mut d = x - pi * (x / pi).round();
    if d <= -0.5 * pi {
        d += pi;
    }
    d
}

const LIFT_STEP_LIMIT: f64 = std::f64::consts::FRAC_PI_4;

fn lift_chain(raw: &[f64], start: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut prev = start;
    for (k, &a) in raw.iter().enumerate() {
        let v = if k == 0 { start + principal_mod_pi(a - start) } else { prev + principal_mod_pi(a - prev) };
        out.push(v);
        prev = v;
    }
    out
}

/// Fill the angle lift τ(x) of a section: τ is the angle of u(x) lifted
/// mod π continuously along the grid traversal. Errors with a winding
/// obstruction when the lift cannot close up around a grid cycle (total
/// winding a nonzero multiple of π) or jumps by more than π/4 between
/// neighbors.
pub fn angle_lift(mut section: UnstableSection) -> Result<UnstableSection> {
    let raw: Vec<f64> = section.u_values.iter().map(|u| u[1].atan2(u[0])).collect();
    let res = section.grid.resolution;
    let pi = std::f64::consts::PI;

    let check_cycle = |tau: &[f64], raw: &[f64], label: &str| -> Result<()> {
        // Continue the lift from the last element back to the first.
        let closing = tau[tau.len() - 1] + principal_mod_pi(raw[0] - tau[tau.len() - 1]);
        let defect = closing - tau[0];
        let winding = (defect / pi).round();
        if winding != 0.0 {
            return Err(Error::WindingObstruction(format!(
                "{label}: winding {winding}π around the cycle"
            )));
        }
        Ok(())
    };
    let check_steps = |tau: &[f64], label: &str| -> Result<()> {
        for w in tau.windows(2) {
            if (w[1] - w[0]).abs() > LIFT_STEP_LIMIT {
                return Err(Error::WindingObstruction(format!(
                    "{label}: lift jump {:.3} exceeds π/4 between neighbors (grid too coarse)",
                    (w[1] - w[0]).abs()
                )));
            }
        }
        Ok(())
    };

    let is_lattice = section.grid.provenance == crate::base::Provenance::UniformLattice;
    let dims = if is_lattice && section.grid.points[0].dim() == 2 { 2 } else { 1 };

    if dims == 1 {
        let tau = lift_chain(&raw, raw[0]);
        check_steps(&tau, "scan order")?;
        if is_lattice {
            check_cycle(&tau, &raw, "circle")?;
        }
        section.tau_values = tau;
    } else {
        // Lift the first column, then each row from its first node.
        let mut tau = vec![f64::NAN; raw.len()];
        let col_raw: Vec<f64> = (0..res).map(|j| raw[j * res]).collect();
        let col_tau = lift_chain(&col_raw, col_raw[0]);
        check_steps(&col_tau, "first column")?;
        check_cycle(&col_tau, &col_raw, "first column cycle")?;
        for j in 0..res {
            let row_raw: Vec<f64> = (0..res).map(|i| raw[j * res + i]).collect();
            let row_tau = lift_chain(&row_raw, col_tau[j]);
            check_steps(&row_tau, "row")?;
            check_cycle(&row_tau, &row_raw, "row cycle")?;
            for i in 0..res {
                tau[j * res + i] = row_tau[i];
            }
        }
        // Vertical consistency between lifted rows.
        for j in 1..res {
            for i in 0..res {
                let d = principal_mod_pi(tau[j * res + i] - tau[(j - 1) * res + i]);
                if d.abs() > LIFT_STEP_LIMIT {
                    return Err(Error::WindingObstruction(format!(
                        "vertical lift jump {:.3} exceeds π/4", d.abs()
                    )));
                }
            }
        }
        section.tau_values = tau;
    }
    Ok(section)
}

/// Lift τ only over the grid points listed in `indices` (row chains within a
/// support box). No cycle check: a coordinate box is contractible. Returns
/// the lifted values aligned with `indices`.
pub(crate) fn angle_lift_region(
    section: &UnstableSection,
    indices: &[usize],
    rows: &[std::ops::Range<usize>],
) -> Result<Vec<f64>> {
    let raw: Vec<f64> = indices.iter().map(|&k| {
        let u = section.u_values[k];
        u[1].atan2(u[0])
    }).collect();
    let mut tau = vec![f64::NAN; raw.len()];
    let mut prev_row_start: Option<f64> = None;
    for row in rows {
        let row_raw = &raw[row.clone()];
        let start = match prev_row_start {
            None => row_raw[0],
            Some(anchor) => anchor + principal_mod_pi(row_raw[0] - anchor),
        };
        let lifted = lift_chain(row_raw, start);
        for w in lifted.windows(2) {
            if (w[1] - w[0]).abs() > LIFT_STEP_LIMIT {
                return Err(Error::WindingObstruction(format!(
                    "support-region lift jump {:.3} exceeds π/4",
                    (w[1] - w[0]).abs()
                )));
            }
        }
        prev_row_start = Some(lifted[0]);
        tau[row.clone()].copy_from_slice(&lifted);
    }
    Ok(tau)
}

/// Outcome of the nearby-UH search.
#[derive(Clone, Debug)]
pub struct SeekOutcome {
    pub cocycle: Cocycle,
    pub certificate: UhCertificate,
    pub distance: f64,
    pub candidates_tried: usize,
    pub log: Vec<String>,
}

/// Grid sup of the pointwise operator-norm distance between two cocycles.
pub fn cocycle_distance(a: &Cocycle, b: &Cocycle, grid: &OrbitGrid) -> Result<f64> {
    let mut d = 0.0f64;
    for p in &grid.points {
        d = d.max(a.matrix(p)?.sub(&b.matrix(p)?).op_norm());
    }
    Ok(d)
}

/// Search for a uniformly hyperbolic cocycle within C⁰ distance `epsilon`
/// of `c`, equal to `c` outside the closed support box.
///
/// The search family is rotation dressings B(x) = R_{θ(x)}·A(x) with θ a
/// smooth bump on the support times a low-frequency mode sum: first the
/// constant-sign dressings at a few amplitude fractions, then seeded random
/// mode combinations up to the budget. Every candidate is re-certified; the
/// first UH certificate wins. This is the artifact's stand-in for the
/// density theorem it cannot reprove.
pub fn seek_uh_neighbor(
    c: &Cocycle,
    support: &SupportBox,
    epsilon: f64,
    budget: usize,
    seed: u64,
    grid: &OrbitGrid,
    params: &UhParams,
) -> Result<SeekOutcome> {
    if epsilon <= 0.0 {
        return Err(Error::Invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut log = Vec::new();

    let base_cert = certify(c, grid, params)?;
    if base_cert.verdict == Verdict::Uh {
        log.push("candidate 0: unperturbed cocycle already UH".to_string());
        return Ok(SeekOutcome {
            cocycle: c.clone(),
            certificate: base_cert,
            distance: 0.0,
            candidates_tried: 1,
            log,
        });
    }
    log.push(format!("candidate 0: unperturbed verdict {}", base_cert.verdict));

    let mut sup_norm = 0.0f64;
    for p in &grid.points {
        sup_norm = sup_norm.max(c.matrix(p)?.op_norm());
    }
    // ‖R_θ M − M‖ = 2|sin(θ/2)|·‖M‖, so this amplitude keeps the C⁰
    // distance within epsilon.
    let theta_max = 2.0 * (epsilon / (2.0 * sup_norm)).min(1.0).asin();

    let mut tried = 1usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Constant-sign kicks handle band edges; single higher modes lock onto
    // resonances deeper inside (gap labels k·α demand a matching spatial
    // frequency). Random mode sums mop up afterwards, within the budget.
    let mut candidates: Vec<AngleField> = Vec::new();
    for frac in [1.0, 0.5, 0.25] {
        for sign in [-1.0, 1.0] {
            candidates.push(AngleField::constant(*support, sign * frac * theta_max));
        }
    }
    let max_freq = 21i32;
    for k in 1..=max_freq {
        for phase in [0.0, std::f64::consts::FRAC_PI_2] {
            candidates.push(AngleField {
                support: *support,
                amplitude: theta_max,
                modes: vec![AngleMode { freq: [k, 0], phase, weight: 1.0 }],
            });
            if c.dynamics.dim() == 2 {
                candidates.push(AngleField {
                    support: *support,
                    amplitude: theta_max,
                    modes: vec![AngleMode { freq: [0, k], phase, weight: 1.0 }],
                });
            }
        }
    }

    let base = std::sync::Arc::new(c.generator.clone());
    while candidates.len() < budget {
        let n_modes = rng.gen_range(1..=3);
        let mut modes = Vec::with_capacity(n_modes);
        let mut weight_sum = 0.0;
        for _ in 0..n_modes {
            let mut freq = [0i32; 2];
            for f in freq.iter_mut().take(c.dynamics.dim()) {
                *f = rng.gen_range(-max_freq..=max_freq);
            }
            let weight: f64 = rng.gen_range(-1.0..1.0);
            weight_sum += weight.abs();
            modes.push(AngleMode { freq, phase: rng.gen_range(0.0..std::f64::consts::TAU), weight });
        }
        if weight_sum == 0.0 {
            continue;
        }
        for m in &mut modes {
            m.weight /= weight_sum;
        }
        let amplitude = theta_max * rng.gen_range(0.3..=1.0);
        candidates.push(AngleField { support: *support, amplitude, modes });
    }

    for field in candidates {
        if tried >= budget {
            break;
        }
        tried += 1;
        let amplitude = field.amplitude;
        let dressed = Cocycle::new(
            c.dynamics.clone(),
            Generator::Dressed { base: base.clone(), field },
        );
        let cert = certify(&dressed, grid, params)?;
        log.push(format!(
            "candidate {}: amplitude {:+.4e}, verdict {}, margin {:.3e}",
            tried - 1,
            amplitude,
            cert.verdict,
            cert.margin
        ));
        if cert.verdict == Verdict::Uh {
            let distance = cocycle_distance(c, &dressed, grid)?;
            if distance > epsilon {
                log.push(format!("candidate rejected: distance {distance} exceeds epsilon"));
                continue;
            }
            return Ok(SeekOutcome { cocycle: dressed, certificate: cert, distance, candidates_tried: tried, log });
        }
    }

    Err(Error::NotFound {
        what: format!("no UH neighbor within {epsilon}; log: {}", log.join(" | ")),
        tried,
    })
}
