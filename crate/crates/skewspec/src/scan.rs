//! Spectral scans: sweep a parameter axis (energies E for Jacobi, phases ψ
//! for CMV), certify uniform hyperbolicity of the cocycle at each value, and
//! report the UH runs as spectral gaps.
//!
//! The coefficient sequences along each grid orbit do not depend on the
//! spectral parameter, so scans precompute them once and reuse them for
//! every parameter value. The verdict logic is shared with
//! [`crate::hyperbolicity::certify`], so the two routes agree by
//! construction.

use rayon::prelude::*;
use serde::Serialize;

use crate::base::{make_grid, BaseDynamics, OrbitGrid};
use crate::error::{Error, Result};
use crate::hyperbolicity::{certificate_from_schedule, UhCertificate, UhParams, Verdict};
use crate::mat2::Mat2;
use crate::sampling::SamplingMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Axis {
    Circle,
    Line,
}

#[derive(Clone, Debug)]
pub struct SpectralScan {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub verdicts: Vec<UhCertificate>,
    pub metadata: String,
}

impl SpectralScan {
    /// Sorted parameter values whose verdict is not UH (NotUH or
    /// Undetermined; the latter is counted as spectrum, conservatively).
    pub fn non_uh_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.verdicts)
            .filter(|(_, c)| c.verdict != Verdict::Uh)
            .map(|(v, _)| *v)
            .collect()
    }

    pub fn undetermined_count(&self) -> usize {
        self.verdicts.iter().filter(|c| c.verdict == Verdict::Undetermined).count()
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GapInterval {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
}

/// Maximal runs of UH verdicts, reported as open intervals (line axis) or
/// arcs (circle axis, where a run may wrap past 2π and `hi` then exceeds 2π).
/// Undetermined points are treated as spectrum but tallied separately.
#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub gaps: Vec<GapInterval>,
    pub undetermined_count: usize,
}

fn orbit_coefficient_tables<T, F>(
    dyn_: &BaseDynamics,
    grid: &OrbitGrid,
    n_max: u32,
    sample: F,
) -> Result<Vec<Vec<T>>>
where
    F: Fn(&crate::base::BasePoint) -> Result<T> + Sync,
    T: Send,
{
    grid.points
        .par_iter()
        .map(|p| {
            let mut q = *p;
            let mut row = Vec::with_capacity(n_max as usize);
            for _ in 0..n_max {
                row.push(sample(&q)?);
                q = dyn_.step(&q)?;
            }
            Ok(row)
        })
        .collect()
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

/// Product pass over one precomputed orbit row; `step_matrix(k)` yields the
/// generator at orbit position k.
fn log_norms_over_row<F: Fn(usize) -> Mat2>(
    n_max: u32,
    schedule: &[u32],
    step_matrix: F,
    mins: &mut [f64],
) {
    let mut prod = Mat2::IDENTITY;
    let mut log_acc = 0.0f64;
    let mut sched_idx = 0;
    for n in 1..=n_max {
        prod = step_matrix((n - 1) as usize).mul(&prod);
        let f = prod.frobenius();
        prod = prod.scale(1.0 / f);
        log_acc += f.ln();
        if n == schedule[sched_idx] {
            let log_norm = log_acc + prod.op_norm().ln();
            if log_norm < mins[sched_idx] {
                mins[sched_idx] = log_norm;
            }
            sched_idx += 1;
        }
    }
}

struct ScanEngine<T> {
    tables: Vec<Vec<T>>,
    fine_tables: Vec<Vec<T>>,
    schedule: Vec<u32>,
    resolution: usize,
    params: UhParams,
}

impl<T: Sync + Send> ScanEngine<T> {
    fn certify_value<F>(&self, make: &F) -> UhCertificate
    where
        F: Fn(&T) -> Mat2 + Sync,
    {
        let run = |tables: &Vec<Vec<T>>, resolution: usize| -> UhCertificate {
            let mut mins = vec![f64::INFINITY; self.schedule.len()];
            for row in tables {
                log_norms_over_row(self.params.n_max, &self.schedule, |k| make(&row[k]), &mut mins);
            }
            certificate_from_schedule(
                &self.schedule,
                &mins,
                self.params.gamma,
                self.params.not_uh_cutoff,
                resolution,
            )
        };
        let cert = run(&self.tables, self.resolution);
        if cert.verdict == Verdict::Undetermined && self.params.escalate && !self.fine_tables.is_empty() {
            return run(&self.fine_tables, self.resolution * 2);
        }
        cert
    }
}

/// Scan a Jacobi model over a sorted energy grid. One UH verdict per energy,
/// from the same finite-scale test as [`crate::hyperbolicity::certify`].
pub fn scan_jacobi(
    f_a: &SamplingMap,
    f_b: &SamplingMap,
    dyn_: &BaseDynamics,
    e_grid: &[f64],
    params: &UhParams,
    resolution: usize,
) -> Result<SpectralScan> {
    if e_grid.is_empty() {
        return Err(Error::Invalid("empty energy grid".into()));
    }
    if e_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("energy grid must be sorted strictly increasing".into()));
    }
    f_a.validate()?;

    let grid = make_grid(dyn_, resolution)?;
    let sample = |p: &crate::base::BasePoint| -> Result<(f64, f64)> {
        let a = f_a.eval_real(p);
        if a <= 0.0 {
            return Err(Error::NonpositiveA(a));
        }
        Ok((a, f_b.eval_real(p)))
    };
    let tables = orbit_coefficient_tables(dyn_, &grid, params.n_max, sample)?;
    let fine_tables = if params.escalate {
        let fine = grid.escalate(dyn_)?;
        orbit_coefficient_tables(dyn_, &fine, params.n_max, sample)?
    } else {
        Vec::new()
    };
    let engine = ScanEngine { tables, fine_tables, schedule: schedule_points(params.n_max), resolution, params: *params };

    let verdicts: Vec<UhCertificate> = e_grid
        .par_iter()
        .map(|&e| {
            engine.certify_value(&|&(a, b): &(f64, f64)| {
                let inv_a = 1.0 / a;
                Mat2::new((e - b) * inv_a, -inv_a, a, 0.0)
            })
        })
        .collect();

    Ok(SpectralScan {
        axis: Axis::Line,
        values: e_grid.to_vec(),
        verdicts,
        metadata: "jacobi".into(),
    })
}

/// Scan a CMV model over a sorted grid of phases ψ ∈ [0, 2π). The verdict at
/// each ψ certifies the W-conjugated Szegő cocycle (the S′ realization).
pub fn scan_cmv(
    f: &SamplingMap,
    dyn_: &BaseDynamics,
    psi_grid: &[f64],
    params: &UhParams,
    resolution: usize,
) -> Result<SpectralScan> {
    if psi_grid.is_empty() {
        return Err(Error::Invalid("empty phase grid".into()));
    }
    if psi_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("phase grid must be sorted strictly increasing".into()));
    }
    f.validate()?;

    let grid = make_grid(dyn_, resolution)?;
    // (r, cos φ, sin φ, 1/√(1−r²)) along each orbit.
    let sample = |p: &crate::base::BasePoint| -> Result<(f64, f64, f64, f64)> {
        let v = f.eval_complex(p);
        let r = v.norm();
        if r >= 1.0 - crate::sampling::DISK_MARGIN {
            return Err(Error::MapOutOfDisk(r));
        }
        let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (v.re / r, v.im / r) };
        Ok((r, c, s, 1.0 / (1.0 - r * r).sqrt()))
    };
    let tables = orbit_coefficient_tables(dyn_, &grid, params.n_max, sample)?;
    let fine_tables = if params.escalate {
        let fine = grid.escalate(dyn_)?;
        orbit_coefficient_tables(dyn_, &fine, params.n_max, sample)?
    } else {
        Vec::new()
    };
    let engine = ScanEngine { tables, fine_tables, schedule: schedule_points(params.n_max), resolution, params: *params };

    let verdicts: Vec<UhCertificate> = psi_grid
        .par_iter()
        .map(|&psi| {
            let tp = 0.5 * psi;
            let (sin_tp, cos_tp) = tp.sin_cos();
            let rot = Mat2::rotation(tp);
            engine.certify_value(&|&(r, cphi, sphi, scale): &(f64, f64, f64, f64)| {
                // S(θ′ + φ) via the angle-addition formulas; no trig in here.
                let c = cos_tp * cphi - sin_tp * sphi;
                let s = sin_tp * cphi + cos_tp * sphi;
                Mat2::new(
                    (rot.a - r * c) * scale,
                    (rot.b + r * s) * scale,
                    (rot.c + r * s) * scale,
                    (rot.d + r * c) * scale,
                )
            })
        })
        .collect();

    Ok(SpectralScan {
        axis: Axis::Circle,
        values: psi_grid.to_vec(),
        verdicts,
        metadata: "cmv".into(),
    })
}

/// Enumerate maximal UH runs as gaps. Interval endpoints sit midway between
/// the last UH and first non-UH grid values; runs touching the ends of a
/// line scan are bounded by the grid itself. On the circle axis, runs at
/// both ends of the grid merge across the 0/2π seam.
pub fn gaps(scan: &SpectralScan) -> Result<GapReport> {
    if scan.values.is_empty() {
        return Err(Error::Invalid("empty scan".into()));
    }
    let n = scan.values.len();
    let is_uh: Vec<bool> = scan.verdicts.iter().map(|c| c.verdict == Verdict::Uh).collect();
    let undetermined_count = scan.undetermined_count();

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (k, &uh) in is_uh.iter().enumerate() {
        match (uh, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                runs.push((s, k - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, n - 1));
    }

    if runs.len() == 1 && runs[0] == (0, n - 1) {
        // All-UH scan: a single gap spanning the whole axis. Suspicious for
        // self-adjoint models; callers surface that note.
        let (lo, hi) = match scan.axis {
            Axis::Line => (scan.values[0], scan.values[n - 1]),
            Axis::Circle => (0.0, std::f64::consts::TAU),
        };
        return Ok(GapReport {
            gaps: vec![GapInterval { lo, hi, width: hi - lo }],
            undetermined_count,
        });
    }

    let lo_of = |s: usize| -> f64 {
        if s == 0 {
            scan.values[0]
        } else {
            0.5 * (scan.values[s - 1] + scan.values[s])
        }
    };
    let hi_of = |e: usize| -> f64 {
        if e == n - 1 {
            scan.values[n - 1]
        } else {
            0.5 * (scan.values[e] + scan.values[e + 1])
        }
    };

    let mut gaps_out = Vec::new();
    let mut wrapped: Option<GapInterval> = None;
    if scan.axis == Axis::Circle && runs.len() >= 2 {
        let first = runs[0];
        let last = *runs.last().unwrap();
        if first.0 == 0 && last.1 == n - 1 {
            // Merge across the seam; hi deliberately exceeds 2π.
            let lo = lo_of(last.0);
            let hi = hi_of(first.1) + std::f64::consts::TAU;
            wrapped = Some(GapInterval { lo, hi, width: hi - lo });
            runs.remove(runs.len() - 1);
            runs.remove(0);
        }
    }
    for (s, e) in runs {
        let lo = lo_of(s);
        let hi = hi_of(e);
        gaps_out.push(GapInterval { lo, hi, width: hi - lo });
    }
    if let Some(w) = wrapped {
        gaps_out.push(w);
    }
    Ok(GapReport { gaps: gaps_out, undetermined_count })
}

/// Evenly spaced sorted grid from lo to hi inclusive (line axes).
pub fn line_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if step <= 0.0 || hi <= lo {
        return Err(Error::Invalid(format!("bad grid spec [{lo}, {hi}] step {step}")));
    }
    let count = ((hi - lo) / step).round() as usize;
    let mut v: Vec<f64> = (0..=count).map(|k| lo + k as f64 * step).collect();
    if *v.last().unwrap() > hi + 0.5 * step {
        v.pop();
    }
    Ok(v)
}

/// Evenly spaced phase grid over [0, 2π) with the given step.
pub fn circle_grid(step: f64) -> Result<Vec<f64>> {
    if step <= 0.0 {
        return Err(Error::Invalid(format!("bad circle step {step}")));
    }
    let tau = std::f64::consts::TAU;
    let count = (tau / step).ceil() as usize;
    Ok((0..count).map(|k| k as f64 * step).filter(|&p| p < tau).collect())
}
