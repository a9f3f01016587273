//! Base dynamics: torus rotations and the skew-shift, plus the finite grids
//! and orbit segments that stand in for the compact phase space.
//!
//! Phases live in [0, 1) and are wrapped with a single conditional
//! subtraction/addition after each update, so long orbits never accumulate
//! whole-turn multiples.

use crate::error::{Error, Result};

/// (√5 − 1)/2 truncated to 17 significant digits — the default test frequency.
#[allow(clippy::excessive_precision)]
pub const GOLDEN_MEAN: f64 = 0.61803398874989484;

/// A point of the torus 𝕋ᵈ, d ∈ {1, 2}; every coordinate lies in [0, 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasePoint {
    coords: [f64; 2],
    dim: usize,
}

fn wrap_unit(x: f64) -> f64 {
    let w = x - x.floor();
    // x.floor() == x for integers leaves w == 0; negative inputs land in [0,1).
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

#[inline]
fn wrap_add(x: f64, y: f64) -> f64 {
    let t = x + y;
    if t >= 1.0 {
        t - 1.0
    } else {
        t
    }
}

#[inline]
fn wrap_sub(x: f64, y: f64) -> f64 {
    let t = x - y;
    if t < 0.0 {
        t + 1.0
    } else {
        t
    }
}

impl BasePoint {
    pub fn new1(x: f64) -> BasePoint {
        BasePoint { coords: [wrap_unit(x), 0.0], dim: 1 }
    }

    pub fn new2(x: f64, y: f64) -> BasePoint {
        BasePoint { coords: [wrap_unit(x), wrap_unit(y)], dim: 2 }
    }

    pub fn from_slice(coords: &[f64]) -> Result<BasePoint> {
        match coords {
            [x] => Ok(BasePoint::new1(*x)),
            [x, y] => Ok(BasePoint::new2(*x, *y)),
            _ => Err(Error::DimensionMismatch { expected: 2, got: coords.len() }),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    /// First coordinate (the rotation factor for the skew-shift).
    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn y(&self) -> f64 {
        self.coords[1]
    }

    /// Max per-coordinate distance on the torus (accounting for wrap).
    pub fn torus_distance(&self, other: &BasePoint) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| {
                let d = (a - b).abs();
                d.min(1.0 - d)
            })
            .fold(0.0, f64::max)
    }
}

/// The strictly ergodic base homeomorphism T. Minimality and unique
/// ergodicity are assumptions on the chosen frequencies (irrational), not
/// verified properties.
#[derive(Clone, Debug)]
pub enum BaseDynamics {
    /// x ↦ x + α componentwise mod 1 on 𝕋ᵈ.
    Rotation { frequencies: Vec<f64> },
    /// (x, y) ↦ (x + α, y + x) mod 1 on 𝕋². The first coordinate is the
    /// rotation factor: h(T(x)) = h(x) + α with h = projection to x.
    SkewShift { alpha: f64 },
}

impl BaseDynamics {
    pub fn rotation(frequencies: &[f64]) -> Result<BaseDynamics> {
        if frequencies.is_empty() || frequencies.len() > 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: frequencies.len() });
        }
        Ok(BaseDynamics::Rotation {
            frequencies: frequencies.iter().map(|f| wrap_unit(*f)).collect(),
        })
    }

    pub fn skew_shift(alpha: f64) -> BaseDynamics {
        BaseDynamics::SkewShift { alpha: wrap_unit(alpha) }
    }

    pub fn dim(&self) -> usize {
        match self {
            BaseDynamics::Rotation { frequencies } => frequencies.len(),
            BaseDynamics::SkewShift { .. } => 2,
        }
    }

    fn check_dim(&self, p: &BasePoint) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: p.dim() });
        }
        Ok(())
    }

    /// One application of T.
    pub fn step(&self, p: &BasePoint) -> Result<BasePoint> {
        self.check_dim(p)?;
        Ok(match self {
            BaseDynamics::Rotation { frequencies } => {
                let mut c = [0.0; 2];
                for (k, f) in frequencies.iter().enumerate() {
                    c[k] = wrap_add(p.coords[k], *f);
                }
                BasePoint { coords: c, dim: p.dim }
            }
            BaseDynamics::SkewShift { alpha } => {
                let x = wrap_add(p.coords[0], *alpha);
                let y = wrap_add(p.coords[1], p.coords[0]);
                BasePoint { coords: [x, y], dim: 2 }
            }
        })
    }

    /// One application of T⁻¹.
    pub fn inverse_step(&self, p: &BasePoint) -> Result<BasePoint> {
        self.check_dim(p)?;
        Ok(match self {
            BaseDynamics::Rotation { frequencies } => {
                let mut c = [0.0; 2];
                for (k, f) in frequencies.iter().enumerate() {
                    c[k] = wrap_sub(p.coords[k], *f);
                }
                BasePoint { coords: c, dim: p.dim }
            }
            BaseDynamics::SkewShift { alpha } => {
                let x0 = wrap_sub(p.coords[0], *alpha);
                let y0 = wrap_sub(p.coords[1], x0);
                BasePoint { coords: [x0, y0], dim: 2 }
            }
        })
    }

    /// T^k for any integer k.
    pub fn iterate_point(&self, p: &BasePoint, k: i64) -> Result<BasePoint> {
        let mut q = *p;
        if k >= 0 {
            for _ in 0..k {
                q = self.step(&q)?;
            }
        } else {
            for _ in 0..(-k) {
                q = self.inverse_step(&q)?;
            }
        }
        Ok(q)
    }

    /// T^k(p) for k = n_from..=n_to.
    pub fn orbit(&self, p: &BasePoint, n_from: i64, n_to: i64) -> Result<Vec<BasePoint>> {
        if n_from > n_to {
            return Err(Error::Invalid(format!("orbit range {n_from}..{n_to} is empty")));
        }
        let mut q = self.iterate_point(p, n_from)?;
        let mut out = Vec::with_capacity((n_to - n_from + 1) as usize);
        out.push(q);
        for _ in n_from..n_to {
            q = self.step(&q)?;
            out.push(q);
        }
        Ok(out)
    }
}

/// How an [`OrbitGrid`] was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    UniformLattice,
    ForwardOrbit,
}

/// A finite stand-in for the compact space X: either a uniform lattice
/// covering the torus with mesh ≤ 1/resolution, or a forward orbit segment.
#[derive(Clone, Debug)]
pub struct OrbitGrid {
    pub points: Vec<BasePoint>,
    pub resolution: usize,
    pub provenance: Provenance,
}

impl OrbitGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Lattice index for (i, j); row-major with the first coordinate fastest.
    pub fn lattice_index(&self, i: usize, j: usize) -> usize {
        j * self.resolution + i
    }

    /// A grid of the same provenance at twice the resolution (lattice) or
    /// twice the length (orbit). Used by the certificate escalation step.
    pub fn escalate(&self, dyn_: &BaseDynamics) -> Result<OrbitGrid> {
        match self.provenance {
            Provenance::UniformLattice => make_grid(dyn_, self.resolution * 2),
            Provenance::ForwardOrbit => {
                let n = self.points.len() * 2;
                orbit_grid(dyn_, &self.points[0], n)
            }
        }
    }
}

/// Uniform lattice of resolutionᵈ points with mesh exactly 1/resolution.
pub fn make_grid(dyn_: &BaseDynamics, resolution: usize) -> Result<OrbitGrid> {
    if resolution < 2 {
        return Err(Error::ResolutionTooSmall(resolution));
    }
    let h = 1.0 / resolution as f64;
    let points = match dyn_.dim() {
        1 => (0..resolution).map(|i| BasePoint::new1(i as f64 * h)).collect(),
        _ => {
            let mut pts = Vec::with_capacity(resolution * resolution);
            for j in 0..resolution {
                for i in 0..resolution {
                    pts.push(BasePoint::new2(i as f64 * h, j as f64 * h));
                }
            }
            pts
        }
    };
    Ok(OrbitGrid { points, resolution, provenance: Provenance::UniformLattice })
}

/// Forward orbit segment {p, T p, ..., T^{n-1} p} as a grid.
pub fn orbit_grid(dyn_: &BaseDynamics, start: &BasePoint, n: usize) -> Result<OrbitGrid> {
    if n < 2 {
        return Err(Error::ResolutionTooSmall(n));
    }
    let points = dyn_.orbit(start, 0, n as i64 - 1)?;
    Ok(OrbitGrid { points, resolution: n, provenance: Provenance::ForwardOrbit })
}

/// Closed coordinate box in X, with the 10% transition collar used by
/// in-support perturbations (the smooth bump is 1 on the inner region and 0
/// outside the box).
#[derive(Clone, Copy, Debug)]
pub struct SupportBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub dim: usize,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

impl SupportBox {
    pub fn new(lo: &[f64], hi: &[f64]) -> Result<SupportBox> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > 2 {
            return Err(Error::DimensionMismatch { expected: hi.len(), got: lo.len() });
        }
        let mut l = [0.0; 2];
        let mut h = [1.0; 2];
        for k in 0..lo.len() {
            if !(0.0..=1.0).contains(&lo[k]) || !(0.0..=1.0).contains(&hi[k]) || lo[k] >= hi[k] {
                return Err(Error::Invalid(format!(
                    "support box needs 0 <= lo < hi <= 1 per coordinate, got [{}, {}]",
                    lo[k], hi[k]
                )));
            }
            l[k] = lo[k];
            h[k] = hi[k];
        }
        Ok(SupportBox { lo: l, hi: h, dim: lo.len() })
    }

    /// Membership in the closed box.
    pub fn contains(&self, p: &BasePoint) -> bool {
        p.coords()
            .iter()
            .enumerate()
            .all(|(k, &x)| x >= self.lo[k] && x <= self.hi[k])
    }

    /// Membership with the box expanded by `margin` on every side.
    pub fn contains_with_margin(&self, p: &BasePoint, margin: f64) -> bool {
        p.coords()
            .iter()
            .enumerate()
            .all(|(k, &x)| x >= self.lo[k] - margin && x <= self.hi[k] + margin)
    }

    /// Smooth bump: 0 outside the box, 1 on the inner region past the 10%
    /// collar, cubic smoothstep on the collar.
    pub fn bump(&self, p: &BasePoint) -> f64 {
        let mut v = 1.0;
        for (k, &x) in p.coords().iter().enumerate() {
            let w = self.hi[k] - self.lo[k];
            let c = 0.1 * w;
            if x < self.lo[k] || x > self.hi[k] {
                return 0.0;
            }
            let from_lo = (x - self.lo[k]) / c;
            let from_hi = (self.hi[k] - x) / c;
            v *= smoothstep(from_lo) * smoothstep(from_hi);
        }
        v
    }

    /// Box shrunk toward its center by `fraction` of each side length.
    pub fn shrink(&self, fraction: f64) -> SupportBox {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for k in 0..self.dim {
            let mid = 0.5 * (self.lo[k] + self.hi[k]);
            let half = 0.5 * (self.hi[k] - self.lo[k]) * fraction;
            lo[k] = mid - half;
            hi[k] = mid + half;
        }
        SupportBox { lo, hi, dim: self.dim }
    }
}
