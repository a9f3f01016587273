//! Continuous sampling maps X → 𝔻 (Verblunsky values) and X → ℝ (Jacobi
//! coefficients), represented either by a short Fourier series or by lattice
//! values with multilinear interpolation.
//!
//! # File format
//!
//! One header line, then one entry per line:
//!
//! ```text
//! codomain=disk dims=1 resolution=256
//! fourier 1 5e-1 0e0
//! ```
//!
//! Fourier lines are `fourier k1 [k2] re im`; grid lines are
//! `grid i [j] value_re [value_im]` (the imaginary part may be omitted for
//! real-valued maps). Floats are written with 17 significant digits, so a
//! write/read round trip is bit-exact. For real-codomain maps the Fourier
//! sum is evaluated and its real part taken; grid values interpolate on the
//! torus (wrapping around in every coordinate).

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::base::{BasePoint, SupportBox};
use crate::error::{Error, Result};

pub const DISK_MARGIN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Codomain {
    Disk,
    Real,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierTerm {
    pub freq: [i32; 2],
    pub coef: Complex64,
}

#[derive(Clone, Debug)]
pub enum Representation {
    Fourier(Vec<FourierTerm>),
    Grid { resolution: usize, values: Vec<Complex64> },
}

#[derive(Clone, Debug)]
pub struct SamplingMap {
    pub codomain: Codomain,
    pub dims: usize,
    pub representation: Representation,
    /// Positivity floor for real maps used as Jacobi off-diagonals.
    pub floor: Option<f64>,
    /// Lattice resolution used when validating sup/inf bounds.
    pub check_resolution: usize,
}

impl SamplingMap {
    pub fn fourier(codomain: Codomain, dims: usize, terms: Vec<FourierTerm>) -> SamplingMap {
        SamplingMap { codomain, dims, representation: Representation::Fourier(terms), floor: None, check_resolution: 256 }
    }

    pub fn grid(codomain: Codomain, dims: usize, resolution: usize, values: Vec<Complex64>) -> Result<SamplingMap> {
        let expect = if dims == 1 { resolution } else { resolution * resolution };
        if values.len() != expect {
            return Err(Error::MapFormat(format!(
                "grid map needs {expect} values for dims={dims} resolution={resolution}, got {}",
                values.len()
            )));
        }
        Ok(SamplingMap {
            codomain,
            dims,
            representation: Representation::Grid { resolution, values },
            floor: None,
            check_resolution: resolution,
        })
    }

    /// Constant map (a single zero-frequency Fourier term).
    pub fn constant(codomain: Codomain, dims: usize, value: Complex64) -> SamplingMap {
        SamplingMap::fourier(codomain, dims, vec![FourierTerm { freq: [0, 0], coef: value }])
    }

    pub fn with_floor(mut self, floor: f64) -> SamplingMap {
        self.floor = Some(floor);
        self
    }

    pub fn eval_complex(&self, p: &BasePoint) -> Complex64 {
        match &self.representation {
            Representation::Fourier(terms) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in terms {
                    let mut phase = 0.0;
                    for (k, &x) in p.coords().iter().enumerate() {
                        phase += t.freq[k] as f64 * x;
                    }
                    acc += t.coef * Complex64::from_polar(1.0, std::f64::consts::TAU * phase);
                }
                acc
            }
            Representation::Grid { resolution, values } => {
                let n = *resolution;
                let nf = n as f64;
                let idx = |i: usize, j: usize| -> Complex64 {
                    if self.dims == 1 {
                        values[i % n]
                    } else {
                        values[(j % n) * n + (i % n)]
                    }
                };
                let x = p.x() * nf;
                let i0 = (x.floor() as usize).min(n - 1);
                let fx = x - i0 as f64;
                if self.dims == 1 {
                    idx(i0, 0) * (1.0 - fx) + idx(i0 + 1, 0) * fx
                } else {
                    let y = p.y() * nf;
                    let j0 = (y.floor() as usize).min(n - 1);
                    let fy = y - j0 as f64;
                    idx(i0, j0) * (1.0 - fx) * (1.0 - fy)
                        + idx(i0 + 1, j0) * fx * (1.0 - fy)
                        + idx(i0, j0 + 1) * (1.0 - fx) * fy
                        + idx(i0 + 1, j0 + 1) * fx * fy
                }
            }
        }
    }

    /// Real-codomain evaluation (real part of the representation sum).
    pub fn eval_real(&self, p: &BasePoint) -> f64 {
        self.eval_complex(p).re
    }

    /// Modulus/argument of the disk value at `p`.
    pub fn eval_polar(&self, p: &BasePoint) -> (f64, f64) {
        let v = self.eval_complex(p);
        (v.norm(), v.arg())
    }

    fn check_points(&self) -> Vec<BasePoint> {
        let n = self.check_resolution.max(2);
        let h = 1.0 / n as f64;
        if self.dims == 1 {
            (0..n).map(|i| BasePoint::new1(i as f64 * h)).collect()
        } else {
            let mut pts = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    pts.push(BasePoint::new2(i as f64 * h, j as f64 * h));
                }
            }
            pts
        }
    }

    /// Check the codomain bounds on the validation lattice. Disk maps must
    /// stay at sup|f| ≤ 1 − 1e-9 — a violation is an error, never a silent
    /// clamp, because √(1−|f|²) degenerates there. Real maps with a floor
    /// must stay at or above it.
    pub fn validate(&self) -> Result<()> {
        match self.codomain {
            Codomain::Disk => {
                let mut sup: f64 = 0.0;
                for p in self.check_points() {
                    sup = sup.max(self.eval_complex(&p).norm());
                }
                if sup > 1.0 - DISK_MARGIN {
                    return Err(Error::MapOutOfDisk(sup));
                }
            }
            Codomain::Real => {
                if let Some(floor) = self.floor {
                    let mut inf = f64::INFINITY;
                    for p in self.check_points() {
                        inf = inf.min(self.eval_real(&p));
                    }
                    if inf < floor {
                        return Err(Error::MapBelowFloor { min: inf, floor });
                    }
                }
            }
        }
        Ok(())
    }

    /// The map plus `height`·bump(support), resampled onto a lattice of the
    /// given resolution. Used for the degenerate-start nudges.
    pub fn with_bump(&self, support: &SupportBox, height: Complex64, resolution: usize) -> Result<SamplingMap> {
        let n = resolution;
        let count = if self.dims == 1 { n } else { n * n };
        let mut values = Vec::with_capacity(count);
        let h = 1.0 / n as f64;
        for idx in 0..count {
            let p = if self.dims == 1 {
                BasePoint::new1((idx % n) as f64 * h)
            } else {
                BasePoint::new2((idx % n) as f64 * h, (idx / n) as f64 * h)
            };
            values.push(self.eval_complex(&p) + height * support.bump(&p));
        }
        let mut out = SamplingMap::grid(self.codomain, self.dims, n, values)?;
        out.floor = self.floor;
        Ok(out)
    }

    /// Serialize in the text format (17 significant digits per float).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let codomain = match self.codomain {
            Codomain::Disk => "disk",
            Codomain::Real => "real",
        };
        let resolution = match &self.representation {
            Representation::Fourier(_) => self.check_resolution,
            Representation::Grid { resolution, .. } => *resolution,
        };
        let _ = writeln!(s, "codomain={codomain} dims={} resolution={resolution}", self.dims);
        match &self.representation {
            Representation::Fourier(terms) => {
                for t in terms {
                    if self.dims == 1 {
                        let _ = writeln!(s, "fourier {} {:.16e} {:.16e}", t.freq[0], t.coef.re, t.coef.im);
                    } else {
                        let _ = writeln!(
                            s,
                            "fourier {} {} {:.16e} {:.16e}",
                            t.freq[0], t.freq[1], t.coef.re, t.coef.im
                        );
                    }
                }
            }
            Representation::Grid { resolution, values } => {
                for (idx, v) in values.iter().enumerate() {
                    let i = idx % resolution;
                    let j = idx / resolution;
                    match (self.dims, self.codomain) {
                        (1, Codomain::Real) => {
                            let _ = writeln!(s, "grid {i} {:.16e}", v.re);
                        }
                        (1, Codomain::Disk) => {
                            let _ = writeln!(s, "grid {i} {:.16e} {:.16e}", v.re, v.im);
                        }
                        (_, Codomain::Real) => {
                            let _ = writeln!(s, "grid {i} {j} {:.16e}", v.re);
                        }
                        (_, Codomain::Disk) => {
                            let _ = writeln!(s, "grid {i} {j} {:.16e} {:.16e}", v.re, v.im);
                        }
                    }
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<SamplingMap> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::MapFormat("empty file".into()))?;
        let mut codomain = None;
        let mut dims = None;
        let mut resolution = None;
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::MapFormat(format!("bad header field `{field}`")))?;
            match key {
                "codomain" => {
                    codomain = Some(match value {
                        "disk" => Codomain::Disk,
                        "real" => Codomain::Real,
                        other => return Err(Error::MapFormat(format!("unknown codomain `{other}`"))),
                    })
                }
                "dims" => dims = Some(value.parse::<usize>().map_err(|e| Error::MapFormat(e.to_string()))?),
                "resolution" => {
                    resolution = Some(value.parse::<usize>().map_err(|e| Error::MapFormat(e.to_string()))?)
                }
                other => return Err(Error::MapFormat(format!("unknown header key `{other}`"))),
            }
        }
        let codomain = codomain.ok_or_else(|| Error::MapFormat("header missing codomain".into()))?;
        let dims = dims.ok_or_else(|| Error::MapFormat("header missing dims".into()))?;
        let resolution = resolution.ok_or_else(|| Error::MapFormat("header missing resolution".into()))?;
        if dims == 0 || dims > 2 {
            return Err(Error::MapFormat(format!("dims must be 1 or 2, got {dims}")));
        }

        let mut fourier_terms = Vec::new();
        let mut grid_entries: Vec<(usize, usize, Complex64)> = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let kind = it.next().unwrap();
            let rest: Vec<&str> = it.collect();
            match kind {
                "fourier" => {
                    let want = if dims == 1 { 3 } else { 4 };
                    if rest.len() != want {
                        return Err(Error::MapFormat(format!("fourier line needs {want} fields: `{line}`")));
                    }
                    let mut freq = [0i32; 2];
                    for k in 0..dims {
                        freq[k] = rest[k].parse().map_err(|_| Error::MapFormat(format!("bad frequency in `{line}`")))?;
                    }
                    let re: f64 = rest[dims].parse().map_err(|_| Error::MapFormat(format!("bad float in `{line}`")))?;
                    let im: f64 = rest[dims + 1].parse().map_err(|_| Error::MapFormat(format!("bad float in `{line}`")))?;
                    fourier_terms.push(FourierTerm { freq, coef: Complex64::new(re, im) });
                }
                "grid" => {
                    let min = dims + 1;
                    if rest.len() < min || rest.len() > min + 1 {
                        return Err(Error::MapFormat(format!("grid line has wrong field count: `{line}`")));
                    }
                    let mut ij = [0usize; 2];
                    for k in 0..dims {
                        ij[k] = rest[k].parse().map_err(|_| Error::MapFormat(format!("bad index in `{line}`")))?;
                    }
                    let re: f64 = rest[dims].parse().map_err(|_| Error::MapFormat(format!("bad float in `{line}`")))?;
                    let im: f64 = if rest.len() == min + 1 {
                        rest[dims + 1].parse().map_err(|_| Error::MapFormat(format!("bad float in `{line}`")))?
                    } else {
                        0.0
                    };
                    grid_entries.push((ij[0], ij[1], Complex64::new(re, im)));
                }
                other => return Err(Error::MapFormat(format!("unknown entry kind `{other}`"))),
            }
        }

        if !fourier_terms.is_empty() && !grid_entries.is_empty() {
            return Err(Error::MapFormat("file mixes fourier and grid entries".into()));
        }
        if !fourier_terms.is_empty() {
            let mut m = SamplingMap::fourier(codomain, dims, fourier_terms);
            m.check_resolution = resolution.max(2);
            return Ok(m);
        }
        let count = if dims == 1 { resolution } else { resolution * resolution };
        if grid_entries.len() != count {
            return Err(Error::MapFormat(format!(
                "grid map needs {count} entries, found {}",
                grid_entries.len()
            )));
        }
        let mut values = vec![Complex64::new(0.0, 0.0); count];
        for (i, j, v) in grid_entries {
            let idx = if dims == 1 { i } else { j * resolution + i };
            if idx >= count {
                return Err(Error::MapFormat(format!("grid index ({i}, {j}) out of range")));
            }
            values[idx] = v;
        }
        SamplingMap::grid(codomain, dims, resolution, values)
    }

    pub fn write_to(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_from(path: &std::path::Path) -> Result<SamplingMap> {
        let text = std::fs::read_to_string(path)?;
        SamplingMap::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_map_evaluates_everywhere() {
        let m = SamplingMap::constant(Codomain::Disk, 1, Complex64::new(0.5, 0.0));
        let v = m.eval_complex(&BasePoint::new1(0.77));
        assert_eq!(v, Complex64::new(0.5, 0.0));
    }

    #[test]
    fn cosine_via_single_term_real_part() {
        let m = SamplingMap::fourier(
            Codomain::Real,
            1,
            vec![FourierTerm { freq: [1, 0], coef: Complex64::new(1.0, 0.0) }],
        );
        let x = 0.3;
        let got = m.eval_real(&BasePoint::new1(x));
        assert!((got - (std::f64::consts::TAU * x).cos()).abs() < 1e-15);
    }

    #[test]
    fn grid_interpolation_wraps() {
        let values = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(3.0, 0.0),
        ];
        let m = SamplingMap::grid(Codomain::Real, 1, 4, values).unwrap();
        assert!((m.eval_real(&BasePoint::new1(0.25)) - 1.0).abs() < 1e-15);
        assert!((m.eval_real(&BasePoint::new1(0.375)) - 1.5).abs() < 1e-15);
        // Between the last node and the wrap back to the first.
        assert!((m.eval_real(&BasePoint::new1(0.875)) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn disk_bound_is_checked_not_clamped() {
        let m = SamplingMap::constant(Codomain::Disk, 1, Complex64::new(1.0 - 1e-10, 0.0));
        assert!(matches!(m.validate(), Err(Error::MapOutOfDisk(_))));
        let ok = SamplingMap::constant(Codomain::Disk, 1, Complex64::new(0.9, 0.0));
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn floor_violation_detected() {
        let m = SamplingMap::constant(Codomain::Real, 1, Complex64::new(0.5, 0.0)).with_floor(0.6);
        assert!(matches!(m.validate(), Err(Error::MapBelowFloor { .. })));
    }

    #[test]
    fn text_round_trip_bit_exact() {
        let m = SamplingMap::fourier(
            Codomain::Disk,
            2,
            vec![
                FourierTerm { freq: [1, -2], coef: Complex64::new(0.123_456_789_012_345_67, -0.5) },
                FourierTerm { freq: [0, 0], coef: Complex64::new(0.25, 1.0 / 3.0) },
            ],
        );
        let text = m.to_text();
        let back = SamplingMap::from_text(&text).unwrap();
        let p = BasePoint::new2(0.37, 0.91);
        assert_eq!(m.eval_complex(&p), back.eval_complex(&p));
        assert_eq!(text, back.to_text());
    }
}
