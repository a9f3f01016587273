//! Flat `key = value` experiment configs with `[section]` headers.
//!
//! The format is deliberately minimal and diff-friendly: no nesting, no
//! quoting, `#` comments. See the repository README for the key reference.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use skewspec::base::{BaseDynamics, BasePoint, SupportBox};
use skewspec::sampling::{Codomain, SamplingMap};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config invalid: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
    /// Paths of referenced map files, for content hashing in run reports.
    pub referenced_files: Vec<PathBuf>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::from("");
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(ConfigError(format!("line {}: malformed section header", lineno + 1)));
                }
                current = line[1..line.len() - 1].trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError(format!("line {}: expected key = value", lineno + 1)));
            };
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(RawConfig { sections, referenced_files: Vec::new() })
    }

    pub fn load(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        RawConfig::parse(&text)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|s| s.get(key)).map(|s| s.as_str())
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key)
            .ok_or_else(|| ConfigError(format!("missing [{section}] {key}")))
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| ConfigError(format!("[{section}] {key}: bad float `{v}`"))),
        }
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        Ok(self.get_f64(section, key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse::<usize>()
                .map_err(|_| ConfigError(format!("[{section}] {key}: bad integer `{v}`"))),
        }
    }

    pub fn u64_or(&self, section: &str, key: &str, default: u64) -> Result<u64> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v
                .parse::<u64>()
                .map_err(|_| ConfigError(format!("[{section}] {key}: bad integer `{v}`"))),
        }
    }

    /// Echo in a canonical order for run reports.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (section, kv) in &self.sections {
            if !section.is_empty() {
                out.push_str(&format!("[{section}]\n"));
            }
            for (k, v) in kv {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Jacobi,
    Cmv,
}

/// Fully resolved experiment description.
pub struct Experiment {
    pub raw: RawConfig,
    pub kind: ModelKind,
    pub dynamics: BaseDynamics,
    pub f_a: Option<SamplingMap>,
    pub f_b: Option<SamplingMap>,
    pub f: Option<SamplingMap>,
    pub scan_min: f64,
    pub scan_max: f64,
    pub scan_step: f64,
    pub uh_resolution: usize,
    pub uh_n_max: u32,
    pub uh_gamma: f64,
    pub truncate_n: usize,
    pub boundary_phase: f64,
    pub base_points: Vec<BasePoint>,
    pub support: SupportBox,
    pub eps_target: f64,
    pub budget: usize,
    pub seed: u64,
    pub pipeline_param: f64,
    pub compare_delta: f64,
}

fn parse_point(dim: usize, text: &str) -> Result<BasePoint> {
    let coords: Vec<f64> = text
        .split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|_| ConfigError(format!("bad coordinate `{c}`"))))
        .collect::<Result<_>>()?;
    if coords.len() != dim {
        return Err(ConfigError(format!(
            "point `{text}` has {} coordinates, dynamics needs {dim}",
            coords.len()
        )));
    }
    BasePoint::from_slice(&coords).map_err(|e| ConfigError(e.to_string()))
}

fn parse_map(
    spec: &str,
    codomain: Codomain,
    dims: usize,
    base_dir: &Path,
    referenced: &mut Vec<PathBuf>,
) -> Result<SamplingMap> {
    if let Some(rest) = spec.strip_prefix("const:") {
        let parts: Vec<&str> = rest.split(',').collect();
        let re: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| ConfigError(format!("bad constant `{rest}`")))?;
        let im: f64 = if parts.len() > 1 {
            parts[1].trim().parse().map_err(|_| ConfigError(format!("bad constant `{rest}`")))?
        } else {
            0.0
        };
        return Ok(SamplingMap::constant(codomain, dims, Complex64::new(re, im)));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let full = if Path::new(path).is_absolute() {
            PathBuf::from(path)
        } else {
            base_dir.join(path)
        };
        referenced.push(full.clone());
        let map = SamplingMap::read_from(&full)
            .map_err(|e| ConfigError(format!("map file {}: {e}", full.display())))?;
        if map.codomain != codomain {
            return Err(ConfigError(format!("map {} has the wrong codomain", full.display())));
        }
        if map.dims != dims {
            return Err(ConfigError(format!("map {} has dims {} but dynamics needs {dims}", full.display(), map.dims)));
        }
        return Ok(map);
    }
    Err(ConfigError(format!("map spec `{spec}` must start with const: or file:")))
}

impl Experiment {
    pub fn resolve(mut raw: RawConfig, config_dir: &Path, seed_override: Option<u64>) -> Result<Experiment> {
        let kind = match raw.require("model", "kind")? {
            "jacobi" => ModelKind::Jacobi,
            "cmv" => ModelKind::Cmv,
            other => return Err(ConfigError(format!("unknown model kind `{other}`"))),
        };
        let dynamics = match raw.require("model", "dynamics")? {
            "rotation" => {
                let a1 = raw.f64_or("model", "alpha", skewspec::GOLDEN_MEAN)?;
                match raw.get_f64("model", "alpha2")? {
                    Some(a2) => BaseDynamics::rotation(&[a1, a2]),
                    None => BaseDynamics::rotation(&[a1]),
                }
                .map_err(|e| ConfigError(e.to_string()))?
            }
            "skewshift" => BaseDynamics::skew_shift(raw.f64_or("model", "alpha", skewspec::GOLDEN_MEAN)?),
            other => return Err(ConfigError(format!("unknown dynamics `{other}`"))),
        };
        let dims = dynamics.dim();

        let mut referenced = Vec::new();
        let fa_floor = raw.f64_or("model", "fa_floor", 1e-6)?;
        let (f_a, f_b, f) = match kind {
            ModelKind::Jacobi => {
                let f_a = parse_map(raw.require("model", "fa")?, Codomain::Real, dims, config_dir, &mut referenced)?
                    .with_floor(fa_floor);
                f_a.validate().map_err(|e| ConfigError(e.to_string()))?;
                let f_b = parse_map(raw.require("model", "fb")?, Codomain::Real, dims, config_dir, &mut referenced)?;
                (Some(f_a), Some(f_b), None)
            }
            ModelKind::Cmv => {
                let f = parse_map(raw.require("model", "f")?, Codomain::Disk, dims, config_dir, &mut referenced)?;
                f.validate().map_err(|e| ConfigError(e.to_string()))?;
                (None, None, Some(f))
            }
        };
        raw.referenced_files = referenced;

        let scan_step = raw.f64_or("scan", "step", 1e-3)?;
        if scan_step <= 0.0 {
            return Err(ConfigError(format!("[scan] step must be positive, got {scan_step}")));
        }
        let scan_min = raw.f64_or("scan", "min", -3.0)?;
        let scan_max = raw.f64_or("scan", "max", 3.0)?;
        if kind == ModelKind::Jacobi && scan_min >= scan_max {
            return Err(ConfigError(format!("[scan] needs min < max, got {scan_min} >= {scan_max}")));
        }

        let uh_resolution = raw.usize_or("uh", "resolution", 64)?;
        let uh_n_max = raw.usize_or("uh", "n_max", 256)? as u32;
        let uh_gamma = raw.f64_or("uh", "gamma", 10.0)?;
        if uh_gamma <= 1.0 {
            return Err(ConfigError(format!("[uh] gamma must exceed 1, got {uh_gamma}")));
        }

        let truncate_n = raw.usize_or("truncate", "n", 200)?;
        let boundary_phase = raw.f64_or("truncate", "boundary_phase", 0.0)?;
        let base_points = match raw.get("truncate", "base_points") {
            None => vec![BasePoint::from_slice(&vec![0.0; dims]).unwrap()],
            Some(spec) => spec
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(|s| parse_point(dims, s.trim()))
                .collect::<Result<_>>()?,
        };

        let parse_bound = |key: &str, default: f64| -> Result<Vec<f64>> {
            match raw.get("pipeline", key) {
                None => Ok(vec![default; dims]),
                Some(v) => {
                    let coords: Vec<f64> = v
                        .split(',')
                        .map(|c| c.trim().parse::<f64>().map_err(|_| ConfigError(format!("bad bound `{c}`"))))
                        .collect::<Result<_>>()?;
                    if coords.len() == dims {
                        Ok(coords)
                    } else {
                        Err(ConfigError(format!("[pipeline] {key} needs {dims} coordinates")))
                    }
                }
            }
        };
        let lo = parse_bound("support_lo", 0.02)?;
        let hi = parse_bound("support_hi", 0.98)?;
        let support = SupportBox::new(&lo, &hi).map_err(|e| ConfigError(e.to_string()))?;

        let eps_target = raw.f64_or("pipeline", "eps_target", 0.1)?;
        let budget = raw.usize_or("pipeline", "budget", 120)?;
        let seed = seed_override.unwrap_or(raw.u64_or("pipeline", "seed", 1)?);
        let pipeline_param = raw.f64_or("pipeline", "param", 0.0)?;
        let compare_delta = raw.f64_or("compare", "delta", 1e-2)?;

        Ok(Experiment {
            raw,
            kind,
            dynamics,
            f_a,
            f_b,
            f,
            scan_min,
            scan_max,
            scan_step,
            uh_resolution,
            uh_n_max,
            uh_gamma,
            truncate_n,
            boundary_phase,
            base_points,
            support,
            eps_target,
            budget,
            seed,
            pipeline_param,
            compare_delta,
        })
    }

    pub fn uh_params(&self) -> skewspec::UhParams {
        skewspec::UhParams {
            n_max: self.uh_n_max,
            gamma: self.uh_gamma,
            ..skewspec::UhParams::default()
        }
    }
}
