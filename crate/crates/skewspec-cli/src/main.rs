//! Command-line surface for reproducible spectral experiments: scans over a
//! spectral axis, single-point certification, truncation-vs-scan
//! comparisons, and the two gap-opening perturbation pipelines.
//!
//! Exit codes: 0 on success, 2 for NotFound / Undetermined outcomes (so
//! sweeps can tell "no gap found" from "bug"), 1 for hard errors.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use sha2::Digest;

use config::{Experiment, ModelKind, RawConfig};
use skewspec::base::make_grid;
use skewspec::cocycle::{Cocycle, UnitCirclePhase};
use skewspec::hyperbolicity::certify;
use skewspec::projection::{perturb_jacobi, JacobiModel};
use skewspec::scan::{circle_grid, gaps, line_grid, scan_cmv, scan_jacobi, Axis, SpectralScan};
use skewspec::snapback::pipeline;
use skewspec::truncation::{truncation_cmv, truncation_jacobi};
use skewspec::Verdict;

#[derive(Parser)]
#[command(name = "skewspec", about = "Spectra of CMV and Jacobi operators over skew-shifts via uniform hyperbolicity")]
struct Cli {
    /// Experiment config (flat key = value with [section] headers).
    #[arg(long, global = true, default_value = "experiment.cfg")]
    config: PathBuf,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap the worker-thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Spectral parameter for `certify` (energy E or phase psi).
    #[arg(long, global = true)]
    param: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Scan the spectral axis and report gaps.
    Scan,
    /// Certify uniform hyperbolicity at a single --param value.
    Certify,
    /// Run the gap-opening perturbation pipeline for the configured model.
    Perturb,
    /// Compare truncation spectra against the scan's non-UH set.
    Compare,
    /// Finite truncation spectra at the configured base points.
    Truncate,
    /// Dump the evaluation grid (or an orbit) as CSV.
    GridDump,
}

struct RunReport {
    command: String,
    config_echo: String,
    input_hashes: Vec<(String, String)>,
    outputs: Vec<PathBuf>,
    notes: Vec<String>,
    started: Instant,
}

impl RunReport {
    fn new(command: &str, exp: &Experiment) -> RunReport {
        let mut input_hashes = Vec::new();
        for path in &exp.raw.referenced_files {
            let digest = std::fs::read(path)
                .map(|bytes| {
                    let mut h = sha2::Sha256::new();
                    h.update(&bytes);
                    format!("sha256:{:x}", h.finalize())
                })
                .unwrap_or_else(|_| "unreadable".into());
            input_hashes.push((path.display().to_string(), digest));
        }
        RunReport {
            command: command.to_string(),
            config_echo: exp.raw.echo(),
            input_hashes,
            outputs: Vec::new(),
            notes: Vec::new(),
            started: Instant::now(),
        }
    }

    fn print(&self) {
        println!("command: {}", self.command);
        println!("--- config ---");
        print!("{}", self.config_echo);
        println!("--------------");
        for (path, hash) in &self.input_hashes {
            println!("input {path} {hash}");
        }
        for path in &self.outputs {
            println!("output {}", path.display());
        }
        for note in &self.notes {
            println!("note: {note}");
        }
        println!("wall time: {:.3?}", self.started.elapsed());
    }
}

fn write_out(report: &mut RunReport, dir: &Path, name: &str, content: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path)?;
    f.write_all(content.as_bytes())?;
    report.outputs.push(path.clone());
    Ok(path)
}

fn scan_csv(scan: &SpectralScan) -> String {
    let mut out = String::from("param,verdict,witness_n,min_norm\n");
    for (v, cert) in scan.values.iter().zip(&scan.verdicts) {
        out.push_str(&format!("{},{},{},{}\n", v, cert.verdict, cert.witness_n, cert.min_norm));
    }
    out
}

fn run_scan(exp: &Experiment) -> Result<(SpectralScan, Vec<String>), skewspec::Error> {
    let params = exp.uh_params();
    let mut notes = Vec::new();
    let scan = match exp.kind {
        ModelKind::Jacobi => {
            let grid = line_grid(exp.scan_min, exp.scan_max, exp.scan_step)?;
            scan_jacobi(
                exp.f_a.as_ref().unwrap(),
                exp.f_b.as_ref().unwrap(),
                &exp.dynamics,
                &grid,
                &params,
                exp.uh_resolution,
            )?
        }
        ModelKind::Cmv => {
            let grid = circle_grid(exp.scan_step)?;
            scan_cmv(exp.f.as_ref().unwrap(), &exp.dynamics, &grid, &params, exp.uh_resolution)?
        }
    };
    if scan.verdicts.iter().all(|c| c.verdict == Verdict::Uh) {
        notes.push(
            "all verdicts UH: the whole axis reads as resolvent, suspicious for a bounded self-adjoint/unitary model"
                .to_string(),
        );
    }
    Ok((scan, notes))
}

fn param_distance(axis: Axis, a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    match axis {
        Axis::Line => d,
        Axis::Circle => d.min(std::f64::consts::TAU - d),
    }
}

fn cmd_scan(exp: &Experiment, out: &Path) -> Result<i32, Box<dyn std::error::Error>> {
    let mut report = RunReport::new("scan", exp);
    let (scan, notes) = run_scan(exp)?;
    report.notes.extend(notes);
    let gap_report = gaps(&scan)?;
    write_out(&mut report, out, "scan.csv", &scan_csv(&scan))?;
    write_out(&mut report, out, "gaps.json", &serde_json::to_string_pretty(&gap_report)?)?;
    report.notes.push(format!(
        "{} gaps, {} undetermined grid points (counted as spectrum)",
        gap_report.gaps.len(),
        gap_report.undetermined_count
    ));
    report.print();
    Ok(0)
}

fn cmd_certify(exp: &Experiment, out: &Path, param: f64) -> Result<i32, Box<dyn std::error::Error>> {
    let mut report = RunReport::new("certify", exp);
    let grid = make_grid(&exp.dynamics, exp.uh_resolution)?;
    let cocycle = match exp.kind {
        ModelKind::Jacobi => Cocycle::jacobi(
            exp.dynamics.clone(),
            exp.f_a.clone().unwrap(),
            exp.f_b.clone().unwrap(),
            param,
        ),
        ModelKind::Cmv => Cocycle::szego(
            exp.dynamics.clone(),
            exp.f.clone().unwrap(),
            UnitCirclePhase::new(param),
        ),
    };
    let cert = certify(&cocycle, &grid, &exp.uh_params())?;
    write_out(&mut report, out, "certificate.json", &serde_json::to_string_pretty(&cert)?)?;
    report.notes.push(format!("verdict {} at param {param}", cert.verdict));
    report.print();
    Ok(if cert.verdict == Verdict::Undetermined { 2 } else { 0 })
}

fn cmd_perturb(exp: &Experiment, out: &Path) -> Result<i32, Box<dyn std::error::Error>> {
    let mut report = RunReport::new("perturb", exp);
    let grid = make_grid(&exp.dynamics, exp.uh_resolution)?;
    let params = exp.uh_params();
    match exp.kind {
        ModelKind::Cmv => {
            let z = UnitCirclePhase::new(exp.pipeline_param);
            match pipeline(
                exp.f.as_ref().unwrap(),
                &z,
                &exp.dynamics,
                &exp.support,
                exp.eps_target,
                exp.budget,
                exp.seed,
                &grid,
                &params,
            ) {
                Ok(outcome) => {
                    let beta_path = out.join("beta.map");
                    std::fs::create_dir_all(out)?;
                    outcome.beta.write_to(&beta_path)?;
                    report.outputs.push(beta_path);
                    #[derive(serde::Serialize)]
                    struct PerturbationJson<'a> {
                        distances: &'a skewspec::snapback::PerturbationDistances,
                        residuals: &'a skewspec::snapback::PerturbationResiduals,
                        certificates: Certs<'a>,
                        beta_map_file: &'a str,
                    }
                    #[derive(serde::Serialize)]
                    struct Certs<'a> {
                        #[serde(rename = "B")]
                        b: &'a skewspec::UhCertificate,
                        #[serde(rename = "B''")]
                        bpp: &'a skewspec::UhCertificate,
                    }
                    let json = PerturbationJson {
                        distances: &outcome.distances,
                        residuals: &outcome.residuals,
                        certificates: Certs { b: &outcome.cert_b, bpp: &outcome.cert_bpp },
                        beta_map_file: "beta.map",
                    };
                    write_out(&mut report, out, "perturbation.json", &serde_json::to_string_pretty(&json)?)?;
                    report.notes.extend(outcome.notes.clone());
                    if outcome.trivial {
                        report.notes.push("input already uniformly hyperbolic; distance 0".into());
                    }
                    report.print();
                    Ok(0)
                }
                Err(skewspec::Error::NotFound { what, tried }) => {
                    report.notes.push(format!("NotFound after {tried} retries: {what}"));
                    report.print();
                    Ok(2)
                }
                Err(e) => Err(e.into()),
            }
        }
        ModelKind::Jacobi => {
            report.notes.push(
                "projection-domain reading: the disjointness hypothesis is taken as \
                 K ∩ T(K) = ∅ and K ∩ T²(K) = ∅ (images of K, not of all of X), matching \
                 the use of K, T(K), T²(K) as pairwise disjoint sets in the construction"
                    .to_string(),
            );
            let model = JacobiModel {
                f_a: exp.f_a.clone().unwrap(),
                f_b: exp.f_b.clone().unwrap(),
                energy: exp.pipeline_param,
            };
            match perturb_jacobi(
                &model,
                &exp.dynamics,
                &exp.support,
                exp.eps_target,
                exp.budget,
                exp.seed,
                &grid,
                &params,
            ) {
                Ok(outcome) => {
                    let map_path = out.join("b_prime.map");
                    std::fs::create_dir_all(out)?;
                    outcome.f_b_prime.write_to(&map_path)?;
                    report.outputs.push(map_path);
                    #[derive(serde::Serialize)]
                    struct ProjectionJson {
                        residuals: ProjResiduals,
                        distance: f64,
                        #[serde(rename = "K_box")]
                        k_box: KBox,
                        #[serde(rename = "E")]
                        energy: f64,
                    }
                    #[derive(serde::Serialize)]
                    struct ProjResiduals {
                        triple: f64,
                        conjugacy: f64,
                    }
                    #[derive(serde::Serialize)]
                    struct KBox {
                        lo: Vec<f64>,
                        hi: Vec<f64>,
                    }
                    let dims = exp.dynamics.dim();
                    let json = ProjectionJson {
                        residuals: ProjResiduals {
                            triple: outcome.residual_triple,
                            conjugacy: outcome.residual_conjugacy,
                        },
                        distance: outcome.distance,
                        k_box: KBox {
                            lo: exp.support.lo[..dims].to_vec(),
                            hi: exp.support.hi[..dims].to_vec(),
                        },
                        energy: exp.pipeline_param,
                    };
                    write_out(&mut report, out, "projection.json", &serde_json::to_string_pretty(&json)?)?;
                    write_out(
                        &mut report,
                        out,
                        "certificate.json",
                        &serde_json::to_string_pretty(&outcome.certificate)?,
                    )?;
                    report.notes.extend(outcome.notes.clone());
                    report.print();
                    Ok(0)
                }
                Err(skewspec::Error::NotFound { what, tried }) => {
                    report.notes.push(format!("NotFound after {tried} retries: {what}"));
                    report.print();
                    Ok(2)
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn truncation_at(
    exp: &Experiment,
    base: &skewspec::BasePoint,
) -> Result<skewspec::TruncationSpectrum, skewspec::Error> {
    match exp.kind {
        ModelKind::Jacobi => truncation_jacobi(
            exp.f_a.as_ref().unwrap(),
            exp.f_b.as_ref().unwrap(),
            &exp.dynamics,
            base,
            exp.truncate_n,
        ),
        ModelKind::Cmv => truncation_cmv(
            exp.f.as_ref().unwrap(),
            &exp.dynamics,
            base,
            exp.truncate_n,
            exp.boundary_phase,
        ),
    }
}

fn cmd_truncate(exp: &Experiment, out: &Path) -> Result<i32, Box<dyn std::error::Error>> {
    let mut report = RunReport::new("truncate", exp);
    for (i, base) in exp.base_points.iter().enumerate() {
        let spec = truncation_at(exp, base)?;
        let mut content = String::new();
        for ev in &spec.eigenvalues {
            content.push_str(&format!("{ev}\n"));
        }
        write_out(&mut report, out, &format!("truncation_{i}.csv"), &content)?;
    }
    report.print();
    Ok(0)
}

fn cmd_compare(exp: &Experiment, out: &Path) -> Result<i32, Box<dyn std::error::Error>> {
    let mut report = RunReport::new("compare", exp);
    report.notes.push(format!(
        "bulk filter: an eigenvalue counts as bulk when every other base point's truncation \
         has an eigenvalue within delta = {}; non-bulk eigenvalues are finite-section boundary \
         states and are tabulated but not held against the scan",
        exp.compare_delta
    ));
    let (scan, notes) = run_scan(exp)?;
    report.notes.extend(notes);
    let non_uh = scan.non_uh_values();
    let spectra: Vec<Vec<f64>> = exp
        .base_points
        .iter()
        .map(|b| truncation_at(exp, b).map(|s| s.eigenvalues))
        .collect::<Result<_, _>>()?;

    let dist_to = |v: f64, set: &[f64]| -> f64 {
        set.iter().map(|s| param_distance(scan.axis, *s, v)).fold(f64::INFINITY, f64::min)
    };

    let mut csv = String::from("base_index,eigenvalue,bulk,distance_to_non_uh\n");
    let mut max_bulk_distance: f64 = 0.0;
    let mut bulk_count = 0usize;
    let mut boundary_count = 0usize;
    for (i, spec) in spectra.iter().enumerate() {
        for &ev in spec {
            let bulk = spectra
                .iter()
                .enumerate()
                .all(|(j, other)| j == i || dist_to(ev, other) <= exp.compare_delta);
            let d = dist_to(ev, &non_uh);
            if bulk {
                bulk_count += 1;
                max_bulk_distance = max_bulk_distance.max(d);
            } else {
                boundary_count += 1;
            }
            csv.push_str(&format!("{i},{ev},{},{d}\n", if bulk { 1 } else { 0 }));
        }
    }
    write_out(&mut report, out, "compare.csv", &csv)?;
    report.notes.push(format!(
        "bulk eigenvalues: {bulk_count}, boundary states excluded: {boundary_count}, \
         max bulk distance to non-UH set: {max_bulk_distance:e}"
    ));
    report.print();
    Ok(if max_bulk_distance <= exp.compare_delta { 0 } else { 2 })
}

fn cmd_grid_dump(exp: &Experiment, out: &Path) -> Result<i32, Box<dyn std::error::Error>> {
    let mut report = RunReport::new("grid-dump", exp);
    let kind = exp.raw.get("grid", "kind").unwrap_or("lattice");
    let grid = match kind {
        "lattice" => make_grid(&exp.dynamics, exp.uh_resolution)?,
        "orbit" => {
            let length = exp.raw.usize_or("grid", "length", 100)?;
            let start = exp
                .base_points
                .first()
                .copied()
                .unwrap_or(skewspec::BasePoint::new1(0.0));
            skewspec::orbit_grid(&exp.dynamics, &start, length)?
        }
        other => return Err(config::ConfigError(format!("unknown grid kind `{other}`")).into()),
    };
    let mut csv = String::from(if exp.dynamics.dim() == 1 { "index,x\n" } else { "index,x,y\n" });
    for (i, p) in grid.points.iter().enumerate() {
        let coords: Vec<String> = p.coords().iter().map(|c| format!("{c}")).collect();
        csv.push_str(&format!("{i},{}\n", coords.join(",")));
    }
    write_out(&mut report, out, "grid.csv", &csv)?;
    report.print();
    Ok(0)
}

fn run() -> Result<i32, Box<dyn std::error::Error>> {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().ok();
    }
    let raw = RawConfig::load(&cli.config)?;
    let config_dir = cli.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let exp = Experiment::resolve(raw, &config_dir, cli.seed)?;
    match cli.command {
        Command::Scan => cmd_scan(&exp, &cli.out),
        Command::Certify => {
            let param = cli.param.ok_or("certify needs --param VALUE")?;
            cmd_certify(&exp, &cli.out, param)
        }
        Command::Perturb => cmd_perturb(&exp, &cli.out),
        Command::Compare => cmd_compare(&exp, &cli.out),
        Command::Truncate => cmd_truncate(&exp, &cli.out),
        Command::GridDump => cmd_grid_dump(&exp, &cli.out),
    }
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
