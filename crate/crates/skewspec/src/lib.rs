//! A numerical laboratory for CMV and Jacobi operators whose coefficients
//! are sampled along generalized skew-shift orbits.
//!
//! The spectrum of such an operator is characterized dynamically: a spectral
//! parameter lies outside the spectrum exactly when the associated 2×2
//! transfer cocycle is uniformly hyperbolic. This crate
//!
//! * iterates the base dynamics (torus rotations and the skew-shift) and the
//!   Szegő / Jacobi cocycles over them ([`base`], [`cocycle`]),
//! * certifies or refutes uniform hyperbolicity at finite scale and extracts
//!   unstable direction fields ([`hyperbolicity`]),
//! * scans spectral axes and reports gaps, with finite truncations (Sturm
//!   bisection, paraorthogonal zeros) as an independent oracle ([`scan`],
//!   [`truncation`]),
//! * and implements two constructive gap-opening pipelines: the CMV
//!   snap-back through the S′ matrix class ([`snapback`]) and the local
//!   projection back into the Jacobi class ([`projection`]).

pub mod base;
pub mod cocycle;
pub mod error;
pub mod hyperbolicity;
pub mod mat2;
pub mod projection;
pub mod sampling;
pub mod scan;
pub mod snapback;
pub mod truncation;

pub use base::{make_grid, orbit_grid, BaseDynamics, BasePoint, OrbitGrid, SupportBox, GOLDEN_MEAN};
pub use cocycle::{jacobi_step, szego_sl2, szego_su11, Cocycle, Generator, UnitCirclePhase, UnitDiskPoint};
pub use error::{Error, Result};
pub use hyperbolicity::{angle_lift, certify, seek_uh_neighbor, unstable_section, UhCertificate, UhParams, Verdict};
pub use mat2::{to_sl2, JParams, Mat2, Mat2C, SPrimeParams};
pub use sampling::{Codomain, SamplingMap};
pub use scan::{circle_grid, gaps, line_grid, scan_cmv, scan_jacobi, GapReport, SpectralScan};
pub use snapback::{h_g, pipeline, AnnulusSpec, PerturbationOutcome};
pub use truncation::{truncation_cmv, truncation_jacobi, TruncationSpectrum};
