//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("grid resolution must be at least 2 (got {0})")]
    ResolutionTooSmall(usize),

    #[error("Verblunsky value lies outside the open unit disk (|alpha| = {0})")]
    AlphaOutOfDisk(f64),

    #[error("matrix is not SU(1,1): residual imaginary part {0:.3e} after conjugation")]
    NotSu11(f64),

    #[error("reflection radius must lie in [0, 1) (got {0})")]
    ROutOfRange(f64),

    #[error("Jacobi off-diagonal value must be positive (got {0})")]
    NonpositiveA(f64),

    #[error("b-block undefined: radius {0:.3e} is below 1e-9")]
    RZero(f64),

    #[error("unstable section did not converge: residual {residual:.3e} at m = {m}")]
    SectionNotConverged { residual: f64, m: u32 },

    #[error("cocycle is not certified uniformly hyperbolic (verdict {0})")]
    NotCertifiedUh(String),

    #[error("no consistent angle lift on this grid: {0}")]
    WindingObstruction(String),

    #[error("search exhausted after {tried} candidates: {what}")]
    NotFound { what: String, tried: usize },

    #[error("epsilon {eps} outside admissible window ({lo}, {hi})")]
    EpsilonOutOfWindow { eps: f64, lo: f64, hi: f64 },

    #[error("t = ({0}, {1}) lies off the annulus")]
    TOffAnnulus(f64, f64),

    #[error("sampling map radius falls to {0:.3e} on the closed support")]
    RBelowFloor(f64),

    #[error("projection pivot too small: |p| = {0:.3e} (trace-zero degeneracy)")]
    PivotTooSmall(f64),

    #[error("projection domain overlap: {0}")]
    DomainOverlap(String),

    #[error("B differs from A off the support region (max deviation {0:.3e})")]
    NotCAK(f64),

    #[error("disk-valued map reaches |f| = {0} (limit 1 - 1e-9)")]
    MapOutOfDisk(f64),

    #[error("real map falls below its positivity floor: min {min} < floor {floor}")]
    MapBelowFloor { min: f64, floor: f64 },

    #[error("paraorthogonal root count mismatch: expected {expected}, found {found}")]
    RootCountMismatch { expected: usize, found: usize },

    #[error("Szego recursion overflow")]
    RecursionOverflow,

    #[error("invalid annulus: require 0 < r1 <= r2 < 1 (got r1 = {0}, r2 = {1})")]
    InvalidAnnulus(f64, f64),

    #[error("sampling map format error: {0}")]
    MapFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Invalid(String),
}
