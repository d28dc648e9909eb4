//! TASEP on the circle and its periodic last-passage-percolation picture.
//!
//! The crate is organized around the dictionary between three views of the
//! same process:
//!
//! * [`ring_tasep`] — the particle system on `Z_N` with per-site Poisson
//!   clocks, canonical coupling, and the two-second-class-particle
//!   disagreement process;
//! * [`periodic_lpp`] — exponential last passage percolation on `Z²`, in an
//!   iid or `(N,k)`-periodic environment, with geodesics, corridors, and the
//!   discrete-geometry vocabulary (lines, segments, parallelograms);
//! * [`growth_bridge`] — the corner-growth interface that translates between
//!   the two, plus competition interfaces and the geodesic coalescence
//!   criterion.
//!
//! [`exact_mixing`] does exact finite-`N` total-variation analysis by
//! uniformization, and [`estimators`] packages the Monte Carlo experiments
//! (KPZ exponents, coalescence scaling, Gamma TV perturbation).

pub mod estimators;
pub mod exact_mixing;
pub mod growth_bridge;
pub mod periodic_lpp;
pub mod ring_tasep;
pub mod rng;

use thiserror::Error;

/// Errors shared across the crate's modules.
#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("invalid ring configuration: {0}")]
    InvalidConfig(String),
    #[error("ring sizes differ: {0} vs {1}")]
    MismatchedSize(usize, usize),
    #[error("particle counts differ: {0} vs {1}")]
    MismatchedCount(usize, usize),
    #[error("pair is not a two-site disagreement pair: {0}")]
    NotDisagreementPair(String),
    #[error("cells not ordered: ({0}, {1}) is not <= ({2}, {3})")]
    NotComparable(i64, i64, i64, i64),
    #[error("no comparable pair between the given cell sets")]
    NoComparablePair,
    #[error("environment is not periodic")]
    NotPeriodic,
    #[error("no admissible periodic translate of the target above the source")]
    NoAdmissibleTranslate,
    #[error("search range [{given_lo}, {given_hi}] truncates the admissible translate interval [{need_lo}, {need_hi}]")]
    TruncatedRange {
        given_lo: i64,
        given_hi: i64,
        need_lo: i64,
        need_hi: i64,
    },
    #[error("interface shape condition violated at index {0}")]
    ShapeCondition(i64),
    #[error("competition labels exhausted before the requested step (grown region too small)")]
    RegionExhausted,
    #[error("state space size {0} exceeds cap {1}")]
    CapExceeded(u64, u64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{frac:.1}% of runs censored at the cap (limit 5%)")]
    TooManyCensored { frac: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
