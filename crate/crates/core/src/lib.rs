//! Fractional Gagliardo seminorm densities of periodic two-slope profiles.
//!
//! The crate evaluates the period-averaged fractional seminorm of continuous
//! piecewise-affine profiles whose derivative takes the two values `1` and
//! `-Lambda`, with the negative-slope set quantized into intervals of length
//! `delta`. On top of the closed-form kernel it provides:
//!
//! - certified (value + rigorous truncation bound) energy evaluation,
//! - gap-space minimization (projected gradient descent and brute force),
//! - asymptotic sweeps of the energy density as `delta -> 0`,
//! - the generalized van der Merwe misfit-dislocation interface energy.

pub mod asymptotics;
pub mod energy;
pub mod kernel;
pub mod misfit;
pub mod numeric;
pub mod optimize;
pub mod profile;
mod quad;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
    #[error("kernel exponent s = {0} outside (0, 1)")]
    InvalidExponent(f64),
    #[error("segments overlap on a set of positive measure")]
    OverlappingSegments,
    #[error("touching segments with a value jump of {jump} require allow_jump and s < 1/2")]
    JumpNotAllowed { jump: f64 },
    #[error("point {0} is at (or too close to) a slope-jump point")]
    KinkPoint(f64),
    #[error("degenerate interval")]
    DegenerateInterval,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("gap configuration violates the simplex constraint: {0}")]
    SimplexViolation(String),
    #[error("requested tolerance unachievable within the period budget; best bound {best_bound}")]
    Certification { best_bound: f64 },
    #[error("quadrature oracle failed to converge; error estimate {err_est}")]
    OracleBudget { err_est: f64 },
    #[error("unsupported interval count L = {0} for this operation")]
    UnsupportedL(u32),
    #[error("normalizer sigma undefined for s = {0} (needs 1/2 <= s < 1)")]
    SigmaUndefined(f64),
    #[error("operation requires {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use asymptotics::{
    extremal_limits, mantissa_constant, ratio_sweep, sigma, ExtremalReport, SweepRow,
};
pub use energy::{energy, energy_breakdown, energy_s0, energy_s1, EnergyBreakdown, EnergyResult};
pub use kernel::{
    frac_laplacian_avg, frac_laplacian_point, quadrature_oracle, segment_pair_energy,
    self_segment_energy, KernelExponent, LaplacianValue, Segment,
};
pub use misfit::{alpha_min, misfit_solve, trace_energy_constant, MisfitInputs, MisfitReport};
pub use optimize::{
    brute_force, first_variation, minimize_gaps, verify_s0_minimizer, DescentOptions,
    MinimizeReport,
};
pub use profile::{GapConfiguration, ProblemParams, TwoSlopeProfile};
