//! Forward simulation and parameter estimation for a nonlinear
//! (induced-coherence) Michelson interferometer with a birefringent sample in
//! one arm.
//!
//! A pump passes twice through a down-conversion crystal; the signal/idler pair
//! amplitudes generated on the two passes interfere. Detected signal-photon
//! fringes depend on the phases of all three beams and on how the sample
//! transforms the idler (or signal) polarization. This crate provides:
//!
//! - [`jones`]: Jones-calculus description of the double-passed sample and the
//!   effective transmission/reflection coefficients it imposes on the probing
//!   beam.
//! - [`interference`]: the count-rate model — arm phases, the correlation
//!   envelope of the down-converted light, and the fringe formula for a sample
//!   in either arm.
//! - [`scan`]: mirror-translation fringe scans with optional Poisson counting
//!   noise, coherence-envelope profiles, and balanced-position search.
//! - [`fit`]: weighted damped Gauss-Newton sinusoid fitting (offset,
//!   visibility, phase) with covariance-based uncertainties, plus 1-D phase
//!   unwrapping.
//! - [`retardation`]: sample retardation from fringe phase shifts or
//!   visibility ratios, visibility-curve fitting, and transmission estimation.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the default `std`
//! feature enables the standard library for dependents that want it.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod linalg;
mod math;

pub mod fit;
pub mod interference;
pub mod jones;
pub mod retardation;
pub mod scan;

pub use fit::{
    fit_fringe, fit_fringe_points, fringe_model, fringe_model_gradient, unwrap_phases,
    visibility_minmax, wrap_phase, FitError, FitResult,
};
pub use interference::{
    arm_phases, correlation, fringe_visibility, signal_rate, signal_rate_idler_sample,
    signal_rate_signal_sample, time_delay, ArmGeometry, ArmPhases, ConfigError, CorrelationValue,
    InterferenceError, InterferometerConfig, SampleArm, SamplePlacement, SpectralModel,
    SpectralShape,
};
pub use jones::{
    double_pass_matrix, effective_idler_transmission, rotation_matrix, transmission_coefficients,
    waveplate_matrix, Complex64, JonesError, JonesMatrix, SampleSpec,
};
pub use retardation::{
    estimate_transmission, fit_visibility_curve, method1_phase_shift, method2_visibility_ratio,
    Branch, BranchChoice, Method, MethodError, RetardationEstimate, TransmissionEstimate,
    VisibilityCurve, VisibilityCurveFit,
};
pub use scan::{
    balance_search, envelope_profile, synthesize_scan, BalanceOptions, FringeScan, NoiseModel,
    ScanAxis, ScanError, ScanPlan,
};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
