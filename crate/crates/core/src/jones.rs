//! Jones calculus for a birefringent sample folded through twice by an arm
//! mirror.
//!
//! The sample is a generic retarder with single-pass retardation `δ` between
//! its extraordinary and ordinary axes, axis orientation `θ`, and (real)
//! amplitude transmission `τ_m`. A Michelson arm traverses it twice, so the
//! composite acting on the transverse polarization amplitudes is
//!
//! ```text
//! J' = τ_m² [[ t,  r ],
//!            [ -r̄, t̄ ]]      t = cos δ + i sin δ cos 2θ
//!                             r = i sin δ sin 2θ
//! ```
//!
//! For a horizontally polarized probe only the `t` element feeds the
//! interference; `|τ_m|²·|t|` is the effective transmission that scales the
//! fringe amplitude and `arg t` the phase it adds.

use core::f64::consts::PI;
use core::ops::Mul;

use num_complex::Complex;
use thiserror::Error;

use crate::math;

/// Complex amplitude carrier used throughout the crate.
pub type Complex64 = Complex<f64>;

/// Errors from constructing Jones-level values.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum JonesError {
    /// An input that must be finite was NaN or infinite.
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    /// Amplitude transmission outside `[0, 1]`.
    #[error("amplitude transmission must lie in [0, 1], got {0}")]
    TransmissionOutOfRange(f64),
}

/// 2×2 complex transform of a transverse polarization state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JonesMatrix {
    pub m00: Complex64,
    pub m01: Complex64,
    pub m10: Complex64,
    pub m11: Complex64,
}

impl JonesMatrix {
    pub const fn new(m00: Complex64, m01: Complex64, m10: Complex64, m11: Complex64) -> Self {
        Self { m00, m01, m10, m11 }
    }

    pub fn identity() -> Self {
        Self::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        )
    }

    /// Apply to a polarization amplitude vector `(ex, ey)`.
    pub fn apply(&self, e: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.m00 * e[0] + self.m01 * e[1],
            self.m10 * e[0] + self.m11 * e[1],
        ]
    }

    /// Multiply every entry by a complex scalar.
    pub fn scaled(&self, s: Complex64) -> Self {
        Self::new(self.m00 * s, self.m01 * s, self.m10 * s, self.m11 * s)
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::new(
            self.m00.conj(),
            self.m10.conj(),
            self.m01.conj(),
            self.m11.conj(),
        )
    }

    /// Largest entry-wise absolute difference from `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d = [
            self.m00 - other.m00,
            self.m01 - other.m01,
            self.m10 - other.m10,
            self.m11 - other.m11,
        ];
        let mut m = 0.0_f64;
        for c in d {
            m = m.max(c.norm());
        }
        m
    }
}

impl Mul for JonesMatrix {
    type Output = JonesMatrix;

    fn mul(self, rhs: JonesMatrix) -> JonesMatrix {
        JonesMatrix::new(
            self.m00 * rhs.m00 + self.m01 * rhs.m10,
            self.m00 * rhs.m01 + self.m01 * rhs.m11,
            self.m10 * rhs.m00 + self.m11 * rhs.m10,
            self.m10 * rhs.m01 + self.m11 * rhs.m11,
        )
    }
}

/// A birefringent sample placed in one interferometer arm.
///
/// `delta_single` and `theta` are stored as given (multi-order retarders are
/// legitimate inputs); the canonical accessors reduce them for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSpec {
    delta_single: f64,
    theta: f64,
    tau_m: f64,
    group_delay: f64,
}

impl SampleSpec {
    /// `delta_single`: single-pass retardation between the e- and o-axes,
    /// radians. `theta`: optical-axis orientation, radians. `tau_m`: real
    /// amplitude transmission in `[0, 1]`. `group_delay`: extra propagation
    /// delay per double pass, seconds.
    pub fn new(
        delta_single: f64,
        theta: f64,
        tau_m: f64,
        group_delay: f64,
    ) -> Result<Self, JonesError> {
        if !delta_single.is_finite() {
            return Err(JonesError::NonFinite("delta_single"));
        }
        if !theta.is_finite() {
            return Err(JonesError::NonFinite("theta"));
        }
        if !group_delay.is_finite() {
            return Err(JonesError::NonFinite("group_delay"));
        }
        if !tau_m.is_finite() {
            return Err(JonesError::NonFinite("tau_m"));
        }
        if !(0.0..=1.0).contains(&tau_m) {
            return Err(JonesError::TransmissionOutOfRange(tau_m));
        }
        Ok(Self {
            delta_single,
            theta,
            tau_m,
            group_delay,
        })
    }

    /// Same sample rotated to a new axis orientation.
    pub fn with_theta(&self, theta: f64) -> Result<Self, JonesError> {
        Self::new(self.delta_single, theta, self.tau_m, self.group_delay)
    }

    pub fn delta_single(&self) -> f64 {
        self.delta_single
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn tau_m(&self) -> f64 {
        self.tau_m
    }

    /// Intensity transmission `τ_m²`.
    pub fn tau_m_sq(&self) -> f64 {
        self.tau_m * self.tau_m
    }

    pub fn group_delay(&self) -> f64 {
        self.group_delay
    }

    /// Retardation reduced to the canonical reporting range `[0, π)`.
    ///
    /// Relative fringe observables determine the single-pass retardation only
    /// modulo π, so estimates are reported in this range.
    pub fn canonical_delta_single(&self) -> f64 {
        math::rem_euclid(self.delta_single, PI)
    }

    /// Axis orientation reduced to `[0, π)` (the transform is π-periodic in θ).
    pub fn canonical_theta(&self) -> f64 {
        math::rem_euclid(self.theta, PI)
    }
}

/// Coordinate rotation matrix `[[cos θ, -sin θ], [sin θ, cos θ]]`.
pub fn rotation_matrix(theta: f64) -> Result<JonesMatrix, JonesError> {
    if !theta.is_finite() {
        return Err(JonesError::NonFinite("theta"));
    }
    let (s, c) = (math::sin(theta), math::cos(theta));
    Ok(JonesMatrix::new(
        Complex64::new(c, 0.0),
        Complex64::new(-s, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(c, 0.0),
    ))
}

/// Single-pass retarder matrix `diag(τ_m e^{iδ/2}, τ_m e^{-iδ/2})` in its own
/// axis frame.
pub fn waveplate_matrix(delta_single: f64, tau_m: f64) -> Result<JonesMatrix, JonesError> {
    if !delta_single.is_finite() {
        return Err(JonesError::NonFinite("delta_single"));
    }
    if !tau_m.is_finite() {
        return Err(JonesError::NonFinite("tau_m"));
    }
    if !(0.0..=1.0).contains(&tau_m) {
        return Err(JonesError::TransmissionOutOfRange(tau_m));
    }
    let half = 0.5 * delta_single;
    Ok(JonesMatrix::new(
        Complex64::from_polar(tau_m, half),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::from_polar(tau_m, -half),
    ))
}

/// Complex amplitude transmission/reflection coefficients of the double-passed
/// sample: `t = cos δ + i sin δ cos 2θ`, `r = i sin δ sin 2θ`.
///
/// Inputs must be finite. With unit amplitude transmission, `|t|² + |r|² = 1`.
pub fn transmission_coefficients(delta_single: f64, theta: f64) -> (Complex64, Complex64) {
    let (sd, cd) = (math::sin(delta_single), math::cos(delta_single));
    let two_theta = 2.0 * theta;
    let t = Complex64::new(cd, sd * math::cos(two_theta));
    let r = Complex64::new(0.0, sd * math::sin(two_theta));
    (t, r)
}

/// Double-pass composite `τ_m² [[t, r], [-r̄, t̄]]`, equal to
/// `R(θ)·T_wp·T_wp·R(-θ)`.
pub fn double_pass_matrix(sample: &SampleSpec) -> JonesMatrix {
    let (t, r) = transmission_coefficients(sample.delta_single(), sample.theta());
    let scale = Complex64::new(sample.tau_m_sq(), 0.0);
    JonesMatrix::new(t, r, -r.conj(), t.conj()).scaled(scale)
}

/// Effective idler transmission entering the fringe amplitude:
/// `|τ_m|²·|t| = |τ_m|²·√(cos²δ + sin²δ cos²2θ)`.
pub fn effective_idler_transmission(sample: &SampleSpec) -> f64 {
    let (t, _) = transmission_coefficients(sample.delta_single(), sample.theta());
    sample.tau_m_sq() * t.norm()
}

/// Single-pass retardation `2π·Δn·L/λ` from birefringence `Δn`, physical
/// thickness `L`, and vacuum wavelength `λ` (both lengths in meters).
pub fn retardation_from_birefringence(delta_n: f64, thickness: f64, lambda: f64) -> f64 {
    2.0 * PI * delta_n * thickness / lambda
}
