//! Signal-photon count-rate model for the double-pass interferometer.
//!
//! Two down-conversion amplitudes (pump first pass / second pass) interfere in
//! the detected signal beam. The fringe term carries the pump, signal, and
//! idler arm phases, the normalized correlation envelope `μ(Δt)` of the
//! down-converted light, and — when a sample sits in one arm — the effective
//! transmission `τ_m²·|t|` and phase `arg t` from [`crate::jones`].
//!
//! Arm phases follow the double-pass convention `φ = 4π·Δz/λ + φ⁰`, so a
//! fringe period corresponds to a mirror displacement of `λ/2`.

use core::f64::consts::PI;

use thiserror::Error;

use crate::jones::{transmission_coefficients, SampleSpec};
use crate::math;
use crate::SPEED_OF_LIGHT;

/// Relative slack allowed on `1/λ_p = 1/λ_s + 1/λ_i` at construction.
const ENERGY_CONSERVATION_REL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
    #[error(
        "wavelengths violate energy conservation: 1/lambda_pump deviates from \
         1/lambda_signal + 1/lambda_idler by a relative {0:.2e} (tolerance 1e-3)"
    )]
    EnergyConservation(f64),
}

/// Spectral density shape of the down-converted light seen by the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralShape {
    /// Gaussian `|F(Ω)|²` of standard deviation `bandwidth`.
    Gaussian,
    /// `sinc²(Ω/bandwidth)`; its envelope is triangular with support
    /// `|Δt| ≤ 2/bandwidth`.
    Sinc2,
}

/// Detected spectrum model; `μ(Δt)` is its normalized Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralModel {
    pub shape: SpectralShape,
    /// Center detuning Ω₀ (rad/s) relative to the nominal signal frequency.
    pub center_detuning: f64,
    /// Characteristic width ΔΩ (rad/s) of `|F(Ω)|²`. Must be positive.
    pub bandwidth: f64,
}

impl SpectralModel {
    pub fn new(
        shape: SpectralShape,
        center_detuning: f64,
        bandwidth: f64,
    ) -> Result<Self, ConfigError> {
        if !center_detuning.is_finite() {
            return Err(ConfigError::NonFinite("center_detuning"));
        }
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(ConfigError::NonPositive("bandwidth"));
        }
        Ok(Self {
            shape,
            center_detuning,
            bandwidth,
        })
    }

    /// Gaussian model with bandwidth set by a bandpass filter of half-width
    /// `delta_lambda` (meters) centered on `lambda` (meters):
    /// `ΔΩ = 2πc·Δλ/λ²`.
    pub fn from_filter(lambda: f64, delta_lambda: f64) -> Result<Self, ConfigError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(ConfigError::NonPositive("lambda"));
        }
        if !(delta_lambda.is_finite() && delta_lambda > 0.0) {
            return Err(ConfigError::NonPositive("delta_lambda"));
        }
        let bandwidth = 2.0 * PI * SPEED_OF_LIGHT * delta_lambda / (lambda * lambda);
        Self::new(SpectralShape::Gaussian, 0.0, bandwidth)
    }

    /// Delay beyond which the envelope magnitude is negligible (< ~1e-9 for
    /// the gaussian, exactly zero for sinc²).
    pub fn coherence_time(&self) -> f64 {
        match self.shape {
            SpectralShape::Gaussian => 6.5 / self.bandwidth,
            SpectralShape::Sinc2 => 2.0 / self.bandwidth,
        }
    }
}

/// Instrument configuration: vacuum wavelengths, detected spectrum, and count
/// scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerConfig {
    lambda_pump: f64,
    lambda_signal: f64,
    lambda_idler: f64,
    pub spectral: SpectralModel,
    /// Count-rate scale (counts/s); absorbs conversion and detection
    /// efficiency. The fringe offset rate is `2·rate_scale`.
    pub rate_scale: f64,
    /// Integration time per scan point, seconds.
    pub dwell: f64,
    /// Constant dark count rate added to every point (counts/s).
    pub dark_rate: f64,
}

impl InterferometerConfig {
    pub fn new(
        lambda_pump: f64,
        lambda_signal: f64,
        lambda_idler: f64,
        spectral: SpectralModel,
        rate_scale: f64,
        dwell: f64,
    ) -> Result<Self, ConfigError> {
        for (v, name) in [
            (lambda_pump, "lambda_pump"),
            (lambda_signal, "lambda_signal"),
            (lambda_idler, "lambda_idler"),
            (rate_scale, "rate_scale"),
            (dwell, "dwell"),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::NonPositive(name));
            }
        }
        let lhs = 1.0 / lambda_pump;
        let rhs = 1.0 / lambda_signal + 1.0 / lambda_idler;
        let rel = math::abs(lhs - rhs) / lhs;
        if rel > ENERGY_CONSERVATION_REL_TOL {
            return Err(ConfigError::EnergyConservation(rel));
        }
        Ok(Self {
            lambda_pump,
            lambda_signal,
            lambda_idler,
            spectral,
            rate_scale,
            dwell,
            dark_rate: 0.0,
        })
    }

    pub fn with_dark_rate(mut self, dark_rate: f64) -> Result<Self, ConfigError> {
        if !(dark_rate.is_finite() && dark_rate >= 0.0) {
            return Err(ConfigError::NonPositive("dark_rate"));
        }
        self.dark_rate = dark_rate;
        Ok(self)
    }

    pub fn lambda_pump(&self) -> f64 {
        self.lambda_pump
    }

    pub fn lambda_signal(&self) -> f64 {
        self.lambda_signal
    }

    pub fn lambda_idler(&self) -> f64 {
        self.lambda_idler
    }
}

impl Default for InterferometerConfig {
    /// 532 nm pump with signal/idler at 809.2 nm / 1553 nm, a gaussian
    /// spectrum set by a 809.2 ± 0.6 nm bandpass filter, and a count level
    /// tuned so the stock noisy estimators resolve retardation to a few
    /// thousandths of π (see crate README).
    fn default() -> Self {
        let lambda_signal = 809.2e-9;
        let spectral = SpectralModel::from_filter(lambda_signal, 0.6e-9)
            .expect("default spectral model is valid");
        Self::new(532.0e-9, lambda_signal, 1553.0e-9, spectral, 5.0e5, 0.2)
            .expect("default configuration is valid")
    }
}

/// Mirror displacements from the balanced position, plus static per-arm phase
/// offsets (alignment state; all default to zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmGeometry {
    pub dz_pump: f64,
    pub dz_signal: f64,
    pub dz_idler: f64,
    pub phase_offset_pump: f64,
    pub phase_offset_signal: f64,
    pub phase_offset_idler: f64,
}

impl ArmGeometry {
    pub fn balanced() -> Self {
        Self {
            dz_pump: 0.0,
            dz_signal: 0.0,
            dz_idler: 0.0,
            phase_offset_pump: 0.0,
            phase_offset_signal: 0.0,
            phase_offset_idler: 0.0,
        }
    }

    pub fn with_dz(dz_pump: f64, dz_signal: f64, dz_idler: f64) -> Self {
        Self {
            dz_pump,
            dz_signal,
            dz_idler,
            ..Self::balanced()
        }
    }
}

/// Double-pass arm phases `φ_x = 4π·dz_x/λ_x + φ_x⁰`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPhases {
    pub pump: f64,
    pub signal: f64,
    pub idler: f64,
}

pub fn arm_phases(geometry: &ArmGeometry, config: &InterferometerConfig) -> ArmPhases {
    let four_pi = 4.0 * PI;
    ArmPhases {
        pump: four_pi * geometry.dz_pump / config.lambda_pump() + geometry.phase_offset_pump,
        signal: four_pi * geometry.dz_signal / config.lambda_signal()
            + geometry.phase_offset_signal,
        idler: four_pi * geometry.dz_idler / config.lambda_idler() + geometry.phase_offset_idler,
    }
}

/// Where the sample sits, if anywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplePlacement {
    Empty,
    InIdlerArm(SampleSpec),
    InSignalArm(SampleSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleArm {
    Idler,
    Signal,
}

impl SamplePlacement {
    pub fn spec(&self) -> Option<&SampleSpec> {
        match self {
            SamplePlacement::Empty => None,
            SamplePlacement::InIdlerArm(s) | SamplePlacement::InSignalArm(s) => Some(s),
        }
    }

    pub fn arm(&self) -> Option<SampleArm> {
        match self {
            SamplePlacement::Empty => None,
            SamplePlacement::InIdlerArm(_) => Some(SampleArm::Idler),
            SamplePlacement::InSignalArm(_) => Some(SampleArm::Signal),
        }
    }
}

/// Value of the correlation envelope at one delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationValue {
    /// `|μ(Δt)|`, in `[0, 1]` with `|μ(0)| = 1`.
    pub magnitude: f64,
    /// `arg μ(Δt)`; zero for symmetric spectra centered at Ω = 0.
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterferenceError {
    #[error("non-finite time delay")]
    NonFiniteDelay,
}

/// Normalized correlation envelope `μ(Δt) = ∫|F(Ω)|² e^{-iΩΔt} dΩ`, in closed
/// form for both spectral shapes.
pub fn correlation(
    delta_t: f64,
    spectral: &SpectralModel,
) -> Result<CorrelationValue, InterferenceError> {
    if !delta_t.is_finite() {
        return Err(InterferenceError::NonFiniteDelay);
    }
    let x = spectral.bandwidth * delta_t;
    let magnitude = match spectral.shape {
        SpectralShape::Gaussian => math::exp(-0.5 * x * x),
        SpectralShape::Sinc2 => (1.0 - 0.5 * math::abs(x)).max(0.0),
    };
    Ok(CorrelationValue {
        magnitude,
        phase: -spectral.center_detuning * delta_t,
    })
}

/// Signal-minus-idler propagation-time delay:
/// `Δt = 2(dz_s - dz_i)/c + g_signal - g_idler`,
/// where `g` is the sample group delay in the stated arm.
///
/// The balanced condition `Δt = 0` with a sample of group delay `g` in the
/// idler arm is therefore restored at `dz_s = dz_i + c·g/2`.
pub fn time_delay(geometry: &ArmGeometry, placement: &SamplePlacement) -> f64 {
    let mut dt = 2.0 * (geometry.dz_signal - geometry.dz_idler) / SPEED_OF_LIGHT;
    match placement {
        SamplePlacement::Empty => {}
        SamplePlacement::InIdlerArm(s) => dt -= s.group_delay(),
        SamplePlacement::InSignalArm(s) => dt += s.group_delay(),
    }
    dt
}

/// Fringe visibility factor `τ_m²·|t|·|μ(Δt)|` for the given placement
/// (just `|μ|` with no sample).
pub fn fringe_visibility(placement: &SamplePlacement, delta_t: f64, spectral: &SpectralModel) -> f64 {
    let mu = match correlation(delta_t, spectral) {
        Ok(v) => v.magnitude,
        Err(_) => return 0.0,
    };
    match placement.spec() {
        None => mu,
        Some(s) => {
            let (t, _) = transmission_coefficients(s.delta_single(), s.theta());
            s.tau_m_sq() * t.norm() * mu
        }
    }
}

/// Count rate with the sample in the idler arm:
/// `P = 2·rate_scale·[1 + τ_m²·|t|·|μ|·cos(φ_p - φ_s - φ_i + arg μ + arg t)]`.
pub fn signal_rate_idler_sample(
    geometry: &ArmGeometry,
    config: &InterferometerConfig,
    sample: &SampleSpec,
) -> f64 {
    rate_with(geometry, config, &SamplePlacement::InIdlerArm(*sample))
}

/// Count rate with the sample in the signal arm:
/// `P = 2·rate_scale·[1 + τ_m²·|t_s|·|μ|·cos(φ_s + φ_i - φ_p + arg μ + arg t_s)]`.
///
/// The reflected (cross-polarized) component never interferes; the offset is
/// held at twice the single-pass rate and loss enters the fringe amplitude
/// only, so visibility ratios estimate `τ_m²` uniformly for either arm.
pub fn signal_rate_signal_sample(
    geometry: &ArmGeometry,
    config: &InterferometerConfig,
    sample: &SampleSpec,
) -> f64 {
    rate_with(geometry, config, &SamplePlacement::InSignalArm(*sample))
}

/// Count rate for any placement; dispatches on where the sample sits.
pub fn signal_rate(
    geometry: &ArmGeometry,
    config: &InterferometerConfig,
    placement: &SamplePlacement,
) -> f64 {
    rate_with(geometry, config, placement)
}

fn rate_with(
    geometry: &ArmGeometry,
    config: &InterferometerConfig,
    placement: &SamplePlacement,
) -> f64 {
    let phases = arm_phases(geometry, config);
    let dt = time_delay(geometry, placement);
    let mu = correlation(dt, &config.spectral).expect("finite geometry yields finite delay");

    let (weight, sample_arg, phase_sign) = match placement {
        SamplePlacement::Empty => (1.0, 0.0, 1.0),
        SamplePlacement::InIdlerArm(s) => {
            let (t, _) = transmission_coefficients(s.delta_single(), s.theta());
            (s.tau_m_sq() * t.norm(), t.arg(), 1.0)
        }
        SamplePlacement::InSignalArm(s) => {
            let (t, _) = transmission_coefficients(s.delta_single(), s.theta());
            (s.tau_m_sq() * t.norm(), t.arg(), -1.0)
        }
    };
    // Sample in the signal arm flips the sign of every propagation phase in
    // the fringe argument relative to the idler-arm expression.
    let total = phase_sign * (phases.pump - phases.signal - phases.idler) + mu.phase + sample_arg;
    2.0 * config.rate_scale * (1.0 + weight * mu.magnitude * math::cos(total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn gaussian(bandwidth: f64) -> SpectralModel {
        SpectralModel::new(SpectralShape::Gaussian, 0.0, bandwidth).unwrap()
    }

    #[test]
    fn config_default_is_consistent() {
        let cfg = InterferometerConfig::default();
        assert_abs_diff_eq!(cfg.lambda_signal(), 809.2e-9, epsilon = 1e-15);
        // Bandwidth from the 0.6 nm filter half-width.
        assert_abs_diff_eq!(cfg.spectral.bandwidth, 1.72597e12, epsilon = 1e8);
    }

    #[test]
    fn config_rejects_energy_violation() {
        let spectral = gaussian(1e12);
        let err = InterferometerConfig::new(500e-9, 809.2e-9, 1553e-9, spectral, 1e5, 0.1);
        assert!(matches!(err, Err(ConfigError::EnergyConservation(_))));
        assert!(matches!(
            InterferometerConfig::new(532e-9, -809.2e-9, 1553e-9, spectral, 1e5, 0.1),
            Err(ConfigError::NonPositive("lambda_signal"))
        ));
    }

    #[test]
    fn correlation_at_zero_delay() {
        for shape in [SpectralShape::Gaussian, SpectralShape::Sinc2] {
            let sp = SpectralModel::new(shape, 0.0, 2.0e12).unwrap();
            let mu = correlation(0.0, &sp).unwrap();
            assert_abs_diff_eq!(mu.magnitude, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(mu.phase, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn correlation_gaussian_closed_form() {
        // Oracle: |μ| = exp(-(ΔΩ·Δt)²/2).
        let bw = 1.7e12;
        let sp = gaussian(bw);
        for x in [0.3, 1.0, 2.5] {
            let dt = x / bw;
            let mu = correlation(dt, &sp).unwrap();
            assert_abs_diff_eq!(mu.magnitude, (-0.5 * x * x).exp(), epsilon = 1e-15);
        }
        let far = correlation(10.0 / bw, &sp).unwrap();
        assert!(far.magnitude < 1e-6);
    }

    #[test]
    fn correlation_sinc2_matches_quadrature_oracle() {
        // Oracle: Simpson quadrature of ∫ sinc²(x)·cos(xτ) dx, normalized at
        // τ=0. The 1/x² tail truncated at x=2000 limits the oracle itself to
        // a few parts in 1e4.
        fn oracle(tau: f64) -> f64 {
            let l = 2000.0;
            let n = 1_200_000usize; // even
            let h = l / n as f64;
            let f = |x: f64| {
                let s = if x.abs() < 1e-12 { 1.0 } else { x.sin() / x };
                s * s * (x * tau).cos()
            };
            let mut acc = f(0.0) + f(l);
            for k in 1..n {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(k as f64 * h);
            }
            acc * h / 3.0
        }
        let norm = oracle(0.0);
        let bw = 2.0e12;
        let sp = SpectralModel::new(SpectralShape::Sinc2, 0.0, bw).unwrap();
        for tau in [0.0, 0.5, 1.0, 1.9, 2.5, 4.0] {
            let expect = oracle(tau) / norm;
            let got = correlation(tau / bw, &sp).unwrap().magnitude;
            assert_abs_diff_eq!(got, expect.max(0.0), epsilon = 2e-3);
        }
        // Strictly zero beyond the triangle support.
        assert_eq!(correlation(2.0001 / bw, &sp).unwrap().magnitude, 0.0);
    }

    #[test]
    fn correlation_rejects_non_finite_delay() {
        let sp = gaussian(1e12);
        assert!(correlation(f64::NAN, &sp).is_err());
    }

    #[test]
    fn center_detuning_sets_phase() {
        let sp = SpectralModel::new(SpectralShape::Gaussian, 3.0e11, 1e12).unwrap();
        let dt = 2.0e-13;
        let mu = correlation(dt, &sp).unwrap();
        assert_abs_diff_eq!(mu.phase, -3.0e11 * dt, epsilon = 1e-12);
    }

    #[test]
    fn arm_phases_examples() {
        let cfg = InterferometerConfig::default();
        let p = arm_phases(&ArmGeometry::balanced(), &cfg);
        assert_eq!((p.pump, p.signal, p.idler), (0.0, 0.0, 0.0));

        // Quarter-wavelength displacement is a half-period (π) under double pass.
        let mut g = ArmGeometry::balanced();
        g.dz_idler = cfg.lambda_idler() / 4.0;
        assert_abs_diff_eq!(arm_phases(&g, &cfg).idler, PI, epsilon = 1e-12);

        // 100 nm of pump mirror at 532 nm: 4π·100/532 rad.
        let mut g = ArmGeometry::balanced();
        g.dz_pump = 100.0e-9;
        assert_abs_diff_eq!(arm_phases(&g, &cfg).pump, 2.3620995, epsilon = 1e-6);

        let mut g = ArmGeometry::balanced();
        g.phase_offset_signal = 0.25;
        assert_abs_diff_eq!(arm_phases(&g, &cfg).signal, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn time_delay_examples() {
        let none = SamplePlacement::Empty;
        assert_eq!(time_delay(&ArmGeometry::balanced(), &none), 0.0);

        let g = ArmGeometry::with_dz(0.0, 15.0e-6, 0.0);
        assert_abs_diff_eq!(time_delay(&g, &none), 1.0006923e-13, epsilon = 1e-19);

        // Sample group delay in the idler arm lengthens the idler path, so the
        // signal-minus-idler delay is negative until compensated.
        let s = SampleSpec::new(0.3, 0.0, 1.0, 2.0e-13).unwrap();
        let dt = time_delay(&ArmGeometry::balanced(), &SamplePlacement::InIdlerArm(s));
        assert_abs_diff_eq!(dt, -2.0e-13, epsilon = 1e-25);
        let dt = time_delay(&ArmGeometry::balanced(), &SamplePlacement::InSignalArm(s));
        assert_abs_diff_eq!(dt, 2.0e-13, epsilon = 1e-25);

        // Compensation: dz_s = c·g/2 restores zero delay for an idler-arm sample.
        let g = ArmGeometry::with_dz(0.0, SPEED_OF_LIGHT * 2.0e-13 / 2.0, 0.0);
        assert_abs_diff_eq!(
            time_delay(&g, &SamplePlacement::InIdlerArm(s)),
            0.0,
            epsilon = 1e-25
        );
    }

    #[test]
    fn rate_extremes_without_sample() {
        let cfg = InterferometerConfig::default();
        let clear = SampleSpec::new(0.0, 0.0, 1.0, 0.0).unwrap();
        let balanced = ArmGeometry::balanced();
        // δ=0, τ=1 in the idler arm is the no-sample instrument.
        let max = signal_rate_idler_sample(&balanced, &cfg, &clear);
        assert_abs_diff_eq!(max, 4.0 * cfg.rate_scale, epsilon = 1e-9);
        assert_abs_diff_eq!(
            max,
            signal_rate(&balanced, &cfg, &SamplePlacement::Empty),
            epsilon = 1e-9
        );

        // A static π on the idler arm gives the destructive extreme exactly.
        let mut g = ArmGeometry::balanced();
        g.phase_offset_idler = PI;
        let min = signal_rate_idler_sample(&g, &cfg, &clear);
        assert!(min.abs() < 1e-6);

        // The equivalent λ/4 mirror displacement also sits at the fringe
        // minimum, offset only by the tiny envelope decay it causes.
        let mut g = ArmGeometry::balanced();
        g.dz_idler = cfg.lambda_idler() / 4.0;
        let min = signal_rate_idler_sample(&g, &cfg, &clear);
        assert!(min < 1e-4 * max, "got {min}");
    }

    #[test]
    fn quarter_wave_at_45deg_has_no_fringe() {
        let cfg = InterferometerConfig::default();
        let qwp = SampleSpec::new(PI / 2.0, PI / 4.0, 1.0, 0.0).unwrap();
        for k in 0..32 {
            let mut g = ArmGeometry::balanced();
            g.dz_idler = cfg.lambda_idler() * k as f64 / 64.0;
            let p = signal_rate_idler_sample(&g, &cfg, &qwp);
            assert_abs_diff_eq!(p, 2.0 * cfg.rate_scale, epsilon = 1e-6);
            let p = signal_rate_signal_sample(&g, &cfg, &qwp);
            assert_abs_diff_eq!(p, 2.0 * cfg.rate_scale, epsilon = 1e-6);
        }
    }

    #[test]
    fn signal_arm_sample_shifts_phase_by_plus_delta_at_theta_zero() {
        // δ=π/3 at θ=0 in the signal arm: full fringe amplitude, phase +δ.
        let cfg = InterferometerConfig::default();
        let s = SampleSpec::new(PI / 3.0, 0.0, 1.0, 0.0).unwrap();
        let balanced = ArmGeometry::balanced();
        let p = signal_rate_signal_sample(&balanced, &cfg, &s);
        assert_abs_diff_eq!(
            p,
            2.0 * cfg.rate_scale * (1.0 + (PI / 3.0).cos()),
            epsilon = 1e-6
        );
        // Offsetting the signal arm by -δ restores the constructive peak.
        let mut g = ArmGeometry::balanced();
        g.phase_offset_signal = -PI / 3.0;
        let p = signal_rate_signal_sample(&g, &cfg, &s);
        assert_abs_diff_eq!(p, 4.0 * cfg.rate_scale, epsilon = 1e-6);
    }

    #[test]
    fn model_visibility_matches_closed_form_over_phase_grid() {
        // Max/min of the rate over a full fringe of static phase equals the
        // closed-form visibility τ²·|t|·|μ|.
        let cfg = InterferometerConfig::default();
        let s = SampleSpec::new(0.4 * PI, 0.2, 0.93, 1.0e-13).unwrap();
        let placement = SamplePlacement::InIdlerArm(s);
        let mut g = ArmGeometry::with_dz(0.0, 30.0e-6, 0.0);

        // Anchor the grid so the fringe argument passes through 0 and π on
        // grid points; otherwise the discrete extremes undershoot.
        let phases = arm_phases(&g, &cfg);
        let (t, _) = crate::jones::transmission_coefficients(s.delta_single(), s.theta());
        let rest = phases.pump - phases.signal - phases.idler + t.arg();
        let n = 4096; // even
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..n {
            g.phase_offset_pump = -rest + 2.0 * PI * k as f64 / n as f64;
            let p = signal_rate(&g, &cfg, &placement);
            lo = lo.min(p);
            hi = hi.max(p);
        }
        let vis = (hi - lo) / (hi + lo);
        let dt = time_delay(&g, &placement);
        let expect = fringe_visibility(&placement, dt, &cfg.spectral);
        assert_abs_diff_eq!(vis, expect, epsilon = 1e-9);
    }

    #[test]
    fn pump_scan_leaves_envelope_untouched() {
        let placement = SamplePlacement::Empty;
        let g0 = ArmGeometry::with_dz(0.0, 4.0e-6, 0.0);
        let g1 = ArmGeometry::with_dz(37.0e-6, 4.0e-6, 0.0);
        assert_eq!(time_delay(&g0, &placement), time_delay(&g1, &placement));
    }

    #[test]
    fn orientation_endpoints_differ_by_double_pass_retardation() {
        // Fringe phase at θ=0 minus θ=π/2 is 2δ (mod 2π) for an idler-arm
        // sample, read off the rate by scanning the static pump phase.
        let cfg = InterferometerConfig::default();
        let delta = 0.31 * PI;
        let balanced = ArmGeometry::balanced();
        let phase_of = |theta: f64| {
            let s = SampleSpec::new(delta, theta, 1.0, 0.0).unwrap();
            // Recover the fringe phase from rates at two quadratures.
            let mut g = balanced;
            g.phase_offset_pump = 0.0;
            let a = signal_rate_idler_sample(&g, &cfg, &s) / (2.0 * cfg.rate_scale) - 1.0;
            g.phase_offset_pump = -PI / 2.0;
            let b = signal_rate_idler_sample(&g, &cfg, &s) / (2.0 * cfg.rate_scale) - 1.0;
            math::atan2(b, a)
        };
        let diff = math::rem_euclid(phase_of(0.0) - phase_of(PI / 2.0), 2.0 * PI);
        assert_abs_diff_eq!(diff, 2.0 * delta, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn rate_is_nonnegative(
            delta in 0.0..(2.0 * PI),
            theta in 0.0..PI,
            tau in 0.0..1.0f64,
            dz_i in -1.0e-4..1.0e-4f64,
            dz_s in -1.0e-4..1.0e-4f64,
            in_signal_arm in proptest::bool::ANY,
        ) {
            let cfg = InterferometerConfig::default();
            let s = SampleSpec::new(delta, theta, tau, 0.0).unwrap();
            let placement = if in_signal_arm {
                SamplePlacement::InSignalArm(s)
            } else {
                SamplePlacement::InIdlerArm(s)
            };
            let g = ArmGeometry::with_dz(0.0, dz_s, dz_i);
            prop_assert!(signal_rate(&g, &cfg, &placement) >= 0.0);
        }
    }
}
