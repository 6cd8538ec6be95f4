//! Declarative TOML run configuration.
//!
//! The exact grammar (all keys, defaults, and units) is documented in the
//! repository README. Unknown keys are rejected; missing mandatory keys are
//! reported by name. Parsing then serializing then parsing again is a fixed
//! point.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use nlmi_core::{
    ArmGeometry, InterferometerConfig, NoiseModel, SampleArm, SamplePlacement, SampleSpec,
    ScanAxis, ScanPlan, SpectralModel, SpectralShape,
};

use crate::error::{CliError, Result};

fn default_thetas() -> Vec<f64> {
    vec![0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0]
}

fn default_periods() -> f64 {
    3.0
}

fn default_n_points() -> usize {
    61
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub interferometer: InterferometerSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleSection>,
    #[serde(default)]
    pub geometry: GeometrySection,
    pub scan: ScanSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferometerSection {
    pub lambda_pump_nm: f64,
    pub lambda_signal_nm: f64,
    pub lambda_idler_nm: f64,
    pub rate_scale_cps: f64,
    pub dwell_s: f64,
    #[serde(default)]
    pub dark_rate_cps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    /// "gaussian" or "sinc2".
    #[serde(default = "SpectralSection::default_shape")]
    pub shape: String,
    /// Explicit width of the detected spectrum. Takes precedence over
    /// `filter_halfwidth_nm` when both are present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_rad_s: Option<f64>,
    /// Bandpass filter half-width; bandwidth = 2πc·Δλ/λ_signal².
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_halfwidth_nm: Option<f64>,
    #[serde(default)]
    pub center_detuning_rad_s: f64,
}

impl SpectralSection {
    fn default_shape() -> String {
        "gaussian".to_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    /// Single-pass retardation in units of π.
    pub delta_single_pi: f64,
    #[serde(default)]
    pub theta_deg: f64,
    /// Intensity transmission τ_m².
    pub tau_m_sq: f64,
    #[serde(default)]
    pub group_delay_s: f64,
    /// "idler" or "signal".
    #[serde(default = "SampleSection::default_arm")]
    pub arm: String,
}

impl SampleSection {
    fn default_arm() -> String {
        "idler".to_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    #[serde(default)]
    pub dz_pump_m: f64,
    #[serde(default)]
    pub dz_signal_m: f64,
    #[serde(default)]
    pub dz_idler_m: f64,
    /// Move the signal mirror to the coherence-envelope peak before scanning
    /// (compensates the sample group delay). On by default.
    #[serde(default = "default_true")]
    pub auto_balance: bool,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            dz_pump_m: 0.0,
            dz_signal_m: 0.0,
            dz_idler_m: 0.0,
            auto_balance: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    /// "idler_mirror", "pump_mirror", or "signal_mirror".
    pub axis: String,
    /// Fringe periods covered by a centered scan.
    #[serde(default = "default_periods")]
    pub periods: f64,
    #[serde(default = "default_n_points")]
    pub n_points: usize,
    /// Scan center in stage coordinates; defaults to the resting position of
    /// the scanned mirror.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_m: Option<f64>,
    /// Explicit start/step override the centered layout when both are given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_m: Option<f64>,
    /// "none" or "poisson".
    #[serde(default = "ScanSection::default_noise")]
    pub noise: String,
    /// Sample orientations to scan, one output file each.
    #[serde(default = "default_thetas")]
    pub thetas_deg: Vec<f64>,
}

impl ScanSection {
    fn default_noise() -> String {
        "poisson".to_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "RunSection::default_out_dir")]
    pub out_dir: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: Self::default_out_dir(),
        }
    }
}

impl RunSection {
    fn default_out_dir() -> String {
        "out".to_owned()
    }
}

/// Fully validated run configuration in core types.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub interferometer: InterferometerConfig,
    pub placement_base: SamplePlacement,
    pub geometry: GeometrySection,
    pub axis: ScanAxis,
    pub noise: NoiseModel,
    pub periods: f64,
    pub n_points: usize,
    pub center_m: Option<f64>,
    pub start_step: Option<(f64, f64)>,
    pub thetas_rad: Vec<f64>,
    pub seed: u64,
    pub out_dir: String,
}

pub fn parse_axis(s: &str) -> Result<ScanAxis> {
    match s {
        "idler_mirror" => Ok(ScanAxis::IdlerMirror),
        "pump_mirror" => Ok(ScanAxis::PumpMirror),
        "signal_mirror" => Ok(ScanAxis::SignalMirror),
        other => Err(CliError::usage(format!(
            "scan.axis: unknown axis {other:?} (expected idler_mirror, pump_mirror, or signal_mirror)"
        ))),
    }
}

pub fn parse_arm(s: &str) -> Result<SampleArm> {
    match s {
        "idler" => Ok(SampleArm::Idler),
        "signal" => Ok(SampleArm::Signal),
        other => Err(CliError::usage(format!(
            "sample.arm: unknown arm {other:?} (expected idler or signal)"
        ))),
    }
}

pub fn parse_noise(s: &str) -> Result<NoiseModel> {
    match s {
        "none" => Ok(NoiseModel::Noiseless),
        "poisson" => Ok(NoiseModel::Poisson),
        other => Err(CliError::usage(format!(
            "scan.noise: unknown model {other:?} (expected none or poisson)"
        ))),
    }
}

impl RunConfigFile {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("config error: {e}")))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| CliError::usage(format!("config serialization error: {e}")))
    }

    /// Validate and convert into core types.
    pub fn resolve(&self) -> Result<RunConfig> {
        let i = &self.interferometer;
        let lambda_signal = i.lambda_signal_nm * 1e-9;
        let spectral = match &i.spectral {
            None => SpectralModel::from_filter(lambda_signal, 0.6e-9)
                .map_err(|e| CliError::usage(format!("interferometer.spectral: {e}")))?,
            Some(s) => {
                let shape = match s.shape.as_str() {
                    "gaussian" => SpectralShape::Gaussian,
                    "sinc2" => SpectralShape::Sinc2,
                    other => {
                        return Err(CliError::usage(format!(
                            "interferometer.spectral.shape: unknown shape {other:?}"
                        )))
                    }
                };
                let bandwidth = match (s.bandwidth_rad_s, s.filter_halfwidth_nm) {
                    (Some(bw), _) => bw,
                    (None, Some(hw)) => SpectralModel::from_filter(lambda_signal, hw * 1e-9)
                        .map_err(|e| CliError::usage(format!("interferometer.spectral: {e}")))?
                        .bandwidth,
                    (None, None) => {
                        return Err(CliError::usage(
                            "interferometer.spectral: give bandwidth_rad_s or filter_halfwidth_nm",
                        ))
                    }
                };
                SpectralModel::new(shape, s.center_detuning_rad_s, bandwidth)
                    .map_err(|e| CliError::usage(format!("interferometer.spectral: {e}")))?
            }
        };
        let interferometer = InterferometerConfig::new(
            i.lambda_pump_nm * 1e-9,
            lambda_signal,
            i.lambda_idler_nm * 1e-9,
            spectral,
            i.rate_scale_cps,
            i.dwell_s,
        )
        .and_then(|c| c.with_dark_rate(i.dark_rate_cps))
        .map_err(|e| CliError::usage(format!("interferometer: {e}")))?;

        let placement_base = match &self.sample {
            None => SamplePlacement::Empty,
            Some(s) => {
                let spec = SampleSpec::new(
                    s.delta_single_pi * PI,
                    s.theta_deg.to_radians(),
                    s.tau_m_sq.sqrt(),
                    s.group_delay_s,
                )
                .map_err(|e| CliError::usage(format!("sample: {e}")))?;
                if !(0.0..=1.0).contains(&s.tau_m_sq) {
                    return Err(CliError::usage(format!(
                        "sample.tau_m_sq: must lie in [0, 1], got {}",
                        s.tau_m_sq
                    )));
                }
                match parse_arm(&s.arm)? {
                    SampleArm::Idler => SamplePlacement::InIdlerArm(spec),
                    SampleArm::Signal => SamplePlacement::InSignalArm(spec),
                }
            }
        };

        let axis = parse_axis(&self.scan.axis)?;
        let noise = parse_noise(&self.scan.noise)?;
        if self.scan.n_points < 8 {
            return Err(CliError::usage(format!(
                "scan.n_points: need at least 8 points for fitting scans, got {}",
                self.scan.n_points
            )));
        }
        let start_step = match (self.scan.start_m, self.scan.step_m) {
            (Some(start), Some(step)) => Some((start, step)),
            (None, None) => None,
            _ => {
                return Err(CliError::usage(
                    "scan: start_m and step_m must be given together",
                ))
            }
        };

        Ok(RunConfig {
            interferometer,
            placement_base,
            geometry: self.geometry.clone(),
            axis,
            noise,
            periods: self.scan.periods,
            n_points: self.scan.n_points,
            center_m: self.scan.center_m,
            start_step,
            thetas_rad: self.scan.thetas_deg.iter().map(|d| d.to_radians()).collect(),
            seed: self.run.seed,
            out_dir: self.run.out_dir.clone(),
        })
    }
}

impl RunConfig {
    pub fn base_geometry(&self) -> ArmGeometry {
        ArmGeometry::with_dz(
            self.geometry.dz_pump_m,
            self.geometry.dz_signal_m,
            self.geometry.dz_idler_m,
        )
    }

    /// Scan plan for one orientation index (seeds differ per orientation).
    pub fn plan_for(&self, index: usize, seed: u64) -> Result<ScanPlan> {
        let plan = match self.start_step {
            Some((start, step)) => ScanPlan::new(self.axis, start, step, self.n_points, seed, self.noise),
            None => {
                let center = self.center_m.unwrap_or(match self.axis {
                    ScanAxis::IdlerMirror => self.geometry.dz_idler_m,
                    ScanAxis::PumpMirror => self.geometry.dz_pump_m,
                    ScanAxis::SignalMirror => self.geometry.dz_signal_m,
                });
                ScanPlan::centered(
                    self.axis,
                    center,
                    &self.interferometer,
                    self.periods,
                    self.n_points,
                    seed,
                    self.noise,
                )
            }
        };
        let _ = index;
        plan.map_err(|e| CliError::usage(format!("scan: {e}")))
    }
}
