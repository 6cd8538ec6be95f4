//! On-disk formats: scan CSVs with self-describing header comments, and
//! key=value / JSON result files.
//!
//! Scan CSV: UTF-8, LF line endings, `# key=value` header comments, a
//! `position_m,counts` column header, then one row per point. Floats are
//! written with Rust's shortest round-trip formatting, so re-reading
//! reproduces the values bit for bit.
//!
//! Result files come in pairs: a flat `key=value` text file for eyes and
//! greps, and a JSON file with the same keys for machines.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nlmi_core::{
    FitResult, FringeScan, InterferometerConfig, NoiseModel, RetardationEstimate, SampleArm,
    SamplePlacement, SampleSpec, ScanPlan, SpectralModel, SpectralShape, TransmissionEstimate,
    VisibilityCurve,
};

use crate::config::{parse_arm, parse_axis, parse_noise};
use crate::error::{CliError, Result};

pub const PHASE_CONVENTION: &str =
    "double pass: phi = 4*pi*dz/lambda; fringe period = lambda_axis/2 of stage travel";

fn fmt(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

/// Serialize a scan to CSV text.
pub fn scan_to_csv(scan: &FringeScan) -> String {
    let cfg = &scan.config;
    let mut out = String::new();
    let mut push = |k: &str, v: String| {
        out.push_str("# ");
        out.push_str(k);
        out.push('=');
        out.push_str(&v);
        out.push('\n');
    };
    push("format", "nlmi_scan_v1".into());
    push("axis", scan.plan.axis.as_str().into());
    push(
        "lambda_axis_m",
        fmt(scan.plan.axis.wavelength(cfg)),
    );
    push("fringe_period_m", fmt(scan.fringe_period()));
    push("phase_convention", PHASE_CONVENTION.into());
    push(
        "noise",
        match scan.plan.noise {
            NoiseModel::Noiseless => "none".into(),
            NoiseModel::Poisson => "poisson".into(),
        },
    );
    push("seed", format!("{}", scan.plan.seed));
    push("dwell_s", fmt(cfg.dwell));
    push("rate_scale_cps", fmt(cfg.rate_scale));
    push("dark_rate_cps", fmt(cfg.dark_rate));
    push("lambda_pump_m", fmt(cfg.lambda_pump()));
    push("lambda_signal_m", fmt(cfg.lambda_signal()));
    push("lambda_idler_m", fmt(cfg.lambda_idler()));
    push(
        "spectral_shape",
        match cfg.spectral.shape {
            SpectralShape::Gaussian => "gaussian".into(),
            SpectralShape::Sinc2 => "sinc2".into(),
        },
    );
    push("spectral_bandwidth_rad_s", fmt(cfg.spectral.bandwidth));
    push(
        "spectral_center_detuning_rad_s",
        fmt(cfg.spectral.center_detuning),
    );
    match (&scan.sample, scan.sample.spec()) {
        (SamplePlacement::Empty, _) => push("sample_arm", "none".into()),
        (placement, Some(s)) => {
            push(
                "sample_arm",
                match placement.arm() {
                    Some(SampleArm::Idler) => "idler".into(),
                    Some(SampleArm::Signal) => "signal".into(),
                    None => "none".into(),
                },
            );
            push("sample_delta_single_rad", fmt(s.delta_single()));
            push("sample_theta_rad", fmt(s.theta()));
            push("sample_tau_m", fmt(s.tau_m()));
            push("sample_group_delay_s", fmt(s.group_delay()));
        }
        _ => unreachable!(),
    }
    out.push_str("position_m,counts\n");
    for (z, c) in scan.positions.iter().zip(&scan.counts) {
        out.push_str(&fmt(*z));
        out.push(',');
        out.push_str(&fmt(*c));
        out.push('\n');
    }
    out
}

pub fn write_scan_csv(scan: &FringeScan, path: &Path) -> Result<()> {
    fs::write(path, scan_to_csv(scan))
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

/// Parse a scan CSV back into a [`FringeScan`]. Data errors carry the
/// offending line number and the last row that parsed cleanly.
pub fn read_scan_csv(path: &Path) -> Result<FringeScan> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    parse_scan_csv(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn parse_scan_csv(text: &str) -> std::result::Result<FringeScan, String> {
    let mut headers = std::collections::BTreeMap::new();
    let mut positions = Vec::new();
    let mut counts = Vec::new();
    let mut saw_column_header = false;
    let mut last_good_row = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                headers.insert(k.trim().to_owned(), v.trim().to_owned());
            }
            continue;
        }
        if !saw_column_header {
            if line != "position_m,counts" {
                return Err(format!("line {lineno}: expected column header 'position_m,counts'"));
            }
            saw_column_header = true;
            continue;
        }
        let parse_row = || -> Option<(f64, f64)> {
            let (a, b) = line.split_once(',')?;
            Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
        };
        match parse_row() {
            Some((z, c)) => {
                positions.push(z);
                counts.push(c);
                last_good_row += 1;
            }
            None => {
                return Err(format!(
                    "bad data at line {lineno} (last good data row: {last_good_row})"
                ))
            }
        }
    }
    if positions.len() < 2 {
        return Err(format!(
            "too few data rows (got {}, last good data row: {last_good_row})",
            positions.len()
        ));
    }

    let get = |k: &str| -> std::result::Result<&str, String> {
        headers
            .get(k)
            .map(|s| s.as_str())
            .ok_or_else(|| format!("missing header key {k}"))
    };
    let getf = |k: &str| -> std::result::Result<f64, String> {
        get(k)?.parse().map_err(|_| format!("header {k} is not a number"))
    };

    let axis = parse_axis(get("axis")?).map_err(|e| e.to_string())?;
    let noise = parse_noise(get("noise")?).map_err(|e| e.to_string())?;
    let seed: u64 = get("seed")?
        .parse()
        .map_err(|_| "header seed is not an integer".to_string())?;

    let shape = match get("spectral_shape")? {
        "gaussian" => SpectralShape::Gaussian,
        "sinc2" => SpectralShape::Sinc2,
        other => return Err(format!("unknown spectral_shape {other:?}")),
    };
    let spectral = SpectralModel::new(
        shape,
        getf("spectral_center_detuning_rad_s")?,
        getf("spectral_bandwidth_rad_s")?,
    )
    .map_err(|e| e.to_string())?;
    let config = InterferometerConfig::new(
        getf("lambda_pump_m")?,
        getf("lambda_signal_m")?,
        getf("lambda_idler_m")?,
        spectral,
        getf("rate_scale_cps")?,
        getf("dwell_s")?,
    )
    .and_then(|c| c.with_dark_rate(getf("dark_rate_cps").unwrap_or(0.0)))
    .map_err(|e| e.to_string())?;

    let sample = match get("sample_arm")? {
        "none" => SamplePlacement::Empty,
        arm => {
            let spec = SampleSpec::new(
                getf("sample_delta_single_rad")?,
                getf("sample_theta_rad")?,
                getf("sample_tau_m")?,
                getf("sample_group_delay_s")?,
            )
            .map_err(|e| e.to_string())?;
            match parse_arm(arm).map_err(|e| e.to_string())? {
                SampleArm::Idler => SamplePlacement::InIdlerArm(spec),
                SampleArm::Signal => SamplePlacement::InSignalArm(spec),
            }
        }
    };

    let n = positions.len();
    let step = (positions[n - 1] - positions[0]) / (n - 1) as f64;
    let plan = ScanPlan::new(axis, positions[0], step, n, seed, noise)
        .map_err(|e| e.to_string())?;
    let undersampled = step > axis.wavelength(&config) / 4.0;
    Ok(FringeScan {
        plan,
        positions,
        counts,
        config,
        sample,
        undersampled,
    })
}

fn write_pair(dir: &Path, stem: &str, kv: String, json: String) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let txt = dir.join(format!("{stem}.txt"));
    let js = dir.join(format!("{stem}.json"));
    fs::write(&txt, kv)?;
    fs::write(&js, json)?;
    Ok((txt, js))
}

/// Fit result plus scan provenance, as written to disk.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FitFile {
    pub offset: f64,
    pub visibility: f64,
    pub phase_rad: f64,
    pub period_m: f64,
    pub sigma_offset: f64,
    pub sigma_visibility: f64,
    /// `None` means unbounded (no usable fringe; serialized as `inf`/`null`).
    pub sigma_phase: Option<f64>,
    pub residual_rms: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta_axis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta_sample_arm: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta_theta_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta_lambda_axis_m: Option<f64>,
}

impl FitFile {
    pub fn from_scan_fit(fit: &FitResult, scan: &FringeScan) -> Self {
        Self {
            offset: fit.offset,
            visibility: fit.visibility,
            phase_rad: fit.phase,
            period_m: fit.period,
            sigma_offset: fit.sigma_offset,
            sigma_visibility: fit.sigma_visibility,
            sigma_phase: fit.sigma_phase.is_finite().then_some(fit.sigma_phase),
            residual_rms: fit.residual_rms,
            converged: fit.converged,
            meta_axis: Some(scan.plan.axis.as_str().to_owned()),
            meta_sample_arm: Some(match scan.sample.arm() {
                None => "none".to_owned(),
                Some(SampleArm::Idler) => "idler".to_owned(),
                Some(SampleArm::Signal) => "signal".to_owned(),
            }),
            meta_theta_rad: scan.sample.spec().map(|s| s.theta()),
            meta_lambda_axis_m: Some(scan.plan.axis.wavelength(&scan.config)),
        }
    }

    pub fn to_fit_result(&self) -> FitResult {
        FitResult {
            offset: self.offset,
            visibility: self.visibility,
            phase: self.phase_rad,
            period: self.period_m,
            sigma_offset: self.sigma_offset,
            sigma_visibility: self.sigma_visibility,
            sigma_phase: self.sigma_phase.unwrap_or(f64::INFINITY),
            residual_rms: self.residual_rms,
            converged: self.converged,
        }
    }

    pub fn kv(&self) -> String {
        let mut lines = vec![
            format!("offset={}", fmt(self.offset)),
            format!("visibility={}", fmt(self.visibility)),
            format!("phase_rad={}", fmt(self.phase_rad)),
            format!("period_m={}", fmt(self.period_m)),
            format!("sigma_offset={}", fmt(self.sigma_offset)),
            format!("sigma_visibility={}", fmt(self.sigma_visibility)),
            format!(
                "sigma_phase={}",
                self.sigma_phase.map_or("inf".to_owned(), fmt)
            ),
            format!("residual_rms={}", fmt(self.residual_rms)),
            format!("converged={}", self.converged),
        ];
        if let Some(v) = &self.meta_axis {
            lines.push(format!("meta_axis={v}"));
        }
        if let Some(v) = &self.meta_sample_arm {
            lines.push(format!("meta_sample_arm={v}"));
        }
        if let Some(v) = self.meta_theta_rad {
            lines.push(format!("meta_theta_rad={}", fmt(v)));
        }
        if let Some(v) = self.meta_lambda_axis_m {
            lines.push(format!("meta_lambda_axis_m={}", fmt(v)));
        }
        lines.push(String::new());
        lines.join("\n")
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::usage(format!("fit serialization: {e}")))?
            + "\n";
        write_pair(dir, stem, self.kv(), json)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: not a fit file: {e}", path.display())))
    }
}

/// Retardation estimate as written to disk; values carried both in radians
/// and in units of π.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EstimateFile {
    pub method: String,
    pub branch: String,
    pub delta_single_rad: f64,
    pub delta_single_pi: f64,
    pub sigma_rad: f64,
    pub sigma_pi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_double_pass_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta_axis: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta_sample_arm: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub thetas_rad: Vec<f64>,
}

impl EstimateFile {
    pub fn from_estimate(est: &RetardationEstimate) -> Self {
        Self {
            method: est.method.as_str().to_owned(),
            branch: est.branch.as_str().to_owned(),
            delta_single_rad: est.delta_single,
            delta_single_pi: est.delta_single / PI,
            sigma_rad: est.sigma,
            sigma_pi: est.sigma / PI,
            raw_double_pass_rad: est.raw_double_pass,
            meta_axis: est.provenance.axis.map(|a| a.as_str().to_owned()),
            meta_sample_arm: est.provenance.arm.map(|a| match a {
                SampleArm::Idler => "idler".to_owned(),
                SampleArm::Signal => "signal".to_owned(),
            }),
            thetas_rad: est.provenance.thetas.clone(),
        }
    }

    pub fn kv(&self) -> String {
        let mut lines = vec![
            format!("method={}", self.method),
            format!("branch={}", self.branch),
            format!("delta_single_rad={}", fmt(self.delta_single_rad)),
            format!("delta_single_pi={}", fmt(self.delta_single_pi)),
            format!("sigma_rad={}", fmt(self.sigma_rad)),
            format!("sigma_pi={}", fmt(self.sigma_pi)),
        ];
        if let Some(v) = self.raw_double_pass_rad {
            lines.push(format!("raw_double_pass_rad={}", fmt(v)));
        }
        if let Some(v) = &self.meta_axis {
            lines.push(format!("meta_axis={v}"));
        }
        if let Some(v) = &self.meta_sample_arm {
            lines.push(format!("meta_sample_arm={v}"));
        }
        if !self.thetas_rad.is_empty() {
            let joined: Vec<String> = self.thetas_rad.iter().map(|t| fmt(*t)).collect();
            lines.push(format!("thetas_rad={}", joined.join(",")));
        }
        lines.push(String::new());
        lines.join("\n")
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::usage(format!("estimate serialization: {e}")))?
            + "\n";
        write_pair(dir, stem, self.kv(), json)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: not an estimate file: {e}", path.display())))
    }
}

/// Transmission estimate file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TransmissionFile {
    pub tau_m_sq: f64,
    pub sigma: f64,
}

impl TransmissionFile {
    pub fn from_estimate(est: &TransmissionEstimate) -> Self {
        Self {
            tau_m_sq: est.tau_m_sq,
            sigma: est.sigma,
        }
    }

    pub fn kv(&self) -> String {
        format!("tau_m_sq={}\nsigma={}\n", fmt(self.tau_m_sq), fmt(self.sigma))
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::usage(format!("transmission serialization: {e}")))?
            + "\n";
        write_pair(dir, stem, self.kv(), json)
    }
}

/// Curve-fit output: retardation plus transmission from a visibility curve.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CurveFitFile {
    pub delta_single_rad: f64,
    pub delta_single_pi: f64,
    pub sigma_delta_rad: Option<f64>,
    pub tau_m_sq: f64,
    pub sigma_tau_m_sq: f64,
    pub branch: String,
    pub converged: bool,
}

impl CurveFitFile {
    pub fn kv(&self) -> String {
        format!(
            "delta_single_rad={}\ndelta_single_pi={}\nsigma_delta_rad={}\ntau_m_sq={}\nsigma_tau_m_sq={}\nbranch={}\nconverged={}\n",
            fmt(self.delta_single_rad),
            fmt(self.delta_single_pi),
            self.sigma_delta_rad.map_or("inf".to_owned(), fmt),
            fmt(self.tau_m_sq),
            fmt(self.sigma_tau_m_sq),
            self.branch,
            self.converged
        )
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::usage(format!("curve fit serialization: {e}")))?
            + "\n";
        write_pair(dir, stem, self.kv(), json)
    }
}

/// Read a visibility-curve CSV: `theta_deg,visibility,sigma` rows, `#`
/// comments allowed, column header optional.
pub fn read_visibility_curve(path: &Path) -> Result<VisibilityCurve> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut thetas = Vec::new();
    let mut vis = Vec::new();
    let mut sigmas = Vec::new();
    let mut last_good = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with("theta") {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let row = (|| -> Option<(f64, f64, f64)> {
            let th: f64 = parts.next()?.parse().ok()?;
            let v: f64 = parts.next()?.parse().ok()?;
            let s: f64 = match parts.next() {
                Some(x) => x.parse().ok()?,
                None => 0.0,
            };
            Some((th, v, s))
        })();
        match row {
            Some((th, v, s)) => {
                thetas.push(th.to_radians());
                vis.push(v);
                sigmas.push(s);
                last_good += 1;
            }
            None => {
                return Err(CliError::usage(format!(
                    "{}: bad data at line {} (last good data row: {last_good})",
                    path.display(),
                    idx + 1
                )))
            }
        }
    }
    VisibilityCurve::new(thetas, vis, sigmas)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nlmi_core::{synthesize_scan, ArmGeometry, ScanAxis};

    fn sample_scan(noise: NoiseModel) -> FringeScan {
        let cfg = InterferometerConfig::default();
        let s = SampleSpec::new(0.5 * PI, 0.3, 0.99, 1.0e-12).unwrap();
        let plan = ScanPlan::centered(ScanAxis::IdlerMirror, 0.0, &cfg, 3.0, 61, 17, noise).unwrap();
        synthesize_scan(&plan, &ArmGeometry::balanced(), &cfg, &SamplePlacement::InIdlerArm(s))
            .unwrap()
    }

    #[test]
    fn scan_csv_roundtrip_is_exact() {
        let scan = sample_scan(NoiseModel::Poisson);
        let text = scan_to_csv(&scan);
        let back = parse_scan_csv(&text).unwrap();
        assert_eq!(scan.positions.len(), back.positions.len());
        for (a, b) in scan.positions.iter().zip(&back.positions) {
            assert_eq!(a, b);
        }
        assert_eq!(scan.counts, back.counts);
        assert_eq!(scan.plan.axis, back.plan.axis);
        assert_eq!(scan.plan.seed, back.plan.seed);
        assert_eq!(scan.sample, back.sample);
        assert_eq!(scan.config, back.config);
        // Identical bytes when re-serialized.
        assert_eq!(text, scan_to_csv(&back));
    }

    #[test]
    fn truncated_csv_names_last_good_row() {
        let scan = sample_scan(NoiseModel::Noiseless);
        let mut text = scan_to_csv(&scan);
        text.push_str("not,a,number,row\n");
        let err = parse_scan_csv(&text).unwrap_err();
        assert!(err.contains("last good data row: 61"), "err: {err}");

        let cut = {
            let mut t: Vec<&str> = text.lines().collect();
            t.truncate(t.len() - 2); // drop the junk and the last good row
            let mut s = t.join("\n");
            s.push_str("\n-1.5e-6,"); // half a row
            s
        };
        let err = parse_scan_csv(&cut).unwrap_err();
        assert!(err.contains("last good data row: 60"), "err: {err}");
    }

    #[test]
    fn fit_file_roundtrip_including_unbounded_sigma() {
        let f = FitFile {
            offset: 1.0e5,
            visibility: 0.0,
            phase_rad: 0.0,
            period_m: 7.765e-7,
            sigma_offset: 17.0,
            sigma_visibility: 2.0e-4,
            sigma_phase: None,
            residual_rms: 310.0,
            converged: true,
            meta_axis: Some("idler_mirror".into()),
            meta_sample_arm: Some("idler".into()),
            meta_theta_rad: Some(PI / 4.0),
            meta_lambda_axis_m: Some(1.553e-6),
        };
        let json = serde_json::to_string(&f).unwrap();
        let back: FitFile = serde_json::from_str(&json).unwrap();
        assert_eq!(f, back);
        assert!(back.to_fit_result().sigma_phase.is_infinite());
        assert!(f.kv().contains("sigma_phase=inf"));
    }

    #[test]
    fn curve_csv_reads_with_and_without_sigma() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("curve.csv");
        fs::write(
            &p,
            "# comment\ntheta_deg,visibility,sigma\n0,0.95,0.01\n30,0.8,0.01\n45,0.5\n60,0.8,0.01\n90,0.95,0.01\n",
        )
        .unwrap();
        let curve = read_visibility_curve(&p).unwrap();
        assert_eq!(curve.thetas().len(), 5);
        assert_eq!(curve.sigmas()[2], 0.0);
        assert!((curve.thetas()[4] - PI / 2.0).abs() < 1e-12);
    }
}
