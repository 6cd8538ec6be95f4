//! Implementations behind the CLI verbs. Each takes plain paths/flags and
//! returns the files it wrote, so integration tests can drive them directly.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use nlmi_core::{
    balance_search, fit_fringe, fringe_model, method1_phase_shift, method2_visibility_ratio,
    estimate_transmission, fit_visibility_curve, synthesize_scan, BalanceOptions, Branch,
    BranchChoice, SampleArm, SamplePlacement, ScanAxis, SPEED_OF_LIGHT,
};

use crate::config::{parse_arm, parse_axis, RunConfigFile};
use crate::error::{CliError, Result};
use crate::files::{
    read_scan_csv, read_visibility_curve, write_scan_csv, CurveFitFile, EstimateFile, FitFile,
    TransmissionFile, PHASE_CONVENTION,
};
use crate::replicate::{derive_seed, run_replication, write_report, ReplicateOptions};

/// Environment variable overriding the output directory (below `--out`).
pub const OUT_DIR_ENV: &str = "NLMI_OUT";

/// Precedence: `--out` flag, then `NLMI_OUT`, then the given fallback.
pub fn resolve_out_dir(flag: Option<&Path>, fallback: &Path) -> PathBuf {
    if let Some(p) = flag {
        return p.to_owned();
    }
    if let Ok(env) = std::env::var(OUT_DIR_ENV) {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    fallback.to_owned()
}

#[derive(Serialize)]
struct ManifestEntry {
    index: usize,
    theta_deg: Option<f64>,
    seed: u64,
    path: String,
}

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    phase_convention: String,
    canonical_retardation: String,
    noise: String,
    files: Vec<ManifestEntry>,
}

/// `simulate`: synthesize one scan per configured orientation and a manifest.
pub fn cmd_simulate(
    config_path: &Path,
    out_flag: Option<&Path>,
    seed_flag: Option<u64>,
) -> Result<Vec<PathBuf>> {
    let file = RunConfigFile::from_path(config_path)?;
    let run = file.resolve()?;
    let seed = seed_flag.unwrap_or(run.seed);
    let out_dir = resolve_out_dir(out_flag, Path::new(&run.out_dir));
    fs::create_dir_all(&out_dir)?;

    let mut geometry = run.base_geometry();
    if run.geometry.auto_balance {
        if let Some(s) = run.placement_base.spec() {
            let needed = SPEED_OF_LIGHT * s.group_delay().abs() / 2.0;
            let opts = BalanceOptions {
                half_range: (2.0 * needed).max(800.0e-6),
                coarse_step: 20.0e-6,
                visibility_floor: 1.0e-3,
            };
            geometry.dz_signal =
                balance_search(&geometry, &run.interferometer, &run.placement_base, &opts)
                    .map_err(|e| CliError::numerical(format!("balance search: {e}")))?;
        }
    }

    let orientations: Vec<Option<f64>> = match run.placement_base {
        SamplePlacement::Empty => vec![None],
        _ => run.thetas_rad.iter().map(|&t| Some(t)).collect(),
    };

    let mut written = Vec::new();
    let mut entries = Vec::new();
    for (i, theta) in orientations.iter().enumerate() {
        let placement = match (&run.placement_base, theta) {
            (SamplePlacement::Empty, _) => SamplePlacement::Empty,
            (SamplePlacement::InIdlerArm(s), Some(t)) => {
                SamplePlacement::InIdlerArm(s.with_theta(*t).map_err(CliError::numerical)?)
            }
            (SamplePlacement::InSignalArm(s), Some(t)) => {
                SamplePlacement::InSignalArm(s.with_theta(*t).map_err(CliError::numerical)?)
            }
            (p, None) => *p,
        };
        let scan_seed = derive_seed(seed, &[i as u64]);
        let plan = run.plan_for(i, scan_seed)?;
        let scan = synthesize_scan(&plan, &geometry, &run.interferometer, &placement)
            .map_err(|e| CliError::numerical(format!("scan synthesis: {e}")))?;
        let name = format!("scan_{i:02}.csv");
        let path = out_dir.join(&name);
        write_scan_csv(&scan, &path)?;
        entries.push(ManifestEntry {
            index: i,
            theta_deg: theta.map(|t| t.to_degrees()),
            seed: scan_seed,
            path: name,
        });
        written.push(path);
    }

    let manifest = Manifest {
        seed,
        phase_convention: PHASE_CONVENTION.to_owned(),
        canonical_retardation: "single-pass retardation reported canonically in [0, pi)".to_owned(),
        noise: file.scan.noise.clone(),
        files: entries,
    };
    let manifest_path = out_dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::usage(format!("manifest serialization: {e}")))?
        + "\n";
    fs::write(&manifest_path, body)?;
    written.push(manifest_path);
    Ok(written)
}

/// `fit`: fit one scan CSV; optionally emit a dense model curve for plotting.
pub fn cmd_fit(
    scan_path: &Path,
    out_flag: Option<&Path>,
    free_period: bool,
    plot: bool,
) -> Result<Vec<PathBuf>> {
    let scan = read_scan_csv(scan_path)?;
    let hint = if free_period {
        None
    } else {
        Some(scan.fringe_period())
    };
    let fit = fit_fringe(&scan, hint).map_err(|e| CliError::numerical(format!("fit: {e}")))?;
    if !fit.phase_determinate() {
        eprintln!(
            "warning: {}: no usable fringe (visibility ~ 0); phase is indeterminate",
            scan_path.display()
        );
    }
    let parent = scan_path.parent().unwrap_or(Path::new(".")).to_owned();
    let out_dir = resolve_out_dir(out_flag, &parent);
    let stem = scan_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scan");
    let file = FitFile::from_scan_fit(&fit, &scan);
    let (txt, json) = file.write(&out_dir, &format!("{stem}_fit"))?;
    let mut written = vec![txt, json];

    if plot {
        let n = 601;
        let z0 = scan.positions[0];
        let z1 = scan.positions[scan.positions.len() - 1];
        let mut body = String::from("# model=offset*(1+visibility*cos(2*pi*z/period+phase))\n");
        body.push_str("position_m,model_counts\n");
        for k in 0..n {
            let z = z0 + (z1 - z0) * k as f64 / (n - 1) as f64;
            let m = fringe_model(z, fit.offset, fit.visibility, fit.phase, fit.period);
            body.push_str(&format!("{z},{m}\n"));
        }
        let path = out_dir.join(format!("{stem}_model.csv"));
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

fn axis_arm_from_fits(files: &[(PathBuf, FitFile)]) -> Result<(ScanAxis, SampleArm)> {
    let mut axis: Option<String> = None;
    let mut arm: Option<String> = None;
    for (path, f) in files {
        let a = f.meta_axis.clone().ok_or_else(|| {
            CliError::usage(format!("{}: missing meta_axis", path.display()))
        })?;
        match &axis {
            None => axis = Some(a),
            Some(prev) if *prev == a => {}
            Some(prev) => {
                return Err(CliError::usage(format!(
                    "mixed scan axes across fits: {prev} vs {a}"
                )))
            }
        }
        let r = f.meta_sample_arm.clone().ok_or_else(|| {
            CliError::usage(format!("{}: missing meta_sample_arm", path.display()))
        })?;
        match &arm {
            None => arm = Some(r),
            Some(prev) if *prev == r => {}
            Some(prev) => {
                return Err(CliError::usage(format!(
                    "mixed sample arms across fits: {prev} vs {r}"
                )))
            }
        }
    }
    let axis = parse_axis(&axis.expect("at least one fit"))?;
    let arm_str = arm.expect("at least one fit");
    if arm_str == "none" {
        return Err(CliError::usage(
            "phase-shift estimation needs scans taken with a sample in place (sample_arm is none)",
        ));
    }
    Ok((axis, parse_arm(&arm_str)?))
}

/// `method1`: phase-shift retardation from fit files carrying θ metadata.
pub fn cmd_method1(fit_paths: &[PathBuf], out_flag: Option<&Path>) -> Result<Vec<PathBuf>> {
    if fit_paths.len() < 2 {
        return Err(CliError::usage("method1 needs at least two fit files"));
    }
    let mut loaded = Vec::new();
    for p in fit_paths {
        loaded.push((p.clone(), FitFile::read(p)?));
    }
    let (axis, arm) = axis_arm_from_fits(&loaded)?;
    let mut fits = Vec::new();
    for (path, f) in &loaded {
        let theta = f.meta_theta_rad.ok_or_else(|| {
            CliError::usage(format!("{}: missing meta_theta_rad", path.display()))
        })?;
        fits.push((theta, f.to_fit_result()));
    }
    let est = method1_phase_shift(&fits, axis, arm)
        .map_err(|e| CliError::numerical(format!("method1: {e}")))?;
    let parent = fit_paths[0].parent().unwrap_or(Path::new(".")).to_owned();
    let out_dir = resolve_out_dir(out_flag, &parent);
    let (txt, json) = EstimateFile::from_estimate(&est).write(&out_dir, "method1")?;
    Ok(vec![txt, json])
}

/// Parse the `--branch` mode shared by `method2` and `viscurve`.
pub fn parse_branch_choice(
    branch: &str,
    method1_file: Option<&Path>,
) -> Result<BranchChoice> {
    match branch {
        "principal" => Ok(BranchChoice::Hint(Branch::Principal)),
        "reflected" => Ok(BranchChoice::Hint(Branch::Reflected)),
        "from-method1" => {
            let path = method1_file.ok_or_else(|| {
                CliError::usage("--branch from-method1 requires --method1 ESTIMATE.json")
            })?;
            let est = EstimateFile::read(path)?;
            Ok(BranchChoice::FromPhaseShift(est.delta_single_rad))
        }
        other => Err(CliError::usage(format!(
            "--branch: unknown mode {other:?} (expected principal, reflected, or from-method1)"
        ))),
    }
}

/// `method2`: visibility-ratio retardation from two fit files.
pub fn cmd_method2(
    vmin_path: &Path,
    vmax_path: &Path,
    branch: &str,
    method1_file: Option<&Path>,
    out_flag: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    let vmin = FitFile::read(vmin_path)?;
    let vmax = FitFile::read(vmax_path)?;
    let choice = parse_branch_choice(branch, method1_file)?;
    let est = method2_visibility_ratio(&vmin.to_fit_result(), &vmax.to_fit_result(), choice)
        .map_err(|e| CliError::numerical(format!("method2: {e}")))?;
    let mut file = EstimateFile::from_estimate(&est);
    file.meta_axis = vmax.meta_axis.clone();
    file.meta_sample_arm = vmax.meta_sample_arm.clone();
    let parent = vmax_path.parent().unwrap_or(Path::new(".")).to_owned();
    let out_dir = resolve_out_dir(out_flag, &parent);
    let (txt, json) = file.write(&out_dir, "method2")?;
    Ok(vec![txt, json])
}

/// `viscurve`: fit the visibility-versus-orientation curve.
pub fn cmd_viscurve(
    curve_path: &Path,
    mu: f64,
    branch: &str,
    method1_file: Option<&Path>,
    out_flag: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    if !(mu.is_finite() && mu > 0.0 && mu <= 1.0) {
        return Err(CliError::usage(format!(
            "--mu must lie in (0, 1], got {mu}"
        )));
    }
    let curve = read_visibility_curve(curve_path)?;
    let choice = parse_branch_choice(branch, method1_file)?;
    let fit = fit_visibility_curve(&curve, mu, choice)
        .map_err(|e| CliError::numerical(format!("viscurve: {e}")))?;
    let out = CurveFitFile {
        delta_single_rad: fit.delta_single,
        delta_single_pi: fit.delta_single / PI,
        sigma_delta_rad: fit.sigma_delta.is_finite().then_some(fit.sigma_delta),
        tau_m_sq: fit.tau_m_sq,
        sigma_tau_m_sq: fit.sigma_tau_m_sq,
        branch: fit.branch.as_str().to_owned(),
        converged: fit.converged,
    };
    let parent = curve_path.parent().unwrap_or(Path::new(".")).to_owned();
    let out_dir = resolve_out_dir(out_flag, &parent);
    let (txt, json) = out.write(&out_dir, "viscurve")?;
    Ok(vec![txt, json])
}

/// `transmission`: τ_m² from a sample fit and a reference fit.
pub fn cmd_transmission(
    sample_path: &Path,
    reference_path: &Path,
    out_flag: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    let sample = FitFile::read(sample_path)?;
    let reference = FitFile::read(reference_path)?;
    let est = estimate_transmission(&sample.to_fit_result(), &reference.to_fit_result())
        .map_err(|e| CliError::numerical(format!("transmission: {e}")))?;
    let parent = sample_path.parent().unwrap_or(Path::new(".")).to_owned();
    let out_dir = resolve_out_dir(out_flag, &parent);
    let (txt, json) = TransmissionFile::from_estimate(&est).write(&out_dir, "transmission")?;
    Ok(vec![txt, json])
}

/// `replicate-tables`: run the benchmark harness and write the report pair.
pub fn cmd_replicate_tables(
    seed: u64,
    trials: u32,
    out_flag: Option<&Path>,
) -> Result<Vec<PathBuf>> {
    let report = run_replication(&ReplicateOptions { seed, trials })?;
    let out_dir = resolve_out_dir(out_flag, Path::new("out"));
    let (txt, json) = write_report(&report, &out_dir)?;
    println!("all_pass={}", report.all_pass);
    Ok(vec![txt, json])
}
