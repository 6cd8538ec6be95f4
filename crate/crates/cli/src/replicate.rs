//! Monte Carlo replication harness.
//!
//! Five stock birefringent samples (quarter- and half-wave plates probed far
//! from and at their design wavelengths, one of them in the signal arm) are
//! scanned on the idler and pump axes with Poisson noise, and both
//! retardation methods plus the transmission estimator run on every trial.
//! Results are compared row by row against the configured ground truth, with
//! bundled benchmark measurements of the corresponding physical samples shown
//! alongside.
//!
//! The default count level is a tuned artifact choice (documented in the
//! report header): high enough that the visibility method resolves the
//! near-half-wave sample, whose arccos sensitivity diverges, to better than
//! 0.01π. Everything is a pure function of `(seed, trials)`; reports are
//! byte-identical across runs.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nlmi_core::retardation::{circular_distance_mod_pi, circular_mean_mod_pi, circular_scatter_mod_pi};
use nlmi_core::{
    balance_search, estimate_transmission, fit_fringe, method1_phase_shift,
    method2_visibility_ratio, synthesize_scan, ArmGeometry, BalanceOptions, Branch, BranchChoice,
    FitResult, InterferometerConfig, NoiseModel, SampleArm, SamplePlacement, SampleSpec, ScanAxis,
    ScanPlan,
};

use crate::error::{CliError, Result};

const THETAS_DEG: [f64; 7] = [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0];
/// Orientation excluded from phase-shift estimation (zero-visibility point of
/// quarter-wave-like samples; its fringe phase carries no information).
const PHASE_SKIP_DEG: f64 = 45.0;
const SCAN_POINTS: usize = 61;
const SCAN_PERIODS: f64 = 3.0;

/// Retardation-row tolerance floor, π units.
const DELTA_TOL_FLOOR: f64 = 1.0e-3;

#[derive(Debug, Clone, Copy)]
enum BranchPolicy {
    /// Resolve δ vs π-δ from the same trial's phase-shift estimate.
    FromPhase,
    /// Prior knowledge of the sample (benchmark half-wave plates).
    Hint(Branch),
}

struct BenchSample {
    name: &'static str,
    delta_single_pi: f64,
    tau_m_sq: f64,
    group_delay_s: f64,
    arm: SampleArm,
    branch: BranchPolicy,
    /// Benchmark (value, sigma) per axis and method, π units.
    idler_phase_ref: (f64, f64),
    idler_vis_ref: (f64, f64),
    pump_phase_ref: Option<(f64, f64)>,
    pump_vis_ref: Option<(f64, f64)>,
    trans_ref: (f64, f64),
}

/// The benchmark sample set: wave plates at 1550 nm and 532 nm probed at
/// 1553 nm in the idler arm, and a 800 nm quarter-wave plate probed at
/// 809.2 nm in the signal arm. Configured retardations for the 532 nm plates
/// repeat the benchmark measurements (no manufacturer truth exists), so those
/// rows check self-consistency rather than external truth.
fn catalog() -> Vec<BenchSample> {
    vec![
        BenchSample {
            name: "hwp_1550",
            delta_single_pi: 1.000,
            tau_m_sq: 0.985,
            group_delay_s: 3.6e-12,
            arm: SampleArm::Idler,
            branch: BranchPolicy::Hint(Branch::Reflected),
            idler_phase_ref: (1.004, 0.006),
            idler_vis_ref: (0.980, 0.030),
            pump_phase_ref: Some((0.994, 0.006)),
            pump_vis_ref: Some((0.983, 0.010)),
            trans_ref: (0.985, 0.012),
        },
        BenchSample {
            name: "qwp_1550",
            delta_single_pi: 0.500,
            tau_m_sq: 0.980,
            group_delay_s: 3.7e-12,
            arm: SampleArm::Idler,
            branch: BranchPolicy::FromPhase,
            idler_phase_ref: (0.495, 0.006),
            idler_vis_ref: (0.498, 0.002),
            pump_phase_ref: Some((0.507, 0.006)),
            pump_vis_ref: Some((0.499, 0.001)),
            trans_ref: (0.980, 0.012),
        },
        BenchSample {
            name: "hwp_532",
            delta_single_pi: 0.322,
            tau_m_sq: 0.857,
            group_delay_s: 3.5e-12,
            arm: SampleArm::Idler,
            branch: BranchPolicy::FromPhase,
            idler_phase_ref: (0.322, 0.006),
            idler_vis_ref: (0.321, 0.006),
            pump_phase_ref: Some((0.325, 0.006)),
            pump_vis_ref: Some((0.323, 0.006)),
            trans_ref: (0.857, 0.018),
        },
        BenchSample {
            name: "qwp_532",
            delta_single_pi: 0.172,
            tau_m_sq: 0.903,
            group_delay_s: 2.4e-12,
            arm: SampleArm::Idler,
            branch: BranchPolicy::FromPhase,
            idler_phase_ref: (0.172, 0.006),
            idler_vis_ref: (0.173, 0.010),
            pump_phase_ref: Some((0.175, 0.006)),
            pump_vis_ref: Some((0.162, 0.012)),
            trans_ref: (0.903, 0.016),
        },
        BenchSample {
            name: "qwp_800",
            delta_single_pi: 0.500,
            tau_m_sq: 0.986,
            group_delay_s: 1.5e-12,
            arm: SampleArm::Signal,
            branch: BranchPolicy::FromPhase,
            idler_phase_ref: (0.491, 0.006),
            idler_vis_ref: (0.485, 0.001),
            pump_phase_ref: None,
            pump_vis_ref: None,
            trans_ref: (0.986, 0.013),
        },
    ]
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReplicateOptions {
    pub seed: u64,
    pub trials: u32,
}

impl Default for ReplicateOptions {
    fn default() -> Self {
        Self {
            seed: 42,
            trials: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportRow {
    pub sample: String,
    /// Scanned axis, or "-" for transmission rows.
    pub axis: String,
    pub method: String,
    /// Units of π for retardation rows, plain ratio for transmission rows.
    pub mean: f64,
    pub scatter: f64,
    /// Mean of the per-trial uncertainties the estimator itself reported.
    pub mean_sigma: f64,
    pub configured: f64,
    pub reference: f64,
    pub reference_sigma: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReplicationReport {
    pub seed: u64,
    pub trials: u32,
    pub noise_note: String,
    pub statistics_note: String,
    pub tolerance_note: String,
    pub reference_note: String,
    pub rows: Vec<ReportRow>,
    pub all_pass: bool,
}

/// Deterministic seed derivation (splitmix64 finalizer chain).
pub fn derive_seed(root: u64, tags: &[u64]) -> u64 {
    let mut x = root;
    for &t in tags {
        x = x
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(t.wrapping_mul(0xBF58_476D_1CE4_E5B9));
        x ^= x >> 30;
        x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x ^= x >> 27;
        x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
    }
    x
}

fn placement_for(sample: &SampleSpec, arm: SampleArm) -> SamplePlacement {
    match arm {
        SampleArm::Idler => SamplePlacement::InIdlerArm(*sample),
        SampleArm::Signal => SamplePlacement::InSignalArm(*sample),
    }
}

fn balance_options() -> BalanceOptions {
    BalanceOptions {
        half_range: 800.0e-6,
        coarse_step: 20.0e-6,
        visibility_floor: 1.0e-3,
    }
}

fn err_num(e: impl std::fmt::Display) -> CliError {
    CliError::numerical(e.to_string())
}

/// One noisy scan at each orientation, fitted.
fn fits_for_trial(
    cfg: &InterferometerConfig,
    geometry: &ArmGeometry,
    axis: ScanAxis,
    base: &SampleSpec,
    arm: SampleArm,
    scan_seed_root: u64,
) -> Result<Vec<(f64, FitResult)>> {
    THETAS_DEG
        .iter()
        .enumerate()
        .map(|(i, &deg)| {
            let theta = deg.to_radians();
            let rotated = base.with_theta(theta).map_err(err_num)?;
            let placement = placement_for(&rotated, arm);
            let plan = ScanPlan::centered(
                axis,
                0.0,
                cfg,
                SCAN_PERIODS,
                SCAN_POINTS,
                derive_seed(scan_seed_root, &[i as u64]),
                NoiseModel::Poisson,
            )
            .map_err(err_num)?;
            let scan = synthesize_scan(&plan, geometry, cfg, &placement).map_err(err_num)?;
            let fit = fit_fringe(&scan, Some(scan.fringe_period())).map_err(err_num)?;
            Ok((theta, fit))
        })
        .collect()
}

struct DeltaAccumulator {
    phase: Vec<f64>,
    phase_sigma: Vec<f64>,
    vis: Vec<f64>,
    vis_sigma: Vec<f64>,
}

fn run_sample_axis(
    cfg: &InterferometerConfig,
    geometry: &ArmGeometry,
    bench: &BenchSample,
    base: &SampleSpec,
    axis: ScanAxis,
    trials: u32,
    seed_root: u64,
) -> Result<DeltaAccumulator> {
    let mut acc = DeltaAccumulator {
        phase: Vec::with_capacity(trials as usize),
        phase_sigma: Vec::with_capacity(trials as usize),
        vis: Vec::with_capacity(trials as usize),
        vis_sigma: Vec::with_capacity(trials as usize),
    };
    for trial in 0..trials {
        let fits = fits_for_trial(
            cfg,
            geometry,
            axis,
            base,
            bench.arm,
            derive_seed(seed_root, &[trial as u64]),
        )?;
        let phase_fits: Vec<(f64, FitResult)> = fits
            .iter()
            .filter(|(th, _)| (th.to_degrees() - PHASE_SKIP_DEG).abs() > 1e-9)
            .cloned()
            .collect();
        let m1 = method1_phase_shift(&phase_fits, axis, bench.arm).map_err(err_num)?;
        let v_min = &fits
            .iter()
            .find(|(th, _)| (th.to_degrees() - 45.0).abs() < 1e-9)
            .expect("45 degree orientation present")
            .1;
        let v_max = &fits[0].1;
        let branch = match bench.branch {
            BranchPolicy::Hint(b) => BranchChoice::Hint(b),
            BranchPolicy::FromPhase => BranchChoice::FromPhaseShift(m1.delta_single),
        };
        let m2_delta = match method2_visibility_ratio(v_min, v_max, branch) {
            Ok(est) => {
                acc.vis_sigma.push(est.sigma / PI);
                est.delta_single
            }
            // A half-wave sample sits exactly at ratio 1, so a few trials per
            // hundred fluctuate past the estimator's 3σ unity guard. With the
            // branch known a priori, such trials are the boundary estimate.
            Err(nlmi_core::MethodError::RatioAboveUnity { .. })
                if matches!(bench.branch, BranchPolicy::Hint(Branch::Reflected)) =>
            {
                PI
            }
            Err(e) => return Err(err_num(e)),
        };
        acc.phase.push(m1.delta_single / PI);
        acc.phase_sigma.push(m1.sigma / PI);
        acc.vis.push(m2_delta / PI);
    }
    Ok(acc)
}

fn run_transmission(
    cfg: &InterferometerConfig,
    bench: &BenchSample,
    base: &SampleSpec,
    trials: u32,
    seed_root: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let balanced = ArmGeometry::balanced();
    let placement = placement_for(base, bench.arm);
    let dz_sample = balance_search(&balanced, cfg, &placement, &balance_options()).map_err(err_num)?;
    let dz_ref =
        balance_search(&balanced, cfg, &SamplePlacement::Empty, &balance_options()).map_err(err_num)?;
    let mut out = Vec::with_capacity(trials as usize);
    let mut out_sigma = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        let mut g = balanced;
        g.dz_signal = dz_sample;
        let plan = ScanPlan::centered(
            ScanAxis::IdlerMirror,
            0.0,
            cfg,
            SCAN_PERIODS,
            SCAN_POINTS,
            derive_seed(seed_root, &[trial as u64, 0]),
            NoiseModel::Poisson,
        )
        .map_err(err_num)?;
        let scan = synthesize_scan(&plan, &g, cfg, &placement).map_err(err_num)?;
        let v_sample = fit_fringe(&scan, Some(scan.fringe_period())).map_err(err_num)?;

        let mut g = balanced;
        g.dz_signal = dz_ref;
        let plan = ScanPlan {
            seed: derive_seed(seed_root, &[trial as u64, 1]),
            ..plan
        };
        let scan = synthesize_scan(&plan, &g, cfg, &SamplePlacement::Empty).map_err(err_num)?;
        let v_ref = fit_fringe(&scan, Some(scan.fringe_period())).map_err(err_num)?;

        let est = estimate_transmission(&v_sample, &v_ref).map_err(err_num)?;
        out.push(est.tau_m_sq);
        out_sigma.push(est.sigma);
    }
    Ok((out, out_sigma))
}

fn mean_of(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn delta_row(
    sample: &str,
    axis: ScanAxis,
    method: &str,
    values: &[f64],
    sigmas: &[f64],
    configured: f64,
    reference: (f64, f64),
) -> ReportRow {
    // Values are in π units; aggregate on the period-π circle (the canonical
    // range wraps at 0 ≡ π for half-wave-like samples).
    let rad: Vec<f64> = values.iter().map(|v| v * PI).collect();
    let mean_canonical = circular_mean_mod_pi(&rad) / PI;
    let scatter = circular_scatter_mod_pi(&rad) / PI;
    let distance = circular_distance_mod_pi(mean_canonical * PI, configured * PI) / PI;
    // Display the representative nearest the configured value so a mean just
    // across the 0 ≡ π seam does not read as a gross miss.
    let mean = [mean_canonical - 1.0, mean_canonical, mean_canonical + 1.0]
        .into_iter()
        .min_by(|a, b| {
            (a - configured)
                .abs()
                .partial_cmp(&(b - configured).abs())
                .unwrap()
        })
        .unwrap();
    let tolerance = (2.0 * scatter).max(reference.1).max(DELTA_TOL_FLOOR);
    ReportRow {
        sample: sample.to_owned(),
        axis: axis.as_str().to_owned(),
        method: method.to_owned(),
        mean,
        scatter,
        mean_sigma: mean_of(sigmas),
        configured,
        reference: reference.0,
        reference_sigma: reference.1,
        tolerance,
        pass: distance <= tolerance,
    }
}

fn transmission_row(
    sample: &str,
    values: &[f64],
    sigmas: &[f64],
    configured: f64,
    reference: (f64, f64),
) -> ReportRow {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let scatter = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let tolerance = (2.0 * scatter).max(reference.1);
    ReportRow {
        sample: sample.to_owned(),
        axis: "-".to_owned(),
        method: "transmission".to_owned(),
        mean,
        scatter,
        mean_sigma: mean_of(sigmas),
        configured,
        reference: reference.0,
        reference_sigma: reference.1,
        tolerance,
        pass: (mean - configured).abs() <= tolerance,
    }
}

/// Run the full benchmark replication. Pure in `(seed, trials)`.
pub fn run_replication(opts: &ReplicateOptions) -> Result<ReplicationReport> {
    if opts.trials == 0 {
        return Err(CliError::usage("trials must be at least 1"));
    }
    let cfg = InterferometerConfig::default();
    let mut rows = Vec::new();
    for (si, bench) in catalog().iter().enumerate() {
        let base = SampleSpec::new(
            bench.delta_single_pi * PI,
            0.0,
            bench.tau_m_sq.sqrt(),
            bench.group_delay_s,
        )
        .map_err(err_num)?;
        let placement = placement_for(&base, bench.arm);
        let balanced = ArmGeometry::balanced();
        let dz_signal =
            balance_search(&balanced, &cfg, &placement, &balance_options()).map_err(err_num)?;
        let mut geometry = balanced;
        geometry.dz_signal = dz_signal;

        let mut axes = vec![(ScanAxis::IdlerMirror, bench.idler_phase_ref, bench.idler_vis_ref)];
        if let (Some(p), Some(v)) = (bench.pump_phase_ref, bench.pump_vis_ref) {
            axes.push((ScanAxis::PumpMirror, p, v));
        }
        for (ai, (axis, phase_ref, vis_ref)) in axes.iter().enumerate() {
            let acc = run_sample_axis(
                &cfg,
                &geometry,
                bench,
                &base,
                *axis,
                opts.trials,
                derive_seed(opts.seed, &[1, si as u64, ai as u64]),
            )?;
            rows.push(delta_row(
                bench.name,
                *axis,
                "phase_shift",
                &acc.phase,
                &acc.phase_sigma,
                bench.delta_single_pi,
                *phase_ref,
            ));
            rows.push(delta_row(
                bench.name,
                *axis,
                "visibility_ratio",
                &acc.vis,
                &acc.vis_sigma,
                bench.delta_single_pi,
                *vis_ref,
            ));
        }

        let (taus, tau_sigmas) = run_transmission(
            &cfg,
            bench,
            &base,
            opts.trials,
            derive_seed(opts.seed, &[2, si as u64]),
        )?;
        rows.push(transmission_row(
            bench.name,
            &taus,
            &tau_sigmas,
            bench.tau_m_sq,
            bench.trans_ref,
        ));
    }

    let all_pass = rows.iter().all(|r| r.pass);
    Ok(ReplicationReport {
        seed: opts.seed,
        trials: opts.trials,
        noise_note: format!(
            "tuned default count level: rate_scale={} cps, dwell={} s ({} counts/point at the fringe offset); chosen so the visibility method resolves near-half-wave retardations to better than 0.01 pi",
            cfg.rate_scale,
            cfg.dwell,
            2.0 * cfg.rate_scale * cfg.dwell
        ),
        statistics_note: "retardation rows are in pi units and aggregate on the period-pi circle (mean and scatter = rms circular distance); transmission rows are plain ratios".to_owned(),
        tolerance_note: "pass iff |mean - configured| (circular for retardation) <= tolerance = max(2*scatter, reference_sigma[, 0.001 pi floor for retardation])".to_owned(),
        reference_note: "reference columns are bundled benchmark measurements of the corresponding physical samples; configured values are this run's ground truth (532 nm plates have no manufacturer value, so their rows check self-consistency)".to_owned(),
        rows,
        all_pass,
    })
}

pub fn render_report_text(r: &ReplicationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# nlmi replication report");
    let _ = writeln!(out, "# seed={} trials={}", r.seed, r.trials);
    let _ = writeln!(out, "# noise: {}", r.noise_note);
    let _ = writeln!(out, "# statistics: {}", r.statistics_note);
    let _ = writeln!(out, "# tolerance: {}", r.tolerance_note);
    let _ = writeln!(out, "# reference: {}", r.reference_note);
    let _ = writeln!(
        out,
        "{:<10} {:<13} {:<17} {:>9} {:>9} {:>10} {:>11} {:>10} {:>10} {:>10} {:>5}",
        "sample",
        "axis",
        "method",
        "mean",
        "scatter",
        "mean_sigma",
        "configured",
        "reference",
        "ref_sigma",
        "tolerance",
        "pass"
    );
    for row in &r.rows {
        let _ = writeln!(
            out,
            "{:<10} {:<13} {:<17} {:>9.6} {:>9.6} {:>10.6} {:>11.6} {:>10.6} {:>10.6} {:>10.6} {:>5}",
            row.sample,
            row.axis,
            row.method,
            row.mean,
            row.scatter,
            row.mean_sigma,
            row.configured,
            row.reference,
            row.reference_sigma,
            row.tolerance,
            row.pass
        );
    }
    let _ = writeln!(out, "all_pass={}", r.all_pass);
    out
}

/// Write `report.txt` and `report.json`; both are pure functions of the
/// report contents (no timestamps or timings).
pub fn write_report(r: &ReplicationReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let txt = dir.join("report.txt");
    let json = dir.join("report.json");
    fs::write(&txt, render_report_text(r))?;
    let body = serde_json::to_string_pretty(r)
        .map_err(|e| CliError::usage(format!("report serialization: {e}")))?
        + "\n";
    fs::write(&json, body)?;
    Ok((txt, json))
}
