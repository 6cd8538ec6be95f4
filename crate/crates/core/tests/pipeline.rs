//! End-to-end pipeline invariants: synthesize → fit → estimate.

use core::f64::consts::PI;

use nlmi_core::{
    balance_search, estimate_transmission, fit_fringe, method1_phase_shift,
    method2_visibility_ratio, synthesize_scan, ArmGeometry, BalanceOptions, BranchChoice,
    FitResult, InterferometerConfig, NoiseModel, RetardationEstimate, SampleArm, SamplePlacement,
    SampleSpec, ScanAxis, ScanPlan, SPEED_OF_LIGHT,
};

const THETAS_DEG: [f64; 7] = [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0];

/// Configuration with a near-monochromatic detected spectrum, so the
/// coherence envelope is constant over a few-micrometer fine scan and the
/// noiseless phase equivalences hold to numerical precision. The realistic
/// default bandwidth leaves a ~1e-6 rad envelope-drift phase bias, far below
/// any noisy tolerance but visible at 1e-9.
fn long_coherence_config() -> InterferometerConfig {
    let base = InterferometerConfig::default();
    let spectral = nlmi_core::SpectralModel::new(
        nlmi_core::SpectralShape::Gaussian,
        0.0,
        2.0e10,
    )
    .unwrap();
    InterferometerConfig::new(
        base.lambda_pump(),
        base.lambda_signal(),
        base.lambda_idler(),
        spectral,
        base.rate_scale,
        base.dwell,
    )
    .unwrap()
}

fn fits_over_thetas(
    cfg: &InterferometerConfig,
    geometry: &ArmGeometry,
    axis: ScanAxis,
    sample: &SampleSpec,
    arm: SampleArm,
    seed: u64,
    noise: NoiseModel,
) -> Vec<(f64, FitResult)> {
    THETAS_DEG
        .iter()
        .enumerate()
        .map(|(i, &deg)| {
            let theta = deg.to_radians();
            let rotated = sample.with_theta(theta).unwrap();
            let placement = match arm {
                SampleArm::Idler => SamplePlacement::InIdlerArm(rotated),
                SampleArm::Signal => SamplePlacement::InSignalArm(rotated),
            };
            let center = match axis {
                ScanAxis::IdlerMirror => geometry.dz_idler,
                ScanAxis::PumpMirror => geometry.dz_pump,
                ScanAxis::SignalMirror => geometry.dz_signal,
            };
            let plan = ScanPlan::centered(
                axis,
                center,
                cfg,
                3.0,
                61,
                seed.wrapping_add(i as u64),
                noise,
            )
            .unwrap();
            let scan = synthesize_scan(&plan, geometry, cfg, &placement).unwrap();
            let fit = fit_fringe(&scan, Some(scan.fringe_period())).unwrap();
            (theta, fit)
        })
        .collect()
}

fn estimate_both(
    cfg: &InterferometerConfig,
    axis: ScanAxis,
    sample: &SampleSpec,
    arm: SampleArm,
    seed: u64,
    noise: NoiseModel,
) -> (RetardationEstimate, RetardationEstimate) {
    let geometry = ArmGeometry::balanced();
    let fits = fits_over_thetas(cfg, &geometry, axis, sample, arm, seed, noise);
    let phase_fits: Vec<(f64, FitResult)> = fits
        .iter()
        .filter(|(th, _)| (th - PI / 4.0).abs() > 1e-9)
        .cloned()
        .collect();
    let m1 = method1_phase_shift(&phase_fits, axis, arm).unwrap();
    let v_min = &fits.iter().find(|(th, _)| (th - PI / 4.0).abs() < 1e-9).unwrap().1;
    let v_max = &fits[0].1;
    let m2 = method2_visibility_ratio(
        v_min,
        v_max,
        BranchChoice::FromPhaseShift(m1.delta_single),
    )
    .unwrap();
    (m1, m2)
}

#[test]
fn methods_agree_noiselessly_across_retardations() {
    let cfg = long_coherence_config();
    for delta_pi in [0.1, 0.172, 0.322, 0.495, 0.6, 0.75, 0.9] {
        let sample = SampleSpec::new(delta_pi * PI, 0.0, 0.95, 0.0).unwrap();
        let (m1, m2) = estimate_both(
            &cfg,
            ScanAxis::IdlerMirror,
            &sample,
            SampleArm::Idler,
            0,
            NoiseModel::Noiseless,
        );
        assert!(
            (m1.delta_single - delta_pi * PI).abs() < 1e-9,
            "method 1 at δ/π={delta_pi}: got {}",
            m1.delta_single / PI
        );
        assert!(
            (m2.delta_single - delta_pi * PI).abs() < 1e-9,
            "method 2 at δ/π={delta_pi}: got {}",
            m2.delta_single / PI
        );
        assert!((m1.delta_single - m2.delta_single).abs() < 1e-9);
    }
}

#[test]
fn pump_axis_matches_idler_axis() {
    let cfg = long_coherence_config();
    for delta_pi in [0.172, 0.495, 0.9] {
        let sample = SampleSpec::new(delta_pi * PI, 0.0, 0.9, 0.0).unwrap();
        let (idler_m1, idler_m2) = estimate_both(
            &cfg,
            ScanAxis::IdlerMirror,
            &sample,
            SampleArm::Idler,
            0,
            NoiseModel::Noiseless,
        );
        let (pump_m1, pump_m2) = estimate_both(
            &cfg,
            ScanAxis::PumpMirror,
            &sample,
            SampleArm::Idler,
            0,
            NoiseModel::Noiseless,
        );
        assert!((idler_m1.delta_single - pump_m1.delta_single).abs() < 1e-9);
        assert!((idler_m2.delta_single - pump_m2.delta_single).abs() < 1e-9);
    }
}

#[test]
fn signal_arm_matches_idler_arm() {
    let cfg = long_coherence_config();
    for delta_pi in [0.322, 0.5, 0.85] {
        let sample = SampleSpec::new(delta_pi * PI, 0.0, 0.97, 0.0).unwrap();
        let (idler_m1, idler_m2) = estimate_both(
            &cfg,
            ScanAxis::IdlerMirror,
            &sample,
            SampleArm::Idler,
            0,
            NoiseModel::Noiseless,
        );
        let (signal_m1, signal_m2) = estimate_both(
            &cfg,
            ScanAxis::IdlerMirror,
            &sample,
            SampleArm::Signal,
            0,
            NoiseModel::Noiseless,
        );
        assert!(
            (idler_m1.delta_single - signal_m1.delta_single).abs() < 1e-9,
            "δ/π={delta_pi}: idler-arm {} vs signal-arm {}",
            idler_m1.delta_single / PI,
            signal_m1.delta_single / PI
        );
        assert!((idler_m2.delta_single - signal_m2.delta_single).abs() < 1e-9);
    }
}

#[test]
fn signal_mirror_scan_also_recovers_retardation() {
    let cfg = long_coherence_config();
    let sample = SampleSpec::new(0.37 * PI, 0.0, 1.0, 0.0).unwrap();
    let (m1, _) = estimate_both(
        &cfg,
        ScanAxis::SignalMirror,
        &sample,
        SampleArm::Idler,
        0,
        NoiseModel::Noiseless,
    );
    assert!((m1.delta_single - 0.37 * PI).abs() < 1e-9);
    let (m1, _) = estimate_both(
        &cfg,
        ScanAxis::SignalMirror,
        &sample,
        SampleArm::Signal,
        0,
        NoiseModel::Noiseless,
    );
    assert!((m1.delta_single - 0.37 * PI).abs() < 1e-9);
}

#[test]
fn noisy_estimates_stay_near_truth() {
    // Light Monte Carlo sanity check; the acceptance suite runs the full one.
    let cfg = InterferometerConfig::default();
    let delta = 0.495 * PI;
    let sample = SampleSpec::new(delta, 0.0, 0.98_f64.sqrt(), 0.0).unwrap();
    let trials = 20;
    let mut m1s = Vec::new();
    let mut m2s = Vec::new();
    for t in 0..trials {
        let (m1, m2) = estimate_both(
            &cfg,
            ScanAxis::IdlerMirror,
            &sample,
            SampleArm::Idler,
            1000 + 100 * t,
            NoiseModel::Poisson,
        );
        m1s.push(m1.delta_single);
        m2s.push(m2.delta_single);
    }
    let mean1 = m1s.iter().sum::<f64>() / trials as f64;
    let mean2 = m2s.iter().sum::<f64>() / trials as f64;
    assert!((mean1 - delta).abs() < 0.002 * PI, "m1 mean {}", mean1 / PI);
    assert!((mean2 - delta).abs() < 0.002 * PI, "m2 mean {}", mean2 / PI);
}

#[test]
fn noisy_visibility_curve_replication() {
    // Fit the full visibility-versus-orientation curve from noisy scans of a
    // low-retardation plate; the curve estimator should land within 0.01π.
    let cfg = InterferometerConfig::default();
    let delta = 0.173 * PI;
    let tau_sq: f64 = 0.903;
    let sample = SampleSpec::new(delta, 0.0, tau_sq.sqrt(), 0.0).unwrap();
    let geometry = ArmGeometry::balanced();
    let mut thetas = Vec::new();
    let mut vis = Vec::new();
    let mut sigmas = Vec::new();
    for k in 0..=9 {
        let theta = PI / 2.0 * k as f64 / 9.0;
        let rotated = sample.with_theta(theta).unwrap();
        let plan = ScanPlan::centered(
            ScanAxis::PumpMirror,
            0.0,
            &cfg,
            3.0,
            61,
            4100 + k,
            NoiseModel::Poisson,
        )
        .unwrap();
        let scan =
            synthesize_scan(&plan, &geometry, &cfg, &SamplePlacement::InIdlerArm(rotated)).unwrap();
        let fit = fit_fringe(&scan, Some(scan.fringe_period())).unwrap();
        thetas.push(theta);
        vis.push(fit.visibility);
        sigmas.push(fit.sigma_visibility);
    }
    let curve = nlmi_core::VisibilityCurve::new(thetas, vis, sigmas).unwrap();
    let fit = nlmi_core::fit_visibility_curve(
        &curve,
        1.0,
        BranchChoice::Hint(nlmi_core::Branch::Principal),
    )
    .unwrap();
    assert!(
        (fit.delta_single - delta).abs() < 0.01 * PI,
        "δ/π = {}",
        fit.delta_single / PI
    );
    assert!((fit.tau_m_sq - tau_sq).abs() < 0.01, "τ² = {}", fit.tau_m_sq);
    assert!(fit.sigma_delta > 0.0 && fit.sigma_delta < 0.01 * PI);
}

#[test]
fn transmission_pipeline_and_scale_invariance() {
    let make_cfg = |rate: f64| {
        let base = InterferometerConfig::default();
        InterferometerConfig::new(
            base.lambda_pump(),
            base.lambda_signal(),
            base.lambda_idler(),
            base.spectral,
            rate,
            base.dwell,
        )
        .unwrap()
    };
    let tau_sq: f64 = 0.857;
    let run = |rate: f64| {
        let cfg = make_cfg(rate);
        let sample = SampleSpec::new(0.322 * PI, 0.0, tau_sq.sqrt(), 1.2e-12).unwrap();
        let placement = SamplePlacement::InIdlerArm(sample);
        let geometry = ArmGeometry::balanced();
        let opts = BalanceOptions {
            half_range: 400.0e-6,
            coarse_step: 20.0e-6,
            ..BalanceOptions::default()
        };
        let dz_s = balance_search(&geometry, &cfg, &placement, &opts).unwrap();
        assert!((dz_s - SPEED_OF_LIGHT * 1.2e-12 / 2.0).abs() < 1.0e-6);

        let mut g_sample = geometry;
        g_sample.dz_signal = dz_s;
        let plan = ScanPlan::centered(ScanAxis::IdlerMirror, 0.0, &cfg, 3.0, 61, 5, NoiseModel::Noiseless)
            .unwrap();
        let scan = synthesize_scan(&plan, &g_sample, &cfg, &placement).unwrap();
        let v_sample = fit_fringe(&scan, Some(scan.fringe_period())).unwrap();

        let scan = synthesize_scan(&plan, &geometry, &cfg, &SamplePlacement::Empty).unwrap();
        let v_ref = fit_fringe(&scan, Some(scan.fringe_period())).unwrap();
        estimate_transmission(&v_sample, &v_ref).unwrap()
    };
    // Recovery is limited by the 1 μm balance-search resolution, which leaves
    // a sub-μm envelope offset between the sample and reference scans.
    let a = run(5.0e5);
    assert!((a.tau_m_sq - tau_sq).abs() < 5e-5, "got {}", a.tau_m_sq);
    // Scale invariance is exact: rate_scale cancels in the visibility ratio.
    let b = run(3.7e6);
    assert!((a.tau_m_sq - b.tau_m_sq).abs() < 1e-9);
}

#[test]
fn fourier_dominant_period_matches_axis() {
    // DFT periodogram of any noiseless scan peaks at λ_axis/2 within a bin.
    let cfg = InterferometerConfig::default();
    for (axis, lambda) in [
        (ScanAxis::IdlerMirror, cfg.lambda_idler()),
        (ScanAxis::PumpMirror, cfg.lambda_pump()),
        (ScanAxis::SignalMirror, cfg.lambda_signal()),
    ] {
        let plan = ScanPlan::centered(axis, 0.0, &cfg, 4.0, 128, 0, NoiseModel::Noiseless).unwrap();
        let scan =
            synthesize_scan(&plan, &ArmGeometry::balanced(), &cfg, &SamplePlacement::Empty)
                .unwrap();
        let n = scan.counts.len();
        let mean = scan.counts.iter().sum::<f64>() / n as f64;
        let span = scan.positions[n - 1] - scan.positions[0];
        let mut best = (1usize, f64::NEG_INFINITY);
        for m in 1..=n / 2 {
            let k = 2.0 * PI * m as f64 / span;
            let (mut re, mut im) = (0.0, 0.0);
            for (&z, &y) in scan.positions.iter().zip(&scan.counts) {
                re += (y - mean) * (k * z).cos();
                im -= (y - mean) * (k * z).sin();
            }
            let p = re * re + im * im;
            if p > best.1 {
                best = (m, p);
            }
        }
        let period = span / best.0 as f64;
        let next = span / (best.0 as f64 + 1.0);
        let bin_width = period - next;
        assert!(
            (period - lambda / 2.0).abs() <= bin_width,
            "axis {axis:?}: period {period} vs {}",
            lambda / 2.0
        );
    }
}

#[test]
fn fit_of_synthesized_sample_scan_reads_visibility_and_phase() {
    // A θ=0 idler-arm sample: fitted V is τ²·|μ| and the fitted phase moves
    // by -δ relative to the no-sample fringe (idler-axis sign convention).
    let cfg = long_coherence_config();
    let delta = 0.27 * PI;
    let tau_sq: f64 = 0.91;
    let sample = SampleSpec::new(delta, 0.0, tau_sq.sqrt(), 0.0).unwrap();
    let plan =
        ScanPlan::centered(ScanAxis::IdlerMirror, 0.0, &cfg, 3.0, 61, 0, NoiseModel::Noiseless)
            .unwrap();
    let g = ArmGeometry::balanced();
    let with = synthesize_scan(&plan, &g, &cfg, &SamplePlacement::InIdlerArm(sample)).unwrap();
    let without = synthesize_scan(&plan, &g, &cfg, &SamplePlacement::Empty).unwrap();
    let f_with = fit_fringe(&with, Some(with.fringe_period())).unwrap();
    let f_without = fit_fringe(&without, Some(without.fringe_period())).unwrap();
    assert!((f_with.visibility / f_without.visibility - tau_sq).abs() < 1e-6);
    let shift = nlmi_core::fit::wrap_phase(f_with.phase - f_without.phase);
    assert!((shift + delta).abs() < 1e-7, "shift {shift} vs -δ {}", -delta);
}
