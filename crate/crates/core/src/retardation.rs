//! Retardation and transmission estimators built on fitted fringe scans.
//!
//! Two routes to the single-pass retardation δ:
//!
//! 1. **Phase shift.** Fringe phases fitted at sample orientations from 0 to
//!    90° are unwrapped; the endpoint difference is the double-pass
//!    retardation 2δ (mod 2π). Tracking intermediate orientations resolves
//!    shifts beyond ±π (a near-half-wave sample moves the pattern by a full
//!    fringe).
//! 2. **Visibility ratio.** The fringe visibility is extremal at θ ∈ {0°, 90°}
//!    and 45°, with `V_min/V_max = |cos δ|`. The arccos leaves a δ ↔ π-δ
//!    branch ambiguity that must be resolved explicitly — by prior knowledge
//!    or by a phase-shift result; it is never guessed.
//!
//! Relative fringe observables determine δ only modulo π, so estimates are
//! canonical in `[0, π)`; aggregation across noisy trials should use the
//! period-π circular statistics provided here.

use alloc::vec::Vec;
use core::f64::consts::PI;

use thiserror::Error;

use crate::fit::{unwrap_phases, FitResult};
use crate::interference::SampleArm;
use crate::linalg;
use crate::math;
use crate::scan::ScanAxis;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MethodError {
    #[error("orientation set must include {0}")]
    MissingEndpoint(&'static str),
    #[error("fringe phase at {0} is indeterminate (no usable fringe)")]
    IndeterminateEndpoint(&'static str),
    #[error("fitted phases must be finite")]
    NonFinitePhase,
    #[error("unwrapped phase jump of {jump:.3} rad between adjacent orientations; θ grid too coarse")]
    UnwrapAmbiguous { jump: f64 },
    #[error("need at least {need} orientations, got {got}")]
    TooFewOrientations { need: usize, got: usize },
    #[error("orientations must span 0 to π/2")]
    InsufficientSpan,
    #[error("maximum visibility is zero; no fringe at any orientation")]
    ZeroMaximumVisibility,
    #[error("visibility ratio {ratio:.4} exceeds unity beyond noise (σ = {sigma:.4})")]
    RatioAboveUnity { ratio: f64, sigma: f64 },
    #[error("reference visibility is zero")]
    ReferenceVisibilityZero,
    #[error("curve fit did not converge")]
    DidNotConverge,
}

/// Which solution of `|cos δ| = ratio` a visibility method reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// δ ∈ [0, π/2].
    Principal,
    /// π - δ ∈ [π/2, π].
    Reflected,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Principal => "principal",
            Branch::Reflected => "reflected",
        }
    }
}

/// How to resolve the visibility-method branch ambiguity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchChoice {
    Hint(Branch),
    /// Pick the branch circularly closest to a phase-shift estimate (radians).
    FromPhaseShift(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    PhaseShift,
    VisibilityRatio,
    VisibilityCurve,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::PhaseShift => "phase_shift",
            Method::VisibilityRatio => "visibility_ratio",
            Method::VisibilityCurve => "visibility_curve",
        }
    }
}

/// Record of the scans an estimate was built from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScanProvenance {
    pub axis: Option<ScanAxis>,
    pub arm: Option<SampleArm>,
    /// Sample orientations used, radians.
    pub thetas: Vec<f64>,
}

/// A single-pass retardation estimate, canonical in `[0, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RetardationEstimate {
    pub delta_single: f64,
    pub sigma: f64,
    pub method: Method,
    pub branch: Branch,
    /// Phase-shift method only: the signed unwrapped double-pass shift before
    /// mod-2π reduction, recording how the canonical value was reached.
    pub raw_double_pass: Option<f64>,
    pub provenance: ScanProvenance,
}

/// Measured visibilities versus sample orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityCurve {
    thetas: Vec<f64>,
    visibilities: Vec<f64>,
    sigmas: Vec<f64>,
}

impl VisibilityCurve {
    /// `sigmas` entries of zero mean "unweighted point".
    pub fn new(
        thetas: Vec<f64>,
        visibilities: Vec<f64>,
        sigmas: Vec<f64>,
    ) -> Result<Self, MethodError> {
        let n = thetas.len();
        if visibilities.len() != n || sigmas.len() != n {
            return Err(MethodError::TooFewOrientations {
                need: n,
                got: visibilities.len().min(sigmas.len()),
            });
        }
        if visibilities.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(MethodError::NonFinitePhase);
        }
        Ok(Self {
            thetas,
            visibilities,
            sigmas,
        })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn visibilities(&self) -> &[f64] {
        &self.visibilities
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }
}

/// Result of [`fit_visibility_curve`].
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityCurveFit {
    pub delta_single: f64,
    pub tau_m_sq: f64,
    pub sigma_delta: f64,
    pub sigma_tau_m_sq: f64,
    pub branch: Branch,
    pub converged: bool,
}

/// Transmission `τ_m²` from matched-balance visibility ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionEstimate {
    pub tau_m_sq: f64,
    pub sigma: f64,
}

/// Sign relating the fitted-phase endpoint difference `φ(0°) - φ(90°)` to the
/// positive double-pass retardation, for each scan axis and sample arm.
///
/// In the idler-arm rate the scanned idler (or signal) phase enters the fringe
/// argument with the opposite sign to the sample term, flipping the fitted
/// phase; the pump phase enters with the same sign. The signal-arm rate has
/// the whole argument negated, so every sign flips with it.
pub fn phase_shift_sign(axis: ScanAxis, arm: SampleArm) -> f64 {
    match (arm, axis) {
        (SampleArm::Idler, ScanAxis::PumpMirror) => 1.0,
        (SampleArm::Idler, _) => -1.0,
        (SampleArm::Signal, ScanAxis::PumpMirror) => -1.0,
        (SampleArm::Signal, _) => 1.0,
    }
}

const THETA_TOL: f64 = 1e-6;

/// Method 1: retardation from the unwrapped fringe-phase shift across sample
/// orientations 0 → 90°.
///
/// Fits whose phase is indeterminate (infinite `sigma_phase`, e.g. the
/// zero-visibility orientation of a quarter-wave sample) are skipped; both
/// endpoints must remain. The double-pass shift is reduced mod 2π and halved;
/// `raw_double_pass` preserves the signed value.
pub fn method1_phase_shift(
    fits_by_theta: &[(f64, FitResult)],
    axis: ScanAxis,
    arm: SampleArm,
) -> Result<RetardationEstimate, MethodError> {
    let mut usable: Vec<(f64, f64, f64)> = fits_by_theta
        .iter()
        .filter(|(_, f)| f.sigma_phase.is_finite())
        .map(|(th, f)| (*th, f.phase, f.sigma_phase))
        .collect();
    usable.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let has_theta = |target: f64| usable.iter().any(|(th, _, _)| (th - target).abs() < THETA_TOL);
    let had_theta = |target: f64| {
        fits_by_theta
            .iter()
            .any(|(th, _)| (th - target).abs() < THETA_TOL)
    };
    if !has_theta(0.0) {
        return Err(if had_theta(0.0) {
            MethodError::IndeterminateEndpoint("θ=0")
        } else {
            MethodError::MissingEndpoint("θ=0")
        });
    }
    if !has_theta(PI / 2.0) {
        return Err(if had_theta(PI / 2.0) {
            MethodError::IndeterminateEndpoint("θ=90°")
        } else {
            MethodError::MissingEndpoint("θ=90°")
        });
    }
    if usable.iter().any(|(_, p, _)| !p.is_finite()) {
        return Err(MethodError::NonFinitePhase);
    }

    let phases: Vec<f64> = usable.iter().map(|u| u.1).collect();
    let unwrapped = unwrap_phases(&phases);
    for pair in unwrapped.windows(2) {
        let jump = math::abs(pair[1] - pair[0]);
        if jump > PI + 1e-9 {
            return Err(MethodError::UnwrapAmbiguous { jump });
        }
    }

    let first = unwrapped[0];
    let last = unwrapped[unwrapped.len() - 1];
    let raw = phase_shift_sign(axis, arm) * (first - last);
    let delta_single = math::rem_euclid(raw, 2.0 * PI) / 2.0;
    let sigma = math::hypot(usable[0].2, usable[usable.len() - 1].2) / 2.0;

    Ok(RetardationEstimate {
        delta_single,
        sigma,
        method: Method::PhaseShift,
        branch: Branch::Principal,
        raw_double_pass: Some(raw),
        provenance: ScanProvenance {
            axis: Some(axis),
            arm: Some(arm),
            thetas: usable.iter().map(|u| u.0).collect(),
        },
    })
}

/// Method 2: retardation from `arccos(V_min/V_max)` with an explicit branch
/// resolution.
///
/// `v_min` is the fit at θ=45°, `v_max` at θ ∈ {0°, 90°}. A ratio above unity
/// by more than 3σ is rejected; within noise it is clamped.
pub fn method2_visibility_ratio(
    v_min: &FitResult,
    v_max: &FitResult,
    branch: BranchChoice,
) -> Result<RetardationEstimate, MethodError> {
    if v_max.visibility <= 1e-9 {
        return Err(MethodError::ZeroMaximumVisibility);
    }
    let ratio = v_min.visibility / v_max.visibility;
    let sigma_ratio = math::sqrt(
        math::sq(v_min.sigma_visibility / v_max.visibility)
            + math::sq(ratio * v_max.sigma_visibility / v_max.visibility),
    );
    if ratio > 1.0 + 3.0 * sigma_ratio {
        return Err(MethodError::RatioAboveUnity {
            ratio,
            sigma: sigma_ratio,
        });
    }
    let r = ratio.clamp(0.0, 1.0);
    let principal = math::acos(r);
    // First-order propagation through arccos; near the |cos δ| = 1 endpoint
    // the derivative diverges and the √σ half-order scaling takes over.
    let denom = 1.0 - r * r;
    let sigma = if denom > sigma_ratio {
        sigma_ratio / math::sqrt(denom)
    } else {
        math::sqrt(sigma_ratio.max(0.0))
    };

    let (delta, chosen) = resolve_branch(principal, branch);
    Ok(RetardationEstimate {
        delta_single: math::rem_euclid(delta, PI),
        sigma,
        method: Method::VisibilityRatio,
        branch: chosen,
        raw_double_pass: None,
        provenance: ScanProvenance::default(),
    })
}

fn resolve_branch(principal: f64, choice: BranchChoice) -> (f64, Branch) {
    match choice {
        BranchChoice::Hint(Branch::Principal) => (principal, Branch::Principal),
        BranchChoice::Hint(Branch::Reflected) => (PI - principal, Branch::Reflected),
        BranchChoice::FromPhaseShift(reference) => {
            let d_p = circular_distance_mod_pi(principal, reference);
            let d_r = circular_distance_mod_pi(PI - principal, reference);
            if d_p <= d_r {
                (principal, Branch::Principal)
            } else {
                (PI - principal, Branch::Reflected)
            }
        }
    }
}

/// Fit `V(θ) = τ_m²·μ·√(cos²δ + sin²δ·cos²2θ)` for `(δ, τ_m²)` by weighted
/// damped Gauss-Newton. `mu_mag` is the envelope magnitude at the scan
/// delay, supplied externally — only the product `τ_m²·μ` is identifiable
/// from the curve. The δ ↔ π-δ ambiguity is resolved like Method 2.
pub fn fit_visibility_curve(
    curve: &VisibilityCurve,
    mu_mag: f64,
    branch: BranchChoice,
) -> Result<VisibilityCurveFit, MethodError> {
    let n = curve.thetas.len();
    if n < 5 {
        return Err(MethodError::TooFewOrientations { need: 5, got: n });
    }
    let th_min = curve.thetas.iter().cloned().fold(f64::INFINITY, f64::min);
    let th_max = curve
        .thetas
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if th_min > PI / 8.0 || th_max < 3.0 * PI / 8.0 {
        return Err(MethodError::InsufficientSpan);
    }
    let w: Vec<f64> = curve
        .sigmas
        .iter()
        .map(|&s| if s > 0.0 { 1.0 / (s * s) } else { 1.0 })
        .collect();

    let vmax = curve.visibilities.iter().cloned().fold(0.0, f64::max);
    let vmin = curve.visibilities.iter().cloned().fold(1.0, f64::min);
    if vmax <= 1e-9 {
        return Err(MethodError::ZeroMaximumVisibility);
    }
    if vmax - vmin < 1e-12 * vmax.max(1e-12) {
        // Flat curve: δ is either 0 or π, only τ²·μ is determined.
        let mean = curve.visibilities.iter().sum::<f64>() / n as f64;
        let sw: f64 = w.iter().sum();
        return Ok(VisibilityCurveFit {
            delta_single: 0.0,
            tau_m_sq: mean / mu_mag,
            sigma_delta: f64::INFINITY,
            sigma_tau_m_sq: math::sqrt(1.0 / sw) / mu_mag,
            branch: Branch::Principal,
            converged: true,
        });
    }

    // p = [τ², δ] on the principal branch.
    let mut p = [
        (vmax / mu_mag).clamp(1e-6, 2.0),
        math::acos((vmin / vmax).clamp(0.0, 1.0)),
    ];
    let model = |p: &[f64; 2], th: f64| -> (f64, [f64; 2]) {
        let (sd, cd) = (math::sin(p[1]), math::cos(p[1]));
        let c2 = math::cos(2.0 * th);
        let g2 = cd * cd + sd * sd * c2 * c2;
        let g = math::sqrt(g2.max(1e-300));
        let v = p[0] * mu_mag * g;
        let dv_ddelta = p[0] * mu_mag * (-sd * cd * (1.0 - c2 * c2)) / g;
        (v, [mu_mag * g, dv_ddelta])
    };
    let wssr = |p: &[f64; 2]| -> f64 {
        curve
            .thetas
            .iter()
            .zip(&curve.visibilities)
            .zip(&w)
            .map(|((&th, &v), &wi)| {
                let (m, _) = model(p, th);
                wi * (v - m) * (v - m)
            })
            .sum()
    };

    let mut s_prev = wssr(&p);
    let mut damp = 1e-3;
    let mut converged = false;
    for _ in 0..100 {
        let mut a = [[0.0; linalg::NMAX]; linalg::NMAX];
        let mut grad = [0.0; linalg::NMAX];
        for ((&th, &v), &wi) in curve.thetas.iter().zip(&curve.visibilities).zip(&w) {
            let (m, dm) = model(&p, th);
            let r = v - m;
            for i in 0..2 {
                grad[i] += wi * dm[i] * r;
                for j in i..2 {
                    a[i][j] += wi * dm[i] * dm[j];
                }
            }
        }
        a[1][0] = a[0][1];

        let mut accepted = None;
        loop {
            let mut ad = a;
            for (i, row) in ad.iter_mut().enumerate().take(2) {
                row[i] += damp * a[i][i].max(1e-300);
            }
            if let Some(step) = linalg::solve(ad, grad, 2) {
                let mut trial = [p[0] + step[0], p[1] + step[1], 0.0, 0.0];
                trial[0] = trial[0].max(1e-9);
                trial[1] = trial[1].clamp(0.0, PI / 2.0);
                let trial = [trial[0], trial[1]];
                let s_new = wssr(&trial);
                if s_new.is_finite() && s_new <= s_prev {
                    accepted = Some((trial, s_new));
                    damp = (damp / 10.0).max(1e-14);
                    break;
                }
            }
            damp *= 10.0;
            if damp > 1e15 {
                break;
            }
        }
        match accepted {
            Some((trial, s_new)) => {
                p = trial;
                let improved = s_prev - s_new;
                s_prev = s_new;
                if improved <= 1e-12 * s_prev + 1e-300 {
                    converged = true;
                    break;
                }
            }
            None => {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(MethodError::DidNotConverge);
    }

    let mut a = [[0.0; linalg::NMAX]; linalg::NMAX];
    for (&th, &wi) in curve.thetas.iter().zip(&w) {
        let (_, dm) = model(&p, th);
        for i in 0..2 {
            for j in i..2 {
                a[i][j] += wi * dm[i] * dm[j];
            }
        }
    }
    a[1][0] = a[0][1];
    let (sigma_tau, sigma_delta) = match linalg::invert(a, 2) {
        Some(c) => (
            math::sqrt(c[0][0].max(0.0)),
            math::sqrt(c[1][1].max(0.0)),
        ),
        None => (f64::INFINITY, f64::INFINITY),
    };

    let (delta, chosen) = resolve_branch(p[1], branch);
    Ok(VisibilityCurveFit {
        delta_single: math::rem_euclid(delta, PI),
        tau_m_sq: p[0],
        sigma_delta,
        sigma_tau_m_sq: sigma_tau,
        branch: chosen,
        converged: true,
    })
}

/// Transmission `τ_m² = V_sample/V_reference` from two fits taken at their
/// respective balanced positions with the sample axis at θ ∈ {0°, 90°}
/// (where `|t| = 1`, cancelling retardation; matched balance cancels `μ`).
pub fn estimate_transmission(
    v_sample_max: &FitResult,
    v_reference: &FitResult,
) -> Result<TransmissionEstimate, MethodError> {
    let vr = v_reference.visibility;
    if vr <= 1e-9 {
        return Err(MethodError::ReferenceVisibilityZero);
    }
    let vs = v_sample_max.visibility;
    let tau_m_sq = vs / vr;
    let sigma = math::sqrt(
        math::sq(v_sample_max.sigma_visibility / vr)
            + math::sq(tau_m_sq * v_reference.sigma_visibility / vr),
    );
    Ok(TransmissionEstimate { tau_m_sq, sigma })
}

/// Circular distance on the period-π retardation circle, in `[0, π/2]`.
pub fn circular_distance_mod_pi(a: f64, b: f64) -> f64 {
    let d = math::rem_euclid(a - b, PI);
    d.min(PI - d)
}

/// Circular mean on the period-π circle, in `[0, π)`. Values clustered at the
/// 0 ≡ π seam (e.g. half-wave samples) average correctly.
pub fn circular_mean_mod_pi(values: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for &x in values {
        s += math::sin(2.0 * x);
        c += math::cos(2.0 * x);
    }
    math::rem_euclid(0.5 * math::atan2(s, c), PI)
}

/// Sample scatter (RMS circular distance to the circular mean) on the
/// period-π circle.
pub fn circular_scatter_mod_pi(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = circular_mean_mod_pi(values);
    let ss: f64 = values
        .iter()
        .map(|&x| {
            let d = circular_distance_mod_pi(x, mean);
            d * d
        })
        .sum();
    math::sqrt(ss / (values.len() - 1) as f64)
}
