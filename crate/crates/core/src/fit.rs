//! Sinusoid fitting for fringe scans and 1-D phase unwrapping.
//!
//! The model is `y(z) = C·[1 + V·cos(2πz/p + φ)]` with fringe period `p` in
//! stage coordinates (`p = λ_axis/2` for a mirror scan). Fits are weighted by
//! per-point Poisson variance (`w = 1/max(count, 1)`), initialized from the
//! dominant discrete-Fourier component, and refined by damped Gauss-Newton
//! iteration. Parameter uncertainties come from the covariance at the
//! optimum.

#![allow(clippy::needless_range_loop)]

use alloc::vec::Vec;
use core::f64::consts::PI;

use thiserror::Error;

use crate::linalg;
use crate::math;
use crate::scan::FringeScan;

const MAX_ITER: usize = 100;
/// Stop when the weighted residual norm improves by less than this fraction.
const REL_TOL: f64 = 1e-10;
/// Below this fitted visibility a scan is treated as flat.
const FLAT_VISIBILITY: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least 8 points to fit, got {0}")]
    TooFewPoints(usize),
    #[error("positions and counts differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("scan is undersampled (step beyond the fringe Nyquist limit)")]
    Undersampled,
    #[error("{0}")]
    InvalidData(&'static str),
    #[error("free-period fit needs at least one full period covered")]
    PeriodNotCovered,
    #[error("fit did not converge within {MAX_ITER} iterations")]
    DidNotConverge,
}

/// Fitted fringe parameters with 1σ uncertainties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    /// Offset `C`, counts.
    pub offset: f64,
    /// Visibility `V` in `[0, 1]`.
    pub visibility: f64,
    /// Phase at stage position zero, radians in `(-π, π]`.
    pub phase: f64,
    /// Fringe period in stage coordinates, meters.
    pub period: f64,
    pub sigma_offset: f64,
    pub sigma_visibility: f64,
    /// Infinite when the scan carries no usable fringe (phase indeterminate).
    pub sigma_phase: f64,
    /// Unweighted RMS residual, counts.
    pub residual_rms: f64,
    pub converged: bool,
}

impl FitResult {
    /// True when the fitted phase carries information (finite uncertainty).
    pub fn phase_determinate(&self) -> bool {
        self.sigma_phase.is_finite()
    }
}

/// Fringe model `C·[1 + V·cos(2πz/p + φ)]`.
pub fn fringe_model(z: f64, offset: f64, visibility: f64, phase: f64, period: f64) -> f64 {
    offset * (1.0 + visibility * math::cos(2.0 * PI * z / period + phase))
}

/// Analytic partials of [`fringe_model`] with respect to
/// `(offset, visibility, phase, period)`.
pub fn fringe_model_gradient(
    z: f64,
    offset: f64,
    visibility: f64,
    phase: f64,
    period: f64,
) -> [f64; 4] {
    let x = 2.0 * PI * z / period + phase;
    let (s, c) = (math::sin(x), math::cos(x));
    [
        1.0 + visibility * c,
        offset * c,
        -offset * visibility * s,
        offset * visibility * s * 2.0 * PI * z / (period * period),
    ]
}

/// Fit a synthesized scan. `period_hint` fixes the fringe period (the usual
/// case — the axis wavelength is known); `None` fits the period too.
pub fn fit_fringe(scan: &FringeScan, period_hint: Option<f64>) -> Result<FitResult, FitError> {
    if scan.undersampled {
        return Err(FitError::Undersampled);
    }
    fit_fringe_points(&scan.positions, &scan.counts, period_hint)
}

/// Fit raw `(position, counts)` arrays; see [`fit_fringe`].
pub fn fit_fringe_points(
    positions: &[f64],
    counts: &[f64],
    period_hint: Option<f64>,
) -> Result<FitResult, FitError> {
    let n = positions.len();
    if n != counts.len() {
        return Err(FitError::LengthMismatch(n, counts.len()));
    }
    if n < 8 {
        return Err(FitError::TooFewPoints(n));
    }
    if positions.iter().any(|v| !v.is_finite()) {
        return Err(FitError::InvalidData("non-finite position"));
    }
    if counts.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(FitError::InvalidData("counts must be finite and non-negative"));
    }
    if positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FitError::InvalidData("positions must be strictly increasing"));
    }
    if let Some(p) = period_hint {
        if !(p.is_finite() && p > 0.0) {
            return Err(FitError::InvalidData("period hint must be positive"));
        }
    }

    // Scale counts to order one so the normal matrix stays well conditioned.
    let scale = counts.iter().sum::<f64>() / n as f64;
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let z_center = positions.iter().sum::<f64>() / n as f64;
    let z: Vec<f64> = positions.iter().map(|p| p - z_center).collect();
    let y: Vec<f64> = counts.iter().map(|c| c / scale).collect();
    let w: Vec<f64> = counts
        .iter()
        .map(|c| scale * scale / c.max(1.0))
        .collect();

    let span = positions[n - 1] - positions[0];
    let period0 = match period_hint {
        Some(p) => p,
        None => {
            let (p, cycles) = dominant_period(&z, &y);
            if cycles < 0.95 {
                return Err(FitError::PeriodNotCovered);
            }
            p
        }
    };
    let free_period = period_hint.is_none();

    // Initialization: weighted mean plus the Fourier component at the period.
    let sw: f64 = w.iter().sum();
    let c0 = w.iter().zip(&y).map(|(wi, yi)| wi * yi).sum::<f64>() / sw;
    let k0 = 2.0 * PI / period0;
    let (mut a_re, mut a_im) = (0.0, 0.0);
    for ((&zi, &yi), &wi) in z.iter().zip(&y).zip(&w) {
        let d = wi * (yi - c0);
        a_re += d * math::cos(k0 * zi);
        a_im -= d * math::sin(k0 * zi);
    }
    let amp = 2.0 * math::hypot(a_re, a_im) / sw;
    let v0 = (amp / c0).min(1.5);
    let psi0 = math::atan2(a_im, a_re);

    if v0 < FLAT_VISIBILITY {
        return Ok(flat_result(&y, &w, counts, scale, c0, sw, period0));
    }

    let n_par = if free_period { 4 } else { 3 };
    let mut p = [c0, v0, psi0, 1.0];

    let model = |p: &[f64; 4], zi: f64| -> (f64, [f64; 4]) {
        let q = p[3];
        let x = 2.0 * PI * zi / (q * period0) + p[2];
        let (s, c) = (math::sin(x), math::cos(x));
        let m = p[0] * (1.0 + p[1] * c);
        let dm = [
            1.0 + p[1] * c,
            p[0] * c,
            -p[0] * p[1] * s,
            p[0] * p[1] * s * 2.0 * PI * zi / (q * q * period0),
        ];
        (m, dm)
    };
    let wssr = |p: &[f64; 4]| -> f64 {
        z.iter()
            .zip(&y)
            .zip(&w)
            .map(|((&zi, &yi), &wi)| {
                let (m, _) = model(p, zi);
                wi * (yi - m) * (yi - m)
            })
            .sum()
    };

    let mut s_prev = wssr(&p);
    let mut damp = 1e-3;
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let mut a = [[0.0; linalg::NMAX]; linalg::NMAX];
        let mut g = [0.0; linalg::NMAX];
        for ((&zi, &yi), &wi) in z.iter().zip(&y).zip(&w) {
            let (m, dm) = model(&p, zi);
            let r = yi - m;
            for i in 0..n_par {
                g[i] += wi * dm[i] * r;
                for j in i..n_par {
                    a[i][j] += wi * dm[i] * dm[j];
                }
            }
        }
        for i in 0..n_par {
            for j in 0..i {
                a[i][j] = a[j][i];
            }
        }

        let mut accepted = None;
        loop {
            let mut ad = a;
            for i in 0..n_par {
                ad[i][i] += damp * a[i][i].max(1e-300);
            }
            if let Some(step) = linalg::solve(ad, g, n_par) {
                let mut trial = p;
                for i in 0..n_par {
                    trial[i] += step[i];
                }
                normalize_params(&mut trial);
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
                if improved <= REL_TOL * s_prev + 1e-300 {
                    converged = true;
                    break;
                }
            }
            None => {
                // No damping level improves the residual: numerical optimum.
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(FitError::DidNotConverge);
    }

    if p[1] < FLAT_VISIBILITY {
        return Ok(flat_result(&y, &w, counts, scale, p[0], sw, period0));
    }

    // Covariance of the undamped normal matrix at the optimum.
    let mut a = [[0.0; linalg::NMAX]; linalg::NMAX];
    for (&zi, &wi) in z.iter().zip(&w) {
        let (_, dm) = model(&p, zi);
        for i in 0..n_par {
            for j in i..n_par {
                a[i][j] += wi * dm[i] * dm[j];
            }
        }
    }
    for i in 0..n_par {
        for j in 0..i {
            a[i][j] = a[j][i];
        }
    }
    let cov = linalg::invert(a, n_par);

    let period = p[3] * period0;
    if free_period && period > 1.05 * span {
        return Err(FitError::PeriodNotCovered);
    }
    let k = 2.0 * PI / period;
    let phase = wrap_phase(p[2] - k * z_center);
    let (sigma_offset, sigma_visibility, sigma_phase) = match cov {
        Some(c) => {
            // phase-at-origin gradient: dφ/dψ = 1, dφ/dq = z_c·k/q.
            let dq = z_center * k / p[3];
            let var_phase = if free_period {
                c[2][2] + dq * dq * c[3][3] + 2.0 * dq * c[2][3]
            } else {
                c[2][2]
            };
            (
                scale * math::sqrt(c[0][0].max(0.0)),
                math::sqrt(c[1][1].max(0.0)),
                math::sqrt(var_phase.max(0.0)),
            )
        }
        None => (f64::INFINITY, f64::INFINITY, f64::INFINITY),
    };

    let mut ss = 0.0;
    for (&zi, &ci) in z.iter().zip(counts) {
        let (m, _) = model(&p, zi);
        let r = ci - scale * m;
        ss += r * r;
    }

    Ok(FitResult {
        offset: scale * p[0],
        visibility: p[1].clamp(0.0, 1.0),
        phase,
        period,
        sigma_offset,
        sigma_visibility,
        sigma_phase,
        residual_rms: math::sqrt(ss / n as f64),
        converged: true,
    })
}

fn normalize_params(p: &mut [f64; 4]) {
    if p[1] < 0.0 {
        p[1] = -p[1];
        p[2] += PI;
    }
    p[2] = wrap_phase(p[2]);
    p[3] = p[3].clamp(0.2, 5.0);
}

fn flat_result(
    y: &[f64],
    w: &[f64],
    counts: &[f64],
    scale: f64,
    c_hat: f64,
    sw: f64,
    period: f64,
) -> FitResult {
    let offset = scale * c_hat;
    let mut ss = 0.0;
    for &c in counts {
        ss += (c - offset) * (c - offset);
    }
    let _ = (y, w);
    FitResult {
        offset,
        visibility: 0.0,
        phase: 0.0,
        period,
        sigma_offset: scale * math::sqrt(1.0 / sw),
        sigma_visibility: math::sqrt(2.0 / sw) / c_hat.max(f64::MIN_POSITIVE),
        sigma_phase: f64::INFINITY,
        residual_rms: math::sqrt(ss / counts.len() as f64),
        converged: true,
    }
}

/// Dominant period of `(z, y)` from a periodogram over quarter-bin
/// frequencies, assuming near-uniform sampling. Returns the period and the
/// winning frequency in units of cycles per span.
fn dominant_period(z: &[f64], y: &[f64]) -> (f64, f64) {
    let n = z.len();
    let mean = y.iter().sum::<f64>() / n as f64;
    let span = z[n - 1] - z[0];
    let mut best = (1.0, f64::NEG_INFINITY);
    for j in 1..=2 * n {
        let m = j as f64 / 4.0;
        let k = 2.0 * PI * m / span;
        let (mut re, mut im) = (0.0, 0.0);
        for (&zi, &yi) in z.iter().zip(y) {
            let d = yi - mean;
            re += d * math::cos(k * zi);
            im -= d * math::sin(k * zi);
        }
        let power = re * re + im * im;
        if power > best.1 {
            best = (m, power);
        }
    }
    (span / best.0, best.0)
}

/// Model-free visibility `(max - min)/(max + min)` from the scan extremes,
/// with parabolic refinement at each interior extremum. Noisy scans are
/// lightly smoothed first. Used as a consistency check against the fitted
/// visibility; the scan must cover at least one full period.
pub fn visibility_minmax(scan: &FringeScan) -> Result<f64, FitError> {
    let period = scan.fringe_period();
    if scan.span() < period {
        return Err(FitError::PeriodNotCovered);
    }
    let smoothed = match scan.plan.noise {
        crate::scan::NoiseModel::Poisson => {
            let half = ((period / scan.plan.step / 24.0) as usize).max(1);
            moving_average(&scan.counts, half)
        }
        crate::scan::NoiseModel::Noiseless => scan.counts.clone(),
    };
    let (hi, lo) = refined_extremes(&smoothed);
    if hi + lo <= 0.0 {
        return Ok(0.0);
    }
    Ok(((hi - lo) / (hi + lo)).clamp(0.0, 1.0))
}

fn moving_average(y: &[f64], half: usize) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            y[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn refined_extremes(y: &[f64]) -> (f64, f64) {
    let mut hi = f64::NEG_INFINITY;
    let mut lo = f64::INFINITY;
    let mut interior = false;
    for i in 1..y.len() - 1 {
        let (a, b, c) = (y[i - 1], y[i], y[i + 1]);
        let d2 = a - 2.0 * b + c;
        if b >= a && b >= c && d2 < 0.0 {
            let v = b - (c - a) * (c - a) / (8.0 * d2);
            hi = hi.max(v);
            interior = true;
        }
        if b <= a && b <= c && d2 > 0.0 {
            let v = b - (c - a) * (c - a) / (8.0 * d2);
            lo = lo.min(v);
            interior = true;
        }
    }
    if !interior {
        // Flat or monotone data: fall back to the raw extremes.
        for &v in y {
            hi = hi.max(v);
            lo = lo.min(v);
        }
    } else {
        // Endpoints may still be the true extremes of a partial fringe.
        hi = hi.max(y[0]).max(y[y.len() - 1]);
        lo = lo.min(y[0]).min(y[y.len() - 1]);
    }
    (hi, lo)
}

/// Wrap into `(-π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    x - 2.0 * PI * math::ceil((x - PI) / (2.0 * PI))
}

/// Remove 2π jumps from an ordered phase sequence: each successive difference
/// is mapped into `(-π, π]` and re-accumulated. The caller must sample finely
/// enough that true successive differences stay below π.
pub fn unwrap_phases(phases: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phases.len());
    let mut prev_in = f64::NAN;
    let mut prev_out = 0.0;
    for (i, &p) in phases.iter().enumerate() {
        if i == 0 {
            out.push(p);
            prev_in = p;
            prev_out = p;
        } else {
            let d = wrap_phase(p - prev_in);
            prev_out += d;
            prev_in = p;
            out.push(prev_out);
        }
    }
    out
}
