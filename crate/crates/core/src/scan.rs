//! Fringe-scan synthesis and coherence-envelope utilities.
//!
//! A scan translates one mirror (pump, signal, or idler) through a range of
//! stage positions and records expected or Poisson-drawn counts per point.
//! Synthesis is a pure function of the plan (including its seed), so scans are
//! reproducible bit for bit.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::interference::{
    fringe_visibility, signal_rate, time_delay, ArmGeometry, InterferometerConfig, SamplePlacement,
};

/// Which mirror the scan translates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanAxis {
    IdlerMirror,
    PumpMirror,
    SignalMirror,
}

impl ScanAxis {
    /// Vacuum wavelength associated with the scanned mirror; the fringe
    /// period in stage coordinates is half of it.
    pub fn wavelength(&self, config: &InterferometerConfig) -> f64 {
        match self {
            ScanAxis::IdlerMirror => config.lambda_idler(),
            ScanAxis::PumpMirror => config.lambda_pump(),
            ScanAxis::SignalMirror => config.lambda_signal(),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ScanAxis::IdlerMirror => "idler_mirror",
            ScanAxis::PumpMirror => "pump_mirror",
            ScanAxis::SignalMirror => "signal_mirror",
        }
    }
}

/// Counting-noise model applied per point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// Expected counts, no randomness.
    Noiseless,
    /// Independent Poisson draw per point, seeded by the plan.
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("scan start must be finite")]
    NonFiniteStart,
    #[error("scan needs at least one point")]
    Empty,
    #[error("no interference found: envelope stayed below {floor} over the search range")]
    NoInterference { floor: f64 },
    #[error("envelope optimum sits at the search-range edge; widen the range")]
    OptimumAtRangeEdge,
}

/// One mirror-translation scan request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPlan {
    pub axis: ScanAxis,
    /// First stage position, meters.
    pub start: f64,
    /// Stage step, meters. Positive.
    pub step: f64,
    pub n_points: usize,
    /// Seed for the per-scan RNG when `noise` is Poisson.
    pub seed: u64,
    pub noise: NoiseModel,
}

impl ScanPlan {
    pub fn new(
        axis: ScanAxis,
        start: f64,
        step: f64,
        n_points: usize,
        seed: u64,
        noise: NoiseModel,
    ) -> Result<Self, ScanError> {
        if !start.is_finite() {
            return Err(ScanError::NonFiniteStart);
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(ScanError::NonPositive("step"));
        }
        if n_points == 0 {
            return Err(ScanError::Empty);
        }
        Ok(Self {
            axis,
            start,
            step,
            n_points,
            seed,
            noise,
        })
    }

    /// A plan centered on `center` covering `periods` fringe periods with
    /// `n_points` samples along `axis`.
    pub fn centered(
        axis: ScanAxis,
        center: f64,
        config: &InterferometerConfig,
        periods: f64,
        n_points: usize,
        seed: u64,
        noise: NoiseModel,
    ) -> Result<Self, ScanError> {
        let span = periods * axis.wavelength(config) / 2.0;
        let step = span / (n_points.max(2) - 1) as f64;
        Self::new(axis, center - span / 2.0, step, n_points, seed, noise)
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points)
            .map(|k| self.start + k as f64 * self.step)
            .collect()
    }
}

/// A synthesized scan: positions, counts, and the configuration snapshot it
/// was generated under.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeScan {
    pub plan: ScanPlan,
    pub positions: Vec<f64>,
    /// Expected counts (noiseless) or integer Poisson draws stored as `f64`.
    pub counts: Vec<f64>,
    pub config: InterferometerConfig,
    pub sample: SamplePlacement,
    /// Set when the step exceeds a quarter of the axis wavelength (fringe
    /// Nyquist limit). Fitting such a scan is refused; synthesis is not.
    pub undersampled: bool,
}

impl FringeScan {
    /// Fringe period in stage coordinates, `λ_axis/2`.
    pub fn fringe_period(&self) -> f64 {
        self.plan.axis.wavelength(&self.config) / 2.0
    }

    /// Scanned length, meters.
    pub fn span(&self) -> f64 {
        self.plan.step * (self.plan.n_points.saturating_sub(1)) as f64
    }
}

/// Generate a scan by displacing the planned axis point by point.
///
/// The scanned mirror's coordinate in `geometry` is replaced by the stage
/// position; the other arms keep their values. Counts are
/// `dwell·(P + dark_rate)` per point, Poisson-drawn when requested.
pub fn synthesize_scan(
    plan: &ScanPlan,
    geometry: &ArmGeometry,
    config: &InterferometerConfig,
    sample: &SamplePlacement,
) -> Result<FringeScan, ScanError> {
    let positions = plan.positions();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut counts = Vec::with_capacity(plan.n_points);
    let mut g = *geometry;
    for &z in &positions {
        match plan.axis {
            ScanAxis::IdlerMirror => g.dz_idler = z,
            ScanAxis::PumpMirror => g.dz_pump = z,
            ScanAxis::SignalMirror => g.dz_signal = z,
        }
        let mean = config.dwell * (signal_rate(&g, config, sample) + config.dark_rate);
        let value = match plan.noise {
            NoiseModel::Noiseless => mean,
            NoiseModel::Poisson => {
                if mean > 0.0 {
                    let dist =
                        Poisson::new(mean).map_err(|_| ScanError::NonPositive("expected counts"))?;
                    dist.sample(&mut rng)
                } else {
                    0.0
                }
            }
        };
        counts.push(value);
    }
    let undersampled = plan.step > plan.axis.wavelength(config) / 4.0;
    Ok(FringeScan {
        plan: *plan,
        positions,
        counts,
        config: *config,
        sample: *sample,
        undersampled,
    })
}

/// Model visibility per signal-mirror position: `τ_m²·|t|·|μ(Δt(dz_s))|`.
/// The maximum marks the balanced position.
pub fn envelope_profile(
    dz_signal_range: &[f64],
    geometry: &ArmGeometry,
    config: &InterferometerConfig,
    sample: &SamplePlacement,
) -> Vec<f64> {
    let mut g = *geometry;
    dz_signal_range
        .iter()
        .map(|&dz| {
            g.dz_signal = dz;
            let dt = time_delay(&g, sample);
            fringe_visibility(sample, dt, &config.spectral)
        })
        .collect()
}

/// Options for [`balance_search`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceOptions {
    /// Half-width of the signal-mirror search window, meters.
    pub half_range: f64,
    /// Coarse grid step; must resolve the coherence envelope.
    pub coarse_step: f64,
    /// Smallest envelope visibility accepted as interference.
    pub visibility_floor: f64,
}

impl Default for BalanceOptions {
    fn default() -> Self {
        Self {
            half_range: 1.0e-3,
            coarse_step: 20.0e-6,
            visibility_floor: 1.0e-3,
        }
    }
}

/// Stage-step resolution to which the balanced position is refined, meters.
pub const BALANCE_TOLERANCE: f64 = 1.0e-6;

/// Locate the signal-mirror position maximizing the coherence envelope:
/// coarse grid over the window, then golden-section refinement to
/// [`BALANCE_TOLERANCE`].
///
/// Searches around `geometry.dz_signal`. Errors if the envelope never rises
/// above the floor (delay mismatch larger than the window) or if the optimum
/// sits on the window edge.
pub fn balance_search(
    geometry: &ArmGeometry,
    config: &InterferometerConfig,
    sample: &SamplePlacement,
    opts: &BalanceOptions,
) -> Result<f64, ScanError> {
    if !(opts.half_range.is_finite() && opts.half_range > 0.0) {
        return Err(ScanError::NonPositive("half_range"));
    }
    if !(opts.coarse_step.is_finite() && opts.coarse_step > 0.0) {
        return Err(ScanError::NonPositive("coarse_step"));
    }
    let center = geometry.dz_signal;
    let n = (2.0 * opts.half_range / opts.coarse_step) as usize + 2;
    let mut g = *geometry;
    let eval = |g: &mut ArmGeometry, dz: f64| {
        g.dz_signal = dz;
        let dt = time_delay(g, sample);
        fringe_visibility(sample, dt, &config.spectral)
    };

    let mut best_k = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    let grid: Vec<f64> = (0..n)
        .map(|k| center - opts.half_range + k as f64 * (2.0 * opts.half_range / (n - 1) as f64))
        .collect();
    for (k, &dz) in grid.iter().enumerate() {
        let v = eval(&mut g, dz);
        if v > best_v {
            best_v = v;
            best_k = k;
        }
    }
    if best_v < opts.visibility_floor {
        return Err(ScanError::NoInterference {
            floor: opts.visibility_floor,
        });
    }
    if best_k == 0 || best_k == n - 1 {
        return Err(ScanError::OptimumAtRangeEdge);
    }

    // Golden-section on the bracketing interval.
    let inv_phi = 0.618_033_988_749_894_9;
    let mut a = grid[best_k - 1];
    let mut b = grid[best_k + 1];
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(&mut g, c);
    let mut fd = eval(&mut g, d);
    while b - a > BALANCE_TOLERANCE {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(&mut g, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(&mut g, d);
        }
    }
    Ok(0.5 * (a + b))
}
