//! Squeezing observables, validity radius, Lyapunov exponent, Chirikov
//! predictions, stroboscopic sections and motion classification.

use std::f64::consts::TAU;

use crate::dynamics::{rhs_sampled, tangent_rhs, TangentVector};
use crate::error::{Error, Result};
use crate::integrator::{propagate_to, propagate_with, rk4_advance, Compensated, Sample, Trajectory};
use crate::model::{build_initial_state, CovarianceState, DriveWaveform, FullState, ModelParams, COHERENT_VARIANCE};

/// Largest convergence radius for which the first-order expansion is trusted.
pub const VALIDITY_RADIUS: f64 = 0.01;

/// Relative accuracy of `S` at a refined squeezing-interval boundary.
const CROSSING_RELATIVE_TOL: f64 = 1e-6;

/// `S = N <(dp)^2>`; squeezed iff `S < 3`.
pub fn squeezing(cov: &CovarianceState) -> f64 {
    cov.s_pp
}

pub fn is_squeezed(s: f64) -> bool {
    s < COHERENT_VARIANCE
}

/// `d = sqrt((s_pp + s_xx) / N)`.
pub fn convergence_radius(cov: &CovarianceState, n_tls: u64) -> f64 {
    ((cov.s_pp + cov.s_xx) / n_tls as f64).sqrt()
}

pub fn within_validity(radius: f64) -> bool {
    radius <= VALIDITY_RADIUS
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// `S` at time `tau`, re-integrated from an earlier recorded sample.
fn squeezing_at(from: &Sample, params: &ModelParams, tau: f64, max_step: f64) -> Result<f64> {
    let state = propagate_to(&from.state, params, tau, max_step)?;
    Ok(squeezing(&state.cov))
}

/// Bisects the `S = 3` crossing between two consecutive samples.
fn refine_crossing(traj: &Trajectory, a: &Sample, b: &Sample, refine_tol: f64) -> Result<f64> {
    let side = is_squeezed(a.squeezing);
    let (mut lo, mut hi) = (a.state.tau, b.state.tau);
    let dt = traj.config.dt;
    let mut best = (hi, (b.squeezing - COHERENT_VARIANCE).abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = squeezing_at(a, &traj.params, mid, dt)?;
        let miss = (s - COHERENT_VARIANCE).abs();
        if miss < best.1 {
            best = (mid, miss);
        }
        if hi - lo <= refine_tol && miss < CROSSING_RELATIVE_TOL * COHERENT_VARIANCE {
            return Ok(mid);
        }
        if is_squeezed(s) == side {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.0)
}

/// Maximal disjoint time intervals with `S < 3`, boundaries refined by bisection.
/// An interval still open at the end of the run is closed at the last sample.
pub fn squeezing_intervals(traj: &Trajectory, refine_tol: f64) -> Result<Vec<Interval>> {
    let samples = &traj.samples;
    if samples.len() < 2 {
        return Err(Error::invalid("trajectory", "need at least two samples"));
    }
    if !(refine_tol > 0.0) {
        return Err(Error::invalid("refine_tol", "must be > 0"));
    }
    let mut intervals = Vec::new();
    let mut open = is_squeezed(samples[0].squeezing).then_some(samples[0].state.tau);
    for pair in samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if is_squeezed(a.squeezing) == is_squeezed(b.squeezing) {
            continue;
        }
        let crossing = refine_crossing(traj, a, b, refine_tol)?;
        match open.take() {
            Some(start) => intervals.push(Interval::new(start, crossing)),
            None => open = Some(crossing),
        }
    }
    if let Some(start) = open {
        intervals.push(Interval::new(start, traj.span()));
    }
    Ok(intervals)
}

/// Smallest `S` in `window` and the time it occurs, refined at ten times the
/// sampling density around the discrete minimum. Ties go to the earliest time.
pub fn min_squeezing(traj: &Trajectory, window: (f64, f64)) -> Result<(f64, f64)> {
    let (from, to) = window;
    let span = traj.span();
    let slack = 1e-9 * span.max(1.0);
    if !(from >= 0.0 && from < to && to <= span + slack) {
        return Err(Error::WindowOutOfRange { from, to, span });
    }
    let inside = |tau: f64| tau >= from - slack && tau <= to + slack;
    let samples = &traj.samples;
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in samples.iter().enumerate() {
        if inside(s.state.tau) && best.map_or(true, |(_, v)| s.squeezing < v) {
            best = Some((i, s.squeezing));
        }
    }
    let Some((idx, s_min)) = best else {
        return Err(Error::WindowOutOfRange { from, to, span });
    };
    let mut result = (s_min, samples[idx].state.tau);

    let lo = idx.saturating_sub(1);
    let hi = (idx + 1).min(samples.len() - 1);
    if hi > lo {
        let spacing = traj.config.sample_spacing();
        let per_sample = 10 * (spacing / (10.0 * traj.config.dt)).ceil().max(1.0) as usize;
        let duration = samples[hi].state.tau - samples[lo].state.tau;
        propagate_with(&samples[lo].state, &traj.params, duration, per_sample * (hi - lo), |state| {
            let s = squeezing(&state.cov);
            if inside(state.tau) && s < result.0 {
                result = (s, state.tau);
            }
        })?;
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovConfig {
    pub tau_total: f64,
    pub renorm_every: f64,
    pub dt: f64,
    pub initial_tangent: TangentVector,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            tau_total: 200.0,
            renorm_every: 1.0,
            dt: 1e-3,
            initial_tangent: TangentVector::new(1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate {
    pub lambda: f64,
    pub tau_total: f64,
    pub renorm_count: usize,
    /// Accumulated `ln ||v||` after each renormalization.
    pub log_stretch: Vec<f64>,
}

pub fn lyapunov_max(params: &ModelParams, config: &LyapunovConfig) -> Result<LyapunovEstimate> {
    params.validate()?;
    if !(config.renorm_every > 0.0 && config.dt > 0.0) {
        return Err(Error::invalid("renorm_every", "renormalization interval and step must be > 0"));
    }
    if !(config.tau_total >= 100.0 * config.renorm_every) {
        return Err(Error::invalid("tau_total", "horizon must cover at least 100 renormalizations"));
    }
    let v0 = config.initial_tangent;
    if !(v0.norm() > 0.0 && v0.norm().is_finite()) {
        return Err(Error::invalid("initial_tangent", "tangent vector must be nonzero"));
    }

    let intervals = (config.tau_total / config.renorm_every).round() as usize;
    let per_interval = (config.renorm_every / config.dt).ceil() as usize;
    let h = config.renorm_every / per_interval as f64;

    let start = build_initial_state(params);
    let mut y = [0.0; 9];
    y[..7].copy_from_slice(&start.to_array());
    let norm0 = v0.norm();
    y[7] = v0.dx / norm0;
    y[8] = v0.dp / norm0;

    let f = |y: &[f64; 9], sample| -> [f64; 9] {
        let mut head = [0.0; 7];
        head.copy_from_slice(&y[..7]);
        let state = FullState::from_array(head, 0.0);
        let d = rhs_sampled(&state, params, sample).to_array();
        let v = tangent_rhs(&state, &TangentVector::new(y[7], y[8]));
        [d[0], d[1], d[2], d[3], d[4], d[5], d[6], v.dx, v.dp]
    };

    let mut comp = Compensated::new(y);
    let wrap = params.drive.is_phase_periodic();
    let mut total = 0.0;
    let mut log_stretch = Vec::with_capacity(intervals);
    let mut k = 0usize;
    for _ in 0..intervals {
        for _ in 0..per_interval {
            let tau = k as f64 * h;
            rk4_advance(&mut comp, tau, h, &params.drive, params.omega, f);
            k += 1;
            if wrap {
                comp.wrap_phase(2);
            }
        }
        let y = comp.value;
        let norm = y[7].hypot(y[8]);
        // The covariance block may overflow on long chaotic runs; only the
        // mean state and tangent matter here.
        if !(norm.is_finite() && norm > 0.0) || !y[..4].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { tau: k as f64 * h });
        }
        total += norm.ln();
        comp.set(7, y[7] / norm);
        comp.set(8, y[8] / norm);
        log_stretch.push(total);
    }
    let tau_total = intervals as f64 * config.renorm_every;
    Ok(LyapunovEstimate {
        lambda: total / tau_total,
        tau_total,
        renorm_count: intervals,
        log_stretch,
    })
}

/// Least-squares comparison of exponential and power-law growth of `d(tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    /// `R^2` of `ln d` against `tau`.
    pub exponential_r2: f64,
    /// `R^2` of `ln d` against `ln(1 + tau)`.
    pub power_r2: f64,
    /// Slope of `ln d` against `tau`.
    pub rate: f64,
    /// Slope of `ln d` against `ln(1 + tau)`.
    pub exponent: f64,
}

impl GrowthFit {
    pub fn favors_exponential(&self) -> bool {
        self.exponential_r2 > self.power_r2
    }
}

/// Slope and `R^2` of the least-squares line through `points`.
fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if sxx == 0.0 {
        return (0.0, 0.0);
    }
    if syy == 0.0 {
        return (0.0, 1.0);
    }
    (sxy / sxx, sxy * sxy / (sxx * syy))
}

/// Fits `ln d(tau)` over the samples with `tau >= from`.
pub fn fit_radius_growth(traj: &Trajectory, from: f64) -> Result<GrowthFit> {
    let points: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.state.tau >= from)
        .map(|s| (s.state.tau, s.radius.ln()))
        .collect();
    if points.len() < 3 || !points.iter().all(|p| p.1.is_finite()) {
        return Err(Error::invalid("trajectory", "need at least three finite samples to fit growth"));
    }
    let (rate, exponential_r2) = linear_fit(&points);
    let logged: Vec<(f64, f64)> = points.iter().map(|&(t, y)| ((1.0 + t).ln(), y)).collect();
    let (exponent, power_r2) = linear_fit(&logged);
    Ok(GrowthFit {
        exponential_r2,
        power_r2,
        rate,
        exponent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirikovConfig {
    /// Order-one constant `c` in `K = c / (Omega kappa^(1/4))`.
    pub constant: f64,
    /// `kappa` at or above this counts as `kappa >> 1`.
    pub kappa_large: f64,
    /// `kappa` at or below this counts as `kappa << 1`.
    pub kappa_small: f64,
    pub omega_adiabatic: f64,
}

impl Default for ChirikovConfig {
    fn default() -> Self {
        Self {
            constant: 10.0,
            kappa_large: 5.0,
            kappa_small: 0.2,
            omega_adiabatic: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictedRegime {
    Regular,
    /// Resonance overlap, `K > 1`.
    Chaotic,
    /// Weak, fast drive: chaos confined to a thin layer at the separatrix.
    NarrowStochasticLayer,
    /// Weak, slow drive: a wide chaotic band around the separatrix.
    BroadStochasticLayer,
    AdiabaticChaos,
}

impl PredictedRegime {
    pub fn label(&self) -> &'static str {
        match self {
            PredictedRegime::Regular => "regular",
            PredictedRegime::Chaotic => "chaotic",
            PredictedRegime::NarrowStochasticLayer => "narrow-layer",
            PredictedRegime::BroadStochasticLayer => "broad-layer",
            PredictedRegime::AdiabaticChaos => "adiabatic-chaos",
        }
    }

    /// Whether the estimate predicts chaos outside a thin separatrix layer.
    pub fn predicts_chaos(&self) -> bool {
        matches!(
            self,
            PredictedRegime::Chaotic | PredictedRegime::BroadStochasticLayer | PredictedRegime::AdiabaticChaos
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirikovReport {
    /// `2 G / Omega^2`.
    pub kappa: f64,
    /// Overlap parameter; chaos expected for `K > 1`.
    pub k_param: f64,
    /// Amplitude `2 G / Omega` of the driven momentum oscillation.
    pub p_max: f64,
    pub predicted: PredictedRegime,
}

pub fn chirikov(params: &ModelParams, config: &ChirikovConfig) -> ChirikovReport {
    let omega = params.omega;
    let kappa = 2.0 * params.g / (omega * omega);
    let k_param = config.constant / (omega * kappa.powf(0.25));
    let p_max = 2.0 * params.g / omega;
    // Intermediate kappa follows the strong-coupling rule.
    let predicted = if params.g == 0.0 {
        PredictedRegime::Regular
    } else if kappa <= config.kappa_small {
        if omega > 1.0 {
            PredictedRegime::NarrowStochasticLayer
        } else {
            PredictedRegime::BroadStochasticLayer
        }
    } else if k_param > 1.0 {
        if omega <= config.omega_adiabatic {
            PredictedRegime::AdiabaticChaos
        } else {
            PredictedRegime::Chaotic
        }
    } else {
        PredictedRegime::Regular
    };
    ChirikovReport {
        kappa,
        k_param,
        p_max,
        predicted,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChaosClass {
    Regular,
    Chaotic,
    AdiabaticChaos,
}

impl ChaosClass {
    /// `R`, `C` or `AC`.
    pub fn code(&self) -> &'static str {
        match self {
            ChaosClass::Regular => "R",
            ChaosClass::Chaotic => "C",
            ChaosClass::AdiabaticChaos => "AC",
        }
    }

    pub fn is_chaotic(&self) -> bool {
        !matches!(self, ChaosClass::Regular)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyConfig {
    pub horizon: f64,
    pub lambda_threshold: f64,
    pub omega_adiabatic: f64,
    pub dt: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            horizon: 200.0,
            lambda_threshold: 0.01,
            omega_adiabatic: 0.1,
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub class: ChaosClass,
    pub lambda: f64,
}

pub fn classify(params: &ModelParams, config: &ClassifyConfig) -> Result<Classification> {
    if !(config.horizon >= 50.0) {
        return Err(Error::invalid("horizon", "classification horizon must be >= 50"));
    }
    let lyapunov = LyapunovConfig {
        tau_total: config.horizon,
        renorm_every: (config.horizon / 100.0).min(1.0),
        dt: config.dt,
        ..LyapunovConfig::default()
    };
    let lambda = lyapunov_max(params, &lyapunov)?.lambda;
    let class = if lambda <= config.lambda_threshold {
        ChaosClass::Regular
    } else if params.omega <= config.omega_adiabatic {
        ChaosClass::AdiabaticChaos
    } else {
        ChaosClass::Chaotic
    };
    Ok(Classification { class, lambda })
}

/// `(x mod 2pi, p)` at every multiple of the drive period.
pub fn poincare_section(traj: &Trajectory) -> Result<Vec<(f64, f64)>> {
    let params = &traj.params;
    if matches!(params.drive, DriveWaveform::PulseTrain { .. }) || !params.drive.is_phase_periodic() {
        return Err(Error::UnsupportedDrive(params.drive.name()));
    }
    let period = TAU / params.omega;
    let spacing = traj.config.sample_spacing();
    let ratio = period / spacing;
    let stride = ratio.round();
    if stride < 1.0 || (ratio - stride).abs() > 1e-9 * ratio {
        return Err(Error::IncommensurateStep { spacing, period });
    }
    Ok(traj
        .samples
        .iter()
        .step_by(stride as usize)
        .map(|s| (s.state.pendulum.x.rem_euclid(TAU), s.state.pendulum.p))
        .collect())
}
