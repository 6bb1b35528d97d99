//! Fixed-step classic Runge-Kutta propagation with accuracy monitoring.
//!
//! For the sinusoidal drive the extended invariant `L` is checked after every
//! step. Other drives have no conserved `L`; their accuracy is estimated by
//! re-running the trajectory at half the step and comparing the end points.
//! Pulse-train steps are split at the pulse edges so that no stage ever
//! straddles a discontinuity of the drive.

use crate::diagnostics::{convergence_radius, squeezing, VALIDITY_RADIUS};
use crate::dynamics::{rhs_sampled, DriveSample};
use crate::error::{Error, Result};
use std::f64::consts::TAU;

use crate::model::{build_initial_state, extended_invariant, DriveWaveform, FullState, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationConfig {
    /// Step size in `tau`.
    pub dt: f64,
    pub tau_end: f64,
    /// Record every `sample_every`-th step.
    pub sample_every: usize,
    /// Maximum allowed `|L(tau) - L(0)|`, also the step-halving budget.
    pub drift_tolerance: f64,
    /// Abort on accuracy or validity violations instead of recording a warning.
    pub strict: bool,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            tau_end: 50.0,
            sample_every: 1,
            drift_tolerance: 1e-9,
            strict: false,
        }
    }
}

impl IntegrationConfig {
    pub fn new(dt: f64, tau_end: f64) -> Self {
        Self {
            dt,
            tau_end,
            ..Self::default()
        }
    }

    pub fn with_sample_every(mut self, sample_every: usize) -> Self {
        self.sample_every = sample_every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", "step must be finite and > 0"));
        }
        if !(self.tau_end.is_finite() && self.tau_end > 0.0) {
            return Err(Error::invalid("tau_end", "final time must be finite and > 0"));
        }
        if self.sample_every == 0 {
            return Err(Error::invalid("sample_every", "stride must be >= 1"));
        }
        if !(self.drift_tolerance > 0.0) {
            return Err(Error::invalid("drift_tolerance", "tolerance must be > 0"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.tau_end / self.dt).round() as usize).max(1)
    }

    /// Shrinks `dt` so that `period` is an exact multiple of the step.
    pub fn snapped_to_period(mut self, period: f64) -> Self {
        let per_period = (period / self.dt).ceil().max(1.0);
        self.dt = period / per_period;
        self
    }

    /// Spacing between recorded samples.
    pub fn sample_spacing(&self) -> f64 {
        self.sample_every as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub state: FullState,
    /// `S = N <(dp)^2>`.
    pub squeezing: f64,
    /// Convergence radius `d`.
    pub radius: f64,
    /// `L(tau) - L(0)`; `None` when the drive has no monitored invariant.
    pub drift: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Warning {
    InvariantDrift { tau: f64, drift: f64 },
    StepHalving { estimate: f64 },
    ValidityRadius { tau: f64, radius: f64 },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub params: ModelParams,
    pub config: IntegrationConfig,
    /// Largest `|L(tau) - L(0)|` over every step, when monitored.
    pub max_drift: Option<f64>,
    /// Step-halving error estimate at `tau_end`, for unmonitored drives.
    pub step_halving_error: Option<f64>,
    pub warnings: Vec<Warning>,
}

impl Trajectory {
    pub fn span(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.state.tau)
    }

    pub fn first_radius_breach(&self) -> Option<(f64, f64)> {
        self.warnings.iter().find_map(|w| match *w {
            Warning::ValidityRadius { tau, radius } => Some((tau, radius)),
            _ => None,
        })
    }
}

fn rk4_increment<const D: usize>(y: &[f64; D], h: f64, f: &impl Fn(&[f64; D]) -> [f64; D]) -> [f64; D] {
    let shifted = |k: &[f64; D], c: f64| -> [f64; D] { std::array::from_fn(|i| y[i] + c * h * k[i]) };
    let k1 = f(y);
    let k2 = f(&shifted(&k1, 0.5));
    let k3 = f(&shifted(&k2, 0.5));
    let k4 = f(&shifted(&k3, 1.0));
    std::array::from_fn(|i| h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// State with a running Kahan compensation term per component.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Compensated<const D: usize> {
    pub value: [f64; D],
    carry: [f64; D],
}

impl<const D: usize> Compensated<D> {
    pub fn new(value: [f64; D]) -> Self {
        Self { value, carry: [0.0; D] }
    }

    fn add(&mut self, delta: &[f64; D]) {
        for i in 0..D {
            let corrected = delta[i] - self.carry[i];
            let sum = self.value[i] + corrected;
            self.carry[i] = (sum - self.value[i]) - corrected;
            self.value[i] = sum;
        }
    }

    /// Overwrites component `i` with an exactly known value.
    pub fn set(&mut self, i: usize, value: f64) {
        self.value[i] = value;
        self.carry[i] = 0.0;
    }

    /// Reduces phase component `i` into `[0, 2pi)`.
    ///
    /// The subtraction of the leading part of `2pi` is exact for values in
    /// `[2pi, 4pi)`; the trailing part goes into the compensation term.
    pub fn wrap_phase(&mut self, i: usize) {
        while self.value[i] >= TAU {
            self.value[i] -= TAU;
            self.carry[i] += TAU_LO;
        }
    }
}

/// `2pi - TAU` to double precision.
const TAU_LO: f64 = 2.449_293_598_294_706_4e-16;

/// One RK4 step of an autonomous system driven by `drive`, split at pulse edges.
pub(crate) fn rk4_advance<const D: usize>(
    y: &mut Compensated<D>,
    tau: f64,
    h: f64,
    drive: &DriveWaveform,
    omega: f64,
    f: impl Fn(&[f64; D], DriveSample) -> [f64; D],
) {
    if !matches!(drive, DriveWaveform::PulseTrain { .. }) {
        let delta = rk4_increment(&y.value, h, &|y| f(y, DriveSample::Phase));
        y.add(&delta);
        return;
    }
    let end = tau + h;
    let mut t = tau;
    while t < end {
        let seg_end = drive.next_edge_after(t).map_or(end, |edge| edge.min(end));
        let mid = 0.5 * (t + seg_end);
        let value = drive.at_phase(omega * mid, omega);
        let delta = rk4_increment(&y.value, seg_end - t, &|y| f(y, DriveSample::Frozen(value)));
        y.add(&delta);
        t = seg_end;
    }
}

fn advance_state(y: &mut Compensated<7>, tau: f64, params: &ModelParams, h: f64) {
    rk4_advance(y, tau, h, &params.drive, params.omega, |y, sample| {
        rhs_sampled(&FullState::from_array(*y, 0.0), params, sample).to_array()
    });
}

/// Classic four-stage Runge-Kutta update of the seven-dimensional state.
pub fn rk4_step(state: &FullState, params: &ModelParams, h: f64) -> Result<FullState> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", "step must be finite and > 0"));
    }
    let mut y = Compensated::new(state.to_array());
    advance_state(&mut y, state.tau, params, h);
    let next = FullState::from_array(y.value, state.tau + h);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::NonFiniteState { tau: next.tau })
    }
}

/// Advances `state` by `duration` in `steps` equal RK4 steps, visiting each new state.
pub(crate) fn propagate_with(
    state: &FullState,
    params: &ModelParams,
    duration: f64,
    steps: usize,
    mut visit: impl FnMut(&FullState),
) -> Result<FullState> {
    let steps = steps.max(1);
    let h = duration / steps as f64;
    let start = state.tau;
    let mut current = *state;
    for k in 1..=steps {
        current = rk4_step(&current, params, h)?;
        current.tau = start + k as f64 * h;
        visit(&current);
    }
    Ok(current)
}

/// Advances `state` to `tau` with steps no longer than `max_step`.
pub(crate) fn propagate_to(state: &FullState, params: &ModelParams, tau: f64, max_step: f64) -> Result<FullState> {
    let duration = tau - state.tau;
    if duration <= 0.0 {
        return Ok(*state);
    }
    let steps = (duration / max_step).ceil() as usize;
    propagate_with(state, params, duration, steps, |_| {})
}

fn sample_of(state: FullState, params: &ModelParams, drift: Option<f64>) -> Sample {
    Sample {
        state,
        squeezing: squeezing(&state.cov),
        radius: convergence_radius(&state.cov, params.n_tls),
        drift,
    }
}

/// Fixed-grid stepping from the initial state with compensated summation.
///
/// Phase is kept in `[0, 2pi)` when the drive is `2pi`-periodic in it, which
/// keeps `L` (whose phase sensitivity is `2 G x`) free of phase rounding.
struct Stepper<'a> {
    params: &'a ModelParams,
    dt: f64,
    k: usize,
    y: Compensated<7>,
    wrap: bool,
}

impl<'a> Stepper<'a> {
    fn new(params: &'a ModelParams, dt: f64) -> Self {
        Self {
            params,
            dt,
            k: 0,
            y: Compensated::new(build_initial_state(params).to_array()),
            wrap: params.drive.is_phase_periodic(),
        }
    }

    fn step(&mut self) -> Result<FullState> {
        advance_state(&mut self.y, self.k as f64 * self.dt, self.params, self.dt);
        self.k += 1;
        let tau = self.k as f64 * self.dt;
        if self.wrap {
            self.y.wrap_phase(2);
        }
        let state = FullState::from_array(self.y.value, tau);
        if state.is_finite() {
            Ok(state)
        } else {
            Err(Error::NonFiniteState { tau })
        }
    }
}

fn run_steps(params: &ModelParams, dt: f64, steps: usize) -> Result<FullState> {
    let mut stepper = Stepper::new(params, dt);
    let mut state = build_initial_state(params);
    for _ in 0..steps {
        state = stepper.step()?;
    }
    Ok(state)
}

/// Propagates the initial coherent state and records the trajectory.
pub fn integrate(params: &ModelParams, config: &IntegrationConfig) -> Result<Trajectory> {
    params.validate()?;
    config.validate()?;
    let monitored = params.monitors_invariant();
    let steps = config.steps();
    let mut state = build_initial_state(params);
    let l0 = extended_invariant(&state, params);

    let mut samples = Vec::with_capacity(steps / config.sample_every + 1);
    samples.push(sample_of(state, params, monitored.then_some(0.0)));
    let mut warnings = Vec::new();
    let mut max_drift = 0.0_f64;
    let mut drift_warned = false;
    let mut radius_warned = false;

    let mut stepper = Stepper::new(params, config.dt);
    for k in 1..=steps {
        state = stepper.step()?;

        let drift = monitored.then(|| extended_invariant(&state, params) - l0);
        if let Some(drift) = drift {
            max_drift = max_drift.max(drift.abs());
            if drift.abs() > config.drift_tolerance && !drift_warned {
                if config.strict {
                    return Err(Error::InvariantDriftExceeded { tau: state.tau, drift });
                }
                drift_warned = true;
                warnings.push(Warning::InvariantDrift { tau: state.tau, drift });
            }
        }
        if !radius_warned {
            let radius = convergence_radius(&state.cov, params.n_tls);
            if radius > VALIDITY_RADIUS {
                if config.strict {
                    return Err(Error::ValidityRadiusExceeded { tau: state.tau, radius });
                }
                radius_warned = true;
                warnings.push(Warning::ValidityRadius { tau: state.tau, radius });
            }
        }
        if k % config.sample_every == 0 {
            samples.push(sample_of(state, params, drift));
        }
    }

    let step_halving_error = if monitored {
        None
    } else {
        let fine = run_steps(params, 0.5 * config.dt, 2 * steps)?;
        let diff = (fine.pendulum.x - state.pendulum.x)
            .abs()
            .max((fine.pendulum.p - state.pendulum.p).abs());
        let estimate = diff * 16.0 / 15.0;
        if estimate > config.drift_tolerance {
            if config.strict {
                return Err(Error::AccuracyExceeded {
                    estimate,
                    tolerance: config.drift_tolerance,
                });
            }
            warnings.push(Warning::StepHalving { estimate });
        }
        Some(estimate)
    };

    Ok(Trajectory {
        samples,
        params: params.clone(),
        config: *config,
        max_drift: monitored.then_some(max_drift),
        step_halving_error,
        warnings,
    })
}
