//! Domain types for the driven cooperative atom-field system.
//!
//! Time is measured in units of the inverse cooperative frequency
//! (`tau = omega_c * t`, `omega_c = 1`), so every quantity here is
//! dimensionless. The mean field is a driven pendulum `(x, p)` in the
//! extended phase space `(x, p, psi, I)`; the first-order fluctuations are
//! carried as a covariance pre-multiplied by the atom count `N`, which makes
//! the covariance equations independent of `N`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Squeezing threshold and coherent-state value of the normalized variances.
pub const COHERENT_VARIANCE: f64 = 3.0;

/// Determinant of the initial normalized covariance, `3 * 3 - 0`.
pub const INITIAL_DETERMINANT: f64 = COHERENT_VARIANCE * COHERENT_VARIANCE;

/// One term `amplitude * sin(multiple * psi + phase)` of a harmonic drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicTerm {
    pub amplitude: f64,
    pub multiple: f64,
    pub phase: f64,
}

/// Amplitude modulation `F` of the external field.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum DriveWaveform {
    /// `F = sin(Omega * tau)`.
    #[default]
    Sinusoidal,
    /// `F = sum_k a_k sin(k Omega tau + phi_k)`.
    HarmonicSum { terms: Vec<HarmonicTerm> },
    /// Rectangular pulses of height `amplitude` for `width` out of every `period`.
    PulseTrain {
        period: f64,
        width: f64,
        amplitude: f64,
    },
}

impl DriveWaveform {
    pub fn name(&self) -> &'static str {
        match self {
            DriveWaveform::Sinusoidal => "sinusoidal",
            DriveWaveform::HarmonicSum { .. } => "harmonic",
            DriveWaveform::PulseTrain { .. } => "pulse",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DriveWaveform::Sinusoidal => Ok(()),
            DriveWaveform::HarmonicSum { terms } => {
                if terms.is_empty() {
                    return Err(Error::invalid("drive.terms", "harmonic sum needs at least one term"));
                }
                for t in terms {
                    if !(t.amplitude.is_finite() && t.multiple.is_finite() && t.phase.is_finite()) {
                        return Err(Error::invalid("drive.terms", "harmonic terms must be finite"));
                    }
                }
                Ok(())
            }
            DriveWaveform::PulseTrain {
                period,
                width,
                amplitude,
            } => {
                if !(period.is_finite() && *period > 0.0) {
                    return Err(Error::invalid("drive.period", "pulse period must be positive"));
                }
                if !(width.is_finite() && *width > 0.0 && width < period) {
                    return Err(Error::invalid(
                        "drive.width",
                        "pulse width must satisfy 0 < width < period",
                    ));
                }
                if !amplitude.is_finite() {
                    return Err(Error::invalid("drive.amplitude", "pulse amplitude must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Drive amplitude at phase `psi = Omega * tau`.
    pub fn at_phase(&self, psi: f64, omega: f64) -> f64 {
        match self {
            DriveWaveform::Sinusoidal => psi.sin(),
            DriveWaveform::HarmonicSum { terms } => terms
                .iter()
                .map(|t| t.amplitude * (t.multiple * psi + t.phase).sin())
                .sum(),
            DriveWaveform::PulseTrain {
                period,
                width,
                amplitude,
            } => {
                if (psi / omega).rem_euclid(*period) < *width {
                    *amplitude
                } else {
                    0.0
                }
            }
        }
    }

    /// `dF/dpsi`; zero almost everywhere for the pulse train.
    pub fn phase_derivative(&self, psi: f64) -> f64 {
        match self {
            DriveWaveform::Sinusoidal => psi.cos(),
            DriveWaveform::HarmonicSum { terms } => terms
                .iter()
                .map(|t| t.amplitude * t.multiple * (t.multiple * psi + t.phase).cos())
                .sum(),
            DriveWaveform::PulseTrain { .. } => 0.0,
        }
    }

    /// Whether `F(psi + 2pi) = F(psi)`, so the phase may be reduced mod `2pi`.
    pub fn is_phase_periodic(&self) -> bool {
        match self {
            DriveWaveform::Sinusoidal => true,
            DriveWaveform::HarmonicSum { terms } => terms.iter().all(|t| t.multiple.fract() == 0.0),
            DriveWaveform::PulseTrain { .. } => false,
        }
    }

    /// Period of the drive in `tau`, if it has a single fundamental one.
    pub fn period(&self, omega: f64) -> Option<f64> {
        match self {
            DriveWaveform::Sinusoidal | DriveWaveform::HarmonicSum { .. } => Some(TAU / omega),
            DriveWaveform::PulseTrain { period, .. } => Some(*period),
        }
    }

    /// First pulse edge strictly after `tau`, for the pulse train only.
    pub(crate) fn next_edge_after(&self, tau: f64) -> Option<f64> {
        let DriveWaveform::PulseTrain { period, width, .. } = self else {
            return None;
        };
        let start = (tau / period).floor() * period;
        [start, start + width, start + period, start + period + width]
            .into_iter()
            .find(|&edge| edge > tau)
    }
}

/// `F(tau)` for a drive of frequency `omega`.
pub fn drive_value(drive: &DriveWaveform, omega: f64, tau: f64) -> f64 {
    match drive {
        DriveWaveform::PulseTrain {
            period,
            width,
            amplitude,
        } => {
            if tau.rem_euclid(*period) < *width {
                *amplitude
            } else {
                0.0
            }
        }
        _ => drive.at_phase(omega * tau, omega),
    }
}

/// Dimensionless control parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Drive strength `G`.
    pub g: f64,
    /// Drive frequency in units of the cooperative frequency.
    pub omega: f64,
    /// Initial momentum (field amplitude `alpha = p / 2`).
    pub p0: f64,
    /// Number of two-level atoms.
    pub n_tls: u64,
    pub drive: DriveWaveform,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            g: 2.0,
            omega: 0.5,
            p0: 0.0,
            n_tls: 1_000_000,
            drive: DriveWaveform::Sinusoidal,
        }
    }
}

impl ModelParams {
    pub fn sinusoidal(g: f64, omega: f64, p0: f64) -> Self {
        Self {
            g,
            omega,
            p0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(Error::invalid("g", "drive strength must be finite and >= 0"));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::invalid("omega", "drive frequency must be finite and > 0"));
        }
        if !self.p0.is_finite() {
            return Err(Error::invalid("p0", "initial momentum must be finite"));
        }
        if self.n_tls == 0 {
            return Err(Error::invalid("n_tls", "atom count must be >= 1"));
        }
        self.drive.validate()
    }

    /// Whether the extended invariant `L` is the accuracy monitor for this drive.
    pub fn monitors_invariant(&self) -> bool {
        matches!(self.drive, DriveWaveform::Sinusoidal)
    }
}

/// Mean-field point in the extended phase space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PendulumState {
    pub x: f64,
    pub p: f64,
    pub psi: f64,
    pub i_action: f64,
}

/// Fluctuation covariance multiplied by `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceState {
    pub s_pp: f64,
    pub s_xx: f64,
    pub s_px: f64,
}

impl CovarianceState {
    pub const COHERENT: CovarianceState = CovarianceState {
        s_pp: COHERENT_VARIANCE,
        s_xx: COHERENT_VARIANCE,
        s_px: 0.0,
    };

    pub fn determinant(&self) -> f64 {
        self.s_pp * self.s_xx - self.s_px * self.s_px
    }
}

impl Default for CovarianceState {
    fn default() -> Self {
        Self::COHERENT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FullState {
    pub pendulum: PendulumState,
    pub cov: CovarianceState,
    pub tau: f64,
}

impl FullState {
    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite()) && self.tau.is_finite()
    }

    /// `(x, p, psi, I, s_pp, s_xx, s_px)`.
    pub(crate) fn to_array(self) -> [f64; 7] {
        let PendulumState { x, p, psi, i_action } = self.pendulum;
        let CovarianceState { s_pp, s_xx, s_px } = self.cov;
        [x, p, psi, i_action, s_pp, s_xx, s_px]
    }

    pub(crate) fn from_array(y: [f64; 7], tau: f64) -> Self {
        FullState {
            pendulum: PendulumState {
                x: y[0],
                p: y[1],
                psi: y[2],
                i_action: y[3],
            },
            cov: CovarianceState {
                s_pp: y[4],
                s_xx: y[5],
                s_px: y[6],
            },
            tau,
        }
    }
}

/// Collective atomic polarization, inversion and field amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochObservables {
    pub j_plus: f64,
    pub j_z: f64,
    pub alpha: f64,
}

/// Field in a coherent state, atoms in the ground state.
pub fn build_initial_state(params: &ModelParams) -> FullState {
    FullState {
        pendulum: PendulumState {
            x: 0.0,
            p: params.p0,
            psi: 0.0,
            i_action: 0.0,
        },
        cov: CovarianceState::COHERENT,
        tau: 0.0,
    }
}

/// `L = p^2/2 - cos x + 2 G x F(psi) + Omega I`, conserved by the extended flow.
pub fn extended_invariant(state: &FullState, params: &ModelParams) -> f64 {
    let PendulumState { x, p, psi, i_action } = state.pendulum;
    0.5 * p * p - x.cos()
        + 2.0 * params.g * x * params.drive.at_phase(psi, params.omega)
        + params.omega * i_action
}

pub fn bloch_observables(state: &FullState) -> BlochObservables {
    let PendulumState { x, p, .. } = state.pendulum;
    BlochObservables {
        j_plus: -0.5 * x.sin(),
        j_z: -0.5 * x.cos(),
        alpha: 0.5 * p,
    }
}
