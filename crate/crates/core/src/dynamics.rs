//! Right-hand sides of the mean-field, covariance and tangent systems.
//!
//! The flow is autonomous in the extended phase space:
//!
//! ```text
//! dx/dtau = -p              dp/dtau = sin x + 2 G F(psi)
//! dpsi/dtau = Omega         dI/dtau = -2 G x dF/dpsi
//! ds_pp/dtau = 2 cos x s_px
//! ds_xx/dtau = -2 s_px
//! ds_px/dtau = cos x s_xx - s_pp
//! ```
//!
//! The covariance block is the second-moment lift of the tangent flow
//! `(d dx, d dp) = (-dp, cos x dx)`, so `s_pp s_xx - s_px^2` is conserved.

use crate::model::{FullState, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub d_x: f64,
    pub d_p: f64,
    pub d_psi: f64,
    pub d_i: f64,
    pub d_spp: f64,
    pub d_sxx: f64,
    pub d_spx: f64,
}

impl StateDerivative {
    pub(crate) fn to_array(self) -> [f64; 7] {
        [self.d_x, self.d_p, self.d_psi, self.d_i, self.d_spp, self.d_sxx, self.d_spx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector {
    pub dx: f64,
    pub dp: f64,
}

impl TangentVector {
    pub fn new(dx: f64, dp: f64) -> Self {
        Self { dx, dp }
    }

    pub fn norm(&self) -> f64 {
        self.dx.hypot(self.dp)
    }
}

/// How the drive is sampled while evaluating the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum DriveSample {
    /// Evaluate `F(psi)` from the current phase.
    Phase,
    /// Hold `F` fixed over a pulse-train segment with no edge inside it.
    Frozen(f64),
}

pub fn rhs(state: &FullState, params: &ModelParams) -> StateDerivative {
    rhs_sampled(state, params, DriveSample::Phase)
}

pub(crate) fn rhs_sampled(state: &FullState, params: &ModelParams, sample: DriveSample) -> StateDerivative {
    let pend = &state.pendulum;
    let cov = &state.cov;
    let (force, slope) = match sample {
        DriveSample::Phase => (
            params.drive.at_phase(pend.psi, params.omega),
            params.drive.phase_derivative(pend.psi),
        ),
        DriveSample::Frozen(value) => (value, 0.0),
    };
    let (sin_x, cos_x) = pend.x.sin_cos();
    StateDerivative {
        d_x: -pend.p,
        d_p: sin_x + 2.0 * params.g * force,
        d_psi: params.omega,
        d_i: -2.0 * params.g * pend.x * slope,
        d_spp: 2.0 * cos_x * cov.s_px,
        d_sxx: -2.0 * cov.s_px,
        d_spx: cos_x * cov.s_xx - cov.s_pp,
    }
}

/// Linearization of the mean flow about `state`, applied to `v`.
pub fn tangent_rhs(state: &FullState, v: &TangentVector) -> TangentVector {
    TangentVector {
        dx: -v.dp,
        dp: state.pendulum.x.cos() * v.dx,
    }
}
