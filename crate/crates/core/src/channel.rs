//! Fiber channel: amplitude transmittance, Alice-referred excess noise and a
//! Wiener phase drift between signal and local oscillator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{QuadraturePair, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Power transmittance T.
    pub transmittance: f64,
    /// Excess noise ξ, referred to the channel input, in N₀.
    pub excess_noise: f64,
    /// Standard deviation of the per-pulse phase increment, radians.
    pub phase_step_std: f64,
    pub initial_phase: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            transmittance: 0.28,
            excess_noise: 0.055,
            phase_step_std: 1e-5,
            initial_phase: 1.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.transmittance > 0.0 && self.transmittance <= 1.0) {
            return Err(Error::invalid("transmittance", self.transmittance, "must lie in (0, 1]"));
        }
        if !(self.excess_noise >= 0.0 && self.excess_noise.is_finite()) {
            return Err(Error::invalid("excess_noise", self.excess_noise, "must be non-negative"));
        }
        if !(self.phase_step_std >= 0.0 && self.phase_step_std.is_finite()) {
            return Err(Error::invalid("phase_step_std", self.phase_step_std, "must be non-negative"));
        }
        if !self.initial_phase.is_finite() {
            return Err(Error::invalid("initial_phase", self.initial_phase, "must be finite"));
        }
        Ok(())
    }
}

/// True relative phase between the signal and the local oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrack {
    pub theta: f64,
    pub pulse_index: u64,
}

impl PhaseTrack {
    pub fn new(theta: f64, pulse_index: u64) -> Self {
        Self { theta, pulse_index }
    }
}

/// Advances the random walk by one pulse.
pub fn step_phase(track: PhaseTrack, params: &ChannelParams, rng: &mut RngStream) -> PhaseTrack {
    let step = if params.phase_step_std > 0.0 {
        params.phase_step_std * rng.standard_normal()
    } else {
        0.0
    };
    PhaseTrack {
        theta: track.theta + step,
        pulse_index: track.pulse_index + 1,
    }
}

/// `√T · Rot(θ) · (q + n_ξ)`, with `n_ξ ~ N(0, ξ)` per quadrature.
///
/// Two normals are always drawn so that runs differing only in ξ consume the
/// stream identically.
pub fn propagate(
    q: QuadraturePair,
    track: &PhaseTrack,
    params: &ChannelParams,
    rng: &mut RngStream,
) -> QuadraturePair {
    let sd = params.excess_noise.sqrt();
    let noise = QuadraturePair::new(sd * rng.standard_normal(), sd * rng.standard_normal());
    (q + noise).rotate(track.theta) * params.transmittance.sqrt()
}
