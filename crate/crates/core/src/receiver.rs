//! Bob's shot-noise-limited coherent receiver.
//!
//! Efficiency enters as an amplitude factor `√(γη)`, the vacuum contributes
//! N₀ = 1 and electronic noise `v_ele` is added after the efficiency. Output
//! is in millivolts so that shot-noise calibration is a real step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{QuadraturePair, RngStream, SlotRole};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverParams {
    /// Detection efficiency η.
    pub eta: f64,
    /// Electronic noise variance, in N₀.
    pub v_ele: f64,
    /// 1 for homodyne, 1/2 for heterodyne.
    pub gamma: f64,
    /// Detector gain in mV per √N₀.
    pub gain_mv: f64,
}

impl Default for ReceiverParams {
    fn default() -> Self {
        Self {
            eta: 0.62,
            v_ele: 0.01,
            gamma: 0.5,
            gain_mv: 10.0,
        }
    }
}

impl ReceiverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("eta", self.eta, "must lie in (0, 1]"));
        }
        if !(self.v_ele >= 0.0 && self.v_ele.is_finite()) {
            return Err(Error::invalid("v_ele", self.v_ele, "must be non-negative"));
        }
        if self.gamma != 1.0 && self.gamma != 0.5 {
            return Err(Error::invalid("gamma", self.gamma, "must be 1 (homodyne) or 0.5 (heterodyne)"));
        }
        if !(self.gain_mv > 0.0 && self.gain_mv.is_finite()) {
            return Err(Error::invalid("gain_mv", self.gain_mv, "must be positive"));
        }
        Ok(())
    }
}

/// Detector output for one pulse, in millivolts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub x_mv: f64,
    pub p_mv: f64,
    pub slot_role: SlotRole,
}

/// Measures both quadratures of the channel output `incoming`.
pub fn heterodyne_measure(
    incoming: QuadraturePair,
    role: SlotRole,
    params: &ReceiverParams,
    rng: &mut RngStream,
) -> RawSample {
    let scale = (params.gamma * params.eta).sqrt();
    let ele = params.v_ele.sqrt();
    let mut quad = |v: f64| {
        let shot = rng.standard_normal();
        let e = ele * rng.standard_normal();
        params.gain_mv * (scale * v + shot + e)
    };
    let x_mv = quad(incoming.x);
    let p_mv = quad(incoming.p);
    RawSample {
        x_mv,
        p_mv,
        slot_role: role,
    }
}

/// Measures with the signal port blocked: shot noise plus electronic noise.
pub fn measure_vacuum(params: &ReceiverParams, rng: &mut RngStream) -> RawSample {
    heterodyne_measure(QuadraturePair::ORIGIN, SlotRole::ShotNoise, params, rng)
}
