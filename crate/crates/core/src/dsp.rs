//! Bob's digital post-processing: shot-noise calibration, pilot-based
//! displacement and phase estimation, derotation and displacement removal.
//!
//! Pilot triplets are sent at phases `{0, 2π/3, 4π/3}` with the displacement
//! magnitude. Each heterodyne quadrature of a triplet forms one
//! [`PatternSet`] `u = (u₁, u₂, u₃)`, with `u_i ≈ Δ·cos(ψ + 2π(i−1)/3)`.
//!
//! The phase of a set is recovered with the three-phase I/Q estimator
//!
//! ```text
//! ψ̂ = atan2((u₃ − u₂)/√3, (2u₁ − u₂ − u₃)/3)
//! ```
//!
//! which is exact on noiseless pilots. The tempting single-argument form
//! `atan[(u₂ − u₃) / (√3(2u₁ − u₂ − u₃))]` evaluates to `−tan(ψ)/3` for the
//! same input and only covers half the circle, so it is not used. Per-packet
//! phase is the circular mean of the set phases after each set's offset is
//! added (0 for X, +π/2 for P, since `sin φ = cos(φ − π/2)`).

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{wrap_angle, Quadrature, QuadraturePair, SlotRole};
use crate::receiver::RawSample;
use crate::stats::Moments;
use crate::transmitter::{constellation_point, ModulationParams};

/// Minimum vacuum samples accepted by [`calibrate_shot_noise`].
pub const MIN_VACUUM_SAMPLES: usize = 1000;

/// One quadrature's readings of a pilot triplet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    pub u: [f64; 3],
    pub quadrature: Quadrature,
    pub packet_index: u64,
}

impl PatternSet {
    /// Offset that maps this set's phase onto the X-quadrature reference.
    pub fn default_offset(&self) -> f64 {
        match self.quadrature {
            Quadrature::X => 0.0,
            Quadrature::P => FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate {
    pub theta_raw: f64,
    pub theta_smoothed: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Shot-noise variance N₀ in mV².
    pub n0_mv2: f64,
    pub v_ele_assumed: f64,
    pub samples_used: u64,
}

impl CalibrationResult {
    /// Converts a raw detector sample to √N₀ units.
    pub fn normalize(&self, raw: &RawSample) -> QuadraturePair {
        let k = 1.0 / self.n0_mv2.sqrt();
        QuadraturePair::new(raw.x_mv * k, raw.p_mv * k)
    }
}

/// Running vacuum statistics; both quadratures are pooled.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ShotNoiseAccumulator {
    moments: Moments,
    samples: u64,
}

impl ShotNoiseAccumulator {
    pub fn push(&mut self, s: &RawSample) {
        self.moments.push(s.x_mv);
        self.moments.push(s.p_mv);
        self.samples += 1;
    }

    pub fn merge(&mut self, other: &ShotNoiseAccumulator) {
        self.moments.merge(&other.moments);
        self.samples += other.samples;
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// `N₀ = var / (1 + v_ele)`; `v_ele` comes from an independent
    /// characterisation, not from these samples.
    pub fn finish(&self, v_ele: f64) -> Result<CalibrationResult> {
        if (self.samples as usize) < MIN_VACUUM_SAMPLES {
            return Err(Error::TooFewVacuumSamples {
                provided: self.samples as usize,
                required: MIN_VACUUM_SAMPLES,
            });
        }
        let var = self.moments.variance();
        if !(var > 0.0) {
            return Err(Error::ZeroVacuumVariance);
        }
        Ok(CalibrationResult {
            n0_mv2: var / (1.0 + v_ele),
            v_ele_assumed: v_ele,
            samples_used: self.samples,
        })
    }
}

pub fn calibrate_shot_noise(vacuum: &[RawSample], v_ele: f64) -> Result<CalibrationResult> {
    let mut acc = ShotNoiseAccumulator::default();
    vacuum.iter().for_each(|s| acc.push(s));
    acc.finish(v_ele)
}

/// `√((2/3)·Σ(u_i − m)²)` for a single set.
pub fn pattern_set_displacement(u: &[f64; 3]) -> f64 {
    let m = (u[0] + u[1] + u[2]) / 3.0;
    let ss: f64 = u.iter().map(|v| (v - m) * (v - m)).sum();
    (2.0 / 3.0 * ss).sqrt()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DisplacementAccumulator {
    sum: f64,
    sum_mean_sq: f64,
    sets: u64,
}

impl DisplacementAccumulator {
    pub fn push(&mut self, set: &PatternSet) {
        let m = (set.u[0] + set.u[1] + set.u[2]) / 3.0;
        self.sum += pattern_set_displacement(&set.u);
        self.sum_mean_sq += m * m;
        self.sets += 1;
    }

    pub fn merge(&mut self, other: &DisplacementAccumulator) {
        self.sum += other.sum;
        self.sum_mean_sq += other.sum_mean_sq;
        self.sets += other.sets;
    }

    /// Per-sample pilot noise variance. The three pilot phases cancel in the
    /// set mean, which therefore carries only noise, with variance σ²/3.
    pub fn noise_variance(&self) -> Result<f64> {
        if self.sets == 0 {
            return Err(Error::NoPatternSets);
        }
        Ok(3.0 * self.sum_mean_sq / self.sets as f64)
    }

    /// [`finish`](Self::finish) less the second-order noise bias `σ̂²/(3Δ̂)`.
    pub fn finish_debiased(&self) -> Result<f64> {
        let d = self.finish()?;
        Ok(d - self.noise_variance()? / (3.0 * d))
    }

    pub fn sets(&self) -> u64 {
        self.sets
    }

    pub fn finish(&self) -> Result<f64> {
        if self.sets == 0 {
            return Err(Error::NoPatternSets);
        }
        Ok(self.sum / self.sets as f64)
    }
}

/// Mean over sets of the per-set displacement magnitude.
///
/// Noise biases this upward by about `σ²/(3Δ)` for per-sample noise variance
/// σ², independent of the number of sets.
pub fn estimate_displacement(sets: &[PatternSet]) -> Result<f64> {
    let mut acc = DisplacementAccumulator::default();
    sets.iter().for_each(|s| acc.push(s));
    acc.finish()
}

/// Phase ψ of one set, or `None` for a degenerate (constant) triplet.
pub fn pattern_set_phase(u: &[f64; 3]) -> Option<f64> {
    let s = (u[2] - u[1]) / 3f64.sqrt();
    let c = (2.0 * u[0] - u[1] - u[2]) / 3.0;
    if s == 0.0 && c == 0.0 {
        None
    } else {
        Some(s.atan2(c))
    }
}

/// Circular mean of `ψ̂_j + offset_j` over the sets of one packet.
pub fn estimate_packet_phase(sets: &[PatternSet], offsets: &[f64]) -> Result<f64> {
    if sets.len() != offsets.len() {
        return Err(Error::LengthMismatch {
            left: sets.len(),
            right: offsets.len(),
        });
    }
    let first = sets.first().ok_or(Error::NoPatternSets)?;
    let (mut sin_sum, mut cos_sum, mut used) = (0.0, 0.0, 0usize);
    for (set, off) in sets.iter().zip(offsets) {
        if let Some(psi) = pattern_set_phase(&set.u) {
            let (s, c) = (psi + off).sin_cos();
            sin_sum += s;
            cos_sum += c;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::DegeneratePilots {
            packet_index: first.packet_index,
        });
    }
    Ok(sin_sum.atan2(cos_sum))
}

/// Groups the pilot slots of one packet into X and P pattern sets, ordered by
/// triplet. Incomplete triplets are dropped.
pub fn collect_pattern_sets<'a, I>(samples: I, packet_index: u64) -> Vec<PatternSet>
where
    I: IntoIterator<Item = (SlotRole, QuadraturePair)> + 'a,
{
    let mut partial: Vec<(u32, [Option<QuadraturePair>; 3])> = Vec::new();
    for (role, q) in samples {
        if let SlotRole::Pilot {
            set_index,
            position_in_set,
        } = role
        {
            let idx = match partial.iter().position(|(s, _)| *s == set_index) {
                Some(i) => i,
                None => {
                    partial.push((set_index, [None; 3]));
                    partial.len() - 1
                }
            };
            partial[idx].1[position_in_set as usize] = Some(q);
        }
    }
    partial.sort_by_key(|(s, _)| *s);
    let mut sets = Vec::with_capacity(partial.len() * 2);
    for (_, triplet) in partial {
        if let [Some(a), Some(b), Some(c)] = triplet {
            sets.push(PatternSet {
                u: [a.x, b.x, c.x],
                quadrature: Quadrature::X,
                packet_index,
            });
            sets.push(PatternSet {
                u: [a.p, b.p, c.p],
                quadrature: Quadrature::P,
                packet_index,
            });
        }
    }
    sets
}

/// Streaming exponential average of packet phases. Each raw value is first
/// unwrapped to within ±π of the running estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSmoother {
    weight: f64,
    state: Option<f64>,
}

impl PhaseSmoother {
    pub fn new(weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(Error::invalid("smoothing_weight", weight, "must lie in (0, 1]"));
        }
        Ok(Self { weight, state: None })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn update(&mut self, raw: f64) -> PhaseEstimate {
        let smoothed = match self.state {
            None => raw,
            Some(prev) => {
                let unwrapped = prev + wrap_angle(raw - prev);
                (1.0 - self.weight) * prev + self.weight * unwrapped
            }
        };
        self.state = Some(smoothed);
        PhaseEstimate {
            theta_raw: raw,
            theta_smoothed: smoothed,
            weight: self.weight,
        }
    }
}

pub fn smooth_phase(raw: &[f64], w: f64) -> Result<Vec<f64>> {
    let mut sm = PhaseSmoother::new(w)?;
    Ok(raw.iter().map(|&r| sm.update(r).theta_smoothed).collect())
}

/// Rotates every sample by `−theta`.
pub fn derotate(samples: &[QuadraturePair], theta: f64) -> Vec<QuadraturePair> {
    samples.iter().map(|q| q.rotate(-theta)).collect()
}

/// Subtracts the displacement implied by each decided symbol, leaving the
/// Gaussian CV-QKD quadratures.
pub fn remove_displacement(
    corrected: &[QuadraturePair],
    symbols: &[u32],
    params: &ModulationParams,
    delta_hat: f64,
) -> Result<Vec<QuadraturePair>> {
    if corrected.len() != symbols.len() {
        return Err(Error::LengthMismatch {
            left: corrected.len(),
            right: symbols.len(),
        });
    }
    let m = params.psk.order();
    corrected
        .iter()
        .zip(symbols)
        .map(|(q, &s)| {
            if s >= m {
                return Err(Error::SymbolOutOfRange { symbol: s, order: m });
            }
            Ok(*q - constellation_point(params.psk, s, delta_hat))
        })
        .collect()
}
