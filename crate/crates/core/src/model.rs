//! Shared phase-space types and the randomness contract.
//!
//! Quadratures follow the `X = a + a†` convention: the vacuum has unit
//! variance per quadrature (N₀ = 1), and a coherent amplitude α has mean
//! quadratures `(2 Re α, 2 Im α)`. Every quadrature value inside the crate is
//! in √N₀ units; millivolts only appear in [`crate::receiver::RawSample`].

use std::ops::{Add, Mul, Neg, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One point in phase space, in √N₀ units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadraturePair {
    pub x: f64,
    pub p: f64,
}

impl QuadraturePair {
    pub const ORIGIN: QuadraturePair = QuadraturePair { x: 0.0, p: 0.0 };

    pub const fn new(x: f64, p: f64) -> Self {
        Self { x, p }
    }

    pub fn polar(magnitude: f64, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(magnitude * c, magnitude * s)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.p)
    }

    pub fn angle(self) -> f64 {
        self.p.atan2(self.x)
    }

    pub fn dot(self, other: QuadraturePair) -> f64 {
        self.x * other.x + self.p * other.p
    }

    /// Counter-clockwise rotation by `theta` radians.
    pub fn rotate(self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c * self.x - s * self.p, s * self.x + c * self.p)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.p.is_finite()
    }
}

impl Add for QuadraturePair {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.p + rhs.p)
    }
}

impl Sub for QuadraturePair {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.p - rhs.p)
    }
}

impl Neg for QuadraturePair {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.p)
    }
}

impl Mul<f64> for QuadraturePair {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.x * k, self.p * k)
    }
}

/// Dimensionless coherent amplitude α; mean photon number is `|α|²`.
///
/// The global phase picked up by a displaced state never changes a measured
/// statistic, so it is not tracked.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexAmplitude {
    pub re: f64,
    pub im: f64,
}

impl ComplexAmplitude {
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn photon_number(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.re * k, self.im * k)
    }
}

impl Add for ComplexAmplitude {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.im + rhs.im)
    }
}

pub fn amplitude_to_quadratures(a: ComplexAmplitude) -> QuadraturePair {
    QuadraturePair::new(2.0 * a.re, 2.0 * a.im)
}

pub fn quadratures_to_amplitude(q: QuadraturePair) -> ComplexAmplitude {
    ComplexAmplitude::new(0.5 * q.x, 0.5 * q.p)
}

/// Which quadrature of a heterodyne pair a value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    X,
    P,
}

/// What a pulse slot inside a packet is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotRole {
    /// Member `position_in_set` (0, 1 or 2) of pilot triplet `set_index`.
    Pilot { set_index: u32, position_in_set: u8 },
    /// Vacuum slot used for shot-noise calibration.
    ShotNoise,
    /// Data slot carrying the `symbol_index`-th symbol of the packet.
    Data { symbol_index: u32 },
}

impl SlotRole {
    pub fn label(self) -> &'static str {
        match self {
            SlotRole::Pilot { .. } => "pilot",
            SlotRole::ShotNoise => "shot_noise",
            SlotRole::Data { .. } => "data",
        }
    }
}

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Equal identifiers give bit-identical sequences; distinct stream ids are
/// independent ChaCha streams under the same key.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    #[inline]
    pub fn bit(&mut self) -> bool {
        self.rng.random()
    }

    /// Uniform draw from `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random()
    }
}

/// Draws from `N(mean, variance)`.
pub fn gaussian_sample(rng: &mut RngStream, mean: f64, variance: f64) -> Result<f64> {
    if !(variance >= 0.0) {
        return Err(Error::invalid("variance", variance, "must be non-negative"));
    }
    if variance == 0.0 {
        return Ok(mean);
    }
    Ok(mean + variance.sqrt() * rng.standard_normal())
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut t = theta.rem_euclid(TAU);
    if t > PI {
        t -= TAU;
    }
    t
}
