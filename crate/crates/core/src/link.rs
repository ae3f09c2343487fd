//! Classical decisions and figures of merit: PSK demodulation, Q factor and
//! bit error rates.

use std::f64::consts::{SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::QuadraturePair;
use crate::stats::Moments;
use crate::transmitter::{constellation_point, ModulationParams, PskOrder};

/// z for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Nearest constellation index by angular sector. A sample exactly on a
/// decision boundary goes to the lower of the two indices.
pub fn demodulate_psk(sample: QuadraturePair, params: &ModulationParams) -> u32 {
    let m = params.psk.order();
    let sector = TAU / m as f64;
    let t = (sample.angle() - params.psk.rotation_offset()).rem_euclid(TAU) / sector;
    let lower = t.floor();
    let frac = t - lower;
    let lo = (lower as u32) % m;
    let hi = (lo + 1) % m;
    if frac < 0.5 {
        lo
    } else if frac > 0.5 {
        hi
    } else {
        lo.min(hi)
    }
}

/// `|d₀ − d₁| / (σ₀ + σ₁)`.
pub fn q_factor(d0: f64, d1: f64, s0: f64, s1: f64) -> Result<f64> {
    if !(s0 > 0.0) {
        return Err(Error::invalid("sigma0", s0, "must be positive"));
    }
    if !(s1 > 0.0) {
        return Err(Error::invalid("sigma1", s1, "must be positive"));
    }
    Ok((d0 - d1).abs() / (s0 + s1))
}

/// Gaussian tail probability `P(Z > x)`.
pub fn gaussian_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `0.5 · erfc(Q/√2)`.
pub fn ber_from_q(q: f64) -> f64 {
    gaussian_tail(q)
}

/// Symbol error rate from confusions with the two nearest neighbours only.
pub fn psk_ser_nearest_neighbour(psk: PskOrder, delta: f64, sigma: f64) -> f64 {
    let half_chord = delta * (std::f64::consts::PI / psk.order() as f64).sin();
    let tail = gaussian_tail(half_chord / sigma);
    match psk {
        PskOrder::Bpsk => tail,
        _ => 2.0 * tail,
    }
}

/// Gray-coded bit error rate under the nearest-neighbour bound.
pub fn psk_ber_union_bound(psk: PskOrder, delta: f64, sigma: f64) -> f64 {
    psk_ser_nearest_neighbour(psk, delta, sigma) / psk.bits_per_symbol() as f64
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BitErrorCount {
    pub errors: u64,
    pub trials: u64,
    pub ber: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

impl BitErrorCount {
    pub fn from_counts(errors: u64, trials: u64) -> Self {
        let (lo, hi) = wilson_interval(errors, trials, Z95);
        Self {
            errors,
            trials,
            ber: if trials == 0 { 0.0 } else { errors as f64 / trials as f64 },
            ci95_low: lo,
            ci95_high: hi,
        }
    }
}

pub fn count_bit_errors(tx: &[bool], rx: &[bool]) -> Result<BitErrorCount> {
    if tx.len() != rx.len() {
        return Err(Error::LengthMismatch {
            left: tx.len(),
            right: rx.len(),
        });
    }
    let errors = tx.iter().zip(rx).filter(|(a, b)| a != b).count() as u64;
    Ok(BitErrorCount::from_counts(errors, tx.len() as u64))
}

/// Classical figures of merit of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub modulation: PskOrder,
    /// Q on the adjacent-pair axis, all noise sources included.
    pub q_factor: f64,
    /// Q with σ taken from the Gaussian modulation alone.
    pub q_factor_modulation_only: f64,
    /// `0.5 · erfc(Q/√2)` at the measured Q.
    pub ber_analytic: f64,
    pub ber_empirical: BitErrorCount,
    pub symbol_errors: u64,
    pub symbols: u64,
    pub symbol_error_rate: f64,
    /// Mean separation of adjacent cluster centroids, √N₀.
    pub cluster_separation: f64,
    /// Mean per-cluster standard deviation along the pair axis, √N₀.
    pub cluster_sigma: f64,
    pub data_rate_bps: f64,
}

/// Per-cluster projections used for Q, plus error counts.
///
/// For M > 2 every adjacent pair `(k, k+1)` is scored along the unit chord
/// between the two points; the reported Q is the mean over pairs. BPSK has a
/// single pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkAccumulator {
    psk: PskOrder,
    axes: Vec<QuadraturePair>,
    // [pair][side]
    clusters: Vec<[Moments; 2]>,
    pub bit_errors: u64,
    pub bits: u64,
    pub symbol_errors: u64,
    pub symbols: u64,
}

impl LinkAccumulator {
    pub fn new(psk: PskOrder) -> Self {
        let m = psk.order();
        let pairs = if m == 2 { 1 } else { m as usize };
        let axes = (0..pairs as u32)
            .map(|k| {
                let a = constellation_point(psk, k, 1.0);
                let b = constellation_point(psk, (k + 1) % m, 1.0);
                let d = b - a;
                d * (1.0 / d.norm())
            })
            .collect();
        Self {
            psk,
            axes,
            clusters: vec![[Moments::default(); 2]; pairs],
            bit_errors: 0,
            bits: 0,
            symbol_errors: 0,
            symbols: 0,
        }
    }

    /// Records one phase-corrected sample sent as `tx_symbol`.
    pub fn push_sample(&mut self, sample: QuadraturePair, tx_symbol: u32) {
        let m = self.psk.order();
        let pairs = self.axes.len() as u32;
        let first = tx_symbol;
        let second = (tx_symbol + m - 1) % m;
        if first < pairs {
            self.clusters[first as usize][0].push(sample.dot(self.axes[first as usize]));
        }
        if second < pairs && (m > 2 || second != first) {
            self.clusters[second as usize][1].push(sample.dot(self.axes[second as usize]));
        }
    }

    pub fn push_decision(&mut self, tx_symbol: u32, rx_symbol: u32, params: &ModulationParams) {
        self.symbols += 1;
        if tx_symbol != rx_symbol {
            self.symbol_errors += 1;
            let mut a = Vec::with_capacity(3);
            let mut b = Vec::with_capacity(3);
            params.symbol_to_bits(tx_symbol, &mut a);
            params.symbol_to_bits(rx_symbol, &mut b);
            self.bit_errors += a.iter().zip(&b).filter(|(x, y)| x != y).count() as u64;
        }
        self.bits += self.psk.bits_per_symbol() as u64;
    }

    pub fn merge(&mut self, other: &LinkAccumulator) {
        for (mine, theirs) in self.clusters.iter_mut().zip(&other.clusters) {
            mine[0].merge(&theirs[0]);
            mine[1].merge(&theirs[1]);
        }
        self.bit_errors += other.bit_errors;
        self.bits += other.bits;
        self.symbol_errors += other.symbol_errors;
        self.symbols += other.symbols;
    }

    /// Mean Q over measurable pairs with the mean separation and σ, or
    /// `None` when no pair has two populated clusters.
    pub fn q_summary(&self) -> Option<(f64, f64, f64)> {
        let mut qs = Vec::new();
        let mut seps = Vec::new();
        let mut sigmas = Vec::new();
        for [c0, c1] in &self.clusters {
            if c0.n < 2 || c1.n < 2 {
                continue;
            }
            if let Ok(q) = q_factor(c0.mean, c1.mean, c0.std_dev(), c1.std_dev()) {
                qs.push(q);
                seps.push((c0.mean - c1.mean).abs());
                sigmas.push(0.5 * (c0.std_dev() + c1.std_dev()));
            }
        }
        if qs.is_empty() {
            return None;
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Some((mean(&qs), mean(&seps), mean(&sigmas)))
    }

    /// Finalises the report. `modulation_sigma` is the Bob-side standard
    /// deviation of the Gaussian modulation alone.
    pub fn report(&self, delta_hat: f64, modulation_sigma: f64, data_rate_bps: f64) -> LinkReport {
        let (q, sep, sigma) = self.q_summary().unwrap_or((0.0, 0.0, 0.0));
        let chord = 2.0 * delta_hat * (std::f64::consts::PI / self.psk.order() as f64).sin();
        let q_mod = if modulation_sigma > 0.0 {
            chord / (2.0 * modulation_sigma)
        } else {
            0.0
        };
        LinkReport {
            modulation: self.psk,
            q_factor: q,
            q_factor_modulation_only: q_mod,
            ber_analytic: ber_from_q(q),
            ber_empirical: BitErrorCount::from_counts(self.bit_errors, self.bits),
            symbol_errors: self.symbol_errors,
            symbols: self.symbols,
            symbol_error_rate: if self.symbols == 0 {
                0.0
            } else {
                self.symbol_errors as f64 / self.symbols as f64
            },
            cluster_separation: sep,
            cluster_sigma: sigma,
            data_rate_bps,
        }
    }
}
