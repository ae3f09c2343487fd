//! Channel parameter estimation and the asymptotic collective-attack key
//! rate for reverse reconciliation with heterodyne detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discriminants above this are clamped to zero without comment.
pub const CLAMP_SILENT: f64 = -1e-9;
/// Discriminants below this are rejected as unphysical.
pub const CLAMP_REJECT: f64 = -1e-6;
const ROUNDING_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityParams {
    /// Alice's modulation variance, N₀.
    pub v_a: f64,
    pub transmittance: f64,
    pub excess_noise: f64,
    pub eta: f64,
    pub v_ele: f64,
    pub gamma: f64,
    pub reconciliation_efficiency: f64,
    /// Rate of key-carrying pulses, Hz.
    pub effective_rate_hz: f64,
}

impl Default for SecurityParams {
    fn default() -> Self {
        Self {
            v_a: 5.0,
            transmittance: 0.28,
            excess_noise: 0.055,
            eta: 0.62,
            v_ele: 0.01,
            gamma: 0.5,
            reconciliation_efficiency: 0.9,
            effective_rate_hz: 1.22e6,
        }
    }
}

impl SecurityParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, v, "must be positive"))
            }
        };
        positive("v_a", self.v_a)?;
        positive("transmittance", self.transmittance)?;
        positive("eta", self.eta)?;
        positive("gamma", self.gamma)?;
        positive("reconciliation_efficiency", self.reconciliation_efficiency)?;
        positive("effective_rate_hz", self.effective_rate_hz)?;
        if !(self.excess_noise >= 0.0 && self.excess_noise.is_finite()) {
            return Err(Error::invalid("excess_noise", self.excess_noise, "must be non-negative"));
        }
        if !(self.v_ele >= 0.0 && self.v_ele.is_finite()) {
            return Err(Error::invalid("v_ele", self.v_ele, "must be non-negative"));
        }
        for (name, v) in [
            ("transmittance", self.transmittance),
            ("eta", self.eta),
            ("reconciliation_efficiency", self.reconciliation_efficiency),
        ] {
            if v > 1.0 {
                return Err(Error::invalid(name, v, "must not exceed 1"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseDecomposition {
    pub chi_line: f64,
    pub chi_het: f64,
    pub chi_tot: f64,
    /// V = V_A + 1.
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymplecticSpectrum {
    pub lambda: [f64; 5],
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Discriminants clamped from between −1e-6 and −1e-9.
    pub clamp_events: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecurityEstimate {
    pub t_hat: f64,
    pub xi_hat: f64,
    pub i_ab: f64,
    pub chi_be: f64,
    /// β·I_AB − χ_BE; negative values are kept.
    pub key_rate_per_pulse: f64,
    /// max(0, per-pulse) · effective rate.
    pub key_rate_bps: f64,
    pub samples_used: u64,
    pub noise: NoiseDecomposition,
    pub spectrum: SymplecticSpectrum,
    /// T̂ outside (0, 1.05].
    pub channel_gain_anomaly: bool,
    /// ξ̂ < 0, a statistical fluctuation.
    pub negative_excess_noise: bool,
}

/// `T̂ = (cov/V_A)² / (γη)`.
pub fn estimate_transmittance(cov_ab: f64, v_a: f64, gamma: f64, eta: f64) -> Result<f64> {
    if !(v_a > 0.0) {
        return Err(Error::invalid("v_a", v_a, "must be positive"));
    }
    if !(gamma * eta > 0.0) {
        return Err(Error::invalid("gamma*eta", gamma * eta, "must be positive"));
    }
    let r = cov_ab / v_a;
    Ok(r * r / (gamma * eta))
}

pub fn is_gain_anomaly(t_hat: f64) -> bool {
    !(t_hat > 0.0 && t_hat <= 1.05)
}

/// `ξ̂ = (V_B − γηT̂V_A − 1 − v_ele) / (γηT̂)`.
pub fn estimate_excess_noise(v_b: f64, t_hat: f64, v_a: f64, gamma: f64, eta: f64, v_ele: f64) -> Result<f64> {
    if !(t_hat > 0.0) {
        return Err(Error::invalid("t_hat", t_hat, "must be positive"));
    }
    let k = gamma * eta * t_hat;
    Ok((v_b - k * v_a - 1.0 - v_ele) / k)
}

/// `G(x) = (x+1)log₂(x+1) − x log₂x`, with G(0) = 0.
pub fn g_holevo(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::invalid("x", x, "G is defined for x >= 0"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok((x + 1.0) * (x + 1.0).log2() - x * x.log2())
}

pub fn noise_decomposition(p: &SecurityParams) -> Result<NoiseDecomposition> {
    if !(p.transmittance > 0.0) {
        return Err(Error::invalid("transmittance", p.transmittance, "must be positive"));
    }
    if !(p.eta > 0.0) {
        return Err(Error::invalid("eta", p.eta, "must be positive"));
    }
    let t = p.transmittance;
    let chi_line = 1.0 / t - 1.0 + p.excess_noise;
    let chi_het = (2.0 + 2.0 * p.v_ele - p.eta) / p.eta;
    Ok(NoiseDecomposition {
        chi_line,
        chi_het,
        chi_tot: chi_line + chi_het / t,
        v: p.v_a + 1.0,
    })
}

// Larger and smaller root of z² − s·z + q = 0, both as squares of λ.
fn quadratic_pair(s: f64, q: f64, clamps: &mut u32) -> Result<(f64, f64)> {
    let mut disc = s * s - 4.0 * q;
    if disc.abs() <= ROUNDING_FLOOR * s * s {
        // a double root; s and q carry a few ulps each
        disc = 0.0;
    } else if disc < 0.0 {
        // relative to the scale of the terms
        let rel = disc / (s * s).max(f64::MIN_POSITIVE);
        if rel < CLAMP_REJECT {
            return Err(Error::UnphysicalSpectrum { discriminant: disc });
        }
        if rel < CLAMP_SILENT {
            *clamps += 1;
        }
        disc = 0.0;
    }
    let hi = 0.5 * (s + disc.sqrt());
    // product of the roots is q; avoids cancellation in s − √disc
    let lo = if hi > 0.0 { q / hi } else { 0.0 };
    Ok((hi, lo))
}

pub fn symplectic_spectrum(nd: &NoiseDecomposition, t: f64) -> Result<SymplecticSpectrum> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", t, "must be positive"));
    }
    let NoiseDecomposition {
        chi_line,
        chi_het,
        chi_tot,
        v,
    } = *nd;
    let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_line).powi(2);
    let b = (t * (v * chi_line + 1.0)).powi(2);
    let scale = (t * (v + chi_tot)).powi(2);
    let c = (a * chi_het * chi_het
        + b
        + 1.0
        + 2.0 * chi_het * (v * b.sqrt() + t * (v + chi_line))
        + 2.0 * t * (v * v - 1.0))
        / scale;
    let d = ((v + b.sqrt() * chi_het) / (t * (v + chi_tot))).powi(2);

    let mut clamp_events = 0;
    let (l1, l2) = quadratic_pair(a, b, &mut clamp_events)?;
    let (l3, l4) = quadratic_pair(c, d, &mut clamp_events)?;
    Ok(SymplecticSpectrum {
        lambda: [l1.sqrt(), l2.sqrt(), l3.sqrt(), l4.sqrt(), 1.0],
        a,
        b,
        c,
        d,
        clamp_events,
    })
}

fn g_of_lambda(l: f64) -> f64 {
    // eigenvalues a hair under 1 from rounding
    g_holevo(((l - 1.0) / 2.0).max(0.0)).unwrap_or(0.0)
}

/// `χ_BE = Σ₁² G((λᵢ−1)/2) − Σ₃⁵ G((λᵢ−1)/2)`.
pub fn holevo_bound(s: &SymplecticSpectrum) -> f64 {
    let l = &s.lambda;
    g_of_lambda(l[0]) + g_of_lambda(l[1]) - g_of_lambda(l[2]) - g_of_lambda(l[3]) - g_of_lambda(l[4])
}

/// `I_AB = log₂((V + χ_tot)/(1 + χ_tot))`.
pub fn mutual_information(v: f64, chi_tot: f64) -> f64 {
    ((v + chi_tot) / (1.0 + chi_tot)).log2()
}

/// Key rate from parameters that may be estimates: only T > 0 and η > 0 are
/// required.
pub fn key_rate_from_estimates(p: &SecurityParams) -> Result<SecurityEstimate> {
    let noise = noise_decomposition(p)?;
    let spectrum = symplectic_spectrum(&noise, p.transmittance)?;
    let i_ab = mutual_information(noise.v, noise.chi_tot);
    let chi_be = holevo_bound(&spectrum);
    let k = p.reconciliation_efficiency * i_ab - chi_be;
    Ok(SecurityEstimate {
        t_hat: p.transmittance,
        xi_hat: p.excess_noise,
        i_ab,
        chi_be,
        key_rate_per_pulse: k,
        key_rate_bps: k.max(0.0) * p.effective_rate_hz,
        samples_used: 0,
        noise,
        spectrum,
        channel_gain_anomaly: is_gain_anomaly(p.transmittance),
        negative_excess_noise: p.excess_noise < 0.0,
    })
}

pub fn secret_key_rate(p: &SecurityParams) -> Result<SecurityEstimate> {
    p.validate()?;
    key_rate_from_estimates(p)
}

/// ξ at which the per-pulse key rate reaches zero, by bisection.
pub fn max_tolerable_excess_noise(p: &SecurityParams) -> Result<f64> {
    p.validate()?;
    let k_at = |xi: f64| -> Result<f64> {
        let q = SecurityParams {
            excess_noise: xi,
            ..p.clone()
        };
        Ok(key_rate_from_estimates(&q)?.key_rate_per_pulse)
    };
    let k0 = k_at(0.0)?;
    if k0 <= 0.0 {
        return Err(Error::DeadLink { key_rate: k0 });
    }
    let mut lo = 0.0;
    let mut hi = 0.1;
    while k_at(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::invalid("excess_noise", hi, "no key-rate zero found"));
        }
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if k_at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
