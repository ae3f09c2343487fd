//! Alice: Gaussian quadrature modulation, PSK-keyed displacement and packet
//! assembly.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComplexAmplitude, QuadraturePair, RngStream, SlotRole};

/// Classical constellation carried by the displacement direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PskOrder {
    Bpsk,
    Qpsk,
    #[serde(rename = "8psk")]
    Psk8,
}

impl PskOrder {
    pub const ALL: [PskOrder; 3] = [PskOrder::Bpsk, PskOrder::Qpsk, PskOrder::Psk8];

    pub fn order(self) -> u32 {
        match self {
            PskOrder::Bpsk => 2,
            PskOrder::Qpsk => 4,
            PskOrder::Psk8 => 8,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        self.order().trailing_zeros() as usize
    }

    /// Angle of symbol 0: on the +X axis for BPSK, π/M otherwise.
    pub fn rotation_offset(self) -> f64 {
        match self {
            PskOrder::Bpsk => 0.0,
            _ => PI / self.order() as f64,
        }
    }

    pub fn from_order(m: u32) -> Option<Self> {
        match m {
            2 => Some(PskOrder::Bpsk),
            4 => Some(PskOrder::Qpsk),
            8 => Some(PskOrder::Psk8),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PskOrder::Bpsk => "bpsk",
            PskOrder::Qpsk => "qpsk",
            PskOrder::Psk8 => "8psk",
        }
    }
}

impl fmt::Display for PskOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PskOrder {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bpsk" | "2" => Ok(PskOrder::Bpsk),
            "qpsk" | "4" => Ok(PskOrder::Qpsk),
            "8psk" | "8" => Ok(PskOrder::Psk8),
            other => Err(format!("unknown modulation `{other}` (expected bpsk, qpsk or 8psk)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationParams {
    /// Gaussian modulation variance V_A, in N₀.
    pub v_a: f64,
    /// Displacement magnitude targeted at Bob, in √N₀.
    pub delta_bob: f64,
    pub psk: PskOrder,
    pub gray_coding: bool,
    /// Reflectivity of the displacement beam splitter.
    pub bs_reflectivity: f64,
}

impl Default for ModulationParams {
    fn default() -> Self {
        Self {
            v_a: 5.0,
            delta_bob: 13.0,
            psk: PskOrder::Bpsk,
            gray_coding: true,
            bs_reflectivity: 0.01,
        }
    }
}

impl ModulationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_a > 0.0 && self.v_a.is_finite()) {
            return Err(Error::invalid("v_a", self.v_a, "must be positive"));
        }
        if !(self.delta_bob > 0.0 && self.delta_bob.is_finite()) {
            return Err(Error::invalid("delta_bob", self.delta_bob, "must be positive"));
        }
        if !(self.bs_reflectivity > 0.0 && self.bs_reflectivity < 0.5) {
            return Err(Error::invalid(
                "bs_reflectivity",
                self.bs_reflectivity,
                "must lie in (0, 0.5)",
            ));
        }
        Ok(())
    }

    /// Maps `bits_per_symbol` bits (MSB first) to a constellation index.
    pub fn bits_to_symbol(&self, bits: &[bool]) -> u32 {
        let label = bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
        if self.gray_coding {
            gray_decode(label)
        } else {
            label
        }
    }

    pub fn symbol_to_bits(&self, symbol: u32, out: &mut Vec<bool>) {
        let label = if self.gray_coding {
            symbol ^ (symbol >> 1)
        } else {
            symbol
        };
        let k = self.psk.bits_per_symbol();
        for i in (0..k).rev() {
            out.push((label >> i) & 1 == 1);
        }
    }
}

fn gray_decode(mut g: u32) -> u32 {
    let mut b = g;
    while g > 1 {
        g >>= 1;
        b ^= g;
    }
    b
}

/// Slot budget of one packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketLayout {
    pub slots_per_packet: usize,
    /// Pilot pulses, in triplets.
    pub pilot_pulses: usize,
    pub shot_noise_slots: usize,
    pub data_slots: usize,
    /// Relative phase between consecutive pilots of a triplet.
    pub pilot_phase_step: f64,
}

impl Default for PacketLayout {
    fn default() -> Self {
        Self {
            slots_per_packet: 400,
            pilot_pulses: 36,
            shot_noise_slots: 120,
            data_slots: 244,
            pilot_phase_step: TAU / 3.0,
        }
    }
}

impl PacketLayout {
    pub fn pattern_sets(&self) -> usize {
        self.pilot_pulses / 3
    }

    pub fn validate(&self) -> Result<()> {
        let total = self.pilot_pulses + self.shot_noise_slots + self.data_slots;
        if total != self.slots_per_packet {
            return Err(Error::Config(format!(
                "layout: pilot_pulses + shot_noise_slots + data_slots = {total}, expected slots_per_packet = {}",
                self.slots_per_packet
            )));
        }
        if !self.pilot_pulses.is_multiple_of(3) {
            return Err(Error::Config(format!(
                "layout: pilot_pulses = {} is not a multiple of 3",
                self.pilot_pulses
            )));
        }
        if self.pattern_sets() > 0 && self.slots_per_packet / self.pattern_sets() < 3 {
            return Err(Error::Config("layout: pilot triplets do not fit in the packet".into()));
        }
        if (self.pilot_phase_step - TAU / 3.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "pilot_phase_step",
                self.pilot_phase_step,
                "the three-phase estimator needs 2π/3",
            ));
        }
        Ok(())
    }

    /// Fraction of slots that carry data.
    pub fn data_fraction(&self) -> f64 {
        self.data_slots as f64 / self.slots_per_packet as f64
    }

    /// Role of every slot. Pilot triplets start every
    /// `slots_per_packet / pattern_sets` slots; shot-noise slots are spread
    /// evenly over the remaining positions.
    pub fn roles(&self) -> Vec<SlotRole> {
        let sets = self.pattern_sets();
        let mut roles: Vec<Option<SlotRole>> = vec![None; self.slots_per_packet];
        if let Some(spacing) = self.slots_per_packet.checked_div(sets) {
            for set in 0..sets {
                for pos in 0..3 {
                    roles[set * spacing + pos] = Some(SlotRole::Pilot {
                        set_index: set as u32,
                        position_in_set: pos as u8,
                    });
                }
            }
        }
        let free = self.slots_per_packet - self.pilot_pulses;
        let mut symbol_index = 0u32;
        for (free_index, slot) in roles.iter_mut().filter(|r| r.is_none()).enumerate() {
            let before = free_index * self.shot_noise_slots / free;
            let after = (free_index + 1) * self.shot_noise_slots / free;
            *slot = Some(if after > before {
                SlotRole::ShotNoise
            } else {
                let r = SlotRole::Data { symbol_index };
                symbol_index += 1;
                r
            });
        }
        roles.into_iter().map(|r| r.expect("every slot assigned")).collect()
    }
}

/// One transmitted pulse and its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSlot {
    pub role: SlotRole,
    pub tx: QuadraturePair,
}

/// Ground truth for a data slot: Alice's Gaussian quadratures before
/// displacement and the PSK symbol that picked the displacement direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSymbol {
    pub symbol: u32,
    pub gaussian: QuadraturePair,
    pub displacement: QuadraturePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub packet_index: u64,
    pub slots: Vec<PulseSlot>,
    pub symbols: Vec<DataSymbol>,
}

pub fn gaussian_modulate(rng: &mut RngStream, v_a: f64, n: usize) -> Result<Vec<QuadraturePair>> {
    if !(v_a >= 0.0) {
        return Err(Error::invalid("v_a", v_a, "must be non-negative"));
    }
    let sd = v_a.sqrt();
    Ok((0..n)
        .map(|_| {
            let x = sd * rng.standard_normal();
            let p = sd * rng.standard_normal();
            QuadraturePair::new(x, p)
        })
        .collect())
}

/// Displacement vector for `symbol`: magnitude `delta` at angle
/// `2π·symbol/M + offset`.
pub fn psk_displacement(symbol: u32, params: &ModulationParams, delta: f64) -> Result<QuadraturePair> {
    let m = params.psk.order();
    if symbol >= m {
        return Err(Error::SymbolOutOfRange { symbol, order: m });
    }
    Ok(constellation_point(params.psk, symbol, delta))
}

pub(crate) fn constellation_point(psk: PskOrder, symbol: u32, delta: f64) -> QuadraturePair {
    let angle = TAU * symbol as f64 / psk.order() as f64 + psk.rotation_offset();
    QuadraturePair::polar(delta, angle)
}

/// Ideal displacement: a phase-space translation.
pub fn apply_displacement(state: QuadraturePair, delta: QuadraturePair) -> QuadraturePair {
    state + delta
}

/// Output of a beam splitter with reflectivity `r` that mixes the signal
/// (transmitted) with a pump (reflected): `√(1−r)·α + √r·β`.
pub fn beamsplitter_displace(
    signal: ComplexAmplitude,
    pump: ComplexAmplitude,
    r: f64,
) -> Result<ComplexAmplitude> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::invalid("bs_reflectivity", r, "must lie in (0, 1)"));
    }
    Ok(signal.scale((1.0 - r).sqrt()) + pump.scale(r.sqrt()))
}

/// Pump amplitude magnitude needed for a quadrature displacement `delta`
/// through reflectivity `r`.
pub fn pump_amplitude(delta: f64, r: f64) -> f64 {
    0.5 * delta / r.sqrt()
}

/// Displacement to apply at Alice so that Bob sees `delta_bob` after the
/// channel (`√T`) and detector (`√(γη)`) amplitude factors.
pub fn delta_at_alice(delta_bob: f64, gamma: f64, eta: f64, t_nominal: f64) -> f64 {
    delta_bob / (gamma * eta * t_nominal).sqrt()
}

/// Builds one packet from exactly `data_slots · log2(M)` leading bits.
pub fn build_packet(
    rng: &mut RngStream,
    bits: &[bool],
    params: &ModulationParams,
    layout: &PacketLayout,
    delta_alice: f64,
    packet_index: u64,
) -> Result<Packet> {
    assemble_packet(rng, bits, params, layout, delta_alice, packet_index, true)
}

/// As [`build_packet`], optionally leaving the data slots undisplaced (the
/// reference arm of a displacement-neutrality comparison). Random draws are
/// identical either way.
pub(crate) fn assemble_packet(
    rng: &mut RngStream,
    bits: &[bool],
    params: &ModulationParams,
    layout: &PacketLayout,
    delta_alice: f64,
    packet_index: u64,
    displace_data: bool,
) -> Result<Packet> {
    let k = params.psk.bits_per_symbol();
    let needed = layout.data_slots * k;
    if bits.len() < needed {
        return Err(Error::InsufficientBits {
            needed,
            provided: bits.len(),
            missing: needed - bits.len(),
        });
    }
    let gaussian = gaussian_modulate(rng, params.v_a, layout.data_slots)?;
    let symbols: Vec<DataSymbol> = bits[..needed]
        .chunks(k)
        .zip(gaussian)
        .map(|(chunk, g)| {
            let symbol = params.bits_to_symbol(chunk);
            let displacement = constellation_point(params.psk, symbol, delta_alice);
            DataSymbol {
                symbol,
                gaussian: g,
                displacement,
            }
        })
        .collect();

    let slots = layout
        .roles()
        .into_iter()
        .map(|role| {
            let tx = match role {
                SlotRole::Pilot { position_in_set, .. } => {
                    QuadraturePair::polar(delta_alice, position_in_set as f64 * layout.pilot_phase_step)
                }
                SlotRole::ShotNoise => QuadraturePair::ORIGIN,
                SlotRole::Data { symbol_index } => {
                    let s = &symbols[symbol_index as usize];
                    if displace_data {
                        apply_displacement(s.gaussian, s.displacement)
                    } else {
                        s.gaussian
                    }
                }
            };
            PulseSlot { role, tx }
        })
        .collect();

    Ok(Packet {
        packet_index,
        slots,
        symbols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::amplitude_to_quadratures;
    use crate::stats::{CoMoments, Moments};

    fn params(psk: PskOrder) -> ModulationParams {
        ModulationParams {
            psk,
            ..ModulationParams::default()
        }
    }

    #[test]
    fn gaussian_modulation_moments() {
        let mut rng = RngStream::new(2024, 1);
        let samples = gaussian_modulate(&mut rng, 5.0, 1_000_000).unwrap();
        let mut c = CoMoments::default();
        samples.iter().for_each(|q| c.push(q.x, q.p));
        assert!((4.97..=5.03).contains(&c.variance_a()), "{}", c.variance_a());
        assert!((4.97..=5.03).contains(&c.variance_b()), "{}", c.variance_b());
        let rho = c.covariance() / (c.variance_a() * c.variance_b()).sqrt();
        assert!(rho.abs() < 0.01, "correlation {rho}");
    }

    #[test]
    fn zero_variance_modulation_is_origin() {
        let mut rng = RngStream::new(1, 1);
        assert!(gaussian_modulate(&mut rng, 0.0, 10)
            .unwrap()
            .iter()
            .all(|q| *q == QuadraturePair::ORIGIN));
        assert!(gaussian_modulate(&mut rng, 5.0, 0).unwrap().is_empty());
    }

    #[test]
    fn bpsk_is_antipodal() {
        let p = params(PskOrder::Bpsk);
        let d0 = psk_displacement(0, &p, 13.0).unwrap();
        let d1 = psk_displacement(1, &p, 13.0).unwrap();
        assert_eq!(d0, QuadraturePair::new(13.0, 0.0));
        assert!((d1.x + 13.0).abs() < 1e-12 && d1.p.abs() < 1e-12);
        assert!(matches!(
            psk_displacement(2, &p, 13.0),
            Err(Error::SymbolOutOfRange { symbol: 2, order: 2 })
        ));
    }

    #[test]
    fn qpsk_points_at_right_angles() {
        let p = params(PskOrder::Qpsk);
        let pts: Vec<_> = (0..4).map(|s| psk_displacement(s, &p, 13.0).unwrap()).collect();
        for (i, a) in pts.iter().enumerate() {
            assert!((a.norm() - 13.0).abs() < 1e-12);
            let b = pts[(i + 1) % 4];
            assert!(a.dot(b).abs() < 1e-9);
        }
    }

    #[test]
    fn eight_psk_chord() {
        let p = params(PskOrder::Psk8);
        let a = psk_displacement(0, &p, 13.0).unwrap();
        let b = psk_displacement(1, &p, 13.0).unwrap();
        let chord = (a - b).norm();
        assert!((chord - 2.0 * 13.0 * (PI / 8.0).sin()).abs() < 1e-12);
        assert!((chord - 9.9497).abs() < 1e-3);
    }

    #[test]
    fn displacement_examples() {
        let q = QuadraturePair::new(0.3, -2.0);
        assert_eq!(apply_displacement(q, QuadraturePair::ORIGIN), q);
        let d = apply_displacement(QuadraturePair::new(-1.2, 0.8), QuadraturePair::new(13.0, 0.0));
        assert!((d.x - 11.8).abs() < 1e-12 && (d.p - 0.8).abs() < 1e-12);
    }

    #[test]
    fn displacement_keeps_ensemble_variance() {
        let n = 100_000;
        let mut rng = RngStream::new(5, 5);
        let shift = QuadraturePair::new(13.0, 0.0);
        let samples = gaussian_modulate(&mut rng, 5.0, n).unwrap();
        let before: Moments = samples.iter().map(|q| q.x).collect();
        let after: Moments = samples.iter().map(|q| apply_displacement(*q, shift).x).collect();
        let sigma_mean = (5.0 / n as f64).sqrt();
        assert!((after.mean - 13.0).abs() < 3.0 * sigma_mean);
        assert!((after.variance() - before.variance()).abs() < 1e-9);
        let p_after: Moments = samples.iter().map(|q| apply_displacement(*q, shift).p).collect();
        assert!(p_after.mean.abs() < 3.0 * sigma_mean);
    }

    #[test]
    fn beamsplitter_examples() {
        let pump = ComplexAmplitude::new(78.1, 0.0);
        let out = beamsplitter_displace(ComplexAmplitude::default(), pump, 0.01).unwrap();
        assert!((out.re - 7.81).abs() < 1e-12);
        assert!((amplitude_to_quadratures(out).x - 15.62).abs() < 1e-12);

        let alpha = ComplexAmplitude::new(1.5, -0.5);
        let out = beamsplitter_displace(alpha, ComplexAmplitude::default(), 0.2).unwrap();
        assert!((out.re - 1.5 * 0.8f64.sqrt()).abs() < 1e-15);

        assert!(beamsplitter_displace(alpha, pump, 0.0).is_err());
        assert!(beamsplitter_displace(alpha, pump, 1.0).is_err());
    }

    #[test]
    fn beamsplitter_attenuation_bound() {
        for &r in &[1e-4, 1e-3, 0.01, 0.05, 0.1] {
            for &a in &[0.1, 1.0, 3.0, 10.0] {
                let alpha = ComplexAmplitude::new(a, 0.0);
                let out = beamsplitter_displace(alpha, ComplexAmplitude::default(), r).unwrap();
                assert!((out.re - a).abs() <= (r / 2.0 + r * r) * a);
            }
        }
    }

    #[test]
    fn beamsplitter_converges_to_ideal_displacement() {
        let target = ComplexAmplitude::new(3.0, 1.0);
        let mut prev = f64::INFINITY;
        for &r in &[0.3, 0.1, 0.03, 0.01, 0.003, 0.001] {
            let pump = target.scale(1.0 / f64::sqrt(r));
            let mut worst: f64 = 0.0;
            for i in 0..=20 {
                for j in 0..=20 {
                    let alpha = ComplexAmplitude::new(-10.0 + i as f64, -10.0 + j as f64);
                    if alpha.photon_number() > 100.0 {
                        continue;
                    }
                    let out = beamsplitter_displace(alpha, pump, r).unwrap();
                    let ideal = alpha + target;
                    worst = worst.max((out.re - ideal.re).hypot(out.im - ideal.im));
                }
            }
            assert!(worst < prev, "r = {r}: {worst} !< {prev}");
            prev = worst;
        }
    }

    #[test]
    fn default_layout_roles() {
        let layout = PacketLayout::default();
        layout.validate().unwrap();
        let roles = layout.roles();
        assert_eq!(roles.len(), 400);
        let pilots = roles.iter().filter(|r| matches!(r, SlotRole::Pilot { .. })).count();
        let shot = roles.iter().filter(|r| matches!(r, SlotRole::ShotNoise)).count();
        let data = roles.iter().filter(|r| matches!(r, SlotRole::Data { .. })).count();
        assert_eq!((pilots, shot, data), (36, 120, 244));
        // triplets every 33 slots
        for set in 0..12u32 {
            for pos in 0..3u8 {
                assert_eq!(
                    roles[set as usize * 33 + pos as usize],
                    SlotRole::Pilot {
                        set_index: set,
                        position_in_set: pos
                    }
                );
            }
        }
        let data_indices: Vec<u32> = roles
            .iter()
            .filter_map(|r| match r {
                SlotRole::Data { symbol_index } => Some(*symbol_index),
                _ => None,
            })
            .collect();
        assert_eq!(data_indices, (0..244).collect::<Vec<_>>());
    }

    #[test]
    fn bad_layouts_rejected() {
        let l = PacketLayout {
            data_slots: 243,
            ..PacketLayout::default()
        };
        assert!(l.validate().is_err());
        let l = PacketLayout {
            pilot_pulses: 35,
            data_slots: 245,
            ..PacketLayout::default()
        };
        assert!(l.validate().is_err());
    }

    #[test]
    fn packet_consumes_exact_bits() {
        let layout = PacketLayout::default();
        let p = params(PskOrder::Bpsk);
        let mut rng = RngStream::new(3, 0);
        let bits: Vec<bool> = (0..244).map(|i| i % 3 == 0).collect();
        let packet = build_packet(&mut rng, &bits, &p, &layout, 44.0, 7).unwrap();
        assert_eq!(packet.symbols.len(), 244);
        assert_eq!(packet.packet_index, 7);
        let err = build_packet(&mut rng, &bits[..200], &p, &layout, 44.0, 7).unwrap_err();
        assert!(matches!(err, Error::InsufficientBits { missing: 44, .. }));
        let p8 = params(PskOrder::Psk8);
        let err = build_packet(&mut rng, &bits, &p8, &layout, 44.0, 7).unwrap_err();
        assert!(matches!(err, Error::InsufficientBits { needed: 732, .. }));
    }

    #[test]
    fn packet_slot_invariants() {
        let layout = PacketLayout::default();
        let p = params(PskOrder::Qpsk);
        let mut rng = RngStream::new(9, 0);
        let bits: Vec<bool> = (0..488).map(|i| (i * 7) % 5 < 2).collect();
        let packet = build_packet(&mut rng, &bits, &p, &layout, 44.0, 0).unwrap();
        for slot in &packet.slots {
            match slot.role {
                SlotRole::Pilot { position_in_set, .. } => {
                    assert!((slot.tx.norm() - 44.0).abs() < 1e-12);
                    let expected = position_in_set as f64 * TAU / 3.0;
                    assert!(crate::model::wrap_angle(slot.tx.angle() - expected).abs() < 1e-12);
                }
                SlotRole::ShotNoise => assert_eq!(slot.tx, QuadraturePair::ORIGIN),
                SlotRole::Data { symbol_index } => {
                    let s = &packet.symbols[symbol_index as usize];
                    assert_eq!(slot.tx, s.gaussian + s.displacement);
                    assert!((s.displacement.norm() - 44.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gray_mapping_round_trip_and_adjacency() {
        for psk in PskOrder::ALL {
            let p = params(psk);
            let m = psk.order();
            for s in 0..m {
                let mut bits = Vec::new();
                p.symbol_to_bits(s, &mut bits);
                assert_eq!(bits.len(), psk.bits_per_symbol());
                assert_eq!(p.bits_to_symbol(&bits), s);
                let mut next = Vec::new();
                p.symbol_to_bits((s + 1) % m, &mut next);
                let diff = bits.iter().zip(&next).filter(|(a, b)| a != b).count();
                assert_eq!(diff, 1, "{psk} symbols {s} and {}", (s + 1) % m);
            }
        }
    }

    #[test]
    fn delta_back_computation() {
        let d = delta_at_alice(13.0, 0.5, 0.62, 0.28);
        assert!(((0.5f64 * 0.62 * 0.28).sqrt() * d - 13.0).abs() < 1e-12);
        assert!((pump_amplitude(15.62, 0.01) - 78.1).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn constellation_rotation_symmetry(m_idx in 0usize..3, delta in 0.1f64..100.0) {
            let psk = PskOrder::ALL[m_idx];
            let p = params(psk);
            let m = psk.order();
            let step = TAU / m as f64;
            for s in 0..m {
                let rotated = psk_displacement(s, &p, delta).unwrap().rotate(step);
                let next = psk_displacement((s + 1) % m, &p, delta).unwrap();
                proptest::prop_assert!((rotated - next).norm() < 1e-9 * delta.max(1.0));
            }
        }
    }
}
