//! Experiment configuration and its flat `key = value` text form.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::receiver::ReceiverParams;
use crate::security::SecurityParams;
use crate::transmitter::{delta_at_alice, ModulationParams, PacketLayout, PskOrder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub modulation: ModulationParams,
    pub layout: PacketLayout,
    pub channel: ChannelParams,
    pub receiver: ReceiverParams,
    pub reconciliation_efficiency: f64,
    pub n_packets: u64,
    pub clock_hz: f64,
    pub seed: u64,
    /// Exponential-average weight applied to packet phase estimates.
    pub smoothing_weight: f64,
    pub phase_correction: bool,
    /// When false, data slots carry the Gaussian modulation only.
    pub displacement_enabled: bool,
    pub output_dir: PathBuf,
    pub emit_traces: bool,
    /// Worker threads, 0 for all cores. Never affects results.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            modulation: ModulationParams::default(),
            layout: PacketLayout::default(),
            channel: ChannelParams::default(),
            receiver: ReceiverParams::default(),
            reconciliation_efficiency: 0.9,
            n_packets: 5000,
            clock_hz: 2e6,
            seed: 1,
            smoothing_weight: 0.02,
            phase_correction: true,
            displacement_enabled: true,
            output_dir: PathBuf::from("out"),
            emit_traces: false,
            workers: 0,
        }
    }
}

/// Every recognised key with its unit or meaning.
pub const KEYS: &[(&str, &str)] = &[
    ("v_a", "Gaussian modulation variance at Alice, N0"),
    ("delta_bob", "displacement magnitude at Bob, sqrt(N0)"),
    ("modulation", "bpsk | qpsk | 8psk"),
    ("gray_coding", "true | false"),
    ("bs_reflectivity", "displacement beam-splitter reflectivity, (0, 0.5)"),
    ("slots_per_packet", "pulses per packet"),
    ("pilot_pulses", "pilot pulses per packet, multiple of 3"),
    ("shot_noise_slots", "vacuum calibration slots per packet"),
    ("data_slots", "data slots per packet"),
    ("pilot_phase_step", "phase step inside a pilot triplet, rad (must be 2pi/3)"),
    ("transmittance", "channel power transmittance T"),
    ("excess_noise", "channel excess noise xi, N0 at the channel input"),
    ("phase_step_std", "phase random-walk step, rad per pulse"),
    ("initial_phase", "phase at pulse 0, rad"),
    ("eta", "detection efficiency"),
    ("v_ele", "electronic noise variance, N0"),
    ("gamma", "1 homodyne, 0.5 heterodyne"),
    ("gain_mv", "detector gain, mV per sqrt(N0)"),
    ("reconciliation_efficiency", "beta, (0, 1]"),
    ("n_packets", "packets to simulate"),
    ("clock_hz", "pulse repetition rate, Hz"),
    ("seed", "64-bit RNG seed"),
    ("smoothing_weight", "phase average weight w, (0, 1]"),
    ("phase_correction", "derotate data with pilot phase, true | false"),
    ("displacement_enabled", "displace data slots, true | false"),
    ("output_dir", "directory for reports and traces"),
    ("emit_traces", "write per-pulse and scatter CSV, true | false"),
    ("workers", "worker threads, 0 = all cores"),
];

pub fn valid_keys() -> Vec<String> {
    KEYS.iter().map(|(k, _)| k.to_string()).collect()
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{}`", value.trim())))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(Error::Config(format!("`{key}`: expected a boolean, got `{other}`"))),
    }
}

impl ExperimentConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key.trim();
        match k {
            "v_a" => self.modulation.v_a = parse(k, value)?,
            "delta_bob" => self.modulation.delta_bob = parse(k, value)?,
            "modulation" => {
                self.modulation.psk = value
                    .parse::<PskOrder>()
                    .map_err(|e| Error::Config(format!("`{k}`: {e}")))?
            }
            "gray_coding" => self.modulation.gray_coding = parse_bool(k, value)?,
            "bs_reflectivity" => self.modulation.bs_reflectivity = parse(k, value)?,
            "slots_per_packet" => self.layout.slots_per_packet = parse(k, value)?,
            "pilot_pulses" => self.layout.pilot_pulses = parse(k, value)?,
            "shot_noise_slots" => self.layout.shot_noise_slots = parse(k, value)?,
            "data_slots" => self.layout.data_slots = parse(k, value)?,
            "pilot_phase_step" => self.layout.pilot_phase_step = parse(k, value)?,
            "transmittance" => self.channel.transmittance = parse(k, value)?,
            "excess_noise" => self.channel.excess_noise = parse(k, value)?,
            "phase_step_std" => self.channel.phase_step_std = parse(k, value)?,
            "initial_phase" => self.channel.initial_phase = parse(k, value)?,
            "eta" => self.receiver.eta = parse(k, value)?,
            "v_ele" => self.receiver.v_ele = parse(k, value)?,
            "gamma" => self.receiver.gamma = parse(k, value)?,
            "gain_mv" => self.receiver.gain_mv = parse(k, value)?,
            "reconciliation_efficiency" => self.reconciliation_efficiency = parse(k, value)?,
            "n_packets" => self.n_packets = parse(k, value)?,
            "clock_hz" => self.clock_hz = parse(k, value)?,
            "seed" => self.seed = parse(k, value)?,
            "smoothing_weight" => self.smoothing_weight = parse(k, value)?,
            "phase_correction" => self.phase_correction = parse_bool(k, value)?,
            "displacement_enabled" => self.displacement_enabled = parse_bool(k, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "emit_traces" => self.emit_traces = parse_bool(k, value)?,
            "workers" => self.workers = parse(k, value)?,
            _ => {
                return Err(Error::UnknownKey {
                    key: k.to_string(),
                    valid: valid_keys(),
                })
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key, value).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("line {}: {msg}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Full configuration in the text form, one documented key per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, doc) in KEYS {
            out.push_str(&format!("# {doc}\n{key} = {}\n", self.get(key).unwrap_or_default()));
        }
        out
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "v_a" => self.modulation.v_a.to_string(),
            "delta_bob" => self.modulation.delta_bob.to_string(),
            "modulation" => self.modulation.psk.to_string(),
            "gray_coding" => self.modulation.gray_coding.to_string(),
            "bs_reflectivity" => self.modulation.bs_reflectivity.to_string(),
            "slots_per_packet" => self.layout.slots_per_packet.to_string(),
            "pilot_pulses" => self.layout.pilot_pulses.to_string(),
            "shot_noise_slots" => self.layout.shot_noise_slots.to_string(),
            "data_slots" => self.layout.data_slots.to_string(),
            "pilot_phase_step" => self.layout.pilot_phase_step.to_string(),
            "transmittance" => self.channel.transmittance.to_string(),
            "excess_noise" => self.channel.excess_noise.to_string(),
            "phase_step_std" => self.channel.phase_step_std.to_string(),
            "initial_phase" => self.channel.initial_phase.to_string(),
            "eta" => self.receiver.eta.to_string(),
            "v_ele" => self.receiver.v_ele.to_string(),
            "gamma" => self.receiver.gamma.to_string(),
            "gain_mv" => self.receiver.gain_mv.to_string(),
            "reconciliation_efficiency" => self.reconciliation_efficiency.to_string(),
            "n_packets" => self.n_packets.to_string(),
            "clock_hz" => self.clock_hz.to_string(),
            "seed" => self.seed.to_string(),
            "smoothing_weight" => self.smoothing_weight.to_string(),
            "phase_correction" => self.phase_correction.to_string(),
            "displacement_enabled" => self.displacement_enabled.to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            "emit_traces" => self.emit_traces.to_string(),
            "workers" => self.workers.to_string(),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.modulation.validate()?;
        self.layout.validate()?;
        self.channel.validate()?;
        self.receiver.validate()?;
        if self.n_packets == 0 {
            return Err(Error::Config("n_packets must be at least 1".into()));
        }
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) {
            return Err(Error::invalid("clock_hz", self.clock_hz, "must be positive"));
        }
        if !(self.smoothing_weight > 0.0 && self.smoothing_weight <= 1.0) {
            return Err(Error::invalid("smoothing_weight", self.smoothing_weight, "must lie in (0, 1]"));
        }
        if !(self.reconciliation_efficiency > 0.0 && self.reconciliation_efficiency <= 1.0) {
            return Err(Error::invalid(
                "reconciliation_efficiency",
                self.reconciliation_efficiency,
                "must lie in (0, 1]",
            ));
        }
        Ok(())
    }

    /// Pulses per second that carry key material.
    pub fn effective_rate_hz(&self) -> f64 {
        self.clock_hz * self.layout.data_slots as f64 / self.layout.slots_per_packet as f64
    }

    /// Classical payload rate, bits per second.
    pub fn data_rate_bps(&self) -> f64 {
        self.effective_rate_hz() * self.modulation.psk.bits_per_symbol() as f64
    }

    /// Displacement applied at Alice for the configured target at Bob.
    pub fn delta_alice(&self) -> f64 {
        delta_at_alice(
            self.modulation.delta_bob,
            self.receiver.gamma,
            self.receiver.eta,
            self.channel.transmittance,
        )
    }

    pub fn total_pulses(&self) -> u64 {
        self.n_packets * self.layout.slots_per_packet as u64
    }

    /// Security parameters at the configured (true) channel.
    pub fn security_params(&self) -> SecurityParams {
        SecurityParams {
            v_a: self.modulation.v_a,
            transmittance: self.channel.transmittance,
            excess_noise: self.channel.excess_noise,
            eta: self.receiver.eta,
            v_ele: self.receiver.v_ele,
            gamma: self.receiver.gamma,
            reconciliation_efficiency: self.reconciliation_efficiency,
            effective_rate_hz: self.effective_rate_hz(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_operating_point() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.modulation.v_a, 5.0);
        assert_eq!(c.modulation.delta_bob, 13.0);
        assert_eq!(c.channel.transmittance, 0.28);
        assert_eq!(c.channel.excess_noise, 0.055);
        assert_eq!(c.receiver.eta, 0.62);
        assert_eq!(c.receiver.v_ele, 0.01);
        assert_eq!(c.receiver.gamma, 0.5);
        assert_eq!(c.layout.slots_per_packet, 400);
        assert_eq!(c.clock_hz, 2e6);
    }

    #[test]
    fn data_rate_budget() {
        let mut c = ExperimentConfig::default();
        assert_eq!(c.data_rate_bps(), 1.22e6);
        c.modulation.psk = PskOrder::Qpsk;
        assert_eq!(c.data_rate_bps(), 2.44e6);
        c.modulation.psk = PskOrder::Psk8;
        assert_eq!(c.data_rate_bps(), 3.66e6);
    }

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig::default();
        c.set("modulation", "8psk").unwrap();
        c.set("excess_noise", "0.07").unwrap();
        c.set("seed", "18446744073709551615").unwrap();
        c.set("phase_correction", "false").unwrap();
        let back = ExperimentConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = ExperimentConfig::from_text("# header\n\n  transmittance = 0.5  # half\nn_packets=10\n").unwrap();
        assert_eq!(c.channel.transmittance, 0.5);
        assert_eq!(c.n_packets, 10);
    }

    #[test]
    fn errors_are_reported() {
        let e = ExperimentConfig::from_text("bogus = 1").unwrap_err();
        assert!(matches!(e, Error::UnknownKey { .. }));
        assert!(e.to_string().contains("transmittance"));
        assert_eq!(e.exit_code(), 2);
        let e = ExperimentConfig::from_text("eta = abc").unwrap_err();
        assert!(e.to_string().contains("line 1"));
        assert_eq!(e.exit_code(), 2);
        assert!(ExperimentConfig::from_text("no equals sign").is_err());
        assert!(ExperimentConfig::from_text("gamma = 0.7").is_err());
        assert!(ExperimentConfig::from_text("n_packets = 0").is_err());
    }

    #[test]
    fn every_key_round_trips_through_get() {
        let c = ExperimentConfig::default();
        for (k, _) in KEYS {
            let v = c.get(k).unwrap();
            let mut d = ExperimentConfig::default();
            d.set(k, &v).unwrap();
            assert_eq!(d, c, "key {k}");
        }
    }
}
