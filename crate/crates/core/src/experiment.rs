//! End-to-end runs: transmit, channel, detect, calibrate, recover phase,
//! demodulate, remove displacement, estimate and compute the key rate.
//!
//! Every packet draws from its own streams, so packets are simulated in
//! parallel. The run makes two passes over the same deterministic packets:
//! the first gathers calibration, displacement and raw phase statistics, the
//! second applies them. Reductions are folded in packet order, so the number
//! of workers never changes a result.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{propagate, step_phase, PhaseTrack};
use crate::config::ExperimentConfig;
use crate::dsp::{
    collect_pattern_sets, estimate_packet_phase, CalibrationResult, DisplacementAccumulator, PhaseSmoother,
    ShotNoiseAccumulator,
};
use crate::error::{Error, Result};
use crate::link::{demodulate_psk, LinkAccumulator, LinkReport};
use crate::model::{wrap_angle, QuadraturePair, RngStream, SlotRole};
use crate::receiver::{heterodyne_measure, measure_vacuum, RawSample};
use crate::security::{
    estimate_excess_noise, estimate_transmittance, key_rate_from_estimates, secret_key_rate, SecurityEstimate,
    SecurityParams,
};
use crate::stats::{CoMoments, Moments};
use crate::transmitter::{assemble_packet, constellation_point, DataSymbol, Packet};

/// Packets handed to the worker pool at a time.
const CHUNK: u64 = 2048;

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
enum Purpose {
    Bits = 0,
    Modulation = 1,
    Channel = 2,
    Receiver = 3,
    Phase = 4,
    Vacuum = 5,
}

fn stream(seed: u64, packet: u64, purpose: Purpose) -> RngStream {
    RngStream::new(seed, (packet << 3) | purpose as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagnostics {
    pub correction_enabled: bool,
    pub smoothing_weight: f64,
    /// RMS of true minus applied phase over data slots, rad.
    pub rms_error_rad: f64,
    pub max_abs_error_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseCounts {
    pub packets: u64,
    pub pulses: u64,
    pub pilot_pulses: u64,
    pub shot_noise_slots: u64,
    pub data_slots: u64,
    pub bits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub delta_alice: f64,
    pub effective_rate_hz: f64,
    pub data_rate_bps: f64,
    /// Sample variance of Alice's Gaussian quadratures, used by the estimators.
    pub v_a_sample: f64,
    pub cov_ab: f64,
    pub v_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub derived: Derived,
    pub calibration: CalibrationResult,
    /// Displacement at Bob estimated from pilots, √N₀.
    pub delta_hat: f64,
    /// `delta_hat` less its noise bias; this is what gets subtracted.
    pub delta_removed: f64,
    pub link: LinkReport,
    pub security: SecurityEstimate,
    pub phase: PhaseDiagnostics,
    pub counts: PulseCounts,
    /// Seconds; kept out of the serialized report so it stays reproducible.
    #[serde(skip)]
    pub wall_clock_s: f64,
}

/// One row of the per-pulse trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub pulse_index: u64,
    pub packet_index: u64,
    pub role: &'static str,
    pub tx_x: f64,
    pub tx_p: f64,
    pub rx_x_mv: f64,
    pub rx_p_mv: f64,
    pub theta_true: f64,
    pub theta_hat: f64,
    pub symbol_tx: Option<u32>,
    pub symbol_rx: Option<u32>,
}

/// A phase-corrected data point, √N₀.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterRow {
    pub packet_index: u64,
    pub symbol_index: u32,
    pub symbol_tx: u32,
    pub symbol_rx: u32,
    pub x: f64,
    pub p: f64,
}

/// Receives trace rows in pulse order.
pub trait TraceSink: Send {
    fn pulse(&mut self, row: &TraceRow) -> Result<()>;
    fn scatter(&mut self, row: &ScatterRow) -> Result<()>;
    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

/// Keeps every row in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub pulses: Vec<TraceRow>,
    pub scatter: Vec<ScatterRow>,
}

impl TraceSink for MemorySink {
    fn pulse(&mut self, row: &TraceRow) -> Result<()> {
        self.pulses.push(row.clone());
        Ok(())
    }

    fn scatter(&mut self, row: &ScatterRow) -> Result<()> {
        self.scatter.push(row.clone());
        Ok(())
    }
}

struct SimulatedPacket {
    packet: Packet,
    raw: Vec<RawSample>,
    theta: Vec<f64>,
}

fn bits_for_packet(cfg: &ExperimentConfig, k: u64) -> Vec<bool> {
    let n = cfg.layout.data_slots * cfg.modulation.psk.bits_per_symbol();
    let mut rng = stream(cfg.seed, k, Purpose::Bits);
    (0..n).map(|_| rng.bit()).collect()
}

fn phase_increment_sum(cfg: &ExperimentConfig, k: u64) -> f64 {
    let mut rng = stream(cfg.seed, k, Purpose::Phase);
    let mut track = PhaseTrack::new(0.0, 0);
    for _ in 0..cfg.layout.slots_per_packet {
        track = step_phase(track, &cfg.channel, &mut rng);
    }
    track.theta
}

fn simulate_packet(cfg: &ExperimentConfig, k: u64, theta_start: f64, delta_alice: f64) -> Result<SimulatedPacket> {
    let bits = bits_for_packet(cfg, k);
    let mut mod_rng = stream(cfg.seed, k, Purpose::Modulation);
    let packet = assemble_packet(
        &mut mod_rng,
        &bits,
        &cfg.modulation,
        &cfg.layout,
        delta_alice,
        k,
        cfg.displacement_enabled,
    )?;
    let mut ch_rng = stream(cfg.seed, k, Purpose::Channel);
    let mut rx_rng = stream(cfg.seed, k, Purpose::Receiver);
    let mut ph_rng = stream(cfg.seed, k, Purpose::Phase);
    let slots = cfg.layout.slots_per_packet as u64;
    let mut track = PhaseTrack::new(theta_start, k * slots);
    let mut raw = Vec::with_capacity(packet.slots.len());
    let mut theta = Vec::with_capacity(packet.slots.len());
    for slot in &packet.slots {
        let sample = if slot.role == SlotRole::ShotNoise {
            // signal port blocked at Bob: vacuum, no channel noise
            measure_vacuum(&cfg.receiver, &mut rx_rng)
        } else {
            let out = propagate(slot.tx, &track, &cfg.channel, &mut ch_rng);
            heterodyne_measure(out, slot.role, &cfg.receiver, &mut rx_rng)
        };
        raw.push(sample);
        theta.push(track.theta);
        track = step_phase(track, &cfg.channel, &mut ph_rng);
    }
    Ok(SimulatedPacket { packet, raw, theta })
}

/// Phase at the first pulse of every packet.
fn packet_start_phases(cfg: &ExperimentConfig) -> Vec<f64> {
    let n = cfg.n_packets;
    if cfg.channel.phase_step_std == 0.0 {
        return vec![cfg.channel.initial_phase; n as usize];
    }
    let sums: Vec<f64> = (0..n).into_par_iter().map(|k| phase_increment_sum(cfg, k)).collect();
    let mut starts = Vec::with_capacity(n as usize);
    let mut theta = cfg.channel.initial_phase;
    for s in sums {
        starts.push(theta);
        theta += s;
    }
    starts
}

struct FirstPass {
    shot: ShotNoiseAccumulator,
    disp: DisplacementAccumulator,
    raw_phase: f64,
}

fn first_pass(cfg: &ExperimentConfig, k: u64, theta_start: f64, delta_alice: f64) -> Result<FirstPass> {
    let sim = simulate_packet(cfg, k, theta_start, delta_alice)?;
    let mut shot = ShotNoiseAccumulator::default();
    let mut disp = DisplacementAccumulator::default();
    for s in sim.raw.iter().filter(|s| s.slot_role == SlotRole::ShotNoise) {
        shot.push(s);
    }
    let sets = collect_pattern_sets(sim.raw.iter().map(|s| (s.slot_role, QuadraturePair::new(s.x_mv, s.p_mv))), k);
    sets.iter().for_each(|s| disp.push(s));
    let offsets: Vec<f64> = sets.iter().map(|s| s.default_offset()).collect();
    let raw_phase = estimate_packet_phase(&sets, &offsets)?;
    Ok(FirstPass { shot, disp, raw_phase })
}

struct SecondPass {
    link: LinkAccumulator,
    pairs: CoMoments,
    phase_err: Moments,
    max_phase_err: f64,
    trace: Vec<TraceRow>,
    scatter: Vec<ScatterRow>,
}

struct Calibrated {
    cal: CalibrationResult,
    delta_hat: f64,
    delta_removed: f64,
    theta_hat: Vec<f64>,
}

fn second_pass(
    cfg: &ExperimentConfig,
    k: u64,
    theta_start: f64,
    delta_alice: f64,
    c: &Calibrated,
    keep_trace: bool,
) -> Result<SecondPass> {
    let sim = simulate_packet(cfg, k, theta_start, delta_alice)?;
    let theta_hat = c.theta_hat[k as usize];
    let mut link = LinkAccumulator::new(cfg.modulation.psk);
    let mut pairs = CoMoments::default();
    let mut phase_err = Moments::default();
    let mut max_phase_err: f64 = 0.0;
    let mut trace = Vec::new();
    let mut scatter = Vec::new();
    let slots = cfg.layout.slots_per_packet as u64;

    for (j, (slot, raw)) in sim.packet.slots.iter().zip(&sim.raw).enumerate() {
        let mut decided = None;
        let mut sent = None;
        if let SlotRole::Data { symbol_index } = slot.role {
            let DataSymbol { symbol, gaussian, .. } = sim.packet.symbols[symbol_index as usize];
            let y = c.cal.normalize(raw).rotate(-theta_hat);
            let rx = demodulate_psk(y, &cfg.modulation);
            link.push_sample(y, symbol);
            link.push_decision(symbol, rx, &cfg.modulation);
            let residual = if cfg.displacement_enabled {
                y - constellation_point(cfg.modulation.psk, rx, c.delta_removed)
            } else {
                y
            };
            pairs.push(gaussian.x, residual.x);
            pairs.push(gaussian.p, residual.p);
            let err = wrap_angle(sim.theta[j] - theta_hat);
            phase_err.push(err);
            max_phase_err = max_phase_err.max(err.abs());
            decided = Some(rx);
            sent = Some(symbol);
            if keep_trace {
                scatter.push(ScatterRow {
                    packet_index: k,
                    symbol_index,
                    symbol_tx: symbol,
                    symbol_rx: rx,
                    x: y.x,
                    p: y.p,
                });
            }
        }
        if keep_trace {
            trace.push(TraceRow {
                pulse_index: k * slots + j as u64,
                packet_index: k,
                role: slot.role.label(),
                tx_x: slot.tx.x,
                tx_p: slot.tx.p,
                rx_x_mv: raw.x_mv,
                rx_p_mv: raw.p_mv,
                theta_true: sim.theta[j],
                theta_hat,
                symbol_tx: sent,
                symbol_rx: decided,
            });
        }
    }
    Ok(SecondPass {
        link,
        pairs,
        phase_err,
        max_phase_err,
        trace,
        scatter,
    })
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn chunks(n: u64) -> impl Iterator<Item = std::ops::Range<u64>> {
    (0..n.div_ceil(CHUNK)).map(move |c| c * CHUNK..((c + 1) * CHUNK).min(n))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with_sink(cfg, None)
}

/// Runs the full pipeline, streaming traces to `sink` when one is given.
pub fn run_experiment_with_sink(
    cfg: &ExperimentConfig,
    mut sink: Option<&mut dyn TraceSink>,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    let report = with_pool(cfg.workers, || run_inner(cfg, &mut sink))??;
    if let Some(s) = sink {
        s.finish()?;
    }
    Ok(ExperimentReport {
        wall_clock_s: started.elapsed().as_secs_f64(),
        ..report
    })
}

fn run_inner(cfg: &ExperimentConfig, sink: &mut Option<&mut dyn TraceSink>) -> Result<ExperimentReport> {
    let delta_alice = cfg.delta_alice();
    let starts = packet_start_phases(cfg);

    let mut shot = ShotNoiseAccumulator::default();
    let mut disp = DisplacementAccumulator::default();
    let mut raw_phases = Vec::with_capacity(cfg.n_packets as usize);
    for range in chunks(cfg.n_packets) {
        let part: Vec<Result<FirstPass>> = range
            .into_par_iter()
            .map(|k| first_pass(cfg, k, starts[k as usize], delta_alice))
            .collect();
        for p in part {
            let p = p?;
            shot.merge(&p.shot);
            disp.merge(&p.disp);
            raw_phases.push(p.raw_phase);
        }
    }
    let cal = shot.finish(cfg.receiver.v_ele)?;
    let n0_root = cal.n0_mv2.sqrt();
    let delta_hat = disp.finish()? / n0_root;
    let delta_removed = disp.finish_debiased()? / n0_root;
    let theta_hat = if cfg.phase_correction {
        let mut sm = PhaseSmoother::new(cfg.smoothing_weight)?;
        raw_phases.iter().map(|&r| sm.update(r).theta_smoothed).collect()
    } else {
        vec![0.0; raw_phases.len()]
    };
    let calibrated = Calibrated {
        cal,
        delta_hat,
        delta_removed,
        theta_hat,
    };

    let keep_trace = sink.is_some();
    let mut link = LinkAccumulator::new(cfg.modulation.psk);
    let mut pairs = CoMoments::default();
    let mut phase_err = Moments::default();
    let mut max_phase_err: f64 = 0.0;
    for range in chunks(cfg.n_packets) {
        let part: Vec<Result<SecondPass>> = range
            .into_par_iter()
            .map(|k| second_pass(cfg, k, starts[k as usize], delta_alice, &calibrated, keep_trace))
            .collect();
        for p in part {
            let p = p?;
            link.merge(&p.link);
            pairs.merge(&p.pairs);
            phase_err.merge(&p.phase_err);
            max_phase_err = max_phase_err.max(p.max_phase_err);
            if let Some(s) = sink.as_deref_mut() {
                for row in &p.trace {
                    s.pulse(row)?;
                }
                for row in &p.scatter {
                    s.scatter(row)?;
                }
            }
        }
    }

    let g = cfg.receiver.gamma;
    let eta = cfg.receiver.eta;
    let v_a_sample = pairs.variance_a();
    let cov_ab = pairs.covariance();
    let v_b = pairs.variance_b();
    let t_hat = estimate_transmittance(cov_ab, v_a_sample, g, eta)?;
    let xi_hat = estimate_excess_noise(v_b, t_hat, v_a_sample, g, eta, cfg.receiver.v_ele)?;
    let params = SecurityParams {
        transmittance: t_hat,
        excess_noise: xi_hat,
        ..cfg.security_params()
    };
    let mut security = key_rate_from_estimates(&params)?;
    security.samples_used = pairs.n;

    let modulation_sigma = (g * eta * t_hat * cfg.modulation.v_a).sqrt();
    let link = link.report(calibrated.delta_hat, modulation_sigma, cfg.data_rate_bps());
    let l = &cfg.layout;
    let n = cfg.n_packets;
    Ok(ExperimentReport {
        config: cfg.clone(),
        derived: Derived {
            delta_alice,
            effective_rate_hz: cfg.effective_rate_hz(),
            data_rate_bps: cfg.data_rate_bps(),
            v_a_sample,
            cov_ab,
            v_b,
        },
        calibration: calibrated.cal,
        delta_hat: calibrated.delta_hat,
        delta_removed: calibrated.delta_removed,
        link,
        security,
        phase: PhaseDiagnostics {
            correction_enabled: cfg.phase_correction,
            smoothing_weight: cfg.smoothing_weight,
            rms_error_rad: (phase_err.variance() + phase_err.mean * phase_err.mean).sqrt(),
            max_abs_error_rad: max_phase_err,
        },
        counts: PulseCounts {
            packets: n,
            pulses: cfg.total_pulses(),
            pilot_pulses: n * l.pilot_pulses as u64,
            shot_noise_slots: n * l.shot_noise_slots as u64,
            data_slots: n * l.data_slots as u64,
            bits: n * (l.data_slots * cfg.modulation.psk.bits_per_symbol()) as u64,
        },
        wall_clock_s: 0.0,
    })
}

/// Analytic key rate, no simulation.
pub fn keyrate_only(params: &SecurityParams) -> Result<SecurityEstimate> {
    secret_key_rate(params)
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: String,
    pub seed: u64,
    pub q_factor: f64,
    pub ber_analytic: f64,
    pub ber_empirical: f64,
    pub symbol_error_rate: f64,
    pub t_hat: f64,
    pub xi_hat: f64,
    pub key_rate_per_pulse: f64,
    pub key_rate_bps: f64,
    pub data_rate_bps: f64,
}

impl SweepRow {
    fn from_report(parameter: &str, value: &str, r: &ExperimentReport) -> Self {
        Self {
            parameter: parameter.to_string(),
            value: value.to_string(),
            seed: r.config.seed,
            q_factor: r.link.q_factor,
            ber_analytic: r.link.ber_analytic,
            ber_empirical: r.link.ber_empirical.ber,
            symbol_error_rate: r.link.symbol_error_rate,
            t_hat: r.security.t_hat,
            xi_hat: r.security.xi_hat,
            key_rate_per_pulse: r.security.key_rate_per_pulse,
            key_rate_bps: r.security.key_rate_bps,
            data_rate_bps: r.link.data_rate_bps,
        }
    }
}

/// Runs one experiment per value; row `i` uses seed `cfg.seed + i`.
pub fn sweep(cfg: &ExperimentConfig, parameter: &str, values: &[String]) -> Result<Vec<SweepRow>> {
    if cfg.get(parameter).is_none() {
        return Err(Error::UnknownKey {
            key: parameter.to_string(),
            valid: crate::config::valid_keys(),
        });
    }
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut c = cfg.clone();
            c.set(parameter, v)?;
            c.seed = cfg.seed.wrapping_add(i as u64);
            c.validate()?;
            let r = run_experiment(&c)?;
            Ok(SweepRow::from_report(parameter, v, &r))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub seed: u64,
    pub calibration: CalibrationResult,
    /// `gain²`: the N₀ a perfect calibration would return, mV².
    pub expected_n0_mv2: f64,
    pub relative_error: f64,
    pub mean_x_mv: f64,
    pub mean_p_mv: f64,
}

/// Vacuum-only run: every slot of every packet is a shot-noise measurement.
pub fn run_calibration(cfg: &ExperimentConfig) -> Result<CalibrationReport> {
    cfg.validate()?;
    let slots = cfg.layout.slots_per_packet;
    let (acc, mx, mp) = with_pool(cfg.workers, || {
        let mut acc = ShotNoiseAccumulator::default();
        let mut mx = Moments::default();
        let mut mp = Moments::default();
        for range in chunks(cfg.n_packets) {
            let part: Vec<(ShotNoiseAccumulator, Moments, Moments)> = range
                .into_par_iter()
                .map(|k| {
                    let mut rng = stream(cfg.seed, k, Purpose::Vacuum);
                    let mut a = ShotNoiseAccumulator::default();
                    let mut x = Moments::default();
                    let mut p = Moments::default();
                    for _ in 0..slots {
                        let s = measure_vacuum(&cfg.receiver, &mut rng);
                        a.push(&s);
                        x.push(s.x_mv);
                        p.push(s.p_mv);
                    }
                    (a, x, p)
                })
                .collect();
            for (a, x, p) in part {
                acc.merge(&a);
                mx.merge(&x);
                mp.merge(&p);
            }
        }
        (acc, mx, mp)
    })?;
    let calibration = acc.finish(cfg.receiver.v_ele)?;
    let expected = cfg.receiver.gain_mv * cfg.receiver.gain_mv;
    Ok(CalibrationReport {
        seed: cfg.seed,
        calibration,
        expected_n0_mv2: expected,
        relative_error: calibration.n0_mv2 / expected - 1.0,
        mean_x_mv: mx.mean,
        mean_p_mv: mp.mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transmitter::PskOrder;

    fn small(n: u64) -> ExperimentConfig {
        ExperimentConfig {
            n_packets: n,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn stream_ids_do_not_collide() {
        let mut seen = std::collections::HashSet::new();
        for k in 0..1000u64 {
            for p in [
                Purpose::Bits,
                Purpose::Modulation,
                Purpose::Channel,
                Purpose::Receiver,
                Purpose::Phase,
                Purpose::Vacuum,
            ] {
                assert!(seen.insert((k << 3) | p as u64));
            }
        }
    }

    #[test]
    fn start_phases_chain_the_walk() {
        let mut cfg = small(20);
        cfg.channel.phase_step_std = 1e-3;
        let starts = packet_start_phases(&cfg);
        assert_eq!(starts[0], cfg.channel.initial_phase);
        // the last pulse of packet k steps into the first pulse of k+1
        let sim = simulate_packet(&cfg, 3, starts[3], cfg.delta_alice()).unwrap();
        let mut rng = stream(cfg.seed, 3, Purpose::Phase);
        let mut t = PhaseTrack::new(*sim.theta.last().unwrap(), 0);
        // replay the final step
        for _ in 0..cfg.layout.slots_per_packet - 1 {
            rng.standard_normal();
        }
        t = step_phase(t, &cfg.channel, &mut rng);
        assert!((t.theta - starts[4]).abs() < 1e-12);
    }

    #[test]
    fn small_run_is_sane() {
        let r = run_experiment(&small(300)).unwrap();
        assert_eq!(r.counts.pulses, 120_000);
        assert_eq!(r.counts.bits, 300 * 244);
        assert!((r.link.q_factor - 10.8).abs() < 1.0, "Q {}", r.link.q_factor);
        assert_eq!(r.link.ber_empirical.errors, 0);
        assert!((r.delta_hat - 13.0).abs() < 0.2);
        assert!((r.calibration.n0_mv2 - 100.0).abs() < 3.0);
        assert!((r.security.t_hat - 0.28).abs() < 0.03);
        assert!(r.phase.rms_error_rad < 0.05);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut a = small(2 * CHUNK + 17);
        a.workers = 1;
        let mut b = a.clone();
        b.workers = 3;
        let ra = run_experiment(&a).unwrap();
        let rb = run_experiment(&b).unwrap();
        assert_eq!(ra.security, rb.security);
        assert_eq!(ra.link, rb.link);
        assert_eq!(ra.phase, rb.phase);
    }

    #[test]
    fn trace_rows_cover_every_pulse() {
        let cfg = small(10);
        let mut sink = MemorySink::default();
        let r = run_experiment_with_sink(&cfg, Some(&mut sink)).unwrap();
        assert_eq!(sink.pulses.len() as u64, r.counts.pulses);
        assert_eq!(sink.scatter.len() as u64, r.counts.data_slots);
        assert!(sink.pulses.iter().enumerate().all(|(i, row)| row.pulse_index == i as u64));
        let data = sink.pulses.iter().filter(|r| r.role == "data").count();
        assert_eq!(data as u64, r.counts.data_slots);
        assert!(sink.pulses.iter().all(|r| (r.role == "data") == r.symbol_tx.is_some()));
    }

    #[test]
    fn too_few_vacuum_samples_is_rejected() {
        // 120 vacuum slots per packet against a floor of 1000
        assert!(run_experiment(&small(9)).is_ok());
        let e = run_experiment(&small(8)).unwrap_err();
        assert!(matches!(e, Error::TooFewVacuumSamples { .. }));
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn sweep_rows_and_seeds() {
        let cfg = small(100);
        let vals: Vec<String> = ["bpsk", "qpsk", "8psk"].iter().map(|s| s.to_string()).collect();
        let rows = sweep(&cfg, "modulation", &vals).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(rows[2].data_rate_bps, 3.66e6);
        assert!(sweep(&cfg, "modulation", &[]).unwrap().is_empty());
        assert!(matches!(sweep(&cfg, "nope", &vals), Err(Error::UnknownKey { .. })));
    }

    #[test]
    fn calibration_run_recovers_gain() {
        let r = run_calibration(&small(50)).unwrap();
        assert!(r.relative_error.abs() < 0.02, "{}", r.relative_error);
        assert_eq!(r.calibration.samples_used, 50 * 400);
    }

    #[test]
    fn psk_orders_run() {
        for psk in PskOrder::ALL {
            let mut cfg = small(50);
            cfg.modulation.psk = psk;
            let r = run_experiment(&cfg).unwrap();
            assert_eq!(r.link.modulation, psk);
            assert!(r.link.q_factor > 3.0);
        }
    }
}
