//! Quick invariant checks runnable from the command line.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::dsp::{estimate_displacement, estimate_packet_phase, PatternSet};
use crate::error::Result;
use crate::experiment::run_experiment;
use crate::link::ber_from_q;
use crate::model::{wrap_angle, Quadrature};
use crate::report::to_canonical_json;
use crate::security::{secret_key_rate, SecurityParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn noiseless_sets(delta: f64, theta: f64) -> Vec<PatternSet> {
    let u = |f: fn(f64) -> f64| {
        let mut out = [0.0; 3];
        for (i, v) in out.iter_mut().enumerate() {
            *v = delta * f(theta + i as f64 * TAU / 3.0);
        }
        out
    };
    vec![
        PatternSet {
            u: u(f64::cos),
            quadrature: Quadrature::X,
            packet_index: 0,
        },
        PatternSet {
            u: u(f64::sin),
            quadrature: Quadrature::P,
            packet_index: 0,
        },
    ]
}

/// Runs every check; `packets` sets the size of the simulated ones.
pub fn run_selftest(packets: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let k = secret_key_rate(&SecurityParams::default())?;
    out.push(check(
        "key rate at the operating point",
        (k.key_rate_bps / 30_000.0 - 1.0).abs() <= 0.15 && (k.chi_be - 0.439_299_707_656_876_3).abs() < 1e-9,
        format!("K = {:.1} b/s, chi_BE = {:.12}", k.key_rate_bps, k.chi_be),
    ));

    let ideal = secret_key_rate(&SecurityParams {
        transmittance: 1.0,
        excess_noise: 0.0,
        eta: 1.0,
        v_ele: 0.0,
        ..SecurityParams::default()
    })?;
    let worst = ideal.spectrum.lambda.iter().map(|l| (l - 1.0).abs()).fold(0.0, f64::max);
    out.push(check(
        "ideal channel leaks nothing",
        ideal.chi_be.abs() < 1e-9 && worst < 1e-9,
        format!("chi_BE = {:e}, max |lambda - 1| = {worst:e}", ideal.chi_be),
    ));

    let b46 = ber_from_q(4.6);
    let b96 = ber_from_q(9.6);
    out.push(check(
        "BER from Q",
        (1.9e-6..=2.3e-6).contains(&b46) && (1e-22..=1e-21).contains(&b96),
        format!("BER(4.6) = {b46:e}, BER(9.6) = {b96:e}"),
    ));

    let mut worst_phase: f64 = 0.0;
    let mut worst_delta: f64 = 0.0;
    for i in 0..360 {
        let theta = i as f64 * TAU / 360.0;
        let sets = noiseless_sets(13.0, theta);
        let offsets: Vec<f64> = sets.iter().map(|s| s.default_offset()).collect();
        worst_phase = worst_phase.max(wrap_angle(estimate_packet_phase(&sets, &offsets)? - theta).abs());
    }
    for delta in [1.0, 13.0, 100.0] {
        worst_delta = worst_delta.max((estimate_displacement(&noiseless_sets(delta, 0.3))? - delta).abs());
    }
    out.push(check(
        "pilot estimators exact on noiseless pilots",
        worst_phase <= 1e-12 && worst_delta <= 1e-12,
        format!("phase error {worst_phase:e} rad, displacement error {worst_delta:e}"),
    ));

    let cfg = ExperimentConfig::default();
    out.push(check(
        "classical data rate",
        cfg.data_rate_bps() == 1.22e6,
        format!("{} b/s", cfg.data_rate_bps()),
    ));

    let mut small = ExperimentConfig {
        n_packets: packets,
        ..ExperimentConfig::default()
    };
    let a = run_experiment(&small)?;
    small.workers = 1;
    let b = run_experiment(&small)?;
    let same = to_canonical_json(&a)? == to_canonical_json(&b)?;
    out.push(check(
        "deterministic report",
        same,
        format!("{} packets, byte-identical: {same}", packets),
    ));
    out.push(check(
        "BPSK link at defaults",
        (9.8..=11.8).contains(&a.link.q_factor) && a.link.ber_empirical.errors == 0,
        format!("Q = {:.3}, bit errors = {}", a.link.q_factor, a.link.ber_empirical.errors),
    ));
    out.push(check(
        "channel estimate at defaults",
        (a.security.t_hat - 0.28).abs() < 0.03,
        format!("T = {:.4}, xi = {:.4}", a.security.t_hat, a.security.xi_hat),
    ));

    let mut clean = ExperimentConfig {
        n_packets: packets,
        ..ExperimentConfig::default()
    };
    clean.channel.phase_step_std = 0.0;
    clean.channel.excess_noise = 0.0;
    clean.channel.transmittance = 1.0;
    clean.receiver.eta = 1.0;
    clean.receiver.v_ele = 0.0;
    let c = run_experiment(&clean)?;
    out.push(check(
        "noiseless link",
        c.link.ber_empirical.errors == 0,
        format!("bit errors = {}, xi = {:.4}", c.link.ber_empirical.errors, c.security.xi_hat),
    ));
    Ok(out)
}
