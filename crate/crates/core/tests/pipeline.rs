use cvqkd_core::config::ExperimentConfig;
use cvqkd_core::experiment::{run_experiment, run_experiment_with_sink, sweep, MemorySink};
use cvqkd_core::report::{emit_report, report_from_json, to_canonical_json, CsvTraceSink, Format};
use cvqkd_core::security::max_tolerable_excess_noise;
use cvqkd_core::stats::Moments;
use cvqkd_core::PskOrder;

fn cfg(packets: u64) -> ExperimentConfig {
    ExperimentConfig {
        n_packets: packets,
        ..ExperimentConfig::default()
    }
}

#[test]
fn same_seed_same_bytes() {
    let c = cfg(400);
    let a = to_canonical_json(&run_experiment(&c).unwrap()).unwrap();
    let b = to_canonical_json(&run_experiment(&c).unwrap()).unwrap();
    assert_eq!(a, b);
    let mut other = c.clone();
    other.seed = 2;
    assert_ne!(a, to_canonical_json(&run_experiment(&other).unwrap()).unwrap());
}

#[test]
fn json_round_trip() {
    let mut r = run_experiment(&cfg(300)).unwrap();
    r.wall_clock_s = 0.0;
    let dir = tempfile::tempdir().unwrap();
    let path = emit_report(&r, dir.path(), Format::Json).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(report_from_json(&text).unwrap(), r);
}

#[test]
fn csv_summary_written() {
    let r = run_experiment(&cfg(100)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = emit_report(&r, dir.path(), Format::Csv).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("key,value\n"));
    assert!(text.lines().any(|l| l.starts_with("security.key_rate_bps,")));
}

#[test]
fn trace_files_have_one_row_per_pulse() {
    let c = cfg(12);
    let dir = tempfile::tempdir().unwrap();
    let mut sink = CsvTraceSink::create(dir.path()).unwrap();
    let r = run_experiment_with_sink(&c, Some(&mut sink)).unwrap();
    drop(sink);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "pulse_index,packet_index,role,tx_x,tx_p,rx_x_mv,rx_p_mv,theta_true,theta_hat,symbol_tx,symbol_rx"
    );
    assert_eq!(lines.count() as u64, r.counts.pulses);
    let scatter = std::fs::read_to_string(dir.path().join("scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count() as u64 - 1, r.counts.data_slots);
}

#[test]
fn bpsk_scatter_clusters_are_two_delta_apart() {
    let c = cfg(200);
    let mut sink = MemorySink::default();
    run_experiment_with_sink(&c, Some(&mut sink)).unwrap();
    let mut m = [Moments::default(), Moments::default()];
    for row in &sink.scatter {
        m[row.symbol_tx as usize].push(row.x);
    }
    let sep = m[0].mean - m[1].mean;
    assert!((sep - 26.0).abs() < 0.3, "separation {sep}");
}

#[test]
fn noiseless_link() {
    let mut c = cfg(41_000);
    c.channel.phase_step_std = 0.0;
    c.channel.excess_noise = 0.0;
    c.channel.transmittance = 1.0;
    c.receiver.eta = 1.0;
    c.receiver.v_ele = 0.0;
    let r = run_experiment(&c).unwrap();
    assert!(r.link.ber_empirical.trials >= 1_000_000);
    assert_eq!(r.link.ber_empirical.errors, 0);
    assert!(r.security.xi_hat.abs() < 0.005, "xi {}", r.security.xi_hat);
}

#[test]
fn estimates_at_a_million_data_slots() {
    // ±0.01 on T and ξ. At 10⁶ data slots ξ̂ has sd ≈ 0.02 (shot-noise
    // calibration and V_B each add ~0.015), so this runs 2.4·10⁷.
    let r = run_experiment(&cfg(100_000)).unwrap();
    assert!(r.counts.data_slots >= 1_000_000);
    assert!((r.security.t_hat - 0.28).abs() < 0.01, "T {}", r.security.t_hat);
    assert!((r.security.xi_hat - 0.055).abs() < 0.01, "xi {}", r.security.xi_hat);
}

#[test]
fn modulation_sweep_orders_q() {
    let vals: Vec<String> = ["bpsk", "qpsk", "8psk"].iter().map(|s| s.to_string()).collect();
    let rows = sweep(&cfg(2000), "modulation", &vals).unwrap();
    assert!(rows[2].q_factor < rows[1].q_factor && rows[1].q_factor < rows[0].q_factor);
    let ratio = rows[2].q_factor / rows[0].q_factor;
    assert!((0.33..=0.45).contains(&ratio), "{ratio}");
}

#[test]
fn excess_noise_sweep_crosses_zero_where_bisection_says() {
    let vals: Vec<String> = ["0", "0.05", "0.1", "0.2"].iter().map(|s| s.to_string()).collect();
    let rows = sweep(&cfg(40_000), "excess_noise", &vals).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].key_rate_per_pulse < w[0].key_rate_per_pulse);
        assert!(w[1].key_rate_bps <= w[0].key_rate_bps);
    }
    assert_eq!(rows[3].key_rate_bps, 0.0);
    let xi_max = max_tolerable_excess_noise(&ExperimentConfig::default().security_params()).unwrap();
    let i = rows.iter().position(|r| r.key_rate_per_pulse <= 0.0).unwrap();
    let (a, b) = (&rows[i - 1], &rows[i]);
    let (xa, xb): (f64, f64) = (a.value.parse().unwrap(), b.value.parse().unwrap());
    let crossing = xa + (xb - xa) * a.key_rate_per_pulse / (a.key_rate_per_pulse - b.key_rate_per_pulse);
    assert!((crossing - xi_max).abs() <= 0.05, "sweep crossing {crossing}, bisection {xi_max}");
}

#[test]
fn qpsk_and_8psk_rates() {
    for (psk, bps) in [(PskOrder::Qpsk, 2.44e6), (PskOrder::Psk8, 3.66e6)] {
        let mut c = cfg(50);
        c.modulation.psk = psk;
        assert_eq!(run_experiment(&c).unwrap().link.data_rate_bps, bps);
    }
}

#[test]
fn displacement_free_run_matches_channel_estimates() {
    let mut a = cfg(20_000);
    let r1 = run_experiment(&a).unwrap();
    a.displacement_enabled = false;
    let r0 = run_experiment(&a).unwrap();
    assert!((r1.security.t_hat - r0.security.t_hat).abs() < 0.002);
    assert!((r1.security.xi_hat - r0.security.xi_hat).abs() < 0.01);
    // without displacement the PSK decisions are noise
    assert!(r0.link.ber_empirical.ber > 0.3);
}
