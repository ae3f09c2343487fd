use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cvqkd_core::config::ExperimentConfig;
use cvqkd_core::experiment::{keyrate_only, run_calibration, run_experiment_with_sink, sweep, TraceSink};
use cvqkd_core::report::{emit_report, emit_sweep, to_canonical_json, CsvTraceSink, Format};
use cvqkd_core::security::max_tolerable_excess_noise;
use cvqkd_core::selftest::run_selftest;
use cvqkd_core::{Error, PskOrder, Result};

#[derive(Parser)]
#[command(name = "cvqkd", version, about = "Classical PSK on displaced CV-QKD states: simulate, sweep, key rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Config file of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Packets of 400 slots (by default)
    #[arg(long)]
    packets: Option<u64>,
    #[arg(long)]
    modulation: Option<PskOrder>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-pulse trace.csv and scatter.csv
    #[arg(long)]
    emit_traces: bool,
    #[arg(long, default_value = "json")]
    format: Format,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Override any config key, e.g. --set excess_noise=0.07
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write the report
    Run(Common),
    /// Run one experiment per value of a config key
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
    /// Analytic key rate at the configured channel, no simulation
    Keyrate(Common),
    /// Vacuum-only run: shot-noise calibration check
    Calibrate(Common),
    /// Quick invariant checks
    Selftest {
        #[arg(long, default_value_t = 200)]
        packets: u64,
    },
    /// Print the default configuration file
    Defaults,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{o}`")))?;
            cfg.set(k, v)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.packets {
            cfg.n_packets = n;
        }
        if let Some(m) = self.modulation {
            cfg.modulation.psk = m;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if self.emit_traces {
            cfg.emit_traces = true;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.resolve()?;
            let mut sink = if cfg.emit_traces {
                Some(CsvTraceSink::create(&cfg.output_dir)?)
            } else {
                None
            };
            let report = run_experiment_with_sink(&cfg, sink.as_mut().map(|s| s as &mut dyn TraceSink))?;
            let path = emit_report(&report, &cfg.output_dir, common.format)?;
            let l = &report.link;
            let s = &report.security;
            println!("report      {}", path.display());
            println!("pulses      {}", report.counts.pulses);
            println!("Q           {:.4}  (BER {:.3e}, {} errors in {} bits)", l.q_factor, l.ber_analytic, l.ber_empirical.errors, l.ber_empirical.trials);
            println!("T, xi       {:.5}, {:.5}", s.t_hat, s.xi_hat);
            println!("key rate    {:.6} bits/pulse, {:.1} b/s", s.key_rate_per_pulse, s.key_rate_bps);
            println!("data rate   {:.0} b/s", l.data_rate_bps);
            eprintln!("wall clock  {:.2} s", report.wall_clock_s);
        }
        Command::Sweep { common, param, values } => {
            let cfg = common.resolve()?;
            let rows = sweep(&cfg, &param, &values)?;
            let path = emit_sweep(&rows, &cfg.output_dir, common.format)?;
            println!("sweep       {}", path.display());
            for r in &rows {
                println!(
                    "{} = {:<8}  Q {:8.4}  xi {:8.5}  K {:10.6} bits/pulse  {:10.1} b/s",
                    r.parameter, r.value, r.q_factor, r.xi_hat, r.key_rate_per_pulse, r.key_rate_bps
                );
            }
        }
        Command::Keyrate(common) => {
            let cfg = common.resolve()?;
            let params = cfg.security_params();
            let est = keyrate_only(&params)?;
            print!("{}", to_canonical_json(&est)?);
            match max_tolerable_excess_noise(&params) {
                Ok(xi) => eprintln!("max tolerable excess noise {xi:.6}"),
                Err(e) => eprintln!("max tolerable excess noise unavailable: {e}"),
            }
        }
        Command::Calibrate(common) => {
            let cfg = common.resolve()?;
            print!("{}", to_canonical_json(&run_calibration(&cfg)?)?);
        }
        Command::Selftest { packets } => {
            let checks = run_selftest(packets)?;
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(Error::Config(format!("{failed} self-test check(s) failed")));
            }
        }
        Command::Defaults => print!("{}", ExperimentConfig::default().to_text()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
