use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hdqrng::config::RunConfig;
use hdqrng::pipeline::{self, EXIT_ABORT, EXIT_FAILURE, EXIT_IO, EXIT_OK};
use hdqrng::protocol::Verdict;
use hdqrng::Result;

#[derive(Parser)]
#[command(name = "hdqrng", version, about = "Entropy-monitored QRNG pipeline on simulated time-energy entanglement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML run configuration; built-in laboratory defaults when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set protocol.v0=0.99`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; defaults to the config's output_dir.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let mut cfg = base.with_overrides(&self.overrides)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.to_string_lossy().into_owned();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate detector time tags and Franson fringe scans.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Re-estimate the visibility over this many scans instead of before/after.
        #[arg(long, value_name = "SLICES")]
        continuous_monitor: Option<u32>,
    },
    /// Estimate V, frame symbols and write the entropy certificate.
    Certify {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        fringe: PathBuf,
    },
    /// Hash certified symbols into output bits.
    Extract {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        symbols: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long)]
        seed: PathBuf,
    },
    /// Run the statistical battery over a bit file.
    Test {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        bits: PathBuf,
        /// Fresh data for the single re-run after a marginal failure.
        #[arg(long)]
        fresh: Option<PathBuf>,
    },
    /// All stages end to end.
    Pipeline {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_name = "SLICES")]
        continuous_monitor: Option<u32>,
    },
    /// Throughput against collection time for several thresholds.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Durations in seconds; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        durations: Option<Vec<f64>>,
        /// Visibility thresholds; defaults to the config's list.
        #[arg(long, value_delimiter = ',')]
        v0: Option<Vec<f64>>,
    },
    /// Write extractor seed bits from the operating system's generator.
    Seed {
        #[arg(long, short)]
        out: PathBuf,
        /// Seed length in bits; defaults to 2n - 1 for n = 4096.
        #[arg(long)]
        bits: Option<usize>,
    },
    /// Print the default configuration.
    Config,
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    PathBuf::from(&cfg.output_dir)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serialisable"));
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Succeed => EXIT_OK,
        Verdict::Abort => EXIT_ABORT,
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate { cfg, continuous_monitor } => {
            let mut cfg = cfg.load()?;
            if let Some(n) = continuous_monitor {
                cfg.franson.slices = n;
            }
            let out = out_dir(&cfg);
            let summary = pipeline::cmd_simulate(&cfg, &out)?;
            eprintln!(
                "simulated {:.3} s: {:.3} Mcps signal, digest {}",
                summary.duration_s,
                summary.signal_rate / 1e6,
                summary.config_digest
            );
            if summary.saturated {
                eprintln!("warning: a signal detector exceeds its maximum count rate");
            }
            print_json(&summary);
            Ok(EXIT_OK)
        }
        Command::Certify { cfg, signal, fringe } => {
            let cfg = cfg.load()?;
            let doc = pipeline::cmd_certify(&cfg, &signal, &fringe, &out_dir(&cfg))?;
            eprintln!(
                "V = {:.4} (threshold {}), {:.3} bits/sample, verdict {}",
                doc.certificate.v_obs, doc.certificate.v0, doc.certificate.bits_per_sample_corrected, doc.verdict
            );
            print_json(&doc);
            Ok(verdict_code(doc.verdict))
        }
        Command::Extract {
            cfg,
            symbols,
            certificate,
            seed,
        } => {
            let cfg = cfg.load()?;
            let meta = pipeline::cmd_extract(&cfg, &symbols, &certificate, &seed, &out_dir(&cfg))?;
            eprintln!("extracted {} bits with a {}x{} Toeplitz plan", meta.bits, meta.plan.m, meta.plan.n);
            print_json(&meta);
            Ok(EXIT_OK)
        }
        Command::Test { cfg, bits, fresh } => {
            let cfg = cfg.load()?;
            let outcome = pipeline::cmd_test(&cfg, &bits, fresh.as_deref(), &out_dir(&cfg))?;
            print!("{}", outcome.first.table());
            if let Some(r) = &outcome.rerun {
                println!("re-run on fresh data:");
                print!("{}", r.table());
            }
            Ok(if outcome.success { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Pipeline { cfg, continuous_monitor } => {
            let mut cfg = cfg.load()?;
            if let Some(n) = continuous_monitor {
                cfg.franson.slices = n;
            }
            let outcome = pipeline::cmd_pipeline(&cfg)?;
            let c = &outcome.certificate;
            eprintln!(
                "V = {:.4}, {:.3} bits/sample, verdict {}",
                c.certificate.v_obs, c.certificate.bits_per_sample_corrected, c.verdict
            );
            if let Some(m) = &outcome.extracted {
                eprintln!("extracted {} bits", m.bits);
            }
            if let Some(b) = &outcome.battery {
                eprint!("{}", b.first.table());
                if let Some(r) = &b.rerun {
                    eprintln!("re-run on fresh data:");
                    eprint!("{}", r.table());
                }
            }
            eprintln!("artifacts in {}", cfg.output_dir);
            Ok(outcome.exit_code)
        }
        Command::Sweep { cfg, durations, v0 } => {
            let cfg = cfg.load()?;
            let durations = durations.unwrap_or_else(|| cfg.sweep.durations.clone());
            let v0 = v0.unwrap_or_else(|| cfg.sweep.v0.clone());
            let table = pipeline::cmd_sweep(&cfg, &durations, &v0)?;
            let path = pipeline::write_sweep(&table, &out_dir(&cfg))?;
            eprintln!("symbol rate {:.4e}/s; table in {}", table.symbol_rate, path.display());
            print!("{}", table.to_csv());
            Ok(EXIT_OK)
        }
        Command::Seed { out, bits } => {
            let bits = bits.unwrap_or_else(|| pipeline::seed_bits_for(4096));
            pipeline::write_seed(&out, bits, &mut rand::rngs::OsRng)?;
            eprintln!("wrote {bits} seed bits to {}", out.display());
            Ok(EXIT_OK)
        }
        Command::Config => {
            print!("{}", RunConfig::default().to_toml_string());
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_IO } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            pipeline::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
