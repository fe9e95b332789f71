use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qcs_radar::ambiguity::{ambiguity_report, AmbiguityParams};
use qcs_radar::cli_io::{
    generate_capture, parse_config, read_capture, recover_capture, write_capture, write_results,
    CaptureSpec,
};
use qcs_radar::evaluation::run_grid_with;
use qcs_radar::{Algorithm, BitDepth, RadarParams, RecoveryConfig, Result};

#[derive(Parser)]
#[command(
    name = "qcs",
    version,
    about = "Dithered quantized compressive sensing for FMCW range profiles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo grid and write aggregated results as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build an ambiguous scene pair and report whether 1-bit sensing separates it.
    Ambiguity {
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        n0: usize,
        #[arg(long, default_value_t = 10)]
        n1: usize,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4, allow_negative_numbers = true)]
        psi0: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        psi1: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 1024)]
        meas: usize,
        #[arg(long, default_value_t = 200)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimate the range profile held in a capture file.
    Recover {
        #[arg(long)]
        capture: PathBuf,
        #[arg(long, default_value_t = Algorithm::Qiht)]
        algo: Algorithm,
        #[arg(long)]
        sparsity: usize,
        #[arg(long, default_value_t = RecoveryConfig::DEFAULT_STEP)]
        mu: f64,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long, default_value_t = RecoveryConfig::DEFAULT_TARGET)]
        target: f64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize a capture of a random sparse scene.
    GenCapture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = BitDepth::Bits(1))]
        bits: BitDepth,
        #[arg(long, default_value_t = 8192)]
        meas: usize,
        #[arg(long)]
        no_dither: bool,
        /// Store dither values instead of the dither seed.
        #[arg(long)]
        record_dither: bool,
        /// Store the sampled frequency indices instead of the plan seed.
        #[arg(long)]
        inline_omega: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            trials,
            seed,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let results = run_grid_with(&cfg, |r| {
                log::info!(
                    "{} K={} b={} M={} dithered={}: TPR {:.2}% ± {:.2}",
                    r.point.algorithm,
                    r.point.sparsity,
                    r.point.bit_depth,
                    r.point.n_meas,
                    r.point.dithered,
                    r.mean_tpr,
                    r.stderr
                )
            })?;
            write_results(&results, &out)
        }
        Command::Ambiguity {
            n,
            n0,
            n1,
            psi0,
            psi1,
            gamma,
            meas,
            seeds,
            seed,
        } => {
            let report = ambiguity_report(&AmbiguityParams {
                n_bins: n,
                n0,
                n1,
                psi0,
                psi1,
                gamma,
                n_meas: meas,
                n_seeds: seeds,
                seed,
            })?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Recover {
            capture,
            algo,
            sparsity,
            mu,
            max_iters,
            target,
            out,
        } => {
            let capture = read_capture(&capture)?;
            let rc = RecoveryConfig {
                sparsity,
                step_size: mu,
                max_iters: max_iters.unwrap_or_else(|| RecoveryConfig::default_budget(sparsity)),
                consistency_target: target,
            };
            let report = recover_capture(&capture, algo, &rc)?;
            let text = serde_json::to_string_pretty(&report)?;
            match out {
                Some(path) => {
                    std::fs::write(&path, text + "\n").map_err(|e| qcs_radar::Error::Io {
                        path: path.clone(),
                        source: e,
                    })
                }
                None => {
                    println!("{text}");
                    Ok(())
                }
            }
        }
        Command::GenCapture {
            out,
            n,
            k,
            bits,
            meas,
            no_dither,
            record_dither,
            inline_omega,
            seed,
        } => {
            let spec = CaptureSpec {
                radar: RadarParams {
                    n_bins: n,
                    ..RadarParams::default()
                },
                sparsity: k,
                bit_depth: bits,
                n_meas: meas,
                dithered: !no_dither && bits.is_quantized(),
                record_dither_values: record_dither,
                inline_omega,
                seed,
            };
            let (capture, _) = generate_capture(&spec)?;
            write_capture(&out, &capture)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
