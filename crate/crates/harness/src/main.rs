use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sdmlab_harness::config::ExperimentConfig;
use sdmlab_harness::export;
use sdmlab_harness::pipeline::{run_experiment, run_osr_sweep, HarnessError};
use sdmlab_harness::scheme::list_schemes;

/// Simulation lab for oversampled DAC architectures.
#[derive(Parser)]
#[command(name = "sdmlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write record, metrics and spectrum.
    Run {
        /// Configuration file (`key = value` lines); defaults apply if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides `out_dir` from the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seed list (overrides `seeds` from the config).
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Sweep the oversampling ratio at a fixed analysis band and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated oversampling ratios, e.g. 32,64,128.
        #[arg(long)]
        osr: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available converter schemes.
    Schemes,
    /// Write integer replay vectors for the configured scheme.
    ExportVectors {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, HarnessError> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(ExperimentConfig::parse(&text)?)
}

fn parse_u64_list(raw: &str, what: &'static str) -> Result<Vec<u64>, HarnessError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u64>().map_err(|_| {
                sdmlab_harness::ConfigError::Invalid {
                    field: what,
                    reason: format!("`{s}` is not an unsigned integer"),
                }
                .into()
            })
        })
        .collect()
}

fn real_main() -> Result<(), HarnessError> {
    let cli = Cli::parse();

    // Optional cap on worker threads; a rebuilt-pool error just means a pool
    // already exists (e.g. under a test runner), which is fine.
    if let Ok(threads) = std::env::var("SDM_LAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }

    match cli.command {
        Command::Run { config, out, seeds } => {
            let mut cfg = load_config(&config)?;
            if let Some(raw) = seeds {
                cfg.seeds = parse_u64_list(&raw, "seeds")?;
            }
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            let record = run_experiment(&cfg)?;
            let paths = export::write_outputs(&record, &cfg.out_dir)?;
            print!("{}", record.to_text());
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Command::Sweep { config, osr, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            let osrs: Vec<u32> = parse_u64_list(&osr, "osr")?
                .into_iter()
                .map(|v| u32::try_from(v).unwrap_or(u32::MAX))
                .collect();
            let table = run_osr_sweep(&cfg, &osrs)?;
            println!("f_b = {:.6} Hz", table.f_b_hz);
            println!("{}", export::SWEEP_HEADER);
            for p in &table.points {
                println!(
                    "{},{:.6e},{:.6},{:.6},{}",
                    p.osr, p.mean_power, p.mean_db, p.std_db, p.n_seeds
                );
            }
            let path = export::write_sweep(&table, &cfg.out_dir)?;
            println!("wrote {}", path.display());
        }
        Command::Schemes => {
            for (id, summary) in list_schemes() {
                println!("{id:<16} {summary}");
            }
        }
        Command::ExportVectors { config, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            for p in export::export_golden_vectors(&cfg, &cfg.out_dir)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sdmlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
