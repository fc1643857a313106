//! `turbqkd` — run the simulator's experiments from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use turbqkd_core::harness::{self, RunConfig};
use turbqkd_core::Error;

#[derive(Parser, Debug)]
#[command(name = "turbqkd", version, about = "OAM QKD through turbulence with adaptive optics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML run configuration; omitted keys take their defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Independent trials (realizations) per point.
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Gaussian fiber-coupling time series, AO switched on part way.
    Coupling(Common),
    /// MUB process tomography with and without turbulence and correction.
    Tomography(Common),
    /// Crosstalk, QDER and key-rate sweep over dimensions and bases.
    Qkd(Common),
    /// Zernike coefficient statistics and a turbulence-strength sweep.
    ZernikeStats(Common),
    /// Fried parameter from simulated beam wander.
    Fried(Common),
    /// Write Kolmogorov phase screens as binary containers.
    GenScreens(Common),
    /// Print the effective configuration (defaults merged with --config) as TOML.
    ShowConfig(Common),
}

fn exit_code(err: &Error) -> u8 {
    match err.category() {
        "validation" => 2,
        "io" => 3,
        _ => 4,
    }
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Error> {
    let (common, name) = match &cli.command {
        Command::Coupling(c) => (c, "coupling"),
        Command::Tomography(c) => (c, "tomography"),
        Command::Qkd(c) => (c, "qkd"),
        Command::ZernikeStats(c) => (c, "zernike-stats"),
        Command::Fried(c) => (c, "fried"),
        Command::GenScreens(c) => (c, "gen-screens"),
        Command::ShowConfig(c) => (c, "show-config"),
    };
    let cfg = load(common)?;
    if let Command::ShowConfig(_) = cli.command {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    info!("{name}: seed {} config {} -> {}", cfg.seed, cfg.hash()?, cfg.out_dir.display());
    pool.install(|| -> Result<(), Error> {
        match cli.command {
            Command::Coupling(_) => {
                let s = harness::cmd_coupling(&cfg)?;
                println!("coupling AO off {:.4} ± {:.4}", s.mean_off.mean, s.mean_off.stderr);
                println!("coupling AO on  {:.4} ± {:.4}", s.mean_on.mean, s.mean_on.stderr);
            }
            Command::Tomography(_) => {
                for r in harness::cmd_tomography(&cfg)? {
                    println!("d={} {:<20} F = {:.4}", r.dimension, r.condition.label(), r.fidelity.mean);
                }
            }
            Command::Qkd(_) => {
                let s = harness::cmd_qkd(&cfg)?;
                for r in &s.rows {
                    println!(
                        "d={:<2} {:<7} QDER off {:.4} ± {:.4}  on {:.4} ± {:.4}  boundary {:.4}",
                        r.dimension, r.basis, r.off.mean, r.off.stderr, r.on.mean, r.on.stderr, r.threshold
                    );
                }
            }
            Command::ZernikeStats(_) => {
                let s = harness::cmd_zernike_stats(&cfg)?;
                for z in &s.recovery {
                    println!("j={:<2} {:<24} sigma in {:.4} est {:.4}", z.index, z.name, z.sigma_in, z.sigma_est);
                }
            }
            Command::Fried(_) => {
                let f = harness::cmd_fried(&cfg)?;
                println!(
                    "r0 configured {:.4e} m, estimated {:.4e} m; D/r0 = {:.3}",
                    f.r0_configured, f.r0_estimated, f.d_over_r0_estimated
                );
            }
            Command::GenScreens(_) => {
                let s = harness::cmd_gen_screens(&cfg)?;
                println!("wrote {} screens to {}", s.len(), cfg.out_dir.display());
            }
            Command::ShowConfig(_) => unreachable!("handled above"),
        }
        Ok(())
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}
