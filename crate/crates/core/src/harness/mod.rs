//! Experiment orchestration: configuration, seeding, commands and artifacts.

pub mod commands;
pub mod config;
pub mod output;
pub mod seeds;

pub use commands::{
    cmd_coupling, cmd_fried, cmd_gen_screens, cmd_qkd, cmd_tomography, cmd_zernike_stats, run_coupling, run_fried,
    run_qkd, run_tomography, run_zernike_stats, Condition, CouplingSummary, FriedResult, QkdSweep, TomographyResult,
    ZernikeStats,
};
pub use config::RunConfig;
pub use seeds::{derive_seed, Stream};
