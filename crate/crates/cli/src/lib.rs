//! Configuration loading and experiment dispatch behind the `weakkam`
//! binary.

pub mod config;
pub mod run;

pub use config::{
    load_config, load_config_for, parse_config, Command, ConfigError, ExperimentConfig,
};
pub use run::{run, RunOutcome, Status};

/// Caps the rayon pool at `WEAKKAM_THREADS` when set. Returns an error
/// message for unparsable values.
pub fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("WEAKKAM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("WEAKKAM_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}
