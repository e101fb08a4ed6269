//! File formats, configuration and command implementations for the `refkrig`
//! command line tool. The numerics live in `refkrig-core`.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod manifest;

pub use commands::{execute, Artifact, Invocation, Outcome, PredictMethod};
pub use error::{CliError, Result};
pub use manifest::{CommandSpec, Input, Overrides, RunManifest, ScaleFlag};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `dir/name.ext` with `suffix` in place of `.ext`.
pub fn sibling(primary: &std::path::Path, suffix: &str) -> std::path::PathBuf {
    if suffix.is_empty() {
        return primary.to_path_buf();
    }
    let stem = primary.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    primary.with_file_name(format!("{stem}{suffix}"))
}
