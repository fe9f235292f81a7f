//! CSV writing.
//!
//! Every file starts with a comment line recording the tool version,
//! the config hash, and the seed, followed by a header row. Numbers
//! are written in Rust's shortest round-trip decimal form, so equal
//! computations give byte-identical files.

use std::path::Path;

use anyhow::{Context, Result};

pub fn comment_line(config_hash: &str, seed: u64) -> String {
    format!(
        "# tool_version={} config_hash={config_hash} seed={seed}",
        env!("CARGO_PKG_VERSION")
    )
}

/// Write `lines` (newline-terminated) to `dir/name`, creating the
/// directory if needed.
pub fn write_csv(dir: &Path, name: &str, lines: &[String]) -> Result<std::path::PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let path = dir.join(name);
    let mut body = lines.join("\n");
    body.push('\n');
    std::fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}
