//! Shared formatting for result files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::config::ConfigError;

pub const VERSION: &str = concat!("twopoint ", env!("CARGO_PKG_VERSION"));

/// Shortest round-trip decimal, or an empty field.
pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => String::new(),
    }
}

pub fn join(v: &[f64], sep: &str) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(sep)
}

/// Trailing `#` lines: version, seed and the resolved configuration in
/// re-runnable `key = value` form.
pub fn metadata_lines(s: &mut String, seed: u64, config: &BTreeMap<String, String>) {
    let _ = writeln!(s, "# version: {VERSION}");
    let _ = writeln!(s, "# seed: {seed}");
    for (k, v) in config {
        let _ = writeln!(s, "# config: {k} = {v}");
    }
}

/// Writes to `out`, or stdout when unset.
pub fn emit(out: Option<&Path>, text: &str) -> Result<(), ConfigError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| ConfigError::new("out", format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| ConfigError::new("out", format!("stdout: {e}")))
        }
    }
}
