use std::path::Path;

use serde::Serialize;

use lsdist_core::numfmt::to_canonical_json;

use crate::CliError;

#[derive(Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

#[derive(Serialize)]
struct Envelope<'a, C, R> {
    tool: Tool,
    command: &'a str,
    config: &'a C,
    result: &'a R,
    warnings: &'a [String],
}

/// Canonical JSON document with tool version, resolved config and result.
pub fn envelope<C: Serialize, R: Serialize>(command: &str, config: &C, result: &R, warnings: &[String]) -> Result<String, CliError> {
    let doc = Envelope {
        tool: Tool {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        command,
        config,
        result,
        warnings,
    };
    to_canonical_json(&doc).map_err(|e| CliError::numerical(format!("serialization failed: {e}")))
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::validation(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}
