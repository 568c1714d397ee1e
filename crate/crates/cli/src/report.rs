//! CSV emission and run manifests. Every run writes `<out>.manifest.json`
//! with the resolved configuration, seeds, and crate version, sufficient to
//! reproduce the output byte-for-byte.

use std::io::Write;
use std::path::Path;

use anyhow::Result;

pub fn write_csv(
    path: impl AsRef<Path>,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Sidecar manifest next to an output file.
pub fn write_manifest(
    out_path: impl AsRef<Path>,
    command: &str,
    resolved_config: serde_json::Value,
) -> Result<()> {
    let out_path = out_path.as_ref();
    let manifest = serde_json::json!({
        "command": command,
        "config": resolved_config,
        "version": env!("CARGO_PKG_VERSION"),
    });
    let name = match out_path.file_name() {
        Some(n) => format!("{}.manifest.json", n.to_string_lossy()),
        None => "run.manifest.json".to_string(),
    };
    let path = out_path.with_file_name(name);
    std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

pub fn fmt_pct(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{:.4}", v)
    }
}
