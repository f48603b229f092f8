//! Atomic file output, run manifests, and console tables.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use idim_core::io::fmt_sig;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Digits shown in console tables.
pub const CONSOLE_DIGITS: usize = 7;

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Serialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

/// Provenance of one invocation. Written next to the outputs it describes.
#[derive(Debug, Serialize)]
pub struct RunManifest<F: Serialize> {
    pub subcommand: &'static str,
    pub argv: Vec<String>,
    pub flags: F,
    pub inputs: Vec<InputHash>,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub rng: &'static str,
    pub elapsed_secs: f64,
    pub outputs: Vec<String>,
}

impl<F: Serialize> RunManifest<F> {
    pub fn new(subcommand: &'static str, flags: F) -> Self {
        Self {
            subcommand,
            argv: std::env::args().collect(),
            flags,
            inputs: Vec::new(),
            seed: None,
            version: env!("CARGO_PKG_VERSION"),
            rng: idim_core::hidalgo::RNG_NAME,
            elapsed_secs: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

/// Right-aligned pipe table in the style of `knitr::kable`: every column is
/// one character wider than its longest cell.
pub fn kable(headers: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = headers
        .iter()
        .enumerate()
        .map(|(j, h)| {
            rows.iter()
                .map(|r| r[j].len())
                .chain(std::iter::once(h.len()))
                .max()
                .unwrap_or(0)
                + 1
        })
        .collect();
    let line = |cells: &[String]| -> String {
        let mut s = String::new();
        for (c, w) in cells.iter().zip(&widths) {
            s.push_str(&format!("|{c:>w$}", w = w));
        }
        s.push_str("|\n");
        s
    };
    let mut out = line(headers);
    for w in &widths {
        out.push('|');
        out.push_str(&"-".repeat(w.saturating_sub(1)));
        out.push(':');
    }
    out.push_str("|\n");
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

pub fn num(x: f64) -> String {
    fmt_sig(x, CONSOLE_DIGITS)
}

/// Percentage as printed in report headers, e.g. `0.1%`.
pub fn percent(c: f64) -> String {
    format!("{}%", fmt_sig(c * 100.0, CONSOLE_DIGITS))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kable_layout() {
        let t = kable(
            &["Lower Bound".into(), "Estimate".into(), "Upper Bound".into()],
            &[vec![num(1.986659), num(1.999682), num(2.012705)]],
        );
        let want = "\
| Lower Bound| Estimate| Upper Bound|
|-----------:|--------:|-----------:|
|    1.986659| 1.999682|    2.012705|
";
        assert_eq!(t, want);
    }

    #[test]
    fn percent_labels() {
        assert_eq!(percent(0.001), "0.1%");
        assert_eq!(percent(0.01), "1%");
        assert_eq!(percent(0.0), "0%");
    }
}
