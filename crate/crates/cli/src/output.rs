//! CSV tables, metadata files and gnuplot scripts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use moranwf::io::fmt_f64;

/// A column-oriented table written as CSV with full precision.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn from_columns(header: Vec<String>, columns: &[&[f64]]) -> Self {
        let n = columns.first().map_or(0, |c| c.len());
        let rows = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
        Self { header, rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// One curve of a plot script: columns are 1-based CSV column numbers.
pub struct Curve {
    pub x: usize,
    pub y: usize,
    pub title: String,
    /// Half-width column for error bars.
    pub err: Option<usize>,
}

pub struct Plot {
    pub xlabel: String,
    pub ylabel: String,
    pub curves: Vec<Curve>,
}

/// Collects the files written by one command, then writes their metadata.
pub struct Outputs {
    dir: PathBuf,
    prefix: String,
    digests: BTreeMap<String, String>,
}

impl Outputs {
    pub fn new(dir: &Path, prefix: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), prefix: prefix.to_string(), digests: BTreeMap::new() })
    }

    pub fn file_name(&self, suffix: &str) -> String {
        format!("{}_{suffix}", self.prefix)
    }

    /// Write `<prefix>_<suffix>.csv` and, when given, a gnuplot script next to it.
    pub fn table(&mut self, suffix: &str, table: &Table, plot: Option<Plot>) -> Result<PathBuf> {
        let csv_name = self.file_name(&format!("{suffix}.csv"));
        let path = self.write(&csv_name, &table.to_csv())?;
        if let Some(plot) = plot {
            let script = gnuplot_script(&csv_name, &self.file_name(&format!("{suffix}.png")), &plot);
            self.write(&self.file_name(&format!("{suffix}.gp")), &script)?;
        }
        Ok(path)
    }

    pub fn text(&mut self, name_suffix: &str, content: &str) -> Result<PathBuf> {
        let name = self.file_name(name_suffix);
        self.write(&name, content)
    }

    fn write(&mut self, name: &str, content: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        self.digests.insert(name.to_string(), sha256_hex(content.as_bytes()));
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    /// `<prefix>_<command>.meta.toml`: config echo, seed, digests of every file
    /// written so far, command-specific values, and a timestamp.
    pub fn metadata(&mut self, command: &str, config: &RunConfig, extra: BTreeMap<String, toml::Value>) -> Result<PathBuf> {
        let meta = Metadata {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            seed: config.simulation.as_ref().map(|s| s.seed),
            digests: self.digests.clone(),
            results: extra,
            config: config.clone(),
        };
        let text = toml::to_string(&meta)?;
        let name = self.file_name(&format!("{command}.meta.toml"));
        let path = self.dir.join(&name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[derive(Serialize)]
struct Metadata {
    command: String,
    version: String,
    created_unix: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    digests: BTreeMap<String, String>,
    results: BTreeMap<String, toml::Value>,
    config: RunConfig,
}

/// Parse the `config` table back out of a metadata file.
#[cfg(test)]
pub fn config_from_metadata(text: &str) -> Result<RunConfig> {
    let value: toml::Table = toml::from_str(text)?;
    let cfg = value.get("config").context("metadata has no [config] table")?.clone();
    Ok(cfg.try_into()?)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(7 + 64);
    out.push_str("sha256:");
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn gnuplot_script(csv: &str, png: &str, plot: &Plot) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 900,600\n");
    s.push_str(&format!("set output '{png}'\n"));
    s.push_str(&format!("set xlabel '{}'\n", plot.xlabel));
    s.push_str(&format!("set ylabel '{}'\n", plot.ylabel));
    s.push_str("set key outside right\n");
    let parts: Vec<String> = plot
        .curves
        .iter()
        .map(|c| match c.err {
            Some(e) => format!("'{csv}' every ::1 using {}:{}:{} with yerrorbars title '{}'", c.x, c.y, e, c.title),
            None => format!("'{csv}' every ::1 using {}:{} with lines lw 2 title '{}'", c.x, c.y, c.title),
        })
        .collect();
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    s
}
