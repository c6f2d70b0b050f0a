use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::experiment::{Evaluation, SweepTable};
use crate::error::Result;
use crate::rl::EpisodeStats;

/// Version of the CSV column layouts below.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Writes via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn num(x: f64) -> String {
    format!("{x:.9}")
}

/// `cycle, uav_id, mode, sensing, frames_encoded, valid`.
pub fn cycles_csv(eval: &Evaluation) -> Result<Vec<u8>> {
    csv_bytes(
        &["cycle", "uav_id", "mode", "sensing", "frames_encoded", "valid"],
        eval.reports.iter().map(|r| {
            vec![
                r.cycle.to_string(),
                r.uav_id.to_string(),
                r.mode.map_or_else(|| "none".to_string(), |m| m.to_string()),
                u8::from(r.sensed).to_string(),
                r.frames_encoded(),
                u8::from(r.valid).to_string(),
            ]
        }),
    )
}

/// `episode, agent_0 .. agent_{n-1}, total, mean_valid`.
pub fn utility_csv(episodes: &[EpisodeStats]) -> Result<Vec<u8>> {
    let agents = episodes.first().map_or(0, |e| e.per_agent.len());
    let mut header: Vec<String> = vec!["episode".into()];
    header.extend((0..agents).map(|k| format!("agent_{k}")));
    header.extend(["total".into(), "mean_valid".into()]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_bytes(
        &header,
        episodes.iter().map(|e| {
            let mut row = vec![e.episode.to_string()];
            row.extend(e.per_agent.iter().map(|&u| num(u)));
            row.push(num(e.total));
            row.push(num(e.mean_valid));
            row
        }),
    )
}

/// `subchannels, framework, mean_valid, std_error, mean_realized_valid, seeds`.
pub fn sweep_csv(table: &SweepTable) -> Result<Vec<u8>> {
    csv_bytes(
        &["subchannels", "framework", "mean_valid", "std_error", "mean_realized_valid", "seeds"],
        table.points.iter().map(|p| {
            vec![
                p.subchannels.to_string(),
                p.framework.to_string(),
                num(p.mean_valid),
                num(p.std_error),
                num(p.mean_realized_valid),
                p.seeds.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub csv_schema_version: u32,
    pub files: Vec<FileEntry>,
}

/// Collects output files and writes them with a manifest.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// Writes every file, then `manifest.json`. Returns the manifest.
    pub fn finish(self, command: &str, config_sha256: &str, seed: Option<u64>) -> Result<Manifest> {
        let mut entries = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            write_atomic(&self.dir.join(name), bytes)?;
            entries.push(FileEntry {
                name: name.clone(),
                sha256: hex::encode(Sha256::digest(bytes)),
            });
        }
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_sha256: config_sha256.to_string(),
            seed,
            csv_schema_version: CSV_SCHEMA_VERSION,
            files: entries,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        write_atomic(&self.dir.join("manifest.json"), &bytes)?;
        Ok(manifest)
    }
}
