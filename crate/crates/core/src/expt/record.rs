//! Per-run files.
//!
//! A run directory holds `record.json` (metadata), `episodes.csv`,
//! `adaptation.csv` (per episode and muscle: ceiling, force, mean activation,
//! peak strain), `metrics.csv` (per update) and `checkpoint.json`. Every CSV
//! starts with a `# latticeworm-<kind> v1` comment line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::env::{EpisodeRow, MuscleEpisodeRow};
use crate::error::{Error, Result};

pub const RECORD_FORMAT: &str = "latticeworm-record v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub format: String,
    pub run_id: String,
    pub seed: u64,
    pub target_index: usize,
    pub adaptation: bool,
    pub config_hash: String,
    pub n_columns: usize,
    pub n_levels: usize,
    pub lambda_0: f64,
    pub episodes: usize,
    pub wall_clock_seconds: f64,
    pub finished_unix: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub episodes: Vec<EpisodeRow>,
    pub muscles: Vec<MuscleEpisodeRow>,
}

impl RunRecord {
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.episodes.iter().enumerate() {
            if row.episode != i {
                return Err(Error::invalid(format!(
                    "run {}: episode indices not contiguous at row {i}",
                    self.meta.run_id
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(Error::at(dir))?;
        write_csv(&dir.join("episodes.csv"), "episodes", &self.episodes)?;
        write_csv(&dir.join("adaptation.csv"), "adaptation", &self.muscles)?;
        let tmp = dir.join("record.json.tmp");
        std::fs::write(&tmp, serde_json::to_vec_pretty(&self.meta)?).map_err(Error::at(&tmp))?;
        std::fs::rename(&tmp, dir.join("record.json")).map_err(Error::at(dir.join("record.json")))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("record.json");
        let meta: RunMeta = serde_json::from_slice(&std::fs::read(&path).map_err(Error::at(&path))?)?;
        if meta.format != RECORD_FORMAT {
            return Err(Error::invalid(format!("{}: unknown record format {:?}", path.display(), meta.format)));
        }
        let record = Self {
            meta,
            episodes: read_csv(&dir.join("episodes.csv"))?,
            muscles: read_csv(&dir.join("adaptation.csv"))?,
        };
        record.validate()?;
        Ok(record)
    }
}

/// Writes `rows` under a `# latticeworm-<kind> v1` header comment.
pub fn write_csv<T: Serialize>(path: &Path, kind: &str, rows: &[T]) -> Result<()> {
    write_csv_with_notes(path, kind, &[], rows)
}

/// Like [`write_csv`], with each note on its own `# note:` comment line.
pub fn write_csv_with_notes<T: Serialize>(path: &Path, kind: &str, notes: &[String], rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(Error::at(path))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# latticeworm-{kind} v1").map_err(Error::at(path))?;
    for note in notes {
        writeln!(out, "# note: {note}").map_err(Error::at(path))?;
    }
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(Error::at(path))?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(Error::at(path))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
