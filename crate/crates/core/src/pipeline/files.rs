use crate::synthcohort::CohortFiles;
use crate::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

/// File layout of a run directory. Stages communicate only through these files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// Creates the run directory with its `models/` and `tables/` subdirectories.
    pub fn create(&self) -> Result<()> {
        for d in [self.root.clone(), self.models_dir(), self.tables_dir()] {
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        Ok(())
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }
    pub fn tables_dir(&self) -> PathBuf {
        self.root.join("tables")
    }
    /// Default location of generated or supplied source CSVs.
    pub fn data_dir(&self) -> PathBuf {
        self.root.join("data")
    }
    pub fn cohort_files(&self) -> CohortFiles {
        CohortFiles::in_dir(&self.data_dir())
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn integrated(&self) -> PathBuf {
        self.root.join("integrated.jsonl")
    }
    pub fn exclusions(&self) -> PathBuf {
        self.root.join("exclusions.csv")
    }
    pub fn rejects(&self) -> PathBuf {
        self.root.join("rejects.csv")
    }
    pub fn features(&self) -> PathBuf {
        self.root.join("features.jsonl")
    }
    pub fn trajectories(&self) -> PathBuf {
        self.root.join("trajectories.jsonl")
    }
    pub fn predictions(&self) -> PathBuf {
        self.root.join("predictions.jsonl")
    }
    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.json")
    }
    pub fn cv_compare(&self) -> PathBuf {
        self.root.join("cv_compare.json")
    }
    pub fn loco(&self) -> PathBuf {
        self.root.join("loco.json")
    }
    pub fn fairness(&self) -> PathBuf {
        self.root.join("fairness.json")
    }
    pub fn model(&self, name: &str) -> PathBuf {
        self.models_dir().join(format!("{name}.json"))
    }
    pub fn table(&self, name: &str) -> PathBuf {
        self.tables_dir().join(format!("{name}.csv"))
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// One JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for item in items {
        writeln!(w, "{}", serde_json::to_string(item)?).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Writes a CSV table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.jsonl");
        let items = vec![vec![1.5, 2.0], vec![], vec![0.1]];
        write_jsonl(&p, &items).unwrap();
        let back: Vec<Vec<f64>> = read_jsonl(&p).unwrap();
        assert_eq!(back, items);
    }
}
