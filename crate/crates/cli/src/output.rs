//! Artifact writer. Every CSV starts with `# config_hash=<hex>`.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::settings::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(u64),
    S(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::I(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Self::I(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Self::I(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Self::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Self::S(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Self::Empty, Into::into)
    }
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Self::F(v) => fmt_f64(*v),
            Self::I(v) => v.to_string(),
            Self::S(s) => s.clone(),
            Self::Empty => String::new(),
        }
    }
}

/// Shortest round-trip representation; scientific outside `[1e-5, 1e16)`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if v == 0.0 || (1e-5..1e16).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// JSON number, or a string for non-finite values.
pub fn jnum(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(fmt_f64(v))
    }
}

#[derive(Debug)]
pub struct Output {
    dir: PathBuf,
    hash: String,
    files: Vec<(String, String)>,
}

impl Output {
    pub fn create(dir: &Path, hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash: hash.to_string(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn table<R>(&mut self, name: &str, header: &[&str], rows: R) -> Result<(), CliError>
    where
        R: IntoIterator<Item = Vec<Cell>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Config(format!("csv encoding: {e}"));
        w.write_record(header).map_err(io)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len(), "{name}");
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        let body = w
            .into_inner()
            .map_err(|e| CliError::Config(format!("csv encoding: {e}")))?;
        self.csv_text(name, &String::from_utf8_lossy(&body))
    }

    /// A CSV body produced elsewhere.
    pub fn csv_text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let text = format!("# config_hash={}\n{body}", self.hash);
        self.write(name, &text)
    }

    pub fn svg(&mut self, name: &str, svg: &str) -> Result<(), CliError> {
        let text = match svg.find("?>") {
            Some(i) if svg.starts_with("<?xml") => {
                format!(
                    "{}\n<!-- config_hash={} -->{}",
                    &svg[..i + 2],
                    self.hash,
                    &svg[i + 2..]
                )
            }
            _ => format!("<!-- config_hash={} -->\n{svg}", self.hash),
        };
        self.write(name, &text)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        let digest = hex::encode(Sha256::digest(text.as_bytes()));
        self.files.push((name.to_string(), digest));
        Ok(())
    }

    pub fn files(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Writes `summary.json` and `manifest.json`.
    pub fn finish(
        mut self,
        cfg: &RunConfig,
        workers: usize,
        summary: Value,
    ) -> Result<Vec<String>, CliError> {
        let summary = json!({
            "experiment": cfg.experiment.name(),
            "config_hash": cfg.hash,
            "seed": cfg.seed,
            "results": summary,
        });
        let text = serde_json::to_string_pretty(&summary).expect("json") + "\n";
        self.write("summary.json", &text)?;
        let manifest = json!({
            "experiment": cfg.experiment.name(),
            "config_hash": cfg.hash,
            "seed": cfg.seed,
            "workers": workers,
            "versions": {
                "flowlab": flowlab::VERSION,
                "flowlab-cli": env!("CARGO_PKG_VERSION"),
            },
            "config": cfg.canonical,
            "files": self.files.iter().map(|(n, d)| json!({"name": n, "sha256": d})).collect::<Vec<_>>(),
        });
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("json") + "\n";
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        let mut names: Vec<String> = self.files.into_iter().map(|(n, _)| n).collect();
        names.push("manifest.json".into());
        Ok(names)
    }
}
