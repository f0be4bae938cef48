//! Writing result files. Each file carries the tool version, the seed and the
//! configuration echo: CSV as leading `#` lines, JSON as top-level keys.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};
use crate::CliError;

pub const VERSION: &str = concat!("ife ", env!("CARGO_PKG_VERSION"));

pub struct Sink {
    dir: Option<PathBuf>,
    format: Format,
    seed: u64,
    config: Value,
}

impl Sink {
    pub fn new(config: &RunConfig) -> Result<Self, CliError> {
        if let Some(dir) = &config.out {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
        }
        Ok(Self {
            dir: config.out.clone(),
            format: config.format(),
            seed: config.seed(),
            config: serde_json::to_value(config.echo()).map_err(|e| CliError::Input(e.to_string()))?,
        })
    }

    /// Whether files go to a directory (otherwise the main result goes to
    /// standard output).
    pub fn has_dir(&self) -> bool {
        self.dir.is_some()
    }

    /// Writes `stem.csv` or `stem.json` depending on the format. `meta` are
    /// scalar facts about the run; `table` is the CSV body and `payload` the
    /// JSON result.
    pub fn emit(&self, stem: &str, meta: &[(&str, Value)], table: &str, payload: Value) -> Result<(), CliError> {
        let text = match self.format {
            Format::Csv => self.csv(meta, table),
            Format::Json => self.json(meta, payload)?,
        };
        let ext = match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        self.write(&format!("{stem}.{ext}"), &text)
    }

    /// Writes a CSV file regardless of the format (plot-ready data).
    pub fn emit_csv(&self, name: &str, meta: &[(&str, Value)], table: &str) -> Result<(), CliError> {
        let text = self.csv(meta, table);
        self.write(name, &text)
    }

    fn csv(&self, meta: &[(&str, Value)], table: &str) -> String {
        let mut s = format!("# version: {VERSION}\n# seed: {}\n# config: {}\n", self.seed, self.config);
        for (k, v) in meta {
            let v = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            s.push_str(&format!("# {k}: {v}\n"));
        }
        s.push_str(table);
        s
    }

    fn json(&self, meta: &[(&str, Value)], payload: Value) -> Result<String, CliError> {
        let mut m = Map::new();
        m.insert("version".into(), VERSION.into());
        m.insert("seed".into(), self.seed.into());
        m.insert("config".into(), self.config.clone());
        for (k, v) in meta {
            m.insert(k.to_string(), v.clone());
        }
        m.insert("result".into(), payload);
        let mut s = serde_json::to_string_pretty(&Value::Object(m)).map_err(|e| CliError::Input(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    fn write(&self, name: &str, text: &str) -> Result<(), CliError> {
        match &self.dir {
            Some(dir) => write_file(&dir.join(name), text),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes()).map_err(|e| CliError::Input(e.to_string()))
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

/// Human-readable output: standard output when files go to a directory,
/// standard error when standard output carries the result.
pub fn present(sink: &Sink, text: &str) {
    if sink.has_dir() {
        print!("{text}");
    } else {
        eprint!("{text}");
    }
}
