use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::CliError;

pub const GENERATOR: &str = "ctxrisk";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self {
            config_hash,
            seed,
            version: VERSION.to_string(),
        }
    }
}

/// First line of every CSV output.
pub fn provenance_line(p: &Provenance) -> String {
    format!(
        "# generator={GENERATOR} version={} config_hash={} seed={}",
        p.version, p.config_hash, p.seed
    )
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// A CSV file with the provenance comment on top.
pub struct CsvOut {
    writer: csv::Writer<BufWriter<File>>,
    path: std::path::PathBuf,
}

impl CsvOut {
    pub fn create(path: &Path, prov: &Provenance, header: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut buf = BufWriter::new(file);
        writeln!(buf, "{}", provenance_line(prov)).map_err(|e| CliError::io(path, e))?;
        let mut writer = csv::Writer::from_writer(buf);
        writer.write_record(header).map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            writer,
            path: path.to_path_buf(),
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| CliError::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}
