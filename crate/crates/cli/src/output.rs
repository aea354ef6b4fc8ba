//! In-memory output files and their serialization.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const JSON_SCHEMA_VERSION: u32 = 1;

/// Floats in CSVs carry 17 significant digits so they round-trip exactly.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl OutputFile {
    pub fn sha256(&self) -> String {
        hex(&Sha256::digest(&self.bytes))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Builds a CSV file row by row.
pub struct Table {
    name: String,
    width: usize,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).expect("writing to memory");
        Table {
            name: name.to_string(),
            width: header.len(),
            writer,
        }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let record = csv::ByteRecord::from_iter(fields);
        assert_eq!(record.len(), self.width, "{}: row width differs from header", self.name);
        self.writer.write_byte_record(&record).expect("writing to memory");
    }

    pub fn finish(self) -> OutputFile {
        let bytes = self.writer.into_inner().expect("flushing to memory");
        OutputFile { name: self.name, bytes }
    }
}

pub fn json<T: Serialize>(name: &str, value: &T) -> anyhow::Result<OutputFile> {
    let mut bytes = serde_json::to_vec_pretty(value).with_context(|| format!("serializing {name}"))?;
    bytes.push(b'\n');
    Ok(OutputFile {
        name: name.to_string(),
        bytes,
    })
}

/// Writes every file into `dir`. If any write fails, files written so far
/// are removed again (and `dir` too if this call created it).
pub fn write_all(dir: &Path, files: &[OutputFile]) -> anyhow::Result<Vec<PathBuf>> {
    let created = !dir.exists();
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut written = Vec::new();
    for file in files {
        let path = dir.join(&file.name);
        if let Err(e) = fs::write(&path, &file.bytes) {
            remove_partial(dir, created, &written);
            let _ = fs::remove_file(&path);
            return Err(e).with_context(|| format!("writing {}", path.display()));
        }
        written.push(path);
    }
    Ok(written)
}

pub fn remove_partial(dir: &Path, created: bool, written: &[PathBuf]) {
    for path in written {
        let _ = fs::remove_file(path);
    }
    if created {
        let _ = fs::remove_dir(dir);
    }
}
