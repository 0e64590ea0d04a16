//! Versioned plain-text checkpoint container: a magic line followed by
//! named `[section]` blocks of `key = value` lines.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &str = "hooptraj-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

/// Decimal with 17 significant digits; parses back to the same `f64`.
pub fn fmt_num<T: Scalar>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

pub fn parse_num<T: Scalar>(s: &str) -> Result<T> {
    s.trim().parse::<f64>().map(T::lit).map_err(|_| Error::Checkpoint(format!("bad number {s:?}")))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section {
    pub name: String,
    pub entries: Vec<(String, String)>,
}

impl Section {
    pub fn new(name: &str) -> Self {
        Self { name: name.into(), entries: Vec::new() }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.push(key, value);
        self
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Checkpoint(format!("[{}] missing key {key}", self.name)))
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries.iter().filter(move |(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn parse<V: std::str::FromStr>(&self, key: &str) -> Result<V> {
        let raw = self.get(key)?;
        raw.parse().map_err(|_| Error::Checkpoint(format!("[{}] bad value for {key}: {raw:?}", self.name)))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckpointFile {
    pub sections: Vec<Section>,
}

impl CheckpointFile {
    pub fn section(&self, name: &str) -> Result<&Section> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing section [{name}]")))
    }

    pub fn render(&self) -> String {
        let mut out = format!("{MAGIC} v{FORMAT_VERSION}\n");
        for s in &self.sections {
            out.push_str(&format!("[{}]\n", s.name));
            for (k, v) in &s.entries {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().unwrap_or_default();
        if first != format!("{MAGIC} v{FORMAT_VERSION}") {
            return Err(Error::Checkpoint(format!("unsupported checkpoint header {first:?}")));
        }
        let mut file = CheckpointFile::default();
        for line in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                file.sections.push(Section::new(name));
                continue;
            }
            let (k, v) = line.split_once(" = ").ok_or_else(|| Error::Checkpoint(format!("malformed line {line:?}")))?;
            file.sections.last_mut().ok_or_else(|| Error::Checkpoint("entry before first section".into()))?.push(k, v);
        }
        Ok(file)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
