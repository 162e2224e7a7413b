//! On-disk formats: binary matrices, label lists and key-value run reports.
//!
//! Matrix layout (little endian): `b"COKE"`, `u32` version, `u64` rows,
//! `u32` columns, then `rows · cols` `f32` values in row-major order.

use std::fmt::Display;
use std::fs;
use std::path::Path;

use crate::error::{CokeError, Result};

pub const MATRIX_MAGIC: &[u8; 4] = b"COKE";
pub const MATRIX_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 4;

pub fn encode_matrix(rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let cols = rows.first().map_or(0, Vec::len);
    if let Some(r) = rows.iter().find(|r| r.len() != cols) {
        return Err(CokeError::Shape { expected: cols, got: r.len() });
    }
    let cols32 = u32::try_from(cols).map_err(|_| CokeError::Format("too many columns".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + rows.len() * cols * 4);
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    out.extend_from_slice(&cols32.to_le_bytes());
    for v in rows.iter().flatten() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    if bytes.len() < HEADER_LEN {
        return Err(CokeError::Format("matrix file shorter than its header".into()));
    }
    if &bytes[..4] != MATRIX_MAGIC {
        return Err(CokeError::Format("bad magic; not a matrix file".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != MATRIX_VERSION {
        return Err(CokeError::Format(format!("unsupported matrix version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let cols = u32::from_le_bytes(bytes[16..20].try_into().expect("4 bytes")) as usize;
    let payload = &bytes[HEADER_LEN..];
    let want = rows.checked_mul(cols).and_then(|c| c.checked_mul(4));
    if want != Some(payload.len()) {
        return Err(CokeError::Format(format!("payload is {} bytes, header promises {rows} x {cols} floats", payload.len())));
    }
    let values: Vec<f64> = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
    Ok(if cols == 0 { vec![Vec::new(); rows] } else { values.chunks(cols).map(<[f64]>::to_vec).collect() })
}

pub fn write_matrix(path: impl AsRef<Path>, rows: &[Vec<f64>]) -> Result<()> {
    Ok(fs::write(path, encode_matrix(rows)?)?)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    decode_matrix(&fs::read(path)?)
}

pub fn encode_labels(labels: &[usize]) -> String {
    let mut out = String::from("id,label\n");
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out
}

pub fn decode_labels(text: &str) -> Result<Vec<usize>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "id,label" => {}
        _ => return Err(CokeError::Format("label file must start with the header `id,label`".into())),
    }
    let mut labels = Vec::new();
    for (expected, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let (id, label) = line.split_once(',').ok_or_else(|| CokeError::Format(format!("malformed label line `{line}`")))?;
        let id: usize = id.trim().parse().map_err(|_| CokeError::Format(format!("bad id in `{line}`")))?;
        if id != expected {
            return Err(CokeError::Format(format!("ids must be contiguous: expected {expected}, got {id}")));
        }
        labels.push(label.trim().parse().map_err(|_| CokeError::Format(format!("bad label in `{line}`")))?);
    }
    Ok(labels)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    Ok(fs::write(path, encode_labels(labels))?)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    decode_labels(&fs::read_to_string(path)?)
}

/// One report line: ordered `key=value` pairs. Values never contain whitespace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record(Vec<(String, String)>);

impl Record {
    pub fn new(kind: &str) -> Self {
        Record(vec![("kind".into(), kind.into())])
    }

    pub fn with(mut self, key: &str, value: impl Display) -> Self {
        self.push(key, value);
        self
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        let v = value.to_string().replace(char::is_whitespace, "_");
        self.0.push((key.to_string(), v));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn kind(&self) -> Option<&str> {
        self.get("kind")
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.0
    }
}

impl Display for Record {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

pub fn format_report(records: &[Record]) -> String {
    records.iter().map(|r| format!("{r}\n")).collect()
}

pub fn parse_report(text: &str) -> Result<Vec<Record>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            line.split_whitespace()
                .map(|kv| {
                    kv.split_once('=')
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .ok_or_else(|| CokeError::Format(format!("expected key=value, got `{kv}`")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Record)
        })
        .collect()
}

pub fn write_report(path: impl AsRef<Path>, records: &[Record]) -> Result<()> {
    Ok(fs::write(path, format_report(records))?)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Vec<Record>> {
    parse_report(&fs::read_to_string(path)?)
}
