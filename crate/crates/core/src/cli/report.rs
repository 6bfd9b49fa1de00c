use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Provenance of one run. The timestamp lives here only, never in payloads.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config: Value,
    pub seed: u64,
    pub tool_version: String,
    /// `sha256:<hex>` of the input file, or of the empty string.
    pub input_hash: String,
    /// Seconds since the epoch; `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
}

pub fn input_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

pub fn timestamp_now() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse().ok()) {
        return t;
    }
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    manifest: &'a RunManifest,
    payload: &'a T,
}

pub fn json_document<T: Serialize>(manifest: &RunManifest, payload: &T) -> serde_json::Result<String> {
    let mut s = serde_json::to_string_pretty(&Envelope { manifest, payload })?;
    s.push('\n');
    Ok(s)
}

/// RFC 4180 with LF record terminators.
pub fn csv_document(header: &[String], rows: &[Vec<f64>]) -> io::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| number(*v)))?;
    }
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

/// Shortest round-trip form, in exponent notation for very small or large values.
pub fn number(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-5..1e16).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Writes `bytes` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_lf_and_quotes_when_needed() {
        let out = csv_document(&["t".into(), "x,1".into()], &[vec![0.5, -1e-7]]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "t,\"x,1\"\n0.5,-1e-7\n");
    }

    #[test]
    fn hash_of_empty_input() {
        assert_eq!(input_hash(b""), "sha256:e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
