//! Run reports: a deterministic JSON document plus a human-readable text
//! rendering. Wall time appears only in the text report so that identical
//! inputs produce byte-identical JSON.

use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const REPORT_VERSION: &str = "1";

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub version: String,
    pub command: String,
    pub spec_digest: String,
    pub seed: u64,
    pub params: BTreeMap<String, Value>,
    pub verdict: String,
    pub margin: Option<f64>,
    pub witnesses: Vec<Value>,
    pub details: BTreeMap<String, Value>,
}

impl RunReport {
    pub fn new(command: &str, spec_digest: String, seed: u64) -> RunReport {
        RunReport {
            version: REPORT_VERSION.to_string(),
            command: command.to_string(),
            spec_digest,
            seed,
            params: BTreeMap::new(),
            verdict: String::new(),
            margin: None,
            witnesses: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.params.insert(
            key.to_string(),
            serde_json::to_value(value).expect("serializable param"),
        );
        self
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.details.insert(
            key.to_string(),
            serde_json::to_value(value).expect("serializable detail"),
        );
        self
    }

    pub fn witness_point(&mut self, p: [f64; 2]) -> &mut Self {
        self.witnesses.push(serde_json::json!([p[0], p[1]]));
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self, wall: std::time::Duration) -> String {
        let mut out = String::new();
        out.push_str(&format!("command: {}\n", self.command));
        out.push_str(&format!("spec:    {}\n", self.spec_digest));
        out.push_str(&format!("seed:    {}\n", self.seed));
        for (k, v) in &self.params {
            out.push_str(&format!("param:   {k} = {v}\n"));
        }
        out.push_str(&format!("verdict: {}\n", self.verdict));
        if let Some(m) = self.margin {
            out.push_str(&format!("margin:  {m}\n"));
        }
        for w in &self.witnesses {
            out.push_str(&format!("witness: {w}\n"));
        }
        for (k, v) in &self.details {
            out.push_str(&format!("{k}: {v}\n"));
        }
        out.push_str(&format!("wall_time_ms: {:.3}\n", wall.as_secs_f64() * 1e3));
        out
    }

    /// Writes `<out>/<command>.report.json` and `.report.txt`; returns the
    /// JSON path.
    pub fn write(
        &self,
        out_dir: &Path,
        wall: std::time::Duration,
    ) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(out_dir)?;
        let json_path = out_dir.join(format!("{}.report.json", self.command));
        std::fs::write(&json_path, self.to_json())?;
        let txt_path = out_dir.join(format!("{}.report.txt", self.command));
        std::fs::write(txt_path, self.to_text(wall))?;
        Ok(json_path)
    }
}

/// FNV-1a 64-bit digest, hex-encoded. Stable across platforms.
pub fn digest(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("fnv1a:{h:016x}")
}

/// Writes a CSV file with the given header and rows.
pub fn write_csv(
    path: &Path,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    std::fs::write(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable() {
        assert_eq!(digest(b""), "fnv1a:cbf29ce484222325");
        assert_eq!(digest(b"abc"), digest(b"abc"));
        assert_ne!(digest(b"abc"), digest(b"abd"));
    }

    #[test]
    fn json_is_deterministic() {
        let mut r = RunReport::new("demo", digest(b"x"), 7);
        r.param("grid", 512).detail("z_last", 1.5).detail("a_first", true);
        r.verdict = "certified".into();
        assert_eq!(r.to_json(), r.clone().to_json());
        // BTreeMap ordering puts a_first before z_last.
        let json = r.to_json();
        assert!(json.find("a_first").unwrap() < json.find("z_last").unwrap());
        assert!(!json.contains("wall"));
    }
}
